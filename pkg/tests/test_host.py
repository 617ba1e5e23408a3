"""Host agent: region setup, ELF loading, start ordering, syscall servicing,
and sandbox confinement."""

import os

import pytest

from tilesim import corpus
from tilesim.asm import assemble
from tilesim.config import MachineConfig
from tilesim.elf import program_to_elf
from tilesim.errors import LoadError, SimError
from tilesim.host import GuestImage, GuestRegion
from tilesim.machine import Machine
from tilesim.mem import flip
from tilesim import elf as elfmod
from tilesim.syscalls import ExitRequest, SyscallHandler


def small_config(**kw):
    cfg = MachineConfig(guest_region_size=256 * 1024, dram_size=2 * 1024 * 1024,
                        stack_size=16 * 1024, **kw)
    cfg.validate()
    return cfg


def make_machine(source: str | None = None, config=None, **machine_kw):
    cfg = config or small_config()
    blob = None
    if source is not None:
        program = assemble([corpus.read_source("runtime.s"), source],
                           base=cfg.guest_base, defines=corpus.standard_defines(cfg))
        blob = program_to_elf(program)
    return Machine(cfg, binary=blob, **machine_kw)


# -- pico_setup -----------------------------------------------------------------


def test_setup_returns_region_at_configured_base():
    m = make_machine()
    region = m.host.pico_setup(m.config.guest_region_size)
    assert region.base == 0x0001_0000
    assert region.mailbox_addr == region.top - 64
    assert m.fabric.in_window(region.base, 4)
    assert m.fabric.in_window(region.top - 4, 4)
    assert not m.fabric.in_window(region.top, 4)


def test_setup_zero_size_rejected():
    m = make_machine()
    with pytest.raises(SimError, match="step 1"):
        m.host.pico_setup(0)


def test_setup_exhausted_map_rejected():
    m = make_machine()
    with pytest.raises(SimError, match="step 1"):
        m.host.pico_setup(1 << 30)


def test_setup_idempotent_reuse():
    m = make_machine()
    r1 = m.host.pico_setup(m.config.guest_region_size)
    m.fabric.dram[r1.base] = 0xAB
    r2 = m.host.pico_setup(m.config.guest_region_size)
    assert (r2.base, r2.size) == (r1.base, r1.size)
    assert m.fabric.dram[r1.base] == 0  # re-setup zero-fills


# -- load_binary ------------------------------------------------------------------


def _blob(source: str, cfg, base=None):
    program = assemble(source, base=base if base is not None else cfg.guest_base)
    return program_to_elf(program)


def test_load_rejects_wrong_entry():
    cfg = small_config()
    m = Machine(cfg, binary=_blob("nop", cfg, base=cfg.guest_base + 0x100))
    region = m.host.pico_setup(cfg.guest_region_size)
    with pytest.raises(LoadError, match="reset vector"):
        GuestImage.validate(m.parse_binary(), region, cfg.reset_vector, cfg.stack_size)


def test_load_rejects_segment_outside_region():
    cfg = small_config()
    image = elfmod.ElfImage(
        entry=cfg.reset_vector,
        segments=[elfmod.Segment(cfg.guest_base - 0x1000, b"\x13\x00\x00\x00", 4)],
        symbols={},
    )
    region = GuestRegion(cfg.guest_base, cfg.guest_region_size,
                         cfg.guest_region_size - 64)
    with pytest.raises(LoadError, match="outside the guest region"):
        GuestImage.validate(image, region, cfg.reset_vector, cfg.stack_size)


def test_load_rejects_mailbox_overlap():
    cfg = small_config()
    mailbox_addr = cfg.guest_base + cfg.guest_region_size - 64
    image = elfmod.ElfImage(
        entry=cfg.reset_vector,
        segments=[
            elfmod.Segment(cfg.guest_base, b"\x13\x00\x00\x00", 4),
            elfmod.Segment(mailbox_addr, b"\x00" * 8, 8),
        ],
        symbols={},
    )
    region = GuestRegion(cfg.guest_base, cfg.guest_region_size,
                         cfg.guest_region_size - 64)
    with pytest.raises(LoadError, match="mailbox|stack"):
        GuestImage.validate(image, region, cfg.reset_vector, cfg.stack_size)


def test_loader_roundtrip_through_fabric():
    """Bytes written by the (big-endian) loader read back identically for the
    little-endian guest: the cross-endian path is transparent."""
    cfg = small_config()
    payload = bytes(range(1, 90))  # odd length: exercises byte head/tail paths
    program = assemble("_start: nop", base=cfg.guest_base)
    blob = program_to_elf(program)
    m = Machine(cfg, binary=blob)
    region = m.host.pico_setup(cfg.guest_region_size)
    image = GuestImage.validate(m.parse_binary(), region, cfg.reset_vector, cfg.stack_size)
    m.host.load_binary(image, region)
    # hand-load an extra blob via the host helpers
    addr = cfg.guest_base + 0x4000
    m.host.write_guest_bytes(addr, payload)
    assert m.host.read_guest_bytes(addr, len(payload)) == payload
    guest_port = m.cores[cfg.guest_tile()].port
    got = bytes(guest_port.load(addr + i, 1)[0] for i in range(len(payload)))
    assert got == payload


def test_pico_start_before_load_rejected():
    m = make_machine()
    m.host.pico_setup(m.config.guest_region_size)
    with pytest.raises(SimError, match="step 3"):
        m.host.pico_start(m.host.region)


def test_start_trace_has_three_labeled_substeps(tmp_path):
    trace_path = tmp_path / "trace.txt"
    m = make_machine("main: li a0, 0\n ret", trace_path=str(trace_path))
    m.run()
    text = trace_path.read_text()
    assert "step=3 syscall" in text
    assert "step=4 hypercall" in text
    assert "step=5 interrupt" in text


def test_guest_running_after_start():
    m = make_machine("main: li a0, 0\n ret")
    stats = m.run()
    assert stats["exit_status"] == 0
    core = m.cores[m.config.guest_tile()].core
    assert core.instret > 0


# -- syscall servicing ---------------------------------------------------------------


def run_guest(source: str, sandbox: str, config=None):
    m = make_machine(source, config=config, sandbox_dir=sandbox)
    stats = m.run()
    return m, stats


def test_write_appears_on_stdout(tmp_path):
    m, stats = run_guest(
        'main: addi sp, sp, -16\n sw ra, 12(sp)\n la a0, msg\n jal ra, print_str\n'
        ' lw ra, 12(sp)\n addi sp, sp, 16\n li a0, 0\n ret\n msg: .asciz "hi there\\n"',
        str(tmp_path),
    )
    assert bytes(m.stdout_data) == b"hi there\n"
    assert stats["exit_status"] == 0


def test_exit_status_propagates(tmp_path):
    m, stats = run_guest("main: li a0, 42\n ret", str(tmp_path))
    assert stats["exit_status"] == 42


def test_unknown_syscall_returns_enosys(tmp_path):
    src = """
main:
    addi sp, sp, -16
    sw   ra, 12(sp)
    li   a0, 9999
    jal  ra, __syscall
    # a0 = -1, a1 = ENOSYS(38): return a1 - 37 => 1, and a0+2 => 1
    addi t0, a1, -37
    addi t1, a0, 2
    add  a0, t0, t1
    lw   ra, 12(sp)
    addi sp, sp, 16
    ret
"""
    m, stats = run_guest(src, "/tmp")
    assert stats["exit_status"] == 2  # 1 + 1: errno was 38 and ret was -1


def test_openat_read_close_in_sandbox(tmp_path):
    (tmp_path / "data.txt").write_bytes(b"ABCDEFGH")
    src = """
main:
    addi sp, sp, -32
    sw   ra, 28(sp)
    # openat(AT_FDCWD, "data.txt", O_RDONLY, 0)
    li   a0, 56
    li   a1, -100
    la   a2, path
    li   a3, 0
    li   a4, 0
    jal  ra, __syscall
    mv   s0, a0                  # fd
    # read(fd, buf, 8)
    li   a0, 63
    mv   a1, s0
    la   a2, buf
    li   a3, 8
    jal  ra, __syscall
    mv   s1, a0                  # bytes read
    # write(1, buf, s1)
    li   a0, 64
    li   a1, 1
    la   a2, buf
    mv   a3, s1
    jal  ra, __syscall
    # close(fd)
    li   a0, 57
    mv   a1, s0
    jal  ra, __syscall
    mv   a0, s1
    lw   ra, 28(sp)
    addi sp, sp, 32
    ret
path:
    .asciz "data.txt"
    .balign 4
buf:
    .space 16
"""
    m, stats = run_guest(src, str(tmp_path))
    assert bytes(m.stdout_data) == b"ABCDEFGH"
    assert stats["exit_status"] == 8


def test_read_missing_file_propagates_enoent(tmp_path):
    src = """
main:
    addi sp, sp, -16
    sw   ra, 12(sp)
    li   a0, 56
    li   a1, -100
    la   a2, path
    li   a3, 0
    li   a4, 0
    jal  ra, __syscall
    # expect a0 == -1, a1 == ENOENT (2)
    mv   a0, a1
    lw   ra, 12(sp)
    addi sp, sp, 16
    ret
path:
    .asciz "no-such-file"
"""
    m, stats = run_guest(src, str(tmp_path))
    assert stats["exit_status"] == 2  # ENOENT


# handler-level tests (no guest program needed)


class FakeMem:
    def __init__(self):
        self.data = bytearray(1 << 16)

    def read(self, addr, n):
        return bytes(self.data[addr : addr + n])

    def write(self, addr, blob):
        self.data[addr : addr + len(blob)] = blob


def make_handler(tmp_path, **kw):
    mem = FakeMem()
    out, err = [], []
    handler = SyscallHandler(
        sandbox_dir=str(tmp_path), read_bytes=mem.read, write_bytes=mem.write,
        stdout=out.append, stderr=err.append,
        heap_start=0x1000, heap_limit=0x8000, **kw,
    )
    return handler, mem, out, err


def test_handler_sandbox_escape_refused(tmp_path):
    handler, mem, _, _ = make_handler(tmp_path)
    for path in (b"/etc/passwd\x00", b"../escape\x00", b"a/../../up\x00"):
        mem.write(0x100, path)
        ret, err = handler.handle(56, [-100 & 0xFFFFFFFF, 0x100, 0, 0, 0, 0])
        assert ret == -1
        assert err == 13  # EACCES


def test_handler_lseek_and_fstat(tmp_path):
    (tmp_path / "f.bin").write_bytes(b"x" * 1000)
    handler, mem, _, _ = make_handler(tmp_path)
    mem.write(0x100, b"f.bin\x00")
    fd, err = handler.handle(56, [-100 & 0xFFFFFFFF, 0x100, 0, 0, 0, 0])
    assert err == 0 and fd >= 3
    pos, err = handler.handle(62, [fd, 100, 0, 0, 0, 0])  # SEEK_SET
    assert (pos, err) == (100, 0)
    ret, err = handler.handle(80, [fd, 0x200, 0, 0, 0, 0])
    assert (ret, err) == (0, 0)
    size = int.from_bytes(mem.read(0x204, 4), "little")
    assert size == 1000
    handler.handle(57, [fd, 0, 0, 0, 0, 0])


def test_handler_fstat_tty_mode(tmp_path):
    handler, mem, _, _ = make_handler(tmp_path)
    ret, err = handler.handle(80, [1, 0x300, 0, 0, 0, 0])
    assert (ret, err) == (0, 0)
    mode = int.from_bytes(mem.read(0x300, 4), "little")
    assert mode & 0o170000 == 0o020000  # character device


def test_handler_brk(tmp_path):
    handler, _, _, _ = make_handler(tmp_path)
    cur, _ = handler.handle(214, [0, 0, 0, 0, 0, 0])
    assert cur == 0x1000
    new, _ = handler.handle(214, [0x2000, 0, 0, 0, 0, 0])
    assert new == 0x2000
    bad, _ = handler.handle(214, [0x9000, 0, 0, 0, 0, 0])
    assert bad == 0x2000  # out of bounds: old break returned


def test_handler_exit_raises(tmp_path):
    handler, _, _, _ = make_handler(tmp_path)
    with pytest.raises(ExitRequest) as exc:
        handler.handle(93, [3, 0, 0, 0, 0, 0])
    assert exc.value.status == 3


def test_handler_bad_fd(tmp_path):
    handler, _, _, _ = make_handler(tmp_path)
    ret, err = handler.handle(57, [77, 0, 0, 0, 0, 0])
    assert (ret, err) == (-1, 9)  # EBADF


def test_endianness_mode_does_not_change_results(tmp_path):
    (tmp_path / "z.txt").write_bytes(b"zz")
    outputs = []
    for mode in ("big", "little"):
        cfg = small_config(host_endianness=mode)
        src = ('main: addi sp, sp, -16\n sw ra, 12(sp)\n la a0, m\n jal ra, print_str\n'
               ' lw ra, 12(sp)\n addi sp, sp, 16\n li a0, 11\n ret\n m: .asciz "eq\\n"')
        m, stats = run_guest(src, str(tmp_path), config=cfg)
        outputs.append((bytes(m.stdout_data), stats["exit_status"]))
    assert outputs[0] == outputs[1] == (b"eq\n", 11)


def test_flip_helper_definition():
    assert flip(0x0000_0001, 4) == 0x0100_0000
    assert flip(flip(0xDEADBEEF, 4), 4) == 0xDEADBEEF
