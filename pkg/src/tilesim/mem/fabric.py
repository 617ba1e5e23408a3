"""The coherent memory fabric.

Per-tile private caches (the guest core's first-level cache; instructions and
data both allocate) sit in front of a distributed shared L2 whose slices are
line-interleaved across tiles by address. Each L2 slice embeds the directory
for the lines it homes, running a blocking directory MSI protocol with stable
states only: Invalid (no cached copies), Shared (sharer set, no owner),
Modified (exactly one owner, empty sharer set).

A memory operation is one atomic transaction: the full message cascade
(request, invalidations/downgrades, acks, data, victim writebacks) completes
through the mesh before the next scheduler event. Latency charged to the
requester is classified by who serviced the line:

    private-cache hit    l15_hit_cycles        (exact)
    home L2 / peer copy  l15_to_l2_cycles
    DRAM                 dram_access_cycles +/- jitter (seeded draw, exact
                         without jitter)

Shared-state evictions are silent, so directory sharer sets may be stale
supersets; an Invalidate to a non-holder is acked without state change.
Modified evictions write back on channel 3 and are never silent, so ownership
is never stale. L2 evictions recall the line from any holders first
(inclusion), then write DRAM.

Byte lanes: the fabric's canonical word order is big-endian (host-style); the
guest-side transducer flips lanes in both directions so guest data is stored
little-endian in memory. Host ports return raw fabric words in big mode, and
host code applies the flip helpers itself.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from ..config import MachineConfig
from ..errors import MemoryFault, ProtocolError, SimError
from ..noc import Noc, NocMessage
from .cache import CacheArray, CacheLine, LineState

SERVICED_L15 = "L15"
SERVICED_L2 = "L2"
SERVICED_DRAM = "DRAM"

KIND_IFETCH = "ifetch"
KIND_LOAD = "load"
KIND_STORE = "store"

_DIR_INPUTS = {"GetShared", "GetModified", "Writeback", "InvalidateAck", "DowngradeAck"}


def transduce(value: int, width: int, direction: str = "outbound") -> int:
    """Byte-lane flip between the little-endian core and the big-endian fabric.

    An involution: the same flip applies outbound (core store -> fabric word)
    and inbound (fabric word -> core load).
    """
    if direction not in ("outbound", "inbound"):
        raise SimError(f"bad transducer direction {direction!r}")
    return int.from_bytes(value.to_bytes(width, "big"), "little")


def flip(value: int, width: int) -> int:
    """Host-side endianness helper: byte-reverse a width-byte value."""
    return int.from_bytes(value.to_bytes(width, "big"), "little")


@dataclass
class MemoryTransaction:
    origin: int
    address: int
    width: int
    kind: str
    payload: int | None = None
    issue_cycle: int = 0
    complete_cycle: int = 0
    serviced_by: str = SERVICED_L15

    @property
    def latency(self) -> int:
        return self.complete_cycle - self.issue_cycle


@dataclass
class DirectoryEntry:
    state: LineState = LineState.INVALID  # INVALID: no cached copies (data may sit in L2)
    owner: int | None = None
    sharers: set[int] = field(default_factory=set)

    def check(self, line_addr: int):
        if self.state is LineState.MODIFIED:
            if self.owner is None or self.sharers:
                raise ProtocolError(f"dir 0x{line_addr:08x}: bad Modified entry {self}")
        elif self.owner is not None:
            raise ProtocolError(f"dir 0x{line_addr:08x}: owner set in {self.state}")


@dataclass
class _Pending:
    op: str
    requester: int
    need_acks: int = 0
    data: bytes | None = None


class FabricPort:
    """Per-agent access port.

    mode "guest": values cross the lane-flipping transducer (little-endian
    core). mode "big"/"little": raw fabric words for the host agent, which is
    responsible for its own flip-helper discipline. Host ports are confined to
    registered shared windows; the guest addresses physical memory freely.
    """

    def __init__(self, fabric: MemoryFabric, tile: int, mode: str = "guest",
                 enforce_windows: bool = False):
        self.fabric = fabric
        self.tile = tile
        self.mode = mode
        self.enforce_windows = enforce_windows
        self.now_fn = lambda: 0

    def _check_window(self, addr: int, width: int):
        if self.enforce_windows and not self.fabric.in_window(addr, width):
            raise MemoryFault(addr, "outside every registered shared window")

    def fetch(self, addr: int) -> tuple[int, int]:
        data, tx = self.fabric.access(self.tile, KIND_IFETCH, addr, 4, now=self.now_fn())
        word = int.from_bytes(data, "big")
        return transduce(word, 4, "inbound"), tx.latency

    def load(self, addr: int, width: int) -> tuple[int, int]:
        self._check_window(addr, width)
        data, tx = self.fabric.access(self.tile, KIND_LOAD, addr, width, now=self.now_fn())
        raw = int.from_bytes(data, "big")
        if self.mode == "guest":
            return transduce(raw, width, "inbound"), tx.latency
        if self.mode == "little":
            return int.from_bytes(data, "little"), tx.latency
        return raw, tx.latency

    def store(self, addr: int, width: int, value: int) -> int:
        self._check_window(addr, width)
        if self.mode == "guest":
            raw = transduce(value, width, "outbound")
            data = raw.to_bytes(width, "big")
        elif self.mode == "little":
            data = value.to_bytes(width, "little")
        else:
            data = value.to_bytes(width, "big")
        _, tx = self.fabric.access(
            self.tile, KIND_STORE, addr, width, data=data, now=self.now_fn()
        )
        return tx.latency


class MemoryFabric:
    def __init__(self, config: MachineConfig, noc: Noc, trace=None):
        self.config = config
        self.noc = noc
        self.trace = trace
        geo = config.cache
        self.line_size = geo.line_size_bytes
        self.n_tiles = len(config.tiles)
        self.dram = bytearray(config.dram_size)
        self.l15 = [CacheArray(geo.l15_size_bytes, geo.l15_associativity, self.line_size)
                    for _ in range(self.n_tiles)]
        self.l2 = [CacheArray(geo.l2_slice_size_bytes, geo.l2_associativity, self.line_size)
                   for _ in range(self.n_tiles)]
        self.dirs: list[dict[int, DirectoryEntry]] = [{} for _ in range(self.n_tiles)]
        self.pending: dict[int, _Pending] = {}
        self.rng = random.Random(config.rng_seed)
        self.windows: list[tuple[int, int]] = []
        self.watches: dict[int, list] = {}
        self.shadow = bytearray(config.dram_size) if config.check_data_values else None
        self.stats: dict[str, int] = {}
        self.log: list[MemoryTransaction] = []
        self.keep_log = False
        self._serviced: str | None = None
        self._dram_latency = 0

    # -- bookkeeping --------------------------------------------------------

    def _bump(self, key: str, by: int = 1):
        self.stats[key] = self.stats.get(key, 0) + by

    def home_of(self, line_addr: int) -> int:
        return (line_addr // self.line_size) % self.n_tiles

    def register_window(self, base: int, size: int):
        if size <= 0:
            raise SimError("zero-length shared window rejected")
        if base < 0 or base + size > len(self.dram):
            raise MemoryFault(base, "window outside the physical map")
        self.windows.append((base, size))

    def in_window(self, addr: int, width: int) -> bool:
        return any(base <= addr and addr + width <= base + size for base, size in self.windows)

    def watch(self, addr: int, callback):
        self.watches.setdefault(addr, []).append(callback)

    # -- DRAM ----------------------------------------------------------------

    def dram_read(self, line_addr: int) -> tuple[bytes, int]:
        """Fetch one line; latency is the configured access time +/- jitter."""
        if line_addr + self.line_size > len(self.dram):
            raise MemoryFault(line_addr, "beyond the physical map")
        timing = self.config.timing
        jitter = timing.dram_jitter_cycles
        latency = timing.dram_access_cycles + (self.rng.randint(-jitter, jitter) if jitter else 0)
        self._bump("dram.reads")
        return bytes(self.dram[line_addr : line_addr + self.line_size]), latency

    def dram_write(self, line_addr: int, data: bytes):
        self.dram[line_addr : line_addr + self.line_size] = data
        self._bump("dram.writes")

    # -- the one entry point ---------------------------------------------------

    def access(self, tile: int, kind: str, addr: int, width: int,
               data: bytes | None = None, now: int = 0) -> tuple[bytes, MemoryTransaction]:
        if addr % width:
            raise SimError(f"fabric access must be width-aligned (0x{addr:x}/{width})")
        if addr + width > len(self.dram):
            raise MemoryFault(addr)
        line_addr = addr & ~(self.line_size - 1)
        offset = addr - line_addr
        if offset + width > self.line_size:
            raise SimError("access straddles a line")  # impossible for aligned width<=4

        side = "ifetch" if kind == KIND_IFETCH else "data"
        self._bump(f"l15.tile{tile}.{side}_accesses")
        cache = self.l15[tile]
        line = cache.lookup(line_addr)
        self._serviced = None

        if kind == KIND_STORE:
            if line is not None and line.state is LineState.MODIFIED:
                self._bump(f"l15.tile{tile}.{side}_hits")
                serviced, latency = SERVICED_L15, self.config.timing.l15_hit_cycles
            else:
                self._bump(f"l15.tile{tile}.{side}_misses")
                self._transact(tile, line_addr, "GetModified", now)
                serviced, latency = self._miss_outcome()
                line = cache.lookup(line_addr)
        else:
            if line is not None:
                self._bump(f"l15.tile{tile}.{side}_hits")
                serviced, latency = SERVICED_L15, self.config.timing.l15_hit_cycles
            else:
                self._bump(f"l15.tile{tile}.{side}_misses")
                self._transact(tile, line_addr, "GetShared", now)
                serviced, latency = self._miss_outcome()
                line = cache.lookup(line_addr)

        if line is None:
            raise ProtocolError(f"transaction left 0x{line_addr:08x} uninstalled")
        cache.touch(line)

        if kind == KIND_STORE:
            if line.state is not LineState.MODIFIED:
                raise ProtocolError(f"store granted on non-M line 0x{line_addr:08x}")
            line.data[offset : offset + width] = data
            if self.shadow is not None:
                self.shadow[addr : addr + width] = data
            out = bytes(data)
        else:
            out = bytes(line.data[offset : offset + width])
            if self.shadow is not None and out != bytes(self.shadow[addr : addr + width]):
                raise SimError(
                    f"data-value check failed at 0x{addr:08x}: "
                    f"read {out.hex()} expected {self.shadow[addr:addr + width].hex()}"
                )

        tx = MemoryTransaction(
            origin=tile, address=addr, width=width, kind=kind,
            payload=int.from_bytes(out, "big") if kind == KIND_STORE else None,
            issue_cycle=now, complete_cycle=now + latency, serviced_by=serviced,
        )
        self._check_line_invariants(line_addr)
        if self.pending:
            raise ProtocolError("pending directory transaction survived an access")
        if self.trace:
            self.trace(
                f"MEM cycle={now} tile={tile} kind={kind} addr=0x{addr:08x} width={width}"
                f" value=0x{out.hex()} serviced={serviced} latency={latency}"
            )
        if self.keep_log:
            self.log.append(tx)
        if kind == KIND_STORE and addr in self.watches:
            for cb in self.watches[addr]:
                cb(addr, out, tx)
        return out, tx

    def _miss_outcome(self) -> tuple[str, int]:
        timing = self.config.timing
        if self._serviced == SERVICED_DRAM:
            return SERVICED_DRAM, self._dram_latency
        return SERVICED_L2, timing.l15_to_l2_cycles

    # -- transaction driver ------------------------------------------------------

    def _transact(self, tile: int, line_addr: int, op: str, now: int):
        home = self.home_of(line_addr)
        first = self.noc.transfer(op, tile, home, line_addr, when=now)
        queue = [first]
        guard = 0
        while queue:
            msg = queue.pop(0)
            if msg.subkind in _DIR_INPUTS:
                queue.extend(self.directory_handle(msg.dst, msg))
            else:
                queue.extend(self.cache_handle(msg.dst, msg))
            guard += 1
            if guard > 64 * self.n_tiles:
                raise ProtocolError(f"coherence cascade for 0x{line_addr:08x} does not settle")

    # -- directory side ------------------------------------------------------------

    def directory_handle(self, home: int, msg: NocMessage) -> list[NocMessage]:
        """One MSI transition; returns the outgoing coherence messages."""
        line_addr = msg.line
        sub = msg.subkind
        dirmap = self.dirs[home]

        if sub in ("GetShared", "GetModified"):
            if line_addr in self.pending:
                raise ProtocolError(f"{sub} for 0x{line_addr:08x} while a transaction is pending")
            entry, l2line = self._l2_get(home, line_addr, msg.inject_cycle)
            if sub == "GetShared":
                if entry.state is LineState.MODIFIED:
                    self.pending[line_addr] = _Pending("GetShared", msg.src)
                    return [self.noc.transfer("Downgrade", home, entry.owner, line_addr,
                                              when=msg.inject_cycle)]
                entry.state = LineState.SHARED
                entry.sharers.add(msg.src)
                entry.check(line_addr)
                self._dir_trace(home, line_addr, entry, msg.inject_cycle)
                return [self.noc.transfer("DataShared", home, msg.src, line_addr,
                                          data=bytes(l2line.data), when=msg.inject_cycle)]
            # GetModified
            if entry.state is LineState.MODIFIED:
                if entry.owner == msg.src:
                    raise ProtocolError(f"owner re-requested M for 0x{line_addr:08x}")
                self.pending[line_addr] = _Pending("GetModified", msg.src, need_acks=1)
                return [self.noc.transfer("Invalidate", home, entry.owner, line_addr,
                                          when=msg.inject_cycle)]
            others = sorted(entry.sharers - {msg.src})
            if others:
                self.pending[line_addr] = _Pending("GetModified", msg.src,
                                                   need_acks=len(others))
                return [self.noc.transfer("Invalidate", home, t, line_addr,
                                          when=msg.inject_cycle) for t in others]
            self._grant_modified(home, line_addr, entry, msg.src, msg.inject_cycle)
            return [self.noc.transfer("DataModified", home, msg.src, line_addr,
                                      data=bytes(l2line.data), when=msg.inject_cycle)]

        if sub == "Writeback":
            entry = dirmap.get(line_addr)
            l2line = self.l2[home].lookup(line_addr)
            if entry is None or l2line is None:
                raise ProtocolError(f"Writeback for untracked line 0x{line_addr:08x}")
            if entry.state is not LineState.MODIFIED or entry.owner != msg.src:
                raise ProtocolError(
                    f"Writeback from non-owner tile {msg.src} for 0x{line_addr:08x}"
                )
            l2line.data = bytearray(msg.data)
            entry.state = LineState.INVALID
            entry.owner = None
            entry.sharers = set()
            self._dir_trace(home, line_addr, entry, msg.inject_cycle)
            return []

        if sub == "DowngradeAck":
            p = self.pending.get(line_addr)
            if p is None or p.op != "GetShared":
                raise ProtocolError(f"unexpected DowngradeAck for 0x{line_addr:08x}")
            entry = dirmap[line_addr]
            l2line = self.l2[home].lookup(line_addr)
            l2line.data = bytearray(msg.data)
            entry.state = LineState.SHARED
            entry.owner = None
            entry.sharers = {msg.src, p.requester}
            entry.check(line_addr)
            self._dir_trace(home, line_addr, entry, msg.inject_cycle)
            del self.pending[line_addr]
            return [self.noc.transfer("DataShared", home, p.requester, line_addr,
                                      data=bytes(l2line.data), when=msg.inject_cycle)]

        if sub == "InvalidateAck":
            p = self.pending.get(line_addr)
            if p is None or p.op != "GetModified":
                raise ProtocolError(f"unexpected InvalidateAck for 0x{line_addr:08x}")
            if msg.data is not None:
                p.data = msg.data
            p.need_acks -= 1
            if p.need_acks > 0:
                return []
            entry = dirmap[line_addr]
            l2line = self.l2[home].lookup(line_addr)
            if p.data is not None:
                l2line.data = bytearray(p.data)
            self._grant_modified(home, line_addr, entry, p.requester, msg.inject_cycle)
            del self.pending[line_addr]
            return [self.noc.transfer("DataModified", home, p.requester, line_addr,
                                      data=bytes(l2line.data), when=msg.inject_cycle)]

        raise ProtocolError(f"directory cannot handle {sub}")

    def _grant_modified(self, home: int, line_addr: int, entry: DirectoryEntry,
                        tile: int, when: int = 0):
        entry.state = LineState.MODIFIED
        entry.owner = tile
        entry.sharers = set()
        entry.check(line_addr)
        self._dir_trace(home, line_addr, entry, when)

    def _dir_trace(self, home: int, line_addr: int, entry: DirectoryEntry, when: int):
        if self.trace:
            sharers = ",".join(str(t) for t in sorted(entry.sharers)) or "-"
            owner = entry.owner if entry.owner is not None else "-"
            self.trace(
                f"DIR cycle={when} home={home} line=0x{line_addr:08x}"
                f" state={entry.state.value} owner={owner} sharers={{{sharers}}}"
            )

    # -- cache side ------------------------------------------------------------------

    def cache_handle(self, tile: int, msg: NocMessage) -> list[NocMessage]:
        line_addr = msg.line
        sub = msg.subkind
        cache = self.l15[tile]
        line = cache.lookup(line_addr)

        if sub == "Invalidate":
            data = None
            if line is not None:
                if line.state is LineState.MODIFIED:
                    data = bytes(line.data)
                line.state = LineState.INVALID
            # a silent S-eviction can leave the sharer set stale: ack regardless
            return [self.noc.transfer("InvalidateAck", tile, msg.src, line_addr,
                                      data=data, when=msg.inject_cycle)]

        if sub == "Downgrade":
            if line is None or line.state is not LineState.MODIFIED:
                raise ProtocolError(
                    f"Downgrade to tile {tile} which does not own 0x{line_addr:08x}"
                )
            line.state = LineState.SHARED
            return [self.noc.transfer("DowngradeAck", tile, msg.src, line_addr,
                                      data=bytes(line.data), when=msg.inject_cycle)]

        if sub in ("DataShared", "DataModified"):
            state = LineState.SHARED if sub == "DataShared" else LineState.MODIFIED
            self._install_l15(tile, line_addr, msg.data, state, msg.inject_cycle)
            return []

        raise ProtocolError(f"cache cannot handle {sub}")

    def _install_l15(self, tile: int, line_addr: int, data: bytes, state: LineState, now: int):
        cache = self.l15[tile]
        line = cache.lookup(line_addr)
        if line is not None:  # upgrade in place
            line.state = state
            line.data = bytearray(data)
            cache.touch(line)
            return
        victim = cache.victim(line_addr)
        if victim.valid:
            self._evict_l15(tile, victim, now)
        cache.install(line_addr, data, state)

    def _evict_l15(self, tile: int, victim: CacheLine, now: int):
        if victim.state is LineState.MODIFIED:
            home = self.home_of(victim.addr)
            msg = self.noc.transfer("Writeback", tile, home, victim.addr,
                                    data=bytes(victim.data), when=now)
            self.directory_handle(home, msg)
        # Shared lines evict silently; the directory keeps a stale superset.
        victim.state = LineState.INVALID

    # -- L2 slice + inclusion ----------------------------------------------------------

    def _l2_get(self, home: int, line_addr: int, now: int = 0) -> tuple[DirectoryEntry, CacheLine]:
        slice_ = self.l2[home]
        self._bump(f"l2.tile{home}.lookups")
        l2line = slice_.lookup(line_addr)
        if l2line is not None:
            self._bump(f"l2.tile{home}.hits")
            slice_.touch(l2line)
            if self._serviced is None:
                self._serviced = SERVICED_L2
            return self.dirs[home][line_addr], l2line
        self._bump(f"l2.tile{home}.misses")
        data, latency = self.dram_read(line_addr)
        self._serviced = SERVICED_DRAM
        self._dram_latency = latency
        victim = slice_.victim(line_addr)
        if victim.valid:
            self._evict_l2(home, victim, now)
        l2line = slice_.install(line_addr, data, LineState.SHARED)  # state unused in L2
        self.dirs[home][line_addr] = DirectoryEntry()
        return self.dirs[home][line_addr], l2line

    def _evict_l2(self, home: int, victim: CacheLine, now: int = 0):
        """Inclusion: recall/invalidate all cached copies, then write DRAM."""
        line_addr = victim.addr
        entry = self.dirs[home].pop(line_addr)
        if entry.state is LineState.MODIFIED:
            msg = self.noc.transfer("Invalidate", home, entry.owner, line_addr, when=now)
            (ack,) = self.cache_handle(entry.owner, msg)
            if ack.data is None:
                raise ProtocolError(f"recall of 0x{line_addr:08x} returned no data")
            victim.data = bytearray(ack.data)
        elif entry.state is LineState.SHARED:
            for tile in sorted(entry.sharers):
                msg = self.noc.transfer("Invalidate", home, tile, line_addr, when=now)
                self.cache_handle(tile, msg)
        self.dram_write(line_addr, bytes(victim.data))
        victim.state = LineState.INVALID

    # -- invariants ---------------------------------------------------------------------

    def _check_line_invariants(self, line_addr: int):
        """Single-writer / directory-consistency for one (just touched) line."""
        holders = [(t, c.lookup(line_addr)) for t, c in enumerate(self.l15)]
        valid = [(t, ln) for t, ln in holders if ln is not None and ln.valid]
        modified = [(t, ln) for t, ln in valid if ln.state is LineState.MODIFIED]
        if len(modified) > 1 or (modified and len(valid) > 1):
            raise ProtocolError(
                f"single-writer violated at 0x{line_addr:08x}: "
                + ", ".join(f"tile{t}={ln.state.value}" for t, ln in valid)
            )
        home = self.home_of(line_addr)
        entry = self.dirs[home].get(line_addr)
        for t, ln in valid:
            if entry is None:
                raise ProtocolError(f"0x{line_addr:08x} cached by tile {t} but untracked")
            if ln.state is LineState.MODIFIED and entry.owner != t:
                raise ProtocolError(f"0x{line_addr:08x} M in tile {t}, directory disagrees")
            if ln.state is LineState.SHARED and t not in entry.sharers:
                raise ProtocolError(f"0x{line_addr:08x} S in tile {t} missing from sharers")

    def check_global_invariants(self):
        """Full sweep used by the small-scale explorers and property tests."""
        seen = set()
        for tile in range(self.n_tiles):
            for line in self.l15[tile].resident_lines():
                if line.addr not in seen:
                    seen.add(line.addr)
                    self._check_line_invariants(line.addr)
                home = self.home_of(line.addr)
                if self.l2[home].lookup(line.addr) is None:
                    raise ProtocolError(f"inclusion violated for 0x{line.addr:08x}")
        for home in range(self.n_tiles):
            for line_addr, entry in self.dirs[home].items():
                entry.check(line_addr)
        if self.pending:
            raise ProtocolError("directory has dangling pending transactions")
