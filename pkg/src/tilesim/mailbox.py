"""The shared-memory syscall mailbox ABI (version 1, frozen in docs/abi.md).

One 64-byte, 64-byte-aligned block. All fields little-endian as stored:

    +0   status        0 EMPTY / 1 REQUESTED / 2 DONE
    +4   syscall_number
    +8   args[6]       six 32-bit words
    +32  return_value  signed 32-bit
    +36  errno_value
    +40  reserved      24 bytes, must stay zero

Request discipline (the guest stub sequence, mirrored by corpus/runtime.s):
write args, write number, fence, write status=REQUESTED, spin-load status
until DONE, read return_value/errno, write status=EMPTY. Status is written
last when requesting and first (and only) when releasing, so over a
sequentially consistent fabric no side ever observes a half-written record.

The host side never touches the mailbox except through its port; in big
mode every field crosses the flip helpers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import SimError
from .mem.fabric import FabricPort, flip

MAILBOX_BYTES = 64
MAILBOX_ALIGN = 64

OFF_STATUS = 0
OFF_NUMBER = 4
OFF_ARGS = 8
NUM_ARGS = 6
OFF_RETVAL = 32
OFF_ERRNO = 36
OFF_RESERVED = 40

STATUS_EMPTY = 0
STATUS_REQUESTED = 1
STATUS_DONE = 2


@dataclass
class SyscallRequest:
    number: int
    args: list[int]


class HostMailbox:
    """Host-side view. `big` selects raw big-endian port words + flip helpers.
    `charge` (if given) receives the latency of every fabric access made."""

    def __init__(self, port: FabricPort, base: int, big: bool = True, charge=None):
        if base % MAILBOX_ALIGN:
            raise SimError(f"mailbox base 0x{base:x} is not 64-byte aligned")
        if port.mode not in ("big", "little"):
            raise SimError("host mailbox needs a host-mode port")
        self.port = port
        self.base = base
        self.big = big
        self.charge = charge or (lambda _lat: None)

    def _read(self, offset: int) -> int:
        raw, lat = self.port.load(self.base + offset, 4)
        self.charge(lat)
        return flip(raw, 4) if self.big else raw

    def _write(self, offset: int, value: int):
        value &= 0xFFFFFFFF
        lat = self.port.store(self.base + offset, 4, flip(value, 4) if self.big else value)
        self.charge(lat)

    def poll(self) -> SyscallRequest | None:
        """Decode a pending request; never mutates the mailbox."""
        if self._read(OFF_STATUS) != STATUS_REQUESTED:
            return None
        number = self._read(OFF_NUMBER)
        args = [self._read(OFF_ARGS + 4 * i) for i in range(NUM_ARGS)]
        return SyscallRequest(number, args)

    def complete(self, return_value: int, errno_value: int):
        """Publish the result; status (DONE) is written last."""
        if self._read(OFF_STATUS) != STATUS_REQUESTED:
            raise SimError("host_complete without a pending request (simulator bug)")
        self._write(OFF_RETVAL, return_value)
        self._write(OFF_ERRNO, errno_value)
        self._write(OFF_STATUS, STATUS_DONE)


class GuestRequester:
    """Scripted guest-side stub: one fabric access per step().

    Drives exactly the stub sequence so the machine scheduler (or an
    exhaustive explorer) can interleave it with host polling at memory-access
    granularity. step() returns None while in flight and the (return_value,
    errno_value) pair once the mailbox has been released.
    """

    def __init__(self, port: FabricPort, base: int):
        if port.mode != "guest":
            raise SimError("guest requester needs a guest-mode port")
        self.port = port
        self.base = base
        self._gen = None
        self.result: tuple[int, int] | None = None
        self.last_latency = 0

    def start(self, number: int, args: list[int]):
        if self._gen is not None:
            raise SimError("request already in flight")
        if len(args) > NUM_ARGS:
            raise SimError("too many syscall arguments")
        self.result = None
        self._gen = self._sequence(number, list(args) + [0] * (NUM_ARGS - len(args)))

    def step(self):
        if self._gen is None:
            raise SimError("no request in flight")
        try:
            self.last_latency = next(self._gen)
        except StopIteration:
            self._gen = None
            return self.result
        return None

    def _load(self, offset):
        value, lat = self.port.load(self.base + offset, 4)
        return value, lat

    def _sequence(self, number, args):
        status, lat = self._load(OFF_STATUS)
        if status != STATUS_EMPTY:
            raise SimError("guest issued a request while the mailbox was busy")
        yield lat
        for i, arg in enumerate(args):
            yield self.port.store(self.base + OFF_ARGS + 4 * i, 4, arg & 0xFFFFFFFF)
        yield self.port.store(self.base + OFF_NUMBER, 4, number & 0xFFFFFFFF)
        # fence: program order is the fabric order here, nothing to emit
        yield self.port.store(self.base + OFF_STATUS, 4, STATUS_REQUESTED)
        while True:
            status, lat = self._load(OFF_STATUS)
            yield lat
            if status == STATUS_DONE:
                break
        ret, lat = self._load(OFF_RETVAL)
        yield lat
        err, lat = self._load(OFF_ERRNO)
        yield lat
        self.result = (ret, err)
        yield self.port.store(self.base + OFF_STATUS, 4, STATUS_EMPTY)


def guest_request(port: FabricPort, base: int, number: int, args: list[int],
                  host_service, max_steps: int = 10_000) -> tuple[int, int]:
    """Synchronous convenience: run one request, calling `host_service()`
    between guest steps to stand in for the polling host."""
    req = GuestRequester(port, base)
    req.start(number, args)
    for _ in range(max_steps):
        done = req.step()
        if done is not None:
            return done
        host_service()
    raise SimError("guest request did not complete")
