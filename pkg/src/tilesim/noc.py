"""Three-channel 2D-mesh interconnect.

Channel assignment: coherence requests (GetShared/GetModified/Invalidate/
Downgrade) on 1, responses and data on 2, writebacks and interrupts on 3.
Routing is dimension-ordered, X then Y, so every (src, dst) pair has exactly
one deterministic path of Manhattan-distance length.

Coherence messages are transferred inside an atomic memory transaction: the
mesh records injection/delivery, per-pair ordering and hop counts, while the
transit time is subsumed in the fabric's per-service-level latency budgets.
Interrupts are genuinely asynchronous: they are queued with a delivery time of
send + hops * hop_cycles and handed to the machine scheduler.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .config import MeshConfig
from .errors import ConfigError

CH_REQ = 1
CH_RESP = 2
CH_WB_IRQ = 3

# protocol message name -> channel
CHANNEL_OF = {
    "GetShared": CH_REQ,
    "GetModified": CH_REQ,
    "Invalidate": CH_REQ,
    "Downgrade": CH_REQ,
    "DataShared": CH_RESP,
    "DataModified": CH_RESP,
    "InvalidateAck": CH_RESP,
    "DowngradeAck": CH_RESP,
    "Writeback": CH_WB_IRQ,
    "Interrupt": CH_WB_IRQ,
}

# coarse kind as carried in traces/stats
KIND_OF = {
    CH_REQ: "coherence-req",
    CH_RESP: "coherence-resp",
    CH_WB_IRQ: "writeback",
}


@dataclass
class NocMessage:
    channel: int
    src: int
    dst: int
    subkind: str
    line: int | None = None
    data: bytes | None = None
    irq: str | None = None  # "start" | "ipi" for interrupts
    inject_cycle: int = 0
    seq: int = 0

    @property
    def kind(self) -> str:
        return "interrupt" if self.subkind == "Interrupt" else KIND_OF[self.channel]


@dataclass
class Noc:
    mesh: MeshConfig
    n_tiles: int
    trace: object = None  # callable(str) or None
    injected: dict = field(default_factory=lambda: {1: 0, 2: 0, 3: 0})
    delivered: dict = field(default_factory=lambda: {1: 0, 2: 0, 3: 0})
    _seq: int = 0
    _irq_queue: list = field(default_factory=list)
    _last_irq_delivery: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n_tiles > self.mesh.width * self.mesh.height:
            raise ConfigError("more tiles than mesh positions")

    # -- geometry ---------------------------------------------------------

    def coord(self, tile: int) -> tuple[int, int]:
        if not 0 <= tile < self.n_tiles:
            raise ConfigError(f"tile {tile} is not on the mesh")
        return tile % self.mesh.width, tile // self.mesh.width

    def route(self, src: int, dst: int) -> list[tuple[int, int]]:
        """Dimension-ordered path: the sequence of coordinates after each hop."""
        (x, y), (dx, dy) = self.coord(src), self.coord(dst)
        hops = []
        while x != dx:
            x += 1 if dx > x else -1
            hops.append((x, y))
        while y != dy:
            y += 1 if dy > y else -1
            hops.append((x, y))
        return hops

    def hop_count(self, src: int, dst: int) -> int:
        (x, y), (dx, dy) = self.coord(src), self.coord(dst)
        return abs(x - dx) + abs(y - dy)

    # -- synchronous coherence transfer ------------------------------------

    def transfer(self, subkind: str, src: int, dst: int, line: int | None = None,
                 data: bytes | None = None, when: int = 0) -> NocMessage:
        """Inject and deliver one coherence message inside a transaction."""
        channel = CHANNEL_OF[subkind]
        self._seq += 1
        msg = NocMessage(channel, src, dst, subkind, line=line, data=data,
                         inject_cycle=when, seq=self._seq)
        self.coord(dst)  # validates
        self.injected[channel] += 1
        self.delivered[channel] += 1
        if self.trace:
            self.trace(
                f"COH cycle={when} ch={channel} {subkind} src={src} dst={dst}"
                f" line=0x{(line or 0):08x} hops={self.hop_count(src, dst)}"
            )
        return msg

    # -- asynchronous interrupts -------------------------------------------

    def send_interrupt(self, src: int, dst: int, irq: str, when: int) -> int:
        """Queue an interrupt; returns its delivery time (hops x hop latency)."""
        self._seq += 1
        delivery = when + self.hop_count(src, dst) * self.mesh.hop_cycles
        # per-(src,dst) FIFO: never deliver before an earlier message on the pair
        floor = self._last_irq_delivery.get((src, dst), 0)
        delivery = max(delivery, floor)
        self._last_irq_delivery[(src, dst)] = delivery
        msg = NocMessage(CH_WB_IRQ, src, dst, "Interrupt", irq=irq,
                         inject_cycle=when, seq=self._seq)
        self.injected[CH_WB_IRQ] += 1
        self._irq_queue.append((delivery, msg.seq, msg))
        self._irq_queue.sort()
        if self.trace:
            self.trace(f"IRQ cycle={when} kind={irq} src={src} dst={dst} deliver@{delivery}")
        return delivery

    def due_interrupts(self, now: int) -> list[NocMessage]:
        due = [m for t, _, m in self._irq_queue if t <= now]
        self._irq_queue = [e for e in self._irq_queue if e[0] > now]
        self.delivered[CH_WB_IRQ] += len(due)
        return due

    def pending_interrupts(self) -> list[tuple[int, NocMessage]]:
        return [(t, m) for t, _, m in self._irq_queue]

    # -- accounting ---------------------------------------------------------

    def counts(self) -> dict:
        out = {}
        for ch in (1, 2, 3):
            out[f"noc.ch{ch}.injected"] = self.injected[ch]
            out[f"noc.ch{ch}.delivered"] = self.delivered[ch]
        return out
