"""Set-associative cache arrays used for both the private caches and the
shared L2 slices. Replacement is LRU with ties broken by lowest way index."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field


class LineState(enum.Enum):
    INVALID = "I"
    SHARED = "S"
    MODIFIED = "M"


@dataclass
class CacheLine:
    addr: int = 0  # line-aligned address
    state: LineState = LineState.INVALID
    data: bytearray = field(default_factory=bytearray)
    lru: int = 0

    @property
    def valid(self) -> bool:
        return self.state is not LineState.INVALID


class CacheArray:
    def __init__(self, size_bytes: int, associativity: int, line_size: int):
        self.line_size = line_size
        self.ways = associativity
        self.n_sets = size_bytes // line_size // associativity
        self.sets = [[CacheLine() for _ in range(associativity)] for _ in range(self.n_sets)]
        self._tick = 0

    def set_index(self, line_addr: int) -> int:
        return (line_addr // self.line_size) % self.n_sets

    def lookup(self, line_addr: int) -> CacheLine | None:
        for line in self.sets[self.set_index(line_addr)]:
            if line.valid and line.addr == line_addr:
                return line
        return None

    def touch(self, line: CacheLine):
        self._tick += 1
        line.lru = self._tick

    def victim(self, line_addr: int) -> CacheLine:
        """The way a new line would displace: first invalid way, else LRU
        (lowest way index on ties)."""
        ways = self.sets[self.set_index(line_addr)]
        for line in ways:
            if not line.valid:
                return line
        return min(ways, key=lambda l: l.lru)  # min() keeps the first == lowest way

    def install(self, line_addr: int, data: bytes, state: LineState) -> CacheLine:
        """Place a line into its victim way. The caller must have dealt with
        the victim's previous contents first."""
        line = self.victim(line_addr)
        line.addr = line_addr
        line.state = state
        line.data = bytearray(data)
        self.touch(line)
        return line

    def resident_lines(self):
        for ways in self.sets:
            for line in ways:
                if line.valid:
                    yield line
