"""tilesim: a deterministic, cycle-approximate heterogeneous tiled-multicore simulator.

An RV32I multicycle guest core sits behind a private per-tile cache on a
coherent memory fabric (directory MSI over a distributed shared L2 and a
three-channel 2D-mesh NoC). A behavioral host agent loads static guest ELF
binaries into a shared region, starts the guest with an interrupt, and proxies
its syscalls through a fixed-layout shared-memory mailbox. The `simctl` CLI
runs binaries, the bundled ISA suite, memory-latency probes, microbenchmarks,
and litmus tests.
"""

__version__ = "0.1.0"
