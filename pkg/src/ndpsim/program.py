"""Straight-line per-thread programs executed by the simulated machine.

A program is a flat list of ops per thread.  Addresses are virtual,
pool-relative offsets resolved through the translation table at run
time.  Crash-consistency mechanism adapters (see :mod:`workloads`)
expand abstract transactions into these ops, so the same data update
stream can run under undo logging, redo logging, checkpointing, or
shadow paging on any machine configuration.
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class Op:
    pool: int = 0


@dataclass
class Compute(Op):
    """CPU-local work; provides overlap with offloaded commands."""
    ns: float = 500.0


@dataclass
class WriteData(Op):
    """CPU store of `data` at pool offset `off` (buffered until flushed)."""
    off: int = 0
    data: bytes = b""


@dataclass
class ReadData(Op):
    off: int = 0
    size: int = 0


@dataclass
class Flush(Op):
    """Write back every buffered store in [off, off+size)."""
    off: int = 0
    size: int = 0


@dataclass
class TxBegin(Op):
    """Open a transaction under `mechanism` for this (pool, thread)."""
    mechanism: str = "logging"


@dataclass
class UndoLog(Op):
    """Offload creation of an undo record for [off, off+size)."""
    off: int = 0
    size: int = 0


@dataclass
class RedoWrite(Op):
    """CPU appends a redo entry (new data for [off, off+len(data)))."""
    off: int = 0
    data: bytes = b""


@dataclass
class RedoMark(Op):
    """Persist the redo-ready transaction state (entries are complete)."""


@dataclass
class ApplyLog(Op):
    """Offload in-place application of this transaction's redo entries."""


@dataclass
class CkptTouch(Op):
    """Offload checkpointing of the page(s) covering [off, off+size)."""
    off: int = 0
    size: int = 0


@dataclass
class ShadowTouch(Op):
    """Offload a shadow copy of the page(s) covering [off, off+size)."""
    off: int = 0
    size: int = 0


@dataclass
class Commit(Op):
    """Offload transaction commit; recovery-data resets drain post-sync."""


@dataclass
class Program:
    """One op list per thread, plus the pools the run needs."""

    threads: dict[int, list[Op]] = field(default_factory=dict)
    # pool id -> dict(size, page_size, purpose, threads, base_virt)
    pools: dict[int, dict] = field(default_factory=dict)
    # (pool, offset) -> bytes applied to the initial image before the run
    setup: list[tuple[int, int, bytes]] = field(default_factory=list)

    def thread(self, t: int) -> list[Op]:
        return self.threads.setdefault(t, [])

    def add_pool(self, pool: int, *, size: int, page_size: int = 4096,
                 purpose: str = "undo", threads: int = 1,
                 base_virt: int | None = None, managed_frac: int = 4):
        self.pools[pool] = dict(size=size, page_size=page_size,
                                purpose=purpose, threads=threads,
                                base_virt=base_virt, managed_frac=managed_frac)
