"""Byte-addressable persistent memory with volatile write buffering.

Each device owns one :class:`PhysicalMemory`.  CPU-side writes pass
through a modeled volatile cache (an ordered write buffer) and reach the
persisted image only when flushed; NDP-side writes persist immediately.
Every persisted write is recorded in a run-global :class:`PersistLog`
with a unique, totally ordered persist stamp, so a crash state is simply
the initial image plus a dependency-closed subset of the log.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import Enum

from .errors import AddressFault


class Source(Enum):
    CPU_CACHED = "cpu"
    NDP_DIRECT = "ndp"


@dataclass
class PersistRecord:
    """One write that reached the persistence domain."""

    stamp: int
    time: float
    device: int
    addr: int                     # device-local address
    data: bytes
    actor: str                    # "cpu<t>" or "ndp<d>.<u>" or "sync"
    kind: str = "data"            # data|log|header|marker|tombstone|pageref|sync
    cmd: int | None = None        # command this persist belongs to
    reset_for: int | None = None  # command whose sync gates this reset
    deps: list[int] = field(default_factory=list)
    # issue context: thread -> (commands submitted, writes flushed) at the
    # moment this persist was put in motion; used to rebuild the
    # persistence-domain snapshot for an arbitrary crash cut.
    implies: dict[int, tuple[int, int]] = field(default_factory=dict)

    @property
    def is_sync(self) -> bool:
        return self.kind == "sync"

    @property
    def is_meta(self) -> bool:
        """Bookkeeping persists (request descriptors, completion bits,
        sync points) that live outside the byte-addressable image."""
        return self.kind in ("fifo", "status", "sync")


class PersistLog:
    """Run-global, totally ordered log of persisted writes."""

    def __init__(self):
        self.records: list[PersistRecord] = []

    def append(self, record: PersistRecord) -> PersistRecord:
        record.stamp = len(self.records) + 1
        self.records.append(record)
        return record

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)


@dataclass
class WriteRecord:
    """A CPU write buffered in the volatile cache."""

    addr: int
    data: bytes
    thread: int
    seq: int
    persisted: bool = False
    persist_stamp: int | None = None


class PhysicalMemory:
    """Persisted image plus volatile write buffer for one device."""

    def __init__(self, device: int, capacity: int, plog: PersistLog):
        self.device = device
        self.capacity = capacity
        self.plog = plog
        self.image = bytearray(capacity)
        self.volatile: list[WriteRecord] = []
        self._wseq = 0

    def _check(self, addr: int, n: int):
        if addr < 0 or addr + n > self.capacity:
            raise AddressFault(
                f"device {self.device}: [{addr:#x}, {addr + n:#x}) outside capacity {self.capacity:#x}"
            )

    # -- initialization ------------------------------------------------

    def setup_write(self, addr: int, data: bytes):
        """Pre-run initialization; part of the initial image, not a persist."""
        self._check(addr, len(data))
        self.image[addr:addr + len(data)] = data

    # -- write paths ---------------------------------------------------

    def write(self, addr: int, data: bytes, source: Source, *, thread: int = 0,
              time: float = 0.0, **persist_kw) -> object:
        """Spec-level write entry point: cached writes buffer, NDP writes persist."""
        if source is Source.CPU_CACHED:
            return self.write_volatile(addr, data, thread)
        return self.write_direct(addr, data, time=time, **persist_kw)

    def write_volatile(self, addr: int, data: bytes, thread: int) -> WriteRecord:
        self._check(addr, len(data))
        self._wseq += 1
        rec = WriteRecord(addr, bytes(data), thread, self._wseq)
        self.volatile.append(rec)
        return rec

    def persist_volatile(self, rec: WriteRecord, time: float, *,
                         actor: str | None = None,
                         deps: list[int] | None = None,
                         implies: dict | None = None,
                         kind: str = "data") -> PersistRecord:
        """Move one buffered write into the persistence domain."""
        assert not rec.persisted
        rec.persisted = True
        self.volatile.remove(rec)
        self.image[rec.addr:rec.addr + len(rec.data)] = rec.data
        p = self.plog.append(PersistRecord(
            0, time, self.device, rec.addr, rec.data,
            actor if actor is not None else f"cpu{rec.thread}",
            kind=kind, deps=list(deps or []), implies=dict(implies or {})))
        rec.persist_stamp = p.stamp
        return p

    def write_direct(self, addr: int, data: bytes, *, time: float,
                     actor: str = "ndp", kind: str = "data",
                     cmd: int | None = None, reset_for: int | None = None,
                     deps: list[int] | None = None,
                     implies: dict | None = None,
                     chunk: int | None = None,
                     chunk_dt: float = 0.0) -> list[PersistRecord]:
        """NDP write: enters the persistence domain immediately.

        With `chunk` set, the write is split into sequentially dependent
        chunk persists so a crash can cut it at any chunk boundary.
        """
        self._check(addr, len(data))
        if chunk is None or len(data) <= chunk:
            pieces = [(addr, bytes(data))]
        else:
            pieces = [(addr + i, bytes(data[i:i + chunk]))
                      for i in range(0, len(data), chunk)]
        out: list[PersistRecord] = []
        prev = list(deps or [])
        t = time
        for a, d in pieces:
            self.image[a:a + len(d)] = d
            p = self.plog.append(PersistRecord(
                0, t, self.device, a, d, actor, kind=kind, cmd=cmd,
                reset_for=reset_for, deps=prev, implies=dict(implies or {})))
            out.append(p)
            prev = [p.stamp]
            t += chunk_dt
        return out

    # -- reads ---------------------------------------------------------

    def read(self, addr: int, n: int) -> bytes:
        """Read with volatile buffer overlaying the persisted image, newest wins."""
        self._check(addr, n)
        buf = bytearray(self.image[addr:addr + n])
        for rec in self.volatile:
            lo = max(addr, rec.addr)
            hi = min(addr + n, rec.addr + len(rec.data))
            if lo < hi:
                buf[lo - addr:hi - addr] = rec.data[lo - rec.addr:hi - rec.addr]
        return bytes(buf)

    def read_persisted(self, addr: int, n: int) -> bytes:
        self._check(addr, n)
        return bytes(self.image[addr:addr + n])

    # -- simple flush / crash (single-device API; the machine adds
    #    conflict ordering on top of these) ---------------------------

    def flush_range(self, addr: int, n: int, time: float = 0.0) -> list[PersistRecord]:
        """Persist every buffered write overlapping the range, in buffer order."""
        self._check(addr, n)
        hits = [r for r in self.volatile
                if r.addr < addr + n and addr < r.addr + len(r.data)]
        return [self.persist_volatile(r, time) for r in hits]

    def drop_volatile(self):
        self.volatile.clear()

    def snapshot_image(self) -> bytes:
        return bytes(self.image)


# -- persisted image dump format: little-endian u64 capacity header
#    followed by the raw bytes ------------------------------------------

def dump_image(image: bytes, path: str):
    with open(path, "wb") as f:
        f.write(struct.pack("<Q", len(image)))
        f.write(image)


def load_image(path: str) -> bytes:
    with open(path, "rb") as f:
        (n,) = struct.unpack("<Q", f.read(8))
        data = f.read()
    if len(data) != n:
        raise AddressFault(f"image dump truncated: header says {n}, got {len(data)}")
    return data


def replay_records(initial: bytes, records, device: int | None = None) -> bytearray:
    """Rebuild an image by replaying persist records in stamp order."""
    img = bytearray(initial)
    for r in sorted(records, key=lambda r: r.stamp):
        if r.is_meta:
            continue
        if device is not None and r.device != device:
            continue
        img[r.addr:r.addr + len(r.data)] = r.data
    return img
