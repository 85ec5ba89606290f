"""On-memory formats of the offloadable crash-consistency primitives.

Each pool's physical footprint on every device is a data region followed
by an NDP-managed region (default one quarter of the pool size) holding:

* per-thread transaction slots (8 bytes each, persisted atomically),
* the page reference table (one u64 frame address per logical page),
* one purpose region (undo log, redo log, checkpoint, or shadow pages)
  partitioned into per-thread entry areas; shadow pools additionally
  carve page frames out of the purpose region.

Entry layout: 16-byte header (object_id u64; then one atomic qword of
magic, commit status, transaction sequence, and payload length) followed
by the 8-byte-aligned payload.  The status qword is persisted last, so
an entry is visible exactly when it is complete; a zero terminator qword
is persisted first, so scans never run into stale bytes.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import Enum

from .errors import OverflowFault, ProtocolFault

TX_SLOTS = 8
TX_SLOT_BYTES = 8
ENTRY_HDR = 16
ENTRY_MAGIC = 0xA5
SHADOW_REC_AREA = 512

# transaction slot states
TX_EMPTY = 0
TX_OPEN = 1
TX_REDO_READY = 2
TX_COMMITTED = 3

# entry commit status
ST_ACTIVE = 1
ST_COMMITTED = 2
ST_INVALID = 3


class RequestKind(Enum):
    UNDO_LOG = "undolg_create"
    APPLY_REDO = "applylog"
    COMMIT = "commit_log"
    CKPT = "ckpoint_create"
    SHADOW_COPY = "shadowcpy"


class Purpose(Enum):
    UNDO_LOG = "undo"
    REDO_LOG = "redo"
    CHECKPOINT = "checkpoint"
    SHADOW_PAGES = "shadow"


MECHANISM_PURPOSE = {
    "logging": Purpose.UNDO_LOG,
    "redo-logging": Purpose.REDO_LOG,
    "checkpointing": Purpose.CHECKPOINT,
    "shadow-paging": Purpose.SHADOW_PAGES,
}


def align8(n: int) -> int:
    return (n + 7) & ~7


@dataclass
class PoolLayout:
    """Device-local physical layout of one pool (mirrored on every device)."""

    pool: int
    base_virt: int
    base_phys: int
    size: int                 # data region bytes
    page_size: int
    purpose: Purpose
    threads: int = 1
    managed_frac: int = 4     # managed region = size // managed_frac

    def __post_init__(self):
        if self.threads > TX_SLOTS:
            raise ProtocolFault(f"at most {TX_SLOTS} threads per pool")
        self.managed_base = self.base_phys + self.size
        self.managed_size = self.size // self.managed_frac
        self.slots_base = self.managed_base
        self.pageref_base = self.slots_base + TX_SLOTS * TX_SLOT_BYTES
        self.n_pages = (self.size + self.page_size - 1) // self.page_size
        self.region_base = align8(self.pageref_base + self.n_pages * 8)
        self.region_end = self.managed_base + self.managed_size
        if self.region_base >= self.region_end:
            raise OverflowFault(f"pool {self.pool}: managed region too small")
        if self.purpose is Purpose.SHADOW_PAGES:
            recs = self.region_base + self.threads * SHADOW_REC_AREA
            self.frames_base = -(-recs // self.page_size) * self.page_size
            self.n_frames = (self.region_end - self.frames_base) // self.page_size
            if self.n_frames < 1:
                raise OverflowFault(f"pool {self.pool}: no room for shadow frames")

    @property
    def managed_end(self) -> int:
        return self.region_end

    def contains_data(self, local_addr: int) -> bool:
        return self.base_phys <= local_addr < self.base_phys + self.size

    def contains_managed(self, local_addr: int) -> bool:
        return self.managed_base <= local_addr < self.managed_end

    def slot_addr(self, thread: int) -> int:
        return self.slots_base + thread * TX_SLOT_BYTES

    def pageref_addr(self, page: int) -> int:
        return self.pageref_base + page * 8

    def data_page_addr(self, page: int) -> int:
        return self.base_phys + page * self.page_size

    def page_of(self, vaddr: int) -> int:
        return (vaddr - self.base_virt) // self.page_size

    def thread_area(self, thread: int) -> tuple[int, int]:
        """(base, size) of the per-thread entry area in the purpose region."""
        if self.purpose is Purpose.SHADOW_PAGES:
            base = self.region_base + thread * SHADOW_REC_AREA
            return base, SHADOW_REC_AREA
        space = self.region_end - self.region_base
        per = (space // self.threads) & ~7
        return self.region_base + thread * per, per

    def frame_addr(self, idx: int) -> int:
        return self.frames_base + idx * self.page_size


# -- transaction slots ---------------------------------------------------

def encode_slot(seq: int, state: int, mech: int) -> bytes:
    return struct.pack("<BBBxxxxx", seq & 0xFF, state, mech)


def decode_slot(data: bytes) -> tuple[int, int, int]:
    seq, state, mech = struct.unpack_from("<BBB", data)
    return seq, state, mech


# -- log / checkpoint / shadow-record entries ----------------------------

@dataclass
class Entry:
    addr: int            # device-local address of the header
    object_id: int       # pool-relative offset of the target range
    status: int
    tx_seq: int
    length: int
    payload: bytes

    @property
    def end(self) -> int:
        return self.addr + ENTRY_HDR + align8(self.length)


def encode_status_qword(status: int, tx_seq: int, length: int) -> bytes:
    return struct.pack("<BBBxI", ENTRY_MAGIC, status, tx_seq & 0xFF, length)


@dataclass
class EntryWrite:
    """One persist-ordered write produced by primitive execution."""
    addr: int
    data: bytes
    kind: str            # header|log|tombstone|marker|pageref
    atomic: bool = False  # never split into chunk persists
    reset_for: int | None = None  # command whose sync gates this write


def append_entry(read, layout: PoolLayout, thread: int, tx_seq: int,
                 object_id: int, status: int, payload: bytes) -> list[EntryWrite]:
    """Build the persist-ordered writes that append one entry.

    `read(addr, n)` reads the device-local persisted image.  The append
    cursor is recomputed by scanning, so replaying an interrupted
    request lands on the same spot.
    """
    entries, cursor = scan_entries(read, layout, thread, tx_seq)
    base, size = layout.thread_area(thread)
    end = cursor + ENTRY_HDR + align8(len(payload))
    if end > base + size:
        raise OverflowFault(
            f"pool {layout.pool} thread {thread}: {layout.purpose.value} region full")
    writes = []
    if end + 8 <= base + size:
        writes.append(EntryWrite(end, b"\x00" * 8, "header", atomic=True))
    writes.append(EntryWrite(cursor, struct.pack("<Q", object_id), "header", atomic=True))
    if payload:
        writes.append(EntryWrite(cursor + ENTRY_HDR, bytes(payload), "log"))
    writes.append(EntryWrite(
        cursor + 8, encode_status_qword(status, tx_seq, len(payload)), "header",
        atomic=True))
    return writes


def scan_entries(read, layout: PoolLayout, thread: int,
                 tx_seq: int) -> tuple[list[Entry], int]:
    """Entries of the current transaction in append order, plus the cursor."""
    base, size = layout.thread_area(thread)
    out: list[Entry] = []
    pos = base
    while pos + ENTRY_HDR <= base + size:
        magic, status, seq, length = struct.unpack("<BBBxI", read(pos + 8, 8))
        if magic != ENTRY_MAGIC or seq != (tx_seq & 0xFF) or status == 0:
            break
        if pos + ENTRY_HDR + length > base + size:
            break
        (object_id,) = struct.unpack("<Q", read(pos, 8))
        out.append(Entry(pos, object_id, status, seq, length,
                         bytes(read(pos + ENTRY_HDR, length))))
        pos += ENTRY_HDR + align8(length)
    return out, pos


def tombstone_write(entry: Entry, tx_seq: int, gating_cmd: int | None) -> EntryWrite:
    return EntryWrite(entry.addr + 8,
                      encode_status_qword(ST_INVALID, tx_seq, entry.length),
                      "tombstone", atomic=True, reset_for=gating_cmd)


# -- request descriptor ---------------------------------------------------

@dataclass
class NdpRequest:
    """One offloaded crash-consistency command (possibly one of several
    per-device sub-requests of a duplicated command)."""

    kind: RequestKind
    pool: int
    thread: int
    vaddr: int
    size: int
    seq: int                       # issue index (command id)
    device: int = 0
    tx_seq: int = 0
    # device-local claim ranges [(lo, hi)] taken in the in-flight table
    claims: list[tuple[int, int]] = field(default_factory=list)
    # SHADOW_COPY: pre-assigned destination frame (device-local)
    dest_frame: int | None = None
    # APPLY_REDO: device-local target ranges of the entries to apply
    targets: list[tuple[int, int]] = field(default_factory=list)

    def encode(self) -> bytes:
        """Fixed 32-byte wire form used for the persistence-domain budget."""
        return struct.pack("<BxHHxxQIIQ", list(RequestKind).index(self.kind),
                           self.pool, self.thread, self.vaddr, self.size,
                           self.seq, self.dest_frame or 0)

REQUEST_BYTES = 32
