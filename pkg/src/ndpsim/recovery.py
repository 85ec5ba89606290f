"""Two-phase crash recovery over raw device images.

Phase one (:func:`hw_recover`) is what the device front-end does on
power-up: every request that was accepted into the persistent FIFO but
whose persistent completion bit never set is re-executed from scratch.
Re-execution is idempotent because entry appends recompute their cursor
by scanning and skip work that already completed; pending commit
requests are dropped, since their recovery-data resets must never apply
without the synchronization point they were deferred behind.

Phase two (:func:`sw_recover`) is the software handler: it reads each
(pool, thread) transaction slot and, by mechanism, rolls back from undo
records, rolls forward redo records, restores checkpointed pages, or
replays page-reference switches of shadow copies.  The committed-state
marker in the slot decides rollback versus roll-forward, so a recovered
transaction is always entirely old or entirely new.

Both phases mutate and return plain per-device images; neither needs
the simulator.  An optional `reads` list collects (device, addr, size)
tuples for every byte recovery consumed, which the trace checker turns
into failure-recovery read events.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import RecoveryFault
from .primitives import (MECHANISM_PURPOSE, REQUEST_BYTES, ST_ACTIVE,
                         ST_INVALID, TX_COMMITTED, TX_EMPTY, TX_OPEN,
                         TX_REDO_READY, NdpRequest, PoolLayout, Purpose,
                         RequestKind, append_entry, decode_slot, encode_slot,
                         encode_status_qword, scan_entries)
from .translate import LUT_ENTRY_BYTES, device_of

PERSISTENCE_DOMAIN_BUDGET = 7 * 1024


@dataclass
class Snapshot:
    """Persistence-domain contents surviving a crash: the request FIFOs,
    host queue, translation table, and in-flight registers per device."""

    live_requests: list[NdpRequest] = field(default_factory=list)
    lut_entries: int = 0
    host_queue_bytes: int = 0
    inflight_reg_bytes: int = 256

    def to_bytes(self) -> bytes:
        blob = bytearray()
        for r in self.live_requests:
            blob += r.encode()
        blob += bytes(self.lut_entries * LUT_ENTRY_BYTES)
        blob += bytes(self.host_queue_bytes)
        blob += bytes(self.inflight_reg_bytes)
        return bytes(blob)

    def budget_bytes(self) -> int:
        return (len(self.live_requests) * REQUEST_BYTES
                + self.lut_entries * LUT_ENTRY_BYTES
                + self.host_queue_bytes + self.inflight_reg_bytes)

    def check_budget(self):
        used = self.budget_bytes()
        if used > PERSISTENCE_DOMAIN_BUDGET:
            raise RecoveryFault(
                f"persistence domain snapshot {used} bytes exceeds "
                f"{PERSISTENCE_DOMAIN_BUDGET}")


class _Rd:
    """Read helper for one device image with optional read logging."""

    def __init__(self, images, dev, reads):
        self.img = images[dev]
        self.dev = dev
        self.reads = reads

    def __call__(self, addr: int, n: int) -> bytes:
        if self.reads is not None:
            self.reads.append((self.dev, addr, n))
        return bytes(self.img[addr:addr + n])


def _local(layout: PoolLayout, vaddr: int) -> int:
    return vaddr + (layout.base_phys - layout.base_virt)


def hw_recover(images: list[bytearray], layouts: dict[int, PoolLayout],
               granularity: int, live_requests: list[NdpRequest],
               reads: list | None = None) -> list[bytearray]:
    """Re-execute interrupted, persistently queued requests in FIFO order."""
    for req in live_requests:
        if req.kind is RequestKind.COMMIT:
            continue
        layout = layouts[req.pool]
        d = req.device
        read = _Rd(images, d, reads)
        img = images[d]
        t, seq = req.thread, req.tx_seq

        if req.kind in (RequestKind.UNDO_LOG, RequestKind.CKPT):
            object_id = req.vaddr - layout.base_virt
            entries, _ = scan_entries(read, layout, t, seq)
            if any(e.object_id == object_id and e.length == req.size
                   for e in entries):
                continue
            local = _local(layout, req.vaddr)
            payload = read(local, req.size)
            for w in append_entry(read, layout, t, seq, object_id, ST_ACTIVE,
                                  payload):
                img[w.addr:w.addr + len(w.data)] = w.data
        elif req.kind is RequestKind.SHADOW_COPY:
            page = layout.page_of(req.vaddr)
            object_id = page * layout.page_size
            entries, _ = scan_entries(read, layout, t, seq)
            if any(e.object_id == object_id for e in entries):
                continue
            src = int.from_bytes(read(layout.pageref_addr(page), 8), "little")
            data = read(src, layout.page_size)
            img[req.dest_frame:req.dest_frame + layout.page_size] = data
            for w in append_entry(read, layout, t, seq, object_id, ST_ACTIVE,
                                  req.dest_frame.to_bytes(8, "little")):
                img[w.addr:w.addr + len(w.data)] = w.data
        elif req.kind is RequestKind.APPLY_REDO:
            entries, _ = scan_entries(read, layout, t, seq)
            for e in entries:
                if e.status != ST_ACTIVE:
                    continue
                local = _local(layout, layout.base_virt + e.object_id)
                img[local:local + e.length] = e.payload
        else:  # pragma: no cover
            raise RecoveryFault(f"cannot replay request kind {req.kind}")
    return images


def _tombstone_all(img: bytearray, entries, seq: int):
    for e in entries:
        if e.status != ST_INVALID:
            img[e.addr + 8:e.addr + 16] = encode_status_qword(
                ST_INVALID, seq, e.length)


def sw_recover(images: list[bytearray], layouts: dict[int, PoolLayout],
               granularity: int, reads: list | None = None) -> list[bytearray]:
    """Mechanism-aware software recovery pass over every (pool, thread)."""
    ndev = len(images)
    for pool in sorted(layouts):
        layout = layouts[pool]
        home = device_of(layout.base_virt, granularity, ndev)
        for t in range(layout.threads):
            slot_addr = layout.slot_addr(t)
            seq, state, mech = decode_slot(
                _Rd(images, home, reads)(slot_addr, 8))
            if state == TX_EMPTY:
                continue
            per_dev = [(d, _Rd(images, d, reads)) for d in range(ndev)]
            scans = [(d, read, scan_entries(read, layout, t, seq)[0])
                     for d, read in per_dev]

            if layout.purpose is Purpose.UNDO_LOG:
                if state == TX_COMMITTED:
                    for d, read, entries in scans:
                        _tombstone_all(images[d], entries, seq)
                else:
                    for d, read, entries in scans:
                        for e in reversed(entries):
                            if e.status == ST_ACTIVE:
                                local = _local(layout, layout.base_virt + e.object_id)
                                images[d][local:local + e.length] = e.payload
                        _tombstone_all(images[d], entries, seq)
                    images[home][slot_addr:slot_addr + 8] = encode_slot(
                        seq, TX_EMPTY, mech)

            elif layout.purpose is Purpose.REDO_LOG:
                if state == TX_REDO_READY:
                    for d, read, entries in scans:
                        for e in entries:
                            if e.status == ST_ACTIVE:
                                local = _local(layout, layout.base_virt + e.object_id)
                                images[d][local:local + e.length] = e.payload
                        _tombstone_all(images[d], entries, seq)
                    images[home][slot_addr:slot_addr + 8] = encode_slot(
                        seq, TX_COMMITTED, mech)
                else:
                    # open: entries unusable; committed: already applied
                    for d, read, entries in scans:
                        _tombstone_all(images[d], entries, seq)
                    if state == TX_OPEN:
                        images[home][slot_addr:slot_addr + 8] = encode_slot(
                            seq, TX_EMPTY, mech)

            elif layout.purpose is Purpose.CHECKPOINT:
                if state == TX_COMMITTED:
                    for d, read, entries in scans:
                        _tombstone_all(images[d], entries, seq)
                else:
                    for d, read, entries in scans:
                        for e in reversed(entries):
                            if e.status == ST_ACTIVE:
                                local = _local(layout, layout.base_virt + e.object_id)
                                images[d][local:local + e.length] = e.payload
                        _tombstone_all(images[d], entries, seq)
                    images[home][slot_addr:slot_addr + 8] = encode_slot(
                        seq, TX_EMPTY, mech)

            elif layout.purpose is Purpose.SHADOW_PAGES:
                if state == TX_COMMITTED:
                    # roll the page-reference switches forward
                    for d, read, entries in scans:
                        for e in entries:
                            if e.status == ST_ACTIVE:
                                page = e.object_id // layout.page_size
                                pr = layout.pageref_addr(page)
                                images[d][pr:pr + 8] = e.payload[:8]
                        _tombstone_all(images[d], entries, seq)
                else:
                    # not committed: frames are scratch, references untouched
                    for d, read, entries in scans:
                        _tombstone_all(images[d], entries, seq)
                    images[home][slot_addr:slot_addr + 8] = encode_slot(
                        seq, TX_EMPTY, mech)
    return images


def recover(images: list[bytearray], layouts: dict[int, PoolLayout],
            granularity: int, live_requests: list[NdpRequest] | None = None,
            reads: list | None = None) -> list[bytearray]:
    """Full crash recovery: device replay, then software handler."""
    hw_recover(images, layouts, granularity, list(live_requests or []), reads)
    return sw_recover(images, layouts, granularity, reads)
