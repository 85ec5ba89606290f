"""Discrete-event machine model: CPU threads, devices, and the handler.

Threads are Python generators interleaved by a deterministic event heap
keyed on (time, priority, sequence); CPU resumptions carry priority 0
and device events priority 1, so ties always resolve the same way.

A machine runs one :class:`~ndpsim.program.Program` under a
:class:`MachineConfig`.  With ``offload`` enabled, crash-consistency ops
become commands duplicated to the devices their target ranges interleave
over; each device queues them in a 32-entry request FIFO, dispatches
non-conflicting entries to idle units, and reports per-device completion
to a synchronization state machine.  With ``offload`` disabled the same
ops run inline on the CPU at CPU copy cost, producing byte-identical
data images at different simulated times.

Every persisted byte, submitted request descriptor, completion bit, and
synchronization point lands in the run-global persist log with explicit
dependency edges recording only *guaranteed* ordering (per-thread
persist order, request-descriptor-before-execution, conflict order on a
device, completion-bits-before-sync, sync-before-reset).  The crash
oracle enumerates dependency-closed subsets of that log.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

from .costmodel import CostModel
from .errors import ConfigError, OverflowFault, ProtocolFault, WorkloadFault
from .mem import PersistLog, PersistRecord, PhysicalMemory
from .primitives import (ENTRY_HDR, MECHANISM_PURPOSE, REQUEST_BYTES,
                         ST_ACTIVE, ST_INVALID, TX_COMMITTED, TX_OPEN,
                         TX_REDO_READY, EntryWrite, NdpRequest, PoolLayout,
                         Purpose, RequestKind, append_entry, encode_slot,
                         scan_entries, tombstone_write)
from . import program as prg
from .sync import SyncState
from .trace import Trace
from .translate import AddressMap, device_of, split_range

HOST_QUEUE_BYTES = 4096
FIFO_DEPTH = 32
INFLIGHT_REG_BYTES = 256

_RESET_ORDER = {"marker": 0, "pageref": 1, "tombstone": 2}

MECH_IDS = {"logging": 1, "redo-logging": 2, "checkpointing": 3, "shadow-paging": 4}


@dataclass
class MachineConfig:
    device_count: int = 1
    granularity: int = 4096
    cost: CostModel = field(default_factory=CostModel)
    offload: bool = True
    sync_mode: str = "delayed"          # delayed | swpoll
    fifo_depth: int = FIFO_DEPTH
    host_queue_bytes: int = HOST_QUEUE_BYTES
    oracle_mode: bool = False           # chunk persists for fine crash cuts
    chunk: int = 8
    # fault-injection switches for deliberately broken protocol variants
    no_conflict_stall: bool = False
    premature_reset: bool = False
    skip_sync: bool = False

    def __post_init__(self):
        if self.device_count < 1:
            raise ConfigError("device_count must be >= 1")
        if self.sync_mode not in ("delayed", "swpoll"):
            raise ConfigError(f"unknown sync_mode {self.sync_mode!r}")

    @classmethod
    def baseline(cls, **kw) -> "MachineConfig":
        return cls(device_count=1, offload=False, **kw)

    @classmethod
    def single_device(cls, **kw) -> "MachineConfig":
        return cls(device_count=1, offload=True, **kw)

    @classmethod
    def multi_device(cls, devices: int = 2, **kw) -> "MachineConfig":
        return cls(device_count=devices, offload=True, sync_mode="delayed", **kw)

    @classmethod
    def multi_device_swsync(cls, devices: int = 2, **kw) -> "MachineConfig":
        return cls(device_count=devices, offload=True, sync_mode="swpoll", **kw)


CONFIG_BUILDERS = {
    "baseline": MachineConfig.baseline,
    "sd": MachineConfig.single_device,
    "md-swsync": MachineConfig.multi_device_swsync,
    "md": MachineConfig.multi_device,
}


class Signal:
    """One-shot wakeup condition."""

    __slots__ = ("fired", "waiters")

    def __init__(self):
        self.fired = False
        self.waiters = []

    def wait(self, cb, schedule):
        if self.fired:
            schedule(cb)
        else:
            self.waiters.append(cb)

    def fire(self, schedule):
        self.fired = True
        waiters, self.waiters = self.waiters, []
        for cb in waiters:
            schedule(cb)


@dataclass
class TxContext:
    pool: int
    thread: int
    seq: int
    mechanism: str
    devices: set[int] = field(default_factory=set)
    shadow_map: dict[int, int] = field(default_factory=dict)   # page -> frame
    redo_targets: dict[int, list[tuple[int, int]]] = field(default_factory=dict)
    open: bool = True


class _Device:
    def __init__(self, idx: int, cfg: MachineConfig):
        self.idx = idx
        self.fifo: list[NdpRequest] = []
        self.parked: list[NdpRequest] = []
        self.parked_bytes = 0
        self.units: list[NdpRequest | None] = [None] * cfg.cost.units_per_device
        self.space = Signal()
        # released NDP claims per completed request:
        # (lo, hi, last trace event id, last persist stamp)
        self.history: list[tuple[int, int, int, int]] = []

    def active_requests(self):
        return [r for r in self.units if r is not None] + self.fifo + self.parked


class Machine:
    """Deterministic simulator for one program under one configuration."""

    def __init__(self, program: prg.Program, config: MachineConfig | None = None):
        self.prog = program
        self.cfg = config or MachineConfig()
        self.cost = self.cfg.cost
        self.now = 0.0
        self._heap: list = []
        self._seq = 0
        self.trace = Trace()
        self.plog = PersistLog()
        self.stamp_event = {}

        self._setup_pools()
        self.mems = [PhysicalMemory(d, self.capacity, self.plog)
                     for d in range(self.cfg.device_count)]
        self.devs = [_Device(d, self.cfg) for d in range(self.cfg.device_count)]
        self._init_images()

        self._cmd_seq = 0
        self._chain: dict[int, int | None] = {}          # thread -> last CPU stamp
        self._tx: dict[tuple[int, int], TxContext] = {}  # (pool, thread) -> context
        self._tx_seq: dict[tuple[int, int], int] = {}
        self._syncs: dict[int, SyncState] = {}
        self._sync_stamp: dict[int, int] = {}
        self._sync_signal: dict[int, Signal] = {}
        self._drain_chain: dict[int, int] = {}
        self._drain_buf: dict[int, list] = {}
        self._cmd_subs: dict[int, list[NdpRequest]] = {}
        self._cmd_home: dict[int, int] = {}
        self._pool_commits: dict[int, list[int]] = {}    # pool -> open commit cmds
        self._pending_switch: dict[tuple[int, int], int] = {}  # (pool, page) -> frame
        self._frame_free: dict[tuple[int, int], list[int]] = {}
        self.requests_by_stamp: dict[int, NdpRequest] = {}
        self.submitted: list[NdpRequest] = []
        self.tx_begins: dict[tuple[int, int, int], int] = {}  # (pool,t,seq)->stamp
        for key, layout in self.layouts.items():
            if layout.purpose is Purpose.SHADOW_PAGES:
                for d in range(self.cfg.device_count):
                    self._frame_free[(key, d)] = [layout.frame_addr(i)
                                                  for i in range(layout.n_frames)]

    # ------------------------------------------------------------------
    # setup

    def _setup_pools(self):
        cfg = self.cfg
        self.layouts: dict[int, PoolLayout] = {}
        cursor = 0
        for pool, spec in sorted(self.prog.pools.items()):
            page = spec.get("page_size", 4096)
            purpose = spec["purpose"]
            purpose = Purpose(purpose) if not isinstance(purpose, Purpose) else purpose
            if cfg.device_count > 1 and purpose in (
                    Purpose.CHECKPOINT, Purpose.SHADOW_PAGES) and page != cfg.granularity:
                raise ConfigError(
                    "page-granular mechanisms need page_size == interleave granularity")
            align = max(page, cfg.granularity)
            base = spec.get("base_virt")
            if base is None:
                base = -(-cursor // align) * align
            layout = PoolLayout(pool, base, base, spec["size"], page, purpose,
                                threads=spec.get("threads", 1),
                                managed_frac=spec.get("managed_frac", 4))
            self.layouts[pool] = layout
            cursor = layout.managed_end
        self.capacity = max(4096, -(-cursor // 4096) * 4096)
        self.amap = AddressMap(cfg.device_count, self.capacity, cfg.granularity)
        for pool, layout in self.layouts.items():
            self.amap.register_pool(pool, layout.base_virt, layout.base_phys,
                                    layout.size)

    def _init_images(self):
        # identity page-reference tables, then program-provided initial data
        for layout in self.layouts.values():
            for p in range(layout.n_pages):
                ref = layout.data_page_addr(p).to_bytes(8, "little")
                for mem in self.mems:
                    mem.setup_write(layout.pageref_addr(p), ref)
        for pool, off, data in self.prog.setup:
            layout = self.layouts[pool]
            for dev, va, sz in split_range(layout.base_virt + off, len(data),
                                           self.cfg.granularity, self.cfg.device_count):
                rel = va - (layout.base_virt + off)
                local = va + self.amap.lookup(pool, 0).offset
                self.mems[dev].setup_write(local, data[rel:rel + sz])

    # ------------------------------------------------------------------
    # scheduler

    def _at(self, time: float, prio: int, fn):
        self._seq += 1
        heapq.heappush(self._heap, (time, prio, self._seq, fn))

    def _sched_now(self, fn, prio: int = 0):
        self._at(self.now, prio, fn)

    def run(self) -> float:
        for t in sorted(self.prog.threads):
            gen = self._thread_gen(t, self.prog.threads[t])
            self._at(0.0, 0, lambda g=gen: self._resume(g))
        while self._heap:
            time, _prio, _seq, fn = heapq.heappop(self._heap)
            if time < self.now - 1e-9:
                raise ProtocolFault("event scheduled in the past")
            self.now = max(self.now, time)
            fn()
        return self.now

    def _resume(self, gen, value=None):
        try:
            req = gen.send(value)
        except StopIteration:
            return
        kind, payload = req
        if kind == "delay":
            self._at(self.now + payload, 0, lambda: self._resume(gen))
        elif kind == "wait":
            payload.wait(lambda: self._resume(gen), self._sched_now)
        else:  # pragma: no cover - generator protocol misuse
            raise ProtocolFault(f"unknown thread request {kind!r}")

    # ------------------------------------------------------------------
    # persist helpers

    def _emit_persist(self, rec: PersistRecord, actor: str, *, shared: bool,
                      tag: str, cmd=None, sync=None, stall=()):
        glo = rec.device * self.capacity + rec.addr
        ev = self.trace.emit(actor, "Persist", glo, glo + max(len(rec.data), 1),
                             persist_stamp=rec.stamp, shared=shared, cmd=cmd,
                             sync=sync, tag=tag, stall=tuple(sorted(stall)))
        self.stamp_event[rec.stamp] = ev.id
        return ev

    def _is_shared(self, pool: int, local_addr: int) -> bool:
        return self.layouts[pool].contains_data(local_addr)

    def _cpu_persist(self, t: int, device: int, addr: int, data: bytes, *,
                     pool: int, tag: str = "data", atomic: bool = False,
                     extra_deps=(), stall=()) -> list[PersistRecord]:
        """CPU-originated persist; chained in the thread's persist order."""
        deps = [d for d in ([self._chain.get(t)] + list(extra_deps)) if d]
        chunk = None
        if self.cfg.oracle_mode and not atomic:
            chunk = self.cfg.chunk
        recs = self.mems[device].write_direct(
            addr, data, time=self.now, actor=f"cpu{t}", kind=tag,
            deps=deps, chunk=chunk)
        shared = self._is_shared(pool, addr)
        for r in recs:
            self._emit_persist(r, f"cpu{t}", shared=shared, tag=tag, stall=stall)
            stall = ()
        self._chain[t] = recs[-1].stamp
        return recs

    def _meta_persist(self, device: int, *, actor: str, kind: str, cmd: int,
                      deps, data: bytes = b"") -> PersistRecord:
        """Zero-length bookkeeping persist (descriptor / completion bit / sync)."""
        rec = self.plog.append(PersistRecord(
            0, self.now, device, 0, data, actor, kind=kind, cmd=cmd,
            deps=[d for d in deps if d]))
        return rec

    # ------------------------------------------------------------------
    # conflict ordering against device claims

    def _conflicting(self, device: int, lo: int, hi: int) -> list[NdpRequest]:
        out = []
        for r in self.devs[device].active_requests():
            if any(l < hi and lo < h for l, h in r.claims):
                out.append(r)
        return out

    def _cpu_order(self, t: int, device: int, lo: int, hi: int):
        """Generator: stall behind conflicting commands.

        Returns (trace edge ids, persist stamps) of the completed
        overlapping commands this access is guaranteed to follow.
        """
        edges, stamps = set(), set()
        if self.cfg.no_conflict_stall:
            return (), ()
        while True:
            conflicts = self._conflicting(device, lo, hi)
            if not conflicts:
                break
            req = conflicts[0]
            yield ("wait", req.done)
            if req.last_event is not None:
                edges.add(req.last_event)
            if req.last_stamp is not None:
                stamps.add(req.last_stamp)
        for l, h, ev, st in self.devs[device].history:
            if l < hi and lo < h:
                edges.add(ev)
                stamps.add(st)
        return tuple(sorted(edges)), tuple(sorted(stamps))

    # ------------------------------------------------------------------
    # thread execution

    def _thread_gen(self, t: int, ops):
        for op in ops:
            yield from self._exec_op(t, op)

    def _exec_op(self, t: int, op):
        if isinstance(op, prg.Compute):
            yield ("delay", op.ns)
        elif isinstance(op, prg.WriteData):
            yield from self._op_write(t, op)
        elif isinstance(op, prg.ReadData):
            yield from self._op_read(t, op)
        elif isinstance(op, prg.Flush):
            yield from self._op_flush(t, op)
        elif isinstance(op, prg.TxBegin):
            yield from self._op_tx_begin(t, op)
        elif isinstance(op, prg.RedoWrite):
            yield from self._op_redo_write(t, op)
        elif isinstance(op, prg.RedoMark):
            yield from self._op_redo_mark(t, op)
        elif isinstance(op, (prg.UndoLog, prg.CkptTouch, prg.ShadowTouch,
                             prg.ApplyLog, prg.Commit)):
            if self.cfg.offload:
                yield from self._op_offload(t, op)
            else:
                yield from self._op_inline(t, op)
        else:
            raise WorkloadFault(f"unknown op {op!r}")

    def _locate(self, pool: int, t: int, off: int, size: int):
        """Split a pool-relative data range into (device, local, vaddr, size)."""
        layout = self.layouts[pool]
        ctx = self._tx.get((pool, t))
        out = []
        for dev, va, sz in split_range(layout.base_virt + off, size,
                                       self.cfg.granularity, self.cfg.device_count):
            local = va + self.amap.lookup(pool, t).offset
            # shadow indirection: open-transaction pages resolve to their frame
            if layout.purpose is Purpose.SHADOW_PAGES:
                page = layout.page_of(va)
                frame = None
                if ctx is not None and ctx.open and page in ctx.shadow_map:
                    frame = ctx.shadow_map[page]
                elif (pool, page) in self._pending_switch:
                    frame = self._pending_switch[(pool, page)]
                else:
                    pref = self.mems[dev].read_persisted(layout.pageref_addr(page), 8)
                    frame = int.from_bytes(pref, "little")
                local = frame + (local - layout.data_page_addr(page))
            out.append((dev, local, va, sz))
        return out

    def _op_write(self, t: int, op: prg.WriteData):
        pieces = self._locate(op.pool, t, op.off, len(op.data))
        pos = 0
        for dev, local, va, sz in pieces:
            self.mems[dev].write_volatile(local, op.data[pos:pos + sz], t)
            glo = dev * self.capacity + local
            self.trace.emit(f"cpu{t}", "Write", glo, glo + sz,
                            shared=self._is_shared(op.pool, local))
            pos += sz
        yield ("delay", self.cost.cpu_store_ns)

    def _op_read(self, t: int, op: prg.ReadData):
        for dev, local, va, sz in self._locate(op.pool, t, op.off, op.size):
            edges, _stamps = yield from self._cpu_order(t, dev, local, local + sz)
            self.mems[dev].read(local, sz)
            glo = dev * self.capacity + local
            self.trace.emit(f"cpu{t}", "Read", glo, glo + sz,
                            shared=self._is_shared(op.pool, local),
                            stall=tuple(edges))
        yield ("delay", self.cost.cpu_store_ns)

    def _op_flush(self, t: int, op: prg.Flush):
        total = 0
        for dev, local, va, sz in self._locate(op.pool, t, op.off, op.size):
            edges, stamps = yield from self._cpu_order(t, dev, local, local + sz)
            mem = self.mems[dev]
            hits = [r for r in list(mem.volatile)
                    if r.addr < local + sz and local < r.addr + len(r.data)
                    and r.thread == t]
            for rec in hits:
                mem.volatile.remove(rec)
                self._cpu_persist(t, dev, rec.addr, rec.data, pool=op.pool,
                                  tag="data", stall=edges, extra_deps=stamps)
                edges, stamps = (), ()
                total += len(rec.data)
        yield ("delay", self.cost.host_transfer_ns(total))

    def _op_tx_begin(self, t: int, op: prg.TxBegin):
        key = (op.pool, t)
        # transaction slots and recovery regions are reusable only after
        # the previous commit on this pool has fully synchronized
        for cmd in list(self._pool_commits.get(op.pool, [])):
            sig = self._sync_signal.get(cmd)
            if sig is not None and not sig.fired:
                yield ("wait", sig)
        seq = self._tx_seq.get(key, 0) % 255 + 1
        self._tx_seq[key] = seq
        ctx = TxContext(op.pool, t, seq, op.mechanism)
        self._tx[key] = ctx
        layout = self.layouts[op.pool]
        home = self._home_device(op.pool)
        extra = [self._drain_chain.get(c) for c in self._pool_commits.get(op.pool, [])]
        self._pool_commits[op.pool] = []
        recs = self._cpu_persist(t, home, layout.slot_addr(t),
                                 encode_slot(seq, TX_OPEN, MECH_IDS[op.mechanism]),
                                 pool=op.pool, tag="marker", atomic=True,
                                 extra_deps=[d for d in extra if d])
        self.tx_begins[(op.pool, t, seq)] = recs[-1].stamp
        yield ("delay", self.cost.pm_access_latency_ns)

    def _op_redo_write(self, t: int, op: prg.RedoWrite):
        ctx = self._require_tx(op.pool, t)
        layout = self.layouts[op.pool]
        if layout.purpose is not Purpose.REDO_LOG:
            raise WorkloadFault("redo append on a non-redo pool")
        pos = 0
        for dev, local, va, sz in self._locate(op.pool, t, op.off, len(op.data)):
            object_id = va - layout.base_virt
            writes = append_entry(self.mems[dev].read_persisted, layout, t,
                                  ctx.seq, object_id, ST_ACTIVE,
                                  op.data[pos:pos + sz])
            for w in writes:
                self._cpu_persist(t, dev, w.addr, w.data, pool=op.pool,
                                  tag=w.kind, atomic=w.atomic)
            ctx.devices.add(dev)
            ctx.redo_targets.setdefault(dev, []).append((local, local + sz))
            pos += sz
        yield ("delay", self.cost.pm_access_latency_ns
               + len(op.data) * self.cost.cpu_copy_ns_per_byte)

    def _op_redo_mark(self, t: int, op: prg.RedoMark):
        ctx = self._require_tx(op.pool, t)
        layout = self.layouts[op.pool]
        self._cpu_persist(t, self._home_device(op.pool), layout.slot_addr(t),
                          encode_slot(ctx.seq, TX_REDO_READY,
                                      MECH_IDS[ctx.mechanism]),
                          pool=op.pool, tag="marker", atomic=True)
        yield ("delay", self.cost.pm_access_latency_ns)

    def _require_tx(self, pool: int, t: int) -> TxContext:
        ctx = self._tx.get((pool, t))
        if ctx is None or not ctx.open:
            raise ProtocolFault(f"no open transaction on pool {pool} thread {t}")
        return ctx

    def _home_device(self, pool: int) -> int:
        return device_of(self.layouts[pool].base_virt, self.cfg.granularity,
                         self.cfg.device_count)

    # ------------------------------------------------------------------
    # command construction (offloaded path)

    def _page_pieces(self, pool: int, t: int, off: int, size: int):
        """Expand a range to whole pages and split per device."""
        layout = self.layouts[pool]
        first = (off // layout.page_size) * layout.page_size
        last = -(-(off + size) // layout.page_size) * layout.page_size
        last = min(last, layout.size)
        return self._locate_raw(pool, t, first, last - first)

    def _locate_raw(self, pool: int, t: int, off: int, size: int):
        layout = self.layouts[pool]
        out = []
        for dev, va, sz in split_range(layout.base_virt + off, size,
                                       self.cfg.granularity, self.cfg.device_count):
            out.append((dev, va + self.amap.lookup(pool, t).offset, va, sz))
        return out

    def _op_offload(self, t: int, op):
        ctx = self._require_tx(op.pool, t)
        layout = self.layouts[op.pool]
        area = layout.thread_area(t)
        subs: list[NdpRequest] = []
        cmd = self._cmd_seq = self._cmd_seq + 1

        if isinstance(op, prg.UndoLog):
            for dev, local, va, sz in self._locate_raw(op.pool, t, op.off, op.size):
                subs.append(NdpRequest(
                    RequestKind.UNDO_LOG, op.pool, t, va, sz, cmd, device=dev,
                    tx_seq=ctx.seq,
                    claims=[(local, local + sz), (area[0], area[0] + area[1])]))
        elif isinstance(op, prg.CkptTouch):
            for dev, local, va, sz in self._page_pieces(op.pool, t, op.off, op.size):
                subs.append(NdpRequest(
                    RequestKind.CKPT, op.pool, t, va, sz, cmd, device=dev,
                    tx_seq=ctx.seq,
                    claims=[(local, local + sz), (area[0], area[0] + area[1])]))
        elif isinstance(op, prg.ShadowTouch):
            for dev, local, va, sz in self._page_pieces(op.pool, t, op.off, op.size):
                page = layout.page_of(va)
                if page in ctx.shadow_map:
                    continue
                frame = self._alloc_frame(op.pool, dev)
                ctx.shadow_map[page] = frame
                src = int.from_bytes(
                    self.mems[dev].read_persisted(layout.pageref_addr(page), 8),
                    "little")
                subs.append(NdpRequest(
                    RequestKind.SHADOW_COPY, op.pool, t, va, sz, cmd, device=dev,
                    tx_seq=ctx.seq, dest_frame=frame,
                    claims=[(src, src + layout.page_size),
                            (frame, frame + layout.page_size),
                            (area[0], area[0] + area[1])]))
            if not subs:
                return
        elif isinstance(op, prg.ApplyLog):
            for dev, targets in sorted(ctx.redo_targets.items()):
                lo = min(l for l, h in targets)
                hi = max(h for l, h in targets)
                subs.append(NdpRequest(
                    RequestKind.APPLY_REDO, op.pool, t, lo, hi - lo, cmd,
                    device=dev, tx_seq=ctx.seq, targets=list(targets),
                    claims=list(targets) + [(area[0], area[0] + area[1])]))
        elif isinstance(op, prg.Commit):
            home = self._home_device(op.pool)
            devices = sorted(ctx.devices | {home})
            for dev in devices:
                claims = [(area[0], area[0] + area[1])]
                if dev == home:
                    claims.append((layout.slot_addr(t), layout.slot_addr(t) + 8))
                if layout.purpose is Purpose.SHADOW_PAGES:
                    for page in ctx.shadow_map:
                        claims.append((layout.pageref_addr(page),
                                       layout.pageref_addr(page) + 8))
                subs.append(NdpRequest(
                    RequestKind.COMMIT, op.pool, t, layout.base_virt, 0, cmd,
                    device=dev, tx_seq=ctx.seq, claims=claims))
            ctx.open = False
            self._pool_commits.setdefault(op.pool, []).append(cmd)
            for page, frame in ctx.shadow_map.items():
                self._pending_switch[(op.pool, page)] = frame

        for s in subs:
            ctx.devices.add(s.device)
        yield from self._submit(t, op.pool, cmd, subs)
        if isinstance(op, prg.Commit) and self.cfg.sync_mode == "swpoll":
            sig = self._sync_signal[cmd]
            start = self.now
            if not sig.fired:
                yield ("wait", sig)
            waited = self.now - start
            polls = max(1.0, -(-waited // self.cost.sw_sync_poll_ns))
            target = start + polls * self.cost.sw_sync_poll_ns
            if target > self.now:
                yield ("delay", target - self.now)

    def _submit(self, t: int, pool: int, cmd: int, subs: list[NdpRequest]):
        if not subs:
            raise ProtocolFault("command with no sub-requests")
        home = self._home_device(pool)
        participants = [s.device for s in subs]
        sync_devs = [home] if (self.cfg.skip_sync and home in participants) \
            else participants
        sync = SyncState(on_drain=lambda item, c=cmd: self._drain_buf[c].append(item),
                         on_all_complete=lambda c=cmd: self._sync_point(c))
        sync.on_command_duplicated(sync_devs)
        self._syncs[cmd] = sync
        self._sync_signal[cmd] = Signal()
        self._drain_buf[cmd] = []
        self._cmd_subs[cmd] = subs
        self._cmd_home[cmd] = home

        glo = min(s.device * self.capacity + s.vaddr for s in subs)
        ghi = max(s.device * self.capacity + s.vaddr + max(s.size, 1) for s in subs)
        self.trace.emit(f"cpu{t}", "SyncBegin", glo, ghi, shared=False, cmd=cmd)

        yield ("delay", self.cost.command_issue_latency_ns)
        for s in subs:
            s.done = Signal()
            s.last_event = None
            s.last_stamp = None
            rec = self._meta_persist(s.device, actor=f"cpu{t}", kind="fifo",
                                     cmd=cmd, deps=[self._chain.get(t)],
                                     data=s.encode())
            self._chain[t] = rec.stamp
            s.fifo_stamp = rec.stamp
            self.requests_by_stamp[rec.stamp] = s
            self.submitted.append(s)
            dev = self.devs[s.device]
            while (dev.parked_bytes + REQUEST_BYTES > self.cfg.host_queue_bytes
                   and len(dev.fifo) >= self.cfg.fifo_depth):
                yield ("wait", dev.space)
            if len(dev.fifo) >= self.cfg.fifo_depth:
                dev.parked.append(s)
                dev.parked_bytes += REQUEST_BYTES
            else:
                dev.fifo.append(s)
            self._sched_now(lambda d=s.device: self._dispatch(d), prio=1)

    def _alloc_frame(self, pool: int, dev: int) -> int:
        free = self._frame_free[(pool, dev)]
        if not free:
            raise OverflowFault(f"pool {pool}: out of shadow frames on device {dev}")
        return free.pop(0)

    # ------------------------------------------------------------------
    # device side

    def _dispatch(self, d: int):
        dev = self.devs[d]
        while dev.parked and len(dev.fifo) < self.cfg.fifo_depth:
            dev.fifo.append(dev.parked.pop(0))
            dev.parked_bytes -= REQUEST_BYTES
        old_space, dev.space = dev.space, Signal()
        old_space.fire(self._sched_now)

        progress = True
        while progress:
            progress = False
            idle = [u for u, r in enumerate(dev.units) if r is None]
            if not idle:
                return
            for i, req in enumerate(dev.fifo):
                earlier = [r for r in dev.units if r is not None] + dev.fifo[:i]
                if any(any(l < ch and cl < h for cl, ch in req.claims
                           for l, h in r.claims) for r in earlier):
                    continue
                dev.fifo.pop(i)
                self._start_request(d, idle[0], req)
                progress = True
                break

    def _start_request(self, d: int, unit: int, req: NdpRequest):
        dev = self.devs[d]
        dev.units[unit] = req
        # dispatch is conflict-ordered: had any of these completed later,
        # the dispatcher would have held this request back, so their
        # persists are guaranteed to precede ours
        req.conflict_deps = sorted({
            st for lo, hi, ev, st in dev.history
            if st is not None and any(l < hi and lo < h for l, h in req.claims)})
        work, writes, resets, reads = self._execute(d, unit, req)
        actor = f"ndp{d}.{unit}"
        for lo, hi in reads:
            glo = d * self.capacity + lo
            self.trace.emit(actor, "Read", glo, glo + (hi - lo),
                            shared=self._is_shared(req.pool, lo), cmd=req.seq)
        dur = self.cost.unit_exec_ns(work)
        self._at(self.now + dur, 1,
                 lambda: self._complete_request(d, unit, req, writes, resets))

    def _execute(self, d: int, unit: int, req: NdpRequest):
        """Compute the effects of one sub-request (reads snapshot now)."""
        layout = self.layouts[req.pool]
        mem = self.mems[d]
        read = mem.read_persisted
        t, seq = req.thread, req.tx_seq

        if req.kind in (RequestKind.UNDO_LOG, RequestKind.CKPT):
            local = req.vaddr + self.amap.lookup(req.pool, t).offset
            object_id = req.vaddr - layout.base_virt
            entries, _ = scan_entries(read, layout, t, seq)
            if any(e.object_id == object_id and e.length == req.size
                   for e in entries):
                return 0, [], [], []          # replayed after completion
            payload = read(local, req.size)
            writes = append_entry(read, layout, t, seq, object_id, ST_ACTIVE,
                                  payload)
            return req.size, writes, [], [(local, local + req.size)]

        if req.kind is RequestKind.SHADOW_COPY:
            page = layout.page_of(req.vaddr)
            object_id = page * layout.page_size
            entries, _ = scan_entries(read, layout, t, seq)
            if any(e.object_id == object_id for e in entries):
                return 0, [], [], []
            src = int.from_bytes(read(layout.pageref_addr(page), 8), "little")
            data = read(src, layout.page_size)
            writes = [EntryWrite(req.dest_frame, data, "data")]
            writes += append_entry(read, layout, t, seq, object_id, ST_ACTIVE,
                                   req.dest_frame.to_bytes(8, "little"))
            return layout.page_size, writes, [], [(src, src + layout.page_size)]

        if req.kind is RequestKind.APPLY_REDO:
            entries, _ = scan_entries(read, layout, t, seq)
            writes, reads, work = [], [], 0
            base, size = layout.thread_area(t)
            reads.append((base, base + size))
            off = self.amap.lookup(req.pool, t).offset
            for e in entries:
                if e.status != ST_ACTIVE:
                    continue
                local = layout.base_virt + e.object_id + off
                writes.append(EntryWrite(local, e.payload, "data"))
                work += e.length
            return work, writes, [], reads

        if req.kind is RequestKind.COMMIT:
            resets = []
            if d == self._cmd_home[req.seq]:
                resets.append(EntryWrite(
                    layout.slot_addr(t),
                    encode_slot(seq, TX_COMMITTED, read(layout.slot_addr(t), 8)[2]),
                    "marker", atomic=True, reset_for=req.seq))
            entries, _ = scan_entries(read, layout, t, seq)
            for e in entries:
                if layout.purpose is Purpose.SHADOW_PAGES and e.status == ST_ACTIVE:
                    page = e.object_id // layout.page_size
                    w = EntryWrite(layout.pageref_addr(page), e.payload[:8],
                                   "pageref", atomic=True, reset_for=req.seq)
                    resets.append(w)
                if e.status != ST_INVALID:
                    resets.append(tombstone_write(e, seq, req.seq))
            return 0, [], resets, []

        raise ProtocolFault(f"unknown request kind {req.kind}")

    def _complete_request(self, d: int, unit: int, req: NdpRequest, writes, resets):
        dev = self.devs[d]
        actor = f"ndp{d}.{unit}"
        mem = self.mems[d]
        prev = [req.fifo_stamp] + list(getattr(req, "conflict_deps", []))
        layout = self.layouts[req.pool]
        for w in writes:
            chunk = None
            if self.cfg.oracle_mode and not w.atomic:
                chunk = self.cfg.chunk
            recs = mem.write_direct(w.addr, w.data, time=self.now, actor=actor,
                                    kind=w.kind, cmd=req.seq, deps=prev,
                                    chunk=chunk)
            for r in recs:
                self._emit_persist(r, actor, shared=self._is_shared(req.pool, r.addr),
                                   tag=w.kind, cmd=req.seq)
            prev = [recs[-1].stamp]

        if resets:
            if self.cfg.premature_reset:
                for w in resets:
                    self._pre_switch(req, layout, w)
                    rec = mem.write_direct(w.addr, w.data, time=self.now,
                                           actor=actor, kind=w.kind,
                                           cmd=req.seq, reset_for=w.reset_for,
                                           deps=prev)[0]
                    self._emit_persist(rec, actor,
                                       shared=self._is_shared(req.pool, w.addr),
                                       tag=w.kind, cmd=req.seq, sync=w.reset_for)
                    prev = [rec.stamp]
            else:
                self._syncs[req.seq].defer_reset([(d, req, w) for w in resets])

        # the per-request completion bit is itself persistent state
        bit = self._meta_persist(d, actor=actor, kind="status", cmd=req.seq,
                                 deps=prev)
        self._emit_persist(bit, actor, shared=False, tag="status", cmd=req.seq)
        req.last_stamp = prev[0]
        req.last_event = self.stamp_event[bit.stamp]
        req._bit_stamp = bit.stamp

        dev.units[unit] = None
        for lo, hi in req.claims:
            dev.history.append((lo, hi, req.last_event, req.last_stamp))
        req.done.fire(self._sched_now)
        sync = self._syncs[req.seq]
        if d in sync.completion_bits:
            sync.on_complete(d)
        self._flush_drains(req.seq)
        self._sched_now(lambda: self._dispatch(d), prio=1)

    def _sync_point(self, cmd: int):
        subs = self._cmd_subs[cmd]
        deps = [getattr(s, "_bit_stamp", None) for s in subs]
        home = self._cmd_home[cmd]
        rec = self._meta_persist(home, actor="sync", kind="sync", cmd=cmd,
                                 deps=deps)
        self._sync_stamp[cmd] = rec.stamp
        glo = home * self.capacity
        ev = self.trace.emit("sync", "SyncComplete", glo, glo + 1, shared=False,
                             cmd=cmd, persist_stamp=rec.stamp)
        self.stamp_event[rec.stamp] = ev.id
        self._drain_chain[cmd] = rec.stamp
        self._sync_signal[cmd].fire(self._sched_now)

    def _flush_drains(self, cmd: int):
        buf = self._drain_buf.get(cmd)
        if not buf or cmd not in self._sync_stamp:
            return
        self._drain_buf[cmd] = []
        buf.sort(key=lambda item: _RESET_ORDER.get(item[2].kind, 3))
        for d, req, w in buf:
            self._pre_switch(req, self.layouts[req.pool], w)
            rec = self.mems[d].write_direct(
                w.addr, w.data, time=self.now, actor="sync", kind=w.kind,
                reset_for=cmd, deps=[self._drain_chain[cmd]])[0]
            self._emit_persist(rec, "sync",
                               shared=self._is_shared(req.pool, w.addr),
                               tag=w.kind, sync=cmd)
            self._drain_chain[cmd] = rec.stamp

    def _pre_switch(self, req: NdpRequest, layout: PoolLayout, w: EntryWrite):
        """Before a page-reference switch persists: recycle the replaced
        frame and retire the pending logical redirect."""
        if layout.purpose is not Purpose.SHADOW_PAGES or w.kind != "pageref":
            return
        page = (w.addr - layout.pageref_base) // 8
        self._pending_switch.pop((req.pool, page), None)
        old = int.from_bytes(
            self.mems[req.device].read_persisted(w.addr, 8), "little")
        # the replaced frame (original data page or earlier shadow frame)
        # goes back to the allocator
        if old % layout.page_size == 0 and (
                layout.contains_data(old) or old >= layout.frames_base):
            free = self._frame_free[(req.pool, req.device)]
            if old not in free:
                free.append(old)
                free.sort()

    # ------------------------------------------------------------------
    # inline (CPU-only) primitives

    def _op_inline(self, t: int, op):
        ctx = self._require_tx(op.pool, t)
        layout = self.layouts[op.pool]

        if isinstance(op, prg.UndoLog):
            for dev, local, va, sz in self._locate_raw(op.pool, t, op.off, op.size):
                object_id = va - layout.base_virt
                payload = self.mems[dev].read_persisted(local, sz)
                for w in append_entry(self.mems[dev].read_persisted, layout, t,
                                      ctx.seq, object_id, ST_ACTIVE, payload):
                    self._cpu_persist(t, dev, w.addr, w.data, pool=op.pool,
                                      tag=w.kind, atomic=w.atomic)
                yield ("delay", self.cost.cpu_copy_ns(sz))

        elif isinstance(op, prg.CkptTouch):
            for dev, local, va, sz in self._page_pieces(op.pool, t, op.off, op.size):
                object_id = va - layout.base_virt
                entries, _ = scan_entries(self.mems[dev].read_persisted, layout,
                                          t, ctx.seq)
                if any(e.object_id == object_id for e in entries):
                    continue
                payload = self.mems[dev].read_persisted(local, sz)
                for w in append_entry(self.mems[dev].read_persisted, layout, t,
                                      ctx.seq, object_id, ST_ACTIVE, payload):
                    self._cpu_persist(t, dev, w.addr, w.data, pool=op.pool,
                                      tag=w.kind, atomic=w.atomic)
                yield ("delay", self.cost.cpu_copy_ns(sz))

        elif isinstance(op, prg.ShadowTouch):
            for dev, local, va, sz in self._page_pieces(op.pool, t, op.off, op.size):
                page = layout.page_of(va)
                if page in ctx.shadow_map:
                    continue
                frame = self._alloc_frame(op.pool, dev)
                ctx.shadow_map[page] = frame
                src = int.from_bytes(
                    self.mems[dev].read_persisted(layout.pageref_addr(page), 8),
                    "little")
                data = self.mems[dev].read_persisted(src, layout.page_size)
                self._cpu_persist(t, dev, frame, data, pool=op.pool, tag="data")
                for w in append_entry(self.mems[dev].read_persisted, layout, t,
                                      ctx.seq, page * layout.page_size, ST_ACTIVE,
                                      frame.to_bytes(8, "little")):
                    self._cpu_persist(t, dev, w.addr, w.data, pool=op.pool,
                                      tag=w.kind, atomic=w.atomic)
                yield ("delay", self.cost.cpu_copy_ns(layout.page_size))

        elif isinstance(op, prg.ApplyLog):
            off = self.amap.lookup(op.pool, t).offset
            total = 0
            for dev in sorted(ctx.redo_targets):
                entries, _ = scan_entries(self.mems[dev].read_persisted, layout,
                                          t, ctx.seq)
                for e in entries:
                    if e.status != ST_ACTIVE:
                        continue
                    local = layout.base_virt + e.object_id + off
                    self._cpu_persist(t, dev, local, e.payload, pool=op.pool,
                                      tag="data")
                    total += e.length
            yield ("delay", self.cost.cpu_copy_ns(total))

        elif isinstance(op, prg.Commit):
            home = self._home_device(op.pool)
            writes: list[tuple[int, EntryWrite]] = []
            writes.append((home, EntryWrite(
                layout.slot_addr(t),
                encode_slot(ctx.seq, TX_COMMITTED, MECH_IDS[ctx.mechanism]),
                "marker", atomic=True)))
            for dev in sorted(ctx.devices | {home}):
                entries, _ = scan_entries(self.mems[dev].read_persisted, layout,
                                          t, ctx.seq)
                for e in entries:
                    if layout.purpose is Purpose.SHADOW_PAGES and e.status == ST_ACTIVE:
                        page = e.object_id // layout.page_size
                        writes.append((dev, EntryWrite(
                            layout.pageref_addr(page), e.payload[:8], "pageref",
                            atomic=True)))
                    if e.status != ST_INVALID:
                        writes.append((dev, tombstone_write(e, ctx.seq, None)))
            writes.sort(key=lambda item: _RESET_ORDER.get(item[1].kind, 3))
            for dev, w in writes:
                if w.kind == "pageref":
                    self._pre_switch(NdpRequest(RequestKind.COMMIT, op.pool, t,
                                                0, 0, 0, device=dev), layout, w)
                self._cpu_persist(t, dev, w.addr, w.data, pool=op.pool,
                                  tag=w.kind, atomic=True)
            ctx.open = False
            yield ("delay", self.cost.pm_access_latency_ns
                   + len(writes) * self.cost.cpu_store_ns)
        else:  # pragma: no cover
            raise WorkloadFault(f"inline execution of {op!r} unsupported")

    # ------------------------------------------------------------------
    # observation

    def data_image(self, pool: int) -> bytes:
        """Logical data view: pages resolved through the reference table."""
        return logical_data_image(
            [m.image for m in self.mems], self.layouts[pool],
            self.cfg.granularity)

    def images(self) -> list[bytes]:
        return [m.snapshot_image() for m in self.mems]

    def persistence_domain_bytes(self, device: int) -> int:
        dev = self.devs[device]
        queued = len(dev.fifo) * REQUEST_BYTES
        return (queued + dev.parked_bytes + self.amap.lut_bytes()
                + INFLIGHT_REG_BYTES)


def logical_data_image(images: list[bytes | bytearray], layout: PoolLayout,
                       granularity: int) -> bytes:
    """Extract a pool's logical data bytes from raw device images."""
    out = bytearray(layout.size)
    ndev = len(images)
    for page in range(layout.n_pages):
        va = layout.base_virt + page * layout.page_size
        size = min(layout.page_size, layout.size - page * layout.page_size)
        for dev, pva, sz in split_range(va, size, granularity, ndev):
            img = images[dev]
            ref_at = layout.pageref_addr(page)
            frame = int.from_bytes(bytes(img[ref_at:ref_at + 8]), "little")
            start = frame + (pva - va)
            rel = pva - layout.base_virt
            out[rel:rel + sz] = img[start:start + sz]
    return bytes(out)
