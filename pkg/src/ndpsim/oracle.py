"""Exhaustive crash-point oracle.

A crash state is any dependency-closed subset (order ideal) of the
persist log: a persist can be missing only if nothing that is present
was guaranteed to come after it.  The oracle runs a program once with
chunked persists, enumerates every ideal of the recorded dependency
DAG by depth-first include/exclude over stamp order (each ideal visited
exactly once), rebuilds the surviving images, runs full two-phase
recovery against the persistence-domain contents implied by the cut,
and classifies the recovered logical data of every pool against an
independently computed reference: the initial state with some prefix of
each thread's transactions applied.

A crash point is `PreState` or `PostState` when recovery lands exactly
on such a reference state (post when every started transaction landed
new-side), and `Inconsistent` otherwise.  The oracle never consults the
ordering checker, so the two can cross-validate each other.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .device import Machine, MachineConfig, logical_data_image
from .errors import ConfigError
from . import program as prg
from .recovery import recover
from .trace import Trace

PRE = "PreState"
POST = "PostState"
INCONSISTENT = "Inconsistent"


@dataclass
class TxnSpec:
    pool: int
    thread: int
    seq: int
    writes: dict[int, bytes] = field(default_factory=dict)  # pool offset -> data

    def merge(self, off: int, data: bytes):
        self.writes[off] = bytes(data)


def extract_txns(program: prg.Program) -> dict[tuple[int, int], list[TxnSpec]]:
    """Per-(pool, thread) transaction write-sets, in program order."""
    out: dict[tuple[int, int], list[TxnSpec]] = {}
    for t, ops in program.threads.items():
        open_tx: dict[int, TxnSpec] = {}
        for op in ops:
            if isinstance(op, prg.TxBegin):
                lst = out.setdefault((op.pool, t), [])
                tx = TxnSpec(op.pool, t, len(lst) + 1)
                lst.append(tx)
                open_tx[op.pool] = tx
            elif isinstance(op, (prg.WriteData, prg.RedoWrite)):
                tx = open_tx.get(op.pool)
                if tx is not None:
                    tx.merge(op.off, op.data)
    return out


def initial_pool_data(program: prg.Program) -> dict[int, bytearray]:
    init = {pool: bytearray(spec["size"])
            for pool, spec in program.pools.items()}
    for pool, off, data in program.setup:
        init[pool][off:off + len(data)] = data
    return init


@dataclass
class CrashClass:
    label: str
    ideal_size: int
    matched: dict | None = None


@dataclass
class OracleReport:
    total: int = 0
    pre: int = 0
    post: int = 0
    inconsistent: int = 0
    first_bad: list[int] | None = None     # stamps of one inconsistent ideal

    @property
    def all_consistent(self) -> bool:
        return self.inconsistent == 0

    def count(self, label: str):
        self.total += 1
        if label == PRE:
            self.pre += 1
        elif label == POST:
            self.post += 1
        else:
            self.inconsistent += 1

    def __str__(self):
        return (f"{self.total} crash points: {self.pre} {PRE}, "
                f"{self.post} {POST}, {self.inconsistent} {INCONSISTENT}")


class CrashOracle:
    """Runs a program once, then classifies every reachable crash state."""

    def __init__(self, program: prg.Program, config: MachineConfig | None = None,
                 max_cuts: int = 2_000_000):
        cfg = config or MachineConfig()
        if not cfg.oracle_mode:
            raise ConfigError("the oracle needs a machine with oracle_mode set")
        self.program = program
        self.machine = Machine(program, cfg)
        self.initial_images = [bytearray(img) for img in self.machine.images()]
        self.machine.run()
        self.max_cuts = max_cuts
        self.txns = extract_txns(program)
        self._build_candidates()

    # -- reference states ------------------------------------------------

    def _build_candidates(self):
        init = initial_pool_data(self.program)
        keys = sorted(self.txns)
        ranges = [range(len(self.txns[k]) + 1) for k in keys]
        self.candidates: list[tuple[dict, dict[int, bytes]]] = []
        for combo in itertools.product(*ranges):
            prefix = dict(zip(keys, combo))
            imgs = {pool: bytearray(b) for pool, b in init.items()}
            for k, n in prefix.items():
                for tx in self.txns[k][:n]:
                    for off, data in tx.writes.items():
                        imgs[tx.pool][off:off + len(data)] = data
            self.candidates.append((prefix, {p: bytes(b) for p, b in imgs.items()}))

    # -- enumeration -------------------------------------------------------

    def classify_ideal(self, included: list[bool],
                       images: list[bytearray] | None = None) -> CrashClass:
        m = self.machine
        records = m.plog.records
        if images is None:
            images = [bytearray(img) for img in self.initial_images]
            for i, rec in enumerate(records):
                if included[i] and rec.data and not rec.is_meta:
                    images[rec.device][rec.addr:rec.addr + len(rec.data)] = rec.data
        else:
            images = [bytearray(img) for img in images]
        live = [r for r in m.submitted
                if included[r.fifo_stamp - 1]
                and not included[getattr(r, "_bit_stamp", len(records) + 1) - 1]]
        recover(images, m.layouts, m.cfg.granularity, live)
        views = {pool: logical_data_image(images, layout, m.cfg.granularity)
                 for pool, layout in m.layouts.items()}
        started = {k: sum(1 for tx in txs
                          if included[m.tx_begins.get((k[0], k[1], tx.seq), 0) - 1]
                          and (k[0], k[1], tx.seq) in m.tx_begins)
                   for k, txs in self.txns.items()}
        matches = [prefix for prefix, ref in self.candidates
                   if all(views[p] == ref[p] for p in views)]
        size = sum(included)
        if not matches:
            return CrashClass(INCONSISTENT, size)
        if any(prefix == started for prefix in matches):
            return CrashClass(POST, size, started)
        return CrashClass(PRE, size, matches[0])

    def enumerate(self) -> OracleReport:
        records = self.machine.plog.records
        n = len(records)
        deps = [tuple(r.deps) for r in records]
        included = [False] * n
        # crash image maintained incrementally: include applies the
        # record's bytes, backtracking restores what they overwrote
        images = [bytearray(img) for img in self.initial_images]
        report = OracleReport()

        def visit(i: int):
            if report.total >= self.max_cuts:
                raise ConfigError(
                    f"crash-point enumeration exceeded {self.max_cuts} cuts")
            if i == n:
                c = self.classify_ideal(included, images)
                report.count(c.label)
                if c.label == INCONSISTENT and report.first_bad is None:
                    report.first_bad = [k + 1 for k, inc in enumerate(included)
                                        if inc]
                return
            visit(i + 1)  # exclude record i
            if all(included[d - 1] for d in deps[i]):
                rec = records[i]
                saved = None
                if rec.data and not rec.is_meta:
                    img = images[rec.device]
                    saved = bytes(img[rec.addr:rec.addr + len(rec.data)])
                    img[rec.addr:rec.addr + len(rec.data)] = rec.data
                included[i] = True
                visit(i + 1)
                included[i] = False
                if saved is not None:
                    images[rec.device][rec.addr:rec.addr + len(rec.data)] = saved

        import sys
        old = sys.getrecursionlimit()
        sys.setrecursionlimit(max(old, n + 100))
        try:
            visit(0)
        finally:
            sys.setrecursionlimit(old)
        return report

    # -- recovery trace for one cut (for invariant-4 checking) ------------

    def recovery_trace(self, included: list[bool]) -> Trace:
        m = self.machine
        records = m.plog.records
        images = [bytearray(img) for img in self.initial_images]
        for i, rec in enumerate(records):
            if included[i] and rec.data and not rec.is_meta:
                images[rec.device][rec.addr:rec.addr + len(rec.data)] = rec.data
        live = [r for r in m.submitted
                if included[r.fifo_stamp - 1]
                and not included[getattr(r, "_bit_stamp", len(records) + 1) - 1]]
        reads: list[tuple[int, int, int]] = []
        recover(images, m.layouts, m.cfg.granularity, live, reads)

        trace = Trace(list(m.trace.events))
        trace._po = dict(m.trace._po)
        trace.emit("cpu0", "Crash", 0, 1, shared=False)
        for dev, addr, nbytes in reads:
            rf = None
            for i in range(len(records) - 1, -1, -1):
                rec = records[i]
                if (included[i] and rec.data and not rec.is_meta
                        and rec.device == dev
                        and rec.addr < addr + nbytes
                        and addr < rec.addr + len(rec.data)):
                    rf = m.stamp_event.get(rec.stamp)
                    break
            glo = dev * m.capacity + addr
            trace.emit("recovery", "RecoveryRead", glo, glo + nbytes,
                       shared=False, rf=rf)
        return trace


def run_oracle(program: prg.Program, config: MachineConfig | None = None,
               **kw) -> OracleReport:
    cfg = config or MachineConfig(oracle_mode=True)
    return CrashOracle(program, cfg, **kw).enumerate()
