"""Ordering-invariant checker over execution traces.

The checker rebuilds the guaranteed happens-before relation from the
trace alone — per-actor program order, command submission/completion
edges (SyncBegin before every event of that command, every event of a
command before its SyncComplete), recorded conflict-stall edges, and
sync-before-reset edges — then verifies four partitioned persist
ordering invariants:

1. CPU and device accesses to overlapping shared addresses are ordered
   by happens-before whenever at least one of them writes memory.
2. A CPU thread's persists to shared addresses reach the persistence
   domain in program order (device-managed addresses are exempt: a
   device-managed persist may overtake an unrelated CPU persist).
3. Every persist belonging to a duplicated command precedes that
   command's synchronization point, and every recovery-data reset
   gated on it follows it.
4. Failure-recovery reads only consume data that persisted before the
   crash: each recovery read's reads-from edge names a persist event
   that precedes the crash event.

Violations are reported, never raised; a malformed trace raises
:class:`~ndpsim.errors.CheckerFault` instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import CheckerFault
from .trace import Trace, TraceEvent


@dataclass
class Violation:
    invariant: int
    events: tuple[int, ...]
    detail: str

    def __str__(self):
        ids = ",".join(map(str, self.events))
        return f"invariant {self.invariant} violated at events [{ids}]: {self.detail}"


@dataclass
class CheckResult:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self):
        if self.ok:
            return "PASS: all ordering invariants hold"
        return "\n".join(str(v) for v in self.violations)


def _happens_before(events: list[TraceEvent]) -> list[int]:
    """Reachability bitmask per event: bit j set iff event j+1 hb event i."""
    n = len(events)
    index = {ev.id: k for k, ev in enumerate(events)}
    preds: list[set[int]] = [set() for _ in range(n)]

    last_by_actor: dict[str, int] = {}
    sync_begin: dict[int, int] = {}
    sync_complete: dict[int, int] = {}
    for k, ev in enumerate(events):
        if ev.actor in last_by_actor:
            preds[k].add(last_by_actor[ev.actor])
        last_by_actor[ev.actor] = k
        for sid in ev.stall:
            if sid in index:
                preds[k].add(index[sid])
        if ev.kind == "SyncBegin" and ev.cmd is not None:
            sync_begin[ev.cmd] = k
        if ev.kind == "SyncComplete" and ev.cmd is not None:
            sync_complete[ev.cmd] = k

    for k, ev in enumerate(events):
        if ev.kind in ("SyncBegin", "SyncComplete"):
            continue
        if ev.cmd is not None:
            if ev.cmd in sync_begin:
                preds[k].add(sync_begin[ev.cmd])
            if ev.cmd in sync_complete:
                preds[sync_complete[ev.cmd]].add(k)
        if ev.sync is not None and ev.sync in sync_complete:
            preds[k].add(sync_complete[ev.sync])

    # Events appear in emission order, so in well-formed traces every
    # edge points backward in the list and one forward pass suffices.
    # A forward edge can only appear in a broken trace (e.g. a command
    # event after its own synchronization point); dropping it makes the
    # derived relation smaller, never larger, so no violation is masked.
    reach = [0] * n
    for k in range(n):
        mask = 0
        for p in preds[k]:
            if p < k:
                mask |= reach[p] | (1 << p)
        reach[k] = mask
    return reach


def check_trace(trace: Trace) -> CheckResult:
    trace.validate()
    events = list(trace.events)
    index = {ev.id: k for k, ev in enumerate(events)}
    reach = _happens_before(events)
    res = CheckResult()

    def ordered(a: int, b: int) -> bool:
        return bool(reach[b] >> a & 1) or bool(reach[a] >> b & 1)

    # -- invariant 1: shared-address CPU/device accesses are ordered ----
    cpu_acc = [k for k, ev in enumerate(events)
               if ev.is_cpu and ev.shared and ev.kind in ("Read", "Persist")]
    ndp_acc = [k for k, ev in enumerate(events)
               if ev.actor.startswith("ndp") and ev.shared
               and ev.kind in ("Read", "Persist")]
    for a in cpu_acc:
        for b in ndp_acc:
            ea, eb = events[a], events[b]
            if ea.kind == "Read" and eb.kind == "Read":
                continue
            if not ea.overlaps(eb):
                continue
            if not ordered(a, b):
                res.violations.append(Violation(
                    1, (ea.id, eb.id),
                    f"unordered conflicting accesses {ea.actor}/{eb.actor} "
                    f"on [{max(ea.lo, eb.lo):#x}, {min(ea.hi, eb.hi):#x})"))

    # -- invariant 2: CPU persist order follows program order -----------
    last_shared: dict[str, TraceEvent] = {}
    for ev in events:
        if not (ev.is_cpu and ev.kind == "Persist" and ev.shared):
            continue
        prev = last_shared.get(ev.actor)
        if prev is not None and ev.persist_stamp < prev.persist_stamp:
            res.violations.append(Violation(
                2, (prev.id, ev.id),
                f"{ev.actor} persisted stamp {ev.persist_stamp} after "
                f"stamp {prev.persist_stamp} against program order"))
        last_shared[ev.actor] = ev

    # -- invariant 3: duplicated-command persists bracket the sync ------
    sync_stamp = {ev.cmd: ev.persist_stamp for ev in events
                  if ev.kind == "SyncComplete" and ev.cmd is not None}
    for ev in events:
        if ev.kind != "Persist":
            continue
        if ev.cmd is not None and ev.actor.startswith("ndp"):
            s = sync_stamp.get(ev.cmd)
            if s is None:
                res.violations.append(Violation(
                    3, (ev.id,),
                    f"command {ev.cmd} persisted without a synchronization point"))
            elif ev.persist_stamp > s:
                res.violations.append(Violation(
                    3, (ev.id,),
                    f"command {ev.cmd} persist (stamp {ev.persist_stamp}) "
                    f"after its synchronization point (stamp {s})"))
        if ev.sync is not None:
            s = sync_stamp.get(ev.sync)
            if s is None:
                res.violations.append(Violation(
                    3, (ev.id,),
                    f"recovery-data reset gated on command {ev.sync} "
                    f"without a synchronization point"))
            elif ev.persist_stamp < s:
                res.violations.append(Violation(
                    3, (ev.id,),
                    f"recovery-data reset (stamp {ev.persist_stamp}) before "
                    f"the synchronization point of command {ev.sync} (stamp {s})"))

    # -- invariant 4: recovery reads only pre-crash persists ------------
    crash_idx = next((k for k, ev in enumerate(events) if ev.kind == "Crash"),
                     None)
    for k, ev in enumerate(events):
        if ev.kind != "RecoveryRead":
            continue
        if crash_idx is None:
            res.violations.append(Violation(
                4, (ev.id,), "recovery read without a crash event"))
            continue
        if ev.rf is None:
            continue  # read of initial (pre-run) state
        src = index.get(ev.rf)
        if src is None or events[src].kind != "Persist" or src > crash_idx:
            res.violations.append(Violation(
                4, (ev.id,),
                f"recovery read sources event {ev.rf}, which is not a "
                f"pre-crash persist"))
    return res


def check_file(path: str) -> CheckResult:
    return check_trace(Trace.load(path))
