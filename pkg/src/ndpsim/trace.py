"""Execution trace events and the on-disk event-log format.

One event per line, self-describing `key=value` tokens in fixed field
order (id, actor, kind, range, po_index, persist_stamp, shared),
followed by optional context fields (cmd, stall, sync, tag, rf) that let
the checker rebuild dispatch, conflict-stall, and synchronization edges.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import CheckerFault

KINDS = ("Read", "Write", "Persist", "SyncBegin", "SyncComplete", "Crash", "RecoveryRead")


@dataclass
class TraceEvent:
    id: int
    actor: str                    # cpu<t> | ndp<d>.<u> | ndp<d>
    kind: str
    lo: int                       # system-wide physical range [lo, hi)
    hi: int
    po_index: int
    persist_stamp: int | None = None
    shared: bool = True           # CPU-shared address vs NDP-managed
    cmd: int | None = None        # command id (SyncBegin/Complete, NDP events)
    stall: tuple[int, ...] = ()   # event ids this access was stalled behind
    sync: int | None = None       # for resets: the command whose sync gates them
    tag: str = ""                 # data|log|header|marker|tombstone|pageref
    rf: int | None = None         # RecoveryRead: event id of the write read from

    @property
    def is_cpu(self) -> bool:
        return self.actor.startswith("cpu")

    def overlaps(self, other: "TraceEvent") -> bool:
        return self.lo < other.hi and other.lo < self.hi

    def to_line(self) -> str:
        def opt(v):
            return "-" if v in (None, "", ()) else v
        parts = [
            f"id={self.id}",
            f"actor={self.actor}",
            f"kind={self.kind}",
            f"range={self.lo:#x}+{self.hi - self.lo}",
            f"po={self.po_index}",
            f"stamp={opt(self.persist_stamp)}",
            f"shared={int(self.shared)}",
            f"cmd={opt(self.cmd)}",
            f"stall={','.join(map(str, self.stall)) if self.stall else '-'}",
            f"sync={opt(self.sync)}",
            f"tag={opt(self.tag)}",
            f"rf={opt(self.rf)}",
        ]
        return " ".join(parts)

    @classmethod
    def from_line(cls, line: str) -> "TraceEvent":
        try:
            kv = dict(tok.split("=", 1) for tok in line.split())
            lo_s, size_s = kv["range"].split("+")
            lo = int(lo_s, 16)

            def opt_int(s):
                return None if s == "-" else int(s)

            return cls(
                id=int(kv["id"]),
                actor=kv["actor"],
                kind=kv["kind"],
                lo=lo,
                hi=lo + int(size_s),
                po_index=int(kv["po"]),
                persist_stamp=opt_int(kv["stamp"]),
                shared=bool(int(kv["shared"])),
                cmd=opt_int(kv.get("cmd", "-")),
                stall=tuple(int(x) for x in kv.get("stall", "-").split(",")) if kv.get("stall", "-") != "-" else (),
                sync=opt_int(kv.get("sync", "-")),
                tag="" if kv.get("tag", "-") == "-" else kv["tag"],
                rf=opt_int(kv.get("rf", "-")),
            )
        except (KeyError, ValueError) as e:
            raise CheckerFault(f"malformed trace line: {line!r} ({e})") from e


class Trace:
    """Ordered list of trace events emitted by one run."""

    def __init__(self, events: list[TraceEvent] | None = None):
        self.events: list[TraceEvent] = events or []
        self._po: dict[str, int] = {}

    def next_po(self, actor: str) -> int:
        self._po[actor] = self._po.get(actor, 0) + 1
        return self._po[actor]

    def emit(self, actor: str, kind: str, lo: int, hi: int, **kw) -> TraceEvent:
        if kind not in KINDS:
            raise CheckerFault(f"unknown event kind {kind}")
        ev = TraceEvent(len(self.events) + 1, actor, kind, lo, hi,
                        self.next_po(actor), **kw)
        self.events.append(ev)
        return ev

    def validate(self):
        """Well-formedness: po strictly increases per actor, stamp iff Persist-like."""
        seen: dict[str, int] = {}
        for ev in self.events:
            last = seen.get(ev.actor, 0)
            if ev.po_index <= last:
                raise CheckerFault(
                    f"event {ev.id}: po_index {ev.po_index} not increasing for {ev.actor}")
            seen[ev.actor] = ev.po_index
            if ev.kind == "Persist" and ev.persist_stamp is None:
                raise CheckerFault(f"event {ev.id}: Persist without stamp")
            if ev.kind in ("Read", "Write") and ev.persist_stamp is not None:
                raise CheckerFault(f"event {ev.id}: stamp on non-persist event")

    def save(self, path: str):
        with open(path, "w") as f:
            for ev in self.events:
                f.write(ev.to_line() + "\n")

    @classmethod
    def load(cls, path: str) -> "Trace":
        with open(path) as f:
            events = [TraceEvent.from_line(line) for line in f if line.strip()]
        return cls(events)

    def __iter__(self):
        return iter(self.events)

    def __len__(self):
        return len(self.events)
