"""Trace event format and well-formedness validation."""

import pytest

from ndpsim.errors import CheckerFault
from ndpsim.trace import Trace, TraceEvent


def sample_trace():
    tr = Trace()
    tr.emit("cpu0", "Write", 0x40, 0x48, shared=True)
    tr.emit("cpu0", "Persist", 0x40, 0x48, persist_stamp=1, shared=True,
            stall=(1,), tag="data")
    tr.emit("ndp0.0", "Persist", 0x80, 0x88, persist_stamp=2, shared=False,
            cmd=1, tag="log")
    tr.emit("sync", "SyncComplete", 0x0, 0x1, shared=False, cmd=1,
            persist_stamp=3)
    tr.emit("sync", "Persist", 0x88, 0x90, persist_stamp=4, shared=False,
            sync=1, tag="tombstone")
    return tr


def test_emit_assigns_ids_and_program_order():
    tr = sample_trace()
    assert [ev.id for ev in tr.events] == [1, 2, 3, 4, 5]
    assert [ev.po_index for ev in tr.events if ev.actor == "cpu0"] == [1, 2]
    tr.validate()


def test_line_roundtrip():
    for ev in sample_trace().events:
        back = TraceEvent.from_line(ev.to_line())
        assert back == ev


def test_save_load_roundtrip(tmp_path):
    tr = sample_trace()
    path = str(tmp_path / "run.trace")
    tr.save(path)
    back = Trace.load(path)
    assert back.events == tr.events


def test_validate_rejects_persist_without_stamp():
    tr = Trace()
    tr.events.append(TraceEvent(1, "cpu0", "Persist", 0, 8, 1))
    with pytest.raises(CheckerFault):
        tr.validate()


def test_validate_rejects_stamp_on_plain_access():
    tr = Trace()
    tr.events.append(TraceEvent(1, "cpu0", "Read", 0, 8, 1, persist_stamp=4))
    with pytest.raises(CheckerFault):
        tr.validate()


def test_validate_rejects_nonincreasing_program_order():
    tr = Trace()
    tr.events.append(TraceEvent(1, "cpu0", "Write", 0, 8, 2))
    tr.events.append(TraceEvent(2, "cpu0", "Write", 0, 8, 2))
    with pytest.raises(CheckerFault):
        tr.validate()


def test_unknown_kind_rejected():
    with pytest.raises(CheckerFault):
        Trace().emit("cpu0", "Telepathy", 0, 1)


def test_malformed_line_rejected():
    with pytest.raises(CheckerFault):
        TraceEvent.from_line("id=1 actor=cpu0")
