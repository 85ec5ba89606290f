"""Ordering-invariant checker on hand-built traces."""

from ndpsim.checker import check_trace
from ndpsim.trace import Trace


def test_clean_offload_trace_passes():
    tr = Trace()
    tr.emit("cpu0", "Write", 0x100, 0x110)
    tr.emit("cpu0", "SyncBegin", 0, 1, shared=False, cmd=1)
    ndp = tr.emit("ndp0.0", "Persist", 0x100, 0x110, persist_stamp=1,
                  cmd=1, tag="log")
    tr.emit("ndp0.0", "Persist", 0x0, 0x20, persist_stamp=2, shared=False,
            cmd=1, tag="status")
    tr.emit("sync", "SyncComplete", 0, 1, shared=False, cmd=1, persist_stamp=3)
    # CPU flush stalled behind the conflicting device persist
    tr.emit("cpu0", "Persist", 0x100, 0x110, persist_stamp=4,
            stall=(ndp.id,), tag="data")
    tr.emit("sync", "Persist", 0x40, 0x48, persist_stamp=5, shared=False,
            sync=1, tag="tombstone")
    res = check_trace(tr)
    assert res.ok, str(res)


def test_invariant1_unordered_conflicting_accesses():
    tr = Trace()
    tr.emit("cpu0", "Persist", 0x100, 0x110, persist_stamp=1, tag="data")
    tr.emit("ndp0.0", "Persist", 0x108, 0x118, persist_stamp=2, tag="log")
    res = check_trace(tr)
    assert [v.invariant for v in res.violations].count(1) == 1


def test_invariant1_allows_read_read_and_disjoint():
    tr = Trace()
    tr.emit("cpu0", "Read", 0x100, 0x110)
    tr.emit("ndp0.0", "Read", 0x100, 0x110)
    tr.emit("ndp0.0", "Persist", 0x200, 0x210, persist_stamp=1, tag="log")
    assert check_trace(tr).ok


def test_invariant1_exempts_device_managed_addresses():
    tr = Trace()
    tr.emit("cpu0", "Persist", 0x100, 0x110, persist_stamp=1, tag="data")
    tr.emit("ndp0.0", "Persist", 0x100, 0x110, persist_stamp=2, shared=False,
            tag="log")
    assert check_trace(tr).ok


def test_invariant2_cpu_persist_program_order():
    tr = Trace()
    tr.emit("cpu0", "Persist", 0x0, 0x8, persist_stamp=5, tag="data")
    tr.emit("cpu0", "Persist", 0x8, 0x10, persist_stamp=2, tag="data")
    res = check_trace(tr)
    assert [v.invariant for v in res.violations] == [2]


def test_invariant2_ignores_device_managed_persists():
    tr = Trace()
    tr.emit("cpu0", "Persist", 0x0, 0x8, persist_stamp=5, tag="data")
    tr.emit("cpu0", "Persist", 0x8, 0x10, persist_stamp=2, shared=False,
            tag="log")
    assert check_trace(tr).ok


def test_invariant3_command_persist_after_sync_point():
    tr = Trace()
    tr.emit("cpu0", "SyncBegin", 0, 1, shared=False, cmd=1)
    tr.emit("sync", "SyncComplete", 0, 1, shared=False, cmd=1, persist_stamp=1)
    tr.emit("ndp1.0", "Persist", 0x40, 0x48, shared=False, persist_stamp=2,
            cmd=1, tag="log")
    res = check_trace(tr)
    assert any(v.invariant == 3 for v in res.violations)


def test_invariant3_missing_sync_point():
    tr = Trace()
    tr.emit("ndp0.0", "Persist", 0x40, 0x48, shared=False, persist_stamp=1,
            cmd=7, tag="log")
    res = check_trace(tr)
    assert [v.invariant for v in res.violations] == [3]


def test_invariant3_reset_before_sync_point():
    tr = Trace()
    tr.emit("cpu0", "SyncBegin", 0, 1, shared=False, cmd=1)
    tr.emit("sync", "Persist", 0x40, 0x48, shared=False, persist_stamp=1,
            sync=1, tag="tombstone")
    tr.emit("ndp0.0", "Persist", 0x80, 0x88, shared=False, persist_stamp=2,
            cmd=1, tag="log")
    tr.emit("sync", "SyncComplete", 0, 1, shared=False, cmd=1, persist_stamp=3)
    res = check_trace(tr)
    assert any(v.invariant == 3 and "reset" in v.detail
               for v in res.violations)


def test_invariant4_recovery_read_must_source_pre_crash_persist():
    tr = Trace()
    ok_src = tr.emit("ndp0.0", "Persist", 0x0, 0x8, shared=False,
                     persist_stamp=1, tag="data")
    tr.emit("cpu0", "Crash", 0, 1, shared=False)
    bad_src = tr.emit("cpu0", "Persist", 0x8, 0x10, persist_stamp=2,
                      tag="data")
    tr.emit("recovery", "RecoveryRead", 0x0, 0x8, shared=False, rf=ok_src.id)
    tr.emit("recovery", "RecoveryRead", 0x8, 0x10, shared=False,
            rf=bad_src.id)
    tr.emit("recovery", "RecoveryRead", 0x20, 0x28, shared=False)  # initial state
    res = check_trace(tr)
    assert [v.invariant for v in res.violations] == [4]


def test_invariant4_requires_crash_event():
    tr = Trace()
    tr.emit("recovery", "RecoveryRead", 0x0, 0x8, shared=False)
    res = check_trace(tr)
    assert [v.invariant for v in res.violations] == [4]
