"""Workload generators and mechanism adapters."""

import pytest

from ndpsim import program as prg
from ndpsim.device import Machine, MachineConfig, logical_data_image
from ndpsim.errors import WorkloadFault
from ndpsim.workloads import (MECHANISMS, TRANSACTION_WORKLOADS, WORKLOADS,
                              build_program, make_workload)


def test_registry_has_nine_workloads():
    assert len(WORKLOADS) == 9
    assert set(TRANSACTION_WORKLOADS) <= set(WORKLOADS)


@pytest.mark.parametrize("name", sorted(WORKLOADS))
def test_same_seed_same_stream_different_seed_differs(name):
    a = make_workload(name, seed=11, n_txns=8)
    b = make_workload(name, seed=11, n_txns=8)
    c = make_workload(name, seed=12, n_txns=8)
    key = lambda r: [(t.thread, t.pool, [(u.off, u.data) for u in t.updates])
                     for t in r.txns]  # noqa: E731
    assert key(a) == key(b)
    assert key(a) != key(c)
    assert a.expected_images() == b.expected_images()


@pytest.mark.parametrize("name", sorted(WORKLOADS))
def test_machine_reaches_expected_image(name):
    run = make_workload(name, seed=5, n_txns=10)
    exp = run.expected_images()
    m = Machine(build_program(run, "logging"), MachineConfig.multi_device())
    m.run()
    for pool, layout in m.layouts.items():
        assert logical_data_image(m.images(), layout,
                                  m.cfg.granularity) == exp[pool]


def test_adapters_emit_mechanism_specific_ops():
    run = make_workload("hashmap", seed=1, n_txns=2)
    kinds = {
        "logging": prg.UndoLog,
        "redo-logging": prg.RedoWrite,
        "checkpointing": prg.CkptTouch,
        "shadow-paging": prg.ShadowTouch,
    }
    for mech in MECHANISMS:
        ops = build_program(run, mech).threads[0]
        assert any(isinstance(op, kinds[mech]) for op in ops)
        assert sum(isinstance(op, prg.Commit) for op in ops) == 2


def test_thread_write_ranges_are_disjoint():
    for name in ("memcached", "redis"):
        run = make_workload(name, seed=9, n_txns=40)
        spans = {}
        for t in run.txns:
            for u in t.updates:
                spans.setdefault((t.thread, u.pool), []).append(
                    (u.off, u.off + len(u.data)))
        for (ta, pa), sa in spans.items():
            for (tb, pb), sb in spans.items():
                if ta >= tb or pa != pb:
                    continue
                for lo, hi in sa:
                    assert not any(lo < h and l < hi for l, h in sb), \
                        (name, ta, tb)


def test_tatp_offloads_single_small_update():
    run = make_workload("tatp", seed=3, n_txns=6)
    assert all(len(t.updates) == 1 and len(t.updates[0].data) == 32
               for t in run.txns)


def test_unknown_names_rejected():
    with pytest.raises(WorkloadFault):
        make_workload("quantum-ledger", seed=1)
    with pytest.raises(WorkloadFault):
        build_program(make_workload("tatp", 1, 1), "wishful-thinking")


def test_updates_never_straddle_pages():
    for name in sorted(WORKLOADS):
        run = make_workload(name, seed=2, n_txns=12)
        for t in run.txns:
            for u in t.updates:
                assert u.off // 4096 == (u.off + len(u.data) - 1) // 4096, name
