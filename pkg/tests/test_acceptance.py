"""Acceptance gate: the eight top-level correctness and trend criteria.

Each test prints a single machine-readable pass/fail line.  Criteria:

(a) exhaustive crash-point classification of the scenario corpus
(b) checker/oracle verdict agreement, including broken variants
(c) no recovery-data reset before its sync point on 1,000 seeded runs
(d) copy-size sweep: monotone, calibrated endpoints within 30%
(e) configuration speedup ordering; subscriber-update mix profits least
(f) byte-identical data images across configurations and mechanisms
(g) recovery applied twice is byte-identical on the full corpus
(h) 10,000 randomized translations: injective, in-bounds, stable,
    full coverage at 256 B / 4 kB / 64 kB granularities
"""

import random
import time

from ndpsim.checker import check_trace
from ndpsim.device import CONFIG_BUILDERS, Machine, MachineConfig, logical_data_image
from ndpsim.harness import copy_sweep, ordering_violations, run_experiment, ExperimentPlan
from ndpsim.oracle import CrashOracle
from ndpsim.recovery import recover
from ndpsim.scenarios import corpus
from ndpsim.translate import AddressMap, device_of, split_range
from ndpsim.workloads import WORKLOADS, build_program, make_workload

REGION_MECHS = ["logging", "checkpointing", "shadow-paging"]


def _verdict(name, ok):
    print(f"\nACCEPTANCE {name}: {'PASS' if ok else 'FAIL'}")
    assert ok, f"acceptance criterion {name} failed"


def test_a_oracle_exhaustion():
    started = time.time()
    correct = [s for s in corpus() if s.expect_consistent]
    assert len(correct) >= 12
    total = bad = 0
    for sc in correct:
        report = CrashOracle(sc.program(), sc.config()).enumerate()
        total += report.total
        bad += report.inconsistent
    elapsed = time.time() - started
    ok = bad == 0 and total > 0 and elapsed < 300
    print(f"\n  {len(correct)} scenarios, {total} crash points, "
          f"{bad} inconsistent, {elapsed:.1f}s")
    _verdict("a-oracle-exhaustion", ok)


def test_b_checker_oracle_equivalence():
    false_pos = false_neg = 0
    for sc in corpus():
        oracle = CrashOracle(sc.program(), sc.config())
        recoverable = oracle.enumerate().all_consistent
        checker_ok = check_trace(oracle.machine.trace).ok
        if checker_ok and not recoverable:
            false_neg += 1
        if not checker_ok and recoverable:
            false_pos += 1
    print(f"\n  {len(corpus())} scenarios (6 broken), "
          f"{false_pos} false positives, {false_neg} false negatives")
    _verdict("b-checker-oracle-equivalence", false_pos == 0 and false_neg == 0)


def test_c_no_reset_before_sync_on_seeded_runs():
    names = sorted(WORKLOADS)
    checked = violations = 0
    for seed in range(1000):
        run = make_workload(names[seed % len(names)], seed=seed, n_txns=2)
        m = Machine(build_program(run, REGION_MECHS[seed % 3]),
                    MachineConfig.multi_device())
        m.run()
        for rec in m.plog:
            if rec.reset_for is None:
                continue
            checked += 1
            sync_stamp = m._sync_stamp.get(rec.reset_for)
            if sync_stamp is None or rec.stamp < sync_stamp:
                violations += 1
    print(f"\n  1000 runs, {checked} gated resets, {violations} early")
    _verdict("c-reset-after-sync", checked > 0 and violations == 0)


def test_d_copy_sweep_trend():
    points = copy_sweep()  # one documented calibration at 16 kB
    ratios = [p.speedup for p in points]
    monotone = all(a < b for a, b in zip(ratios, ratios[1:]))
    lo_ok = abs(ratios[0] - 1.13) <= 0.30 * 1.13
    hi_ok = abs(ratios[-1] - 5.57) <= 0.30 * 5.57
    print(f"\n  64B: {ratios[0]:.3f} (target 1.13 +-30%), "
          f"16kB: {ratios[-1]:.3f} (target 5.57 +-30%), monotone={monotone}")
    _verdict("d-copy-sweep-trend", monotone and lo_ok and hi_ok)


def test_e_configuration_ordering():
    plan = ExperimentPlan(mechanisms=REGION_MECHS, seeds=[1, 2], n_txns=12)
    rows = run_experiment(plan)
    problems = ordering_violations(rows)
    for p in problems:
        print(f"\n  {p}")
    print(f"\n  {len(rows)} cells, {len(problems)} ordering problems")
    _verdict("e-configuration-ordering", not problems)


def test_f_equivalence_suite():
    mismatches = runs = 0
    for name in sorted(WORKLOADS):
        for seed in range(30):
            run = make_workload(name, seed=seed, n_txns=6)
            expected = run.expected_images()
            for mech in REGION_MECHS:
                for builder in CONFIG_BUILDERS.values():
                    m = Machine(build_program(run, mech), builder())
                    m.run()
                    runs += 1
                    for pool, layout in m.layouts.items():
                        got = logical_data_image(m.images(), layout,
                                                 m.cfg.granularity)
                        if got != expected[pool]:
                            mismatches += 1
    print(f"\n  9 workloads x 30 seeds x 3 mechanisms x 4 configs = "
          f"{runs} runs, {mismatches} image mismatches")
    _verdict("f-image-equivalence", runs == 9 * 30 * 3 * 4 and mismatches == 0)


def test_g_recovery_determinism():
    diffs = cuts = 0
    for sc in corpus():
        if not sc.expect_consistent:
            continue
        oracle = CrashOracle(sc.program(), sc.config())
        m = oracle.machine
        records = m.plog.records
        n = len(records)
        for cut in range(0, n + 1, max(1, n // 10)):
            included = [i < cut for i in range(n)]
            images = [bytearray(img) for img in oracle.initial_images]
            for i, rec in enumerate(records):
                if included[i] and rec.data and not rec.is_meta:
                    images[rec.device][rec.addr:rec.addr + len(rec.data)] = rec.data
            live = [r for r in m.submitted
                    if included[r.fifo_stamp - 1]
                    and not included[getattr(r, "_bit_stamp", n + 1) - 1]]
            one = recover([bytearray(i) for i in images], m.layouts,
                          m.cfg.granularity, live)
            two = recover([bytearray(i) for i in images], m.layouts,
                          m.cfg.granularity, live)
            cuts += 1
            if [bytes(a) for a in one] != [bytes(b) for b in two]:
                diffs += 1
    print(f"\n  {cuts} crash cuts recovered twice, {diffs} divergences")
    _verdict("g-recovery-determinism", cuts > 0 and diffs == 0)


def test_h_translation_properties():
    failures = 0
    for gran in (256, 4096, 65536):
        amap = AddressMap(device_count=4, capacity=1 << 24, granularity=gran)
        pools = [(0, 0, 1 << 20), (1, 1 << 20, 1 << 20), (2, 3 << 20, 1 << 19)]
        for pool, base, size in pools:
            amap.register_pool(pool, base, base, size)
        rng = random.Random(gran)
        by_addr: dict[int, tuple[int, int]] = {}
        for _ in range(10_000):
            pool, base, size = pools[rng.randrange(len(pools))]
            vaddr = base + rng.randrange(size)
            g = amap.translate(pool, rng.randrange(8), vaddr)
            dev, local = divmod(g, amap.capacity)
            if not (0 <= dev < 4 and 0 <= local < amap.capacity):
                failures += 1
            if amap.translate(pool, 999, vaddr) != g:   # context switch
                failures += 1
            if by_addr.setdefault(g, (pool, vaddr)) != (pool, vaddr):
                failures += 1  # two sources collided on one physical byte
        # device_of covers every byte exactly once
        span = 5 * gran + 123
        covered = []
        for dev, va, sz in split_range(0, span, gran, 4):
            if device_of(va, gran, 4) != dev:
                failures += 1
            covered.extend(range(va, va + sz))
        if covered != list(range(span)):
            failures += 1
    print(f"\n  30000 translations over granularities 256B/4kB/64kB, "
          f"{failures} property failures")
    _verdict("h-translation-properties", failures == 0)
