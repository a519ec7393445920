"""End-to-end acceptance checks, one test per criterion.

Each test prints a single PASS/FAIL line with its measured error and
runtime; run with ``pytest tests/test_acceptance.py -v -s`` to see them.
"""

import itertools
import time

import numpy as np
import pytest

from lpebc.channel import JointChannelPmf, random_channel
from lpebc.errors import ZeroTail
from lpebc.fixtures import fixture
from lpebc.geometry import distance_to_region, hausdorff, is_subset
from lpebc.gf import field
from lpebc.protocol import concentration_suite, proportional_allocation, run_two_phase
from lpebc.regions import (fme_inner_region, inner_bound_region, outer_bound_region,
                           two_phase_time, xi_params)
from lpebc.reproduce import corner_checks, reproduce
from lpebc.stability import sweep_load


@pytest.fixture
def report(capsys):
    start = time.perf_counter()

    def emit(criterion, ok, detail, budget=None):
        took = time.perf_counter() - start
        within = budget is None or took < budget
        status = "PASS" if ok and within else "FAIL"
        limit = f" (limit {budget:.0f}s)" if budget else ""
        with capsys.disabled():
            print(f"\n{status}  criterion {criterion}: {detail}  [{took:.1f}s{limit}]")
        return ok and within

    return emit


def _worst(checks):
    return max(c.error for c in checks)


def test_criterion_1_two_corner_channel(report):
    checks, regions = reproduce(1, tol=1e-3)
    corners = [c for c in checks if "corner" in c.name]
    reach = distance_to_region(regions["inner"], (7 / 9, 5 / 9))
    ok = all(c.passed for c in corners) and reach <= 2e-3
    assert report(1, ok, f"corner err {_worst(corners):.1e} <= 1e-3, inner gap {reach:.1e} <= 2e-3",
                  budget=10)


def test_criterion_2_three_corner_channel(report):
    checks, regions = reproduce(2, resolution=64, tol=2e-3)
    chain = is_subset(regions["trivial"], regions["inner"]) and is_subset(regions["inner"], regions["outer"])
    ok = all(c.passed for c in checks) and chain
    assert report(2, ok, f"{len(checks)} checks, corner err {_worst(checks):.1e} <= 2e-3, "
                  f"containment {chain}", budget=60)


def test_criterion_3_optimal_channel(report):
    checks, _ = reproduce(3, tol=2e-3, xi_tol=1e-3)
    by_name = {c.name: c for c in checks}
    ok = all(c.passed for c in checks)
    gap = by_name["Hausdorff(stability, outer)"].error
    assert report(3, ok, f"xi err {by_name['xi'].error:.1e}, corner err "
                  f"{_worst([c for c in checks if 'corner' in c.name]):.1e}, "
                  f"verdict {by_name['optimality verdict'].actual}, hausdorff {gap:.1e}")


def _xi_channels(n, seed):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        ch = random_channel(rng, 2)
        s = ch.summary()
        try:
            xi_params(s)
        except ZeroTail:
            continue
        if min(s.a.min(), s.b.min()) > 1e-3:
            out.append(ch)
    return out


def test_criterion_4_fme_matches_hull_search(report):
    worst = 0.0
    for ch in _xi_channels(100, seed=2024):
        s = ch.summary()
        worst = max(worst, hausdorff(fme_inner_region(s), inner_bound_region(s)))
    assert report(4, worst <= 1e-3, f"100 channels, max hausdorff {worst:.1e} <= 1e-3")


def test_criterion_5_single_layer(report):
    rng = np.random.default_rng(55)
    t_err = region_err = 0.0
    for _ in range(50):
        ch = random_channel(rng, 1)
        p = ch.pmf
        e1, e2, e12 = p[0, :].sum(), p[:, 0].sum(), p[0, 0]
        k1, k2 = rng.integers(1, 10_000, size=2)
        closed = max(k1 / (1 - e1) + k2 / (1 - e12), k1 / (1 - e12) + k2 / (1 - e2))
        t = two_phase_time(ch.summary(), [[k1], [k2]]).t
        t_err = max(t_err, abs(t - closed) / closed)
        s = ch.summary()
        region_err = max(region_err, hausdorff(inner_bound_region(s), outer_bound_region(s)))
    ok = t_err <= 1e-9 and region_err <= 1e-9
    assert report(5, ok, f"50 channels, time rel err {t_err:.1e}, inner/outer gap {region_err:.1e}")


def test_criterion_6_concentration(report):
    ch = fixture("example2")
    rows = concentration_suite(ch, proportional_allocation(ch), [100, 1000, 10_000, 100_000],
                               replicates=50, seed=6)
    devs = [r.time_dev for r in rows]
    falling = all(a > b for a, b in zip(devs, devs[1:]))
    last = rows[-1]
    ok = falling and last.time_dev <= 0.02 and last.backlog_dev <= 0.02
    assert report(6, ok, "time dev " + " > ".join(f"{d:.4f}" for d in devs)
                  + f", backlog dev at 1e5 {last.backlog_dev:.4f} <= 0.02", budget=600)


def test_criterion_7_decodability(report):
    ch = fixture("example1")
    k = [[292, 0], [0, 208]]

    def on_time(m, runs):
        # decodable the moment the counters say every packet is delivered
        return np.mean([run_two_phase(ch, k, field(m), seed=i).overshoot == 0 for i in range(runs)])

    big = on_time(8, 1000)
    small = on_time(1, 200)
    ok = big >= 0.98 and small < big
    assert report(7, ok, f"GF(256) on-time decode {big:.3f} >= 0.98, GF(2) {small:.3f} lower")


def test_criterion_8_stability(report):
    ch = fixture("example3")
    lines = []
    ok = True
    for direction in ((2, 1), (1, 1), (1, 2)):
        for res in sweep_load(ch, direction, [0.5, 0.9, 1.2], horizon=1_000_000, seeds=range(10)):
            want_stable = res.load < 1
            agree = res.stable_fraction if want_stable else 1 - res.stable_fraction
            ok &= agree >= 0.9 and res.feasible == want_stable
            lines.append(f"{direction[0]}:{direction[1]}@{res.load}={agree:.0%}")
    assert report(8, ok, "agreement " + " ".join(lines), budget=900)


def test_criterion_9_property_suites(report):
    rng = np.random.default_rng(99)
    for i in range(1000):
        Q = int(rng.integers(1, 4))
        w = rng.random((Q + 1, Q + 1))
        ch = JointChannelPmf(w / w.sum())
        k = rng.integers(0, 8, size=(2, Q))
        a = run_two_phase(ch, k, seed=i, check_invariants=True)
        assert a.coded_received == a.overheard and len(a.ledger) == k.sum()
        if i % 50 == 0:
            b = run_two_phase(ch, k, seed=i, trace=True)
            c = run_two_phase(ch, k, seed=i, trace=True)
            assert b.trace == c.trace and b.t == a.t
    for m in range(1, 5):
        gf = field(m)
        x = np.arange(gf.order)
        A, B = np.meshgrid(x, x, indexing="ij")
        prod = gf.mul(A, B)
        assert np.array_equal(prod, prod.T)
        for a, b, c in itertools.product(x, repeat=3):
            assert gf.mul(gf.mul(a, b), c) == gf.mul(a, gf.mul(b, c))
            assert gf.mul(a, b ^ c) == gf.mul(a, b) ^ gf.mul(a, c)
        nz = x[1:]
        assert np.all(gf.mul(nz, gf.inv(nz)) == 1)
        assert all(len(set(prod[a].tolist())) == gf.order for a in nz)
    assert report(9, True, "1000 runs with per-slot counter checks, conservation, determinism, "
                  "field axioms for m <= 4")
