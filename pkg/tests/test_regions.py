import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lpebc import JointChannelPmf, fixture, random_channel, seed_stream
from lpebc.errors import UnreachableLayer, ZeroTail
from lpebc.fixtures import symmetric_channel
from lpebc.geometry import hausdorff, is_subset, region_contains
from lpebc.regions import (check_optimality, fme_inner_region, inner_bound_region, load_factor,
                           no_csit_capacity, outer_bound_region, outer_bound_support,
                           outer_bound_support_best, outer_bound_sweep, outer_bound_xi_region,
                           outer_corners_closed_form, ratio_case, split_fme_region, split_load,
                           stability_inner_region, subphase_backlog, symmetric_corner,
                           trivial_inner_region, two_phase_time, xi_params)

from strategies import channels

T3 = fixture("example1")
T4 = fixture("example2")
T5 = fixture("example3")


def random_channels(n, layers, seed):
    rng = seed_stream(seed)
    return [random_channel(rng, layers) for _ in range(n)]


def single_layer_closed_form(s, k1, k2):
    """Completion time of the one-layer protocol, written in erasure probabilities."""
    e1, e2, e12 = 1 - s.a[0], 1 - s.b[0], 1 - s.c[0]
    return max(k1 / (1 - e1) + k2 / (1 - e12), k1 / (1 - e12) + k2 / (1 - e2))


# outer bound ---------------------------------------------------------------------


def test_support_single_user_weight():
    e1 = T4.expected_layers(1)
    assert outer_bound_support(T4, (1, 0), (2, 1)) == pytest.approx(e1)
    # ordering user 1 first hands it everything user 2 receives
    assert outer_bound_support(T4, (1, 0), (1, 2)) == pytest.approx(T4.expected_max((1, 2)))
    assert outer_bound_support_best(T4, (1, 0)) == pytest.approx(e1)
    for perm in [(1, 2), (2, 1)]:
        assert outer_bound_support(T4, (0, 0), perm) == 0.0


def test_support_table3_envelope():
    # the sum-rate bound alone is loose; the corner comes from the envelope
    assert outer_bound_support_best(T3, (1, 1)) == pytest.approx(1.5)
    region = outer_bound_region(T3.summary())
    assert region.support(1, 1) == pytest.approx(7 / 9 + 5 / 9)
    corner = (7 / 9, 5 / 9)
    tight = 0
    for h in region.halfplanes:
        if h.a1 > 0 and h.a2 > 0:
            # every slanted edge is one of the weighted bounds
            assert outer_bound_support_best(T3, (h.a1, h.a2)) == pytest.approx(h.c, abs=1e-12)
            tight += abs(h.value(corner)) <= 1e-12
    assert tight == 2


@given(channels(max_layers=3), st.floats(0, 1), st.floats(0.1, 10))
def test_support_positively_homogeneous(ch, w, scale):
    base = outer_bound_support_best(ch, (w, 1 - w))
    assert outer_bound_support_best(ch, (scale * w, scale * (1 - w))) == pytest.approx(scale * base, rel=1e-12, abs=1e-15)


@given(channels(max_layers=3))
def test_outer_polygon_support_matches_bound(ch):
    region = outer_bound_region(ch.summary())
    for th in np.linspace(0, math.pi / 2, 37):
        w = (math.cos(th), math.sin(th))
        assert region.support(*w) <= outer_bound_support_best(ch, w) + 1e-9


def test_outer_table4_corners():
    region = outer_bound_region(T4.summary())
    expected = [(0, 0.9748), (0.3326, 0.7585), (0.4231, 0.6862), (0.6739, 0.3326), (0.8522, 0)]
    pts = region.boundary_corners()
    assert len(pts) == len(expected)
    for p, e in zip(pts, expected):
        assert math.dist(p, e) <= 1e-3


def test_outer_table5_corners():
    expected = [(0, 1.234), (0.302, 1.035), (0.366, 0.912), (0.836, 0)]
    pts = outer_bound_region(T5.summary()).boundary_corners()
    assert len(pts) == 4
    for p, e in zip(pts, expected):
        assert math.dist(p, e) <= 2e-3


def test_outer_single_layer_intercepts():
    ch = JointChannelPmf(np.array([[0.1, 0.2], [0.3, 0.4]]))
    region = outer_bound_region(ch.summary())
    assert region.max_r1() == pytest.approx(0.7)
    assert region.max_r2() == pytest.approx(0.6)


@pytest.mark.parametrize("layers", [1, 2, 3])
def test_outer_exact_vs_sweep(layers):
    for ch in random_channels(15, layers, 100 + layers):
        exact = outer_bound_region(ch.summary())
        sweep = outer_bound_sweep(ch, 720)
        assert is_subset(exact, sweep, tol=1e-9)
        assert hausdorff(exact, sweep) <= 2e-3


def test_xi_form_equals_polygon_form():
    for ch in random_channels(100, 2, 5):
        s = ch.summary()
        assert hausdorff(outer_bound_xi_region(s), outer_bound_region(s)) <= 1e-9


def test_closed_form_corners_lie_on_region():
    for ch in random_channels(50, 2, 6):
        s = ch.summary()
        region = outer_bound_region(s)
        nontrivial = [p for p in region.boundary_corners() if p[0] > 1e-9 and p[1] > 1e-9]
        candidates = list(outer_corners_closed_form(s).values())
        for p in nontrivial:
            assert min(math.dist(p, c) for c in candidates) <= 1e-9


def test_xi_table5():
    xi = xi_params(T5.summary()).as_tuple()
    assert np.allclose(xi, (1.940, 1.926, 0.844, 0.658), atol=1e-3)


def test_xi_table3_ordering():
    x1, x2, x3, x4 = xi_params(T3.summary()).as_tuple()
    # tails of the table: a = (0.75, 0.25), b = (0.5, 0.5), c = (0.875, 0.625)
    assert (x1, x2) == pytest.approx((2.5, 0.875 / 0.75))
    assert (x3, x4) == pytest.approx((0.8, 0.5 / 0.875))
    assert x1 >= x2 >= 1 >= x3 >= x4


def test_xi_symmetric_layers():
    # identical users: every ratio is one
    same = JointChannelPmf(np.diag([0.2, 0.3, 0.5]))
    assert xi_params(same.summary()).as_tuple() == pytest.approx((1, 1, 1, 1))
    # both layers always arrive together, so the per-layer ratios coincide
    P = np.zeros((3, 3))
    P[0, 0], P[0, 2], P[2, 0], P[2, 2] = 0.1, 0.3, 0.2, 0.4
    x1, x2, x3, x4 = xi_params(JointChannelPmf(P).summary()).as_tuple()
    assert x1 == pytest.approx(x2) and x3 == pytest.approx(x4)


def test_xi_zero_tail():
    P = np.zeros((3, 3))
    P[0, 1], P[2, 1] = 0.5, 0.5
    P = P.T  # user 1 never gets a layer above one
    P = np.zeros((3, 3))
    P[1, 0], P[1, 2] = 0.5, 0.5
    with pytest.raises(ZeroTail):
        xi_params(JointChannelPmf(P).summary())


# no-CSIT -------------------------------------------------------------------------


def test_no_csit_table3():
    pts = no_csit_capacity(T3.summary()).boundary_corners()
    assert np.allclose(pts, [(0, 1), (0.75, 0.5), (1, 0)])


def test_no_csit_degenerate_user():
    P = np.zeros((3, 3))
    P[0, 0], P[0, 1], P[0, 2] = 0.2, 0.3, 0.5
    region = no_csit_capacity(JointChannelPmf(P).summary())
    assert region.max_r1() == 0
    assert region.max_r2() == pytest.approx(1.3)


# two-phase timing ---------------------------------------------------------------


def test_single_layer_time_closed_form():
    rng = seed_stream(21)
    for ch in random_channels(50, 1, 22):
        s = ch.summary()
        k1, k2 = rng.uniform(0, 1000, 2)
        t = two_phase_time(s, [[k1], [k2]]).t
        assert abs(t - single_layer_closed_form(s, k1, k2)) <= 1e-9 * max(1.0, t)


def test_single_user_single_layer():
    s = JointChannelPmf(np.array([[0.1, 0.2], [0.3, 0.4]])).summary()
    assert two_phase_time(s, [[10.0], [0.0]]).t == pytest.approx(10 / 0.7)


def test_table3_allocation_reaches_corner():
    s = T3.summary()
    alloc = [[3.5, 0.0], [0.0, 2.5]]
    r = two_phase_time(s, alloc).rates(alloc)
    assert r[1] / r[0] == pytest.approx(2.5 / 3.5)
    assert np.allclose(r, (7 / 9, 5 / 9), atol=1e-12)


def test_unreachable_layer():
    P = np.zeros((3, 3))
    P[1, 1] = 1.0
    with pytest.raises(UnreachableLayer):
        two_phase_time(JointChannelPmf(P).summary(), [[1, 1], [0, 0]])


@given(channels(max_layers=3), st.data())
def test_time_structure(ch, data):
    Q = ch.num_layers
    k = np.array(data.draw(st.lists(st.floats(0, 100), min_size=2 * Q, max_size=2 * Q))).reshape(2, Q)
    s = ch.summary()
    if np.any((k.sum(axis=0) > 0) & (s.c <= 0)):
        return
    out = two_phase_time(s, k)
    assert np.all(out.t_nc_u >= 0)
    assert np.all(out.k_rem_u <= out.k_rem_uq.sum(axis=1) + 1e-9)
    assert out.t >= out.t_unc - 1e-12


def test_subphase_backlog_ends_at_phase_backlog():
    s = T4.summary()
    k = np.array([[300.0, 100.0], [50.0, 250.0]])
    ends = subphase_backlog(s, k)
    out = two_phase_time(s, k)
    assert ends[-1][0] == pytest.approx(out.t_unc)
    assert ends[-1][1:] == pytest.approx(tuple(out.k_rem_u))


# inner bounds -----------------------------------------------------------------------


def test_inner_table4_corners():
    region = inner_bound_region(T4.summary(), 64)
    for p in [(0.3069, 0.7752), (0.5035, 0.5729), (0.6739, 0.3326)]:
        assert min(math.dist(p, c) for c in region.corners) <= 2e-3


def test_trivial_table4_corners():
    pts = [p for p in trivial_inner_region(T4.summary()).boundary_corners() if p[0] > 0 and p[1] > 0]
    expected = [(0.0957, 0.9125), (0.4091, 0.6624), (0.7697, 0.1540)]
    assert len(pts) == 3
    for p, e in zip(pts, expected):
        assert math.dist(p, e) <= 2e-3


@pytest.mark.parametrize("layers,count", [(1, 30), (2, 50), (3, 20)])
def test_containment_chain(layers, count):
    for ch in random_channels(count, layers, 300 + layers):
        s = ch.summary()
        outer = outer_bound_region(s)
        inner = inner_bound_region(s, 64 if layers < 3 else None)
        stab = stability_inner_region(s)
        triv = trivial_inner_region(s)
        assert is_subset(no_csit_capacity(s), outer)
        assert is_subset(triv, inner, tol=1e-6)
        assert is_subset(inner, outer, tol=1e-9)
        assert is_subset(stab, outer, tol=1e-9)
        # the hull search can only under-approximate the split region
        assert is_subset(inner, stab, tol=1e-9)
        assert hausdorff(inner, stab) <= 1e-3


def test_single_layer_bounds_coincide():
    for ch in random_channels(30, 1, 41):
        s = ch.summary()
        outer = outer_bound_region(s)
        assert hausdorff(inner_bound_region(s, 64), outer) <= 1e-6
        assert hausdorff(trivial_inner_region(s), outer) <= 1e-9
        assert hausdorff(stability_inner_region(s), outer) <= 1e-9


def test_stability_contains_origin_and_table5_matches_outer():
    s = T5.summary()
    stab = stability_inner_region(s)
    assert region_contains(stab, (0, 0))
    assert hausdorff(stab, outer_bound_region(s)) <= 2e-3


def test_load_factor_scales_and_matches_region():
    s = T4.summary()
    region = stability_inner_region(s)
    for p in region.boundary_corners():
        if p[0] + p[1] == 0:
            continue
        f, split = load_factor(s, p)
        assert f == pytest.approx(1.0, abs=1e-7)
        assert split_load(s, split) == pytest.approx(f, abs=1e-7)
        assert load_factor(s, (0.5 * p[0], 0.5 * p[1]))[0] == pytest.approx(0.5, abs=1e-7)


# closed-form two-layer inner bound ---------------------------------------------------


def test_fme_matches_lp_in_every_case():
    seen = set()
    for ch in random_channels(400, 2, 77):
        s = ch.summary()
        case = ratio_case(s)
        seen.add(case)
        fme = fme_inner_region(s)
        assert hausdorff(fme, stability_inner_region(s)) <= 1e-9, case
    assert seen == {1, 2, 3, 4}


def test_generic_elimination_matches_lp():
    for ch in random_channels(20, 2, 78) + random_channels(10, 3, 79):
        s = ch.summary()
        assert hausdorff(split_fme_region(s), stability_inner_region(s)) <= 1e-9


def test_fme_symmetric_single_corner():
    x = (0.3, 0.2, 0.2, 0.1)
    s = symmetric_channel(*x).summary()
    pts = [p for p in fme_inner_region(s).boundary_corners() if p[0] > 0 and p[1] > 0]
    assert len(pts) == 1
    v = symmetric_corner(*x)
    assert v == pytest.approx(0.35)
    assert pts[0] == pytest.approx((v, v), abs=1e-12)


def test_fme_table5_matches_outer():
    s = T5.summary()
    assert hausdorff(fme_inner_region(s), outer_bound_region(s)) <= 2e-3


# optimality conditions ----------------------------------------------------------------


def test_optimality_table5():
    rep = check_optimality(T5)
    assert rep.verdict and rep.c2 and rep.c3 and not rep.c1
    assert rep.redundant == ("C",)


def test_optimality_table4():
    assert not check_optimality(T4).verdict


def test_optimality_symmetric():
    rep = check_optimality(symmetric_channel(0.3, 0.2, 0.2, 0.1))
    assert rep.c1 and rep.verdict


@settings(max_examples=40)
@given(channels(min_layers=2, max_layers=2))
def test_verdict_implies_tight_bounds(ch):
    s = ch.summary()
    try:
        rep = check_optimality(ch)
    except ZeroTail:
        return
    if rep.verdict:
        assert hausdorff(stability_inner_region(s), outer_bound_region(s)) <= 2e-3


def test_verdict_true_channels_are_tight():
    found = 0
    for ch in random_channels(400, 2, 91):
        rep = check_optimality(ch)
        if rep.verdict:
            found += 1
            s = ch.summary()
            assert hausdorff(stability_inner_region(s), outer_bound_region(s)) <= 2e-3
    for x2 in (0.2, 0.25, 0.3):
        ch = symmetric_channel(0.1, x2, 0.85 - 2 * x2, 0.05)
        if check_optimality(ch).verdict:
            found += 1
            s = ch.summary()
            assert hausdorff(stability_inner_region(s), outer_bound_region(s)) <= 2e-3
    assert found >= 3
