"""Analytic rate regions of the two-user layered erasure broadcast channel.

Every region is a down-closed convex polygon in (R_1, R_2).  Throughout,
a_q = Pr[N_1 >= q], b_q = Pr[N_2 >= q] and c_q = Pr[max(N_1, N_2) >= q].
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .channel import ChannelSummary, JointChannelPmf
from .errors import UnreachableLayer, ZeroTail
from .fme import eliminate, prune_redundant
from .geometry import (
    HalfPlane,
    Region2D,
    region_from_halfplanes,
    region_from_maximizer,
    region_from_points,
    region_from_support,
)

TIE_TOL = 1e-12
# layers reached less often than this are left out of rate optimizations
USABLE_TAIL = 1e-12


def _summary(obj) -> ChannelSummary:
    if isinstance(obj, JointChannelPmf):
        return obj.summary()
    return obj


# outer bound -------------------------------------------------------------------


def outer_bound_support(channel: JointChannelPmf, weights, perm) -> float:
    """Weighted-sum-rate bound for one weight vector and one user ordering.

    Returns sum_q max_k w[perm[k]] * Pr[max(N_perm[k], ..., N_perm[K]) >= q].
    """
    w = np.asarray(weights, dtype=float)
    if w.shape != (channel.num_users,) or np.any(w < 0):
        raise ValueError("weights must be non-negative, one per user")
    tails = channel.degraded_summary(perm).marg_geq[:, 1:]
    return float(np.max(w[:, None] * tails, axis=0).sum())


def outer_bound_support_best(channel: JointChannelPmf, weights) -> float:
    """Tightest outer-bound support value over all user orderings."""
    perms = itertools.permutations(range(1, channel.num_users + 1))
    return min(outer_bound_support(channel, weights, p) for p in perms)


def degraded_polygon(t1, t2) -> list:
    """Corners of the region reachable by giving each layer to one user.

    Layer q carries t1[q] packets/slot to user 1 or t2[q] to user 2; the
    region is the Minkowski sum of those segments (down-closed).
    """
    t1 = np.asarray(t1, dtype=float)
    t2 = np.asarray(t2, dtype=float)
    order = sorted(range(t1.size), key=lambda q: (-math.atan2(t2[q], t1[q]), q))
    x, y = float(t1.sum()), 0.0
    pts = [(x, y)]
    for q in order:
        x -= t1[q]
        y += t2[q]
        pts.append((max(x, 0.0), y))
    return pts


def _polygon_halfplanes(pts) -> list:
    return list(region_from_points(pts).halfplanes)


def outer_bound_region(summary) -> Region2D:
    """Intersection of the two degraded-channel regions (one per user ordering)."""
    s = _summary(summary)
    hps = _polygon_halfplanes(degraded_polygon(s.c, s.b)) + _polygon_halfplanes(degraded_polygon(s.a, s.c))
    return region_from_halfplanes(hps, "outer")


def outer_bound_sweep(channel: JointChannelPmf, directions: int = 720) -> Region2D:
    """Outer bound from the support function sampled on a weight sweep."""
    return region_from_support(lambda w1, w2: outer_bound_support_best(channel, (w1, w2)),
                               directions, "outer-sweep")


@dataclass(frozen=True)
class XiParams:
    xi1: float
    xi2: float
    xi3: float
    xi4: float

    def as_tuple(self) -> tuple:
        return (self.xi1, self.xi2, self.xi3, self.xi4)


def xi_params(summary) -> XiParams:
    """Extreme ratios c_q/a_q and b_q/c_q over the two layers."""
    s = _summary(summary)
    if s.num_layers != 2:
        raise ValueError("xi parameters are defined for two layers")
    a, b, c = s.a, s.b, s.c
    if np.any(a <= 0):
        raise ZeroTail(f"Pr[N_1 >= q] = 0 for some layer: {a}")
    if np.any(c <= 0):
        raise ZeroTail(f"Pr[max >= q] = 0 for some layer: {c}")
    up = c / a
    down = b / c
    return XiParams(float(up.max()), float(up.min()), float(down.max()), float(down.min()))


def outer_bound_xi_halfplanes(summary) -> dict:
    """The four outer-bound half-planes in terms of the xi parameters."""
    s = _summary(summary)
    xi = xi_params(s)
    e1, e2 = s.mean
    em = s.mean_max
    # A and C multiplied through by their xi so that xi3 = 0 stays finite
    return {
        "A": HalfPlane(xi.xi1, 1.0, xi.xi1 * e1),
        "B": HalfPlane(xi.xi2, 1.0, em),
        "C": HalfPlane(xi.xi3, 1.0, xi.xi3 * em),
        "D": HalfPlane(xi.xi4, 1.0, e2),
    }


def outer_bound_xi_region(summary) -> Region2D:
    return region_from_halfplanes(list(outer_bound_xi_halfplanes(summary).values()), "outer-xi")


def no_csit_capacity(summary) -> Region2D:
    """Capacity without channel knowledge: layers shared by time only."""
    s = _summary(summary)
    return region_from_points(degraded_polygon(s.a, s.b), "no-csit")


# two-phase protocol timing ----------------------------------------------------


@dataclass(frozen=True)
class TwoPhaseTime:
    t_unc_q: np.ndarray
    t_unc: float
    k_rem_uq: np.ndarray
    k_rem_u: np.ndarray
    t_nc_u: np.ndarray
    t: float

    def rates(self, alloc) -> tuple:
        k = np.asarray(alloc, dtype=float)
        if self.t == 0:
            return (0.0, 0.0)
        return (float(k[0].sum() / self.t), float(k[1].sum() / self.t))


def _ratios(s: ChannelSummary):
    """p_uq / c_q with 0 on layers nobody ever receives."""
    c = s.c
    with np.errstate(divide="ignore", invalid="ignore"):
        ra = np.where(c > 0, s.a / c, 0.0)
        rb = np.where(c > 0, s.b / c, 0.0)
    return np.stack([ra, rb])


def two_phase_time(summary, alloc) -> TwoPhaseTime:
    """Expected durations of the two-phase protocol for packet counts alloc[u-1][q-1]."""
    s = _summary(summary)
    k = np.asarray(alloc, dtype=float)
    Q = s.num_layers
    if k.shape != (2, Q):
        raise ValueError(f"allocation must have shape (2, {Q})")
    if np.any(k < 0):
        raise ValueError("allocation entries must be non-negative")
    load = k.sum(axis=0)
    c = s.c
    if np.any((load > 0) & (c <= 0)):
        raise UnreachableLayer("packets assigned to a layer no user ever receives")
    with np.errstate(divide="ignore", invalid="ignore"):
        t_q = np.where(load > 0, load / np.where(c > 0, c, 1.0), 0.0)
    t_unc = float(t_q.max(initial=0.0))
    p = s.marg_geq[:, 1:]
    k_rem_uq = k * (1.0 - _ratios(s))
    raw = (k_rem_uq - (t_unc - t_q)[None, :] * p).sum(axis=1)
    k_rem_u = np.maximum(raw, 0.0)
    mean = s.mean
    with np.errstate(divide="ignore", invalid="ignore"):
        t_nc = np.where(k_rem_u > 0, k_rem_u / np.where(mean > 0, mean, 0.0), 0.0)
    t = t_unc + float(t_nc.max())
    return TwoPhaseTime(t_q, t_unc, k_rem_uq, k_rem_u, t_nc, t)


def two_phase_rate(summary, alloc) -> tuple:
    return two_phase_time(summary, alloc).rates(alloc)


def subphase_backlog(summary, alloc) -> list:
    """Expected coded backlog per user at the end of every uncoded layer.

    Layers are visited in order of their uncoded durations (ties by index);
    entry j holds (time, backlog of user 1, backlog of user 2) once the j-th
    layer has emptied.  The last entry equals k_rem_u of two_phase_time.
    """
    s = _summary(summary)
    k = np.asarray(alloc, dtype=float)
    tt = two_phase_time(s, k)
    p = s.marg_geq[:, 1:]
    order = sorted(range(s.num_layers), key=lambda q: (tt.t_unc_q[q], q))
    out = []
    for q in order:
        tj = tt.t_unc_q[q]
        rows = []
        for u in range(2):
            total = 0.0
            for l in range(s.num_layers):
                if tt.t_unc_q[l] >= tj:
                    if tt.t_unc_q[l] > 0:
                        total += tt.k_rem_uq[u, l] * tj / tt.t_unc_q[l]
                else:
                    total += tt.k_rem_uq[u, l] - (tj - tt.t_unc_q[l]) * p[u, l]
            rows.append(max(total, 0.0))
        out.append((float(tj), rows[0], rows[1]))
    return out


def completion_times(summary, allocs: np.ndarray) -> np.ndarray:
    """two_phase_time(...).t for a batch of allocations shaped (n, 2, Q)."""
    s = _summary(summary)
    k = np.asarray(allocs, dtype=float)
    c = s.c
    load = k.sum(axis=1)
    safe_c = np.where(c > 0, c, 1.0)
    t_q = np.where(load > 0, load / safe_c, 0.0)
    t_q = np.where((load > 0) & (c <= 0), np.inf, t_q)
    t_unc = t_q.max(axis=1)
    p = s.marg_geq[:, 1:]
    k_rem_uq = k * (1.0 - _ratios(s))[None]
    raw = (k_rem_uq - (t_unc[:, None] - t_q)[:, None, :] * p[None]).sum(axis=2)
    k_rem_u = np.maximum(raw, 0.0)
    mean = s.mean
    with np.errstate(divide="ignore", invalid="ignore"):
        t_nc = np.where(k_rem_u > 0, k_rem_u / mean[None], 0.0)
    return t_unc + t_nc.max(axis=1)


def simplex_grid(dim: int, resolution: int) -> np.ndarray:
    """All points of the probability simplex in R^dim with coordinates j/resolution."""
    pts = []
    for bars in itertools.combinations(range(resolution + dim - 1), dim - 1):
        prev = -1
        coords = []
        for b in bars:
            coords.append(b - prev - 1)
            prev = b
        coords.append(resolution + dim - 2 - prev)
        pts.append(coords)
    return np.array(pts, dtype=float) / resolution


def _default_resolution(dim: int, cap: int = 200_000) -> int:
    res = 64
    while res > 2 and math.comb(res + dim - 1, dim - 1) > cap:
        res -= 1
    return res


class _RateOracle:
    """Support-point search over allocations for the two-phase protocol."""

    def __init__(self, s: ChannelSummary, resolution: int | None, min_step: float,
                 exact: bool = True):
        self.s = s
        self.exact = exact
        self.usable = [q for q in range(s.num_layers) if s.c[q] > USABLE_TAIL]
        self.dim = 2 * len(self.usable)
        if resolution is None:
            resolution = _default_resolution(self.dim)
        if resolution < 2:
            raise ValueError("grid resolution must be at least 2")
        self.resolution = resolution
        self.min_step = min_step
        grid = simplex_grid(self.dim, resolution)
        self.grid = grid
        t = completion_times(s, self._expand(grid))
        with np.errstate(divide="ignore", invalid="ignore"):
            half = len(self.usable)
            rates = np.stack([grid[:, :half].sum(axis=1), grid[:, half:].sum(axis=1)], axis=1) / t[:, None]
        self.rates = np.nan_to_num(rates, nan=0.0, posinf=0.0)
        # scalar copies for the descent loop
        self.c = [float(s.c[q]) for q in self.usable]
        self.p = [[float(s.marg_geq[u, q + 1]) for q in self.usable] for u in range(2)]
        self.mean = [float(m) for m in s.mean]

    def _expand(self, flat: np.ndarray) -> np.ndarray:
        n = flat.shape[0]
        half = len(self.usable)
        k = np.zeros((n, 2, self.s.num_layers))
        k[:, 0, self.usable] = flat[:, :half]
        k[:, 1, self.usable] = flat[:, half:]
        return k

    def allocation(self, flat) -> np.ndarray:
        return self._expand(np.asarray(flat, dtype=float)[None])[0]

    def _value(self, x, w1, w2) -> float:
        half = len(self.usable)
        c, p, mean = self.c, self.p, self.mean
        t_q = []
        for q in range(half):
            load = x[q] + x[half + q]
            t_q.append(load / c[q] if load > 0 else 0.0)
        t_unc = max(t_q)
        worst = 0.0
        for u in range(2):
            raw = 0.0
            for q in range(half):
                k = x[u * half + q]
                raw += k * (1.0 - p[u][q] / c[q]) - (t_unc - t_q[q]) * p[u][q]
            if raw > 0:
                if mean[u] <= 0:
                    return 0.0
                worst = max(worst, raw / mean[u])
        t = t_unc + worst
        if t <= 0:
            return 0.0
        r1 = sum(x[:half]) / t
        r2 = sum(x[half:]) / t
        return w1 * r1 + w2 * r2

    def descend(self, x0, w1, w2):
        """Pairwise mass transfers with step halving down to min_step."""
        x = list(map(float, x0))
        best = self._value(x, w1, w2)
        step = 1.0 / self.resolution
        n = len(x)
        while step >= self.min_step:
            improved = False
            for i in range(n):
                if x[i] <= 0:
                    continue
                for j in range(n):
                    if i == j:
                        continue
                    d = min(step, x[i])
                    y = list(x)
                    y[i] -= d
                    y[j] += d
                    v = self._value(y, w1, w2)
                    if v > best + 1e-15:
                        x, best = y, v
                        improved = True
                        if x[i] <= 0:
                            break
            if not improved:
                step /= 2
        return x, best

    def pieces(self, w1, w2):
        """Exact support allocation from the piecewise-linear structure of the time.

        The completion time is linear once the last layer to finish and the
        user whose coded phase dominates (or neither) are fixed.  Each such
        piece, normalized to unit time, is a linear program; the best piece
        wins.  Returns (allocation, value).
        """
        half = len(self.usable)
        n = 2 * half
        c = np.array(self.c)
        p = np.array(self.p)
        mean = self.mean
        # linear forms in the allocation, one row per layer or user
        T = np.zeros((half, n))
        for q in range(half):
            T[q, q] = T[q, half + q] = 1.0 / c[q]
        own = np.zeros((2, n))
        for u in range(2):
            own[u, u * half:(u + 1) * half] = 1.0 - p[u] / c
        gain = np.concatenate([np.full(half, w1), np.full(half, w2)])
        best = (None, -math.inf)
        for qs in range(half):
            slack = T - T[qs]                      # t_q - t_{q*} <= 0
            raw = own - p @ (T[qs][None, :] - T)   # positive part argument per user
            cases = [None] + [u for u in range(2) if mean[u] > 0]
            for u in cases:
                rows = [slack]
                if u is None:
                    rows.append(raw)
                    t_row = T[qs]
                else:
                    v = 1 - u
                    rows.append(-raw[u][None, :])
                    if mean[v] > 0:
                        rows.append((raw[v] / mean[v] - raw[u] / mean[u])[None, :])
                    else:
                        rows.append(raw[v][None, :])
                    t_row = T[qs] + raw[u] / mean[u]
                A = np.vstack(rows)
                res = linprog(-gain, A_ub=A, b_ub=np.zeros(A.shape[0]), A_eq=t_row[None, :],
                              b_eq=[1.0], bounds=[(0, None)] * n, method="highs")
                if res.status == 0 and -res.fun > best[1]:
                    best = (res.x, -float(res.fun))
        if best[0] is None:
            return None, -math.inf
        x = np.clip(best[0], 0.0, None)
        return list(x / x.sum()), self._value(list(x / x.sum()), w1, w2)

    def point(self, x):
        half = len(self.usable)
        t = completion_times(self.s, self._expand(np.asarray(x)[None]))[0]
        if not np.isfinite(t) or t <= 0:
            return (0.0, 0.0)
        return (sum(x[:half]) / t, sum(x[half:]) / t)

    def __call__(self, w1, w2):
        scores = self.rates @ np.array([w1, w2])
        start = self.grid[int(np.argmax(scores))]
        x, best = self.descend(start, w1, w2)
        if self.exact:
            y, value = self.pieces(w1, w2)
            if value > best:
                x = y
        return self.point(x)


def inner_bound_region(summary, resolution: int | None = 64, min_step: float = 1e-6,
                       exact: bool = True) -> Region2D:
    """Hull of two-phase protocol rates over allocations.

    A simplex grid of normalized allocations locates the supporting
    allocation for each boundary direction and pairwise coordinate descent
    polishes it.  With exact=True every support query is also solved on
    each linear piece of the completion time, which removes the error left
    by the search where the optimum sits on a ridge of the time function.
    """
    s = _summary(summary)
    oracle = _RateOracle(s, resolution, min_step, exact)
    if oracle.dim == 0:
        return region_from_points([(0.0, 0.0)], "inner")
    grid_hull = region_from_points(oracle.rates)
    points = list(grid_hull.corners)
    refined = region_from_maximizer(oracle, tol=1e-9)
    points.extend(refined.corners)
    return region_from_points(points, "inner")


def inner_bound_grid_region(summary, resolution: int = 64) -> Region2D:
    """Hull of the grid points alone, without refinement."""
    oracle = _RateOracle(_summary(summary), resolution, 1.0, exact=False)
    return region_from_points(oracle.rates, "inner-grid")


# split-rate linear programs ---------------------------------------------------


def split_constraints(summary):
    """Linear constraints on per-layer rates x = (R_11..R_1Q, R_21..R_2Q).

    A rate split is served by the two-phase protocol within one slot per unit
    rate iff A x <= b:  per-layer uncoded load (R_1q + R_2q)/c_q <= 1 and,
    per user, own traffic plus traffic overheard-then-coded fits E[N_u].
    Layers no user receives are pinned to zero.
    """
    s = _summary(summary)
    Q = s.num_layers
    ratios = _ratios(s)
    rows, rhs = [], []
    for q in range(Q):
        row = np.zeros(2 * Q)
        if s.c[q] > USABLE_TAIL:
            row[q] = row[Q + q] = 1.0 / s.c[q]
            rows.append(row)
            rhs.append(1.0)
        else:
            for idx in (q, Q + q):
                r = np.zeros(2 * Q)
                r[idx] = 1.0
                rows.append(r)
                rhs.append(0.0)
    mean = s.mean
    for u in range(2):
        row = np.zeros(2 * Q)
        own = slice(u * Q, (u + 1) * Q)
        other = slice((1 - u) * Q, (2 - u) * Q)
        row[own] = 1.0
        row[other] = ratios[u]
        if mean[u] > 0:
            rows.append(row / mean[u])
            rhs.append(1.0)
        else:
            blocked = np.zeros(2 * Q)
            blocked[own] = 1.0
            rows.append(blocked)
            rhs.append(0.0)
    return np.array(rows), np.array(rhs)


def _split_argmax(summary):
    s = _summary(summary)
    A, b = split_constraints(s)
    Q = s.num_layers

    def argmax(w1, w2):
        cost = -np.concatenate([np.full(Q, w1), np.full(Q, w2)])
        res = linprog(cost, A_ub=A, b_ub=b, bounds=[(0, None)] * (2 * Q), method="highs")
        if res.status != 0:
            raise RuntimeError(f"split LP failed: {res.message}")
        x = res.x
        return (float(x[:Q].sum()), float(x[Q:].sum()))

    return argmax


def stability_inner_region(summary) -> Region2D:
    """Closure of arrival rates admitting a per-layer split with load below one."""
    return region_from_maximizer(_split_argmax(summary), tol=1e-10, label="stability")


def load_factor(summary, rates) -> tuple:
    """Smallest max-load over per-layer splits of the given rate pair.

    Returns (factor, split) where split[u][q] realizes it; the pair is inside
    the stability inner region iff factor < 1.
    """
    s = _summary(summary)
    A, b = split_constraints(s)
    Q = s.num_layers
    lam = np.asarray(rates, dtype=float)
    n = 2 * Q
    # variables: x (n), s
    cost = np.zeros(n + 1)
    cost[-1] = 1.0
    A_ub = np.hstack([A, -b[:, None]])
    b_ub = np.zeros(len(b))
    A_eq = np.zeros((2, n + 1))
    A_eq[0, :Q] = 1.0
    A_eq[1, Q:n] = 1.0
    res = linprog(cost, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=lam,
                  bounds=[(0, None)] * (n + 1), method="highs")
    if res.status != 0:
        return math.inf, None
    return float(res.x[-1]), res.x[:n].reshape(2, Q)


def split_load(summary, split) -> float:
    """Max-load of a given split: the largest left-hand side of the split constraints."""
    A, b = split_constraints(summary)
    x = np.asarray(split, dtype=float).ravel()
    lhs = A @ x
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.where(b > 0, lhs / np.where(b > 0, b, 1.0), np.where(lhs > 1e-15, np.inf, 0.0))
    return float(vals.max())


def split_fme_region(summary) -> Region2D:
    """Project the split constraints onto (R_1, R_2) by Fourier-Motzkin elimination."""
    s = _summary(summary)
    A, b = split_constraints(s)
    Q = s.num_layers
    n = 2 * Q
    # coordinates: (x_11..x_2Q, R1, R2); R_u = sum of user u's split
    rows, rhs = [], []
    for i in range(A.shape[0]):
        rows.append(np.concatenate([A[i], [0.0, 0.0]]))
        rhs.append(b[i])
    for i in range(n):
        r = np.zeros(n + 2)
        r[i] = -1.0
        rows.append(r)
        rhs.append(0.0)
    for u in range(2):
        r = np.zeros(n + 2)
        r[u * Q:(u + 1) * Q] = 1.0
        r[n + u] = -1.0
        rows.append(r)
        rhs.append(0.0)
        rows.append(-r)
        rhs.append(0.0)
    M, v = eliminate(np.array(rows), np.array(rhs), list(range(n)))
    M, v = prune_redundant(M[:, n:], v)
    hps = [HalfPlane(float(m[0]), float(m[1]), float(c)) for m, c in zip(M, v)]
    return region_from_halfplanes(hps, "split-fme")


# layer-independent coding -------------------------------------------------------


def single_layer_region(a: float, b: float, c: float) -> list:
    """Corners of the one-layer capacity region with tails (a, b, c)."""
    if c <= 0:
        return [(0.0, 0.0)]
    hps = [HalfPlane(b, c, b * c), HalfPlane(c, a, a * c)]
    return list(region_from_halfplanes(hps).corners)


def trivial_inner_region(summary) -> Region2D:
    """Rates of coding every layer separately: Minkowski sum of the per-layer regions."""
    s = _summary(summary)
    layers = [single_layer_region(s.a[q], s.b[q], s.c[q]) for q in range(s.num_layers)]
    pts = [(0.0, 0.0)]
    for corners_q in layers:
        summed = [(x + u, y + v) for (x, y) in pts for (u, v) in corners_q]
        pts = list(region_from_points(summed).corners)
    return region_from_points(pts, "trivial")


# two-layer closed forms ---------------------------------------------------------


def ratio_case(summary) -> int:
    """Which layer attains the xi extremes: 1..4; ties count as layer 1."""
    s = _summary(summary)
    a, b, c = s.a, s.b, s.c
    up_first = c[0] * a[1] >= c[1] * a[0] - TIE_TOL  # c1/a1 >= c2/a2
    down_first = b[0] * c[1] >= b[1] * c[0] - TIE_TOL  # b1/c1 >= b2/c2
    if up_first and down_first:
        return 1
    if not up_first and down_first:
        return 2
    if not up_first and not down_first:
        return 3
    return 4


def fme_extra_halfplane(summary) -> HalfPlane:
    """The case-specific inequality of the two-layer inner bound, denominators cleared."""
    s = _summary(summary)
    (a1, a2), (b1, b2), (c1, c2) = s.a, s.b, s.c
    case = ratio_case(s)
    if case == 1:
        d = b1 * c2 - c1 * b2
        return HalfPlane(b1 * c2, d + c1 * c2, d * (c1 + c2) + c1 * c2 * (b1 + b2))
    if case == 2:
        da = a1 * c2 - c1 * a2
        db = b1 * c2 - c1 * b2
        return HalfPlane(c1 * db + b1 * da, c1 * da + a1 * db,
                         da * db + c1 * (a1 + a2) * db + c1 * (b1 + b2) * da)
    if case == 3:
        d = a1 * c2 - a2 * c1
        return HalfPlane(d + c1 * c2, a1 * c2, d * (c1 + c2) + c1 * c2 * (a1 + a2))
    da = a2 * c1 - a1 * c2
    db = b2 * c1 - b1 * c2
    e1, e2 = a1 + a2, b1 + b2
    return HalfPlane(da * b2 + c2 * db, c2 * da + a2 * db, da * db + c2 * (da * e2 + db * e1))


def fme_inner_region(summary) -> Region2D:
    """Two-layer inner bound from its closed-form half-plane description."""
    s = _summary(summary)
    hps = list(outer_bound_xi_halfplanes(s).values())
    hps.append(HalfPlane(1.0, 1.0, float(s.c.sum())))
    hps.append(fme_extra_halfplane(s))
    return region_from_halfplanes(hps, "fme")


# optimality conditions ------------------------------------------------------------


@dataclass(frozen=True)
class OptimalityReport:
    c1: bool
    c2: bool
    redundant: tuple
    c3: bool
    verdict: bool
    case: int
    xi: XiParams

    def to_json(self) -> dict:
        return {"C1": bool(self.c1), "C2": bool(self.c2), "redundant_bounds": list(self.redundant),
                "C3": bool(self.c3), "verdict": bool(self.verdict), "case": int(self.case),
                "xi": [float(v) for v in self.xi.as_tuple()]}


def symmetric_structure(channel: JointChannelPmf, tol: float = 1e-12):
    """(x1, x2, x3, x4) when the pmf has the symmetric two-layer structure, else None."""
    P = channel.pmf
    if channel.num_users != 2 or channel.num_layers != 2:
        return None
    zeros = [P[0, 2], P[1, 2], P[2, 0], P[2, 1]]
    if max(zeros) > tol or abs(P[0, 1] - P[1, 0]) > tol:
        return None
    return (float(P[0, 0]), float(P[0, 1]), float(P[1, 1]), float(P[2, 2]))


def symmetric_corner(x1, x2, x3, x4) -> float:
    """Common coordinate of the single non-trivial corner for the symmetric structure."""
    return (2 * x2 + x3 + x4) * (x2 + x3 + 2 * x4) / (3 * x2 + 2 * x3 + 2 * x4)


def bound_redundant(summary, name: str) -> bool:
    """Whether outer-bound half-plane B or C is implied by the other three."""
    hps = outer_bound_xi_halfplanes(summary)
    others = [h for k, h in hps.items() if k != name]
    reg = region_from_halfplanes(others)
    h = hps[name]
    scale = max(1.0, abs(h.c))
    return all(h.value(p) <= 1e-12 * scale for p in reg.corners)


def check_optimality(channel: JointChannelPmf) -> OptimalityReport:
    """Sufficient conditions under which the two-phase inner bound meets the outer bound."""
    if channel.num_users != 2 or channel.num_layers != 2:
        raise ValueError("optimality conditions are defined for two users and two layers")
    s = channel.summary()
    xi = xi_params(s)
    struct = symmetric_structure(channel)
    c1 = bool(struct is not None and struct[1] >= 2 * struct[3])
    redundant = tuple(n for n in ("B", "C") if bound_redundant(s, n))
    c2 = bool(redundant)
    (a1, a2), (b1, b2), (k1, k2) = s.a, s.b, s.c
    # a2/a1 >= c2/c1 >= b2/b1, or the reverse, cross-multiplied
    chain_down = a2 * k1 >= k2 * a1 - TIE_TOL and k2 * b1 >= b2 * k1 - TIE_TOL
    chain_up = a2 * k1 <= k2 * a1 + TIE_TOL and k2 * b1 <= b2 * k1 + TIE_TOL
    c3 = bool(chain_down or chain_up)
    verdict = c1 or (c2 and c3)
    return OptimalityReport(c1, c2, redundant, c3, verdict, ratio_case(s), xi)


def outer_corners_closed_form(summary) -> dict:
    """Pairwise intersections of the xi half-planes, from explicit formulas."""
    s = _summary(summary)
    xi = xi_params(s)
    x1, x2, x3, x4 = xi.as_tuple()
    e1, e2 = s.mean
    em = s.mean_max
    out = {}
    if x1 != x3:
        out["AC"] = ((x1 * e1 - x3 * em) / (x1 - x3), x1 * x3 * (em - e1) / (x1 - x3))
    if x3 != x4:
        out["CD"] = ((x3 * em - e2) / (x3 - x4), (x3 * e2 - x3 * x4 * em) / (x3 - x4))
    if x1 != x2:
        out["AB"] = ((x1 * e1 - em) / (x1 - x2), (x1 * em - x1 * x2 * e1) / (x1 - x2))
    if x2 != x4:
        out["BD"] = ((em - e2) / (x2 - x4), (x2 * e2 - x4 * em) / (x2 - x4))
    if x1 != x4:
        out["AD"] = ((x1 * e1 - e2) / (x1 - x4), x1 * (e2 - x4 * e1) / (x1 - x4))
    if x2 != x3:
        out["BC"] = (em * (x3 - 1) / (x3 - x2), x3 * em * (1 - x2) / (x3 - x2))
    return out
