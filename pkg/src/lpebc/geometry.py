"""Convex regions in the (R_1, R_2) quadrant.

A region is kept both as a list of half-planes a1*R1 + a2*R2 <= c and as
its counterclockwise corner list starting at the origin.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

DEDUP_TOL = 1e-9
MEMBER_TOL = 1e-9


@dataclass(frozen=True)
class RatePoint:
    r1: float
    r2: float

    def __iter__(self):
        yield self.r1
        yield self.r2


@dataclass(frozen=True)
class HalfPlane:
    a1: float
    a2: float
    c: float

    def value(self, point) -> float:
        r1, r2 = point
        return self.a1 * r1 + self.a2 * r2 - self.c

    def normalized(self) -> "HalfPlane":
        n = math.hypot(self.a1, self.a2)
        return HalfPlane(self.a1 / n, self.a2 / n, self.c / n)

    def to_json(self) -> dict:
        return {"a1": self.a1, "a2": self.a2, "c": self.c}


@dataclass(frozen=True)
class Region2D:
    halfplanes: tuple
    corners: tuple
    label: str = field(default="", compare=False)

    def to_json(self) -> dict:
        return {
            "halfplanes": [h.to_json() for h in self.halfplanes],
            "corners": [[float(x), float(y)] for x, y in self.corners],
        }

    def corner_array(self) -> np.ndarray:
        return np.array(self.corners, dtype=float).reshape(-1, 2)

    def max_r1(self) -> float:
        return float(self.corner_array()[:, 0].max())

    def max_r2(self) -> float:
        return float(self.corner_array()[:, 1].max())

    def boundary_corners(self) -> list:
        """Corners on the Pareto boundary, from the R2 axis to the R1 axis."""
        pts = [p for p in self.corners if p[0] > DEDUP_TOL or p[1] > DEDUP_TOL]
        return sorted(pts, key=lambda p: (p[0], -p[1]))

    def support(self, w1: float, w2: float) -> float:
        return float(np.max(self.corner_array() @ np.array([w1, w2])))


AXES = (HalfPlane(-1.0, 0.0, 0.0), HalfPlane(0.0, -1.0, 0.0))


def region_from_halfplanes(halfplanes: Sequence[HalfPlane], label: str = "") -> Region2D:
    """Intersect half-planes with the non-negative quadrant.

    Only half-planes that support an edge of the result are kept.
    """
    hps = [h for h in halfplanes if abs(h.a1) + abs(h.a2) > 0]
    big = 1.0
    for h in hps:
        if h.a1 > 0 and h.a2 >= 0:
            big = max(big, h.c / h.a1)
        if h.a2 > 0 and h.a1 >= 0:
            big = max(big, h.c / h.a2)
    big *= 4.0
    poly = [(0.0, 0.0), (big, 0.0), (big, big), (0.0, big)]
    for h in hps:
        poly = _clip(poly, h)
        if not poly:
            break
    corners = _clean(poly)
    if any(max(p) >= big * (1 - 1e-12) for p in corners):
        raise ValueError("half-planes do not bound the region")
    kept = [h for h in _dedup_halfplanes(hps) if _supports_edge(h, corners)]
    return Region2D(tuple(kept), tuple(corners), label)


def region_from_points(points, label: str = "") -> Region2D:
    """Down-closed convex hull of non-negative points (with the origin)."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    pts = np.clip(pts, 0.0, None)
    x_max = pts[:, 0].max(initial=0.0)
    y_max = pts[:, 1].max(initial=0.0)
    cand = np.vstack([pts, [[0.0, 0.0], [x_max, 0.0], [0.0, y_max]]])
    upper = _upper_right_hull(cand)
    corners = [(0.0, 0.0)] + [(x, y) for x, y in upper]
    corners = _clean(corners)
    return Region2D(tuple(_halfplanes_from_corners(corners)), tuple(corners), label)


def region_from_corners(corners, label: str = "") -> Region2D:
    return region_from_points(corners, label)


def _upper_right_hull(pts: np.ndarray) -> list:
    """Hull vertices from (x_max, 0) counterclockwise to (0, y_max)."""
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    P = [tuple(p) for p in pts[order]]
    lower, upper = [], []
    for p in P:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 1e-15:
            lower.pop()
        lower.append(p)
    for p in reversed(P):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 1e-15:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    # rotate so the hull starts at the origin, then drop it
    start = min(range(len(hull)), key=lambda i: (hull[i][0] ** 2 + hull[i][1] ** 2))
    hull = hull[start:] + hull[:start]
    return hull[1:]


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _clip(poly, h: HalfPlane):
    out = []
    n = len(poly)
    for i in range(n):
        p = poly[i]
        q = poly[(i + 1) % n]
        vp = h.value(p)
        vq = h.value(q)
        if vp <= 0:
            out.append(p)
        if (vp < 0 < vq) or (vq < 0 < vp):
            t = vp / (vp - vq)
            out.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
    return out


def _clean(poly) -> list:
    """Drop duplicate and collinear vertices; start at the origin, counterclockwise."""
    pts = []
    for p in poly:
        p = (0.0 if abs(p[0]) < DEDUP_TOL else float(p[0]), 0.0 if abs(p[1]) < DEDUP_TOL else float(p[1]))
        if not pts or math.dist(p, pts[-1]) > DEDUP_TOL:
            pts.append(p)
    while len(pts) > 1 and math.dist(pts[0], pts[-1]) <= DEDUP_TOL:
        pts.pop()
    changed = True
    while changed and len(pts) > 2:
        changed = False
        for i in range(len(pts)):
            a, b, c = pts[i - 1], pts[i], pts[(i + 1) % len(pts)]
            if abs(_cross(a, b, c)) <= DEDUP_TOL * max(1.0, math.dist(a, c)):
                del pts[i]
                changed = True
                break
    if not pts:
        return [(0.0, 0.0)]
    if len(pts) > 2 and _signed_area(pts) < 0:
        pts.reverse()
    start = min(range(len(pts)), key=lambda i: (pts[i][0] ** 2 + pts[i][1] ** 2))
    return pts[start:] + pts[:start]


def _signed_area(pts) -> float:
    s = 0.0
    for i in range(len(pts)):
        x1, y1 = pts[i - 1]
        x2, y2 = pts[i]
        s += x1 * y2 - x2 * y1
    return s / 2


def _halfplanes_from_corners(corners) -> list:
    hps = []
    n = len(corners)
    if n < 3:
        # a point or an axis segment: the axes plus its bounding box
        x_max = max(p[0] for p in corners)
        y_max = max(p[1] for p in corners)
        return list(AXES) + [HalfPlane(1.0, 0.0, float(x_max)), HalfPlane(0.0, 1.0, float(y_max))]
    for i in range(n):
        (x1, y1), (x2, y2) = corners[i], corners[(i + 1) % n]
        a1, a2 = y2 - y1, x1 - x2
        norm = math.hypot(a1, a2)
        if norm <= DEDUP_TOL:
            continue
        a1, a2 = a1 / norm, a2 / norm
        hps.append(HalfPlane(_snap(a1), _snap(a2), _snap(a1 * x1 + a2 * y1)))
    return hps


def _snap(v: float) -> float:
    return 0.0 if abs(v) < 1e-15 else v


def _dedup_halfplanes(hps) -> list:
    out = []
    seen = []
    for h in hps:
        n = h.normalized()
        key = (n.a1, n.a2, n.c)
        if any(max(abs(key[i] - s[i]) for i in range(3)) < DEDUP_TOL for s in seen):
            continue
        seen.append(key)
        out.append(h)
    return out


def _supports_edge(h: HalfPlane, corners) -> bool:
    n = h.normalized()
    touching = [p for p in corners if abs(n.value(p)) <= 1e-9 * max(1.0, abs(n.c))]
    return len(touching) >= min(2, len(corners) - 1) and bool(touching)


# queries ---------------------------------------------------------------------


def region_contains(region: Region2D, point, tol: float = MEMBER_TOL) -> bool:
    r1, r2 = point
    if r1 < -tol or r2 < -tol:
        return False
    pts = list(region.corners)
    if len(pts) < 3:
        if len(pts) == 1:
            return math.dist(pts[0], point) <= tol
        return _segment_distance(point, pts[0], pts[1]) <= tol
    for h in _halfplanes_from_corners(pts):
        if h.value((r1, r2)) > tol:
            return False
    return True


def corners(region: Region2D) -> list:
    return [tuple(p) for p in region.corners]


def distance_to_region(region: Region2D, point) -> float:
    """Euclidean distance from a point to the (convex) region; 0 inside."""
    pts = list(region.corners)
    if len(pts) == 1:
        return math.dist(pts[0], point)
    if len(pts) >= 3 and region_contains(region, point, tol=0.0):
        return 0.0
    return min(_segment_distance(point, pts[i - 1], pts[i]) for i in range(len(pts)))


def _segment_distance(p, a, b) -> float:
    ax, ay = a
    bx, by = b
    dx, dy = bx - ax, by - ay
    L2 = dx * dx + dy * dy
    if L2 == 0:
        return math.dist(p, a)
    t = max(0.0, min(1.0, ((p[0] - ax) * dx + (p[1] - ay) * dy) / L2))
    return math.dist(p, (ax + t * dx, ay + t * dy))


def hausdorff(A: Region2D, B: Region2D) -> float:
    """Hausdorff distance between two convex regions.

    For convex sets the farthest point of one set from the other is a
    corner, so corner distances give the exact value.
    """
    d_ab = max((distance_to_region(B, p) for p in A.corners), default=0.0)
    d_ba = max((distance_to_region(A, p) for p in B.corners), default=0.0)
    return max(d_ab, d_ba)


def is_subset(inner: Region2D, outer: Region2D, tol: float = 1e-6) -> bool:
    return all(region_contains(outer, p, tol) for p in inner.corners)


def nearest_corner_distance(region: Region2D, point) -> float:
    return min(math.dist(point, p) for p in region.corners)


def boundary_distance(region: Region2D, point) -> float:
    """Distance from a point to the region's Pareto boundary (signed distance ignored)."""
    pts = region.boundary_corners()
    if len(pts) == 1:
        return math.dist(pts[0], point)
    return min(_segment_distance(point, pts[i - 1], pts[i]) for i in range(1, len(pts)))


# support-function construction ----------------------------------------------


def sweep_directions(n: int = 720) -> np.ndarray:
    """n unit weight vectors covering the closed quarter circle."""
    theta = np.linspace(0.0, math.pi / 2, n)
    return np.stack([np.cos(theta), np.sin(theta)], axis=1)


def region_from_support(support: Callable[[float, float], float], n: int = 720,
                        label: str = "") -> Region2D:
    """Outer polygon from the support function sampled on n weight directions."""
    hps = [HalfPlane(float(w1), float(w2), float(support(w1, w2))) for w1, w2 in sweep_directions(n)]
    return region_from_halfplanes(hps, label)


def region_from_maximizer(argmax: Callable[[float, float], tuple], tol: float = 1e-10,
                          max_iter: int = 200, label: str = "") -> Region2D:
    """Exact polygon of a down-closed convex region from a support-point oracle.

    argmax(w1, w2) returns a point of the region maximizing w1*R1 + w2*R2.
    New corners are searched along each edge normal until every edge is
    confirmed, which terminates after one query per edge of the polygon.
    """
    eps = 1e-7
    p_right = tuple(argmax(1.0, eps))
    p_top = tuple(argmax(eps, 1.0))
    chain = [p_right, p_top]
    pending = [0]
    iters = 0
    while pending and iters < max_iter:
        iters += 1
        i = pending.pop()
        p, q = chain[i], chain[i + 1]
        w1, w2 = q[1] - p[1], p[0] - q[0]
        if w1 <= 0 or w2 <= 0:
            continue
        norm = math.hypot(w1, w2)
        w1, w2 = w1 / norm, w2 / norm
        r = tuple(argmax(w1, w2))
        if w1 * r[0] + w2 * r[1] > w1 * p[0] + w2 * p[1] + tol:
            chain.insert(i + 1, r)
            pending = [j + 1 if j > i else j for j in pending]
            pending.extend([i, i + 1])
    return region_from_points(chain, label)


# io ----------------------------------------------------------------------------


def write_region_json(region: Region2D, path):
    Path(path).write_text(json.dumps(region.to_json(), indent=2))


def write_region_csv(region: Region2D, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r1", "r2"])
        for x, y in region.corners:
            w.writerow([f"{x:.12g}", f"{y:.12g}"])


def read_region_json(path) -> Region2D:
    doc = json.loads(Path(path).read_text())
    hps = tuple(HalfPlane(h["a1"], h["a2"], h["c"]) for h in doc["halfplanes"])
    return Region2D(hps, tuple(tuple(p) for p in doc["corners"]))
