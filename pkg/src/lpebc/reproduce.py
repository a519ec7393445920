"""Published numbers for the three worked channels and checks against them."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .fixtures import fixture
from .geometry import Region2D, hausdorff, is_subset, distance_to_region, nearest_corner_distance
from .regions import (check_optimality, inner_bound_region, no_csit_capacity, outer_bound_region,
                      stability_inner_region, trivial_inner_region, xi_params)

CORNER_TOL = 2e-3
XI_TOL = 1e-3

PUBLISHED = {
    1: {
        "channel": "example1",
        "no_csit": [(0.0, 1.0), (0.75, 0.5), (1.0, 0.0)],
        "outer": [(0.0, 1.0), (7 / 9, 5 / 9), (1.0, 0.0)],
        "inner_reaches": [(7 / 9, 5 / 9)],
    },
    2: {
        "channel": "example2",
        "outer": {"A": (0.0, 0.9748), "B1": (0.3326, 0.7585), "C1": (0.4231, 0.6862),
                  "D1": (0.6739, 0.3326), "E": (0.8522, 0.0)},
        "trivial": {"B2": (0.0957, 0.9125), "C2": (0.4091, 0.6624), "D2": (0.7697, 0.1540)},
        "inner": {"B3": (0.3069, 0.7752), "C3": (0.5035, 0.5729), "D3": (0.6739, 0.3326)},
    },
    3: {
        "channel": "example3",
        "xi": (1.940, 1.926, 0.844, 0.658),
        "outer": {"P1": (0.0, 1.234), "P2": (0.302, 1.035), "P3": (0.366, 0.912),
                  "P4": (0.836, 0.0)},
        "optimal": True,
    },
}


@dataclass(frozen=True)
class Check:
    name: str
    expected: object
    actual: object
    error: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.error <= self.tol

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<34} err={self.error:.2e} tol={self.tol:.0e}  actual={_fmt(self.actual)}"

    def to_json(self) -> dict:
        return {"name": self.name, "expected": _plain(self.expected), "actual": _plain(self.actual),
                "error": self.error, "tol": self.tol, "passed": self.passed}


def _fmt(x) -> str:
    if isinstance(x, tuple):
        return "(" + ", ".join(f"{v:.4f}" if isinstance(v, float) else str(v) for v in x) + ")"
    return str(x)


def _plain(x):
    if isinstance(x, tuple):
        return [_plain(v) for v in x]
    return x


def _nearest(region: Region2D, p) -> tuple:
    best = min(region.corners, key=lambda c: math.dist(c, p))
    return (float(best[0]), float(best[1]))


def corner_checks(label: str, region: Region2D, expected, tol: float) -> list:
    """Each expected corner has a region corner within tol."""
    items = expected.items() if isinstance(expected, dict) else ((_fmt(tuple(p)), p) for p in expected)
    return [Check(f"{label} corner {name}", tuple(p), _nearest(region, p),
                  nearest_corner_distance(region, p), tol) for name, p in items]


def _flag(name: str, ok: bool) -> Check:
    return Check(name, True, bool(ok), 0.0 if ok else 1.0, 0.0)


def reproduce(example: int, resolution: int = 64, tol: float = CORNER_TOL,
              xi_tol: float = XI_TOL) -> tuple:
    """Run one worked channel; returns (checks, regions by name)."""
    if example not in PUBLISHED:
        raise KeyError(f"unknown example {example}; choose from {sorted(PUBLISHED)}")
    ref = PUBLISHED[example]
    ch = fixture(ref["channel"])
    s = ch.summary()
    checks = []
    regions = {"outer": outer_bound_region(s)}
    if example == 1:
        regions["no-csit"] = no_csit_capacity(s)
        regions["inner"] = inner_bound_region(s, resolution)
        checks += corner_checks("no-CSIT", regions["no-csit"], ref["no_csit"], tol)
        checks += corner_checks("outer", regions["outer"], ref["outer"], tol)
        for p in ref["inner_reaches"]:
            checks.append(Check(f"inner reaches {_fmt(p)}", p, p,
                                distance_to_region(regions["inner"], p), tol))
    elif example == 2:
        regions["trivial"] = trivial_inner_region(s)
        regions["inner"] = inner_bound_region(s, resolution)
        regions["stability"] = stability_inner_region(s)
        checks += corner_checks("outer", regions["outer"], ref["outer"], tol)
        checks += corner_checks("trivial", regions["trivial"], ref["trivial"], tol)
        checks += corner_checks("inner", regions["inner"], ref["inner"], tol)
        checks.append(_flag("trivial within inner", is_subset(regions["trivial"], regions["inner"])))
        checks.append(_flag("inner within outer", is_subset(regions["inner"], regions["outer"])))
    else:
        xi = xi_params(s).as_tuple()
        err = max(abs(a - b) for a, b in zip(xi, ref["xi"]))
        checks.append(Check("xi", ref["xi"], tuple(float(v) for v in xi), err, xi_tol))
        checks += corner_checks("outer", regions["outer"], ref["outer"], tol)
        report = check_optimality(ch)
        checks.append(Check("optimality verdict", ref["optimal"], report.verdict,
                            0.0 if report.verdict == ref["optimal"] else 1.0, 0.0))
        regions["stability"] = stability_inner_region(s)
        checks.append(Check("Hausdorff(stability, outer)", 0.0, None,
                            hausdorff(regions["stability"], regions["outer"]), tol))
    return checks, regions
