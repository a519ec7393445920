"""Fourier-Motzkin elimination for small systems A x <= b."""

from __future__ import annotations

import numpy as np
from scipy.optimize import linprog

ZERO = 1e-12


def eliminate(A, b, variables) -> tuple:
    """Project {x : A x <= b} onto the coordinates not listed in variables.

    The eliminated columns are zero in the returned system, which keeps the
    original column layout.  Redundant rows are pruned after each step so
    the system stays small.
    """
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    done = set()
    for j in variables:
        A, b = _eliminate_one(A, b, j)
        done.add(j)
        keep = [k for k in range(A.shape[1]) if k not in done]
        sub, b = prune_redundant(A[:, keep], b)
        A = np.zeros((sub.shape[0], A.shape[1]))
        A[:, keep] = sub
    return A, b


def _eliminate_one(A, b, j):
    col = A[:, j]
    pos = np.flatnonzero(col > ZERO)
    neg = np.flatnonzero(col < -ZERO)
    zero = np.flatnonzero(np.abs(col) <= ZERO)
    rows = [A[zero]]
    rhs = [b[zero]]
    for p in pos:
        for n in neg:
            # combine so column j cancels: (-col[n]) * row_p + col[p] * row_n
            lp, ln = -col[n], col[p]
            rows.append((lp * A[p] + ln * A[n])[None])
            rhs.append(np.array([lp * b[p] + ln * b[n]]))
    A2 = np.vstack(rows)
    b2 = np.concatenate(rhs)
    A2[:, j] = 0.0
    return _normalize(A2, b2)


def _normalize(A, b):
    """Scale rows to unit max-norm, drop trivial and duplicate rows."""
    scale = np.abs(A).max(axis=1)
    trivial = scale <= ZERO
    if np.any(trivial & (b < -1e-9)):
        # infeasible system: keep a single contradictory row
        return np.zeros((1, A.shape[1])), np.array([-1.0])
    A = A[~trivial] / scale[~trivial, None]
    b = b[~trivial] / scale[~trivial]
    if A.shape[0] == 0:
        return A, b
    key = np.round(np.hstack([A, b[:, None]]), 10)
    _, idx = np.unique(key, axis=0, return_index=True)
    idx.sort()
    return A[idx], b[idx]


def prune_redundant(A, b) -> tuple:
    """Drop rows implied by the remaining rows (one LP per row)."""
    A, b = _normalize(np.asarray(A, dtype=float), np.asarray(b, dtype=float))
    keep = list(range(A.shape[0]))
    i = 0
    while i < len(keep):
        row = keep[i]
        others = [k for k in keep if k != row]
        if not others:
            break
        res = linprog(-A[row], A_ub=A[others], b_ub=b[others],
                      bounds=[(None, None)] * A.shape[1], method="highs")
        if res.status == 0 and -res.fun <= b[row] + 1e-9:
            keep.pop(i)
        else:
            i += 1
    return A[keep], b[keep]
