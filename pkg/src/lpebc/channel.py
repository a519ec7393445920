"""Joint statistics of the layered packet erasure broadcast channel.

A channel with K users and Q layers is described by the joint pmf of the
received-layer counts (N_1, ..., N_K), each in 0..Q.  User u decodes layers
1..N_u of the slot and loses the rest.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    BadPermutation,
    BadShape,
    EmptySubset,
    IndexOutOfRange,
    NegativeEntry,
    NotNormalized,
)

SUM_TOL = 1e-12
RENORM_TOL = 1e-9


def validate(pmf) -> np.ndarray:
    """Check a pmf array and return it as a normalized float array.

    Arrays whose total is off by more than 1e-12 but at most 1e-9 are
    rescaled; anything further off is rejected.
    """
    arr = np.asarray(pmf, dtype=float)
    if arr.ndim < 1 or arr.size == 0:
        raise BadShape("pmf must be a non-empty array")
    side = arr.shape[0]
    if side < 2 or any(s != side for s in arr.shape):
        raise BadShape(f"pmf must have shape (Q+1,)*K with Q >= 1, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise BadShape("pmf contains non-finite entries")
    if np.any(arr < 0):
        raise NegativeEntry(f"negative probability {arr.min()}")
    total = arr.sum()
    err = abs(total - 1.0)
    if err > RENORM_TOL:
        raise NotNormalized(f"pmf sums to {total!r}")
    if err > SUM_TOL:
        arr = arr / total
    return arr


@dataclass(frozen=True, eq=False)
class JointChannelPmf:
    pmf: np.ndarray

    def __post_init__(self):
        arr = validate(self.pmf)
        arr.setflags(write=False)
        object.__setattr__(self, "pmf", arr)

    @property
    def num_users(self) -> int:
        return self.pmf.ndim

    @property
    def num_layers(self) -> int:
        return self.pmf.shape[0] - 1

    def __repr__(self):
        return f"JointChannelPmf(users={self.num_users}, layers={self.num_layers})"

    # tail probabilities -------------------------------------------------

    def _check_user(self, u: int):
        if not 1 <= u <= self.num_users:
            raise IndexOutOfRange(f"user {u} not in 1..{self.num_users}")

    def _check_layer(self, q: int):
        if not 0 <= q <= self.num_layers:
            raise IndexOutOfRange(f"layer {q} not in 0..{self.num_layers}")

    def marginal(self, u: int) -> np.ndarray:
        """Pr[N_u = n] for n = 0..Q."""
        self._check_user(u)
        axes = tuple(i for i in range(self.num_users) if i != u - 1)
        return self.pmf.sum(axis=axes)

    def marginal_tail(self, u: int) -> np.ndarray:
        """Pr[N_u >= q] for q = 0..Q."""
        return _tail(self.marginal(u))

    def max_distribution(self, users) -> np.ndarray:
        """Pr[max_{u in users} N_u = n] for n = 0..Q."""
        users = _user_tuple(users)
        if not users:
            raise EmptySubset("user subset must be non-empty")
        for u in users:
            self._check_user(u)
        grids = np.indices(self.pmf.shape)
        level = np.max(np.stack([grids[u - 1] for u in users]), axis=0)
        return np.bincount(level.ravel(), weights=self.pmf.ravel(),
                           minlength=self.num_layers + 1)

    def max_tail(self, users) -> np.ndarray:
        return _tail(self.max_distribution(users))

    def marginal_geq(self, u: int, q: int) -> float:
        self._check_user(u)
        self._check_layer(q)
        return float(self.marginal_tail(u)[q])

    def subset_max_geq(self, users, q: int) -> float:
        self._check_layer(q)
        return float(self.max_tail(users)[q])

    def expected_layers(self, u: int) -> float:
        return float(self.marginal_tail(u)[1:].sum())

    def expected_max(self, users) -> float:
        return float(self.max_tail(users)[1:].sum())

    # summaries ----------------------------------------------------------

    def summary(self) -> "ChannelSummary":
        """Tail statistics of the K=2 channel used by the rate-region code."""
        if self.num_users != 2:
            raise BadShape("summaries are defined for two users")
        tails = np.stack([self.marginal_tail(1), self.marginal_tail(2)])
        return ChannelSummary(tails, self.max_tail((1, 2)))

    def degraded_summary(self, perm) -> "ChannelSummary":
        """Tails of the enhanced counts max(N_perm[k], ..., N_perm[K]).

        The k-th user in the permutation is given every layer that any later
        user in the chain received, which makes the channel physically
        degraded along the chain.
        """
        perm = tuple(int(p) for p in perm)
        if sorted(perm) != list(range(1, self.num_users + 1)):
            raise BadPermutation(f"{perm} is not a permutation of 1..{self.num_users}")
        tails = np.zeros((self.num_users, self.num_layers + 1))
        for k, u in enumerate(perm):
            tails[u - 1] = self.max_tail(perm[k:])
        return ChannelSummary(tails, self.max_tail(perm))

    # sampling -----------------------------------------------------------

    def sample(self, rng: np.random.Generator) -> tuple:
        return tuple(int(v) for v in self.sample_many(rng, 1)[0])

    def sample_many(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Draw n i.i.d. outcomes by inverse CDF; returns an (n, K) int array."""
        cdf = np.cumsum(self.pmf.ravel())
        cdf[-1] = 1.0
        flat = np.searchsorted(cdf, rng.random(n), side="right")
        flat = np.minimum(flat, cdf.size - 1)
        return np.stack(np.unravel_index(flat, self.pmf.shape), axis=1)

    # io -----------------------------------------------------------------

    def to_json(self) -> dict:
        return {"users": self.num_users, "layers": self.num_layers,
                "pmf": self.pmf.tolist()}


@dataclass(frozen=True, eq=False)
class ChannelSummary:
    """Layer tails of a channel, one row per user.

    marg_geq[u-1][q] = Pr[N_u >= q] and max_geq[q] = Pr[max_u N_u >= q],
    both for q = 0..Q.  The a, b, c shorthands assume two users.
    """

    marg_geq: np.ndarray
    max_geq: np.ndarray

    def __post_init__(self):
        marg = np.asarray(self.marg_geq, dtype=float)
        mx = np.asarray(self.max_geq, dtype=float)
        if marg.ndim != 2 or marg.shape[0] < 1 or mx.shape != (marg.shape[1],):
            raise BadShape("summary needs user tails and one max tail of equal length")
        object.__setattr__(self, "marg_geq", marg)
        object.__setattr__(self, "max_geq", mx)

    @property
    def num_layers(self) -> int:
        return self.max_geq.size - 1

    @property
    def a(self) -> np.ndarray:
        """Pr[N_1 >= q] for q = 1..Q."""
        return self.marg_geq[0, 1:]

    @property
    def b(self) -> np.ndarray:
        """Pr[N_2 >= q] for q = 1..Q."""
        return self.marg_geq[1, 1:]

    @property
    def c(self) -> np.ndarray:
        """Pr[max(N_1, N_2) >= q] for q = 1..Q."""
        return self.max_geq[1:]

    @property
    def mean(self) -> np.ndarray:
        return self.marg_geq[:, 1:].sum(axis=1)

    @property
    def mean_max(self) -> float:
        return float(self.max_geq[1:].sum())


def _tail(dist: np.ndarray) -> np.ndarray:
    tail = np.cumsum(dist[::-1])[::-1].copy()
    tail[0] = 1.0
    return np.minimum(tail, 1.0)


def _user_tuple(users) -> tuple:
    if isinstance(users, (int, np.integer)):
        return (int(users),)
    return tuple(int(u) for u in users)


def seed_stream(seed) -> np.random.Generator:
    """Counter-based generator for reproducible, independently seeded streams."""
    return np.random.Generator(np.random.Philox(seed))


def point_mass(layers: int, outcome) -> JointChannelPmf:
    arr = np.zeros((layers + 1,) * len(outcome))
    arr[tuple(outcome)] = 1.0
    return JointChannelPmf(arr)


def from_marginal_independent(*marginals) -> JointChannelPmf:
    """Channel with independent users and the given per-user distributions."""
    arr = np.asarray(marginals[0], dtype=float)
    for m in marginals[1:]:
        arr = np.multiply.outer(arr, np.asarray(m, dtype=float))
    return JointChannelPmf(arr)


def random_channel(rng: np.random.Generator, layers: int, users: int = 2,
                   sparsity: float = 0.0) -> JointChannelPmf:
    """Dirichlet-distributed pmf, optionally with some entries zeroed."""
    shape = (layers + 1,) * users
    arr = rng.dirichlet(np.ones(int(np.prod(shape)))).reshape(shape)
    if sparsity > 0:
        mask = rng.random(shape) < sparsity
        if mask.all():
            mask.flat[0] = False
        arr = np.where(mask, 0.0, arr)
        arr = arr / arr.sum()
    return JointChannelPmf(arr)


def load_channel(path) -> JointChannelPmf:
    """Read a channel from JSON ({users, layers, pmf}) or a 2-user CSV table."""
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".csv":
        return parse_csv_table(text)
    return parse_json(text)


def parse_json(text: str) -> JointChannelPmf:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise BadShape(f"invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(doc, dict) or "pmf" not in doc:
        raise BadShape("channel JSON needs a 'pmf' field")
    arr = np.asarray(doc["pmf"], dtype=float)
    users = doc.get("users")
    layers = doc.get("layers")
    if users is not None and layers is not None:
        shape = (int(layers) + 1,) * int(users)
        if arr.size != int(np.prod(shape)):
            raise BadShape(f"pmf has {arr.size} entries, expected {int(np.prod(shape))}")
        arr = arr.reshape(shape)
    return JointChannelPmf(arr)


def parse_csv_table(text: str) -> JointChannelPmf:
    """Rows indexed by N_1, columns by N_2; a non-numeric header row is skipped."""
    rows = []
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        cells = [c.strip() for c in row if c.strip() != ""]
        if not cells:
            continue
        try:
            rows.append([float(c) for c in cells])
        except ValueError:
            if rows:
                raise BadShape(f"line {lineno}: non-numeric entry in {row}") from None
            continue
    if not rows or any(len(r) != len(rows) for r in rows):
        raise BadShape("CSV table must be square")
    return JointChannelPmf(np.array(rows))


def write_json(channel: JointChannelPmf, path):
    Path(path).write_text(json.dumps(channel.to_json(), indent=2))


def outcomes(channel: JointChannelPmf):
    """Iterate (outcome tuple, probability) over the support."""
    for idx in itertools.product(range(channel.num_layers + 1), repeat=channel.num_users):
        p = channel.pmf[idx]
        if p > 0:
            yield idx, float(p)
