"""Epoch-based simulation of the two-phase protocol under random arrivals.

Packets arriving during an epoch wait in their layer's queue until the
epoch ends; the next epoch then serves exactly that batch.  Within an epoch
each layer sends its queue first-come-first-served; a packet heard only by
the other user moves to that owner's overheard queue, and overheard queues
are drained with coded packets (both non-empty) or plain retransmissions
(only one non-empty) on layers whose own queue is empty.

Two engines share one set of pre-drawn channel states and arrivals: a
compiled counter-only kernel for long horizons and a Python engine that can
also carry real random linear combinations and verify decoding per epoch.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from numba import njit

from .channel import JointChannelPmf, seed_stream
from .errors import HorizonTooShort, NonTermination
from .gf import GaloisField
from .regions import load_factor, simplex_grid, split_load

MIN_VERDICT_HORIZON = 100_000
SLOPE_TOL = 1e-3
BACKLOG_FACTOR = 50.0
EPOCH_CAP_FACTOR = 100


@dataclass(frozen=True)
class ArrivalSpec:
    """Per-(user, layer) mean arrivals per slot; kind is "bernoulli" or "poisson"."""

    rates: np.ndarray
    kind: str = "bernoulli"

    def __post_init__(self):
        r = np.asarray(self.rates, dtype=float)
        if r.ndim != 2 or r.shape[0] != 2:
            raise ValueError("rates must be shaped (2, Q)")
        if np.any(r < 0):
            raise ValueError("arrival rates must be non-negative")
        if self.kind not in ("bernoulli", "poisson"):
            raise ValueError(f"unknown arrival kind {self.kind!r}")
        if self.kind == "bernoulli" and np.any(r > 1):
            raise ValueError("Bernoulli arrivals need every per-layer rate <= 1")
        object.__setattr__(self, "rates", r)

    @property
    def user_rates(self) -> np.ndarray:
        return self.rates.sum(axis=1)

    @property
    def total_rate(self) -> float:
        return float(self.rates.sum())

    def draw(self, rng: np.random.Generator, horizon: int) -> np.ndarray:
        """Arrival counts shaped (horizon, 2, Q)."""
        if self.kind == "bernoulli":
            return (rng.random((horizon,) + self.rates.shape) < self.rates).astype(np.int32)
        return rng.poisson(self.rates, size=(horizon,) + self.rates.shape).astype(np.int32)

    def to_json(self) -> dict:
        return {"rates": self.rates.tolist(), "kind": self.kind}


@dataclass
class StabilityTrace:
    total: np.ndarray
    epoch_lengths: np.ndarray
    epoch_packets: np.ndarray
    arrival_rate: float
    detail: np.ndarray | None = None
    arrivals: int = 0
    delivered: int = 0
    overshoot_slots: int = 0
    decode_failures: int = 0
    num_layers: int = 0

    @property
    def horizon(self) -> int:
        return int(self.total.size)


def _tails(channel: JointChannelPmf):
    s = channel.summary()
    return (np.ascontiguousarray(s.a), np.ascontiguousarray(s.b),
            np.ascontiguousarray(s.c), np.ascontiguousarray(s.mean))


@njit(cache=True)
def _epoch_time(k, a, b, c, mean):
    """Expected duration of a batch: the largest of the per-layer and per-user loads."""
    Q = c.size
    t = 0.0
    l1 = 0.0
    l2 = 0.0
    for q in range(Q):
        load = k[0, q] + k[1, q]
        if load > 0:
            if c[q] <= 0:
                return np.inf
            t = max(t, load / c[q])
            l1 += k[0, q] + k[1, q] * a[q] / c[q]
            l2 += k[1, q] + k[0, q] * b[q] / c[q]
    if l1 > 0:
        t = max(t, l1 / mean[0] if mean[0] > 0 else np.inf)
    if l2 > 0:
        t = max(t, l2 / mean[1] if mean[1] > 0 else np.inf)
    return t


@njit(cache=True)
def _epoch_kernel(states, arrivals, a, b, c, mean, want_detail, total, detail,
                  epoch_len, epoch_k):
    """Counter-only epoch engine; returns (epochs, delivered, error slot or -1)."""
    H = states.shape[0]
    Q = c.size
    cap_q = 16
    owners = np.empty((Q, cap_q), dtype=np.int8)
    qlen = np.zeros(Q, dtype=np.int64)
    head = np.zeros(Q, dtype=np.int64)
    ov = np.zeros(2, dtype=np.int64)
    staged = np.zeros((2, Q), dtype=np.int64)
    batch = np.zeros((2, Q), dtype=np.float64)
    epoch = 0
    epoch_start = 0
    stage_start = 0
    cap = 100
    delivered = 0
    in_service = 0
    for t in range(H):
        for u in range(2):
            for q in range(Q):
                staged[u, q] += arrivals[t, u, q]
        n1 = states[t, 0]
        n2 = states[t, 1]
        # retransmissions and coded packets act on the overheard queues as of
        # the start of the slot
        both = ov[0] > 0 and ov[1] > 0
        for q in range(Q):
            if head[q] < qlen[q]:
                continue
            if both:
                if n1 > q and ov[0] > 0:
                    ov[0] -= 1
                    delivered += 1
                    in_service -= 1
                if n2 > q and ov[1] > 0:
                    ov[1] -= 1
                    delivered += 1
                    in_service -= 1
        if not both:
            for u in range(2):
                if ov[u] == 0:
                    continue
                nu = n1 if u == 0 else n2
                budget = ov[u]
                for q in range(Q):
                    if head[q] < qlen[q] or budget == 0:
                        continue
                    budget -= 1
                    if nu > q:
                        ov[u] -= 1
                        delivered += 1
                        in_service -= 1
        for q in range(Q):
            if head[q] >= qlen[q]:
                continue
            u = owners[q, head[q]]
            nu = n1 if u == 0 else n2
            nv = n2 if u == 0 else n1
            if nu > q:
                head[q] += 1
                delivered += 1
                in_service -= 1
            elif nv > q:
                head[q] += 1
                ov[u] += 1
        if want_detail:
            for q in range(Q):
                detail[t, q] = qlen[q] - head[q] + staged[0, q] + staged[1, q]
            detail[t, Q] = ov[0]
            detail[t, Q + 1] = ov[1]
            detail[t, Q + 2] = epoch
        s = 0
        for u in range(2):
            for q in range(Q):
                s += staged[u, q]
        total[t] = in_service + s
        if t - epoch_start + 1 > cap:
            return epoch, delivered, t
        if in_service == 0:
            # close the epoch, then admit everything staged so far
            epoch_len[epoch] = t + 1 - epoch_start
            epoch += 1
            epoch_start = t + 1
            need = 0
            for q in range(Q):
                need = max(need, staged[0, q] + staged[1, q])
            if need > cap_q:
                while cap_q < need:
                    cap_q *= 2
                owners = np.empty((Q, cap_q), dtype=np.int8)
            for q in range(Q):
                qlen[q] = 0
                head[q] = 0
            for s_t in range(stage_start, t + 1):
                for q in range(Q):
                    for u in range(2):
                        for _ in range(arrivals[s_t, u, q]):
                            owners[q, qlen[q]] = u
                            qlen[q] += 1
            stage_start = t + 1
            for u in range(2):
                for q in range(Q):
                    epoch_k[epoch, u] += staged[u, q]
                    batch[u, q] = staged[u, q]
                    in_service += staged[u, q]
                    staged[u, q] = 0
            et = _epoch_time(batch, a, b, c, mean)
            if not np.isfinite(et):
                return epoch, delivered, t
            cap = int(EPOCH_CAP_FACTOR * et) + 100
    if epoch_start < H:
        epoch_len[epoch] = H - epoch_start
        epoch += 1
    return epoch, delivered, -1


def draw_inputs(channel: JointChannelPmf, arrivals: ArrivalSpec, horizon: int, seed):
    """Channel states (horizon, 2) and arrival counts (horizon, 2, Q) for one run."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    ch_ss, arr_ss, coef_ss = ss.spawn(3)
    states = channel.sample_many(seed_stream(ch_ss), horizon).astype(np.int64)
    arr = arrivals.draw(seed_stream(arr_ss), horizon)
    return states, arr, coef_ss


def run_epochs(channel: JointChannelPmf, arrivals: ArrivalSpec, horizon: int,
               field: GaloisField | None = None, seed=0, detail: bool = False,
               engine: str = "auto") -> StabilityTrace:
    """Simulate the epoch protocol for a number of slots.

    ``engine`` is "kernel" (compiled, counters only), "python" (reference
    engine, required for real coding) or "auto".
    """
    if horizon < 1:
        raise ValueError("horizon must be at least one slot")
    if channel.num_users != 2:
        raise ValueError("the protocol is defined for two users")
    Q = channel.num_layers
    if arrivals.rates.shape != (2, Q):
        raise ValueError(f"arrival rates must be shaped (2, {Q})")
    states, arr, coef_ss = draw_inputs(channel, arrivals, horizon, seed)
    return replay_epochs(channel, states, arr, field=field, coef_seed=coef_ss, detail=detail,
                         engine=engine, arrival_rate=arrivals.total_rate)


def replay_epochs(channel: JointChannelPmf, states, arrivals, field: GaloisField | None = None,
                  coef_seed=0, detail: bool = False, engine: str = "auto",
                  arrival_rate: float | None = None) -> StabilityTrace:
    """Run the epoch protocol on given channel states (H, 2) and arrival counts (H, 2, Q)."""
    Q = channel.num_layers
    states = np.ascontiguousarray(states, dtype=np.int64)
    arr = np.ascontiguousarray(arrivals, dtype=np.int32)
    H = states.shape[0]
    if states.shape != (H, 2) or arr.shape != (H, 2, Q):
        raise ValueError(f"need states shaped (H, 2) and arrivals shaped (H, 2, {Q})")
    if arrival_rate is None:
        arrival_rate = float(arr.sum()) / max(H, 1)
    if engine == "auto":
        engine = "kernel" if field is None else "python"
    if engine == "kernel" and field is not None:
        raise ValueError("the compiled engine does not carry coefficients")
    a, b, c, mean = _tails(channel)
    if engine == "kernel":
        total = np.zeros(H, dtype=np.int64)
        det = np.zeros((H if detail else 1, Q + 3), dtype=np.int64)
        epoch_len = np.zeros(H + 1, dtype=np.int64)
        epoch_k = np.zeros((H + 2, 2), dtype=np.int64)
        epochs, delivered, err = _epoch_kernel(states, arr, a, b, c, mean, detail, total, det,
                                               epoch_len, epoch_k)
        if err >= 0:
            raise NonTermination(f"epoch {epochs} exceeded its slot cap at slot {err}")
        return StabilityTrace(total=total, epoch_lengths=epoch_len[:epochs].copy(),
                              epoch_packets=epoch_k[:epochs].copy(),
                              arrival_rate=arrival_rate,
                              detail=det if detail else None,
                              arrivals=int(arr.sum()), delivered=int(delivered), num_layers=Q)
    if engine != "python":
        raise ValueError(f"unknown engine {engine!r}")
    return _run_python(states, arr, a, b, c, mean, field, seed_stream(coef_seed), detail,
                       arrival_rate)


@dataclass
class _EpochCoding:
    """Coefficient rows of one epoch, for the Python engine."""

    field: GaloisField
    rng: np.random.Generator
    pools: list = dc_field(default_factory=lambda: [[], []])
    rows: list = dc_field(default_factory=lambda: [[], []])

    def coded(self):
        ids = self.pools[0] + self.pools[1]
        return (np.array(ids, dtype=np.int64), self.field.random(len(ids), self.rng))

    def unit(self, pid):
        return (np.array([pid], dtype=np.int64), np.ones(1, dtype=self.field.dtype))

    def matrix(self, u, rows) -> np.ndarray:
        cols = {pid: j for j, pid in enumerate(self.pools[u])}
        M = np.zeros((len(rows), len(cols)), dtype=self.field.dtype)
        for r, (ids, coefs) in enumerate(rows):
            for pid, cf in zip(ids.tolist(), coefs.tolist()):
                j = cols.get(pid)
                if j is not None:
                    M[r, j] = cf
        return M

    def deficient(self, u) -> bool:
        if not self.pools[u]:
            return False
        return self.field.rank(self.matrix(u, self.rows[u])) < len(self.pools[u])

    def innovative(self, u, count) -> list:
        """Up to count overheard packets whose plain copies are jointly new to user u."""
        rows = list(self.rows[u])
        rank = self.field.rank(self.matrix(u, rows)) if rows else 0
        picked = []
        for pid in self.pools[u]:
            if len(picked) == count:
                break
            trial = rows + [self.unit(pid)]
            r = self.field.rank(self.matrix(u, trial))
            if r > rank:
                rows, rank = trial, r
                picked.append(pid)
        return picked


def _run_python(states, arr, a, b, c, mean, field, coef_rng, want_detail, rate):
    H = states.shape[0]
    Q = c.size
    total = np.zeros(H, dtype=np.int64)
    detail = np.zeros((H, Q + 3), dtype=np.int64) if want_detail else None
    queues = [[] for _ in range(Q)]   # (packet id, owner) in FCFS order
    heads = [0] * Q
    ov = [0, 0]
    staged = [[0] * Q for _ in range(2)]
    staged_ids = [[] for _ in range(Q)]
    epoch_len, epoch_k = [], [[0, 0]]
    epoch, epoch_start = 0, 0
    cap = 100
    delivered = 0
    in_service = 0
    next_id = 0
    coding = _EpochCoding(field, coef_rng) if field is not None else None
    overshoot = 0
    failures = 0
    extra = False
    for t in range(H):
        for u in range(2):
            for q in range(Q):
                for _ in range(int(arr[t, u, q])):
                    staged[u][q] += 1
        for q in range(Q):
            for u in range(2):
                for _ in range(int(arr[t, u, q])):
                    staged_ids[q].append((next_id, u))
                    next_id += 1
        n = (int(states[t, 0]), int(states[t, 1]))
        if extra:
            # epoch counters are done but a receiver is rank deficient
            overshoot += 1
            for q in range(Q):
                row = coding.coded()
                for u in range(2):
                    if n[u] > q:
                        coding.rows[u].append(row)
        else:
            both = ov[0] > 0 and ov[1] > 0
            for q in range(Q):
                if heads[q] < len(queues[q]) or not both:
                    continue
                row = coding.coded() if coding else None
                for u in range(2):
                    if n[u] > q and ov[u] > 0:
                        ov[u] -= 1
                        delivered += 1
                        in_service -= 1
                        if coding:
                            coding.rows[u].append(row)
            if not both:
                for u in range(2):
                    if ov[u] == 0:
                        continue
                    budget = ov[u]
                    picks = coding.innovative(u, budget) if coding else None
                    sent = 0
                    for q in range(Q):
                        if heads[q] < len(queues[q]) or budget == 0:
                            continue
                        budget -= 1
                        if coding:
                            pid = picks[sent % len(picks)] if picks else coding.pools[u][0]
                        sent += 1
                        if n[u] > q:
                            ov[u] -= 1
                            delivered += 1
                            in_service -= 1
                            if coding:
                                coding.rows[u].append(coding.unit(pid))
            for q in range(Q):
                if heads[q] >= len(queues[q]):
                    continue
                pid, u = queues[q][heads[q]]
                if n[u] > q:
                    heads[q] += 1
                    delivered += 1
                    in_service -= 1
                elif n[1 - u] > q:
                    heads[q] += 1
                    ov[u] += 1
                    if coding:
                        coding.pools[u].append(pid)
        if want_detail:
            for q in range(Q):
                detail[t, q] = len(queues[q]) - heads[q] + staged[0][q] + staged[1][q]
            detail[t, Q] = ov[0]
            detail[t, Q + 1] = ov[1]
            detail[t, Q + 2] = epoch
        total[t] = in_service + sum(staged[0]) + sum(staged[1])
        if t - epoch_start + 1 > cap:
            raise NonTermination(f"epoch {epoch} exceeded its slot cap at slot {t}")
        if in_service == 0:
            if coding is not None:
                short = [u for u in range(2) if coding.deficient(u)]
                if short and not extra:
                    failures += 1
                extra = bool(short)
                if extra:
                    continue
            epoch_len.append(t + 1 - epoch_start)
            epoch += 1
            epoch_start = t + 1
            queues = staged_ids
            staged_ids = [[] for _ in range(Q)]
            heads = [0] * Q
            ov = [0, 0]
            batch = np.array(staged, dtype=np.float64)
            epoch_k.append([sum(staged[0]), sum(staged[1])])
            in_service = int(batch.sum())
            staged = [[0] * Q for _ in range(2)]
            if coding is not None:
                coding = _EpochCoding(field, coef_rng)
            et = _epoch_time.py_func(batch, a, b, c, mean)
            if not math.isfinite(et):
                raise NonTermination(f"epoch {epoch} holds packets no receiver can get")
            cap = int(EPOCH_CAP_FACTOR * et) + 100
    if epoch_start < H:
        epoch_len.append(H - epoch_start)
    epoch_packets = np.array(epoch_k[:len(epoch_len)], dtype=np.int64).reshape(-1, 2)
    return StabilityTrace(total=total, epoch_lengths=np.array(epoch_len, dtype=np.int64),
                          epoch_packets=epoch_packets, arrival_rate=rate, detail=detail,
                          arrivals=int(arr.sum()), delivered=int(delivered),
                          overshoot_slots=overshoot, decode_failures=failures, num_layers=Q)


# verdicts ----------------------------------------------------------------------


@dataclass(frozen=True)
class Verdict:
    stable: bool
    slope: float
    confidence: float
    max_backlog: float
    backlog_cap: float

    def to_json(self) -> dict:
        return {"stable": self.stable, "slope": self.slope, "confidence": self.confidence,
                "max_backlog": self.max_backlog, "backlog_cap": self.backlog_cap}


def stability_verdict(trace: StabilityTrace, slope_tol: float = SLOPE_TOL,
                      backlog_factor: float = BACKLOG_FACTOR,
                      min_horizon: int = MIN_VERDICT_HORIZON) -> Verdict:
    """Operational stability test on a queue-length trace.

    The least-squares slope of the total backlog over the second half of the
    run, divided by the mean arrival rate, must stay below slope_tol, and
    the largest backlog must stay below backlog_factor times the mean
    backlog of the first tenth.  confidence is the normal probability that
    the fitted slope lies on the reported side of slope_tol, from the
    ordinary least-squares standard error (optimistic for correlated data).
    """
    x = np.asarray(trace.total, dtype=float)
    H = x.size
    if H < min_horizon:
        raise HorizonTooShort(f"{H} slots < {min_horizon}")
    tail = x[H // 2:]
    tt = np.arange(tail.size, dtype=float)
    tt -= tt.mean()
    denom = float((tt * tt).sum())
    slope = float((tt * (tail - tail.mean())).sum() / denom)
    resid = tail - tail.mean() - slope * tt
    se = math.sqrt(max(float((resid * resid).sum()) / max(tail.size - 2, 1), 0.0) / denom)
    rate = trace.arrival_rate if trace.arrival_rate > 0 else 1.0
    slope_n = slope / rate
    se_n = se / rate
    head = x[: max(H // 10, 1)]
    cap = backlog_factor * float(head.mean())
    peak = float(x.max())
    stable = slope_n <= slope_tol and peak <= cap
    if se_n > 0:
        confidence = 0.5 * (1 + math.erf(abs(slope_tol - slope_n) / (se_n * math.sqrt(2))))
    else:
        confidence = 1.0
    return Verdict(bool(stable), slope_n, confidence, peak, cap)


# load sweeps ---------------------------------------------------------------------


def find_split(channel: JointChannelPmf, rates, resolution: int = 64) -> tuple:
    """Per-layer split of (lambda_1, lambda_2) with the smallest max-load on a simplex grid.

    Returns (split shaped (2, Q), max-load); the pair lies inside the
    stability inner region iff the max-load is below one.
    """
    s = channel.summary()
    Q = s.num_layers
    lam = np.asarray(rates, dtype=float)
    fracs = simplex_grid(Q, resolution)
    best = (None, math.inf)
    for f1 in (fracs if lam[0] > 0 else fracs[:1]):
        for f2 in (fracs if lam[1] > 0 else fracs[:1]):
            split = np.stack([lam[0] * f1, lam[1] * f2])
            v = split_load(s, split)
            if v < best[1]:
                best = (split, v)
    return best


def boundary_radius(channel: JointChannelPmf, direction) -> float:
    """Largest r with r * direction on the closure of the stability inner region."""
    d = np.asarray(direction, dtype=float)
    d = d / d.sum()
    v, _ = load_factor(channel.summary(), d)
    return 1.0 / v if v > 0 else math.inf


@dataclass
class LoadResult:
    load: float
    rates: tuple
    split: np.ndarray
    max_load: float
    feasible: bool
    verdicts: list
    seeds: list

    @property
    def stable_fraction(self) -> float:
        return sum(v.stable for v in self.verdicts) / len(self.verdicts) if self.verdicts else float("nan")

    def to_json(self) -> dict:
        return {"load": self.load, "rates": list(self.rates), "split": self.split.tolist(),
                "max_load": self.max_load, "feasible": self.feasible,
                "stable_fraction": self.stable_fraction,
                "verdicts": [dict(v.to_json(), seed=s) for v, s in zip(self.verdicts, self.seeds)]}


def sweep_load(channel: JointChannelPmf, direction, loads, horizon: int = 1_000_000,
               seeds=range(10), resolution: int = 64, kind: str = "bernoulli") -> list:
    """Simulate arrival rates along one direction at several radial loads.

    Load 1 is the boundary of the stability inner region along the
    direction.  Each load is split across layers by grid search and then
    simulated once per seed.
    """
    r_star = boundary_radius(channel, direction)
    d = np.asarray(direction, dtype=float)
    d = d / d.sum()
    out = []
    for load in loads:
        lam = load * r_star * d
        split, v = find_split(channel, lam, resolution)
        spec = ArrivalSpec(split, kind)
        verdicts = []
        seed_list = list(seeds)
        for sd in seed_list:
            trace = run_epochs(channel, spec, horizon, seed=sd)
            verdicts.append(stability_verdict(trace))
        out.append(LoadResult(float(load), tuple(float(x) for x in lam), split, float(v),
                              bool(v < 1), verdicts, seed_list))
    return out


# io ------------------------------------------------------------------------------


def write_trace_csv(trace: StabilityTrace, path, every: int = 1):
    if trace.detail is None:
        raise ValueError("run with detail=True to export per-queue traces")
    Q = trace.num_layers
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["slot"] + [f"Q0_{q + 1}" for q in range(Q)] + ["Q1", "Q2", "epoch"])
        for t in range(0, trace.horizon, every):
            w.writerow([t] + trace.detail[t].tolist())


def write_verdict_json(verdict: Verdict, path, extra: dict | None = None):
    doc = verdict.to_json()
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
