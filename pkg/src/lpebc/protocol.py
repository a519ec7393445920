"""Slot-level simulation of the two-phase network-coded broadcast protocol.

Phase 1 sends one uncoded packet per layer and slot.  A packet that only the
other user receives joins the overheard pool and is later recovered through
random linear combinations of the whole pool, which the finished layers
carry while other layers are still uncoded and every layer carries once all
uncoded queues are empty.

With ``field=None`` the simulator only tracks counters, treating every coded
reception by a user that still needs packets as innovative.  With a
:class:`~lpebc.gf.GaloisField` it draws real coefficient rows, keeps them per
receiver, and checks decodability by Gaussian elimination at the end.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .channel import JointChannelPmf, seed_stream
from .errors import NonTermination, RankDeficient, UnderdeterminedSystem
from .gf import GaloisField
from .regions import subphase_backlog, two_phase_time

BLOCK = 4096
SLOT_CAP_FACTOR = 100


@dataclass(frozen=True)
class Packet:
    id: int
    owner: int
    layer: int
    payload: np.ndarray | None = None


@dataclass
class CodedRow:
    ids: np.ndarray
    coefs: np.ndarray
    payload: np.ndarray | None = None


@dataclass
class ReceiverState:
    user: int
    known: set = dc_field(default_factory=set)
    overheard: set = dc_field(default_factory=set)
    rows: list = dc_field(default_factory=list)
    unknown: list = dc_field(default_factory=list)


@dataclass
class RunStats:
    k: np.ndarray
    t_unc_q: list
    t_unc: int
    t_nc: int
    t: int
    success: tuple
    coded_received: tuple
    overheard: tuple
    overshoot: int = 0
    backlog_at_layer_end: list = dc_field(default_factory=list)
    backlog_at_phase_end: tuple = (0, 0)
    trace: list | None = None
    receivers: list | None = None
    ledger: list | None = None
    field: GaloisField | None = None

    @property
    def decoded(self) -> bool:
        return all(self.success)


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return seed_stream(seed)


def run_two_phase(channel: JointChannelPmf, k, field: GaloisField | None = None, seed=0,
                  mode: str = "remaining", coded_layers: str = "finished",
                  payload_len: int = 0, trace: bool = False,
                  check_invariants: bool = False) -> RunStats:
    """Run the backlogged protocol until both users can decode.

    k[u-1][q-1] packets of user u start on layer q.  ``mode`` selects how the
    user served on a layer is drawn each slot: "remaining" weighs users by
    their remaining uncoded packets, "initial" by the initial counts (a draw of
    an already-empty user wastes the layer for that slot).  ``coded_layers``
    is "finished" to send coded packets only on layers whose uncoded queues
    are empty, or "all" to send them on every layer as soon as any layer has
    finished and coded demand exists.
    """
    if mode not in ("remaining", "initial"):
        raise ValueError(f"unknown scheduling mode {mode!r}")
    if coded_layers not in ("finished", "all"):
        raise ValueError(f"unknown coded-layer rule {coded_layers!r}")
    if channel.num_users != 2:
        raise ValueError("the protocol is defined for two users")
    Q = channel.num_layers
    k = np.asarray(k, dtype=np.int64).reshape(2, Q)
    if np.any(k < 0):
        raise ValueError("packet counts must be non-negative")
    summary = channel.summary()
    analytic = two_phase_time(summary, k)  # raises UnreachableLayer
    cap = int(math.ceil(SLOT_CAP_FACTOR * analytic.t)) + 100
    rng = _rng(seed)
    coding = field is not None
    if payload_len and not coding:
        raise ValueError("payloads need a finite field")

    # ledger and queues
    ledger = []
    queues = [[[] for _ in range(Q)] for _ in range(2)]
    for u in range(2):
        for q in range(Q):
            for _ in range(int(k[u, q])):
                pid = len(ledger)
                payload = field.random(payload_len, rng) if payload_len else None
                ledger.append(Packet(pid, u + 1, q + 1, payload))
                queues[u][q].append(pid)
    for u in range(2):
        for q in range(Q):
            queues[u][q].reverse()  # pop() serves in id order

    k_unc = [[int(k[u, q]) for q in range(Q)] for u in range(2)]
    k_init = [[int(k[u, q]) for q in range(Q)] for u in range(2)]
    k_rem_uq = [[0] * Q for _ in range(2)]
    k_nc = [[0] * Q for _ in range(2)]
    k_rem = [0, 0]
    pool = []          # overheard packet ids, all layers
    pool_q = [0] * Q   # overheard count per layer
    rx = [ReceiverState(1), ReceiverState(2)]
    sent = set() if check_invariants else None

    t_unc_q = [0 if k_unc[0][q] + k_unc[1][q] == 0 else None for q in range(Q)]
    backlog_layers = [(0, 0, 0) for q in range(Q) if t_unc_q[q] == 0]
    rows_out = [] if trace else None

    t = 0
    states = np.empty((0, 2), dtype=np.int64)
    unif = np.empty((0, Q))
    pos = 0
    remaining_unc = int(k.sum())
    phase_end_backlog = None
    if remaining_unc == 0:
        phase_end_backlog = (0, 0)

    def draw_row():
        ids = np.fromiter(pool, dtype=np.int64, count=len(pool))
        coefs = field.random(ids.size, rng)
        pay = None
        if payload_len:
            pay = np.zeros(payload_len, dtype=field.dtype)
            for pid, cf in zip(ids, coefs):
                if cf:
                    pay ^= field.mul(ledger[pid].payload, int(cf))
        return CodedRow(ids, coefs, pay)

    while remaining_unc + k_rem[0] + k_rem[1] > 0:
        if t >= cap:
            raise NonTermination(f"no termination after {t} slots (analytic {analytic.t:.1f})")
        if pos == len(states):
            states = channel.sample_many(rng, BLOCK).tolist()
            unif = rng.random((BLOCK, Q)).tolist()
            pos = 0
        n1, n2 = states[pos]
        draws = unif[pos]
        pos += 1
        t += 1
        m = n1 if n1 > n2 else n2
        n = (n1, n2)
        demand = k_rem[0] + k_rem[1] > 0
        any_done = any(k_unc[0][q] + k_unc[1][q] == 0 for q in range(Q))
        all_coded = coded_layers == "all" and any_done and demand

        # coded layers first: their content is the pool at the start of the slot
        plan = []
        for q in range(Q):
            busy = k_unc[0][q] + k_unc[1][q] > 0
            if busy and not all_coded:
                plan.append("u")
            elif demand:
                plan.append("c")
            else:
                plan.append("")
        for q in range(Q):
            if plan[q] != "c":
                continue
            row = draw_row() if coding else None
            for u in range(2):
                if n[u] > q and k_rem[u] > 0:
                    k_rem[u] -= 1
                    k_nc[u][q] += 1
                    if coding:
                        rx[u].rows.append(row)
            if trace:
                rows_out.append(_trace_row(t, q, "coded", "1,2", n, k_unc, k_rem, pool_q))

        for q in range(Q):
            if plan[q] != "u":
                continue
            if mode == "remaining":
                p1 = k_unc[0][q] / (k_unc[0][q] + k_unc[1][q])
            else:
                p1 = k_init[0][q] / (k_init[0][q] + k_init[1][q])
            u = 0 if draws[q] < p1 else 1
            if trace:
                rows_out.append(_trace_row(t, q, "uncoded", str(u + 1), n, k_unc, k_rem, pool_q))
            if k_unc[u][q] == 0:
                continue
            if m <= q:
                continue
            pid = queues[u][q][-1]
            if sent is not None:
                sent.add(pid)
            if n[u] > q:
                queues[u][q].pop()
                k_unc[u][q] -= 1
                remaining_unc -= 1
                rx[u].known.add(pid)
            elif n[1 - u] > q:
                queues[u][q].pop()
                k_unc[u][q] -= 1
                remaining_unc -= 1
                pool.append(pid)
                pool_q[q] += 1
                k_rem_uq[u][q] += 1
                k_rem[u] += 1
                rx[1 - u].overheard.add(pid)
                rx[u].unknown.append(pid)
            if k_unc[0][q] + k_unc[1][q] == 0 and t_unc_q[q] is None:
                t_unc_q[q] = t
                backlog_layers.append((t, k_rem[0], k_rem[1]))
        if remaining_unc == 0 and phase_end_backlog is None:
            phase_end_backlog = (k_rem[0], k_rem[1])

        if check_invariants:
            _check_counters(k_unc, queues, pool_q, k_rem, k_nc, Q)

    t_unc = max((v for v in t_unc_q if v is not None), default=0)
    t_counters = t
    success = (True, True)
    overshoot = 0
    if coding:
        success = tuple(_full_rank(rx[u], field) for u in range(2))
        pending = [u for u in range(2) if not success[u]]
        while pending:
            if t - t_counters >= cap:
                raise NonTermination("receivers still rank deficient after the slot cap")
            n = tuple(int(v) for v in channel.sample(rng))
            t += 1
            for q in range(Q):
                row = draw_row()
                for u in pending:
                    if n[u] > q:
                        rx[u].rows.append(row)
            pending = [u for u in pending if not _full_rank(rx[u], field)]
        overshoot = t - t_counters

    if check_invariants:
        for u in range(2):
            assert rx[u].known <= sent and set(rx[u].unknown) <= sent

    return RunStats(
        k=k,
        t_unc_q=[int(v) for v in t_unc_q],
        t_unc=int(t_unc),
        t_nc=int(t - t_unc),
        t=int(t),
        success=success,
        coded_received=(sum(k_nc[0]), sum(k_nc[1])),
        overheard=(sum(k_rem_uq[0]), sum(k_rem_uq[1])),
        overshoot=overshoot,
        backlog_at_layer_end=backlog_layers,
        backlog_at_phase_end=phase_end_backlog if phase_end_backlog is not None else (0, 0),
        trace=rows_out,
        receivers=rx if coding else None,
        ledger=ledger,
        field=field,
    )


def _check_counters(k_unc, queues, pool_q, k_rem, k_nc, Q):
    for u in range(2):
        for q in range(Q):
            assert k_unc[u][q] == len(queues[u][q]), "uncoded counter out of sync"
    lhs = sum(pool_q)
    rhs = k_rem[0] + k_rem[1] + sum(k_nc[0]) + sum(k_nc[1])
    assert lhs == rhs, f"overheard pool {lhs} != backlog plus coded receptions {rhs}"


def _trace_row(t, q, kind, who, n, k_unc, k_rem, pool_q):
    return {
        "t": t, "layer": q + 1, "kind": kind, "A_q": who, "N1": n[0], "N2": n[1],
        "K_unc_1": k_unc[0][q], "K_unc_2": k_unc[1][q],
        "K_rem_1": k_rem[0], "K_rem_2": k_rem[1], "Q12": pool_q[q],
    }


TRACE_FIELDS = ["t", "layer", "kind", "A_q", "N1", "N2", "K_unc_1", "K_unc_2", "K_rem_1", "K_rem_2", "Q12"]


def write_trace(stats: RunStats, path):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=TRACE_FIELDS)
        w.writeheader()
        for row in stats.trace or []:
            w.writerow(row)


# decoding ------------------------------------------------------------------------


def _system(rx: ReceiverState, field: GaloisField):
    cols = {pid: i for i, pid in enumerate(rx.unknown)}
    M = np.zeros((len(rx.rows), len(cols)), dtype=field.dtype)
    for r, row in enumerate(rx.rows):
        for pid, cf in zip(row.ids.tolist(), row.coefs.tolist()):
            j = cols.get(pid)
            if j is not None:
                M[r, j] = cf
    return M


def _full_rank(rx: ReceiverState, field: GaloisField) -> bool:
    if not rx.unknown:
        return True
    if len(rx.rows) < len(rx.unknown):
        return False
    return field.rank(_system(rx, field)) == len(rx.unknown)


def receiver_decode(rx: ReceiverState, ledger, field: GaloisField) -> dict:
    """Recover a receiver's unknown packets from its coded rows.

    Packets the receiver already holds (its own direct receptions and the
    other user's overheard packets) are moved to the right-hand side.
    Returns {packet id: payload or None}; raises RankDeficient otherwise.
    """
    if not rx.unknown:
        return {}
    M = _system(rx, field)
    rank = field.rank(M) if M.size else 0
    if rank < len(rx.unknown):
        raise RankDeficient(rx.user, len(rx.unknown) - rank)
    with_payload = ledger and ledger[0].payload is not None
    if not with_payload:
        return {pid: None for pid in rx.unknown}
    L = ledger[0].payload.size
    unknown = set(rx.unknown)
    rhs = np.zeros((len(rx.rows), L), dtype=field.dtype)
    for r, row in enumerate(rx.rows):
        acc = row.payload.copy()
        for pid, cf in zip(row.ids.tolist(), row.coefs.tolist()):
            if pid in unknown or cf == 0:
                continue
            if pid not in rx.overheard and pid not in rx.known:
                raise RankDeficient(rx.user, 1)
            acc ^= field.mul(ledger[pid].payload, cf)
        rhs[r] = acc
    try:
        sol = field.solve(M, rhs)
    except UnderdeterminedSystem as exc:
        raise RankDeficient(rx.user, exc.unknowns - exc.rank) from exc
    return {pid: sol[i] for i, pid in enumerate(rx.unknown)}


def empirical_rate(stats: RunStats, k=None) -> tuple:
    k = stats.k if k is None else np.asarray(k)
    total = int(np.sum(k))
    if total == 0:
        raise ValueError("rate undefined without packets")
    if stats.t == 0:
        raise ZeroDivisionError("zero completion time with packets to send")
    return (float(np.sum(k[0]) / stats.t), float(np.sum(k[1]) / stats.t))


# concentration --------------------------------------------------------------------


@dataclass(frozen=True)
class ConcentrationRow:
    scale: int
    analytic_t: float
    mean_t: float
    time_dev: float
    backlog_dev: float
    layer_backlog_dev: tuple

    def to_json(self) -> dict:
        return {"scale": self.scale, "analytic_t": self.analytic_t, "mean_t": self.mean_t,
                "time_dev": self.time_dev, "backlog_dev": self.backlog_dev,
                "layer_backlog_dev": list(self.layer_backlog_dev)}


def scaled_allocation(shape, scale: int) -> np.ndarray:
    """Integer counts proportional to shape with the given total."""
    shape = np.asarray(shape, dtype=float)
    raw = shape / shape.sum() * scale
    k = np.floor(raw).astype(np.int64)
    short = int(scale - k.sum())
    if short > 0:
        order = np.argsort(-(raw - k), axis=None, kind="stable")[:short]
        k.flat[order] += 1
    return k


def proportional_allocation(channel: JointChannelPmf) -> np.ndarray:
    """Each user loads layer q in proportion to how often it receives that layer."""
    s = channel.summary()
    return s.marg_geq[:, 1:].copy()


def concentration_suite(channel: JointChannelPmf, shape, scales, replicates: int = 50,
                        seed=0, mode: str = "initial") -> list:
    """Deviation of simulated durations and coded backlogs from their expectations.

    For every scale the allocation is shape scaled to that many packets.
    Returns one row per scale with the mean of |T/t - 1| and of the relative
    backlog error at the end of the uncoded phase (users with a positive
    expected backlog only), plus the same error at each layer's end.
    """
    scales = list(scales)
    if scales != sorted(scales):
        raise ValueError("scales must be increasing")
    summary = channel.summary()
    seeds = np.random.SeedSequence(seed).spawn(len(scales))
    out = []
    for scale, ss in zip(scales, seeds):
        k = scaled_allocation(shape, scale)
        expect = two_phase_time(summary, k)
        layer_expect = subphase_backlog(summary, k)
        tdev, bdev = [], []
        ldev = [[] for _ in layer_expect]
        times = []
        for child in ss.spawn(replicates):
            st = run_two_phase(channel, k, None, seed_stream(child), mode=mode)
            times.append(st.t)
            tdev.append(abs(st.t / expect.t - 1.0) if expect.t > 0 else 0.0)
            for u in range(2):
                if expect.k_rem_u[u] > 0:
                    bdev.append(abs(st.backlog_at_phase_end[u] - expect.k_rem_u[u]) / expect.k_rem_u[u])
            ends = sorted(st.backlog_at_layer_end)
            for j, (_, e1, e2) in enumerate(layer_expect):
                if j < len(ends):
                    for u, e in enumerate((e1, e2)):
                        if e > 0:
                            ldev[j].append(abs(ends[j][1 + u] - e) / e)
        out.append(ConcentrationRow(
            scale=int(scale),
            analytic_t=float(expect.t),
            mean_t=float(np.mean(times)),
            time_dev=float(np.mean(tdev)),
            backlog_dev=float(np.mean(bdev)) if bdev else 0.0,
            layer_backlog_dev=tuple(float(np.mean(d)) if d else 0.0 for d in ldev),
        ))
    return out
