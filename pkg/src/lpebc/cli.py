"""Command-line front end.

Exit codes: 0 when every requested check passes, 1 when a check fails,
2 for usage errors, 3 for unreadable or invalid inputs, 4 when a
simulation cannot finish.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import regions as rg
from .channel import JointChannelPmf, load_channel
from .errors import LpebcError, NonTermination, ZeroTail
from .fixtures import FIXTURES, fixture
from .geometry import hausdorff, is_subset, write_region_csv, write_region_json
from .gf import GaloisField
from .protocol import run_two_phase, write_trace
from .regions import two_phase_time
from .reproduce import CORNER_TOL, PUBLISHED, reproduce
from .stability import (MIN_VERDICT_HORIZON, ArrivalSpec, find_split, run_epochs, stability_verdict, sweep_load,
                        write_trace_csv)

EXIT_OK = 0
EXIT_CHECK = 1
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_RUN = 4

REGION_NAMES = ("outer", "no-csit", "inner", "trivial", "stability", "fme")
ALL_REGIONS = REGION_NAMES[:-1]


class InputError(Exception):
    pass


class UsageError(Exception):
    pass


def resolve_channel(spec: str) -> JointChannelPmf:
    if spec.startswith("@"):
        try:
            return fixture(spec[1:])
        except KeyError as exc:
            raise InputError(exc.args[0]) from None
    path = Path(spec)
    if not path.is_file():
        raise InputError(f"channel file {spec} not found")
    try:
        return load_channel(path)
    except (LpebcError, ValueError) as exc:
        raise InputError(f"{spec}: {exc}") from None


def parse_matrix(text: str, rows: int = 2) -> np.ndarray:
    """'a,b;c,d' -> [[a, b], [c, d]]."""
    try:
        data = [[float(x) for x in row.split(",")] for row in text.split(";")]
    except ValueError:
        raise UsageError(f"cannot parse matrix {text!r}; use 'a,b;c,d'") from None
    if len(data) != rows or len({len(r) for r in data}) != 1:
        raise UsageError(f"matrix {text!r} must have {rows} rows of equal length")
    return np.array(data)


def parse_direction(text: str) -> tuple:
    try:
        a, b = (float(x) for x in text.split(":"))
    except ValueError:
        raise UsageError(f"direction {text!r} must look like 2:1") from None
    if a < 0 or b < 0 or a + b <= 0:
        raise UsageError("direction entries must be non-negative and not both zero")
    return (a / (a + b), b / (a + b))


def parse_floats(text: str) -> list:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"cannot parse number list {text!r}") from None


def out_dir(path) -> Path | None:
    if path is None:
        return None
    p = Path(path)
    if p.exists() and not p.is_dir():
        raise InputError(f"--out {path} is not a directory")
    p.mkdir(parents=True, exist_ok=True)
    return p


def dump_json(doc, path: Path):
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _seeds(seed: int, n: int) -> list:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(n)]


# subcommands ----------------------------------------------------------------------


def cmd_regions(args) -> int:
    which = _which(args.which)
    ch = resolve_channel(args.channel)
    out = out_dir(args.out)
    s = ch.summary()
    builders = {
        "outer": lambda: rg.outer_bound_region(s),
        "no-csit": lambda: rg.no_csit_capacity(s),
        "inner": lambda: rg.inner_bound_region(s, args.resolution),
        "trivial": lambda: rg.trivial_inner_region(s),
        "stability": lambda: rg.stability_inner_region(s),
        "fme": lambda: rg.fme_inner_region(s),
    }
    built = {}
    for name in which:
        try:
            built[name] = builders[name]()
        except (ZeroTail, ValueError) as exc:
            raise InputError(f"{name}: {exc}") from None
    summary = {"regions": {n: [[float(x), float(y)] for x, y in r.boundary_corners()]
                           for n, r in built.items()},
               "pairs": []}
    names = list(built)
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            summary["pairs"].append({
                "a": a, "b": b, "hausdorff": hausdorff(built[a], built[b]),
                "a_in_b": is_subset(built[a], built[b]), "b_in_a": is_subset(built[b], built[a]),
            })
    if out:
        for n, r in built.items():
            write_region_json(r, out / f"{n}.json")
            write_region_csv(r, out / f"{n}.csv")
        dump_json(summary, out / "summary.json")
    for n, pts in summary["regions"].items():
        print(f"{n:<10} " + " ".join(f"({x:.4f},{y:.4f})" for x, y in pts))
    for p in summary["pairs"]:
        print(f"{p['a']} vs {p['b']}: hausdorff={p['hausdorff']:.3e} "
              f"{p['a']}<={p['b']}:{p['a_in_b']} {p['b']}<={p['a']}:{p['b_in_a']}")
    return EXIT_OK


def _which(text: str) -> list:
    items = [w.strip() for w in (text or "").split(",") if w.strip()]
    if not items:
        raise UsageError("--which needs at least one region")
    if "all" in items:
        return list(ALL_REGIONS) + [w for w in items if w == "fme"]
    bad = [w for w in items if w not in REGION_NAMES]
    if bad:
        raise UsageError(f"unknown regions {bad}; choose from {', '.join(REGION_NAMES)} or all")
    return list(dict.fromkeys(items))


def cmd_check_optimality(args) -> int:
    ch = resolve_channel(args.channel)
    out = out_dir(args.out)
    try:
        report = rg.check_optimality(ch)
    except (ZeroTail, ValueError) as exc:
        raise InputError(str(exc)) from None
    doc = report.to_json()
    print(json.dumps(doc, indent=2))
    if out:
        dump_json(doc, out / "optimality.json")
    if args.expect is not None and report.verdict != (args.expect == "true"):
        print(f"FAIL  verdict {report.verdict} != expected {args.expect}")
        return EXIT_CHECK
    return EXIT_OK


def _run_config(args) -> dict:
    cfg = {}
    if args.config:
        p = Path(args.config)
        if not p.is_file():
            raise InputError(f"config file {args.config} not found")
        try:
            cfg = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise InputError(f"{args.config}: line {exc.lineno}: {exc.msg}") from None
        if not isinstance(cfg, dict):
            raise InputError(f"{args.config}: expected a JSON object")
    merged = {
        "channel": args.channel or cfg.get("channel"),
        "k": args.k if args.k is not None else cfg.get("k"),
        "field_m": args.field_m if args.field_m is not None else cfg.get("field_m", 0),
        "seed": args.seed if args.seed is not None else cfg.get("seed", 0),
        "replicates": args.replicates if args.replicates is not None else cfg.get("replicates", 1),
        "mode": args.mode or cfg.get("mode", "remaining"),
    }
    if merged["channel"] is None:
        raise UsageError("a channel is required (--channel or config)")
    if merged["k"] is None:
        raise UsageError("packet counts are required (--k or config)")
    if isinstance(merged["k"], str):
        merged["k"] = parse_matrix(merged["k"]).tolist()
    if merged["mode"] not in ("remaining", "initial"):
        raise UsageError(f"unknown mode {merged['mode']!r}")
    if int(merged["replicates"]) < 1:
        raise UsageError("--replicates must be at least 1")
    if not 0 <= int(merged["field_m"]) <= 16:
        raise UsageError("--field-m must be 0 (counting only) or 1..16")
    return merged


SIM_FIELDS = ["replicate", "seed", "t", "analytic_t", "t_unc", "t_nc", "decoded_1", "decoded_2",
              "coded_received_1", "coded_received_2", "overheard_1", "overheard_2", "overshoot"]


def cmd_simulate(args) -> int:
    cfg = _run_config(args)
    ch = resolve_channel(cfg["channel"])
    out = out_dir(args.out)
    k = np.asarray(cfg["k"], dtype=float)
    if k.shape != (2, ch.num_layers) or np.any(k < 0) or np.any(k != np.round(k)):
        raise InputError(f"k must be 2 x {ch.num_layers} non-negative integers")
    k = k.astype(np.int64)
    try:
        expect = two_phase_time(ch.summary(), k)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    gf = GaloisField(int(cfg["field_m"])) if int(cfg["field_m"]) else None
    rows = []
    for i, sd in enumerate(_seeds(int(cfg["seed"]), int(cfg["replicates"]))):
        st = run_two_phase(ch, k, gf, seed=sd, mode=cfg["mode"], trace=args.trace)
        rows.append({"replicate": i, "seed": sd, "t": st.t, "analytic_t": expect.t,
                     "t_unc": st.t_unc, "t_nc": st.t_nc,
                     "decoded_1": st.success[0], "decoded_2": st.success[1],
                     "coded_received_1": st.coded_received[0],
                     "coded_received_2": st.coded_received[1],
                     "overheard_1": st.overheard[0], "overheard_2": st.overheard[1],
                     "overshoot": st.overshoot})
        if args.trace and out:
            write_trace(st, out / f"trace_{i}.csv")
    mean_t = float(np.mean([r["t"] for r in rows]))
    rel = abs(mean_t / expect.t - 1.0) if expect.t > 0 else 0.0
    decoded = float(np.mean([r["decoded_1"] and r["decoded_2"] for r in rows]))
    summary = {"config": {**cfg, "k": k.tolist()}, "analytic_t": expect.t, "mean_t": mean_t,
               "relative_error": rel, "decode_rate": decoded, "tol": args.tol,
               "passed": rel <= args.tol}
    if out:
        with open(out / "runs.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=SIM_FIELDS)
            w.writeheader()
            w.writerows(rows)
        dump_json(summary, out / "summary.json")
    print(f"analytic t = {expect.t:.2f}  mean simulated t = {mean_t:.2f} over {len(rows)} runs")
    print(f"decode rate = {decoded:.3f}")
    status = "PASS" if summary["passed"] else "FAIL"
    print(f"{status}  |mean/analytic - 1| = {rel:.4f} (tol {args.tol})")
    return EXIT_OK if summary["passed"] else EXIT_CHECK


VERDICT_FIELDS = ["load", "seed", "stable", "slope", "confidence", "max_backlog", "backlog_cap"]


def cmd_stability(args) -> int:
    if args.replicates < 1:
        raise UsageError("--replicates must be at least 1")
    if (args.rates is None) == (args.direction is None):
        raise UsageError("give exactly one of --rates or --direction")
    if args.horizon < MIN_VERDICT_HORIZON:
        raise UsageError(f"--horizon must be at least {MIN_VERDICT_HORIZON} slots for a verdict")
    ch = resolve_channel(args.channel)
    if ch.num_users != 2:
        raise InputError("the protocol is defined for two users")
    out = out_dir(args.out)
    seeds = _seeds(args.seed, args.replicates)
    results = []
    if args.direction is not None:
        d = parse_direction(args.direction)
        loads = parse_floats(args.loads)
        if not loads:
            raise UsageError("--loads needs at least one value")
        try:
            sweep = sweep_load(ch, d, loads, args.horizon, seeds, args.resolution, args.arrivals)
        except NonTermination as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_RUN
        for res in sweep:
            results.append(res.to_json())
    else:
        lam = parse_matrix(args.rates)
        if lam.shape[1] == ch.num_layers:
            split = lam
        elif lam.shape[1] == 1:
            split, _ = find_split(ch, lam[:, 0], args.resolution)
        else:
            raise UsageError(f"--rates needs {ch.num_layers} columns per user (or one total)")
        try:
            spec = ArrivalSpec(split, args.arrivals)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        max_load = rg.split_load(ch.summary(), split)
        verdicts = []
        for i, sd in enumerate(seeds):
            try:
                trace = run_epochs(ch, spec, args.horizon, seed=sd, detail=args.trace)
            except NonTermination as exc:
                print(f"error: {exc}", file=sys.stderr)
                return EXIT_RUN
            if args.trace and out:
                write_trace_csv(trace, out / f"trace_{i}.csv")
            v = stability_verdict(trace)
            verdicts.append(dict(v.to_json(), seed=sd))
        results.append({"load": max_load, "rates": split.sum(axis=1).tolist(),
                        "split": split.tolist(), "max_load": max_load, "feasible": max_load < 1,
                        "stable_fraction": float(np.mean([v["stable"] for v in verdicts])),
                        "verdicts": verdicts})
    ok = True
    for res in results:
        # the boundary itself is a critical load; no verdict is expected there
        if res["load"] < 1 and res["max_load"] < 1:
            expect = True
        elif res["load"] > 1:
            expect = False
        else:
            expect = None
        frac = res["stable_fraction"]
        agree = frac if expect else 1 - frac
        passed = expect is None or agree >= args.tol
        res["expected_stable"] = expect
        res["passed"] = passed
        ok &= passed
        tag = "SKIP" if expect is None else ("PASS" if passed else "FAIL")
        print(f"{tag}  load={res['load']:.3f} max_load={res['max_load']:.4f} "
              f"stable on {frac:.0%} of {len(res['verdicts'])} runs")
    if out:
        with open(out / "verdicts.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=VERDICT_FIELDS)
            w.writeheader()
            for res in results:
                for v in res["verdicts"]:
                    w.writerow({"load": res["load"], **{f: v[f] for f in VERDICT_FIELDS[1:]}})
        dump_json({"horizon": args.horizon, "arrivals": args.arrivals, "results": results},
                  out / "stability.json")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_reproduce(args) -> int:
    out = out_dir(args.out)
    checks, built = reproduce(args.example, args.resolution, args.tol)
    for c in checks:
        print(c.line())
    if out:
        for n, r in built.items():
            write_region_json(r, out / f"{n}.json")
            write_region_csv(r, out / f"{n}.csv")
        dump_json({"example": args.example, "checks": [c.to_json() for c in checks]},
                  out / "report.json")
    failed = sum(not c.passed for c in checks)
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_CHECK


# parser ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    fixtures = ", ".join("@" + n for n in sorted(FIXTURES))
    chan_help = f"channel file (.json or .csv) or a fixture: {fixtures}"
    p = _Parser(prog="lpebc", description="Rate regions and protocol simulation for the "
                "two-user layered packet erasure broadcast channel with feedback.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("regions", help="compute rate regions and write JSON/CSV")
    r.add_argument("--channel", required=True, help=chan_help)
    r.add_argument("--which", default="all",
                   help=f"comma list of {', '.join(REGION_NAMES)}; 'all' is every region but fme")
    r.add_argument("--out", help="output directory")
    r.add_argument("--resolution", type=int, default=64, help="allocation grid for the inner region")
    r.set_defaults(func=cmd_regions)

    o = sub.add_parser("check-optimality", help="test the two-layer optimality conditions")
    o.add_argument("--channel", required=True, help=chan_help)
    o.add_argument("--out")
    o.add_argument("--expect", choices=("true", "false"), help="fail unless the verdict matches")
    o.set_defaults(func=cmd_check_optimality)

    s = sub.add_parser("simulate", help="run the backlogged two-phase protocol")
    s.add_argument("--config", help="JSON run config {channel, k, field_m, seed, replicates, mode}")
    s.add_argument("--channel", help=chan_help)
    s.add_argument("--k", help="packets per user and layer, e.g. '7000,0;0,5000'")
    s.add_argument("--field-m", type=int, help="GF(2^m) for real coding; 0 counts ranks ideally")
    s.add_argument("--seed", type=int)
    s.add_argument("--replicates", type=int)
    s.add_argument("--mode", choices=("remaining", "initial"))
    s.add_argument("--trace", action="store_true", help="write a per-slot CSV for each run")
    s.add_argument("--tol", type=float, default=0.02, help="relative tolerance on mean duration")
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    st = sub.add_parser("stability", help="simulate the epoch protocol under random arrivals")
    st.add_argument("--channel", required=True, help=chan_help)
    st.add_argument("--direction", help="rate ratio lambda_1:lambda_2, e.g. 2:1")
    st.add_argument("--loads", default="0.5,0.9,1.2", help="radial loads relative to the boundary")
    st.add_argument("--rates", help="explicit rates 'l11,l12;l21,l22' per layer or 'l1;l2' totals")
    st.add_argument("--arrivals", choices=("bernoulli", "poisson"), default="bernoulli")
    st.add_argument("--horizon", type=int, default=1_000_000)
    st.add_argument("--replicates", type=int, default=10)
    st.add_argument("--seed", type=int, default=0)
    st.add_argument("--resolution", type=int, default=64, help="simplex grid for the layer split")
    st.add_argument("--tol", type=float, default=0.9, help="fraction of runs that must agree")
    st.add_argument("--trace", action="store_true", help="write per-queue traces")
    st.add_argument("--out")
    st.set_defaults(func=cmd_stability)

    rp = sub.add_parser("reproduce", help="check the worked channels against published numbers")
    rp.add_argument("--example", type=int, required=True, choices=sorted(PUBLISHED))
    rp.add_argument("--tol", type=float, default=CORNER_TOL)
    rp.add_argument("--resolution", type=int, default=64)
    rp.add_argument("--out")
    rp.set_defaults(func=cmd_reproduce)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"lpebc: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InputError as exc:
        print(f"lpebc: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NonTermination as exc:
        print(f"lpebc: {exc}", file=sys.stderr)
        return EXIT_RUN


if __name__ == "__main__":
    sys.exit(main())
