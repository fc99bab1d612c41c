"""
Command-line frontend.

Exit status: 0 success, 1 a check or verdict failed, 2 usage error,
3 I/O error. Every command is deterministic for fixed arguments.
"""
from __future__ import annotations

import argparse
import json
import logging
import re
import sys
from math import pi
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .analysis import (
    CELLS,
    analytic_table,
    cell_name,
    compare,
    tally,
    visibility,
)
from .constants import TOL
from .hilbert import Register
from .measurement import order_independence_report, random_measurement, random_state
from .montecarlo import ChoicePolicy, Ordering, RunConfig, run_trials
from .optics import Choice, alpha, env_analyzer, full_eraser_state, make_catalog, system_detectors, wheeler_mz
from .verify import run_checks

log = logging.getLogger("qeraser")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3

FRINGES = (("D1", "D3"), ("D2", "D3"), ("D1", "D4"), ("D2", "D4"))


class UsageError(Exception):
    pass


_ANGLE = re.compile(r"^\s*([+-]?)\s*(\d*\.?\d*(?:[eE][+-]?\d+)?)\s*\*?\s*(pi)?\s*(?:/\s*(\d+\.?\d*))?\s*$")


def parse_angle(text: str) -> float:
    """Radians, with optional ``pi`` factor (``3pi/4``, ``-pi``) or degree suffix (``90deg``)."""
    s = text.strip().lower()
    for suffix in ("deg", "°"):
        if s.endswith(suffix):
            try:
                return float(np.radians(float(s[: -len(suffix)])))
            except ValueError:
                raise argparse.ArgumentTypeError(f"bad angle {text!r}") from None
    m = _ANGLE.match(s)
    if not m or not (m.group(2) or m.group(3)):
        raise argparse.ArgumentTypeError(f"bad angle {text!r}")
    sign, num, has_pi, den = m.groups()
    value = float(num) if num else 1.0
    if has_pi:
        value *= pi
    if den:
        value /= float(den)
    value = -value if sign == "-" else value
    if not np.isfinite(value):
        raise argparse.ArgumentTypeError(f"bad angle {text!r}")
    return value


def parse_grid(text: str) -> np.ndarray:
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("grid must be start:end:steps")
    start, end = parse_angle(parts[0]), parse_angle(parts[1])
    try:
        steps = int(parts[2])
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad step count {parts[2]!r}") from None
    if steps < 2:
        raise argparse.ArgumentTypeError("grid needs steps >= 2")
    return np.linspace(start, end, steps)


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _csv(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else fmt(v) if isinstance(v, float) else str(v)
                              for v in row))
    return "\n".join(lines) + "\n"


def _json(obj) -> str:
    def clean(o):
        if isinstance(o, dict):
            return {str(k): clean(v) for k, v in o.items()}
        if isinstance(o, (list, tuple)):
            return [clean(v) for v in o]
        if isinstance(o, (float, np.floating)):
            return float(o) if np.isfinite(o) else None
        if isinstance(o, np.integer):
            return int(o)
        return o
    return json.dumps(clean(obj), indent=2) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    path = Path(out)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


_CHOICE_POLICY = {"0": ChoicePolicy.FIXED0, "1": ChoicePolicy.FIXED1, "random": ChoicePolicy.RANDOM}
_ORDERING = {"system-first": Ordering.SYSTEM_FIRST, "environment-first": Ordering.ENVIRONMENT_FIRST,
             "joint": Ordering.JOINT}


# -- verify -----------------------------------------------------------------

def cmd_verify(args) -> int:
    catalog = None
    if args.perturb_bs_phase:
        catalog = make_catalog(bs_reflection_phase=pi / 2 + args.perturb_bs_phase, validate=False)
    checks = run_checks(catalog)
    for c in checks:
        print(c.line(), file=sys.stderr if args.out is None and args.format == "json" else sys.stdout)
    if args.out is not None or args.format == "json":
        if args.format == "json":
            text = _json({"passed": all(c.passed for c in checks),
                          "checks": [dict(name=c.name, description=c.description, deviation=c.deviation,
                                          tol=c.tol, passed=c.passed, error=c.error) for c in checks]})
        else:
            text = _csv(("check", "description", "deviation", "tol", "passed"),
                        [(c.name, c.description, c.deviation, c.tol, str(c.passed).lower()) for c in checks])
        _emit(text, args.out)
    failed = [c.name for c in checks if not c.passed]
    if failed:
        print("failed checks: " + ", ".join(failed), file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


# -- simulate ---------------------------------------------------------------

def _config(args) -> RunConfig:
    try:
        return RunConfig(theta=args.theta, choice_policy=_CHOICE_POLICY[args.choice],
                         ordering=_ORDERING[args.ordering], trials=args.trials, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def summarize(config: RunConfig, batch, sigma: float = 4.0) -> dict:
    tables = tally(batch)
    strata = {}
    for choice, table in tables.items():
        if table.empty:
            continue
        ref = analytic_table(config.theta, choice)
        cmp = compare(table, ref, sigma)
        strata[str(choice)] = {
            "total": table.total,
            "counts": {cell_name(c): table.counts[c] for c in CELLS},
            "empirical": {cell_name(c): table.frequencies[c] for c in CELLS},
            "analytic": {cell_name(c): ref[c] for c in CELLS},
            "z": {cell_name(c): cmp.z[c] for c in CELLS},
            "pass": cmp.passed,
        }
    return {
        "theta": config.theta,
        "alpha": alpha(config.theta),
        "choice_policy": config.choice_policy.value,
        "ordering": config.ordering.value,
        "trials": config.trials,
        "seed": config.seed,
        "sigma": sigma,
        "strata": strata,
        "verdict": "pass" if all(s["pass"] for s in strata.values()) else "fail",
    }


def _summary_path(out: str) -> Path:
    p = Path(out)
    return p.with_name(p.stem + ".summary.json")


def cmd_simulate(args) -> int:
    config = _config(args)
    batch = run_trials(config, workers=args.workers)
    summary = summarize(config, batch)
    if args.out is None:
        _emit(_json(summary), None)
    else:
        if args.format == "json":
            records = [dict(trial_id=r.trial_id, choice=r.choice, env_detector=r.env_detector,
                            sys_detector=r.sys_detector, t_sys=r.t_sys, t_choice=r.t_choice,
                            t_env=r.t_env, substream=r.substream) for r in batch]
            _emit(_json(records), args.out)
        else:
            _emit(batch.to_csv(), args.out)
        _emit(_json(summary), str(_summary_path(args.out)))
        print(f"verdict: {summary['verdict']}")
    return EXIT_OK if summary["verdict"] == "pass" else EXIT_FAIL


# -- sweep ------------------------------------------------------------------

def _point_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(index,)).generate_state(1, np.uint64)[0])


def sweep_rows(grid: np.ndarray, choice: Choice, trials: int, seed: int, analytic_only: bool,
               ordering: Ordering = Ordering.SYSTEM_FIRST):
    rows, fringes_a, fringes_e = [], {f: [] for f in FRINGES}, {f: [] for f in FRINGES}
    policy = ChoicePolicy.FIXED1 if choice is Choice.ONE else ChoicePolicy.FIXED0
    for i, th in enumerate(grid):
        ref = analytic_table(th, choice)
        row = {"theta": float(th), "alpha": ref.alpha}
        row.update({f"p{cell_name(c)}_analytic": ref[c] for c in FRINGES})
        if not analytic_only:
            cfg = RunConfig(float(th), policy, ordering, trials, _point_seed(seed, i))
            table = tally(run_trials(cfg))[int(choice)]
            row.update({f"p{cell_name(c)}_empirical": table.frequencies[c] for c in FRINGES})
        for env, sysd in FRINGES:
            key = f"p{env[1:]}_given_{sysd[1:]}"
            row[key + "_analytic"] = ref.conditional(env, sysd)
            fringes_a[(env, sysd)].append((float(th), row[key + "_analytic"]))
            if not analytic_only:
                row[key + "_empirical"] = table.conditional(env, sysd)
                fringes_e[(env, sysd)].append((float(th), row[key + "_empirical"]))
        rows.append(row)
    vis = []
    for f in FRINGES:
        entry = {"fringe": f"p{f[0][1:]}_given_{f[1][1:]}", "visibility_analytic": visibility(fringes_a[f])}
        if not analytic_only:
            try:
                entry["visibility_empirical"] = visibility(fringes_e[f])
            except ValueError:
                entry["visibility_empirical"] = float("nan")
        vis.append(entry)
    return rows, vis


def cmd_sweep(args) -> int:
    if args.choice not in ("0", "1"):
        raise UsageError("sweep needs --choice 0 or 1")
    if args.trials < 1:
        raise UsageError("trials must be a positive integer")
    choice = Choice(int(args.choice))
    rows, vis = sweep_rows(args.grid, choice, args.trials, args.seed, args.analytic_only,
                           _ORDERING[args.ordering])
    if args.format == "json":
        text = _json({"choice": int(choice), "rows": rows, "visibility": vis})
    else:
        header = list(rows[0])
        text = _csv(header, [[r[h] for h in header] for r in rows])
        vheader = list(vis[0])
        text += "\n" + _csv(vheader, [[v[h] for h in vheader] for v in vis])
    _emit(text, args.out)
    return EXIT_OK


# -- wheeler ----------------------------------------------------------------

def cmd_wheeler(args) -> int:
    rows = [(float(ph), *wheeler_mz(ph, args.inserted)) for ph in args.grid]
    if args.format == "json":
        text = _json({"inserted": args.inserted,
                      "rows": [dict(phase=r[0], p_D1=r[1], p_D2=r[2]) for r in rows]})
    else:
        text = _csv(("phase", "p_D1", "p_D2"), rows)
    _emit(text, args.out)
    return EXIT_OK


# -- order-check ------------------------------------------------------------

def order_check_rows(samples: int, max_dim: int, seed: int, thetas: np.ndarray):
    rng = np.random.default_rng(seed)
    rows = []
    for k in range(samples):
        da, db = (int(d) for d in rng.integers(2, max_dim + 1, size=2))
        ra = Register("A", tuple(f"a{i}" for i in range(da)))
        rb = Register("B", tuple(f"b{i}" for i in range(db)))
        psi = random_state((ra, rb), rng)
        rep = order_independence_report(psi, random_measurement(ra, rng), random_measurement(rb, rng))
        rows.append(dict(section="random", index=k, theta=float("nan"), dim_a=da, dim_b=db,
                         max_dev_a_first=rep.max_dev_a_first, max_dev_b_first=rep.max_dev_b_first))
    for choice in Choice:
        for k, th in enumerate(thetas):
            rep = order_independence_report(full_eraser_state(th), env_analyzer(choice), system_detectors())
            rows.append(dict(section=f"eraser-choice{int(choice)}", index=k, theta=float(th), dim_a=2, dim_b=2,
                             max_dev_a_first=rep.max_dev_a_first, max_dev_b_first=rep.max_dev_b_first))
    return rows


def cmd_order_check(args) -> int:
    if args.samples < 1:
        raise UsageError("samples must be >= 1")
    if not 2 <= args.max_dim <= 4:
        raise UsageError("max-dim must be in 2..4")
    rows = order_check_rows(args.samples, args.max_dim, args.seed, args.grid)
    worst = max(max(r["max_dev_a_first"], r["max_dev_b_first"]) for r in rows)
    if args.format == "json":
        text = _json({"worst_deviation": worst, "tol": TOL, "rows": rows})
    else:
        header = list(rows[0])
        text = _csv(header, [["" if h == "theta" and np.isnan(r[h]) else r[h] for h in header] for r in rows])
    _emit(text, args.out)
    print(f"worst deviation: {worst:.3e}", file=sys.stderr)
    return EXIT_OK if worst < TOL else EXIT_FAIL


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qeraser", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def output(p, default_format="csv"):
        p.add_argument("--out", metavar="PATH")
        p.add_argument("--format", choices=("csv", "json"), default=default_format)

    p = sub.add_parser("verify", help="run the analytic invariant suite")
    output(p)
    p.add_argument("--perturb-bs-phase", type=float, default=0.0, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("simulate", help="Monte Carlo coincidence run")
    p.add_argument("--theta", type=parse_angle, default=pi / 2)
    p.add_argument("--choice", choices=("0", "1", "random"), default="1")
    p.add_argument("--ordering", choices=tuple(_ORDERING), default="system-first")
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    output(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="coincidence fringes over a theta grid")
    p.add_argument("--grid", type=parse_grid, default=parse_grid("-pi:pi:181"))
    p.add_argument("--choice", choices=("0", "1", "random"), default="1")
    p.add_argument("--ordering", choices=tuple(_ORDERING), default="system-first")
    p.add_argument("--trials", type=int, default=10_000, help="trials per grid point")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--analytic-only", action="store_true")
    output(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("wheeler", help="single-photon Mach-Zehnder detector probabilities")
    p.add_argument("--grid", type=parse_grid, default=parse_grid("-pi:pi:181"))
    g = p.add_mutually_exclusive_group()
    g.add_argument("--inserted", dest="inserted", action="store_true", default=True)
    g.add_argument("--removed", dest="inserted", action="store_false")
    output(p)
    p.set_defaults(func=cmd_wheeler)

    p = sub.add_parser("order-check", help="measurement-order independence sweep")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--max-dim", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid", type=parse_grid, default=parse_grid("-pi:pi:181"),
                   help="theta grid for the eraser section")
    output(p)
    p.set_defaults(func=cmd_order_check)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"qeraser {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"qeraser {args.command}: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
