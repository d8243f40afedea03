"""Command-line front end: ``run``, ``verify-oracle`` and ``list-scenarios``.

Configuration comes from an optional YAML file (``--config``) whose keys
mirror the flags; flags override the file.  Recognised keys::

    scenarios:  [Ia/P1, IIb]      # or "all"
    schedules:  [P1, P3]          # used for bare ids and "all"
    lambda:     0.1               # or "calibrate" (Ia/P1 max delta Pi = 4)
    step:       0.001
    horizon:    6
    out:        results
    downsample: 1
    series:     true              # one CSV per scenario
    summary:    true              # summary.csv
    cash_order: table             # or literal
    breakpoints: [[0, 1], [2, 3], [6, 3]]   # custom schedule, (t, P) pairs
    cutoffs:    {a: 2, c: 5, p: 2, A: 2, C: 5, o: 2}     # verify-oracle
    omega_cases: [[0, 4, 3, 2, 1]]                      # (n, k, k', n', M)
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np
import yaml

from . import fock
from .fpl import DomainError, InitialState, ModelParams, omega12_closed_form
from .scenarios import (
    CASES,
    CASH_ORDERS,
    DEFAULT_CASH_ORDER,
    SUBCASES,
    GridRow,
    Numerics,
    ScenarioError,
    calibrate_lambda,
    delta_pi_range,
    iter_ids,
    no_transaction,
    resolve_scenario,
    run_scenario,
)
from .schedules import BUILTIN_NAMES, ScheduleError, custom_schedule

log = logging.getLogger("qmarket")

SERIES_COLUMNS = ("t", "P", "Im_r", "delta_n", "delta_k", "delta_pi", "valid")
SUMMARY_COLUMNS = ("scenario", "schedule", "min", "max", "t_f", "no_transaction")

DEFAULT_CUTOFFS = {"a": 2, "c": 5, "p": 2, "A": 2, "C": 5, "o": 2}
DEFAULT_OMEGA_CASES = [
    (0, 4, 3, 2, 1),
    (0, 5, 5, 3, 0),
    (0, 2, 6, 1, 2),
    (0, 6, 2, 3, 2),
    (0, 3, 3, 0, 1),
    (1, 4, 3, 2, 1),
    (1, 6, 6, 3, 2),
    (0, 6, 6, 3, 2),
    (1, 2, 2, 1, 2),
    (0, 1, 4, 2, 1),
    (1, 0, 0, 3, 0),
]
RESIDUAL_TOL = 1e-10
OMEGA_RTOL = 1e-9

_KEYS = {
    "scenarios", "schedules", "lambda", "step", "horizon", "out", "downsample",
    "series", "summary", "cash_order", "breakpoints", "cutoffs", "omega_cases",
}


class ConfigError(Exception):
    pass


def fmt(x) -> str:
    # '+ 0.0' folds -0.0 into 0.0 so zero columns print identically
    return "%.9g" % (float(x) + 0.0)


def load_config(path: str) -> dict:
    """Read a YAML config, validating keys and types with line-numbered errors."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{path}:{mark.line + 1}" if mark else path
        raise ConfigError(f"{where}: {getattr(exc, 'problem', None) or exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}:1: top level must be a mapping")
    lines = {k.value: k.start_mark.line + 1 for k, _ in root.value}
    cfg = {}
    for key, val in data.items():
        where = f"{path}:{lines.get(key, '?')}"
        if key not in _KEYS:
            raise ConfigError(f"{where}: unknown key {key!r}")
        try:
            cfg[key] = _coerce(key, val)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{where}: bad value for {key!r}: {exc}") from None
    return cfg


def _coerce(key, val):
    if key in ("scenarios", "schedules"):
        items = [val] if isinstance(val, str) else list(val)
        return [str(v) for v in items]
    if key == "lambda":
        if val == "calibrate":
            return val
        return _positive(val, "lambda", allow_zero=True)
    if key in ("step", "horizon"):
        return _positive(val, key)
    if key == "downsample":
        if not isinstance(val, int) or val < 1:
            raise ValueError("must be an integer >= 1")
        return val
    if key in ("series", "summary"):
        if not isinstance(val, bool):
            raise ValueError("must be true or false")
        return val
    if key == "cash_order":
        if val not in CASH_ORDERS:
            raise ValueError(f"must be one of {CASH_ORDERS}")
        return val
    if key == "breakpoints":
        pts = [(float(t), float(p)) for t, p in val]
        return pts
    if key == "cutoffs":
        if not isinstance(val, dict):
            raise ValueError("must be a mapping of register label to cutoff")
        return {str(k): int(v) for k, v in val.items()}
    if key == "omega_cases":
        return [tuple(int(x) for x in case) for case in val]
    return str(val)


def _positive(val, name, allow_zero=False):
    x = float(val)
    if not np.isfinite(x) or x < 0 or (x == 0 and not allow_zero):
        raise ValueError(f"{name} must be {'>= 0' if allow_zero else '> 0'}, got {val}")
    return x


def _parse_map(text: str) -> dict:
    out = {}
    for item in text.split(","):
        k, _, v = item.partition("=")
        out[k.strip()] = int(v)
    return out


def _parse_case(text: str) -> tuple:
    vals = tuple(int(x) for x in text.split(","))
    if len(vals) != 5:
        raise argparse.ArgumentTypeError("expected n,k,k',n',M")
    return vals


def _lambda_arg(text: str):
    return text if text == "calibrate" else float(text)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qmarket", description="Number-operator stock market toy model.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run scenarios and write CSV series plus a summary.")
    run.add_argument("--config", help="YAML config file")
    run.add_argument("--scenario", action="append", help="id such as Ia/P1, Ia, or 'all' (repeatable)")
    run.add_argument("--schedule", action="append", help="P1..P4 or custom (repeatable)")
    run.add_argument("--lambda", dest="lam", type=_lambda_arg, help="interaction strength or 'calibrate'")
    run.add_argument("--step", type=float)
    run.add_argument("--horizon", type=float)
    run.add_argument("--out", help="output directory (default $QMARKET_OUT or ./qmarket-out)")
    run.add_argument("--downsample", type=int)
    run.add_argument("--cash-order", choices=CASH_ORDERS)
    run.add_argument("--no-series", dest="series", action="store_false", default=None)

    ver = sub.add_parser("verify-oracle", help="Check conservation laws and omega(1), omega(2) on the Fock oracle.")
    ver.add_argument("--config", help="YAML config file")
    ver.add_argument("--cutoffs", type=_parse_map, help="e.g. a=2,c=5,p=2,A=2,C=5,o=2")
    ver.add_argument("--omega-case", action="append", type=_parse_case, help="n,k,k',n',M (repeatable)")
    ver.add_argument("--omega-cutoffs", type=_parse_map, help="explicit cutoffs for the omega checks, e.g. c=3,C=3")

    sub.add_parser("list-scenarios", help="Print the case and subcase registry.")
    return ap


def _merged(args, cfg: dict) -> dict:
    flags = {
        "scenarios": args.scenario,
        "schedules": args.schedule,
        "lambda": args.lam,
        "step": args.step,
        "horizon": args.horizon,
        "out": args.out,
        "downsample": args.downsample,
        "cash_order": args.cash_order,
        "series": args.series,
    }
    merged = dict(cfg)
    merged.update({k: v for k, v in flags.items() if v is not None})
    return merged


def _rows_for_downsample(traj, every: int) -> np.ndarray:
    n = len(traj.grid)
    idx = set(range(0, n, every)) | {n - 1}
    idx |= {int(np.argmin(traj.delta_pi)), int(np.argmax(traj.delta_pi))}
    return np.array(sorted(idx))


def write_series(path: Path, traj, every: int = 1) -> None:
    valid = traj.validity.mask(traj.grid)
    cols = (traj.grid, traj.price, traj.r.imag, traj.delta_n, traj.delta_k, traj.delta_pi)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SERIES_COLUMNS)
        for i in _rows_for_downsample(traj, every):
            w.writerow([fmt(c[i]) for c in cols] + [int(valid[i])])


def write_summary(path: Path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for r in rows:
            tf = "full" if r.t_f is None else fmt(r.t_f)
            w.writerow([r.scenario, r.schedule, fmt(r.min), fmt(r.max), tf, int(r.no_transaction)])


def cmd_run(args) -> int:
    cfg = load_config(args.config) if args.config else {}
    opts = _merged(args, cfg)
    cash_order = opts.get("cash_order", DEFAULT_CASH_ORDER)
    schedules = opts.get("schedules")
    if schedules:
        bad = [s for s in schedules if s not in BUILTIN_NAMES + ("custom",)]
        if bad:
            raise ConfigError(f"unknown schedule(s) {bad}")
    horizon = opts.get("horizon", 6.0)
    step = opts.get("step", 1e-3)
    custom = None
    if "breakpoints" in opts:
        custom = custom_schedule(opts["breakpoints"], horizon)
        if custom.horizon < horizon:
            raise ConfigError("custom breakpoints end before the horizon")
    lam = opts.get("lambda", 1.0)
    if lam == "calibrate":
        lam = calibrate_lambda(4.0, "Ia/P1", Numerics(step, horizon, 1.0), cash_order=cash_order)
        log.info("calibrated lambda = %.9g", lam)
    numerics = Numerics(step, horizon, lam)
    ids = iter_ids(opts.get("scenarios", ["Ia/P1"]), schedules)
    if any(i.schedule == "custom" for i in ids) and custom is None:
        raise ConfigError("schedule 'custom' needs 'breakpoints' in the config")

    out = Path(opts.get("out") or os.environ.get("QMARKET_OUT") or "qmarket-out")
    every = opts.get("downsample", 1)
    if every < 1:
        raise ConfigError("downsample must be >= 1")
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create output directory {out}: {exc.strerror}", file=sys.stderr)
        return 3

    rows = []
    t0 = time.perf_counter()
    try:
        for sid in ids:
            traj = run_scenario(sid, numerics, cash_order=cash_order, custom=custom)
            lo, hi = delta_pi_range(traj)
            rows.append(GridRow(sid.label, sid.schedule, lo, hi, traj.validity.t_f, no_transaction(traj)))
            if opts.get("series", True):
                write_series(out / f"{sid.label}_{sid.schedule}.csv", traj, every)
        if opts.get("summary", True):
            write_summary(out / "summary.csv", rows)
    except OSError as exc:
        print(f"error: cannot write to {out}: {exc.strerror}", file=sys.stderr)
        return 3
    print(f"lambda = {fmt(lam)}; {len(rows)} scenario(s) written to {out} in {time.perf_counter() - t0:.2f} s")
    return 0


def verify_oracle(cutoffs: dict, omega_cases, omega_cutoffs: dict | None = None, out=print) -> bool:
    """Conservation residuals and closed-form vs Fock-space omegas; True if all pass."""
    ok = True
    space = fock.market_space(cutoffs, L=1)
    model = fock.OracleModelSpec(ModelParams(1.0, 1.0, 1.0, 1.0, lam=1.0, f1=1.0))
    H = fock.hamiltonian(space, model)
    inner = fock.interior_mask(space)
    out(f"oracle space {space}")
    for name, Q in fock.conserved_charges(space).items():
        res = fock.commutator_residual(H, Q, inner)
        good = res < RESIDUAL_TOL
        ok &= good
        out(f"[{'PASS' if good else 'FAIL'}] [H, {name}] interior residual = {res:.3e}")
    for case in omega_cases:
        init = InitialState(case[0], case[1], case[3], case[2], case[4])
        closed = omega12_closed_form(init, 1.0)
        brute = fock.omega12_bruteforce(init, 1.0, cutoffs=omega_cutoffs)
        err = max(
            abs(closed.omega1 - brute.omega1) / max(1.0, abs(closed.omega1)),
            abs(closed.omega2 - brute.omega2) / max(1.0, abs(closed.omega2)),
        )
        good = err < OMEGA_RTOL
        ok &= good
        out(
            f"[{'PASS' if good else 'FAIL'}] (n,k,k',n',M)={case}: closed ({closed.omega1.real:g}, {closed.omega2.real:g})"
            f" fock ({brute.omega1.real:.12g}, {brute.omega2.real:.12g}) rel err {err:.1e}"
        )
    return bool(ok)


def cmd_verify(args) -> int:
    cfg = load_config(args.config) if args.config else {}
    cutoffs = dict(DEFAULT_CUTOFFS)
    cutoffs.update(cfg.get("cutoffs", {}))
    if args.cutoffs:
        cutoffs.update(args.cutoffs)
    cases = args.omega_case or cfg.get("omega_cases") or DEFAULT_OMEGA_CASES
    return 0 if verify_oracle(cutoffs, cases, args.omega_cutoffs) else 1


def cmd_list(args) -> int:
    print("case  (w_a, w_c, W_A, W_C)")
    for name, vals in CASES.items():
        print(f"{name:<5} {vals}")
    print("subcase  (k, k', n', M) as listed; trader/reservoir cash per cash_order")
    for name, vals in SUBCASES.items():
        _, init, _ = resolve_scenario(f"I{name}/P1")
        print(f"{name:<8} {vals}  -> trader k={init.k}, reservoir k'={init.k_res}")
    print("schedules " + " ".join(BUILTIN_NAMES) + " custom")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    handler = {"run": cmd_run, "verify-oracle": cmd_verify, "list-scenarios": cmd_list}[args.command]
    try:
        return handler(args)
    except (ConfigError, ScenarioError, ScheduleError, fock.FockConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
