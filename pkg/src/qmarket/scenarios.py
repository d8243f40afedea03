"""The case/subcase experiment grid over the builtin price schedules.

Cases fix the free frequencies ``(w_a, w_c, W_A, W_C)``, subcases the
initial numbers ``(k, k', n', M)``; the trader always starts with no shares
and the smearing amplitude is ``1e-3``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .fpl import InitialState, ModelParams, Trajectory, solve, time_grid
from .schedules import BUILTIN_NAMES, PriceSchedule, builtin_schedule

CASES = {
    "I": (1.0, 1.0, 1.0, 1.0),
    "II": (10.0, 10.0, 1.0, 1.0),
    "III": (1.0, 1.0, 10.0, 10.0),
    "IV": (20.0, 10.0, 5.0, 1.0),
    "V": (1.0, 5.0, 10.0, 20.0),
    "VI": (1.0, 3.0, 2.0, 7.0),
}

# (k, k', n', M) as listed for each subcase
SUBCASES = {
    "a": (20, 20, 100, 2),
    "b": (80, 20, 100, 2),
    "c": (20, 80, 100, 2),
    "d": (80, 80, 100, 2),
}

F1 = 1e-3
INITIAL_SHARES = 0
VALIDITY_EPS = 1e-6

# "table": the first cash entry of a subcase tuple goes to the reservoir
# trader and the second to the trader, which is the assignment that
# reproduces the published delta-Pi ranges; "literal" takes the tuple in
# its listed (k, k') order.
CASH_ORDERS = ("table", "literal")
DEFAULT_CASH_ORDER = "table"

_ID = re.compile(r"^(VI|IV|V|I{1,3})([a-d])(?:/(\w+))?$")


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioId:
    case: str
    subcase: str
    schedule: str = "P1"

    def __post_init__(self):
        if self.case not in CASES:
            raise ScenarioError(f"unknown case {self.case!r}")
        if self.subcase not in SUBCASES:
            raise ScenarioError(f"unknown subcase {self.subcase!r}")
        if self.schedule not in BUILTIN_NAMES + ("custom",):
            raise ScenarioError(f"unknown schedule {self.schedule!r}")

    @classmethod
    def parse(cls, text: str, schedule: str | None = None) -> "ScenarioId":
        """Parse ``"Ia/P1"``; a bare ``"Ia"`` takes ``schedule`` (default P1)."""
        m = _ID.match(text.strip())
        if not m:
            raise ScenarioError(f"cannot parse scenario id {text!r}")
        sched = m.group(3) or schedule or "P1"
        return cls(m.group(1), m.group(2), sched)

    @property
    def label(self) -> str:
        return f"{self.case}{self.subcase}"

    def __str__(self):
        return f"{self.label}/{self.schedule}"


@dataclass(frozen=True)
class Numerics:
    step: float = 1e-3
    horizon: float = 6.0
    lam: float = 1.0

    def __post_init__(self):
        if not self.step > 0:
            raise ScenarioError(f"step must be positive, got {self.step}")
        if not self.horizon > 0:
            raise ScenarioError(f"horizon must be positive, got {self.horizon}")
        if not self.lam >= 0:
            raise ScenarioError(f"lambda must be >= 0, got {self.lam}")


@dataclass
class ValidityReport:
    t_f: float | None
    violations: list = field(default_factory=list)

    @property
    def full(self) -> bool:
        return self.t_f is None

    @property
    def valid_horizon(self):
        return "full" if self.t_f is None else self.t_f

    def mask(self, grid) -> np.ndarray:
        grid = np.asarray(grid)
        if self.t_f is None:
            return np.ones(grid.shape, dtype=bool)
        return grid < self.t_f


def resolve_scenario(sid: ScenarioId, lam: float = 1.0, horizon: float = 6.0, *, cash_order: str = DEFAULT_CASH_ORDER, custom: PriceSchedule | None = None):
    """Return ``(ModelParams, InitialState, PriceSchedule)`` for a grid cell."""
    if isinstance(sid, str):
        sid = ScenarioId.parse(sid)
    if cash_order not in CASH_ORDERS:
        raise ScenarioError(f"cash_order must be one of {CASH_ORDERS}")
    params = ModelParams(*CASES[sid.case], lam=lam, f1=F1)
    first, second, n_res, M = SUBCASES[sid.subcase]
    k, k_res = (second, first) if cash_order == "table" else (first, second)
    init = InitialState(n=INITIAL_SHARES, k=k, n_res=n_res, k_res=k_res, M=M)
    if sid.schedule == "custom":
        if custom is None:
            raise ScenarioError("schedule 'custom' needs breakpoints")
        schedule = custom
    else:
        schedule = builtin_schedule(sid.schedule, horizon)
    return params, init, schedule


def validity_scan(traj: Trajectory, init: InitialState, eps: float = VALIDITY_EPS) -> ValidityReport:
    """First times at which the trader's holdings break the conserved totals."""
    t = traj.grid
    dn, dk = traj.delta_n, traj.delta_k
    checks = [
        ("delta_n", dn < -eps, 0.0),
        ("n", init.n + dn > init.n + init.n_res + eps, float(init.n + init.n_res)),
        ("delta_k", dk > init.k_res + eps, float(init.k_res)),
        ("k", init.k + dk < -eps, 0.0),
    ]
    violations = []
    for name, bad, bound in checks:
        hits = np.flatnonzero(bad)
        if hits.size:
            violations.append((float(t[hits[0]]), name, bound))
    violations.sort(key=lambda v: v[0])
    t_f = violations[0][0] if violations else None
    return ValidityReport(t_f, violations)


def delta_pi_range(traj: Trajectory) -> tuple[float, float]:
    return float(traj.delta_pi.min()), float(traj.delta_pi.max())


def no_transaction(traj: Trajectory) -> bool:
    return bool(np.abs(traj.delta_n).max() < 1 and np.abs(traj.delta_k).max() < 1)


def run_scenario(sid, numerics: Numerics = Numerics(), *, cash_order: str = DEFAULT_CASH_ORDER, custom: PriceSchedule | None = None) -> Trajectory:
    if isinstance(sid, str):
        sid = ScenarioId.parse(sid)
    params, init, schedule = resolve_scenario(sid, numerics.lam, numerics.horizon, cash_order=cash_order, custom=custom)
    grid = time_grid(numerics.horizon, numerics.step)
    traj = solve(params, init, schedule, grid)
    traj.meta.update(scenario=str(sid), schedule=schedule, params=params, init=init)
    traj.validity = validity_scan(traj, init)
    return traj


@dataclass(frozen=True)
class GridRow:
    scenario: str
    schedule: str
    min: float
    max: float
    t_f: float | None
    no_transaction: bool

    @property
    def width(self) -> float:
        return self.max - self.min


def run_grid(
    cases: Sequence[str] = tuple(CASES),
    subcases: Sequence[str] = tuple(SUBCASES),
    schedules: Sequence[str] = BUILTIN_NAMES,
    numerics: Numerics = Numerics(),
    *,
    cash_order: str = DEFAULT_CASH_ORDER,
    custom: PriceSchedule | None = None,
    keep: bool = False,
):
    """Rows in case-major, subcase-minor, then schedule order.

    With ``keep=True`` returns ``(rows, trajectories)``.
    """
    if not cases or not subcases or not schedules:
        raise ScenarioError("empty scenario selection")
    rows, trajs = [], []
    for case in cases:
        for sub in subcases:
            for sched in schedules:
                sid = ScenarioId(case, sub, sched)
                traj = run_scenario(sid, numerics, cash_order=cash_order, custom=custom)
                lo, hi = delta_pi_range(traj)
                rows.append(GridRow(sid.label, sched, lo, hi, traj.validity.t_f, no_transaction(traj)))
                if keep:
                    trajs.append(traj)
    return (rows, trajs) if keep else rows


def iter_ids(selection: Iterable[str] | str, schedules: Sequence[str] | None = None) -> list[ScenarioId]:
    """Expand ``"all"`` or ids such as ``"Ia"``, ``"Ia/P2"`` into ScenarioIds."""
    scheds = list(schedules) if schedules else list(BUILTIN_NAMES)
    if isinstance(selection, str):
        selection = [selection]
    out = []
    for item in selection:
        if item == "all":
            out += [ScenarioId(c, s, p) for c in CASES for s in SUBCASES for p in scheds]
        elif "/" in item:
            out.append(ScenarioId.parse(item))
        else:
            out += [ScenarioId.parse(item, p) for p in scheds]
    return out


def calibrate_lambda(target: float = 4.0, sid="Ia/P1", numerics: Numerics = Numerics(), *, cash_order: str = DEFAULT_CASH_ORDER) -> float:
    """Interaction strength giving ``max delta Pi = target`` for an external-price scenario.

    With the price given from outside, the phases do not depend on ``lam``,
    ``r`` is linear in ``lam`` and every increment is quadratic in it, so
    one reference run at ``lam = 1`` fixes the answer.
    """
    ref = run_scenario(sid, Numerics(numerics.step, numerics.horizon, 1.0), cash_order=cash_order)
    peak = float(ref.delta_pi.max())
    if not peak > 0:
        raise ScenarioError(f"{sid}: max delta Pi is {peak} at lambda = 1, cannot calibrate")
    return float(np.sqrt(target / peak))
