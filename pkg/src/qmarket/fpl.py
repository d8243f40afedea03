"""Fixed-point-like approximation of the trader/reservoir exchange dynamics.

Everything here works on a uniform time grid.  The pipeline is

    phases chi, chi~  ->  eta coefficients  ->  r(t)  ->  delta n, delta k
                      ->  delta Pi

with the expectation values omega(1), omega(2) supplied in closed form for a
single reservoir trader.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import isfinite

import numpy as np

from .schedules import PriceSchedule, eval_price, phase_integral


class DomainError(ValueError):
    """Raised when initial numbers fall outside the closed-form domain."""


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class ModelParams:
    omega_a: float
    omega_c: float
    Omega_A: float
    Omega_C: float
    lam: float = 1.0
    f1: float = 1e-3

    def __post_init__(self):
        vals = (self.omega_a, self.omega_c, self.Omega_A, self.Omega_C, self.lam, self.f1)
        if not all(isfinite(v) for v in vals):
            raise ValueError(f"model parameters must be finite: {vals}")
        if self.lam < 0:
            raise ValueError(f"interaction strength must be >= 0, got {self.lam}")

    def with_lambda(self, lam: float) -> "ModelParams":
        return ModelParams(self.omega_a, self.omega_c, self.Omega_A, self.Omega_C, lam, self.f1)


@dataclass(frozen=True)
class InitialState:
    """Initial occupation numbers: trader (n, k), reservoir (n', k'), price M, supply O."""

    n: int
    k: int
    n_res: int
    k_res: int
    M: int
    O: int = 0

    def __post_init__(self):
        for name in ("n", "k", "n_res", "k_res", "M", "O"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ValueError(f"{name} must be a nonnegative integer, got {v}")


@dataclass(frozen=True)
class Expectations:
    omega1: complex
    omega2: complex


@dataclass(frozen=True)
class FplCoefficients:
    grid: np.ndarray
    chi: np.ndarray
    chi_tilde: np.ndarray
    eta1: np.ndarray
    eta2: np.ndarray
    eta1_tilde: np.ndarray
    eta2_tilde: np.ndarray


@dataclass
class Trajectory:
    grid: np.ndarray
    price: np.ndarray
    r: np.ndarray
    delta_n: np.ndarray
    delta_k: np.ndarray
    delta_pi: np.ndarray
    meta: dict = field(default_factory=dict)
    validity: object = None


def time_grid(horizon: float = 6.0, step: float = 1e-3) -> np.ndarray:
    """Uniform grid ``0, h, 2h, ..., horizon`` with ``round(horizon/h) + 1`` nodes."""
    if step <= 0 or horizon <= 0:
        raise GridError("step and horizon must be positive")
    n = int(round(horizon / step))
    if n < 1:
        raise GridError("horizon shorter than one step")
    return np.arange(n + 1) * step


def cumulative_integral(samples, grid) -> np.ndarray:
    """Composite-trapezoid running integral; the first entry is 0."""
    y = np.asarray(samples)
    x = np.asarray(grid, dtype=float)
    if y.shape[0] < 2 or x.shape[0] != y.shape[0]:
        raise GridError("need at least two samples on a matching grid")
    out = np.zeros_like(y, dtype=np.result_type(y, float))
    out[1:] = np.cumsum(0.5 * np.diff(x) * (y[1:] + y[:-1]))
    return out


def falling_factorial(x: int, m: int) -> float:
    """x (x-1) ... (x-m+1), accumulated as a product."""
    out = 1.0
    for j in range(m):
        out *= x - j
    return out


def rising_factorial(x: int, m: int) -> float:
    """(x+1) (x+2) ... (x+m), i.e. (x+m)!/x!."""
    out = 1.0
    for j in range(1, m + 1):
        out *= x + j
    return out


def omega12_closed_form(init: InitialState, f1: complex) -> Expectations:
    """Number-state expectations for a single reservoir trader.

    For ``n = 0`` these are the usual expressions

        omega2 = -|f|^2 (1+n') k!/(k-M)! k'!/(k'-M)!
        omega1 = omega2 + |f|^2 n' k!/(k-M)! (k'+M)!/k'!

    The general ``n`` form keeps the extra ``n`` terms of ``[z^+, z]`` and
    ``z z^+`` so it agrees with the Fock-space computation for any ``n``.
    """
    n, k, nr, kr, M = init.n, init.k, init.n_res, init.k_res, init.M
    if k < M or kr < M:
        raise DomainError(f"closed form needs k >= M and k' >= M (k={k}, k'={kr}, M={M})")
    f2 = abs(f1) ** 2
    ffk, ffkr = falling_factorial(k, M), falling_factorial(kr, M)
    rfk, rfkr = rising_factorial(k, M), rising_factorial(kr, M)
    # omega([z^+, z]) and omega([Z^+, Z]) on the number state
    zc = n * rfk - (n + 1) * ffk
    Zc = f2 * (nr * rfkr - (nr + 1) * ffkr)
    omega2 = f2 * (nr + 1) * ffkr * zc
    omega1 = (n + 1) * ffk * Zc
    return Expectations(complex(omega1), complex(omega2))


def chi_profile(params: ModelParams, schedule: PriceSchedule, grid):
    """Phases ``int_0^t (P w_c - w_a)`` and ``int_0^t (P W_C - W_A)``, exact per segment."""
    grid = np.asarray(grid, dtype=float)
    chi = phase_integral(schedule, grid, params.omega_c, params.omega_a)
    chi_t = phase_integral(schedule, grid, params.Omega_C, params.Omega_A)
    return chi, chi_t


def eta_coefficients(params: ModelParams, schedule: PriceSchedule, grid) -> FplCoefficients:
    grid = np.asarray(grid, dtype=float)
    chi, chi_t = chi_profile(params, schedule, grid)
    eta1 = np.exp(1j * chi)
    eta1_t = np.exp(1j * chi_t)
    if params.lam == 0.0:
        eta2 = np.zeros_like(eta1)
        eta2_t = np.zeros_like(eta1)
    else:
        eta2 = 1j * params.lam * cumulative_integral(eta1_t, grid)
        eta2_t = 1j * params.lam * cumulative_integral(eta1, grid)
    return FplCoefficients(grid, chi, chi_t, eta1, eta2, eta1_t, eta2_t)


def eta1_integral_form(params: ModelParams, schedule: PriceSchedule, grid) -> np.ndarray:
    """``1 + i int_0^t (P w_c - w_a) e^{i chi}`` by quadrature; equals ``e^{i chi}``."""
    grid = np.asarray(grid, dtype=float)
    chi, _ = chi_profile(params, schedule, grid)
    rate = eval_price(schedule, grid) * params.omega_c - params.omega_a
    return 1.0 + 1j * cumulative_integral(rate * np.exp(1j * chi), grid)


def correlation_r(coeffs: FplCoefficients, exps: Expectations) -> np.ndarray:
    n = len(coeffs.grid)
    if any(len(x) != n for x in (coeffs.eta1, coeffs.eta2, coeffs.eta1_tilde, coeffs.eta2_tilde)):
        raise GridError("eta series are not on a common grid")
    return exps.omega1 * coeffs.eta1 * np.conj(coeffs.eta2_tilde) + exps.omega2 * (
        coeffs.eta2 * np.conj(coeffs.eta1_tilde)
    )


def trader_deltas(r, schedule: PriceSchedule, grid, lam: float):
    """Share and cash increments of the trader, ``(delta_n, delta_k)``."""
    grid = np.asarray(grid, dtype=float)
    r = np.asarray(r)
    if r.shape != grid.shape:
        raise GridError("r and grid lengths differ")
    if lam == 0.0:
        zero = np.zeros(grid.shape)
        return zero, zero.copy()
    im_r = r.imag
    price = eval_price(schedule, grid)
    dn = -2.0 * lam * cumulative_integral(im_r, grid)
    dk = 2.0 * lam * cumulative_integral(price * im_r, grid)
    return dn, dk


def portfolio_delta(delta_n, delta_k, schedule: PriceSchedule, n: int, grid) -> np.ndarray:
    """``n (P(t) - P(0)) + P(t) delta_n(t) + delta_k(t)``."""
    grid = np.asarray(grid, dtype=float)
    price = eval_price(schedule, grid)
    return n * (price - price[0]) + price * np.asarray(delta_n) + np.asarray(delta_k)


def closed_model_delta_pi(delta_n, delta_k, init: InitialState, lam: float, grid) -> np.ndarray:
    """Closed-market portfolio change written with ``sin^2(lam t)``."""
    s2 = np.sin(lam * np.asarray(grid, dtype=float)) ** 2
    M, O = init.M, init.O
    return init.n * (O - M) * s2 + np.asarray(delta_n) * (M + (O - M) * s2) + delta_k


def solve(
    params: ModelParams,
    init: InitialState,
    schedule: PriceSchedule,
    grid=None,
    *,
    exps: Expectations | None = None,
) -> Trajectory:
    """Run the whole pipeline for one parameter set and price schedule."""
    if grid is None:
        grid = time_grid(schedule.horizon)
    grid = np.asarray(grid, dtype=float)
    price = eval_price(schedule, grid)
    if params.lam == 0.0:
        zero = np.zeros(grid.shape)
        return Trajectory(grid, price, zero.astype(complex), zero, zero.copy(), zero.copy())
    if exps is None:
        exps = omega12_closed_form(init, params.f1)
    coeffs = eta_coefficients(params, schedule, grid)
    r = correlation_r(coeffs, exps)
    dn, dk = trader_deltas(r, schedule, grid, params.lam)
    dpi = portfolio_delta(dn, dk, schedule, init.n, grid)
    return Trajectory(grid, price, r, dn, dk, dpi)


def solve_closed(params: ModelParams, init: InitialState, grid=None, horizon: float = 6.0) -> Trajectory:
    """Closed market: the price is the oscillating mean price set by ``(M, O, lam)``."""
    from .schedules import closed_schedule

    schedule = closed_schedule(init.M, init.O, params.lam, horizon)
    traj = solve(params, init, schedule, grid)
    traj.meta.update(kind="closed", M=init.M, O=init.O)
    return traj
