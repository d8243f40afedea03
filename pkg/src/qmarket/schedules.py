"""Price schedules: the four builtin piecewise-linear profiles, the
closed-market price oscillation and user-defined breakpoint schedules."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

BUILTIN_NAMES = ("P1", "P2", "P3", "P4")


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class Segment:
    """Linear piece ``P(t) = a + b*t`` on ``[t_start, t_end]``."""

    t_start: float
    t_end: float
    a: float
    b: float

    def __call__(self, t):
        return self.a + self.b * t

    def antiderivative(self, t):
        # primitive of a + b*t, zero at t = 0
        return self.a * t + 0.5 * self.b * t * t


@dataclass(frozen=True)
class PriceSchedule:
    """A price as a function of time on ``[0, horizon]``.

    ``kind`` is one of ``P1``..``P4``, ``closed`` or ``custom``. Piecewise
    linear kinds carry ``segments``; the closed-market kind carries
    ``(M, O, lam)`` and evaluates ``((M+O) + (M-O) cos(2 lam t)) / 2``.
    """

    kind: str
    horizon: float
    segments: tuple[Segment, ...] = ()
    closed: tuple[float, float, float] | None = None
    breaks: tuple[float, ...] = field(default=(), init=False)

    def __post_init__(self):
        if self.horizon <= 0:
            raise ScheduleError(f"horizon must be positive, got {self.horizon}")
        if self.closed is None:
            _check_segments(self.segments, self.horizon)
            object.__setattr__(
                self, "breaks", tuple(s.t_start for s in self.segments[1:])
            )

    @property
    def is_closed_model(self) -> bool:
        return self.closed is not None

    def __call__(self, t):
        return eval_price(self, t)

    def slope(self, t):
        """Right-hand derivative of the price (left-hand at the horizon)."""
        t = np.asarray(t, dtype=float)
        if self.closed is not None:
            M, O, lam = self.closed
            return -(M - O) * lam * np.sin(2.0 * lam * t)
        out = np.empty_like(t)
        idx = self._segment_index(t)
        for i, seg in enumerate(self.segments):
            out[idx == i] = seg.b
        return out

    def _segment_index(self, t):
        starts = np.array([s.t_start for s in self.segments[1:]])
        idx = np.searchsorted(starts, t, side="right")
        return np.minimum(idx, len(self.segments) - 1)

    def smooth_mask(self, grid, width: int = 1) -> np.ndarray:
        """True at grid nodes farther than ``width`` steps from every kink."""
        grid = np.asarray(grid, dtype=float)
        mask = np.ones(grid.shape, dtype=bool)
        if len(grid) < 2:
            return mask
        h = grid[1] - grid[0]
        for tb in self.breaks:
            mask &= np.abs(grid - tb) > width * h * (1 + 1e-9)
        return mask


def _check_segments(segments: Sequence[Segment], horizon: float) -> None:
    if not segments:
        raise ScheduleError("a piecewise-linear schedule needs at least one segment")
    if segments[0].t_start != 0.0:
        raise ScheduleError("first segment must start at t = 0")
    if segments[-1].t_end < horizon:
        raise ScheduleError(
            f"segments end at {segments[-1].t_end}, before horizon {horizon}"
        )
    for left, right in zip(segments, segments[1:]):
        if left.t_end != right.t_start:
            raise ScheduleError(
                f"segments not contiguous at t={left.t_end} / t={right.t_start}"
            )
        if not np.isclose(left(left.t_end), right(right.t_start), atol=1e-12):
            raise ScheduleError(f"price is discontinuous at t={left.t_end}")
    for seg in segments:
        if seg.t_end <= seg.t_start:
            raise ScheduleError(f"empty segment [{seg.t_start}, {seg.t_end}]")
        lo = seg(seg.t_start)
        hi = seg(min(seg.t_end, horizon)) if seg.t_start < horizon else lo
        if min(lo, hi) < -1e-12:
            raise ScheduleError(f"negative price on [{seg.t_start}, {seg.t_end}]")


def _from_pieces(kind, horizon, pieces):
    # pieces: (t_start, t_end, a, b); the last one is stretched to the horizon
    segs = [Segment(*p) for p in pieces]
    last = segs[-1]
    segs[-1] = Segment(last.t_start, max(horizon, last.t_end), last.a, last.b)
    return PriceSchedule(kind, horizon, tuple(segs))


def builtin_schedule(name: str, horizon: float = 6.0) -> PriceSchedule:
    """Return one of the builtin schedules ``P1``..``P4``."""
    if name not in BUILTIN_NAMES:
        raise ScheduleError(f"unknown schedule {name!r}; expected one of {BUILTIN_NAMES}")
    if horizon < 4:
        raise ScheduleError("builtin schedules need a horizon of at least 4")
    pieces = {
        "P1": [(0.0, horizon, 0.0, 1.0)],
        "P2": [(0.0, 1.0, 0.0, 0.0), (1.0, 3.0, -1.0, 1.0), (3.0, horizon, 2.0, 0.0)],
        "P3": [(0.0, 1.0, 2.0, 0.0), (1.0, 3.0, 3.0, -1.0), (3.0, horizon, 0.0, 0.0)],
        "P4": [
            (0.0, 1.0, 0.0, 0.0),
            (1.0, 3.0, -1.0, 1.0),
            (3.0, 4.0, 5.0, -1.0),
            (4.0, horizon, 1.0, 0.0),
        ],
    }[name]
    return _from_pieces(name, horizon, pieces)


def closed_schedule(M: float, O: float, lam: float, horizon: float = 6.0) -> PriceSchedule:
    """Mean price of the closed market, oscillating between ``M`` and ``O``."""
    return PriceSchedule("closed", horizon, closed=(float(M), float(O), float(lam)))


def custom_schedule(breakpoints, horizon: float | None = None) -> PriceSchedule:
    """Linear interpolation through ``(t, P)`` breakpoints starting at ``t = 0``.

    The last breakpoint value is held constant up to ``horizon`` when the
    horizon lies beyond the final breakpoint.
    """
    pts = [(float(t), float(p)) for t, p in breakpoints]
    if len(pts) < 2:
        raise ScheduleError("custom schedule needs at least two breakpoints")
    ts = [t for t, _ in pts]
    if any(b <= a for a, b in zip(ts, ts[1:])):
        raise ScheduleError("breakpoint times must be strictly increasing")
    if any(p < 0 for _, p in pts):
        raise ScheduleError("prices must be nonnegative")
    if horizon is None:
        horizon = ts[-1]
    pieces = []
    for (t0, p0), (t1, p1) in zip(pts, pts[1:]):
        b = (p1 - p0) / (t1 - t0)
        pieces.append((t0, t1, p0 - b * t0, b))
    if horizon > ts[-1]:
        pieces.append((ts[-1], horizon, pts[-1][1], 0.0))
    segs = tuple(Segment(*p) for p in pieces)
    return PriceSchedule("custom", horizon, segs)


def eval_price(schedule: PriceSchedule, t):
    """Evaluate the price at ``t`` (scalar or array) inside ``[0, horizon]``."""
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0) or np.any(arr > schedule.horizon * (1 + 1e-12)):
        raise ScheduleError(f"t outside [0, {schedule.horizon}]")
    if schedule.closed is not None:
        M, O, lam = schedule.closed
        out = 0.5 * ((M + O) + (M - O) * np.cos(2.0 * lam * arr))
    else:
        out = np.empty_like(arr)
        idx = schedule._segment_index(arr)
        for i, seg in enumerate(schedule.segments):
            sel = idx == i
            out[sel] = seg(arr[sel])
    return out if out.ndim else float(out)


def phase_integral(schedule: PriceSchedule, t, rate: float, offset: float):
    """Exact ``int_0^t (rate * P(s) - offset) ds`` for linear-piece or closed schedules."""
    t = np.asarray(t, dtype=float)
    if schedule.closed is not None:
        M, O, lam = schedule.closed
        slope = 0.5 * (M + O) * rate - offset
        if lam == 0.0:
            # cos(0) = 1: the price sits at M for all t
            return (M * rate - offset) * t
        return slope * t + rate * (M - O) / (4.0 * lam) * np.sin(2.0 * lam * t)
    out = np.empty_like(t)
    idx = schedule._segment_index(t)
    base = 0.0
    for i, seg in enumerate(schedule.segments):
        sel = idx == i
        out[sel] = base + seg.antiderivative(t[sel]) - seg.antiderivative(seg.t_start)
        base += seg.antiderivative(seg.t_end) - seg.antiderivative(seg.t_start)
    return rate * out - offset * t
