"""Bracketing the singularity time by fixed-t_c continuation scans.

Starting from the unconstrained optimum, t_c is stepped outward one grid
step at a time in each direction. At every step the remaining parameters
are refitted from the neighbouring solution, and the refit is scored by the
phase agreement between data and model oscillations near the window end.
A bound sits at the last t_c whose score is still at or above the
threshold; once the score falls below it the data oscillate out of phase
with the model.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cascade import oscillatory_view
from .fit_engine import DAY, FitConfig, FitError, FitResult, _series_arrays, fit, fit_fixed_tc
from .model import TWO_PI, oscillatory_component, time_to_singularity
from .timebase import from_decimal_year

__all__ = [
    "InsufficientData",
    "ScanPoint",
    "SingularityWindow",
    "phase_score",
    "scan_tc",
    "estimate_window",
    "window_from_scan",
    "log_time_view",
]

MIN_TAIL_POINTS = 6


class InsufficientData(FitError):
    pass


@dataclass(frozen=True)
class ScanPoint:
    t_c: float
    rss: float
    phase_score: float
    fit: FitResult = field(repr=False, compare=False)


@dataclass
class SingularityWindow:
    tc_low: float
    tc_high: float
    tc_best: float
    scan: list[ScanPoint]
    threshold: float
    criterion: str = "antiphase"
    open_low: bool = False
    open_high: bool = False
    best_score: float = float("nan")

    @property
    def bounded(self) -> bool:
        return not (self.open_low or self.open_high)

    @property
    def width(self) -> float:
        return self.tc_high - self.tc_low

    def contains(self, t_c: float) -> bool:
        return self.tc_low <= t_c <= self.tc_high

    def summary(self) -> dict:
        def stamp(x):
            return {"decimal_year": x, "iso": from_decimal_year(x).isoformat()}

        return {
            "tc_low": stamp(self.tc_low), "tc_high": stamp(self.tc_high), "tc_best": stamp(self.tc_best),
            "open_low": self.open_low, "open_high": self.open_high, "bounded": self.bounded,
            "threshold": self.threshold, "criterion": self.criterion, "best_score": self.best_score,
            "note": "antiphase bracket from fixed-t_c refits; not a statistical confidence interval",
            "scan": [{"t_c": p.t_c, "rss": p.rss, "phase_score": p.phase_score} for p in self.scan],
        }


def _tail_mask(tau: np.ndarray, omega: float, tail_periods: float) -> np.ndarray:
    # data nearest t_c has the smallest tau in both orientations
    return tau <= tau.min() + tail_periods * TWO_PI / omega


def phase_score(series, fit_result: FitResult, tail_periods: float = 2.0) -> float:
    """Correlation of data and model oscillations over the last ``tail_periods`` log-periods.

    Both sides are taken on the fit's trend: the data's oscillatory view
    against the model's log-periodic component. +1 means in phase, -1 antiphase.
    """
    if tail_periods < 1:
        raise ValueError("tail_periods must be >= 1")
    t, y = _series_arrays(series)
    p = fit_result.params
    tau = np.log(time_to_singularity(t, p.t_c, p.orientation))
    mask = _tail_mask(tau, p.omega, tail_periods)
    if mask.sum() < MIN_TAIL_POINTS:
        raise InsufficientData(f"only {int(mask.sum())} points in the last {tail_periods} log-periods")
    data = oscillatory_view((t[mask], y[mask]), fit_result)
    model = oscillatory_component(p, t[mask])
    data = data - data.mean()
    model = model - model.mean()
    denom = math.sqrt(float(data @ data) * float(model @ model))
    if denom == 0.0:
        return 0.0
    return float(np.clip(float(data @ model) / denom, -1.0, 1.0))


def _scan_direction(series, best: FitResult, config: FitConfig, step: float, sign: int,
                    max_steps: int, tail_periods: float, edge: float, orientation: str):
    points = []
    prev = best.params
    for k in range(1, max_steps + 1):
        tc = best.params.t_c + sign * k * step
        if (orientation == "bubble" and tc <= edge) or (orientation == "antibubble" and tc >= edge):
            break
        fr = fit_fixed_tc(series, tc, config, initial=[prev])
        try:
            score = phase_score(series, fr, tail_periods)
        except InsufficientData:
            score = float("nan")
        points.append(ScanPoint(tc, fr.rss, score, fr))
        prev = fr.params
    return points


def scan_tc(series, best: FitResult, config: FitConfig | None = None, scan_step_days: float = 1.0,
            max_days: float = 60.0, tail_periods: float = 2.0) -> list[ScanPoint]:
    """Continuation scan of fixed-t_c refits on both sides of ``best``, in t_c order.

    Each refit is a local search started from its neighbour's solution.
    """
    config = (config or FitConfig()).replace(n_starts=0, orientation=best.params.orientation)
    t, _ = _series_arrays(series)
    step = scan_step_days * DAY
    n = int(math.floor(max_days / scan_step_days + 1e-9))
    edge = float(t[-1] if config.orientation == "bubble" else t[0])
    try:
        s0 = phase_score(series, best, tail_periods)
    except InsufficientData:
        s0 = float("nan")
    down = _scan_direction(series, best, config, step, -1, n, tail_periods, edge, config.orientation)
    up = _scan_direction(series, best, config, step, +1, n, tail_periods, edge, config.orientation)
    return down[::-1] + [ScanPoint(best.params.t_c, best.rss, s0, best)] + up


def window_from_scan(scan: list[ScanPoint], tc_best: float, threshold: float = 0.0) -> SingularityWindow:
    """Place bounds on a finished scan table.

    Walking outward from ``tc_best``, each bound is the last t_c whose score is
    at least ``threshold``. A side that never drops below it is reported open
    at its last scanned point.
    """
    i0 = next(i for i, p in enumerate(scan) if p.t_c == tc_best)
    best_score = scan[i0].phase_score

    def passes(p):
        return not math.isnan(p.phase_score) and p.phase_score >= threshold

    if not passes(scan[i0]):
        return SingularityWindow(tc_best, tc_best, tc_best, scan, threshold, open_low=True,
                                 open_high=True, best_score=best_score)
    lo, open_low = i0, True
    for i in range(i0 - 1, -1, -1):
        if not passes(scan[i]):
            open_low = False
            break
        lo = i
    hi, open_high = i0, True
    for i in range(i0 + 1, len(scan)):
        if not passes(scan[i]):
            open_high = False
            break
        hi = i
    return SingularityWindow(scan[lo].t_c, scan[hi].t_c, tc_best, scan, threshold,
                             open_low=open_low, open_high=open_high, best_score=best_score)


def estimate_window(series, config: FitConfig | None = None, scan_step_days: float = 1.0,
                    threshold: float = 0.0, tail_periods: float = 2.0, max_days: float = 60.0,
                    best: FitResult | None = None) -> SingularityWindow:
    """Unconstrained fit, continuation scan, then bounds at the antiphase onset."""
    config = config or FitConfig()
    best = best or fit(series, config)
    scan = scan_tc(series, best, config, scan_step_days, max_days, tail_periods)
    return window_from_scan(scan, best.params.t_c, threshold)


def log_time_view(series, fit_result: FitResult):
    """Oscillatory view re-indexed by ``tau = ln|t_c - t|``.

    Returns ``(tau, data_view, model_oscillation)`` sorted by ascending tau, so
    for a bubble the first entries are the observations closest to t_c.
    """
    t, y = _series_arrays(series)
    p = fit_result.params
    tau = np.log(time_to_singularity(t, p.t_c, p.orientation))
    order = np.argsort(tau)
    view = oscillatory_view((t, y), fit_result)
    return tau[order], view[order], oscillatory_component(p, t)[order]
