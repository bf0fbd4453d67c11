"""Bubble / negative bubble / antibubble discrimination.

Both orientations of the LPPL are fitted: singularity ahead of the window
(periods shrinking toward the future) and singularity behind it (periods
growing away from it). An orientation is rejected as degenerate when its
fit shows any of

* an oscillation amplitude below the noise floor,
* alpha pinned at a search bound,
* fewer than ``min_periods`` full log-periods inside the window.

The noise floor is ``floor_factor`` (default 6) standard errors of a least-squares
sinusoid amplitude, ``sigma * sqrt(2 / N)``, with ``sigma`` the rmse of the
trend-only fit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks

from .fit_engine import FitConfig, FitError, FitResult, _series_arrays, fit, fit_fixed_tc, fit_power_law
from .model import TWO_PI, n_periods, oscillatory_component, time_to_singularity, trend_component

__all__ = [
    "ClassifyConfig",
    "RegimeVerdict",
    "classify",
    "antibubble_probe",
    "ProbeResult",
    "degeneracy_flags",
    "extrema_match_score",
    "MIN_CLASSIFY_POINTS",
]

MIN_CLASSIFY_POINTS = 16
# moving-average half-width (samples) for locating data extrema; wider boxes
# erase the fast oscillations next to t_c
_SMOOTH_HALF_WIDTH = 2


@dataclass(frozen=True)
class ClassifyConfig:
    rss_margin: float = 0.10
    floor_factor: float = 6.0
    min_periods: float = 2.0


@dataclass
class RegimeVerdict:
    label: str
    bubble_fit: FitResult | None
    antibubble_fit: FitResult | None
    evidence: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "label": self.label,
            "bubble_fit": self.bubble_fit.summary() if self.bubble_fit else None,
            "antibubble_fit": self.antibubble_fit.summary() if self.antibubble_fit else None,
            "evidence": self.evidence,
        }


@dataclass
class ProbeResult:
    fit: FitResult
    flags: dict
    extrema_match: float

    @property
    def degenerate(self) -> bool:
        return any(self.flags.values())

    def summary(self) -> dict:
        return {"fit": self.fit.summary(), "flags": self.flags, "degenerate": self.degenerate,
                "extrema_match": self.extrema_match}


def _osc_amplitude(fr: FitResult) -> float:
    """sqrt(2) x RMS of the fitted log-periodic component over the window."""
    osc = oscillatory_component(fr.params, fr.t)
    return float(math.sqrt(2.0 * np.mean(osc * osc)))


def degeneracy_flags(fr: FitResult, trend_rmse: float, cfg: ClassifyConfig = ClassifyConfig()) -> dict:
    p = fr.params
    floor = cfg.floor_factor * trend_rmse * math.sqrt(2.0 / fr.n_points)
    periods = n_periods(p.omega, p.t_c, fr.t[0], fr.t[-1], p.orientation)
    return {
        "amplitude_below_floor": bool(_osc_amplitude(fr) < floor),
        "alpha_at_bound": bool(fr.flags.get("alpha_at_bound", False)),
        "too_few_periods": bool(periods < cfg.min_periods),
    }


def _box_smooth(v: np.ndarray, k: int) -> np.ndarray:
    return np.convolve(v, np.ones(2 * k + 1) / (2 * k + 1), mode="same")


def extrema_match_score(series, fr: FitResult, tolerance: float = 0.125) -> float:
    """Two-sided agreement between data and model extrema, in ``[0, 1]``.

    Works in ``tau = ln|t_c - t|``, where the model oscillation has period
    ``P = 2 pi / omega``. Data extrema are the prominent peaks and troughs of
    the oscillatory view (data minus fitted trend) after a 5-point moving
    average; the prominence threshold is the larger of 4 smoothed-noise
    standard deviations and 0.3 times the local data amplitude (sqrt(2) x
    rolling RMS of the smoothed view over one period ``P``).

    Extrema of the same type are paired one-to-one, nearest first, when
    within ``tolerance * P`` of each other. The score is
    ``pairs / (pairs + unpaired data + unpaired resolvable model)``, where a
    model extremum is resolvable if it lies at least ``P/4`` inside the window
    and its envelope is above half the threshold (the data could show it).
    A model that misses data extrema is penalised as much as one that invents
    them. Returns 0 when neither side has an extremum.
    """
    t, y = _series_arrays(series)
    p = fr.params
    tau = np.log(time_to_singularity(t, p.t_c, p.orientation))
    order = np.argsort(tau)
    tau = tau[order]
    view = (y - trend_component(p, t))[order]
    k = _SMOOTH_HALF_WIDTH
    if t.size < 4 * k + 3:
        return 0.0
    smooth = _box_smooth(view, k)
    noise = float(np.std(view - smooth)) / math.sqrt(2 * k + 1)
    ts, sm = tau[k:-k], smooth[k:-k]
    amp = abs(p.m * p.C)
    period = TWO_PI / p.omega
    # local oscillation amplitude of the data (rolling RMS over one period), so
    # the model cannot hide data extrema behind its own envelope
    c2 = np.concatenate([[0.0], np.cumsum(sm * sm)])
    lo_i = np.searchsorted(ts, ts - period / 2.0, side="left")
    hi_i = np.searchsorted(ts, ts + period / 2.0, side="right")
    local = np.sqrt(2.0 * (c2[hi_i] - c2[lo_i]) / (hi_i - lo_i))
    thresh = np.maximum(4.0 * noise, 0.3 * local)

    # extrema where omega*tau + phi = j*pi; the sign of m*C decides max vs min
    sign = 1.0 if p.m * p.C >= 0 else -1.0
    model = {True: [], False: []}
    for j in range(math.ceil((p.omega * ts[0] + p.phi) / math.pi),
                   math.floor((p.omega * ts[-1] + p.phi) / math.pi) + 1):
        tj = (j * math.pi - p.phi) / p.omega
        resolvable = (ts[0] + period / 4.0 <= tj <= ts[-1] - period / 4.0
                      and 2.0 * amp * math.exp(p.alpha * tj) >= float(np.interp(tj, ts, thresh)))
        model[(j % 2 == 0) == (sign > 0)].append((tj, resolvable))

    pairs = unpaired = 0
    for is_max in (True, False):
        idx, _ = find_peaks(sm if is_max else -sm, prominence=thresh)
        free = [float(x) for x in ts[idx]]
        for tj, resolvable in model[is_max]:
            near = [x for x in free if abs(x - tj) <= tolerance * period]
            if near:
                free.remove(min(near, key=lambda x: abs(x - tj)))
                pairs += 1
            elif resolvable:
                unpaired += 1
        unpaired += len(free)
    n = pairs + unpaired
    return float(pairs) / n if n else 0.0


def antibubble_probe(series, t_c_fixed: float, config: FitConfig | None = None,
                     cfg: ClassifyConfig = ClassifyConfig()) -> ProbeResult:
    """Antibubble fit with the singularity fixed before the window."""
    config = (config or FitConfig()).replace(orientation="antibubble", tc_bounds=None)
    t, _ = _series_arrays(series)
    if not t_c_fixed < t[0]:
        raise FitError(f"probe t_c={t_c_fixed} must precede the first observation {t[0]}")
    fr = fit_fixed_tc(series, t_c_fixed, config)
    trend = fit_power_law(series, config.replace(tc_bounds=None))
    return ProbeResult(fr, degeneracy_flags(fr, trend.rmse, cfg), extrema_match_score(series, fr))


def classify(series, config: FitConfig | None = None, cfg: ClassifyConfig = ClassifyConfig()) -> RegimeVerdict:
    t, y = _series_arrays(series)
    if t.size < MIN_CLASSIFY_POINTS:
        raise FitError(f"classification needs at least {MIN_CLASSIFY_POINTS} points, got {t.size}")
    config = config or FitConfig()
    fits, trends, flags = {}, {}, {}
    for orient in ("bubble", "antibubble"):
        c = config.replace(orientation=orient, tc_bounds=None)
        fits[orient] = fit(series, c)
        trends[orient] = fit_power_law(series, c)
    trend_rmse = min(tr.rmse for tr in trends.values())
    for orient, fr in fits.items():
        flags[orient] = degeneracy_flags(fr, trend_rmse, cfg)
        flags[orient]["no_gain_over_trend"] = bool(fr.rss >= trends[orient].rss)

    ok = [o for o in fits if not any(flags[o].values())]
    b, a = fits["bubble"], fits["antibubble"]
    ratio = a.rss / b.rss if b.rss > 0 else math.inf
    evidence = {
        "rss_ratio_antibubble_over_bubble": ratio,
        "trend_only_rmse": trend_rmse,
        "degeneracy": flags,
        "extrema_match": {o: extrema_match_score(series, fr) for o, fr in fits.items()},
        "amplitude": {o: _osc_amplitude(fr) for o, fr in fits.items()},
        "ambiguous": False,
    }
    if not ok:
        label_orient = None
    elif len(ok) == 1:
        label_orient = ok[0]
    else:
        lo, hi = sorted(ok, key=lambda o: fits[o].rss)
        label_orient = lo
        evidence["ambiguous"] = bool(fits[lo].rss > (1.0 - cfg.rss_margin) * fits[hi].rss)

    if label_orient is None:
        label = "none"
    elif label_orient == "antibubble":
        label = "antibubble"
    else:
        # m > 0: the trend falls toward A as t -> t_c
        label = "negative_bubble" if b.params.m > 0 else "positive_bubble"
    return RegimeVerdict(label, b, a, evidence)
