"""Iterative extraction of superimposed log-periodic layers from fit residuals."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fit_engine import (
    FitConfig,
    FitError,
    FitResult,
    OptimizationFailure,
    _Box,
    _local_search,
    _select,
    _series_arrays,
    _starts,
    default_tc_bounds,
    fit,
    tc_start_grid,
)
from .model import OscLayerParams, normalize_phase, time_to_singularity, trend_component
from .timebase import MIN_FIT_POINTS

__all__ = [
    "NoLayer",
    "CascadeLayer",
    "CascadeResult",
    "fit_osc_layer",
    "run_cascade",
    "oscillatory_view",
    "DEFAULT_BETA_BOUNDS",
]

DEFAULT_BETA_BOUNDS = (-1.0, 3.0)


class NoLayer(Exception):
    """Residual is numerically zero; there is nothing left to extract."""


@dataclass
class CascadeLayer:
    depth: int
    layer_params: OscLayerParams
    input_residual: np.ndarray
    output_residual: np.ndarray
    rss_reduction: float

    def summary(self) -> dict:
        return {"depth": self.depth, "layer_params": self.layer_params.as_dict(),
                "rss_reduction": self.rss_reduction,
                "input_rss": float(self.input_residual @ self.input_residual),
                "output_rss": float(self.output_residual @ self.output_residual)}


@dataclass
class CascadeResult:
    base_fit: FitResult
    layers: list[CascadeLayer] = field(default_factory=list)
    stop_reason: str = ""

    @property
    def tc_values(self) -> list[float]:
        return [self.base_fit.params.t_c] + [l.layer_params.t_c for l in self.layers]

    @property
    def tc_spread(self) -> float:
        tcs = self.tc_values
        return float(max(tcs) - min(tcs))

    def summary(self) -> dict:
        return {"base_fit": self.base_fit.summary(),
                "layers": [l.summary() for l in self.layers],
                "tc_spread": self.tc_spread, "stop_reason": self.stop_reason}


def _layer_profile(t, r, t_c, beta, omega, orientation):
    """Best (a, phi) for fixed (t_c, beta, omega) via the cos/sin pair; returns rss too."""
    dt = time_to_singularity(t, t_c, orientation)
    logdt = np.log(dt)
    f = np.exp(beta * logdt)
    x = omega * logdt
    X = np.column_stack([f * np.cos(x), f * np.sin(x)])
    coef, *_ = np.linalg.lstsq(X, r, rcond=1e-12)
    res = r - X @ coef
    c1, c2 = coef
    return float(res @ res), math.hypot(c1, c2), math.atan2(-c2, c1)


def _layer_single(t, r, t_c, beta, omega, phi, orientation):
    """Slaved amplitude for the single basis function at fixed phase."""
    dt = time_to_singularity(t, t_c, orientation)
    h = dt**beta * np.cos(omega * np.log(dt) + phi)
    hh = float(h @ h)
    a = float(h @ r) / hh if hh > 0 else 0.0
    res = r - a * h
    return float(res @ res), a


def fit_osc_layer(residual, config: FitConfig | None = None, beta_bounds=DEFAULT_BETA_BOUNDS,
                  data_range: float = 1.0) -> OscLayerParams:
    """Fit ``a |t_c - t|^beta cos(omega ln|t_c - t| + phi)`` to a residual series.

    ``residual`` is a :class:`PriceSeries` or ``(t, values)``. Raises
    :class:`NoLayer` when ``max |r| < 1e-12 * data_range``.
    """
    config = config or FitConfig()
    t, r = _series_arrays(residual)
    if t.size < MIN_FIT_POINTS:
        raise FitError(f"need at least {MIN_FIT_POINTS} residual points, got {t.size}")
    if float(np.max(np.abs(r))) < 1e-12 * data_range:
        raise NoLayer("residual is numerically zero")
    orientation = config.orientation
    tc_bounds = config.tc_bounds or default_tc_bounds(t, orientation, config.tc_reach)
    edge = float(t[-1] if orientation == "bubble" else t[0])
    grid = tc_start_grid(tc_bounds, edge, config.tc_grid_points)
    tc_unit = (grid - tc_bounds[0]) / (tc_bounds[1] - tc_bounds[0])
    box = _Box([tc_bounds, beta_bounds, config.omega_bounds], [False, False, True])

    def fun(u):
        tc, b, w = box.to_params(u)
        return _layer_profile(t, r, tc, b, w, orientation)[0]

    starts = _starts(config, 3)
    idx = np.minimum((starts[:, 0] * len(tc_unit)).astype(int), len(tc_unit) - 1)
    starts[:, 0] = tc_unit[idx]
    rr = float(r @ r)
    coarse = []
    for i, u0 in enumerate(starts):
        res = _local_search(fun, u0, config, xatol=1e-4, fatol=1e-9 * rr,
                            maxiter=min(config.max_iterations, 400))
        if math.isfinite(res.fun):
            coarse.append((float(res.fun), i, res.x))
    if not coarse:
        raise OptimizationFailure("no layer start produced a finite objective")
    coarse.sort(key=lambda c: (c[0], c[1]))
    picked = []
    for _, _, u in coarse:
        if all(np.max(np.abs(u - v)) > 1e-3 for v in picked):
            picked.append(u)
        if len(picked) == config.n_refine:
            break
    cands = []
    for u0 in picked:
        res = _local_search(fun, u0, config, step=0.01, fatol=config.fatol * rr)
        tc, b, w = box.to_params(res.x)
        rss, a, phi = _layer_profile(t, r, tc, b, w, orientation)
        cands.append((rss, float(tc), float(w), float(b), normalize_phase(phi), a))
    rss, tc, w, b, phi, a = _select(cands)

    # full-parameter polish with the single-function model
    pbox = _Box([tc_bounds, beta_bounds, config.omega_bounds, (phi - math.pi, phi + math.pi)],
                [False, False, True, False])

    def pfun(u):
        p = pbox.to_params(u)
        return _layer_single(t, r, p[0], p[1], p[2], p[3], orientation)[0]

    res = _local_search(pfun, pbox.to_unit([tc, b, w, phi]), config, step=1e-4, fatol=config.fatol * rr)
    p = pbox.to_params(res.x)
    prss, pa = _layer_single(t, r, p[0], p[1], p[2], p[3], orientation)
    if prss <= rss:
        tc, b, w, phi, a = float(p[0]), float(p[1]), float(p[2]), float(p[3]), pa
    if a < 0:
        a, phi = -a, phi + math.pi
    return OscLayerParams(a=float(a), beta=b, omega=w, phi=phi, t_c=tc, orientation=orientation)


def run_cascade(series, config: FitConfig | None = None, max_depth: int = 4,
                reduction_floor: float = 0.05, beta_bounds=DEFAULT_BETA_BOUNDS) -> CascadeResult:
    """Base LPPL fit followed by up to ``max_depth`` oscillation layers.

    Each layer is fitted to the previous residual (data minus everything
    fitted so far). A layer explaining no more than ``reduction_floor`` of its
    input residual sum of squares is discarded and the cascade stops.
    """
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    config = config or FitConfig()
    base = fit(series, config)
    t, y = _series_arrays(series)
    data_range = float(np.ptp(y)) or 1.0
    result = CascadeResult(base_fit=base)
    resid = np.array(base.residuals, dtype=float)
    for depth in range(1, max_depth + 1):
        try:
            layer = fit_osc_layer((t, resid), config, beta_bounds, data_range)
        except NoLayer:
            result.stop_reason = "zero_residual"
            return result
        out = resid - layer(t)
        rin = float(resid @ resid)
        reduction = min(max(1.0 - float(out @ out) / rin, 0.0), 1.0)
        if reduction <= reduction_floor:
            result.stop_reason = "below_reduction_floor"
            return result
        result.layers.append(CascadeLayer(depth, layer, resid, out, reduction))
        resid = out
    result.stop_reason = "max_depth"
    return result


def oscillatory_view(series, fit_result: FitResult) -> np.ndarray:
    """Data minus the fitted power-law trend only; the log-periodic part is kept."""
    t, y = _series_arrays(series)
    return y - trend_component(fit_result.params, t)
