"""Dispersion (sum of squared residuals) minimisation of the LPPL.

The linear parameters (A, m, m*C) are slaved: for each trial of the
nonlinear parameters they are the exact least-squares solution. The
nonlinear search is a bounded Nelder-Mead simplex run from a deterministic
set of scrambled-Sobol starts.

During the multi-start phase the phase ``phi`` is profiled out exactly
through a cos/sin pair of basis functions, so each simplex works over
(t_c, alpha, omega) only. The winning start is then polished over the full
(t_c, alpha, omega, phi) with the three-function basis of :func:`objective`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from .model import TWO_PI, LpplParams, evaluate, normalize_phase, time_to_singularity
from .timebase import MIN_FIT_POINTS, PriceSeries

__all__ = [
    "FitError",
    "OptimizationFailure",
    "FitConfig",
    "FitResult",
    "ObjectiveValue",
    "objective",
    "slaved_rss",
    "fit",
    "fit_fixed_tc",
    "default_tc_bounds",
    "tc_start_grid",
    "fit_power_law",
]

DAY = 1.0 / 365.25
# alpha below which (dt^alpha - 1)/alpha is replaced by its series expansion
_ALPHA_SERIES = 1e-7


class FitError(ValueError):
    """Invalid input to a fit (too few points, bad bounds, wrong side of t_c)."""


class OptimizationFailure(RuntimeError):
    """No start converged; ``diagnostics`` lists one entry per start."""

    def __init__(self, message, diagnostics=()):
        super().__init__(message)
        self.diagnostics = list(diagnostics)


@dataclass(frozen=True)
class FitConfig:
    """Search configuration.

    ``tc_bounds=None`` derives bounds from the series: a band starting one day
    past the data edge and extending ``tc_reach`` times the window length.
    """

    tc_bounds: tuple[float, float] | None = None
    alpha_bounds: tuple[float, float] = (1e-6, 3.0)
    omega_bounds: tuple[float, float] = (2.0, 200.0)
    n_starts: int = 64
    max_iterations: int = 2000
    seed: int = 0
    orientation: str = "bubble"
    tc_reach: float = 0.5
    tc_grid_points: int = 40
    n_refine: int = 4
    xatol: float = 1e-10
    fatol: float = 1e-15

    def __post_init__(self):
        for name in ("alpha_bounds", "omega_bounds"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise FitError(f"{name} must satisfy low < high, got {(lo, hi)}")
        if self.omega_bounds[0] <= 0 or self.alpha_bounds[0] <= 0:
            raise FitError("alpha and omega bounds must be positive")
        if self.tc_bounds is not None and not self.tc_bounds[0] < self.tc_bounds[1]:
            raise FitError(f"tc_bounds must satisfy low < high, got {self.tc_bounds}")
        if self.orientation not in ("bubble", "antibubble"):
            raise FitError(f"unknown orientation {self.orientation!r}")
        if self.n_starts < 0:
            raise FitError("n_starts must be >= 0")

    def replace(self, **kw) -> "FitConfig":
        return replace(self, **kw)

    def as_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


@dataclass
class FitResult:
    params: LpplParams
    rss: float
    rmse: float
    n_points: int
    optimization_window: tuple[float, float]
    starts_converged: int
    residuals: np.ndarray
    t: np.ndarray
    observed: np.ndarray
    n_starts: int = 0
    flags: dict = field(default_factory=dict)
    tc_fixed: bool = False

    def recompute_rss(self) -> float:
        r = self.observed - evaluate(self.params, self.t)
        return float(r @ r)

    def summary(self) -> dict:
        return {
            "params": self.params.as_dict(),
            "rss": self.rss,
            "rmse": self.rmse,
            "n_points": self.n_points,
            "optimization_window": list(self.optimization_window),
            "starts_converged": self.starts_converged,
            "n_starts": self.n_starts,
            "tc_fixed": self.tc_fixed,
            "flags": dict(self.flags),
        }


class ObjectiveValue(NamedTuple):
    rss: float
    A: float
    m: float
    mC: float
    degenerate: bool


def _series_arrays(series) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(series, PriceSeries):
        return series.t, series.values
    t, y = series
    return np.asarray(t, float), np.asarray(y, float)


def _power_basis(dt: np.ndarray, alpha: float):
    """Return ``dt^alpha`` and the well-conditioned ``(dt^alpha - 1)/alpha``."""
    logdt = np.log(dt)
    if alpha < _ALPHA_SERIES:
        x = alpha * logdt
        g = logdt * (1.0 + x / 2.0 + x * x / 6.0)
        return 1.0 + alpha * g, g, logdt
    f = np.exp(alpha * logdt)
    return f, np.expm1(alpha * logdt) / alpha, logdt


def _lstsq(X: np.ndarray, y: np.ndarray):
    scale = np.sqrt(np.einsum("ij,ij->j", X, X))
    ok = scale > 0
    scale[~ok] = 1.0
    coef, _, rank, sv = np.linalg.lstsq(X / scale, y, rcond=1e-12)
    coef = coef / scale
    r = y - X @ coef
    deficient = rank < X.shape[1] or not ok.all() or (sv[-1] < 1e-10 * sv[0])
    return coef, float(r @ r), bool(deficient)


def objective(series, nonlinear: Sequence[float], orientation: str = "bubble") -> ObjectiveValue:
    """Slaved least squares for fixed ``(t_c, alpha, omega, phi)``.

    Solves ``y ~ A + m dt^alpha + mC dt^alpha cos(omega ln dt + phi)`` for
    (A, m, mC). ``degenerate`` is set when the basis is numerically
    rank-deficient or the fitted non-constant part vanishes.
    """
    t, y = _series_arrays(series)
    if t.size < MIN_FIT_POINTS:
        raise FitError(f"need at least {MIN_FIT_POINTS} points, got {t.size}")
    t_c, alpha, omega, phi = (float(v) for v in nonlinear)
    dt = time_to_singularity(t, t_c, orientation)
    f, g, logdt = _power_basis(dt, alpha)
    osc = f * np.cos(omega * logdt + phi)
    X = np.column_stack([np.ones_like(t), g, osc])
    (a0, b0, c0), rss, deficient = _lstsq(X, y)
    m = b0 / alpha
    A = a0 - m
    span = max(float(np.max(np.abs(y))), 1.0)
    vanished = float(np.max(np.abs(b0 * g + c0 * osc))) < 1e-12 * span
    return ObjectiveValue(rss, A, m, c0, deficient or vanished)


def slaved_rss(t, y, t_c, alpha, omega, orientation="bubble"):
    """Profiled objective over phase: returns ``(rss, A, m, mC, phi)``.

    With basis {1, g, f cos(omega ln dt), f sin(omega ln dt)} the optimum
    over phi is exact: ``mC cos(x + phi) = c1 cos x + c2 sin x``.
    """
    dt = time_to_singularity(t, t_c, orientation)
    f, g, logdt = _power_basis(dt, alpha)
    x = omega * logdt
    X = np.column_stack([np.ones_like(t), g, f * np.cos(x), f * np.sin(x)])
    (a0, b0, c1, c2), rss, _ = _lstsq(X, y)
    m = b0 / alpha
    return rss, a0 - m, m, math.hypot(c1, c2), math.atan2(-c2, c1)


def default_tc_bounds(t: np.ndarray, orientation: str, reach: float = 0.5) -> tuple[float, float]:
    span = float(t[-1] - t[0])
    if orientation == "bubble":
        return float(t[-1]) + DAY, float(t[-1]) + max(reach * span, 2 * DAY)
    return float(t[0]) - max(reach * span, 2 * DAY), float(t[0]) - DAY


def tc_start_grid(tc_bounds, edge: float, n: int = 40) -> np.ndarray:
    """``n`` start values for t_c, geometrically denser toward the data edge."""
    lo, hi = tc_bounds
    near, far = (lo, hi) if abs(lo - edge) <= abs(hi - edge) else (hi, lo)
    d0 = max(abs(near - edge), 1e-6)
    d1 = abs(far - edge)
    sign = 1.0 if far >= near else -1.0
    ds = np.geomspace(d0, d1, n)
    grid = edge + sign * ds
    return np.sort(np.clip(grid, lo, hi))


class _Box:
    """Affine/log maps between the unit cube and the parameter box."""

    def __init__(self, bounds, logscale):
        self.lo = np.array([b[0] for b in bounds], float)
        self.hi = np.array([b[1] for b in bounds], float)
        self.logscale = np.array(logscale, bool)
        self._lo = self.lo.copy()
        self._hi = self.hi.copy()
        self._lo[self.logscale] = np.log(self.lo[self.logscale])
        self._hi[self.logscale] = np.log(self.hi[self.logscale])

    def to_params(self, u):
        v = self._lo + np.clip(u, 0.0, 1.0) * (self._hi - self._lo)
        v[self.logscale] = np.exp(v[self.logscale])
        return v

    def to_unit(self, p):
        v = np.array(p, dtype=float)
        v[self.logscale] = np.log(v[self.logscale])
        return np.clip((v - self._lo) / (self._hi - self._lo), 0.0, 1.0)


def _simplex(u0, step=0.05):
    n = len(u0)
    pts = [np.array(u0, float)]
    for i in range(n):
        p = np.array(u0, float)
        p[i] = p[i] + step if p[i] + step <= 1.0 else p[i] - step
        pts.append(p)
    return np.array(pts)


def _local_search(fun, u0, config: FitConfig, step=0.05, xatol=None, fatol=None, maxiter=None):
    maxiter = maxiter or config.max_iterations
    return minimize(
        fun, u0, method="Nelder-Mead",
        bounds=[(0.0, 1.0)] * len(u0),
        options={"initial_simplex": _simplex(u0, step), "maxiter": maxiter,
                 "maxfev": 2 * maxiter,
                 "xatol": config.xatol if xatol is None else xatol,
                 "fatol": config.fatol if fatol is None else fatol,
                 "adaptive": len(u0) > 2},
    )


def _validate(series, config: FitConfig, tc_bounds):
    t, y = _series_arrays(series)
    if t.size < MIN_FIT_POINTS:
        raise FitError(f"need at least {MIN_FIT_POINTS} points in the window, got {t.size}")
    if config.orientation == "bubble" and tc_bounds[0] <= t[-1]:
        raise FitError("t_c lower bound must lie after the last observation for bubble fits")
    if config.orientation == "antibubble" and tc_bounds[1] >= t[0]:
        raise FitError("t_c upper bound must lie before the first observation for antibubble fits")
    return t, y


def _starts(config: FitConfig, dims: int) -> np.ndarray:
    sampler = qmc.Sobol(d=dims, scramble=True, seed=config.seed)
    n = config.n_starts
    if n == 0:
        return np.empty((0, dims))
    m = max(int(math.ceil(math.log2(n))), 0)
    return sampler.random_base2(m)[:n]


def _finish(t, y, params: LpplParams, config: FitConfig, n_conv: int, n_starts: int,
            tc_bounds, tc_fixed: bool, degenerate: bool) -> FitResult:
    resid = y - evaluate(params, t)
    rss = float(resid @ resid)
    data_range = float(np.ptp(y)) or 1.0
    a_lo, a_hi = config.alpha_bounds
    w_lo, w_hi = config.omega_bounds
    tol = 1e-6
    flags = {
        "degenerate_basis": bool(degenerate),
        "quasi_logarithmic": bool(params.alpha < 0.01 and abs(params.A) > 100 * data_range),
        "alpha_at_bound": bool(params.alpha <= a_lo * (1 + 1e-3) + tol * (a_hi - a_lo)
                               or params.alpha >= a_hi - tol * (a_hi - a_lo)),
        "omega_at_bound": bool(params.omega <= w_lo * (1 + tol) or params.omega >= w_hi * (1 - tol)),
        "tc_at_bound": bool(not tc_fixed and (
            params.t_c <= tc_bounds[0] + tol * (tc_bounds[1] - tc_bounds[0])
            or params.t_c >= tc_bounds[1] - tol * (tc_bounds[1] - tc_bounds[0]))),
        "C_not_below_one": bool(abs(params.C) >= 1),
    }
    return FitResult(
        params=params, rss=rss, rmse=math.sqrt(rss / t.size), n_points=int(t.size),
        optimization_window=(float(t[0]), float(t[-1])), starts_converged=n_conv,
        residuals=resid, t=t, observed=y, n_starts=n_starts, flags=flags, tc_fixed=tc_fixed,
    )


def _make_params(t_c, alpha, omega, A, m, mC, phi, orientation) -> LpplParams:
    # canonical sign: C >= 0, absorbing a negative amplitude into phi
    if m == 0.0:
        C = 0.0
    else:
        C = mC / m
    if C < 0:
        C, phi = -C, phi + math.pi
    return LpplParams(A=float(A), m=float(m), alpha=float(alpha), C=float(C),
                      omega=float(omega), phi=normalize_phase(phi), t_c=float(t_c),
                      orientation=orientation)


def _select(cands):
    """Lowest rss; near-ties (1e-12 relative) broken lexicographically on (t_c, omega, alpha, phi)."""
    best = min(c[0] for c in cands)
    tied = [c for c in cands if c[0] <= best + 1e-12 * max(abs(best), 1e-300)]
    return min(tied, key=lambda c: (c[1], c[2], c[3], c[4]))


def _polish(t, y, x0, bounds, orientation, config, fixed_tc, tss):
    """Full-parameter Nelder-Mead with the three-function objective, from ``x0``."""
    names = ["t_c", "alpha", "omega", "phi"]
    free = [n for n in names if not (n == "t_c" and fixed_tc is not None)]
    box_bounds = {"t_c": bounds, "alpha": config.alpha_bounds,
                  "omega": config.omega_bounds, "phi": (x0["phi"] - math.pi, x0["phi"] + math.pi)}
    box = _Box([box_bounds[n] for n in free], [n == "omega" for n in free])

    def unpack(u):
        p = dict(zip(free, box.to_params(u)))
        if fixed_tc is not None:
            p["t_c"] = fixed_tc
        return p

    def fun(u):
        p = unpack(u)
        return objective((t, y), (p["t_c"], p["alpha"], p["omega"], p["phi"]), orientation).rss

    u0 = box.to_unit([x0[n] for n in free])
    res = _local_search(fun, u0, config, step=1e-4, fatol=config.fatol * tss)
    p = unpack(res.x)
    val = objective((t, y), (p["t_c"], p["alpha"], p["omega"], p["phi"]), orientation)
    return p, val


def _search(series, config: FitConfig, fixed_tc: float | None, initial=None) -> FitResult:
    orientation = config.orientation
    t, y = _series_arrays(series)
    if fixed_tc is None:
        tc_bounds = config.tc_bounds or default_tc_bounds(t, orientation, config.tc_reach)
    else:
        tc_bounds = (fixed_tc, fixed_tc + 1.0) if orientation == "bubble" else (fixed_tc - 1.0, fixed_tc)
        # only the lower (bubble) / upper (antibubble) edge matters for validation
    t, y = _validate((t, y), config, tc_bounds)

    if fixed_tc is None:
        edge = float(t[-1] if orientation == "bubble" else t[0])
        grid = tc_start_grid(tc_bounds, edge, config.tc_grid_points)
        box = _Box([tc_bounds, config.alpha_bounds, config.omega_bounds], [False, False, True])
        tc_unit = (grid - tc_bounds[0]) / (tc_bounds[1] - tc_bounds[0])
    else:
        box = _Box([config.alpha_bounds, config.omega_bounds], [False, True])

    def unpack(u):
        p = box.to_params(u)
        return (p[0], p[1], p[2]) if fixed_tc is None else (fixed_tc, p[0], p[1])

    def fun(u):
        tc, a, w = unpack(u)
        return slaved_rss(t, y, tc, a, w, orientation)[0]

    starts = _starts(config, 3 if fixed_tc is None else 2)
    if fixed_tc is None:
        # snap the t_c coordinate of each start onto the edge-dense grid
        idx = np.minimum((starts[:, 0] * len(tc_unit)).astype(int), len(tc_unit) - 1)
        starts[:, 0] = tc_unit[idx]
    starts = list(starts)
    if not starts and not initial:
        raise FitError("n_starts=0 requires explicit initial parameters")
    for p in initial or ():
        vec = [p.alpha, p.omega] if fixed_tc is not None else [p.t_c, p.alpha, p.omega]
        starts.append(box.to_unit(vec))

    # coarse pass from every start, then tight refinement of the best few
    tss = float(np.sum((y - y.mean()) ** 2)) or 1.0
    coarse, diagnostics = [], []
    for i, u0 in enumerate(starts):
        try:
            res = _local_search(fun, u0, config, xatol=1e-4, fatol=1e-9 * tss,
                                maxiter=min(config.max_iterations, 400))
        except (FloatingPointError, np.linalg.LinAlgError, ValueError) as exc:
            diagnostics.append({"start": i, "error": str(exc)})
            continue
        ok = math.isfinite(res.fun)
        diagnostics.append({"start": i, "rss": float(res.fun), "converged": bool(res.success and ok),
                            "nfev": int(res.nfev)})
        if ok:
            coarse.append((float(res.fun), i, res.x))
    n_conv = sum(1 for d in diagnostics if d.get("converged"))
    if not coarse:
        raise OptimizationFailure("no start converged", diagnostics)

    coarse.sort(key=lambda c: (c[0], c[1]))
    picked: list[np.ndarray] = []
    for _, _, u in coarse:
        if all(np.max(np.abs(u - v)) > 1e-3 for v in picked):
            picked.append(u)
        if len(picked) == config.n_refine:
            break
    cands = []
    for u0 in picked:
        res = _local_search(fun, u0, config, step=0.01, fatol=config.fatol * tss)
        tc, a, w = unpack(res.x)
        rss, A, m, mC, phi = slaved_rss(t, y, tc, a, w, orientation)
        if math.isfinite(rss):
            cands.append((rss, float(tc), float(w), float(a), normalize_phase(phi), A, m, mC))
    if not cands:
        raise OptimizationFailure("refinement produced no finite optimum", diagnostics)
    rss, tc, w, a, phi, A, m, mC = _select(cands)

    x0 = {"t_c": tc, "alpha": a, "omega": w, "phi": phi}
    p, val = _polish(t, y, x0, tc_bounds, orientation, config, fixed_tc, tss)
    if val.rss <= rss:
        params = _make_params(p["t_c"], p["alpha"], p["omega"], val.A, val.m, val.mC, p["phi"], orientation)
        degenerate = val.degenerate
    else:
        params = _make_params(tc, a, w, A, m, mC, phi, orientation)
        degenerate = objective((t, y), (tc, a, w, phi), orientation).degenerate
    return _finish(t, y, params, config, n_conv, len(starts), tc_bounds, fixed_tc is not None, degenerate)


def fit(series, config: FitConfig | None = None, initial: Sequence[LpplParams] | None = None) -> FitResult:
    """Fit all seven parameters.

    ``initial`` optionally adds warm starts (their t_c, alpha, omega) to the
    deterministic start set.
    """
    return _search(series, config or FitConfig(), None, initial)


def fit_fixed_tc(series, t_c: float, config: FitConfig | None = None,
                 initial: Sequence[LpplParams] | None = None) -> FitResult:
    """Fit with t_c held fixed, searching (alpha, omega, phi) only."""
    config = config or FitConfig()
    t, _ = _series_arrays(series)
    if config.orientation == "bubble" and not t_c > t[-1]:
        raise FitError(f"t_c={t_c} must lie after the last observation {t[-1]}")
    if config.orientation == "antibubble" and not t_c < t[0]:
        raise FitError(f"t_c={t_c} must lie before the first observation {t[0]}")
    return _search(series, config, float(t_c), initial)


def fit_power_law(series, config: FitConfig | None = None) -> FitResult:
    """Trend-only baseline ``A + m |t_c - t|^alpha`` (oscillation amplitude fixed at zero)."""
    config = config or FitConfig()
    orientation = config.orientation
    t, y = _series_arrays(series)
    tc_bounds = config.tc_bounds or default_tc_bounds(t, orientation, config.tc_reach)
    t, y = _validate((t, y), config, tc_bounds)
    box = _Box([tc_bounds, config.alpha_bounds], [False, False])
    tss = float(np.sum((y - y.mean()) ** 2)) or 1.0

    def solve(u):
        tc, a = box.to_params(u)
        dt = time_to_singularity(t, tc, orientation)
        _, g, _ = _power_basis(dt, a)
        coef, rss, deficient = _lstsq(np.column_stack([np.ones_like(t), g]), y)
        return rss, tc, a, coef, deficient

    best = None
    starts = _starts(config.replace(n_starts=max(1, min(config.n_starts, 16))), 2)
    for u0 in starts:
        res = _local_search(lambda u: solve(u)[0], u0, config, fatol=config.fatol * tss)
        rss, tc, a, coef, deficient = solve(res.x)
        key = (rss, float(tc), float(a))
        if best is None or key < best[0]:
            best = (key, coef, deficient)
    (rss, tc, a), (a0, b0), deficient = best
    m = b0 / a
    params = LpplParams(A=float(a0 - m), m=float(m), alpha=a, C=0.0, omega=config.omega_bounds[0],
                        phi=0.0, t_c=tc, orientation=orientation)
    return _finish(t, y, params, config, len(starts), len(starts), tc_bounds, False, deficient)
