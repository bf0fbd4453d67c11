"""Synthetic LPPL series and a brute-force grid oracle for the fitter."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fit_engine import FitError, objective
from .model import TWO_PI, LpplParams, OscLayerParams, evaluate, normalize_phase
from .timebase import PriceSeries, from_decimal_year

__all__ = ["SynthSpec", "generate", "sample_times", "grid_oracle", "GridResult", "GRID_RESOLUTION",
           "ResourceError", "random_regime_spec", "random_cascade_spec"]

DAY = 1.0 / 365.25
# t_c x alpha x omega x phi
GRID_RESOLUTION = (50, 20, 50, 16)
MAX_GRID_POINTS = 10**7


class ResourceError(RuntimeError):
    pass


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for a synthetic series.

    ``noise_sigma`` is the Gaussian noise standard deviation as a fraction of
    the noiseless signal's range; ``0`` means no noise.
    """

    params: LpplParams
    start: float
    end: float
    layers: tuple[OscLayerParams, ...] = ()
    cadence_days: float = 1.0
    business_days: bool = False
    noise_sigma: float = 0.0
    seed: int = 0
    n_points: int | None = None
    scale: str = "log"

    def __post_init__(self):
        p = self.params
        bad_side = self.end >= p.t_c if p.orientation == "bubble" else self.start <= p.t_c
        if bad_side:
            raise ValueError("sampling range must lie on the defined side of t_c")
        if not self.end > self.start:
            raise ValueError("end must be after start")
        if self.cadence_days <= 0:
            raise ValueError("cadence must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        object.__setattr__(self, "layers", tuple(self.layers))


def sample_times(spec: SynthSpec) -> np.ndarray:
    """Sampling grid: ``n_points`` evenly spaced, or a fixed cadence in days."""
    if spec.n_points is not None:
        t = np.linspace(spec.start, spec.end, spec.n_points)
    else:
        step = spec.cadence_days * DAY
        t = np.arange(spec.start, spec.end + 0.5 * step, step)
        t = t[t <= spec.end]
    if spec.business_days:
        t = np.array([x for x in t if from_decimal_year(float(x)).weekday() < 5])
    return t


def generate(spec: SynthSpec) -> PriceSeries:
    """Evaluate model plus layers plus seeded Gaussian noise on the sampling grid."""
    t = sample_times(spec)
    clean = evaluate(spec.params, t)
    for layer in spec.layers:
        clean = clean + layer(t)
    values = clean
    if spec.noise_sigma > 0:
        rng = np.random.default_rng(spec.seed)
        values = clean + rng.normal(0.0, spec.noise_sigma * float(np.ptp(clean)), t.size)
    return PriceSeries(t, values, spec.scale, source=f"synthetic seed={spec.seed}")


def random_regime_spec(rng: np.random.Generator, kind: str, noise_sigma: float = 0.02,
                       periods=(3.0, 4.5), seed: int = 0, max_span: float = 3.0) -> SynthSpec:
    """Random negative bubble (``kind="negative_bubble"``) or antibubble on a daily grid.

    The window holds between ``periods[0]`` and ``periods[1]`` full log-periods
    with omega in [8, 14]. Negative bubbles fall toward ``A`` ahead of a
    singularity 0.05-0.3 yr past the window (pulled closer if the window would
    exceed ``max_span`` years); antibubbles fall away from a singularity 0.1 yr
    before the window.
    """
    omega = rng.uniform(8.0, 14.0)
    n_per = rng.uniform(*periods)
    ratio = math.exp(n_per * TWO_PI / omega)
    common = dict(A=rng.uniform(20.0, 40.0), alpha=rng.uniform(0.3, 0.9), C=rng.uniform(0.1, 0.3),
                  omega=omega, phi=rng.uniform(0.0, TWO_PI))
    if kind == "negative_bubble":
        d_near = min(rng.uniform(0.05, 0.3), max_span / (ratio - 1.0))
        end = 2016.0
        t_c = end + d_near
        start = t_c - d_near * ratio
        params = LpplParams(m=rng.uniform(10.0, 30.0), t_c=t_c, **common)
    elif kind == "antibubble":
        d_near = 0.1
        start = 2016.0
        t_c = start - d_near
        end = t_c + d_near * ratio
        params = LpplParams(m=-rng.uniform(5.0, 15.0), t_c=t_c, orientation="antibubble",
                            **{**common, "A": common["A"] + 60.0})
    else:
        raise ValueError(f"unknown kind {kind!r}")
    return SynthSpec(params, start, end, noise_sigma=noise_sigma, seed=seed)


def random_cascade_spec(rng: np.random.Generator, noise_sigma: float = 0.02, seed: int = 0) -> SynthSpec:
    """Negative bubble plus one faster oscillation layer sharing its t_c.

    The layer has 3-4 times the base log-frequency and a third of its
    absolute oscillation amplitude.
    """
    base = random_regime_spec(rng, "negative_bubble", 0.0)
    p = base.params
    layer = OscLayerParams(a=abs(p.mC) / 3.0, beta=p.alpha, omega=rng.uniform(3.0, 4.0) * p.omega,
                           phi=rng.uniform(0.0, TWO_PI), t_c=p.t_c)
    return SynthSpec(p, base.start, base.end, layers=(layer,), noise_sigma=noise_sigma, seed=seed)


@dataclass
class GridResult:
    params: LpplParams
    rss: float
    n_evaluated: int
    axes: dict = field(repr=False, default_factory=dict)


def _axis(name, bounds, n):
    lo, hi = bounds
    if not lo < hi:
        raise FitError(f"empty interval for {name}: {bounds}")
    if n < 1:
        raise FitError(f"resolution for {name} must be >= 1")
    if name == "phi":
        return np.linspace(lo, hi, n, endpoint=False)
    return np.linspace(lo, hi, n)


def grid_oracle(series, bounds: dict, resolution=GRID_RESOLUTION, orientation: str = "bubble",
                keep: int = 8) -> GridResult:
    """Exhaustive slaved-linear search over a (t_c, alpha, omega, phi) grid.

    ``bounds`` maps ``t_c``, ``alpha``, ``omega`` and optionally ``phi``
    (default ``[0, 2 pi)``) to ``(low, high)``. Axes are uniform and include
    both ends, except ``phi`` which excludes ``high``. The screening rss uses
    batched normal equations; the ``keep`` best nodes are re-scored with
    :func:`objective` and the exact minimum is returned, ties broken by the
    smallest ``(t_c, omega, alpha, phi)``.
    """
    if isinstance(series, PriceSeries):
        t, y = series.t, series.values
    else:
        t, y = (np.asarray(a, float) for a in series)
    n_tc, n_a, n_w, n_p = resolution
    total = n_tc * n_a * n_w * n_p
    if total > MAX_GRID_POINTS:
        raise ResourceError(f"grid of {total} points exceeds {MAX_GRID_POINTS}")
    tcs = _axis("t_c", bounds["t_c"], n_tc)
    alphas = _axis("alpha", bounds["alpha"], n_a)
    omegas = _axis("omega", bounds["omega"], n_w)
    phis = _axis("phi", bounds.get("phi", (0.0, TWO_PI)), n_p)
    if orientation == "bubble" and tcs[0] <= t[-1]:
        raise FitError("grid t_c must lie after the last observation")
    if orientation == "antibubble" and tcs[-1] >= t[0]:
        raise FitError("grid t_c must lie before the first observation")

    yy = float(y @ y)
    WP = (omegas[:, None] * 0 + phis[None, :]).ravel()
    WW = np.repeat(omegas, n_p)
    screen = []
    for i, tc in enumerate(tcs):
        dt = tc - t if orientation == "bubble" else t - tc
        logdt = np.log(dt)
        osc_arg = WW[:, None] * logdt[None, :] + WP[:, None]
        cosx = np.cos(osc_arg)
        for j, a in enumerate(alphas):
            f = np.exp(a * logdt)
            g = np.expm1(a * logdt) / a
            # columns: 1, g, f*cos(...) for every (omega, phi) pair at once
            h = f[None, :] * cosx
            n = float(t.size)
            G = np.empty((h.shape[0], 3, 3))
            G[:, 0, 0] = n
            G[:, 0, 1] = G[:, 1, 0] = g.sum()
            G[:, 1, 1] = g @ g
            G[:, 0, 2] = G[:, 2, 0] = h.sum(axis=1)
            G[:, 1, 2] = G[:, 2, 1] = h @ g
            G[:, 2, 2] = np.einsum("ij,ij->i", h, h)
            b = np.empty((h.shape[0], 3))
            b[:, 0] = y.sum()
            b[:, 1] = g @ y
            b[:, 2] = h @ y
            d = np.sqrt(np.einsum("kii->ki", G))
            d[d == 0] = 1.0
            Gs = G / d[:, :, None] / d[:, None, :]
            coef = np.einsum("kij,kj->ki", np.linalg.pinv(Gs, rcond=1e-12), b / d) / d
            rss = yy - np.einsum("ki,ki->k", coef, b)
            for k in np.argsort(rss, kind="stable")[:keep]:
                screen.append((float(rss[k]), i, j, int(k // n_p), int(k % n_p)))
    screen.sort(key=lambda s: (s[0], s[1:]))

    best = None
    for _, i, j, k, l in screen[:keep]:
        nl = (tcs[i], alphas[j], omegas[k], phis[l])
        val = objective((t, y), nl, orientation)
        key = (val.rss, tcs[i], omegas[k], alphas[j], phis[l])
        if best is None or key < best[0]:
            best = (key, nl, val)
    (rss, *_), (tc, a, w, ph), val = best
    C = val.mC / val.m if val.m != 0 else 0.0
    if C < 0:
        C, ph = -C, ph + math.pi
    params = LpplParams(A=float(val.A), m=float(val.m), alpha=float(a), C=float(C), omega=float(w),
                        phi=normalize_phase(float(ph)), t_c=float(tc), orientation=orientation)
    return GridResult(params=params, rss=float(val.rss), n_evaluated=total,
                      axes={"t_c": tcs, "alpha": alphas, "omega": omegas, "phi": phis})
