"""The log-periodic power law and its trend/oscillation decomposition.

    p(t) = A + m |t_c - t|^alpha (1 + C cos(omega ln|t_c - t| + phi))

``orientation="bubble"`` restricts evaluation to t < t_c (singularity ahead);
``"antibubble"`` to t > t_c (singularity behind, periods growing with time).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np

TWO_PI = 2.0 * math.pi

__all__ = [
    "ModelDomainError",
    "LpplParams",
    "OscLayerParams",
    "normalize_phase",
    "time_to_singularity",
    "evaluate",
    "trend_component",
    "oscillatory_component",
    "extrema_offsets",
    "extrema_times",
    "convert_parametrization",
    "n_periods",
]


class ModelDomainError(ValueError):
    """Raised when the model is evaluated on the wrong side of t_c."""


def normalize_phase(phi: float) -> float:
    """Map a phase into [0, 2*pi)."""
    out = math.fmod(phi, TWO_PI)
    if out < 0:
        out += TWO_PI
    # fmod can return exactly 2*pi after the shift for tiny negative inputs
    return 0.0 if out >= TWO_PI else out


@dataclass(frozen=True)
class LpplParams:
    """The seven LPPL parameters.

    ``C`` is the relative oscillation amplitude; the absolute amplitude printed
    in most fit reports is ``m * C``.
    """

    A: float
    m: float
    alpha: float
    C: float
    omega: float
    phi: float
    t_c: float
    orientation: str = "bubble"

    def __post_init__(self):
        if self.orientation not in ("bubble", "antibubble"):
            raise ValueError(f"unknown orientation {self.orientation!r}")
        object.__setattr__(self, "phi", normalize_phase(float(self.phi)))

    @property
    def mC(self) -> float:
        return self.m * self.C

    @property
    def well_formed(self) -> bool:
        return self.alpha > 0 and self.omega > 0 and abs(self.C) < 1

    def as_dict(self) -> dict:
        return asdict(self)

    def replace(self, **kw) -> "LpplParams":
        return replace(self, **kw)


@dataclass(frozen=True)
class OscLayerParams:
    """Pure oscillation layer ``a |t_c - t|^beta cos(omega ln|t_c - t| + phi)``.

    ``beta`` may be negative (an envelope that grows toward t_c).
    """

    a: float
    beta: float
    omega: float
    phi: float
    t_c: float
    orientation: str = "bubble"

    def __post_init__(self):
        object.__setattr__(self, "phi", normalize_phase(float(self.phi)))

    def as_dict(self) -> dict:
        return asdict(self)

    def __call__(self, t):
        dt = time_to_singularity(t, self.t_c, self.orientation)
        return self.a * dt**self.beta * np.cos(self.omega * np.log(dt) + self.phi)


def time_to_singularity(t, t_c: float, orientation: str = "bubble"):
    """``t_c - t`` (bubble) or ``t - t_c`` (antibubble); raises if not positive."""
    t = np.asarray(t, dtype=float)
    dt = t_c - t if orientation == "bubble" else t - t_c
    if np.any(~(dt > 0)):
        side = "before" if orientation == "bubble" else "after"
        raise ModelDomainError(f"model defined only {side} t_c={t_c}")
    return dt if dt.ndim else float(dt)


def _parts(params: LpplParams, t):
    dt = time_to_singularity(t, params.t_c, params.orientation)
    power = dt**params.alpha
    cosine = np.cos(params.omega * np.log(dt) + params.phi)
    return power, cosine


def evaluate(params: LpplParams, t):
    power, cosine = _parts(params, t)
    return params.A + params.m * power * (1.0 + params.C * cosine)


def trend_component(params: LpplParams, t):
    """Smooth power-law part ``A + m dt^alpha``."""
    power, _ = _parts(params, t)
    return params.A + params.m * power


def oscillatory_component(params: LpplParams, t):
    """Log-periodic part ``m C dt^alpha cos(omega ln dt + phi)``.

    ``trend_component + oscillatory_component`` evaluates the same floating-point
    expression as :func:`evaluate` up to the order of the final addition.
    """
    power, cosine = _parts(params, t)
    return params.m * params.C * power * cosine


def extrema_offsets(omega: float, phi: float, k_range):
    """Times to singularity ``exp((2 pi k - phi) / omega)`` of the cosine maxima.

    Consecutive offsets differ by the factor ``exp(2 pi / omega)`` to
    floating-point precision; decimal-year times lose relative precision in
    the subtraction from t_c, so ratio checks should use these offsets.
    """
    if omega <= 0:
        raise ValueError("omega must be positive")
    ks = np.asarray(list(k_range), dtype=float)
    return np.exp((TWO_PI * ks - phi) / omega)


def extrema_times(omega: float, phi: float, t_c: float, k_range, orientation: str = "bubble"):
    """Times of the cosine maxima ``omega ln dt + phi = 2 pi k`` for k in ``k_range``.

    Returns ascending decimal years. ``k_range`` is any iterable of integers.
    """
    dt = extrema_offsets(omega, phi, k_range)
    times = t_c - dt if orientation == "bubble" else t_c + dt
    return sorted(float(x) for x in times)


def convert_parametrization(pmax, C1, C2, C3, C4, phase, t_c, orientation="bubble") -> LpplParams:
    """Map ``pmax - C1 dt^C3 (1 + C2 cos(C4 ln dt - phase))`` onto :class:`LpplParams`."""
    return LpplParams(A=pmax, m=-C1, alpha=C3, C=C2, omega=C4, phi=-phase, t_c=t_c,
                      orientation=orientation)


def n_periods(omega: float, t_c: float, t_first: float, t_last: float, orientation="bubble") -> float:
    """Number of full log-periods between two times."""
    d1 = time_to_singularity(t_first, t_c, orientation)
    d2 = time_to_singularity(t_last, t_c, orientation)
    return omega / TWO_PI * abs(math.log(d1 / d2))
