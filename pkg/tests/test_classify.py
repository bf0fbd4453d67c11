import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from lpplfit.classify import (
    MIN_CLASSIFY_POINTS,
    antibubble_probe,
    classify,
    degeneracy_flags,
    extrema_match_score,
)
from lpplfit.fit_engine import FitConfig, FitError, fit
from lpplfit.model import LpplParams
from lpplfit.synth_oracle import SynthSpec, generate, random_regime_spec
from lpplfit.timebase import PriceSeries

CFG = FitConfig(n_starts=32)


@pytest.fixture(scope="module")
def antibubble():
    spec = random_regime_spec(np.random.default_rng(21), "antibubble", seed=1)
    return spec, generate(spec)


@pytest.fixture(scope="module")
def negative_bubble():
    spec = random_regime_spec(np.random.default_rng(22), "negative_bubble", seed=2)
    return spec, generate(spec)


def test_antibubble_labelled(antibubble):
    v = classify(antibubble[1], CFG)
    assert v.label == "antibubble"
    assert not any(v.evidence["degeneracy"]["antibubble"].values())


def test_negative_bubble_labelled(negative_bubble):
    v = classify(negative_bubble[1], CFG)
    assert v.label == "negative_bubble"
    assert v.bubble_fit.params.m > 0


def test_positive_bubble_labelled():
    p = LpplParams(A=100.0, m=-20.0, alpha=0.5, C=0.2, omega=10.0, phi=1.0, t_c=2016.2)
    s = generate(SynthSpec(p, 2013.5, 2016.0, noise_sigma=0.02, seed=3))
    assert classify(s, CFG).label == "positive_bubble"


def test_white_noise_is_none():
    rng = np.random.default_rng(5)
    t = np.linspace(2014.0, 2016.0, 500)
    s = PriceSeries(t, 50.0 + rng.normal(0, 1.0, t.size))
    assert classify(s, CFG).label == "none"


def test_winner_never_degenerate(antibubble, negative_bubble):
    for _, s in (antibubble, negative_bubble):
        v = classify(s, CFG)
        orient = "antibubble" if v.label == "antibubble" else "bubble"
        assert not any(v.evidence["degeneracy"][orient].values())


def test_probe_on_true_antibubble_matches_extrema(antibubble):
    spec, s = antibubble
    probe = antibubble_probe(s, spec.params.t_c, CFG)
    assert probe.extrema_match >= 0.8
    assert not probe.degenerate


def test_probe_on_negative_bubble_is_rejected(negative_bubble):
    spec, s = negative_bubble
    probe = antibubble_probe(s, spec.start - 0.1, CFG)
    assert probe.degenerate or probe.extrema_match <= 0.5


def test_probe_precondition(antibubble):
    _, s = antibubble
    with pytest.raises(FitError):
        antibubble_probe(s, float(s.t[10]), CFG)


def test_minimum_length():
    t = np.linspace(2015, 2016, MIN_CLASSIFY_POINTS - 1)
    with pytest.raises(FitError):
        classify(PriceSeries(t, np.linspace(50, 40, t.size)), CFG)


def test_extrema_match_perfect_on_noiseless():
    p = LpplParams(A=10.0, m=5.0, alpha=0.5, C=0.2, omega=9.0, phi=1.0, t_c=2020.0)
    s = generate(SynthSpec(p, 2016.0, 2019.8, n_points=600))
    fr = fit(s, FitConfig(n_starts=16))
    score = extrema_match_score(s, fr)
    assert isinstance(score, float) and score == 1.0


def test_degeneracy_flags_amplitude_floor():
    p = LpplParams(A=10.0, m=5.0, alpha=0.5, C=0.2, omega=9.0, phi=1.0, t_c=2020.0)
    fr = fit(generate(SynthSpec(p, 2016.0, 2019.8, n_points=300)), FitConfig(n_starts=16))
    assert not degeneracy_flags(fr, trend_rmse=0.01)["amplitude_below_floor"]
    assert degeneracy_flags(fr, trend_rmse=100.0)["amplitude_below_floor"]


@settings(max_examples=3, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(st.floats(0.1, 10.0), st.floats(-50.0, 50.0))
def test_label_invariant_under_affine_scaling(negative_bubble, a, b):
    _, s = negative_bubble
    base = classify(s, CFG).label
    assert classify(s.with_values(a * s.values + b), CFG).label == base
