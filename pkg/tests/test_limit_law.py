import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad
from scipy.stats import norm

from bbpre import FirstPassageLaw, ks_statistic


def test_sigma_must_be_positive():
    for bad in (0.0, -1.0, math.nan, math.inf):
        with pytest.raises(ValueError):
            FirstPassageLaw(bad)


def test_pdf_vanishes_at_and_below_zero():
    law = FirstPassageLaw(1.0)
    assert law.pdf(0.0) == 0.0
    assert law.pdf(-3.0) == 0.0
    assert np.all(law.pdf(np.array([-1.0, 0.0])) == 0.0)


def test_pdf_closed_form_value():
    # e^{-1/2} / sqrt(2 pi), cross-checked against the normalization quadrature
    law = FirstPassageLaw(1.0)
    assert law.pdf(1.0) == pytest.approx(0.24197072451914337, abs=1e-15)


def test_pdf_normalizes_to_one():
    law = FirstPassageLaw(1.0)
    total, _ = quad(law.pdf, 0, np.inf, limit=200)
    assert abs(total - 1.0) <= 1e-8


def test_cdf_limits_and_monotonicity():
    law = FirstPassageLaw(1.0)
    assert law.cdf(0.0) == 0.0
    assert law.cdf(-1.0) == 0.0
    assert law.cdf(1e12) == pytest.approx(1.0, abs=1e-5)
    grid = np.linspace(1e-3, 50.0, 1000)
    vals = law.cdf(grid)
    assert np.all(np.diff(vals) >= 0.0)
    assert np.all((vals >= 0.0) & (vals <= 1.0))


def test_cdf_agrees_with_quadrature_of_pdf():
    law = FirstPassageLaw(1.0)
    for t in np.logspace(-3, 3, 13):
        val, _ = quad(law.pdf, 0, t, limit=400)
        assert abs(val - law.cdf(t)) <= 1e-8


def test_cdf_value_at_one():
    # frozen from quadrature of the density over (0, 1]
    assert FirstPassageLaw(1.0).cdf(1.0) == pytest.approx(0.3173105078629141, abs=1e-12)


def test_quantile_round_trip():
    law = FirstPassageLaw(1.0)
    assert abs(law.quantile(law.cdf(1.0)) - 1.0) <= 1e-9
    for q in (0.01, 0.2, 0.5, 0.9, 0.999):
        assert law.cdf(law.quantile(q)) == pytest.approx(q, abs=1e-10)


def test_quantile_median_value():
    # independent route: 1 / Phi^{-1}(0.25)^2 via scipy.stats.norm
    law = FirstPassageLaw(1.0)
    expected = 1.0 / norm.ppf(0.25) ** 2
    assert law.quantile(0.5) == pytest.approx(expected, rel=1e-12)
    val, _ = quad(law.pdf, 0, law.quantile(0.5), limit=200)
    assert val == pytest.approx(0.5, abs=1e-9)


def test_quantile_monotone_and_domain():
    law = FirstPassageLaw(2.0)
    qs = np.linspace(0.01, 0.99, 99)
    ts = law.quantile(qs)
    assert np.all(np.diff(ts) > 0)
    for bad in (0.0, 1.0, -0.5, 1.5):
        with pytest.raises(ValueError):
            law.quantile(bad)


def test_sampler_matches_cdf():
    law = FirstPassageLaw(1.0)
    draws = law.sample(np.random.default_rng(7), size=100_000)
    assert np.all(draws > 0)
    assert ks_statistic(draws, law) <= 0.01
    ecdf_at_1 = float(np.mean(draws <= 1.0))
    assert abs(ecdf_at_1 - 0.317311) <= 0.01


def test_scaling_identity():
    # the sigma law equals the unit law time-rescaled by 1/sigma^2
    for sigma in (0.3, 0.5, 2.0):
        law = FirstPassageLaw(sigma)
        unit = FirstPassageLaw(1.0)
        for t in (0.01, 0.5, 3.0, 40.0):
            assert law.cdf(t) == pytest.approx(unit.cdf(sigma * sigma * t), rel=1e-13)


@given(
    sigma=st.floats(min_value=0.05, max_value=20.0),
    t=st.floats(min_value=-5.0, max_value=1e6),
)
def test_pdf_and_cdf_are_well_behaved(sigma, t):
    law = FirstPassageLaw(sigma)
    p = law.pdf(t)
    c = law.cdf(t)
    assert p >= 0.0
    assert 0.0 <= c <= 1.0
    if t <= 0:
        assert p == 0.0 and c == 0.0
