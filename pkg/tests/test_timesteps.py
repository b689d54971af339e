"""Beta timestep machinery: special functions, sampler, discrete mapping."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import beta_cdf_int, beta_pdf_direct, central_diff, ks_distance, simpson
from uhrkit.config import BetaParams
from uhrkit.errors import InvalidInputError
from uhrkit.timesteps import (
    TIME_ORIENTATION,
    BetaSampler,
    beta_cdf,
    beta_pdf,
    ln_beta,
    ln_gamma,
    map_to_discrete,
)


def test_time_orientation_frozen():
    assert TIME_ORIENTATION == {"t0": "data", "t1": "noise"}


# --- special functions -------------------------------------------------------

def test_ln_gamma_frozen():
    assert ln_gamma(1.0) == 0.0
    assert ln_gamma(5.0) == pytest.approx(math.log(24.0), rel=1e-14)
    assert ln_gamma(0.5) == pytest.approx(0.5 * math.log(math.pi), rel=1e-14)
    with pytest.raises(InvalidInputError):
        ln_gamma(0.0)
    with pytest.raises(InvalidInputError):
        ln_gamma(-2.0)


def test_ln_beta_frozen():
    assert ln_beta(1.0, 1.0) == 0.0
    assert ln_beta(2.0, 4.0) == pytest.approx(-math.log(20.0), rel=1e-14)
    assert ln_beta(3.0, 2.0) == ln_beta(2.0, 3.0)  # symmetry


def test_beta_pdf_frozen_value():
    # 20 * 0.25 * 0.75^3 at the default-shape mode
    assert beta_pdf(0.25, BetaParams(2.0, 4.0)) == pytest.approx(2.109375, rel=1e-12)


def test_beta_pdf_uniform_case():
    p = BetaParams(1.0, 1.0)
    for t in (0.1, 0.5, 0.93):
        assert beta_pdf(t, p) == pytest.approx(1.0, rel=1e-12)


def test_beta_pdf_domain_open():
    p = BetaParams(2.0, 4.0)
    for bad in (0.0, 1.0, -0.1, 1.1):
        with pytest.raises(InvalidInputError):
            beta_pdf(bad, p)
    with pytest.raises(InvalidInputError):
        beta_pdf(0.5, (2.0, 4.0))


@pytest.mark.parametrize("a,b", [(2.0, 4.0), (0.5, 0.5), (5.0, 1.5)])
def test_beta_pdf_matches_direct_gamma_form(a, b):
    p = BetaParams(a, b)
    for t in (0.05, 0.3, 0.62, 0.97):
        assert beta_pdf(t, p) == pytest.approx(beta_pdf_direct(t, a, b), rel=1e-12)


def test_beta_pdf_integrates_to_one():
    p = BetaParams(2.0, 4.0)
    area = simpson(lambda t: beta_pdf(t, p), 1e-9, 1.0 - 1e-9, 2000)
    assert area == pytest.approx(1.0, abs=1e-7)


@pytest.mark.parametrize("a,b", [(2, 4), (3, 4), (1, 4), (2, 5), (2, 3), (1, 1), (5, 2)])
def test_beta_cdf_matches_binomial_sum(a, b):
    p = BetaParams(float(a), float(b))
    for t in np.linspace(0.05, 0.95, 19):
        assert beta_cdf(float(t), p) == pytest.approx(
            beta_cdf_int(float(t), a, b), rel=1e-10, abs=1e-12)


def test_beta_cdf_endpoints_and_symmetry():
    p = BetaParams(2.0, 4.0)
    assert beta_cdf(0.0, p) == 0.0
    assert beta_cdf(1.0, p) == 1.0
    sym = BetaParams(2.5, 2.5)
    assert beta_cdf(0.5, sym) == pytest.approx(0.5, rel=1e-12)
    with pytest.raises(InvalidInputError):
        beta_cdf(-0.2, p)


def test_beta_cdf_monotone():
    p = BetaParams(2.0, 4.0)
    grid = [beta_cdf(t, p) for t in np.linspace(0.0, 1.0, 101)]
    assert all(lo <= hi for lo, hi in zip(grid, grid[1:]))


def test_beta_cdf_derivative_is_pdf():
    p = BetaParams(2.0, 4.0)
    for t in (0.2, 0.5, 0.8):
        x = np.array([t])
        num = central_diff(lambda z: beta_cdf(float(z[0]), p), x, h=1e-6)[0]
        assert num == pytest.approx(beta_pdf(t, p), rel=1e-5)


# --- sampler -----------------------------------------------------------------

def test_sampler_reproducible_and_bounded():
    p = BetaParams(2.0, 4.0)
    a = BetaSampler(p, seed=42).sample(512)
    b = BetaSampler(p, seed=42).sample(512)
    np.testing.assert_array_equal(a, b)
    assert a.shape == (512,)
    assert float(a.min()) >= 1e-12
    assert float(a.max()) <= 1.0 - 1e-12
    assert BetaSampler(p, seed=42).sample(0).shape == (0,)


def test_sampler_distinct_seeds_differ():
    p = BetaParams(2.0, 4.0)
    assert not np.array_equal(
        BetaSampler(p, seed=1).sample(64), BetaSampler(p, seed=2).sample(64))


def test_sampler_shared_generator_advances():
    p = BetaParams(2.0, 4.0)
    rng = np.random.default_rng(7)
    s = BetaSampler(p, rng=rng)
    first = s.sample(16)
    second = s.sample(16)
    assert not np.array_equal(first, second)


def test_sampler_sample_one():
    v = BetaSampler(BetaParams(2.0, 4.0), seed=0).sample_one()
    assert isinstance(v, float)
    assert 0.0 < v < 1.0


def test_sampler_rejects():
    with pytest.raises(InvalidInputError):
        BetaSampler((2.0, 4.0))
    with pytest.raises(InvalidInputError):
        BetaSampler(BetaParams(2.0, 4.0), seed=0).sample(-1)


def test_sampler_matches_cdf_by_ks():
    p = BetaParams(2.0, 4.0)
    samples = BetaSampler(p, seed=0).sample(20000)
    d = ks_distance(samples, lambda t: beta_cdf(t, p))
    # KS_0.999 ~ 1.95 / sqrt(n) ~ 0.0138 at n = 20000
    assert d < 0.014


def test_sampler_moments():
    p = BetaParams(2.0, 4.0)
    s = BetaSampler(p, seed=11).sample(40000)
    assert float(s.mean()) == pytest.approx(1.0 / 3.0, abs=0.005)
    assert float(s.var()) == pytest.approx(8.0 / (36.0 * 7.0), rel=0.05)


# --- discrete mapping --------------------------------------------------------

def test_map_to_discrete_frozen():
    assert map_to_discrete(0.0, 10) == 0
    assert map_to_discrete(1.0, 10) == 9
    assert map_to_discrete(0.25, 4) == 1
    assert map_to_discrete(0.9999, 10) == 9
    assert map_to_discrete(0.5, 1) == 0


def test_map_to_discrete_rejects():
    with pytest.raises(InvalidInputError):
        map_to_discrete(0.5, 0)
    with pytest.raises(InvalidInputError):
        map_to_discrete(1.5, 10)
    with pytest.raises(InvalidInputError):
        map_to_discrete(-0.1, 10)


@settings(max_examples=80, deadline=None)
@given(t=st.floats(0.0, 1.0), steps=st.integers(1, 10000))
def test_map_to_discrete_in_range(t, steps):
    k = map_to_discrete(t, steps)
    assert 0 <= k < steps


@settings(max_examples=40, deadline=None)
@given(t1=st.floats(0.0, 1.0), t2=st.floats(0.0, 1.0), steps=st.integers(1, 500))
def test_map_to_discrete_monotone(t1, t2, steps):
    lo, hi = sorted((t1, t2))
    assert map_to_discrete(lo, steps) <= map_to_discrete(hi, steps)
