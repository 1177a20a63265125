import math
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings, strategies as st

from bftw.params import (D_GAMMA, D_ZETA, chernoff_tail, derive_beta, derive_gamma,
                         derive_params, derive_sigma, derive_zeta, whc_exponent,
                         whc_failure_bound)

mpmath.mp.dps = 50


def test_beta_examples():
    assert derive_beta(40, 120, 5) == 35
    assert derive_beta(10, 10, 0) == 9
    assert derive_beta(2, 2, 0) == 2
    with pytest.raises(ValueError):
        derive_beta(10, 10, 10)


def test_gamma_collapses_to_log_n():
    n = round(math.e ** 10)
    assert derive_gamma(n, 0, c=1, lam=0, d=1) == 10


def test_gamma_matches_high_precision_formula():
    exact = mpmath.ceil(200 * (2 * mpmath.log(100) + 20) * mpmath.mpf(100) / 96)
    assert derive_gamma(100, 4, c=2, lam=20, d=mpmath.mpf(1) / 200) == int(exact)
    assert derive_gamma(100, 4, c=2, lam=20, d=1 / 200) == int(exact)


def test_gamma_rejects_third():
    with pytest.raises(ValueError):
        derive_gamma(100, 40, c=2, lam=20)


def test_gamma_sigma_divisibility():
    for n, sigma in [(240, 1024), (100, 96), (37, 50)]:
        g = derive_gamma(n, 0, lam=3, sigma=sigma)
        assert (n * g) % sigma == 0
        assert g >= derive_gamma(n, 0, lam=3)


def test_d_constants():
    assert D_GAMMA == Fraction(1, 19200)
    assert D_ZETA == Fraction(1, 288)


def test_zeta_examples():
    # ln e = 1, so the bound is max(3, 1/d)
    assert derive_zeta(math.e, 0, c=1, lam=0) == max(3, math.ceil(1 / float(D_ZETA)))
    mu = mpmath.log(200) + 30
    d = mpmath.mpf(D_ZETA.numerator) / D_ZETA.denominator
    exact = mpmath.ceil(max(3 * mu, mu / d))
    assert derive_zeta(200, 8, c=1, lam=30) == int(exact)
    with pytest.raises(ValueError):
        derive_zeta(48, 2)


def test_whc():
    assert whc_exponent(1, 5, 7) == 7
    assert whc_failure_bound(0) == 1
    assert whc_exponent(math.e ** 2, 3, 4) == pytest.approx(10)
    with pytest.raises(ValueError):
        whc_failure_bound(-1)
    # large lambda underflows to zero rather than raising
    assert whc_failure_bound(1000) == 0.0


def test_chernoff_examples():
    assert chernoff_tail(0, 0.5, "upper") == 1
    assert chernoff_tail(300, 0.1, "lower") == pytest.approx(math.exp(-1.5))
    assert chernoff_tail(80, 2, "upper") == pytest.approx(math.exp(-160 / 3))
    with pytest.raises(ValueError):
        chernoff_tail(10, 1.5, "lower")


def test_explicit_params_n240():
    p = derive_params(240, 10, b=1 / 24, gamma=64, zeta=240)
    assert p.sigma == derive_sigma(240) == 1024
    assert p.beta == 56
    assert p.delta == 7
    assert p.invariant_violations() == []
    assert p.in_asymptotic_regime
    assert p.honest_bandwidth == 240 * 1024


def test_derived_caps_are_noted():
    p = derive_params(60, 2)
    assert p.gamma == 60 and p.zeta == 60
    assert any("capped" in x for x in p.notes)


def test_params_dict_roundtrip():
    p = derive_params(120, 5, b=0.04, gamma=49)
    assert type(p).from_dict(p.to_dict()) == p


@settings(max_examples=300, deadline=None)
@given(st.integers(2, 10_000), st.data())
def test_beta_range(n, data):
    t = data.draw(st.integers(0, (n - 1) // 3))
    gamma = data.draw(st.integers(1, 500))
    b = derive_beta(gamma, n, t)
    assert math.ceil(gamma / 2) <= b <= gamma


@given(st.floats(0, 1e4), st.floats(0, 1e4), st.floats(0, 1), st.floats(0, 1),
       st.sampled_from(["upper", "lower"]))
def test_chernoff_monotone(mu1, mu2, d1, d2, tail):
    lo, hi = sorted((mu1, mu2))
    assert chernoff_tail(hi, d1, tail) <= chernoff_tail(lo, d1, tail)
    dl, dh = sorted((d1, d2))
    assert chernoff_tail(lo, dh, tail) <= chernoff_tail(lo, dl, tail)


@given(st.floats(1, 1e9), st.floats(0, 10), st.floats(0, 1e3))
def test_whc_exponent_dominates(n, c, lam):
    mu = whc_exponent(n, c, lam)
    assert mu >= max(c * math.log(n), lam) - 1e-9


@given(st.integers(24, 2000), st.floats(0, 50))
def test_derivation_is_pure(n, lam):
    t = (n - 1) // 24
    assert derive_params(n, t, lam=lam) == derive_params(n, t, lam=lam)
    assert derive_zeta(n, t, lam=lam) == derive_zeta(n, t, lam=lam)
