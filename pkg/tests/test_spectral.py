"""Decay parameter, eigen elements, and classification.

Frozen oracles for the exp family at (lam, mu, m) = (1, 1, 2) were computed
independently with mpmath before these tests were written:
    f(1)  = e - 2
    R     : root of m f(R) = 1, R = 0.7626885608503393
    beta  = m R f'(R)       = 1.288065682551018
"""

import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lfbp import spectral, streams
from lfbp.spectral import (LifeLengthLaw, NuMeasure, classify, eigen_build,
                           eigen_residuals, hypergeom_phi, pf_limit_check,
                           power_iteration, solve_R)
from lfbp.typespace import make_exp_triplet, make_finite_triplet

from conftest import random_supercritical, random_triplet

EXP_R = 0.7626885608503393
EXP_BETA = 1.288065682551018


# -- scalar closed forms -------------------------------------------------------
# one type: f(s) = ks/(1 - ks), so m f(R) = 1 gives R = 1/(k(1+m)) and
# beta = m R f'(R) = (1+m)/m for every scalar instance


@pytest.mark.parametrize("k,m,crit", [
    (0.4, 1.0, "subcritical"),
    (0.5, 1.0, "critical"),
    (1.0 / 3.0, 2.0, "critical"),
    (0.75, 1.0, "supercritical"),
])
def test_scalar_closed_forms(k, m, crit):
    t = make_finite_triplet([[k]], [1.0], m)
    s = classify(t)
    assert s.criticality == crit
    assert abs(s.R - 1.0 / (k * (1.0 + m))) < 1e-12
    assert abs(s.beta - (1.0 + m) / m) < 1e-10
    assert abs(s.mf1 - m * k / (1.0 - k)) < 1e-12
    if crit == "critical":
        assert abs(s.alpha) < 1e-12


def test_scalar_supercritical_rho():
    s = classify(make_finite_triplet([[0.75]], [1.0], 1.0))
    assert abs(s.rho - 1.5) < 1e-12
    assert abs(s.alpha - math.log(1.5)) < 1e-12


# -- exp family frozen oracle ---------------------------------------------------


def test_exp_f_at_one(exp_super):
    law = LifeLengthLaw(exp_super)
    assert abs(law.f_eval(1.0) - (math.e - 2.0)) < 1e-12
    assert abs(law.mean() - (math.e - 1.0)) < 1e-12
    assert law.radius() == math.inf


def test_exp_frozen_decay_parameter(exp_super):
    s = classify(exp_super)
    assert s.criticality == "supercritical"
    assert s.recurrence == "R-positive"
    assert abs(s.R - EXP_R) < 1e-12
    assert abs(s.beta - EXP_BETA) < 1e-9
    assert abs(s.mf1 - 2.0 * (math.e - 2.0)) < 1e-12
    assert abs(s.alpha + math.log(EXP_R)) < 1e-12


def test_exp_critical_tuning():
    # m* = 1/(e - 2) makes m f(1) = 1 exactly
    t = make_exp_triplet(1.0, 1.0, 1.0 / (math.e - 2.0))
    s = classify(t)
    assert abs(s.mf1 - 1.0) < 1e-10
    assert s.criticality == "critical"


def test_life_length_pmf_and_tails(exp_super):
    law = LifeLengthLaw(exp_super)
    d = law.tails(20)
    # d_n = 1/(n+1)! for lam = mu = 1
    want = np.array([1.0 / math.factorial(n + 1) for n in range(21)])
    assert np.max(np.abs(d - want)) < 1e-14
    assert abs(law.pmf(3) - (d[2] - d[3])) == 0.0
    with pytest.raises(ValueError):
        law.pmf(0)
    total = sum(law.pmf(n) for n in range(1, 40))
    assert abs(total - 1.0) < 1e-12


def test_life_length_sampler_matches_tails(scalar_sub):
    law = LifeLengthLaw(scalar_sub)
    rng = streams.stream(5, 0)
    x = law.sample(rng, size=100_000)
    d = law.tails(4)
    for n in range(1, 5):
        frac = float((x > n).mean())
        se = math.sqrt(d[n] * (1.0 - d[n]) / 100_000)
        assert abs(frac - d[n]) < 4.0 * se + 1e-12


# -- power iteration -------------------------------------------------------------


def test_power_iteration_matches_dense_eig():
    rng = streams.stream(77, 0)
    for _ in range(10):
        d = int(rng.integers(2, 7))
        A = rng.random((d, d)) + 0.01
        rho, v, resid, _ = power_iteration(A)
        want = max(np.linalg.eigvals(A).real)
        assert abs(rho - want) < 1e-10
        assert resid < 1e-12
        assert np.all(v > 0)


def test_power_iteration_periodic_matrix():
    # plain iteration cycles on this one; the diagonal shift must not
    A = np.array([[0.0, 1.0], [1.0, 0.0]])
    rho, _, _, _ = power_iteration(A)
    assert abs(rho - 1.0) < 1e-12


def test_decay_parameter_is_perron_reciprocal():
    rng = streams.stream(401, 0)
    for _ in range(8):
        t = random_supercritical(rng)
        s = classify(t)
        rho_m, _, _, _ = power_iteration(t.M)
        assert abs(1.0 / s.R - rho_m) < 1e-8


# -- eigen elements ---------------------------------------------------------------


def test_eigen_identities_finite():
    rng = streams.stream(402, 0)
    for _ in range(6):
        t = random_triplet(rng)
        s = classify(t)
        if s.recurrence != "R-positive":
            continue
        pair = eigen_build(t, s)
        m = t.m
        assert abs(pair.u_gamma_integral() - (1.0 + m) / m) < 1e-9
        assert abs(pair.nu.mass() - 1.0) < 1e-10
        assert abs(pair.u_nu_integral() - s.beta) < 1e-8 * max(1.0, s.beta)
        res = eigen_residuals(t, pair)
        assert res["right"] < 1e-6
        assert res["left"] < 1e-6


def test_eigen_identities_exp(exp_super):
    s = classify(exp_super)
    pair = eigen_build(exp_super, s)
    assert abs(pair.u_gamma_integral() - 1.5) < 1e-9
    assert abs(pair.nu.mass() - 1.0) < 1e-12
    assert abs(pair.u_nu_integral() - s.beta) < 1e-9
    res = eigen_residuals(exp_super, pair)
    assert res["right"] < 1e-6
    assert res["left"] < 1e-6


def test_nu_sampler_matches_cdf(exp_super):
    s = classify(exp_super)
    nu = NuMeasure(exp_super, s.R)
    rng = streams.stream(19, 0)
    x = nu.sample(rng, size=50_000)
    for T in (0.5, 1.0, 2.0):
        p = nu.cdf(T)
        se = math.sqrt(p * (1.0 - p) / 50_000)
        assert abs(float((x <= T).mean()) - p) < 4.0 * se


def test_pf_limit_convergence(scalar_sub, exp_super):
    rows = pf_limit_check(scalar_sub, 0, n_max=30)
    assert rows[-1].rel_err < 1e-12  # scalar: exact already at n = 1
    rows = pf_limit_check(exp_super, 1.0, n_max=40)
    assert rows[-1].rel_err < 1e-3
    assert rows[-1].rel_err < rows[4].rel_err


def test_degenerate_marked_line_is_transient():
    t = make_finite_triplet([[0.0, 0.0], [0.5, 0.4]], [1.0, 0.0], 1.5)
    s = classify(t)
    assert s.recurrence == "R-transient"
    assert s.beta is None and s.alpha is None
    with pytest.raises(ValueError):
        eigen_build(t, s)
    with pytest.raises(ValueError):
        pf_limit_check(t, 0)


# -- hypergeometric helper ----------------------------------------------------------


def test_hypergeom_phi_special_case():
    # lam = mu = 1: Phi(s) = (e^s - 1)/s
    for s in (0.3, 1.0, 2.5):
        assert abs(hypergeom_phi(1.0, 1.0, s) - (math.exp(s) - 1.0) / s) < 1e-13


def test_hypergeom_phi_vs_mpmath():
    lam, mu = 1.7, 0.6
    for s in (0.5, 1.0, 3.0):
        with mp.workdps(40):
            want = mp.nsum(lambda n: mp.gamma(lam) * mu * mp.mpf(s) ** n
                           / (mp.gamma(lam + n) * (mu + n)), [0, mp.inf])
        assert abs(hypergeom_phi(lam, mu, s) - float(want)) < 1e-12


def test_hypergeom_phi_is_one_plus_f():
    t = make_exp_triplet(1.3, 0.7, 1.0)
    law = LifeLengthLaw(t)
    for s in (0.4, 1.0, 1.8):
        assert abs(1.0 + law.f_eval(s) - hypergeom_phi(1.3, 0.7, 1.3 * s)) < 1e-12


# -- property: classification agrees with the criticality statistic ------------------


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=10 ** 6))
def test_criticality_matches_statistic(seed):
    rng = streams.stream(9000, seed)
    t = random_triplet(rng)
    s = classify(t)
    if abs(s.mf1 - 1.0) <= 1e-10:
        assert s.criticality == "critical"
    elif s.mf1 < 1.0:
        assert s.criticality == "subcritical"
    else:
        assert s.criticality == "supercritical"
