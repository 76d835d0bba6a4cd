import numpy as np
import pytest

from lfbp.typespace import make_exp_triplet, make_finite_triplet


@pytest.fixture
def scalar_sub():
    # R = 1.25, rho = 0.8, f(1) = 2/3, limit mean 5
    return make_finite_triplet([[0.4]], [1.0], 1.0)


@pytest.fixture
def scalar_crit():
    # survival exactly 1/(1+n)
    return make_finite_triplet([[0.5]], [1.0], 1.0)


@pytest.fixture
def scalar_crit_m2():
    # m_n = 2n; conditioned Z_n/n -> Exp(mean 2)
    return make_finite_triplet([[1.0 / 3.0]], [1.0], 2.0)


@pytest.fixture
def scalar_super():
    # rho = 1.5, survival -> 1/2
    return make_finite_triplet([[0.75]], [1.0], 1.0)


@pytest.fixture
def exp_super():
    return make_exp_triplet(1.0, 1.0, 2.0)


@pytest.fixture
def exp_sub():
    # m f(1) = 0.5 (e - 2) < 1
    return make_exp_triplet(1.0, 1.0, 0.5)


def random_triplet(rng: np.random.Generator, d: int | None = None,
                   row_cap: float = 0.95):
    """Random strictly positive sub-stochastic triplet (irreducible)."""
    if d is None:
        d = int(rng.integers(1, 6))
    K = rng.random((d, d)) + 0.05
    K *= (row_cap * rng.random((d, 1)) + 0.02) / K.sum(axis=1, keepdims=True)
    gamma = rng.random(d) + 0.05
    gamma /= gamma.sum()
    m = float(rng.uniform(0.2, 3.0))
    return make_finite_triplet(K, gamma, m)


def random_supercritical(rng: np.random.Generator, d: int | None = None):
    """Random finite triplet scaled so m f(1) lands in (1.2, 3.2)."""
    from lfbp.spectral import LifeLengthLaw
    t = random_triplet(rng, d)
    f1 = LifeLengthLaw(t).f_eval(1.0)
    target = float(rng.uniform(1.2, 3.2))
    return make_finite_triplet(t.K, t.gamma_vector, target / f1)
