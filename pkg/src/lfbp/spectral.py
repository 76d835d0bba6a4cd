"""Spectral analytics: life-length law, Malthusian parameter, eigenpair.

The marked lineage of an individual is a killed Markov chain; its absorption
time L (the life length) has tail P(L > n) = d_n = gamma-average of K^n(., E).
The generating function f(s) = sum_{n>=1} d_n s^n controls everything here:

* criticality: m f(1) < 1, = 1, > 1 (sub / critical / super),
* the decay parameter R solving m f(R) = 1 with rho = 1/R, alpha = ln rho,
* beta = m R f'(R), the inner product of the eigenpair,
* u(x) = (1+m)(K^(R)(x, E) - 1) and nu = (m/(1+m)) gamma K^(R), satisfying
  M u = rho u, nu M = rho nu, nu(E) = 1, gamma(u) = (1+m)/m, nu(u) = beta.

Root-finding is bracketed bisection on the monotone f; the Perron root of the
mean matrix (power iteration) serves as an independent cross-oracle for 1/R
in the finite family.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import hypoexp, quadrature
from .errors import BracketError
from .typespace import (FAMILY_EXP, FAMILY_FINITE, ExpFamilyTriplet,
                        FiniteTriplet, LFTriplet, as_array_callable,
                        exp_family_kn_mass)

SUBCRITICAL = "subcritical"
CRITICAL = "critical"
SUPERCRITICAL = "supercritical"

R_POSITIVE = "R-positive"
R_NULL = "R-null"
R_TRANSIENT = "R-transient"

_CRIT_TOL = 1e-10
_BISECT_MAX = 200


# ---------------------------------------------------------------------------
# life length law
# ---------------------------------------------------------------------------

class LifeLengthLaw:
    """Tail sequence d_n, generating function f, and samplers for L.

    P(L > n) = d_n with d_0 = 1; P(L >= 1) = 1 always. E L = 1 + f(1).
    """

    def __init__(self, triplet: LFTriplet):
        if triplet.family not in (FAMILY_FINITE, FAMILY_EXP):
            raise ValueError("life-length analytics require the finite or exp family")
        self.triplet = triplet
        self.family = triplet.family
        self._d = triplet.d_sequence(64)
        if self.family == FAMILY_FINITE:
            self._reach = _reachable_set(triplet.K, np.flatnonzero(triplet.gamma_vector > 0))
            sub = triplet.K[np.ix_(self._reach, self._reach)]
            self._rho_reach, _, _, _ = power_iteration(sub) if sub.size else (0.0, None, 0.0, 0)

    def tails(self, n: int) -> np.ndarray:
        """d_0..d_n."""
        if n >= len(self._d):
            self._d = self.triplet.d_sequence(max(n, 2 * len(self._d)))
        return self._d[: n + 1]

    def pmf(self, n: int) -> float:
        """P(L = n) = d_{n-1} - d_n for n >= 1."""
        if n < 1:
            raise ValueError("life lengths start at 1")
        d = self.tails(n)
        return float(d[n - 1] - d[n])

    def radius(self) -> float:
        """Radius of convergence R_* of f.

        Exponential family: the coefficients decay factorially, so R_* is
        infinite. Finite family: 1 / (Perron root of K restricted to the
        gamma-reachable states), by power iteration.
        """
        if self.family == FAMILY_EXP:
            return math.inf
        return math.inf if self._rho_reach < 1e-300 else 1.0 / self._rho_reach

    def f_eval(self, s: float) -> float:
        """f(s) = sum_{n>=1} d_n s^n; math.inf at or beyond the radius."""
        if s < 0:
            raise ValueError("s must be nonnegative")
        if s == 0.0:
            return 0.0
        if self.family == FAMILY_FINITE:
            if s >= self.radius():
                return self._mass_at_radius(s)
            K, gam = self._restricted()
            eye = np.eye(K.shape[0])
            w = np.linalg.solve(eye - s * K, np.ones(K.shape[0]))
            return float(gam @ w - gam.sum())
        return self._exp_series(s, derivative=False)

    def f_derivative(self, s: float) -> float:
        """f'(s); math.inf when the series for f' diverges at s."""
        if s < 0:
            raise ValueError("s must be nonnegative")
        if s == 0.0:
            return float(self.tails(1)[1])
        if self.family == FAMILY_FINITE:
            if s >= self.radius():
                return math.inf
            K, gam = self._restricted()
            eye = np.eye(K.shape[0])
            w = np.linalg.solve(eye - s * K, np.ones(K.shape[0]))
            v = np.linalg.solve(eye - s * K, K @ w)
            return float(gam @ v)
        return self._exp_series(s, derivative=True)

    def mean(self) -> float:
        """E L = 1 + f(1)."""
        return 1.0 + self.f_eval(1.0)

    def is_degenerate(self) -> bool:
        """True when K(., E) vanishes gamma-a.s., so L = 1 surely and f = 0."""
        return float(self.tails(1)[1]) == 0.0

    # -- samplers -------------------------------------------------------------

    def sample_capped(self, rng: np.random.Generator, cap: int, size: int | None = None):
        """Draw min(L, cap + 1); exact for every event that depends on L <= cap."""
        d = self.tails(cap)
        u = rng.random(size)
        # L > n  iff  u <= d_n ; searchsorted on the descending tail
        out = np.searchsorted(-d, -np.atleast_1d(u), side="right")
        out = np.where(np.atleast_1d(u) <= d[cap], cap + 1, out)
        out = out.astype(np.int64)
        return int(out[0]) if size is None else out

    def sample(self, rng: np.random.Generator, size: int | None = None,
               tail_eps: float = 1e-15):
        """Draw L by inverse transform on the precomputed tail.

        The tail is extended until d_N < tail_eps; the residual mass is
        assigned to N + 1 and recorded in ``tail_remainder``.
        """
        n = 64
        d = self.tails(n)
        while d[-1] >= tail_eps:
            if n >= 200000:
                raise RuntimeError(
                    f"life-length tail still {d[-1]:.3e} at n={n}; use sample_capped")
            n *= 2
            d = self.tails(n)
        self.tail_remainder = float(d[-1])
        return self.sample_capped(rng, len(d) - 1, size=size)

    # -- internals ------------------------------------------------------------

    def _restricted(self):
        t = self.triplet
        return (t.K[np.ix_(self._reach, self._reach)], t.gamma_vector[self._reach])

    def _mass_at_radius(self, s: float) -> float:
        """Partial-series proxy for f at or beyond the radius.

        For the finite family the gamma-reachable Perron class makes d_n s^n
        non-summable at s = R_*, so this reports math.inf unless the partial
        sums are Cauchy within the budget (degenerate kernels).
        """
        if s > self.radius() * (1.0 + 1e-12):
            return math.inf
        total = 0.0
        v = self.triplet.gamma_vector[self._reach].copy()
        K, _ = self._restricted()
        sn = 1.0
        for _n in range(1, 20001):
            v = v @ K
            sn *= s
            term = float(v.sum()) * sn
            total += term
            if term < 1e-16 * max(total, 1.0):
                return total
        return math.inf

    def _exp_series(self, s: float, derivative: bool) -> float:
        t: ExpFamilyTriplet = self.triplet
        lam, mu = t.lam, t.mu
        term = s * mu / (mu + 1.0)  # d_1 s
        total = term if not derivative else term / s
        for n in range(1, 100000):
            ratio = s * (lam / (lam + n)) * ((mu + n) / (mu + n + 1.0))
            term *= ratio
            inc = term if not derivative else (n + 1) * term / s
            total += inc
            if not math.isfinite(total):
                return math.inf
            if abs(inc) < 1e-17 * max(abs(total), 1e-300) and ratio < 0.5:
                break
        return total


def _reachable_set(K: np.ndarray, start: np.ndarray) -> np.ndarray:
    """States reachable from ``start`` along positive entries of K."""
    d = K.shape[0]
    seen = np.zeros(d, dtype=bool)
    stack = list(start)
    seen[start] = True
    while stack:
        i = stack.pop()
        for j in np.flatnonzero(K[i] > 0.0):
            if not seen[j]:
                seen[j] = True
                stack.append(j)
    return np.flatnonzero(seen)


# ---------------------------------------------------------------------------
# power iteration (independent Perron-root oracle)
# ---------------------------------------------------------------------------

def power_iteration(A: np.ndarray, tol: float = 1e-13, max_iter: int = 50000):
    """Perron root and vector of a nonnegative square matrix.

    Iterates on A + I (positive diagonal removes periodicity) with a positive
    start and subtracts the shift from the Rayleigh quotient. Returns
    (rho, vector, residual, iterations).
    """
    d = A.shape[0]
    if d == 0:
        return 0.0, np.array([]), 0.0, 0
    B = A + np.eye(d)
    v = np.full(d, 1.0 / math.sqrt(d))
    lam = 0.0
    for it in range(1, max_iter + 1):
        w = B @ v
        norm = np.linalg.norm(w)
        if norm < 1e-300:
            return 0.0, v, 0.0, it
        v_new = w / norm
        lam = float(v_new @ (B @ v_new))
        resid = float(np.linalg.norm(B @ v_new - lam * v_new))
        v = v_new
        if resid <= tol * max(1.0, abs(lam)):
            return lam - 1.0, v, resid, it
    return lam - 1.0, v, resid, max_iter


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------

@dataclass
class SpectralSummary:
    """Everything classify/solve_R derives from (f, m)."""

    criticality: str
    recurrence: str
    R: float                 # decay parameter; R_* when transient; inf possible
    R_star: float
    rho: float | None        # 1/R when the Malthusian parameter exists
    alpha: float | None      # ln rho; None when no Malthusian parameter
    beta: float | None       # m R f'(R); None when transient/degenerate
    mf1: float               # m f(1); criticality statistic
    f1: float                # f(1); E L = 1 + f(1)
    mean_life: float

    def as_dict(self) -> dict:
        return {
            "criticality": self.criticality,
            "recurrence": self.recurrence,
            "R": self.R,
            "R_star": self.R_star,
            "rho": self.rho,
            "alpha": self.alpha,
            "beta": self.beta,
            "m_f1": self.mf1,
            "f1": self.f1,
            "mean_life": self.mean_life,
        }


def solve_R(law: LifeLengthLaw, m: float) -> SpectralSummary:
    """Locate the decay parameter: the root of m f(R) = 1, or R_* without one.

    f is strictly increasing with f(0) = 0, so a sign bracket plus bisection
    is exact and certified; the iteration budget is 200 halvings. When
    f(R_*) < 1/m the process is R-transient and no Malthusian parameter
    exists.
    """
    f1 = law.f_eval(1.0)
    mf1 = m * f1 if math.isfinite(f1) else math.inf
    if abs(mf1 - 1.0) <= _CRIT_TOL:
        crit = CRITICAL
    elif mf1 < 1.0:
        crit = SUBCRITICAL
    else:
        crit = SUPERCRITICAL
    R_star = law.radius()
    mean_life = 1.0 + f1 if math.isfinite(f1) else math.inf

    if law.is_degenerate():
        # f vanishes identically: the marked line dies immediately, gamma-a.s.
        return SpectralSummary(crit, R_TRANSIENT, R_star, R_star, None, None,
                               None, 0.0, 0.0, 1.0)

    target = 1.0 / m
    f_at_star = law.f_eval(R_star) if math.isfinite(R_star) else math.inf
    if f_at_star < target:
        return SpectralSummary(crit, R_TRANSIENT, R_star, R_star, None, None,
                               None, mf1, f1, mean_life)

    lo, hi = 0.0, _bracket_high(law, target, R_star)
    for _ in range(_BISECT_MAX):
        mid = 0.5 * (lo + hi)
        if law.f_eval(mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-14 * max(1.0, hi):
            break
    R = 0.5 * (lo + hi)
    fprime = law.f_derivative(R)
    recurrence = R_POSITIVE if math.isfinite(fprime) and fprime < 1e12 else R_NULL
    beta = m * R * fprime if math.isfinite(fprime) else math.inf
    rho = 1.0 / R
    return SpectralSummary(crit, recurrence, R, R_star, rho, math.log(rho),
                           beta, mf1, f1, mean_life)


def _bracket_high(law: LifeLengthLaw, target: float, R_star: float) -> float:
    if math.isfinite(R_star):
        for j in range(1, 60):
            s = R_star * (1.0 - 2.0 ** (-j))
            if law.f_eval(s) >= target:
                return s
        raise BracketError(
            f"f stays below {target:.6g} up to R_* (1 - 2^-59); cannot bracket",
            lo=0.0, hi=R_star)
    s = 1.0
    for _ in range(200):
        if law.f_eval(s) >= target:
            return s
        s *= 2.0
    raise BracketError(f"f never reached {target:.6g} while doubling s", lo=0.0, hi=s)


def classify(triplet: LFTriplet) -> SpectralSummary:
    """Regime report for a triplet: criticality, recurrence, R, alpha, beta."""
    return solve_R(LifeLengthLaw(triplet), triplet.m)


# ---------------------------------------------------------------------------
# resolvent and eigenpair
# ---------------------------------------------------------------------------

def k_resolvent_mass(triplet: LFTriplet, x, s: float) -> float:
    """K^(s)(x, E) = sum_n s^n K^n(x, E); math.inf where the series diverges."""
    if s < 0:
        raise ValueError("s must be nonnegative")
    x = triplet.validate_point(x)
    if triplet.family == FAMILY_FINITE:
        reach = _reachable_set(triplet.K, np.array([x]))
        sub = triplet.K[np.ix_(reach, reach)]
        rho, _, _, _ = power_iteration(sub)
        if rho > 0 and s >= 1.0 / rho:
            return math.inf
        w = np.linalg.solve(np.eye(len(reach)) - s * sub, np.ones(len(reach)))
        return float(w[int(np.flatnonzero(reach == x)[0])])
    lam = triplet.lam
    total, term = 1.0, 1.0
    for n in range(100000):
        term *= s * lam / (lam + n) * math.exp(-x)
        total += term
        if term < 1e-17 * total:
            break
    return total


def in_domain_of_resolvent(triplet: LFTriplet, x, s: float) -> bool:
    """Whether x lies in E_s, judged by convergence of the mass series."""
    return math.isfinite(k_resolvent_mass(triplet, x, s))


class NuMeasure:
    """Left eigen-measure nu(A) = (m/(1+m)) integral of K^(R)(y, A) gamma(dy).

    Finite family: an explicit vector. Exponential family: the series in
    kernel powers gives an exact mixture over r >= 0 with weights
    (m/(1+m)) R^r d_r and hypoexponential components Exp(mu+r) + sum of
    Exp(lambda + k), truncated at a certified tail below 1e-15.
    """

    def __init__(self, triplet: LFTriplet, R: float):
        self.triplet = triplet
        self.R = R
        m = triplet.m
        if triplet.family == FAMILY_FINITE:
            K, gam = triplet.K, triplet.gamma_vector
            # nu lives on the gamma-reachable class; restricting keeps the
            # resolvent solve nonsingular even if an unreachable block has a
            # larger Perron root
            reach = _reachable_set(K, np.flatnonzero(gam > 0))
            sub = K[np.ix_(reach, reach)]
            w = np.linalg.solve(np.eye(len(reach)) - R * sub.T, gam[reach])
            self.vector = np.zeros(K.shape[0])
            self.vector[reach] = (m / (1.0 + m)) * w
            self.weights = None
        else:
            law = LifeLengthLaw(triplet)
            d = law.tails(8)
            n = 8
            while d[-1] * R ** (len(d) - 1) > 1e-16 and n < 4096:
                n *= 2
                d = law.tails(n)
            coef = (m / (1.0 + m)) * d * np.power(R, np.arange(len(d)))
            keep = int(np.max(np.flatnonzero(coef > 1e-17 * coef.sum()))) + 1
            self.weights = coef[:keep]
            self.tail_mass = float(coef[keep:].sum())
            self.components = [None] + [
                hypoexp.gamma_chain_law(triplet.lam, triplet.mu, r)
                for r in range(1, keep)
            ]
            self.components[0] = hypoexp.Hypoexp((triplet.mu,))

    def mass(self) -> float:
        if self.triplet.family == FAMILY_FINITE:
            return float(self.vector.sum())
        return float(self.weights.sum())

    def integrate(self, g, breaks=()) -> float:
        if self.triplet.family == FAMILY_FINITE:
            from .typespace import as_finite_vector
            gv = as_finite_vector(g, len(self.vector))
            return float(self.vector @ gv)
        gv = as_array_callable(g)
        return float(sum(w * comp.expect(gv, breaks=breaks)
                         for w, comp in zip(self.weights, self.components)))

    def integrate_exp_tilt(self, theta: float) -> float:
        """Exact integral of exp(-theta y) nu(dy) via component MGFs."""
        if self.triplet.family == FAMILY_FINITE:
            raise ValueError("exp tilt probes are for the continuous family")
        return float(sum(w * comp.mgf_neg(theta)
                         for w, comp in zip(self.weights, self.components)))

    def cdf(self, t: float) -> float:
        if self.triplet.family == FAMILY_FINITE:
            raise ValueError("cdf applies to the continuous family")
        return float(sum(w * comp.cdf(t)
                         for w, comp in zip(self.weights, self.components)))

    def sample(self, rng: np.random.Generator, size: int | None = None):
        if self.triplet.family == FAMILY_FINITE:
            p = self.vector / self.vector.sum()
            out = rng.choice(len(p), p=p, size=size)
            return int(out) if size is None else out.astype(np.int64)
        p = self.weights / self.weights.sum()
        if size is None:
            r = int(rng.choice(len(p), p=p))
            return float(self.components[r].sample(rng))
        rs = rng.choice(len(p), p=p, size=size)
        out = np.empty(size)
        for i, r in enumerate(rs):
            out[i] = self.components[r].sample(rng)
        return out


@dataclass
class Eigenpair:
    """Right function u, left measure nu, and their inner product beta."""

    triplet: LFTriplet
    summary: SpectralSummary
    nu: NuMeasure
    u_vector: np.ndarray | None = None  # finite family

    def u(self, x) -> float:
        """u(x) = (1+m)(K^(R)(x, E) - 1); infinite outside E_R."""
        t = self.triplet
        if t.family == FAMILY_FINITE:
            return float(self.u_vector[t.validate_point(x)])
        return (1.0 + t.m) * (k_resolvent_mass(t, x, self.summary.R) - 1.0)

    @property
    def beta(self) -> float:
        return self.summary.beta

    def u_gamma_integral(self) -> float:
        """gamma(u); identity value (1+m)/m."""
        t = self.triplet
        if t.family == FAMILY_FINITE:
            return float(t.gamma_vector @ self.u_vector)
        return t.gamma.integrate(as_array_callable(self.u))

    def u_nu_integral(self) -> float:
        """nu(u); identity value beta. Exact double series in the exp family."""
        t = self.triplet
        if t.family == FAMILY_FINITE:
            return float(self.nu.vector @ self.u_vector)
        R, lam, m = self.summary.R, t.lam, t.m
        c = t.c_sequence(256)
        acc = 0.0
        for w, comp in zip(self.nu.weights, self.nu.components):
            inner, term = 0.0, 1.0
            for j in range(1, len(c)):
                term = (R * lam / (lam + j - 1.0)) * term
                inc = term * comp.mgf_neg(float(j))
                inner += inc
                if inc < 1e-17 * max(inner, 1e-300):
                    break
            acc += w * (1.0 + m) * inner
        return float(acc)


def eigen_build(triplet: LFTriplet, summary: SpectralSummary | None = None) -> Eigenpair:
    """Construct (u, nu, beta) for an R-recurrent triplet."""
    if summary is None:
        summary = classify(triplet)
    if summary.recurrence == R_TRANSIENT:
        raise ValueError("eigenpair requires an R-recurrent process")
    R = summary.R
    nu = NuMeasure(triplet, R)
    u_vec = None
    if triplet.family == FAMILY_FINITE:
        K = triplet.K
        d = K.shape[0]
        u_vec = np.empty(d)
        for x in range(d):
            u_vec[x] = (1.0 + triplet.m) * (k_resolvent_mass(triplet, x, R) - 1.0)
    return Eigenpair(triplet, summary, nu, u_vec)


def eigen_residuals(triplet: LFTriplet, pair: Eigenpair, grid=None) -> dict:
    """Residuals of the eigen relations, for tests and reports.

    Returns max |(M u)(x) - rho u(x)| / max u over the grid, and the
    corresponding left residual against indicator probes (continuous) or the
    full vector (finite).
    """
    rho = pair.summary.rho
    t = triplet
    if t.family == FAMILY_FINITE:
        M = t.M
        u = pair.u_vector
        ok = np.isfinite(u)  # states outside E_R carry u = inf; skip them
        Mu = M[np.ix_(ok, ok)] @ u[ok]
        right = float(np.max(np.abs(Mu - rho * u[ok])) / np.max(np.abs(u[ok])))
        left_vec = pair.nu.vector @ M - rho * pair.nu.vector
        left = float(np.max(np.abs(left_vec)) / np.max(np.abs(pair.nu.vector)))
        return {"right": right, "left": left}
    if grid is None:
        grid = [0.25, 0.5, 1.0, 2.0, 4.0]
    from .typespace import mean_apply
    u = as_array_callable(pair.u)
    umax = max(abs(pair.u(x)) for x in grid)
    right = max(abs(mean_apply(t, u, x) - rho * pair.u(x)) for x in grid) / umax
    lefts = []
    for T in (0.5, 1.0, 2.0):
        mu_side = _nu_M_indicator(t, pair, T)
        lefts.append(abs(mu_side - rho * pair.nu.cdf(T)))
    return {"right": right, "left": max(lefts)}


def _nu_M_indicator(t: ExpFamilyTriplet, pair: Eigenpair, T: float) -> float:
    """Integral of M(y, [0, T]) nu(dy) for the continuous family."""
    lam, m = t.lam, t.m
    gamma_mass = 1.0 - math.exp(-t.mu * T)

    def k_ind(y):
        y = np.asarray(y, dtype=float)
        inside = np.exp(-y) * (1.0 - np.exp(-lam * np.maximum(T - y, 0.0)))
        return np.where(y < T, inside, 0.0)

    def k_mass(y):
        y = np.asarray(y, dtype=float)
        return np.exp(-y)

    part_k = pair.nu.integrate(k_ind, breaks=(T,))
    part_restart = m * gamma_mass * pair.nu.integrate(k_mass)
    return part_k + part_restart


# ---------------------------------------------------------------------------
# Perron-Frobenius ratio limit and the 2F2 series
# ---------------------------------------------------------------------------

@dataclass
class PFLimitRow:
    n: int
    scaled_mass: float     # R^n M^n(x, E)
    limit: float           # u(x) nu(E) / beta
    rel_err: float


def pf_limit_check(triplet: LFTriplet, x, n_max: int = 40) -> list[PFLimitRow]:
    """Tabulate R^n M^n(x, E) against u(x) nu(E) / beta for n = 1..n_max."""
    summary = classify(triplet)
    if summary.recurrence != R_POSITIVE:
        raise ValueError("ratio limit requires R-positive recurrence")
    pair = eigen_build(triplet, summary)
    R = summary.R
    limit = pair.u(x) * pair.nu.mass() / summary.beta
    rows = []
    if triplet.family == FAMILY_FINITE:
        x = triplet.validate_point(x)
        v = np.ones(triplet.d)
        M = triplet.M
        for n in range(1, n_max + 1):
            v = R * (M @ v)
            scaled = float(v[x])
            rows.append(PFLimitRow(n, scaled, limit, abs(scaled - limit) / abs(limit)))
    else:
        from .typespace import kernel_power_mass
        for n in range(1, n_max + 1):
            scaled = R ** n * kernel_power_mass(triplet, x, n)
            rows.append(PFLimitRow(n, scaled, limit, abs(scaled - limit) / abs(limit)))
    return rows


def hypergeom_phi(lam: float, mu: float, s: float) -> float:
    """Phi(s) = sum_n mu Gamma(lam) s^n / (Gamma(lam + n)(mu + n)).

    Term recurrence phi_{n+1}/phi_n = s (mu+n) / ((lam+n)(mu+n+1)); the
    series is entire, and 1 + f(s) = Phi(lam s).
    """
    total, term = 1.0, 1.0
    for n in range(100000):
        term *= s * (mu + n) / ((lam + n) * (mu + n + 1.0))
        total += term
        if not math.isfinite(total):
            return math.inf
        if abs(term) < 1e-17 * max(abs(total), 1e-300):
            break
    return total
