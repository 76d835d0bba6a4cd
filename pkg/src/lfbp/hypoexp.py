"""Hypoexponential distributions (sums of independent exponentials).

The continuous-family n-step kernels and their gamma-mixtures are shifted
hypoexponential laws with rate lists built from (lambda, mu). Densities use
the partial-fraction form

    pdf(t) = sum_i w_i a_i exp(-a_i t),   w_i = prod_{j != i} a_j / (a_j - a_i)

whose weights alternate in sign and grow combinatorially, so they are
computed once in 60-digit arithmetic (mpmath) and collapsed to float64.
Repeated rates are split by a 1e-30 perturbation inside the high-precision
pass; the induced density error is far below double precision. When the
weight magnitude is too large for a float64 evaluation to be trustworthy the
evaluators fall back to summing in mpmath.
"""

from __future__ import annotations

from functools import lru_cache

import mpmath as mp
import numpy as np

from . import quadrature

_DPS = 60
_FLOAT64_SAFE = 1e10  # max sum|w| for pure float64 evaluation at ~1e-6 accuracy


@lru_cache(maxsize=4096)
def _weights(rates: tuple[float, ...]):
    """Partial-fraction weights for distinct (possibly perturbed) rates."""
    with mp.workdps(_DPS):
        a = [mp.mpf(r) for r in rates]
        # split exact collisions; 1e-30 is invisible at double precision but
        # huge relative to the 60-digit working precision
        seen: dict = {}
        for i, r in enumerate(a):
            key = mp.nstr(r, 40)
            if key in seen:
                seen[key] += 1
                a[i] = r * (1 + mp.mpf("1e-30") * seen[key])
            else:
                seen[key] = 0
        w = []
        for i, ai in enumerate(a):
            num = mp.mpf(1)
            for j, aj in enumerate(a):
                if j != i:
                    num *= aj / (aj - ai)
            w.append(num)
        cond = float(sum(abs(x) for x in w))
        return a, w, cond


class Hypoexp:
    """Sum of independent Exp(rate) variables for a given rate list."""

    def __init__(self, rates):
        if len(rates) == 0:
            raise ValueError("need at least one rate")
        if any(r <= 0 for r in rates):
            raise ValueError("rates must be positive")
        self.rates = tuple(float(r) for r in rates)
        self._mp_rates, self._mp_w, self.condition = _weights(self.rates)
        self._a = np.array([float(x) for x in self._mp_rates])
        self._w = np.array([float(x) for x in self._mp_w])
        self.mean = float(sum(1.0 / r for r in self.rates))

    # -- exact pointwise laws ------------------------------------------------

    def pdf(self, t):
        t_arr = np.asarray(t, dtype=float)
        scalar = t_arr.ndim == 0
        tv = np.atleast_1d(t_arr)
        if self.condition <= _FLOAT64_SAFE:
            ex = np.exp(-np.outer(self._a, np.maximum(tv, 0.0)))
            vals = (self._w * self._a) @ ex
            vals = np.where(tv < 0, 0.0, np.maximum(vals, 0.0))
        else:
            vals = self._mp_eval(tv, density=True)
        return float(vals[0]) if scalar else vals

    def cdf(self, t):
        t_arr = np.asarray(t, dtype=float)
        scalar = t_arr.ndim == 0
        tv = np.atleast_1d(t_arr)
        if self.condition <= _FLOAT64_SAFE:
            ex = np.exp(-np.outer(self._a, np.maximum(tv, 0.0)))
            vals = 1.0 - self._w @ ex
            vals = np.where(tv < 0, 0.0, np.clip(vals, 0.0, 1.0))
        else:
            vals = self._mp_eval(tv, density=False)
        return float(vals[0]) if scalar else vals

    def _mp_eval(self, tv, *, density: bool):
        vals = np.empty(tv.shape)
        with mp.workdps(_DPS):
            for k, tk in enumerate(tv):
                if tk < 0:
                    vals[k] = 0.0
                    continue
                tm = mp.mpf(float(tk))
                if density:
                    s = mp.fsum(w * a * mp.exp(-a * tm)
                                for w, a in zip(self._mp_w, self._mp_rates))
                    vals[k] = max(float(s), 0.0)
                else:
                    s = mp.fsum(w * mp.exp(-a * tm)
                                for w, a in zip(self._mp_w, self._mp_rates))
                    vals[k] = min(max(float(1 - s), 0.0), 1.0)
        return vals

    def mgf_neg(self, theta: float) -> float:
        """E[exp(-theta S)] for theta >= 0; stable product, no cancellation."""
        out = 1.0
        for r in self.rates:
            out *= r / (r + theta)
        return out

    # -- integration and sampling --------------------------------------------

    def tail_cut(self, eps: float = 1e-14) -> float:
        """T with P(S > T) < eps, found by doubling from the mean."""
        T = max(self.mean * 4.0, 1.0)
        for _ in range(60):
            if 1.0 - self.cdf(T) < eps:
                return T
            T *= 1.5
        return T

    def expect(self, g, *, shift: float = 0.0, tol: float = 1e-10,
               breaks=()) -> float:
        """E[g(shift + S)] by Gauss-Legendre against the density.

        ``breaks``: kink locations of g (in the shifted coordinate), so that
        indicator-style integrands do not wreck the convergence rate.

        The float64 density carries cancellation noise of order
        eps * sum|w_i a_i|; the requested tolerance is floored at that
        level times the integration length, else refinement stalls on
        noise it can never beat.
        """
        T = self.tail_cut()
        if self.condition <= _FLOAT64_SAFE:
            noise = 2.3e-16 * float(np.abs(self._w * self._a).sum()) * T
            tol = max(tol, 4.0 * noise)
        return quadrature.density_weighted(lambda t: g(shift + t), self.pdf, T,
                                           tol=tol,
                                           breaks=[b - shift for b in breaks])

    def sample(self, rng: np.random.Generator, size: int | None = None):
        """Exact draws: sum of independent exponentials."""
        if size is None:
            return float(sum(rng.exponential(1.0 / r) for r in self.rates))
        out = np.zeros(size)
        for r in self.rates:
            out += rng.exponential(1.0 / r, size)
        return out


@lru_cache(maxsize=4096)
def chain_law(lam: float, n: int) -> Hypoexp:
    """Law of the n-step displacement of the marked chain: rates lam..lam+n-1."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return Hypoexp(tuple(lam + k for k in range(n)))


@lru_cache(maxsize=4096)
def gamma_chain_law(lam: float, mu: float, r: int) -> Hypoexp:
    """Law of a gamma-start propagated r marked steps: Exp(mu+r) + chain_law(lam, r)."""
    rates = (mu + r,) + tuple(lam + k for k in range(r))
    return Hypoexp(rates)
