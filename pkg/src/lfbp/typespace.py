"""Type spaces, kernels, and the defining triplet of a linear-fractional process.

A process is specified by a triplet (K, gamma, m): a sub-stochastic kernel K
on the type space, a probability measure gamma supplying the types of the
unmarked offspring, and the mean m of the geometric litter size. An
individual of type x has no children with probability 1 - K(x, E); otherwise
the total offspring count N satisfies

    P(N = k | N > 0) = m^(k-1) / (1 + m)^k,    k >= 1,

one child (the marked one) has type law K(x, .) / K(x, E) and the remaining
k - 1 are i.i.d. gamma. The one-step mean kernel is the rank-one perturbation

    M(x, A) = K(x, A) + K(x, E) * m * gamma(A).

Two concrete families are provided: a finite type space (K a matrix, gamma a
vector) and the exponential family on (0, inf) with K(x, A) =
exp(-x) P(x + Y in A), Y ~ Exp(lambda), gamma = Exp(mu). A user-pluggable
kernel/measure pair is accepted wherever only sampling and one-step means are
required; the exact multi-step machinery needs one of the two families.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Union

import numpy as np
from scipy.special import gammaln

from . import quadrature
from .errors import TripletFormatError
from .streams import geometric

TypePoint = Union[int, float]

FAMILY_FINITE = "finite"
FAMILY_EXP = "exp"
FAMILY_CUSTOM = "custom"


# ---------------------------------------------------------------------------
# kernel and measure interfaces
# ---------------------------------------------------------------------------

class SubStochasticKernel:
    """Interface for K(x, dy) with total mass K(x, E) <= 1."""

    def mass(self, x: TypePoint) -> float:
        """K(x, E), the survival probability of the marked line at x."""
        raise NotImplementedError

    def sample_marked(self, x: TypePoint, rng: np.random.Generator) -> TypePoint:
        """Draw from the normalized kernel K(x, .) / K(x, E)."""
        raise NotImplementedError

    def apply(self, g, x: TypePoint) -> float:
        """Integral of g against K(x, .) (unnormalized)."""
        raise NotImplementedError


class ImmigrationMeasure:
    """Interface for the probability measure gamma of unmarked offspring types."""

    def sample(self, rng: np.random.Generator, size: int | None = None):
        raise NotImplementedError

    def integrate(self, g) -> float:
        raise NotImplementedError


class FiniteKernel(SubStochasticKernel):
    def __init__(self, K: np.ndarray):
        self.K = K
        self.row_mass = K.sum(axis=1)

    def mass(self, x):
        return float(self.row_mass[x])

    def sample_marked(self, x, rng):
        row = self.K[x]
        return int(rng.choice(len(row), p=row / self.row_mass[x]))

    def apply(self, g, x):
        gv = as_finite_vector(g, self.K.shape[0])
        return float(self.K[x] @ gv)


class FiniteMeasure(ImmigrationMeasure):
    def __init__(self, gamma: np.ndarray):
        self.gamma = gamma

    def sample(self, rng, size=None):
        out = rng.choice(len(self.gamma), p=self.gamma, size=size)
        return int(out) if size is None else out.astype(np.int64)

    def integrate(self, g):
        gv = as_finite_vector(g, len(self.gamma))
        return float(self.gamma @ gv)


def as_array_callable(g) -> Callable[[np.ndarray], np.ndarray]:
    """Wrap a scalar-or-vector callable so quadrature can feed it arrays."""
    def f(t):
        try:
            out = np.asarray(g(t), dtype=float)
            if out.shape == np.shape(t):
                return out
        except (TypeError, ValueError):
            pass
        return np.array([float(g(ti)) for ti in np.atleast_1d(t)])
    return f


class ExpKernel(SubStochasticKernel):
    """K(x, A) = exp(-x) P(x + Y in A), Y ~ Exp(lambda)."""

    def __init__(self, lam: float):
        self.lam = lam

    def mass(self, x):
        return math.exp(-x)

    def sample_marked(self, x, rng):
        return float(x + rng.exponential(1.0 / self.lam))

    def apply(self, g, x):
        gv = as_array_callable(g)
        val = quadrature.exp_weighted(lambda t: gv(x + t), self.lam)
        return math.exp(-x) * val


class ExpMeasure(ImmigrationMeasure):
    def __init__(self, mu: float):
        self.mu = mu

    def sample(self, rng, size=None):
        return rng.exponential(1.0 / self.mu, size=size)

    def integrate(self, g):
        return quadrature.exp_weighted(as_array_callable(g), self.mu)


def as_finite_vector(g, d: int) -> np.ndarray:
    """Coerce a test function (callable or length-d sequence) to a vector."""
    if callable(g):
        return np.array([float(g(j)) for j in range(d)])
    gv = np.asarray(g, dtype=float)
    if gv.shape != (d,):
        raise ValueError(f"test function vector must have shape ({d},), got {gv.shape}")
    return gv


# ---------------------------------------------------------------------------
# triplets
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LFTriplet:
    """Container for (kernel, gamma, m) plus a family tag.

    Instances are immutable; the finite/exp constructors validate model
    invariants and freeze their arrays.
    """

    kernel: SubStochasticKernel
    gamma: ImmigrationMeasure
    m: float
    family: str = FAMILY_CUSTOM

    def validate_point(self, x: TypePoint) -> TypePoint:
        return x


@dataclass(frozen=True, eq=False)
class FiniteTriplet(LFTriplet):
    K: np.ndarray = field(default=None)
    gamma_vector: np.ndarray = field(default=None)

    @property
    def d(self) -> int:
        return self.K.shape[0]

    @property
    def M(self) -> np.ndarray:
        """Mean matrix K + m * (K 1) gamma^T."""
        kmass = self.K.sum(axis=1)
        return self.K + self.m * np.outer(kmass, self.gamma_vector)

    @cached_property
    def K_row_mass(self) -> np.ndarray:
        out = self.K.sum(axis=1)
        out.setflags(write=False)
        return out

    @cached_property
    def gamma_cdf(self) -> np.ndarray:
        out = np.cumsum(self.gamma_vector)
        out.setflags(write=False)
        return out

    def validate_point(self, x):
        xi = int(x)
        if xi != x or not (0 <= xi < self.d):
            raise ValueError(f"type point {x!r} is not an index in [0, {self.d})")
        return xi

    def d_sequence(self, n: int) -> np.ndarray:
        """d_0..d_n with d_j the gamma-average of K^j(., E)."""
        out = np.empty(n + 1)
        v = self.gamma_vector.copy()
        out[0] = v.sum()
        for j in range(1, n + 1):
            v = v @ self.K
            out[j] = v.sum()
        return out

    def kn_mass(self, x: TypePoint, n: int) -> float:
        """K^n(x, E) by vector iteration."""
        v = np.ones(self.d)
        for _ in range(n):
            v = self.K @ v
        return float(v[self.validate_point(x)])


@dataclass(frozen=True, eq=False)
class ExpFamilyTriplet(LFTriplet):
    lam: float = field(default=None)
    mu: float = field(default=None)

    def validate_point(self, x):
        xf = float(x)
        if not (xf > 0.0) or not math.isfinite(xf):
            raise ValueError(f"type point {x!r} must be a positive real")
        return xf

    def c_sequence(self, n: int) -> np.ndarray:
        """c_0..c_n with c_j = lambda^j Gamma(lambda) / Gamma(lambda + j).

        c_j is the x-free factor of K^j(x, E) = c_j exp(-j x). Computed by the
        stable ratio recurrence c_{j+1} = c_j * lambda / (lambda + j).
        """
        c = np.empty(n + 1)
        c[0] = 1.0
        for j in range(n):
            c[j + 1] = c[j] * self.lam / (self.lam + j)
        return c

    def d_sequence(self, n: int) -> np.ndarray:
        """d_j = c_j * mu / (mu + j): life-length weights of the exponential family."""
        c = self.c_sequence(n)
        j = np.arange(n + 1)
        return c * self.mu / (self.mu + j)

    def kn_mass(self, x: TypePoint, n: int) -> float:
        return exp_family_kn_mass(self.lam, self.validate_point(x), n)


def make_finite_triplet(K, gamma, m: float) -> FiniteTriplet:
    """Validate and build a finite-family triplet.

    Raises TripletFormatError naming the offending field.
    """
    K = np.asarray(K, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1] or K.shape[0] == 0:
        raise TripletFormatError("K", f"must be a nonempty square matrix, got shape {K.shape}")
    d = K.shape[0]
    if np.any(K < -1e-15):
        i, j = np.argwhere(K < -1e-15)[0]
        raise TripletFormatError("K", f"entry ({i},{j}) is negative: {K[i, j]}")
    K = np.clip(K, 0.0, None)
    sums = K.sum(axis=1)
    if np.any(sums > 1.0 + 1e-12):
        i = int(np.argmax(sums))
        raise TripletFormatError("K", f"row {i} sums to {sums[i]:.12g} > 1 (kernel must be sub-stochastic)")
    if gamma.ndim != 1 or gamma.shape[0] != d:
        raise TripletFormatError("gamma", f"must be a length-{d} vector, got shape {gamma.shape}")
    if np.any(gamma < -1e-15):
        i = int(np.argwhere(gamma < -1e-15)[0])
        raise TripletFormatError("gamma", f"entry {i} is negative: {gamma[i]}")
    gamma = np.clip(gamma, 0.0, None)
    if abs(gamma.sum() - 1.0) > 1e-12:
        raise TripletFormatError("gamma", f"entries sum to {gamma.sum():.12g}, expected 1")
    if not (m > 0.0) or not math.isfinite(m):
        raise TripletFormatError("m", f"must be a positive real, got {m!r}")
    K.setflags(write=False)
    gamma.setflags(write=False)
    return FiniteTriplet(kernel=FiniteKernel(K), gamma=FiniteMeasure(gamma),
                         m=float(m), family=FAMILY_FINITE, K=K, gamma_vector=gamma)


def make_exp_triplet(lam: float, mu: float, m: float) -> ExpFamilyTriplet:
    """Validate and build an exponential-family triplet."""
    for name, val in (("lambda", lam), ("mu", mu), ("m", m)):
        if not (val > 0.0) or not math.isfinite(val):
            raise TripletFormatError(name, f"must be a positive real, got {val!r}")
    return ExpFamilyTriplet(kernel=ExpKernel(float(lam)), gamma=ExpMeasure(float(mu)),
                            m=float(m), family=FAMILY_EXP, lam=float(lam), mu=float(mu))


# ---------------------------------------------------------------------------
# JSON interchange
# ---------------------------------------------------------------------------

def triplet_from_dict(doc: dict) -> LFTriplet:
    if not isinstance(doc, dict):
        raise TripletFormatError("<root>", f"expected a JSON object, got {type(doc).__name__}")
    family = doc.get("family")
    if family == FAMILY_FINITE:
        for key in ("K", "gamma", "m"):
            if key not in doc:
                raise TripletFormatError(key, "missing required field")
        return make_finite_triplet(doc["K"], doc["gamma"], doc["m"])
    if family == FAMILY_EXP:
        for key in ("lambda", "mu", "m"):
            if key not in doc:
                raise TripletFormatError(key, "missing required field")
        return make_exp_triplet(doc["lambda"], doc["mu"], doc["m"])
    raise TripletFormatError("family", f"must be 'finite' or 'exp', got {family!r}")


def triplet_to_dict(triplet: LFTriplet) -> dict:
    if triplet.family == FAMILY_FINITE:
        return {"family": FAMILY_FINITE, "K": triplet.K.tolist(),
                "gamma": triplet.gamma_vector.tolist(), "m": triplet.m}
    if triplet.family == FAMILY_EXP:
        return {"family": FAMILY_EXP, "lambda": triplet.lam, "mu": triplet.mu,
                "m": triplet.m}
    raise ValueError("custom triplets have no JSON form")


def parse_triplet(text: str) -> LFTriplet:
    """Parse a JSON triplet document, with position info on malformed JSON."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise TripletFormatError("<json>", f"line {e.lineno} column {e.colno}: {e.msg}") from e
    return triplet_from_dict(doc)


# ---------------------------------------------------------------------------
# offspring law and one-step means
# ---------------------------------------------------------------------------

@dataclass
class GenerationSnapshot:
    """A generation of the process: the multiset of type points alive.

    ``points`` is an integer array of type indices (finite family) or a float
    array of positive reals (continuous). When the snapshot was produced by a
    law that distinguishes a marked individual, it sits at index 0 and
    ``marked`` is True.
    """

    generation: int
    points: np.ndarray
    marked: bool = False

    @property
    def size(self) -> int:
        return len(self.points)


def offspring_sample(triplet: LFTriplet, x: TypePoint, rng: np.random.Generator) -> GenerationSnapshot:
    """One generation of offspring of a type-x individual.

    Empty with probability 1 - K(x, E); otherwise 1 + geometric(m) children,
    the marked one at index 0 with law K(x, .)/K(x, E), the rest i.i.d. gamma.
    """
    x = triplet.validate_point(x)
    p_live = triplet.kernel.mass(x)
    if rng.random() >= p_live:
        dtype = np.int64 if triplet.family == FAMILY_FINITE else float
        return GenerationSnapshot(1, np.empty(0, dtype=dtype))
    extra = geometric(rng, triplet.m)
    marked = triplet.kernel.sample_marked(x, rng)
    others = triplet.gamma.sample(rng, extra) if extra > 0 else []
    points = np.concatenate([[marked], np.asarray(others, dtype=float)])
    if triplet.family == FAMILY_FINITE:
        points = points.astype(np.int64)
    return GenerationSnapshot(1, points, marked=True)


def offspring_total_pmf(m: float, k: int) -> float:
    """P(N = k | N > 0) = m^(k-1) / (1+m)^k for k >= 1."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return m ** (k - 1) / (1.0 + m) ** k


def mean_apply(triplet: LFTriplet, g, x: TypePoint) -> float:
    """One application of the mean kernel: (Mg)(x) = (Kg)(x) + m K(x,E) gamma(g)."""
    x = triplet.validate_point(x)
    return triplet.kernel.apply(g, x) + triplet.m * triplet.kernel.mass(x) * triplet.gamma.integrate(g)


def kernel_power_mass(triplet: LFTriplet, x: TypePoint, n: int) -> float:
    """M^n(x, E), the expected generation-n size started from a type-x individual.

    Finite family: vector iteration with the mean matrix. Exponential family:
    exact expansion M^n(x,E) = c_n e^{-nx} + m sum_i c_i e^{-ix} g_{n-i} with
    g the gamma-averaged mean-mass recursion. Custom kernels fall back to
    n-fold mean_apply over callables, which is exponential in n; keep n small.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return 1.0
    if triplet.family == FAMILY_FINITE:
        x = triplet.validate_point(x)
        v = np.ones(triplet.d)
        M = triplet.M
        for _ in range(n):
            v = M @ v
        return float(v[x])
    if triplet.family == FAMILY_EXP:
        from .recursions import g_sequence
        x = triplet.validate_point(x)
        c = triplet.c_sequence(n)
        g = g_sequence(triplet.d_sequence(n - 1), triplet.m)
        ex = np.exp(-np.arange(n + 1) * x)
        acc = c[n] * ex[n]
        for i in range(1, n + 1):
            acc += triplet.m * c[i] * ex[i] * g[n - i]
        return float(acc)
    g_fn = lambda y: 1.0
    for _ in range(n):
        prev = g_fn
        g_fn = (lambda p: lambda y: mean_apply(triplet, p, y))(prev)
    return g_fn(x)


def exp_family_kn_mass(lam: float, x: float, n: int) -> float:
    """K^n(x, E) = lambda^n exp(-n x) Gamma(lambda) / Gamma(lambda + n).

    Evaluated in log space so large n or lambda cannot overflow.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return 1.0
    log_val = n * math.log(lam) - n * x + gammaln(lam) - gammaln(lam + n)
    return math.exp(log_val)
