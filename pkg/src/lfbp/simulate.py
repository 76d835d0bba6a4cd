"""Three independent simulators of the same branching process.

* simulate_bgw: direct generation-by-generation branching.
* simulate_cmj: the embedded population whose individuals are maximal marked
  lineages; an individual born at b lives through [b, b+L-1] and drops a
  geometric(mean m) litter of new individuals at each age 1..L-1. The count
  of individuals alive at time n equals Z_n in law.
* simulate_contour: depth-first walk around the same lineage tree truncated
  at height n. An up-jump of size L seeds a lineage; from each height a
  Bernoulli(m/(1+m)) trial either seeds a sibling lineage (the geometric
  litter, consumed one child at a time) or steps down. Every lineage whose
  height range reaches n contributes one level-n excursion, so the excursion
  count is Z_n in law. Memorylessness of the geometric litters is what lets
  the walk forget which lineage's litter it is consuming, so no stack is
  kept.

All three draw life lengths from the same tail sequence d_n and agree with
the exact engine; cross-validation is their purpose. Replicate drivers give
every replicate its own RNG stream keyed by (seed, replicate index), so
results do not depend on worker count or scheduling.
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass, field

import numpy as np

from .errors import PopulationCapError, WalkCapError
from .spectral import LifeLengthLaw
from .streams import geometric, stream
from .typespace import (FAMILY_EXP, FAMILY_FINITE, ExpFamilyTriplet,
                        FiniteTriplet, GenerationSnapshot, LFTriplet)

DEFAULT_CAP = 10_000_000
_WALK_CAP = 100_000_000


# ---------------------------------------------------------------------------
# direct branching
# ---------------------------------------------------------------------------

def _start_points(triplet: LFTriplet, start, rng: np.random.Generator):
    if isinstance(start, str):
        if start != "gamma":
            raise ValueError("start must be a type point or 'gamma'")
        pt = triplet.gamma.sample(rng)
    else:
        pt = triplet.validate_point(start)
    dtype = np.int64 if triplet.family == FAMILY_FINITE else float
    return np.array([pt], dtype=dtype)


def _bgw_step_finite(t: FiniteTriplet, cur: np.ndarray, rng, cap: int,
                     gen: int) -> np.ndarray:
    """One vectorized generation step; exact categorical draws per particle."""
    K = t.K
    km = t.K_row_mass[cur]
    alive = rng.random(len(cur)) < km
    parents = cur[alive]
    if len(parents) == 0:
        return np.empty(0, dtype=np.int64)
    # marked child: inverse-cdf on each parent's kernel row
    cum = np.cumsum(K[parents], axis=1)
    u = rng.random(len(parents)) * km[alive]
    marked = (cum < u[:, None]).sum(axis=1)
    extras = geometric(rng, t.m, size=len(parents))
    total_extra = int(extras.sum())
    size = len(parents) + total_extra
    if size > cap:
        raise PopulationCapError(gen, size, cap)
    if total_extra:
        others = np.searchsorted(t.gamma_cdf, rng.random(total_extra),
                                 side="right")
        return np.concatenate([marked, others]).astype(np.int64)
    return marked.astype(np.int64)


def _bgw_step_exp(t: ExpFamilyTriplet, cur: np.ndarray, rng, cap: int,
                  gen: int) -> np.ndarray:
    alive = rng.random(len(cur)) < np.exp(-cur)
    parents = cur[alive]
    if len(parents) == 0:
        return np.empty(0, dtype=float)
    marked = parents + rng.exponential(1.0 / t.lam, size=len(parents))
    extras = geometric(rng, t.m, size=len(parents))
    total_extra = int(extras.sum())
    size = len(parents) + total_extra
    if size > cap:
        raise PopulationCapError(gen, size, cap)
    if total_extra:
        others = rng.exponential(1.0 / t.mu, size=total_extra)
        return np.concatenate([marked, others])
    return marked


def _bgw_step(triplet: LFTriplet, cur, rng, cap, gen):
    if triplet.family == FAMILY_FINITE:
        return _bgw_step_finite(triplet, cur, rng, cap, gen)
    if triplet.family == FAMILY_EXP:
        return _bgw_step_exp(triplet, cur, rng, cap, gen)
    raise ValueError("bulk simulation supports the finite and exp families")


def simulate_bgw(triplet: LFTriplet, start, n: int, rng: np.random.Generator,
                 cap: int = DEFAULT_CAP) -> list[GenerationSnapshot]:
    """Direct simulation; returns snapshots of generations 0..n.

    ``start`` is a type point or the string "gamma" for a gamma-drawn
    ancestor. Raises PopulationCapError when a generation would exceed
    ``cap``; the caller discards the run.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    cur = _start_points(triplet, start, rng)
    snaps = [GenerationSnapshot(0, cur)]
    for gen in range(1, n + 1):
        cur = _bgw_step(triplet, cur, rng, cap, gen) if len(cur) else cur
        snaps.append(GenerationSnapshot(gen, cur))
    return snaps


def _bgw_zn(triplet: LFTriplet, start, n: int, rng, cap: int) -> int:
    """Fast path: Z_n only, stopping at extinction."""
    cur = _start_points(triplet, start, rng)
    for gen in range(1, n + 1):
        if len(cur) == 0:
            return 0
        cur = _bgw_step(triplet, cur, rng, cap, gen)
    return len(cur)


# ---------------------------------------------------------------------------
# life lengths
# ---------------------------------------------------------------------------

def sample_life_length(law: LifeLengthLaw, rng: np.random.Generator,
                       size: int | None = None, cap: int | None = None):
    """Draw L with P(L > n) = d_n by inverse transform on the tail.

    Uncapped draws extend the tail until the certified remainder is below
    1e-15 (assigned past the last index). ``cap`` truncates at cap+1, exact
    for every event determined by {L <= cap}.
    """
    if cap is not None:
        return law.sample_capped(rng, cap, size=size)
    return law.sample(rng, size=size)


# ---------------------------------------------------------------------------
# embedded CMJ population
# ---------------------------------------------------------------------------

@dataclass
class CMJIndividual:
    """One maximal marked lineage: birth time, life length, litter sizes.

    ``litters[a-1]`` is the litter dropped at age a (a = 1..L-1). Life
    lengths are truncated at the horizon: an individual born at b records at
    most n - b + 1, which leaves every alive-at-or-before-n event exact.
    """

    birth_time: int
    life_length: int
    litters: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))


def simulate_cmj(triplet: LFTriplet, n: int, rng: np.random.Generator,
                 cap: int = DEFAULT_CAP, return_individuals: bool = False,
                 law: LifeLengthLaw | None = None):
    """Embedded population; returns alive counts at times 0..n.

    Seeds one individual at time 0. Each individual draws L from the life
    length law (gamma-mixed ancestry), is alive during [b, b+L-1], and at
    each age 1..L-1 produces geometric(mean m) newborns. The newborn of a
    litter dropped at time k first counts at its own birth time k; the
    original drawing stamps the birth one step earlier (at the parent's
    reproduction) and adds the newborn a step later, which shifts labels but
    not the law of the counts.

    With ``return_individuals`` the CMJIndividual records are returned as a
    second value.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if law is None:
        law = LifeLengthLaw(triplet)
    m = triplet.m
    counts = np.zeros(n + 1, dtype=np.int64)
    queue = [0]                       # birth times, FIFO
    individuals: list[CMJIndividual] = []
    born = 1
    head = 0
    while head < len(queue):
        b = queue[head]
        head += 1
        L = law.sample_capped(rng, n - b)     # min(L, n-b+1), exact in window
        counts[b : min(b + L - 1, n) + 1] += 1
        max_age = min(L - 1, n - b)
        litters = geometric(rng, m, size=max_age) if max_age > 0 else \
            np.empty(0, dtype=np.int64)
        for age in range(1, max_age + 1):
            kids = int(litters[age - 1])
            if kids:
                queue.extend([b + age] * kids)
                born += kids
                if born > cap:
                    raise PopulationCapError(b + age, born, cap)
        if return_individuals:
            individuals.append(CMJIndividual(b, L, litters))
    if return_individuals:
        return counts, individuals
    return counts


# ---------------------------------------------------------------------------
# contour walk
# ---------------------------------------------------------------------------

@dataclass
class ContourWalk:
    """Recorded walk: up-jump sizes as positive entries, unit downs as -1."""

    path: list[int]
    count: int


def simulate_contour(triplet: LFTriplet, n: int, rng: np.random.Generator,
                     law: LifeLengthLaw | None = None, record: bool = False,
                     step_cap: int = _WALK_CAP):
    """Level-n excursion count of the contour walk; equals Z_n in law.

    Each up-jump draws L (capped at the headroom to n, which is exact for
    the count); a lineage seeded at height h covers heights h..h+L-1 and
    contributes one excursion iff that range reaches n. Between up-jumps the
    walk descends by unit steps, each down step taken with probability
    1/(1+m) against m/(1+m) for seeding the next sibling.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return (1, ContourWalk([], 1)) if record else 1
    if law is None:
        law = LifeLengthLaw(triplet)
    p_up = triplet.m / (1.0 + triplet.m)
    path: list[int] = []
    L = law.sample_capped(rng, n)
    if record:
        path.append(L)
    count = 1 if L - 1 >= n else 0
    h = min(L - 1, n)
    steps = 0
    while h > 0:
        steps += 1
        if steps > step_cap:
            raise WalkCapError(steps, step_cap)
        if rng.random() < p_up:
            L = law.sample_capped(rng, n - h)
            if record:
                path.append(L)
            if h + L - 1 >= n:
                count += 1
            h = min(h + L - 1, n)
        else:
            h -= 1
            if record:
                path.append(-1)
    return (count, ContourWalk(path, count)) if record else count


# ---------------------------------------------------------------------------
# marked lineage chain
# ---------------------------------------------------------------------------

def simulate_typed_lineage(triplet: LFTriplet, x, rng: np.random.Generator,
                           step_cap: int = 1_000_000) -> np.ndarray:
    """Type path of one marked lineage until absorption.

    Starts at x; at each step the particle survives with probability
    K(x, E) and moves by the normalized kernel, else is absorbed. The path
    length is L started from this x (so d_n-tailed from a gamma start).
    """
    x = triplet.validate_point(x)
    path = [x]
    kernel = triplet.kernel
    while rng.random() < kernel.mass(path[-1]):
        path.append(kernel.sample_marked(path[-1], rng))
        if len(path) > step_cap:
            raise WalkCapError(len(path), step_cap)
    dtype = np.int64 if triplet.family == FAMILY_FINITE else float
    return np.array(path, dtype=dtype)


# ---------------------------------------------------------------------------
# replicate drivers
# ---------------------------------------------------------------------------

SIMULATORS = ("bgw", "cmj", "contour")


@dataclass
class ZnSample:
    """Replicated Z_n draws plus discard bookkeeping.

    ``values`` holds completed replicates in replicate order; ``raw`` keeps
    the full per-replicate array with -1 marking capped-and-discarded runs,
    so exports can preserve replicate indices.
    """

    values: np.ndarray
    discarded: int
    simulator: str
    n: int
    seed: int
    raw: np.ndarray | None = None

    @property
    def reps(self) -> int:
        return len(self.values) + self.discarded

    def survival_rate(self) -> float:
        return float((self.values > 0).mean())

    def conditioned(self) -> np.ndarray:
        return self.values[self.values > 0]


def _one_replicate(triplet, simulator, start, n, cap, law, rng) -> int:
    if simulator == "bgw":
        return _bgw_zn(triplet, start, n, rng, cap)
    if simulator == "cmj":
        return int(simulate_cmj(triplet, n, rng, cap=cap, law=law)[n])
    if simulator == "contour":
        return int(simulate_contour(triplet, n, rng, law=law))
    raise ValueError(f"unknown simulator {simulator!r}; pick from {SIMULATORS}")


def _run_range(triplet, simulator, start, n, cap, seed, lo, hi):
    law = LifeLengthLaw(triplet) if simulator in ("cmj", "contour") else None
    out = np.empty(hi - lo, dtype=np.int64)
    for i in range(lo, hi):
        rng = stream(seed, i)
        try:
            out[i - lo] = _one_replicate(triplet, simulator, start, n, cap, law, rng)
        except (PopulationCapError, WalkCapError):
            out[i - lo] = -1          # sentinel: discarded
    return out


def replicate_zn(triplet: LFTriplet, n: int, reps: int, seed: int,
                 simulator: str = "bgw", start="gamma", workers: int = 1,
                 cap: int = DEFAULT_CAP) -> ZnSample:
    """Draw Z_n ``reps`` times; replicate i uses stream (seed, i).

    The stream layout makes results identical for any worker count; capped
    runs are discarded and counted, never silently truncated.
    """
    if simulator not in SIMULATORS:
        raise ValueError(f"unknown simulator {simulator!r}; pick from {SIMULATORS}")
    if workers <= 1 or reps < 4 * workers:
        raw = _run_range(triplet, simulator, start, n, cap, seed, 0, reps)
    else:
        bounds = np.linspace(0, reps, workers + 1, dtype=int)
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            futs = [pool.submit(_run_range, triplet, simulator, start, n, cap,
                                seed, int(lo), int(hi))
                    for lo, hi in zip(bounds[:-1], bounds[1:])]
            raw = np.concatenate([f.result() for f in futs])
    keep = raw[raw >= 0]
    return ZnSample(keep, int((raw < 0).sum()), simulator, n, seed, raw)
