"""Subset search over a crosstalk matrix for the best secret key rate.

Random sampling gives the typical rate of a d-subset; a genetic algorithm
searches for the best one; exhaustive enumeration is the oracle for small
problems. All randomness comes from numpy's PCG64 seeded through
``SeedSequence``, so runs are reproducible across platforms.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .crosstalk import CrosstalkMatrix
from .errors import TooManySubsets


def _matrix(m) -> np.ndarray:
    return m.C if isinstance(m, CrosstalkMatrix) else np.asarray(m, dtype=float)


def _entropy_d(x: np.ndarray, d: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    h = np.zeros_like(x)
    pos = x > 0
    h[pos] -= x[pos] * (np.log2(x[pos]) - math.log2(d - 1))
    sub = x < 1
    h[sub] -= (1 - x[sub]) * np.log2(1 - x[sub])
    return h


def subset_rates(m, subsets) -> np.ndarray:
    """Key rates for a ``(k, d)`` array of index subsets, ``-inf`` where the block is all zero."""
    C = _matrix(m)
    S = np.asarray(subsets, dtype=np.intp)
    if S.ndim == 1:
        S = S[None, :]
    d = S.shape[1]
    diag = np.diag(C)[S].sum(axis=1)
    total = C[S[:, :, None], S[:, None, :]].sum(axis=(1, 2))
    out = np.full(S.shape[0], -np.inf)
    ok = total > 0
    e = np.clip(1.0 - diag[ok] / total[ok], 0.0, 1.0)
    out[ok] = math.log2(d) - 2.0 * _entropy_d(e, d)
    return out


def _rng(*key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(k) for k in key])))


def _draw_subset(rng: np.random.Generator, n: int, d: int) -> tuple[int, ...]:
    return tuple(sorted(int(i) for i in rng.choice(n, size=d, replace=False)))


@dataclass(frozen=True)
class RandomStats:
    d: int
    mean: float
    std: float
    max: float
    argmax: tuple[int, ...]
    n_samples: int
    n_duplicates: int


def random_subset_stats(m, d: int, n_samples: int = 1000, seed: int = 0, distinct: bool = False) -> RandomStats:
    """Key-rate statistics over uniformly drawn d-subsets.

    Samples are independent by default (``n_duplicates`` counts repeats);
    ``distinct=True`` redraws repeats, capped at the number of subsets.
    """
    C = _matrix(m)
    n = C.shape[0]
    if not 2 <= d <= n:
        raise ValueError(f"d must lie in [2, {n}], got {d}")
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = _rng(seed)
    target = min(n_samples, math.comb(n, d)) if distinct else n_samples
    seen: set[tuple[int, ...]] = set()
    subsets = []
    dupes = 0
    while len(subsets) < target:
        s = _draw_subset(rng, n, d)
        if s in seen:
            dupes += 1
            if distinct:
                continue
        seen.add(s)
        subsets.append(s)
    rates = subset_rates(C, subsets)
    k = int(np.argmax(rates))
    return RandomStats(
        d=d,
        mean=float(np.mean(rates)),
        std=float(np.std(rates)),
        max=float(rates[k]),
        argmax=subsets[k],
        n_samples=len(subsets),
        n_duplicates=dupes if not distinct else 0,
    )


@dataclass(frozen=True)
class GAParams:
    population: int = 50
    generations: int = 200
    mutation_rate: float = 0.3
    elite_count: int = 2
    rng_seed: int = 0

    def __post_init__(self):
        if self.population < 2:
            raise ValueError("population must be >= 2")
        if self.generations < 1:
            raise ValueError("generations must be >= 1")
        if not 0 < self.mutation_rate < 1:
            raise ValueError("mutation_rate must lie in (0, 1)")
        if not 0 <= self.elite_count < self.population:
            raise ValueError("elite_count must be in [0, population)")
        if not 0 <= self.rng_seed < 2**64:
            raise ValueError("rng_seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class SearchResult:
    subset: tuple[int, ...]
    rate: float
    trace: list[tuple[int, float, float]] = field(default_factory=list)
    """Per generation: (generation, best-ever fitness, population mean)."""


class _Fitness:
    def __init__(self, C):
        self.C = C
        self.cache: dict[tuple[int, ...], float] = {}

    def __call__(self, pop: Sequence[tuple[int, ...]]) -> np.ndarray:
        missing = [s for s in dict.fromkeys(pop) if s not in self.cache]
        if missing:
            for s, r in zip(missing, subset_rates(self.C, missing)):
                self.cache[s] = float(r)
        return np.array([self.cache[s] for s in pop])


def _tournament(rng, fit: np.ndarray) -> int:
    a, b = rng.integers(0, fit.size, size=2)
    if fit[b] > fit[a] or (fit[b] == fit[a] and b < a):
        return int(b)
    return int(a)


def _child(rng, pop, fit, n: int, d: int, mutation_rate: float) -> tuple[int, ...]:
    pa = pop[_tournament(rng, fit)]
    pb = pop[_tournament(rng, fit)]
    union = np.array(sorted(set(pa) | set(pb)))
    genes = set(int(i) for i in rng.choice(union, size=d, replace=False))
    if rng.random() < mutation_rate and d < n:
        out = sorted(genes)[int(rng.integers(d))]
        pool = [i for i in range(n) if i not in genes]
        genes.discard(out)
        genes.add(pool[int(rng.integers(len(pool)))])
    return tuple(sorted(genes))


def _rank(pop, fit) -> list[int]:
    return sorted(range(len(pop)), key=lambda i: (-fit[i], pop[i]))


def ga_optimize(m, d: int, params: GAParams = GAParams()) -> SearchResult:
    """Generational GA over d-subsets maximizing the secret key rate.

    Tournament selection (size 2), union-then-downsample crossover, single
    swap mutation, ``elite_count`` survivors. Child ``k`` of generation ``g``
    draws from its own stream keyed ``(seed, g, k)``.
    """
    C = _matrix(m)
    n = C.shape[0]
    if not 2 <= d <= n:
        raise ValueError(f"d must lie in [2, {n}], got {d}")
    fitness = _Fitness(C)
    seed = params.rng_seed
    pop = [_draw_subset(_rng(seed, 0, k), n, d) for k in range(params.population)]
    fit = fitness(pop)
    order = _rank(pop, fit)
    best, best_fit = pop[order[0]], float(fit[order[0]])
    trace = [(0, best_fit, float(np.mean(fit)))]
    for g in range(1, params.generations + 1):
        elites = [pop[i] for i in order[: params.elite_count]]
        children = [
            _child(_rng(seed, g, k), pop, fit, n, d, params.mutation_rate)
            for k in range(params.population - params.elite_count)
        ]
        pop = elites + children
        fit = fitness(pop)
        order = _rank(pop, fit)
        top = pop[order[0]]
        if fit[order[0]] > best_fit or (fit[order[0]] == best_fit and top < best):
            best, best_fit = top, float(fit[order[0]])
        trace.append((g, best_fit, float(np.mean(fit))))
    return SearchResult(best, best_fit, trace)


def exhaustive_search(m, d: int, cap: int = 10**6, chunk: int = 20000) -> SearchResult:
    """Best d-subset by full enumeration; ties go to the lexicographically smallest."""
    C = _matrix(m)
    n = C.shape[0]
    if not 2 <= d <= n:
        raise ValueError(f"d must lie in [2, {n}], got {d}")
    total = math.comb(n, d)
    if total > cap:
        raise TooManySubsets(f"C({n},{d}) = {total} exceeds cap {cap}")
    combos = itertools.combinations(range(n), d)
    best, best_fit = None, -np.inf
    while True:
        block = list(itertools.islice(combos, chunk))
        if not block:
            break
        rates = subset_rates(C, block)
        k = int(np.argmax(rates))
        if best is None or rates[k] > best_fit:
            best, best_fit = block[k], float(rates[k])
    return SearchResult(tuple(best), best_fit)
