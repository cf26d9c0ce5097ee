import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lgflat.errors import TooManySubsets
from lgflat.optimizer import GAParams, exhaustive_search, ga_optimize, random_subset_stats, subset_rates
from lgflat.qkd import subset_key_rate


def noisy_matrix(n, seed):
    rng = np.random.default_rng(seed)
    C = rng.uniform(0, 0.05, size=(n, n))
    C[np.diag_indices(n)] = rng.uniform(0.5, 1.0, size=n)
    return C


class TestRates:
    def test_matches_scalar_rate(self):
        C = noisy_matrix(9, 1)
        subsets = [(0, 1, 2), (3, 5, 8), (1, 4, 7)]
        got = subset_rates(C, subsets)
        want = [subset_key_rate(C, s).rate_bits for s in subsets]
        assert np.allclose(got, want, rtol=0, atol=1e-13)

    def test_zero_block(self):
        C = np.zeros((4, 4))
        C[0, 0] = 1
        assert subset_rates(C, [(1, 2)])[0] == -np.inf

    @given(st.integers(3, 10).flatmap(lambda n: st.tuples(st.just(n), st.permutations(range(n)), st.integers(0, 2**32))))
    @settings(max_examples=30, deadline=None)
    def test_relabeling_invariance(self, args):
        n, perm, seed = args
        C = noisy_matrix(n, seed)
        inv = np.argsort(perm)
        Cp = C[np.ix_(perm, perm)]
        s = (0, 1, 2)
        mapped = tuple(sorted(int(inv[i]) for i in s))
        assert subset_rates(C, [s])[0] == pytest.approx(subset_rates(Cp, [mapped])[0], abs=1e-13)


class TestRandom:
    def test_reproducible(self):
        C = noisy_matrix(15, 2)
        assert random_subset_stats(C, 4, 200, seed=9) == random_subset_stats(C, 4, 200, seed=9)
        assert random_subset_stats(C, 4, 200, seed=9) != random_subset_stats(C, 4, 200, seed=10)

    def test_independent_draws_count_duplicates(self):
        st_ = random_subset_stats(noisy_matrix(5, 0), 2, 100, seed=0)
        assert st_.n_samples == 100 and st_.n_duplicates > 0

    def test_distinct_caps_at_population(self):
        st_ = random_subset_stats(noisy_matrix(5, 0), 2, 100, seed=0, distinct=True)
        assert st_.n_samples == math.comb(5, 2) and st_.n_duplicates == 0

    def test_max_is_a_sample(self):
        C = noisy_matrix(12, 3)
        st_ = random_subset_stats(C, 5, 300, seed=4)
        assert subset_rates(C, [st_.argmax])[0] == st_.max
        assert st_.mean <= st_.max

    def test_bad_d(self):
        with pytest.raises(ValueError):
            random_subset_stats(np.eye(3), 4)


class TestGA:
    def test_params_validation(self):
        for kw in (dict(population=1), dict(generations=0), dict(mutation_rate=0.0), dict(elite_count=50), dict(rng_seed=-1)):
            with pytest.raises(ValueError):
                GAParams(**kw)

    def test_defaults(self):
        p = GAParams()
        assert (p.population, p.generations, p.mutation_rate, p.elite_count) == (50, 200, 0.3, 2)

    def test_deterministic(self):
        C = noisy_matrix(20, 5)
        p = GAParams(generations=30, rng_seed=123)
        a, b = ga_optimize(C, 6, p), ga_optimize(C, 6, p)
        assert a.subset == b.subset and a.trace == b.trace

    def test_trace_nondecreasing(self):
        res = ga_optimize(noisy_matrix(25, 6), 8, GAParams(generations=60, rng_seed=7))
        best = [t[1] for t in res.trace]
        assert len(res.trace) == 61
        assert all(b >= a for a, b in zip(best, best[1:]))
        assert res.rate == best[-1]
        assert len(set(res.subset)) == 8 and res.subset == tuple(sorted(res.subset))

    def test_reaches_exhaustive_optimum(self):
        C = noisy_matrix(12, 8)
        truth = exhaustive_search(C, 5)
        res = ga_optimize(C, 5, GAParams(generations=100, rng_seed=1))
        assert res.rate == pytest.approx(truth.rate, abs=1e-12)

    def test_full_subset(self):
        C = noisy_matrix(6, 0)
        assert ga_optimize(C, 6, GAParams(generations=3)).subset == tuple(range(6))


class TestExhaustive:
    def test_tie_break_lexicographic(self):
        assert exhaustive_search(np.eye(6), 3).subset == (0, 1, 2)

    def test_known_best(self):
        C = np.full((5, 5), 0.1) + np.diag([0.5, 0.9, 0.5, 0.9, 0.9])
        assert exhaustive_search(C, 3).subset == (1, 3, 4)

    def test_cap(self):
        with pytest.raises(TooManySubsets):
            exhaustive_search(np.eye(40), 10, cap=1000)

    def test_chunking_irrelevant(self):
        C = noisy_matrix(11, 4)
        assert exhaustive_search(C, 4, chunk=7) == exhaustive_search(C, 4, chunk=100000)
