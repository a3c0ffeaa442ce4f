import math

import numpy as np
import pytest

from aqtile.estimator import (
    AggregateSpec,
    EmptyRegion,
    InsufficientSample,
    StratumStat,
    combine_mean,
    combine_sum,
    confidence_interval,
    count_exact,
    minmax_exact,
    normal_quantile,
)


def inv_cdf_bisect(p, lo=-10.0, hi=10.0, tol=1e-12):
    """Independent inverse normal CDF: bisection on the erf-based CDF."""
    def cdf(x):
        return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))

    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if cdf(mid) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class TestNormalQuantile:
    @pytest.mark.parametrize("gamma", [0.90, 0.95, 0.99, 0.5, 0.999])
    def test_matches_bisection_oracle(self, gamma):
        want = inv_cdf_bisect((1.0 + gamma) / 2.0)
        assert normal_quantile(gamma) == pytest.approx(want, abs=1e-8)

    def test_z95_value(self):
        assert normal_quantile(0.95) == pytest.approx(1.959964, abs=1e-6)

    def test_invalid_gamma(self):
        for g in (0.0, 1.0, -0.5, 2.0):
            with pytest.raises(ValueError):
                normal_quantile(g)


class TestConfidenceInterval:
    def test_zero_variance(self):
        assert confidence_interval(42.0, 0.0, 0.95) == (42.0, 42.0, 0.0)

    def test_halfwidth_arithmetic(self):
        lo, hi, eps = confidence_interval(100.0, 25.0, 0.95)
        assert hi - lo == pytest.approx(2 * 9.7998, abs=1e-3)
        assert eps == pytest.approx(0.098, abs=1e-4)

    def test_near_zero_value_infinite_eps(self):
        _, _, eps = confidence_interval(0.0, 4.0, 0.95)
        assert eps == math.inf

    def test_negative_variance_rejected(self):
        with pytest.raises(ValueError):
            confidence_interval(1.0, -1.0, 0.95)


class TestCombineSum:
    def test_spec_worked_example(self):
        strata = [
            StratumStat(N_t=10, n_t=10, mean_hat=10.0, var_hat=0.0, exact=True),
            StratumStat(N_t=100, n_t=25, mean_hat=4.0, var_hat=1.0),
        ]
        est = combine_sum(strata, 0.95)
        assert est.value_hat == pytest.approx(500.0)
        assert est.variance == pytest.approx(300.0)
        assert est.ci_hi - est.value_hat == pytest.approx(33.947, abs=1e-3)
        assert est.eps_est == pytest.approx(0.0679, abs=1e-4)
        assert not est.exact

    def test_all_exact_zero_width(self):
        strata = [
            StratumStat(5, 5, 2.0, 0.0, exact=True),
            StratumStat(7, 7, 3.0, 0.0, exact=True),
        ]
        est = combine_sum(strata, 0.95)
        assert est.value_hat == pytest.approx(31.0)
        assert (est.ci_lo, est.ci_hi) == (est.value_hat, est.value_hat)
        assert est.eps_est == 0.0
        assert est.exact

    def test_exhausted_stratum_zero_variance(self):
        est = combine_sum([StratumStat(40, 40, 5.0, 2.5)], 0.95)
        assert est.variance == 0.0
        assert est.exact

    def test_insufficient_sample_raises(self):
        with pytest.raises(InsufficientSample):
            combine_sum([StratumStat(10, 1, 5.0, 0.0)], 0.95)

    def test_zero_population_strata_ignored(self):
        est = combine_sum(
            [StratumStat(0, 0, 0.0, 0.0), StratumStat(4, 4, 1.0, 0.0)], 0.95
        )
        assert est.value_hat == pytest.approx(4.0)


class TestCombineMean:
    def test_spec_worked_example(self):
        strata = [
            StratumStat(50, 50, 10.0, 0.0, exact=True),
            StratumStat(50, 10, 20.0, 4.0),
        ]
        est = combine_mean(strata, 0.95)
        assert est.value_hat == pytest.approx(15.0)
        assert est.variance == pytest.approx(0.08)
        assert est.ci_hi - est.value_hat == pytest.approx(0.5544, abs=1e-4)

    def test_single_exact_stratum(self):
        est = combine_mean([StratumStat(9, 9, 3.5, 0.0, exact=True)], 0.9)
        assert est.value_hat == pytest.approx(3.5)
        assert est.ci_lo == est.ci_hi == est.value_hat

    def test_empty_region(self):
        with pytest.raises(EmptyRegion):
            combine_mean([], 0.95)
        with pytest.raises(EmptyRegion):
            combine_mean([StratumStat(0, 0, 0.0, 0.0)], 0.95)

    def test_exhausted_matches_brute_force(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            pops = [rng.uniform(0, 100, int(rng.integers(1, 30))) for _ in range(4)]
            strata = [
                StratumStat(len(p), len(p), float(p.mean()),
                            float(p.var(ddof=1)) if len(p) > 1 else 0.0)
                for p in pops
            ]
            est = combine_mean(strata, 0.95)
            allv = np.concatenate(pops)
            assert est.value_hat == pytest.approx(allv.mean(), rel=1e-9)
            assert est.variance == 0.0


class TestCountMinMax:
    def test_count_sum(self):
        est = count_exact([3, 7])
        assert est.value_hat == 10.0
        assert est.eps_est == 0.0
        assert est.exact

    def test_count_empty(self):
        est = count_exact([])
        assert est.value_hat == 0.0
        assert est.exact

    def test_minmax_values(self):
        assert minmax_exact([3, 9, 1], "min").value_hat == 1.0
        assert minmax_exact([3, 9, 1], "max").value_hat == 9.0

    def test_minmax_empty_region(self):
        with pytest.raises(EmptyRegion):
            minmax_exact([], "min")


class TestPropertySuite:
    """Randomized invariants over stratified instances (acceptance criterion)."""

    def _random_instance(self, rng, exhausted=False):
        k = int(rng.integers(1, 11))
        pops, strata = [], []
        for _ in range(k):
            N = int(rng.integers(1, 201))
            pop = rng.uniform(-100, 100, N)
            n = N if exhausted else int(rng.integers(min(2, N), N + 1))
            sample = pop if n == N else rng.choice(pop, n, replace=False)
            var = float(np.var(sample, ddof=1)) if n > 1 else 0.0
            strata.append(StratumStat(N, n, float(sample.mean()), var))
            pops.append(pop)
        return pops, strata

    def test_exhausted_equals_brute_force(self):
        rng = np.random.default_rng(101)
        for _ in range(1000):
            pops, strata = self._random_instance(rng, exhausted=True)
            allv = np.concatenate(pops)
            s = combine_sum(strata, 0.95)
            m = combine_mean(strata, 0.95)
            assert s.value_hat == pytest.approx(allv.sum(), rel=1e-9, abs=1e-9)
            assert m.value_hat == pytest.approx(allv.mean(), rel=1e-9, abs=1e-12)
            assert s.variance == 0.0 and m.variance == 0.0
            assert s.exact and m.exact

    def test_fpc_zero_exactly_at_full_sample(self):
        rng = np.random.default_rng(102)
        for _ in range(200):
            N = int(rng.integers(2, 201))
            var = float(rng.uniform(0.1, 50))
            est = combine_sum([StratumStat(N, N, 1.0, var)], 0.95)
            assert est.variance == 0.0

    def test_exact_strata_never_widen_ci(self):
        rng = np.random.default_rng(103)
        for _ in range(300):
            _, strata = self._random_instance(rng)
            base = combine_sum(strata, 0.95)
            extra = StratumStat(int(rng.integers(1, 100)), 0, 0.0, 0.0)
            extra = StratumStat(extra.N_t, extra.N_t, float(rng.uniform(-5, 5)), 0.0, exact=True)
            widened = combine_sum(strata + [extra], 0.95)
            assert widened.variance == pytest.approx(base.variance, rel=1e-12, abs=1e-12)
            assert (widened.ci_hi - widened.ci_lo) == pytest.approx(
                base.ci_hi - base.ci_lo, rel=1e-9, abs=1e-9
            )

    def test_permutation_invariance(self):
        rng = np.random.default_rng(104)
        for _ in range(300):
            _, strata = self._random_instance(rng)
            a = combine_sum(strata, 0.95)
            shuffled = list(strata)
            rng.shuffle(shuffled)
            b = combine_sum(shuffled, 0.95)
            assert a.value_hat == pytest.approx(b.value_hat, rel=1e-12)
            assert a.variance == pytest.approx(b.variance, rel=1e-12)

    def test_variance_contribution_shrinks_with_n(self):
        # FPC motivation: with sigma^2 held fixed, the per-stratum term
        # N^2 var/n (1 - n/N) strictly decreases as n grows
        N, var = 150, 9.0
        terms = [
            combine_sum([StratumStat(N, n, 1.0, var)], 0.95).variance
            for n in range(2, N + 1)
        ]
        assert all(a > b for a, b in zip(terms, terms[1:]))


class TestAggregateSpec:
    def test_count_needs_no_attribute(self):
        assert AggregateSpec("count").label() == "count"

    def test_sum_requires_attribute(self):
        with pytest.raises(ValueError):
            AggregateSpec("sum")

    def test_unknown_func(self):
        with pytest.raises(ValueError):
            AggregateSpec("median", 2)
