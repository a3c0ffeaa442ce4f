"""Stratified estimation: combine exact and sampled per-tile statistics.

Each tile contributing to a query is a stratum sampled without replacement,
so variance terms carry the finite-population correction (1 - n/N). Exact
strata (fully absorbed tiles) contribute their value with zero variance.
Confidence intervals come from the CLT normal approximation; count is always
exact from the index, and min/max fall back to exact computation because
sampling cannot bound extremes reliably.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

_NEAR_ZERO = 1e-12


class EstimationError(Exception):
    pass


class InsufficientSample(EstimationError):
    """A non-exact stratum arrived with fewer than 2 samples."""


class EmptyRegion(EstimationError):
    """The aggregate is undefined over an empty query region."""


@dataclass(frozen=True)
class AggregateSpec:
    """One requested aggregate: a function over a numeric non-axis attribute.

    `attribute` is ignored for count.
    """

    func: str  # count | sum | mean | min | max
    attribute: int | None = None

    def __post_init__(self):
        if self.func not in ("count", "sum", "mean", "min", "max"):
            raise ValueError(f"unsupported aggregate function {self.func!r}")
        if self.func != "count" and self.attribute is None:
            raise ValueError(f"{self.func} requires an attribute")

    def label(self) -> str:
        if self.func == "count":
            return "count"
        return f"{self.func}({self.attribute})"


@dataclass(frozen=True)
class StratumStat:
    """One tile's contribution: region population, sample size, sample moments."""

    N_t: int
    n_t: int
    mean_hat: float
    var_hat: float
    exact: bool = False

    def __post_init__(self):
        if not 0 <= self.n_t <= self.N_t:
            raise ValueError("need 0 <= n_t <= N_t")
        if self.exact and self.n_t != self.N_t:
            raise ValueError("exact stratum must have n_t == N_t")


@dataclass(frozen=True)
class Estimate:
    value_hat: float
    variance: float
    ci_lo: float
    ci_hi: float
    eps_est: float
    gamma: float
    exact: bool = False


def normal_quantile(gamma: float) -> float:
    """Two-sided standard-normal quantile z with P(|Z| <= z) = gamma."""
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must be in (0, 1)")
    return NormalDist().inv_cdf((1.0 + gamma) / 2.0)


def confidence_interval(value_hat: float, variance: float, gamma: float):
    """CI bounds value_hat +- z*sqrt(variance) and the relative half-width.

    A zero-variance estimate has eps 0 regardless of the value; near-zero
    values with positive variance report eps +inf so callers keep sampling
    until the stratum set is exhausted.
    """
    if variance < 0:
        raise ValueError("variance must be non-negative")
    if variance == 0.0:
        return value_hat, value_hat, 0.0
    half = normal_quantile(gamma) * math.sqrt(variance)
    denom = abs(value_hat)
    eps = math.inf if denom < _NEAR_ZERO else half / denom
    return value_hat - half, value_hat + half, eps


def _check_strata(strata) -> list[StratumStat]:
    kept = []
    for i, s in enumerate(strata):
        if s.N_t == 0:
            continue
        if not s.exact and s.n_t < s.N_t and s.n_t < 2:
            raise InsufficientSample(f"stratum {i} has n={s.n_t} (< 2) of N={s.N_t}")
        kept.append(s)
    return kept


def _fpc_var_term(s: StratumStat) -> float:
    if s.exact or s.n_t == s.N_t:
        return 0.0
    return (s.var_hat / s.n_t) * (1.0 - s.n_t / s.N_t)


def combine_sum(strata, gamma: float) -> Estimate:
    """Stratified sum estimate: totals add, variance is sum of per-stratum
    N_t^2 * var/n * (1 - n/N) over non-exhausted strata."""
    kept = _check_strata(strata)
    value = sum(s.N_t * s.mean_hat for s in kept)
    variance = sum(s.N_t * s.N_t * _fpc_var_term(s) for s in kept)
    lo, hi, eps = confidence_interval(value, variance, gamma)
    exact = all(s.exact or s.n_t == s.N_t for s in kept)
    return Estimate(value, variance, lo, hi, eps, gamma, exact)


def combine_mean(strata, gamma: float) -> Estimate:
    """Stratified mean estimate: population-weighted means with FPC variance."""
    kept = _check_strata(strata)
    N = sum(s.N_t for s in kept)
    if N == 0:
        raise EmptyRegion("mean over an empty region")
    value = sum((s.N_t / N) * s.mean_hat for s in kept)
    variance = sum((s.N_t / N) ** 2 * _fpc_var_term(s) for s in kept)
    lo, hi, eps = confidence_interval(value, variance, gamma)
    exact = all(s.exact or s.n_t == s.N_t for s in kept)
    return Estimate(value, variance, lo, hi, eps, gamma, exact)


def count_exact(region_counts, gamma: float = 0.95) -> Estimate:
    """Counts come straight from the index (axis values are in memory)."""
    value = float(sum(region_counts))
    return Estimate(value, 0.0, value, value, 0.0, gamma, exact=True)


def minmax_exact(values, func: str, gamma: float = 0.95) -> Estimate:
    """Exact min or max over all region object values (or per-tile reductions)."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise EmptyRegion(f"{func} over an empty region")
    value = float(arr.min() if func == "min" else arr.max())
    return Estimate(value, 0.0, value, value, 0.0, gamma, exact=True)
