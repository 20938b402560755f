"""Error functions P(D_alpha(empirical, Q) > delta): exact and Monte Carlo."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp
from scipy.stats import norm

from .divergence import as_prob_vector, check_order, power_divergence_rows, _check_positive
from .errors import CapacityError, DomainError
from .sampling import simulate_statistics

__all__ = [
    "DEFAULT_BUDGET",
    "TailEstimate",
    "count_types",
    "enumerate_types",
    "log_multinomial_pmf",
    "exact_tail",
    "mc_tail",
    "wilson_interval",
]

DEFAULT_BUDGET = 10**8
_CHUNK = 1 << 16


@dataclass(frozen=True)
class TailEstimate:
    value: float
    method: str
    ci_low: float
    ci_high: float
    reps: int
    delta: float
    n: int
    k: int
    alpha: float
    # log(value); kept separately so tiny exact tails keep full precision
    log_value: float = math.nan

    def __post_init__(self):
        if not (0.0 <= self.ci_low <= self.value <= self.ci_high <= 1.0):
            raise ValueError(
                f"inconsistent tail estimate: {self.ci_low} <= {self.value} <= {self.ci_high}"
            )
        if self.method == "exact" and not (self.ci_low == self.value == self.ci_high):
            raise ValueError("exact estimates carry a degenerate interval")


def count_types(k, n):
    """Number of compositions of n into k nonnegative parts, C(n+k-1, k-1)."""
    return math.comb(int(n) + int(k) - 1, int(k) - 1)


def enumerate_types(k, n, budget=DEFAULT_BUDGET):
    """Yield every count vector of length ``k`` summing to ``n``, in lexicographic order.

    The generator steps one composition in place, so memory use is O(k).
    """
    k = int(k)
    n = int(n)
    if k < 1 or n < 0:
        raise DomainError(f"need k >= 1 and n >= 0, got k={k}, n={n}")
    total = count_types(k, n)
    if total > budget:
        raise CapacityError(
            f"type enumeration needs {total} items, budget is {budget}",
            required=total, budget=budget,
        )
    return _compositions(k, n)


def _compositions(k, n):
    x = [0] * k
    x[-1] = n
    while True:
        yield tuple(x)
        # rightmost nonzero entry past position 0
        j = k - 1
        while j > 0 and x[j] == 0:
            j -= 1
        if j == 0:
            return
        t = x[j] - 1
        x[j] = 0
        x[j - 1] += 1
        x[-1] = t


def log_multinomial_pmf(counts, p):
    """log of n!/prod(x_j!) prod p_j^x_j; ``-inf`` if a positive count meets p_j = 0.

    ``counts`` may be a single vector or a 2-d array of vectors (one per row).
    """
    x = np.asarray(counts, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    if x.shape[-1] != p.shape[-1]:
        raise DomainError(f"dimension mismatch: counts has {x.shape[-1]} cells, p has {p.size}")
    n = np.sum(x, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        logp = np.log(p)
        prod = np.where(x > 0, x * logp, 0.0)
    out = gammaln(n + 1.0) - np.sum(gammaln(x + 1.0), axis=-1) + np.sum(prod, axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def _check_tail_args(q_null, p_true, alpha, n):
    alpha = check_order(alpha)
    q_null = as_prob_vector(q_null, "q_null")
    _check_positive(q_null, "q_null")
    p_true = q_null if p_true is None else as_prob_vector(p_true, "p_true")
    if p_true.shape != q_null.shape:
        raise DomainError("p_true and q_null differ in dimension")
    n = int(n)
    if n < 1:
        raise DomainError("n must be >= 1")
    return q_null, p_true, alpha, n


def exact_tail(q_null, p_true, alpha, n, delta, budget=DEFAULT_BUDGET):
    """P(D_alpha(X/n, q_null) > delta) for X ~ Mult(n, p_true), by full enumeration.

    Pass ``p_true=None`` for the null distribution (p_true = q_null).  The
    inequality is strict.
    """
    q_null, p_true, alpha, n = _check_tail_args(q_null, p_true, alpha, n)
    delta = float(delta)
    k = q_null.size
    types = enumerate_types(k, n, budget)
    chunk_sums = []
    log_parts = []
    while True:
        block = np.array(list(itertools.islice(types, _CHUNK)), dtype=np.float64)
        if block.size == 0:
            break
        d = power_divergence_rows(block / n, q_null, alpha)
        logw = log_multinomial_pmf(block, p_true)
        # masking keeps the summation tree fixed, so the result is monotone in delta
        chunk_sums.append(float(np.sum(np.where(d > delta, np.exp(logw), 0.0))))
        hit = logw[d > delta]
        if hit.size:
            log_parts.append(float(logsumexp(hit)))
    value = math.fsum(chunk_sums)
    if not log_parts:
        log_value = -math.inf
    elif value >= 1e-300:
        log_value = math.log(value)
    else:
        log_value = float(logsumexp(log_parts))
    value = min(value, 1.0)
    return TailEstimate(value=value, method="exact", ci_low=value, ci_high=value, reps=0,
                        delta=delta, n=n, k=k, alpha=alpha, log_value=log_value)


def wilson_interval(successes, trials, confidence=0.95):
    """Wilson score interval for a binomial proportion."""
    if trials < 1:
        raise DomainError("trials must be >= 1")
    z = float(norm.ppf(0.5 + confidence / 2.0))
    phat = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    centre = (phat + z2 / (2.0 * trials)) / denom
    half = z * math.sqrt(phat * (1.0 - phat) / trials + z2 / (4.0 * trials * trials)) / denom
    lo = max(0.0, centre - half)
    hi = min(1.0, centre + half)
    # endpoints are exact when every or no trial succeeds
    if successes == 0:
        lo = 0.0
    if successes == trials:
        hi = 1.0
    return min(lo, phat), max(hi, phat)


def mc_tail(q_null, p_true, alpha, n, delta, reps, seed, confidence=0.95, workers=1):
    """Monte Carlo estimate of the tail with a Wilson interval."""
    q_null, p_true, alpha, n = _check_tail_args(q_null, p_true, alpha, n)
    reps = int(reps)
    if reps < 100:
        raise DomainError(f"Monte Carlo tails need reps >= 100, got {reps}")
    delta = float(delta)
    stats = simulate_statistics(p_true, q_null, alpha, n, reps, seed, workers=workers)
    hits = int(np.count_nonzero(stats > delta))
    value = hits / reps
    lo, hi = wilson_interval(hits, reps, confidence)
    return TailEstimate(value=value, method="monte_carlo", ci_low=lo, ci_high=hi, reps=reps,
                        delta=delta, n=n, k=q_null.size, alpha=alpha,
                        log_value=math.log(value) if hits else -math.inf)
