"""Bahadur functions, generating sequences, slopes and efficiencies.

The Bahadur function ``g_alpha`` is the limiting decay rate
``-(c_alpha(n)/n) ln e_{alpha,n}(delta)`` of the null tail of the power
divergence statistic, where ``c_alpha`` is a generating sequence:

* ``g_alpha(delta) = ln(1 + alpha(alpha-1) delta) / (alpha - 1)`` for
  ``0 < alpha < 1`` (the Renyi value matching power divergence ``delta``),
* ``g_1(delta) = delta``,
* ``g_alpha(delta) = (alpha(alpha-1) delta)**(1/alpha)`` for ``alpha > 1``.

The generating sequence is 1 for ``alpha <= 1`` and
``k**((alpha-1)/alpha) / ln k`` for ``alpha > 1``.  Neither function is
continuous at ``alpha = 1`` from the right; both branches are exposed as
they are.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .divergence import as_prob_vector, check_order, is_log_order, renyi_from_power
from .errors import CapacityError, DomainError, IndeterminateFormError, TailUnderflowError
from .projection import numeric_projection

__all__ = [
    "bahadur_function",
    "generating_sequence",
    "BahadurContext",
    "empirical_slope",
    "sanov_sandwich",
    "bahadur_efficiency",
    "efficiency_ratio_closed_form",
    "matching_sample_size",
    "SequenceForm",
    "ratio_limit_probe",
    "RateReport",
    "check_rate_conditions",
]

MATCHING_CAP = 10**15


def _check_delta(delta):
    delta = float(delta)
    if not (delta > 0 and math.isfinite(delta)):
        raise DomainError(f"delta must be positive and finite, got {delta}")
    return delta


def bahadur_function(alpha, delta):
    """Closed-form Bahadur function g_alpha(delta)."""
    alpha = check_order(alpha)
    delta = _check_delta(delta)
    if is_log_order(alpha):
        return delta
    arg = alpha * (alpha - 1.0) * delta
    if alpha < 1.0:
        if arg <= -1.0:
            raise DomainError(
                f"1 + alpha(alpha-1)*delta = {1.0 + arg} <= 0 (alpha={alpha}, delta={delta})"
            )
        return math.log1p(arg) / (alpha - 1.0)
    return arg ** (1.0 / alpha)


def generating_sequence(alpha, n, k, alpha_prefactor=False):
    """c_alpha(n): 1 for alpha <= 1, else k^((alpha-1)/alpha) / ln k.

    With ``alpha_prefactor=True`` the alpha > 1 branch is multiplied by alpha.
    ``n`` is accepted for signature symmetry; only ``k`` enters.
    """
    alpha = check_order(alpha)
    if alpha <= 1.0 or is_log_order(alpha):
        return 1.0
    k = float(k)
    if k < 2:
        raise DomainError(f"generating sequence for alpha > 1 needs k >= 2, got k={k}")
    value = math.exp((alpha - 1.0) / alpha * math.log(k)) / math.log(k)
    return alpha * value if alpha_prefactor else value


@dataclass(frozen=True)
class BahadurContext:
    alpha: float
    delta: float
    n: int
    k: int

    def __post_init__(self):
        check_order(self.alpha)
        _check_delta(self.delta)
        if not (1 <= int(self.k) <= int(self.n)):
            raise DomainError(f"need 1 <= k <= n, got k={self.k}, n={self.n}")


def empirical_slope(ctx, tail):
    """-(c_alpha(n)/n) ln(tail) for a tail estimate at the context's (n, k)."""
    log_tail = tail.log_value
    if not math.isfinite(log_tail):
        if tail.value <= 0.0:
            raise TailUnderflowError(
                "tail underflow: the estimated tail is 0; increase n budget or use the exact method"
            )
        log_tail = math.log(tail.value)
    c = generating_sequence(ctx.alpha, ctx.n, ctx.k)
    slope = -(c / ctx.n) * log_tail
    return 0.0 if slope == 0.0 else slope


def sanov_sandwich(q_null, alpha, delta, n):
    """Method-of-types bracket ``(I* - (k-1) ln(n+1)/n, I*)`` for the exact slope.

    ``I*`` is the minimum of D_1(P, Q) over ``P`` whose power divergence of
    order ``alpha`` reaches ``delta``.  The exact ``-(1/n) ln P(D > delta)``
    lies in ``[lower, upper + (k-1) ln(n+1)/n]``.
    """
    q = as_prob_vector(q_null, "q_null")
    alpha = check_order(alpha)
    n = int(n)
    if n < 1:
        raise DomainError("n must be >= 1")
    threshold = renyi_from_power(delta, alpha)
    result = numeric_projection(q, alpha, threshold)
    if not result.converged:
        raise RuntimeError(f"projection did not converge (solver {result.solver})")
    i_star = result.kl_value
    return i_star - (q.size - 1) * math.log(n + 1.0) / n, i_star


def _ext_product(ratio, c_limit):
    c_limit = float(c_limit)
    if math.isnan(c_limit) or c_limit < 0:
        raise DomainError(f"c_limit must lie in [0, inf], got {c_limit}")
    if (ratio == 0.0 and math.isinf(c_limit)) or (math.isinf(ratio) and c_limit == 0.0):
        raise IndeterminateFormError("efficiency is of the form 0 * inf")
    return ratio * c_limit


def bahadur_efficiency(alpha1, delta1, alpha2, delta2, c_limit):
    """(g_alpha1(delta1) / g_alpha2(delta2)) * c_limit, with c_limit in [0, inf]."""
    ratio = bahadur_function(alpha1, delta1) / bahadur_function(alpha2, delta2)
    return _ext_product(ratio, c_limit)


def efficiency_ratio_closed_form(alpha1, delta1, alpha2, delta2):
    """g-ratio for 0 < alpha1 < alpha2 <= 1 written directly in the logarithms."""
    alpha1 = check_order(alpha1)
    alpha2 = check_order(alpha2)
    delta1 = _check_delta(delta1)
    delta2 = _check_delta(delta2)
    if not (alpha1 < alpha2 and (alpha2 < 1.0 or is_log_order(alpha2))) or is_log_order(alpha1):
        raise DomainError(f"need 0 < alpha1 < alpha2 <= 1, got {alpha1}, {alpha2}")
    top = math.log1p(alpha1 * (alpha1 - 1.0) * delta1)
    if is_log_order(alpha2):
        return top / ((alpha1 - 1.0) * delta2)
    bottom = math.log1p(alpha2 * (alpha2 - 1.0) * delta2)
    return (alpha2 - 1.0) / (alpha1 - 1.0) * top / bottom


def _smallest_integer_reaching(f, target, cap):
    """Smallest m >= 1 (found by doubling then bisection) with f(m) >= target."""
    if f(1) >= target:
        return 1
    hi = 2
    while f(hi) < target:
        if hi > cap:
            raise CapacityError(f"no matching sample size below {cap}", required=hi, budget=cap)
        hi *= 2
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if f(mid) >= target:
            hi = mid
        else:
            lo = mid
    if hi > cap:
        raise CapacityError(f"no matching sample size below {cap}", required=hi, budget=cap)
    return hi


def matching_sample_size(alpha1, delta1, alpha2, delta2, n, k_rule, cap=MATCHING_CAP,
                         alpha_prefactor=False):
    """Sample size m at which the second statistic matches the first's error decay.

    Finds the smallest integer m with
    ``m / c_alpha2(m) >= (g_alpha1/g_alpha2) * n / c_alpha1(n)``, where ``k``
    at each sample size comes from ``k_rule``.  Sizes for which the
    generating sequence is undefined (``k < 2`` with alpha > 1) count as not
    reaching the target.  The bisection assumes ``m / c(m)`` is increasing
    past the doubling bracket.
    """
    n = int(n)
    if n < 1:
        raise DomainError("n must be >= 1")
    ratio = bahadur_function(alpha1, delta1) / bahadur_function(alpha2, delta2)
    target = ratio * (n / generating_sequence(alpha1, n, k_rule(n), alpha_prefactor))

    def f(m):
        try:
            return m / generating_sequence(alpha2, m, k_rule(m), alpha_prefactor)
        except DomainError:
            return -math.inf

    return _smallest_integer_reaching(f, target, cap)


SEQUENCE_FORMS = ("constant_one", "power_of_n_plain", "power_of_n_over_ln", "power_of_k_over_ln")


@dataclass(frozen=True)
class SequenceForm:
    """Parametric generating sequence.

    * ``constant_one``: 1
    * ``power_of_n_plain``: d * n**b, 0 < b < 1
    * ``power_of_n_over_ln``: alpha * n**b / ln n, 0 < b < 1
    * ``power_of_k_over_ln``: alpha * k**b / ln k, b > 0
    """

    form: str
    b: float = 0.0
    d: float = 1.0
    alpha: float = 1.0

    def __post_init__(self):
        if self.form not in SEQUENCE_FORMS:
            raise DomainError(f"unknown sequence form {self.form!r}; choose from {SEQUENCE_FORMS}")
        check_order(self.alpha)
        if not self.d > 0:
            raise DomainError(f"scale d must be positive, got {self.d}")
        if self.form in ("power_of_n_plain", "power_of_n_over_ln") and not 0 < self.b < 1:
            raise DomainError(f"form {self.form} needs 0 < b < 1, got {self.b}")
        if self.form == "power_of_k_over_ln" and not self.b > 0:
            raise DomainError(f"form {self.form} needs b > 0, got {self.b}")

    def log_value(self, n, k=None):
        """ln c(n); ``n`` and ``k`` may be real."""
        if self.form == "constant_one":
            return 0.0
        if self.form == "power_of_n_plain":
            return math.log(self.d) + self.b * math.log(n)
        if self.form == "power_of_n_over_ln":
            ln_n = math.log(n)
            if ln_n <= 0:
                raise DomainError(f"ln n must be positive, got n={n}")
            return math.log(self.alpha) + self.b * ln_n - math.log(ln_n)
        if k is None:
            raise DomainError("form power_of_k_over_ln needs k")
        ln_k = math.log(k)
        if ln_k <= 0:
            raise DomainError(f"ln k must be positive, got k={k}")
        return math.log(self.alpha) + self.b * ln_k - math.log(ln_k)

    def value(self, n, k=None):
        return math.exp(self.log_value(n, k))


def _solve_log_size(seq, log_target, k_rule):
    """Real L = ln m with ln m - ln c(m) = log_target (bisection in L)."""
    if seq.form == "constant_one":
        return log_target
    if seq.form == "power_of_n_plain":
        return (log_target + math.log(seq.d)) / (1.0 - seq.b)

    def h(L):
        m = math.exp(L)
        k = k_rule(m) if k_rule is not None else None
        try:
            return L - seq.log_value(m, k) - log_target
        except DomainError:
            return -math.inf

    hi = max(1.0, log_target)
    while h(hi) < 0:
        hi *= 2.0
        if hi > 1e6:
            raise CapacityError("matching size beyond exp(1e6)", required=math.inf, budget=1e6)
    lo = 0.0
    for _ in range(300):
        if hi - lo <= 4 * np.finfo(float).eps * hi:
            break
        mid = 0.5 * (lo + hi)
        if h(mid) >= 0:
            hi = mid
        else:
            lo = mid
    return hi


def ratio_limit_probe(seq1, seq2, deltas, n_grid, k_rule=None, integer=False,
                      cap=MATCHING_CAP):
    """c_2(m_n) / c_1(n) along ``n_grid``.

    ``m_n`` solves ``m / c_2(m) = (g_1/g_2) * n / c_1(n)`` with the Bahadur
    functions taken at ``seq.alpha`` and ``deltas``.  By default ``m_n`` is
    the real-valued solution, so grids far beyond integer search range work.
    ``integer=True`` rounds up to the smallest integer instead.
    """
    n_grid = [float(n) for n in n_grid]
    if any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise DomainError("n_grid must be increasing")
    if not n_grid:
        return np.empty(0)
    d1, d2 = deltas
    log_ratio = math.log(bahadur_function(seq1.alpha, d1)) - math.log(
        bahadur_function(seq2.alpha, d2))
    out = []
    for n in n_grid:
        k1 = k_rule(n) if k_rule is not None else None
        log_c1 = seq1.log_value(n, k1)
        log_target = log_ratio + math.log(n) - log_c1
        if integer:
            def f(m):
                k = k_rule(m) if k_rule is not None else None
                try:
                    return math.log(m) - seq2.log_value(m, k)
                except DomainError:
                    return -math.inf
            m = float(_smallest_integer_reaching(f, log_target, cap))
        else:
            m = math.exp(_solve_log_size(seq2, log_target, k_rule))
        k2 = k_rule(m) if k_rule is not None else None
        out.append(math.exp(seq2.log_value(m, k2) - log_c1))
    return np.asarray(out)


@dataclass
class RateReport:
    n: int
    k: int
    alpha: float
    threshold: float
    values: dict = field(default_factory=dict)
    # True / False, or None where the condition does not apply at this alpha
    flags: dict = field(default_factory=dict)

    def flag_strings(self):
        return {name: ("n/a" if v is None else ("true" if v else "false"))
                for name, v in self.flags.items()}


def check_rate_conditions(n, k, alpha, threshold=1e-2):
    """Finite-n proxies for the sample-size / cell-count rate conditions.

    Ratios that should tend to infinity are flagged when they exceed
    ``1/threshold``; ratios that should vanish are flagged when they are at
    most ``threshold``.

    * ``n_over_k``: n/k, for consistency of every statistic;
    * ``n_over_k_ln_k``: n/(k ln k), alpha > 2 only;
    * ``k_ln_n_over_n``: k ln n / n;
    * ``n_over_k_ln_n``: n/(k ln n), alpha <= 1 only;
    * ``k_power_ln_n_over_n``: k^(2 - 1/alpha) ln n / n, alpha > 1 only.
      Since ``b(alpha) = (alpha-1)/alpha`` this is also k^(b+1) ln n / n;
    * ``cells_within_n``: k <= n.
    """
    n = int(n)
    k = int(k)
    alpha = check_order(alpha)
    if n < 1 or k < 1:
        raise DomainError(f"need n, k >= 1, got n={n}, k={k}")
    big = 1.0 / threshold
    ln_n = math.log(n)
    ln_k = math.log(k)
    above_one = alpha > 1.0 and not is_log_order(alpha)
    values = {
        "n_over_k": n / k,
        "n_over_k_ln_k": n / (k * ln_k) if ln_k > 0 else math.inf,
        "k_ln_n_over_n": k * ln_n / n,
        "n_over_k_ln_n": n / (k * ln_n) if ln_n > 0 else math.inf,
        "k_power_ln_n_over_n": k ** (2.0 - 1.0 / alpha) * ln_n / n,
    }
    flags = {
        "n_over_k": values["n_over_k"] >= big,
        "n_over_k_ln_k": values["n_over_k_ln_k"] >= big if alpha > 2.0 else None,
        "k_ln_n_over_n": values["k_ln_n_over_n"] <= threshold,
        "n_over_k_ln_n": values["n_over_k_ln_n"] >= big if not above_one else None,
        "k_power_ln_n_over_n": values["k_power_ln_n_over_n"] <= threshold if above_one else None,
        "cells_within_n": k <= n,
    }
    return RateReport(n=n, k=k, alpha=alpha, threshold=threshold, values=values, flags=flags)
