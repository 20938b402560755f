"""Power and Renyi divergences between finite distributions.

The power divergence of order ``alpha > 0`` is the Csiszar divergence

    D_alpha(P, Q) = sum_j q_j * phi_alpha(p_j / q_j)

generated by

    phi_alpha(t) = (t**alpha - alpha*(t - 1) - 1) / (alpha*(alpha - 1)),
    phi_1(t)     = t*log(t) - t + 1.

Order 1 gives the information divergence, order 2 half the Pearson
distance and order 1/2 the Hellinger-type divergence behind the
Freeman-Tukey statistic.  Renyi divergences are a monotone transform of
the power divergences.

Every cell of the hypothetical distribution ``q`` must be positive; cells
of ``p`` may be zero (``0 * log 0 = 0``).
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainError

__all__ = [
    "ALPHA_ONE_TOL",
    "as_prob_vector",
    "uniform",
    "is_log_order",
    "check_order",
    "power_function",
    "power_function_derivative",
    "power_divergence",
    "power_divergence_rows",
    "renyi_divergence",
    "renyi_from_power",
    "power_from_renyi",
    "bhattacharyya",
    "classic_statistic",
    "scaled_statistic",
    "increment_bounds",
]

# |alpha - 1| below this switches to the logarithmic limit formulas.
ALPHA_ONE_TOL = 1e-9


def as_prob_vector(x, name="p"):
    """Validate ``x`` as a probability vector and return it as float64."""
    p = np.asarray(x, dtype=np.float64)
    if p.ndim != 1 or p.size < 1:
        raise DomainError(f"{name} must be a non-empty 1-d vector")
    if not np.all(np.isfinite(p)):
        raise DomainError(f"{name} has non-finite entries")
    if np.any(p < 0):
        j = int(np.argmin(p))
        raise DomainError(f"{name}[{j}] = {p[j]!r} is negative")
    total = float(np.sum(p))
    if abs(total - 1.0) > 1e-12 * max(p.size, 1):
        raise DomainError(f"{name} sums to {total!r}, not 1")
    return p


def uniform(k):
    """Uniform distribution on ``k`` cells."""
    k = int(k)
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k}")
    return np.full(k, 1.0 / k)


def is_log_order(alpha):
    """True when ``alpha`` is treated as the logarithmic case alpha = 1."""
    return abs(alpha - 1.0) < ALPHA_ONE_TOL


def check_order(alpha):
    alpha = float(alpha)
    if not (alpha > 0 and math.isfinite(alpha)):
        raise DomainError(f"order alpha must be positive and finite, got {alpha!r}")
    return alpha


def _check_pair(p, q):
    p = as_prob_vector(p, "p")
    q = as_prob_vector(q, "q")
    if p.shape != q.shape:
        raise DomainError(f"dimension mismatch: len(p)={p.size}, len(q)={q.size}")
    _check_positive(q)
    return p, q


def _check_positive(q, name="q"):
    if np.any(q <= 0):
        j = int(np.flatnonzero(q <= 0)[0])
        raise DomainError(f"{name}[{j}] = 0; hypothetical cells must be positive")


def _relative_expm1(x, alpha):
    """``expm1((alpha - 1) * x) / (alpha - 1)``, equal to ``x`` at alpha = 1."""
    if is_log_order(alpha):
        return x
    a1 = alpha - 1.0
    return np.expm1(a1 * x) / a1


def power_function(t, alpha):
    """Evaluate phi_alpha(t) for t >= 0."""
    alpha = check_order(alpha)
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(t_arr < 0):
        raise DomainError("phi_alpha is defined for t >= 0 only")
    with np.errstate(divide="ignore", invalid="ignore"):
        logt = np.log(np.where(t_arr > 0, t_arr, 1.0))
        # t * (t^(a-1) - 1)/(a-1) - (t - 1), divided by alpha
        core = np.where(t_arr > 0, t_arr * _relative_expm1(logt, alpha), 0.0)
        out = (core - (t_arr - 1.0)) / alpha
    out = np.maximum(out, 0.0)
    return float(out) if np.ndim(out) == 0 else out


def power_function_derivative(t, alpha):
    """phi'_alpha(t) = (t^(alpha-1) - 1)/(alpha - 1), or log t at alpha = 1."""
    alpha = check_order(alpha)
    t = float(t)
    if t < 0:
        raise DomainError("phi'_alpha is defined for t >= 0 only")
    if t == 0:
        if is_log_order(alpha) or alpha < 1:
            return -math.inf
        return -1.0 / (alpha - 1.0)
    return float(_relative_expm1(math.log(t), alpha))


def power_divergence_rows(P, q, alpha):
    """Power divergences of each row of ``P`` from ``q`` (no validation).

    This is the single code path used for every divergence evaluation in
    the package, so exact enumeration and simulation see identical values
    for identical types.
    """
    P = np.atleast_2d(np.asarray(P, dtype=np.float64))
    with np.errstate(divide="ignore", invalid="ignore"):
        safe = np.where(P > 0, P, q)
        # within a factor of two p - q is exact, and log1p of it keeps full
        # relative accuracy in log(p/q) where each term is O((p - q)^2)
        near = (safe >= 0.5 * q) & (safe <= 2.0 * q)
        logt = np.where(near, np.log1p((safe - q) / q), np.log(safe / q))
        pe = np.where(P > 0, P * _relative_expm1(logt, alpha), 0.0)
    # q_j * phi(p_j/q_j) written so each term is O(alpha - 1)-stable
    terms = (pe - (P - q)) / alpha
    return np.maximum(np.sum(terms, axis=-1), 0.0)


def power_divergence(p, q, alpha):
    """Power divergence D_alpha(P, Q).

    Parameters
    ----------
    p, q : array_like
        Probability vectors of equal length; all ``q_j`` must be positive.
    alpha : float
        Order, ``alpha > 0``.  Orders within ``ALPHA_ONE_TOL`` of one use the
        information divergence ``sum p log(p/q)``.

    Returns
    -------
    float
        Nonnegative divergence value.
    """
    alpha = check_order(alpha)
    p, q = _check_pair(p, q)
    return float(power_divergence_rows(p, q, alpha)[0])


def renyi_divergence(p, q, alpha):
    """Renyi divergence D_alpha(P || Q) = log(sum p^a q^(1-a)) / (a - 1)."""
    alpha = check_order(alpha)
    p, q = _check_pair(p, q)
    mask = p > 0
    logt = np.log(p[mask] / q[mask])
    if is_log_order(alpha):
        return max(float(np.sum(p[mask] * logt)), 0.0)
    a1 = alpha - 1.0
    s_minus_one = float(np.sum(p[mask] * np.expm1(a1 * logt)))
    if s_minus_one <= -1.0:
        return math.inf
    return max(math.log1p(s_minus_one) / a1, 0.0)


def renyi_from_power(value, alpha):
    """Map a power divergence value to the Renyi divergence of the same order."""
    alpha = check_order(alpha)
    value = float(value)
    if is_log_order(alpha):
        return value
    arg = alpha * (alpha - 1.0) * value
    if arg <= -1.0:
        raise DomainError(
            f"1 + alpha(alpha-1)*D = {1.0 + arg!r} <= 0 for alpha={alpha}, D={value}"
        )
    return math.log1p(arg) / (alpha - 1.0)


def power_from_renyi(value, alpha):
    """Inverse of :func:`renyi_from_power`."""
    alpha = check_order(alpha)
    value = float(value)
    if is_log_order(alpha):
        return value
    a1 = alpha - 1.0
    return math.expm1(a1 * value) / (alpha * a1)


def bhattacharyya(p, q):
    """Bhattacharyya distance -log sum sqrt(p q)."""
    p, q = _check_pair(p, q)
    return -math.log(float(np.sum(np.sqrt(p * q))))


def _check_counts(counts, q):
    x = np.asarray(counts)
    if x.ndim != 1 or x.size == 0:
        raise DomainError("counts must be a non-empty 1-d vector")
    if np.any(x < 0) or np.any(x != np.floor(x)):
        raise DomainError("counts must be nonnegative integers")
    q = as_prob_vector(q, "q")
    if x.shape != q.shape:
        raise DomainError(f"dimension mismatch: len(counts)={x.size}, len(q)={q.size}")
    _check_positive(q)
    n = int(np.sum(x))
    if n < 1:
        raise DomainError("counts must contain at least one observation")
    return x.astype(np.float64), q, n


def classic_statistic(kind, counts, q):
    """Classical goodness-of-fit statistic from raw counts.

    ``kind`` is one of ``"pearson"`` (sum (X - nq)^2 / nq), ``"lrt"``
    (2 sum X log(X / nq)) or ``"freeman_tukey"`` (4 sum (sqrt X - sqrt nq)^2).
    """
    x, q, n = _check_counts(counts, q)
    e = n * q
    if kind == "pearson":
        return float(np.sum((x - e) ** 2 / e))
    if kind == "lrt":
        # adding sum(e - x) = 0 makes every cell's term nonnegative, so the
        # sum no longer cancels when the counts sit near their expectations
        m = x > 0
        near = m & (x >= 0.5 * e) & (x <= 2.0 * e)
        log_ratio = np.zeros_like(e)
        log_ratio[m] = np.log(x[m] / e[m])
        log_ratio[near] = np.log1p((x[near] - e[near]) / e[near])
        return float(2.0 * np.sum(x * log_ratio - (x - e)))
    if kind == "freeman_tukey":
        return float(4.0 * np.sum((np.sqrt(x) - np.sqrt(e)) ** 2))
    raise DomainError(f"unknown statistic kind {kind!r}")


def scaled_statistic(counts, q, alpha):
    """2n * D_alpha(empirical(counts), q)."""
    alpha = check_order(alpha)
    x, q, n = _check_counts(counts, q)
    return 2.0 * n * float(power_divergence_rows(x / n, q, alpha)[0])


def increment_bounds(x, y, alpha):
    """Quadratic sandwich for phi_alpha increments, valid for 1 <= alpha <= 2.

    Returns ``(lower, upper)`` with

        lower = (y - x) * phi'_alpha(x)
        upper = lower + x**(alpha - 2) * (y - x)**2 / alpha

    so that ``lower <= phi_alpha(y) - phi_alpha(x) <= upper``.  At ``x = 0``
    with ``alpha < 2`` the upper bound is ``+inf``.
    """
    alpha = float(alpha)
    if not (1.0 - ALPHA_ONE_TOL <= alpha <= 2.0):
        raise DomainError(f"increment bounds need 1 <= alpha <= 2, got {alpha}")
    x = float(x)
    y = float(y)
    if x < 0 or y < 0:
        raise DomainError("increment bounds need x, y >= 0")
    if x == y:
        return 0.0, 0.0
    d = y - x
    lower = d * power_function_derivative(x, alpha)
    if x == 0:
        upper = lower + d * d / alpha if alpha == 2.0 else math.inf
    else:
        upper = lower + x ** (alpha - 2.0) * d * d / alpha
    return lower, upper
