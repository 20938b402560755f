"""Information projection onto a Renyi-divergence superlevel set.

Solves

    minimize    D_1(P, Q)
    subject to  D_alpha(P || Q) >= delta,   P a probability vector,

for a strictly positive ``Q``.  The objective is minimized at ``P = Q``,
which is infeasible for ``delta > 0``, so the constraint is active at the
optimum.  Because ``D_alpha <= D_1`` for ``alpha <= 1``, every feasible
point has ``D_1 >= delta`` in that range.

Three routes are provided:

* :func:`mixture_construction` mixes Q conditioned on two nested prefixes
  of the cells sorted by descending probability, which upper-bounds the
  optimum by ``delta + epsilon``;
* :func:`numeric_projection` solves the program.  At ``alpha = 1`` it
  tilts Q toward its least likely cell.  For small k it searches over all
  two-group mixtures ``a*q`` on G1 and ``b*q`` on G2, the only shape a
  stationary point can take: on the support the stationarity condition reads
  ``log t - c*t**(alpha-1) = const`` for ``t = p/q``, and that function of
  ``t`` is unimodal.  For larger k it combines two-group points built from a
  grid over the group masses with a penalized quasi-Newton method over
  logits from deterministic restarts, refines the best of them by moving
  single cells between groups, and keeps the best feasible point.
  That route is a local method and carries no global certificate.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize
from scipy.special import logsumexp

from .divergence import (
    as_prob_vector,
    check_order,
    is_log_order,
    power_divergence,
    renyi_divergence,
    _check_positive,
)
from .errors import DomainError, InfeasibleError

__all__ = [
    "ProjectionResult",
    "mixture_construction",
    "numeric_projection",
    "lagrangian_residual",
]

TWO_LEVEL_MAX_K = 10


@dataclass(frozen=True)
class ProjectionResult:
    minimizer: np.ndarray
    kl_value: float
    constraint_value: float
    method: str
    converged: bool
    iterations: int
    alpha: float
    delta: float
    solver: str = ""
    # mixture route only: (1-s)(-ln Q(A+)) + s(-ln Q(A-)), and -ln Q(A-) - delta
    upper_bound: float = math.nan
    epsilon: float = math.nan
    mixing_weight: float = math.nan
    details: dict = field(default_factory=dict, compare=False)


def _setup(q, alpha, delta):
    alpha = check_order(alpha)
    q = as_prob_vector(q, "q")
    _check_positive(q)
    delta = float(delta)
    if not math.isfinite(delta) or delta < 0:
        raise DomainError(f"delta must be finite and >= 0, got {delta}")
    return q, alpha, delta


def _trivial(q, alpha, delta, method):
    return ProjectionResult(minimizer=q.copy(), kl_value=0.0, constraint_value=0.0,
                            method=method, converged=True, iterations=0, alpha=alpha,
                            delta=delta, solver="identity")


def mixture_construction(q, alpha, delta):
    """Feasible point from nested sorted prefixes A- within A+.

    Cells are sorted by descending ``q`` (stable in the original index).
    A+ is the shortest prefix with ``-ln Q(A+) <= delta`` and A- drops its
    last cell, so ``-ln Q(A-) > delta``.  The mixing weight ``s`` of
    ``(1-s) Q(.|A+) + s Q(.|A-)`` is bisected until the Renyi divergence
    reaches ``delta`` from above.
    """
    q, alpha, delta = _setup(q, alpha, delta)
    if alpha > 1.0 and not is_log_order(alpha):
        raise DomainError("the mixture construction covers 0 < alpha <= 1")
    if delta == 0:
        return _trivial(q, alpha, delta, "mixture_construction")
    order = np.argsort(-q, kind="stable")
    mass = np.cumsum(q[order])
    neglog = -np.log(np.minimum(mass, 1.0))
    top = float(neglog[0])
    if delta > top:
        raise InfeasibleError(
            f"delta={delta} exceeds the largest value -ln max(q) = {top} reachable by prefixes"
        )
    # neglog is nonincreasing; first index with neglog <= delta
    m_plus = int(np.argmax(neglog <= delta)) + 1
    plus = np.zeros(q.size)
    plus[order[:m_plus]] = q[order[:m_plus]] / mass[m_plus - 1]
    d_plus = float(neglog[m_plus - 1])
    if m_plus == 1:
        minus, d_minus = plus, d_plus
    else:
        minus = np.zeros(q.size)
        minus[order[:m_plus - 1]] = q[order[:m_plus - 1]] / mass[m_plus - 2]
        d_minus = float(neglog[m_plus - 2])

    def excess(s):
        return renyi_divergence((1.0 - s) * plus + s * minus, q, alpha) - delta

    lo, hi = 0.0, 1.0
    iterations = 0
    if excess(0.0) >= 0.0:
        hi = 0.0
    else:
        while hi - lo > 1e-16 and iterations < 200:
            mid = 0.5 * (lo + hi)
            iterations += 1
            if excess(mid) >= 0.0:
                hi = mid
            else:
                lo = mid
            if abs(excess(hi)) < 1e-13:
                break
    s = hi
    p = (1.0 - s) * plus + s * minus
    r = renyi_divergence(p, q, alpha)
    return ProjectionResult(
        minimizer=p, kl_value=power_divergence(p, q, 1.0), constraint_value=r,
        method="mixture_construction", converged=abs(r - delta) < 1e-10 or s == 0.0,
        iterations=iterations, alpha=alpha, delta=delta, solver="nested_prefix_mixture",
        upper_bound=(1.0 - s) * d_plus + s * d_minus, epsilon=d_minus - delta,
        mixing_weight=s,
        details={"a_plus": order[:m_plus].tolist(), "a_minus": order[:m_plus - 1].tolist()},
    )


def _binary_kl(w, a, b):
    """w log(w/a) + (1-w) log((1-w)/b) with 0 log 0 = 0."""
    w = np.asarray(w, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = np.where(w > 0, w * np.log(w / a), 0.0)
        t2 = np.where(w < 1, (1.0 - w) * np.log((1.0 - w) / b), 0.0)
    return t1 + t2


def _two_point_renyi(w, a, b, alpha):
    """Renyi divergence of a*q on G1 / b*q on G2 with masses (w, 1-w) over (a, b)."""
    w = np.asarray(w, dtype=np.float64)
    if is_log_order(alpha):
        return _binary_kl(w, a, b)
    with np.errstate(divide="ignore", invalid="ignore"):
        s1 = np.where(w > 0, w**alpha * a ** (1.0 - alpha), 0.0)
        s2 = np.where(w < 1, (1.0 - w) ** alpha * np.where(b > 0, b, 1.0) ** (1.0 - alpha), 0.0)
        return np.log(s1 + s2) / (alpha - 1.0)


def _tilt_solution(q, delta):
    """Order-1 projection: move mass onto the least likely cell until D_1 = delta."""
    j = int(np.argmin(q))
    qj = float(q[j])

    def kl(w):
        return float(_binary_kl(w, qj, 1.0 - qj)) - delta

    if qj >= 1.0:
        raise InfeasibleError("a single-cell Q admits no positive divergence")
    lo, hi = qj, 1.0
    iterations = 0
    if kl(hi) < 0:
        raise InfeasibleError(f"delta={delta} exceeds -ln min(q) = {-math.log(qj)}")
    while hi - lo > 1e-16 and iterations < 200:
        mid = 0.5 * (lo + hi)
        iterations += 1
        if kl(mid) >= 0:
            hi = mid
        else:
            lo = mid
    w = hi
    p = q * (1.0 - w) / (1.0 - qj)
    p[j] = w
    return p, iterations


def _assignments(k):
    """All maps of k cells to {0: outside, 1: G1, 2: G2} as an int8 array."""
    return np.array(list(itertools.product((0, 1, 2), repeat=k)), dtype=np.int8)


def _pair_search(m1, m2, alpha, delta):
    """Best mass w on G1 for each two-group subproblem with masses (m1, m2).

    Along w in [w0, 1] (w0 = m1/(m1+m2)) both D_1 and the Renyi divergence
    increase, so the best point on that side is the first w with
    Renyi >= delta.  Ordered pairs cover the other side by symmetry.
    Returns ``(value, lo, hi)`` where ``hi`` is feasible and ``value`` is
    ``inf`` for pairs that cannot reach ``delta``.
    """
    w0 = m1 / (m1 + m2)
    feasible = -np.log(m1) >= delta
    lo = w0.copy()
    hi = np.ones_like(w0)
    done = -np.log(m1 + m2) >= delta
    hi[done] = w0[done]
    active = feasible & ~done
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        r_mid = _two_point_renyi(mid, m1, m2, alpha)
        up = active & (r_mid >= delta)
        down = active & ~(r_mid >= delta)
        hi[up] = mid[up]
        lo[down] = mid[down]
    lo[done] = hi[done]
    value = np.where(feasible, _binary_kl(hi, m1, m2), np.inf)
    return value, lo, hi


def _pair_point(q, g1, g2, alpha, delta, w_lo, w_hi):
    """Distribution w*Q(.|G1) + (1-w)*Q(.|G2) with w refined to the constraint."""
    a = float(q[g1].sum())
    b = float(q[g2].sum())
    if w_hi > w_lo:
        f = lambda w: float(_two_point_renyi(w, a, b, alpha)) - delta  # noqa: E731
        if f(w_lo) < 0 <= f(w_hi):
            w = brentq(f, w_lo, w_hi, xtol=1e-16, rtol=4 * np.finfo(float).eps)
            w_hi = w if f(w) >= 0 else w_hi
    p = np.zeros(q.size)
    p[g1] = w_hi * q[g1] / a
    if b > 0:
        p[g2] = (1.0 - w_hi) * q[g2] / b
    return p


def _two_level_search(q, alpha, delta):
    """Exhaustive search over every split of the cells into G1, G2 and the rest."""
    assign = _assignments(q.size)
    m1 = (assign == 1) @ q
    m2 = (assign == 2) @ q
    keep = m1 > 0
    assign, m1, m2 = assign[keep], m1[keep], m2[keep]
    # masses identify the subproblem; dedupe at 1e-15 resolution
    key = np.round(np.column_stack([m1, m2]) * 1e15)
    _, first = np.unique(key, axis=0, return_index=True)
    first = np.sort(first)
    assign, m1, m2 = assign[first], m1[first], m2[first]
    value, lo, hi = _pair_search(m1, m2, alpha, delta)
    if not np.any(np.isfinite(value)):
        raise InfeasibleError(f"delta={delta} exceeds -ln min(q) = {-math.log(q.min())}")
    best = int(np.argmin(value))
    p = _pair_point(q, assign[best] == 1, assign[best] == 2, alpha, delta,
                    float(lo[best]), float(hi[best]))
    return p, len(m1)


def _greedy_subset(q, order, available, target):
    """Cells (descending q, first fit) whose mass approaches ``target`` from below."""
    chosen = np.zeros(q.size, dtype=bool)
    total = 0.0
    for j in order:
        if available[j] and total + q[j] <= target * (1 + 1e-12):
            chosen[j] = True
            total += q[j]
    return chosen


def _mass_grid_candidates(q, alpha, delta, grid=64, top=6):
    """Two-group points for the best (Q1, Q2) masses of a continuous grid.

    The grid relaxes the subset structure; each promising mass pair is then
    realized by greedy subset sums and evaluated exactly.
    """
    q1 = np.geomspace(q.min(), 1.0, grid)
    frac = np.linspace(0.0, 1.0, grid + 1)
    m1 = np.repeat(q1, frac.size)
    m2 = np.tile(frac, q1.size) * (1.0 - m1)
    value, _, _ = _pair_search(m1, m2, alpha, delta)
    ranked = np.argsort(value, kind="stable")
    order = np.argsort(-q, kind="stable")
    out = []
    for idx in ranked[:top]:
        if not np.isfinite(value[idx]):
            break
        g1 = _greedy_subset(q, order, np.ones(q.size, dtype=bool), m1[idx])
        g2 = _greedy_subset(q, order, ~g1, m2[idx]) if m2[idx] > 0 else np.zeros(q.size, bool)
        a, b = np.array([q[g1].sum()]), np.array([q[g2].sum()])
        if a[0] <= 0:
            continue
        v, lo, hi = _pair_search(a, b, alpha, delta)
        if np.isfinite(v[0]):
            out.append(_pair_point(q, g1, g2, alpha, delta, float(lo[0]), float(hi[0])))
    return out


def _grouping(q, p, tol=1e-9):
    """Read a two-group assignment off ``p``: 0 outside, 1 high ratio, 2 low ratio."""
    assign = np.zeros(q.size, dtype=np.int8)
    on = p > tol * q
    if not np.any(on):
        return None
    u = np.log(p[on] / q[on])
    order = np.sort(u)
    gaps = np.diff(order)
    cut = order[int(np.argmax(gaps))] if gaps.size and gaps.max() > 1e-6 else -np.inf
    assign[on] = np.where(u > cut, 1, 2)
    return assign


def _swap_search(q, alpha, delta, assign, max_rounds=200):
    """Improve a two-group assignment by moving one cell at a time.

    Every neighbour (one cell changed to another of outside, G1, G2) is
    scored exactly; the best improving move is taken until none remains.
    """
    def score(rows):
        m1 = (rows == 1) @ q
        m2 = (rows == 2) @ q
        ok = m1 > 0
        value = np.full(rows.shape[0], np.inf)
        lo = np.zeros(rows.shape[0])
        hi = np.ones(rows.shape[0])
        if np.any(ok):
            value[ok], lo[ok], hi[ok] = _pair_search(m1[ok], m2[ok], alpha, delta)
        return value, lo, hi

    current = assign.copy()
    v, lo, hi = score(current[None, :])
    best_v, best_lo, best_hi = float(v[0]), float(lo[0]), float(hi[0])
    for _ in range(max_rounds):
        rows = np.repeat(current[None, :], 2 * q.size, axis=0)
        idx = np.arange(q.size)
        rows[idx, idx] = (current + 1) % 3
        rows[q.size + idx, idx] = (current + 2) % 3
        v, lo, hi = score(rows)
        j = int(np.argmin(v))
        if not v[j] < best_v - 1e-15:
            break
        current = rows[j]
        best_v, best_lo, best_hi = float(v[j]), float(lo[j]), float(hi[j])
    if not math.isfinite(best_v):
        return None
    return _pair_point(q, current == 1, current == 2, alpha, delta, best_lo, best_hi)


def _logit_functions(q, alpha):
    logq = np.log(q)

    def parts(theta):
        z = theta + logq
        a = logsumexp(z)
        u = theta - a
        p = np.exp(z - a)
        kl = float(np.dot(p, u))
        g_kl = p * (u - kl)
        ln_s = logsumexp(alpha * u + logq)
        r = ln_s / (alpha - 1.0)
        # p * (t^(alpha-1)/S - 1) written without the overflowing ratio
        g_r = (alpha / (alpha - 1.0)) * (np.exp(alpha * u + logq - ln_s) - p)
        return p, kl, g_kl, r, g_r

    return parts


def _geometric_polish(q, alpha, delta, p):
    """Slide along P_eta ~ q (p/q)^eta to the smallest eta with Renyi >= delta.

    Both divergences increase in eta along this exponential family, so the
    result is feasible and no worse than ``p`` whenever ``p`` is feasible.
    """
    with np.errstate(divide="ignore"):
        u = np.log(p / q)
    u = np.maximum(u, -745.0)
    logq = np.log(q)

    def at(eta):
        z = eta * u + logq
        pe = np.exp(z - logsumexp(z))
        return pe, renyi_divergence(pe / pe.sum(), q, alpha)

    hi = 1.0
    pe, r = at(hi)
    grow = 0
    while r < delta and grow < 60:
        hi *= 2.0
        pe, r = at(hi)
        grow += 1
    if r < delta:
        return None
    lo = 0.0
    for _ in range(200):
        if hi - lo <= 1e-15 * hi:
            break
        mid = 0.5 * (lo + hi)
        if at(mid)[1] >= delta:
            hi = mid
        else:
            lo = mid
    pe, r = at(hi)
    return pe / pe.sum()


def _penalty_solve(q, alpha, delta, theta0, max_iter):
    parts = _logit_functions(q, alpha)
    theta = np.asarray(theta0, dtype=np.float64)
    iterations = 0
    for rho in (1e1, 1e2, 1e3, 1e4, 1e5, 1e6, 1e7, 1e8):
        def fun(th, rho=rho):
            _, kl, g_kl, r, g_r = parts(th)
            gap = max(0.0, delta - r)
            return kl + 0.5 * rho * gap * gap, g_kl - rho * gap * g_r

        res = minimize(fun, theta, jac=True, method="L-BFGS-B",
                       options={"maxiter": max_iter, "gtol": 1e-12, "ftol": 1e-15})
        theta = res.x
        iterations += int(res.nit)
    p = parts(theta)[0]
    return p, iterations


def _starts(q, alpha, delta, use_mixture_start, seed):
    k = q.size
    starts = []
    j = int(np.argmin(q))
    th = np.zeros(k)
    th[j] = 1.0 + delta * k
    starts.append(("min_cell_tilt", th))
    rank = np.empty(k)
    rank[np.argsort(-q, kind="stable")] = np.arange(k)
    starts.append(("rank_tilt", -4.0 * rank / k))
    starts.append(("rank_tilt_steep", -16.0 * rank / k))
    rng = np.random.default_rng(seed)
    for i in range(2):
        starts.append((f"random_{i}", 2.0 * rng.standard_normal(k)))
    if use_mixture_start and alpha <= 1.0:
        try:
            mix = mixture_construction(q, alpha, delta).minimizer
        except InfeasibleError:
            pass
        else:
            with np.errstate(divide="ignore"):
                starts.append(("mixture", np.maximum(np.log(mix / q), -60.0)))
    return starts


def numeric_projection(q, alpha, delta, use_mixture_start=True, max_iter=500, seed=0,
                       two_level_max_k=TWO_LEVEL_MAX_K):
    """Minimize D_1(P, Q) subject to D_alpha(P || Q) >= delta.

    Returns the best feasible point found.  For ``k <= two_level_max_k``
    (and at ``alpha = 1``) the result is the global minimum.  ``converged``
    is False when no route produced a point meeting the constraint.  For
    ``alpha <= 1`` the result is also checked against the bound
    ``D_1 >= delta``, which every feasible point satisfies.
    """
    q, alpha, delta = _setup(q, alpha, delta)
    method = "numeric_optimizer"
    if delta == 0:
        return _trivial(q, alpha, delta, method)
    reachable = -math.log(float(q.min()))
    if delta > reachable * (1 + 1e-12):
        raise InfeasibleError(f"delta={delta} exceeds max Renyi divergence -ln min(q) = {reachable}")

    if is_log_order(alpha):
        p, iterations = _tilt_solution(q, delta)
        solver, converged = "exponential_tilt", True
    elif q.size <= two_level_max_k:
        p, iterations = _two_level_search(q, alpha, delta)
        solver, converged = "two_level_search", True
    else:
        candidates = [("mass_grid", c) for c in _mass_grid_candidates(q, alpha, delta)]
        starts = _starts(q, alpha, delta, use_mixture_start, seed)
        with np.errstate(divide="ignore"):
            starts += [("mass_grid", np.maximum(np.log(c / q), -60.0)) for _, c in candidates]
        iterations = 0
        for name, theta0 in starts:
            raw = np.exp(theta0 + np.log(q) - logsumexp(theta0 + np.log(q)))
            polished = _geometric_polish(q, alpha, delta, raw)
            if polished is not None:
                candidates.append((name, polished))
            cand, its = _penalty_solve(q, alpha, delta, theta0, max_iter)
            iterations += its
            polished = _geometric_polish(q, alpha, delta, cand)
            if polished is not None:
                candidates.append((f"penalty_lbfgs:{name}", polished))
        if not candidates:
            return ProjectionResult(minimizer=q.copy(), kl_value=0.0, constraint_value=0.0,
                                    method=method, converged=False, iterations=iterations,
                                    alpha=alpha, delta=delta, solver="penalty_lbfgs")
        values = [power_divergence(c / c.sum(), q, 1.0) for _, c in candidates]
        for idx in np.argsort(values, kind="stable")[:3]:
            name, c = candidates[idx]
            assign = _grouping(q, c / c.sum())
            refined = None if assign is None else _swap_search(q, alpha, delta, assign)
            if refined is not None:
                candidates.append((f"swap:{name}", refined))
                values.append(power_divergence(refined, q, 1.0))
        best = int(np.argmin(values))
        solver, p = candidates[best]
        converged = True

    p = p / p.sum()
    kl = power_divergence(p, q, 1.0)
    r = renyi_divergence(p, q, alpha)
    feasible = r >= delta - 1e-10
    if alpha <= 1.0 and kl < delta - 1e-6:
        warnings.warn(f"projection returned D_1={kl} below delta={delta}; marking unconverged",
                      RuntimeWarning, stacklevel=2)
        converged = False
    return ProjectionResult(minimizer=p, kl_value=kl, constraint_value=r, method=method,
                            converged=bool(converged and feasible), iterations=iterations,
                            alpha=alpha, delta=delta, solver=solver)


def lagrangian_residual(q, alpha, p, support_tol=1e-12):
    """Stationarity residual of D_1 - mu*D_alpha(.||Q) - nu*sum(p) on the support of p.

    Returns ``(norm, mu, nu)`` with multipliers fitted by least squares.
    """
    alpha = check_order(alpha)
    q = np.asarray(q, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    m = p > support_tol
    t = p[m] / q[m]
    g_kl = np.log(t) + 1.0
    if is_log_order(alpha):
        g_r = np.log(t) + 1.0
    else:
        s = float(np.sum(p[m] ** alpha * q[m] ** (1.0 - alpha)))
        g_r = alpha * t ** (alpha - 1.0) / ((alpha - 1.0) * s)
    design = np.column_stack([g_r, np.ones_like(g_r)])
    coef, *_ = np.linalg.lstsq(design, g_kl, rcond=None)
    resid = g_kl - design @ coef
    return float(np.linalg.norm(resid)), float(coef[0]), float(coef[1])
