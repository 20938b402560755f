"""Concrete alternative families and regime diagnostics.

Two families come with closed-form identifiability limits against the
uniform hypothesis:

* half-support: uniform on the first floor(k/2) of k cells;
* truncated geometric: weights proportional to p**j on cells j = 0..k with
  p = 1 - x/k.  This family has k + 1 cells.

The diagnostics probe finitely many sample sizes.  They report evidence
and sufficient conditions, never asymptotic verdicts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .divergence import (
    ALPHA_ONE_TOL,
    as_prob_vector,
    check_order,
    is_log_order,
    power_divergence,
)
from .errors import DomainError

__all__ = [
    "half_support_alternative",
    "delta_half_support",
    "truncated_geometric",
    "delta_geometric",
    "AssumptionReport",
    "check_assumptions",
    "ContiguityReport",
    "contiguity_diagnostic",
]


def half_support_alternative(k):
    """Uniform distribution on the first floor(k/2) of k cells."""
    k = int(k)
    if k < 2:
        raise DomainError(f"half-support alternative needs k >= 2, got {k}")
    h = k // 2
    p = np.zeros(k)
    p[:h] = 1.0 / h
    return p


def delta_half_support(alpha):
    """Limit of D_alpha(half-support, uniform) as k grows: (2^(a-1) - 1)/(a(a-1)), or ln 2."""
    alpha = check_order(alpha)
    if is_log_order(alpha):
        return math.log(2.0)
    a1 = alpha - 1.0
    return math.expm1(a1 * math.log(2.0)) / (alpha * a1)


def truncated_geometric(k, x):
    """Truncated geometric distribution on cells 0..k with ratio p = 1 - x/k.

    Returns a vector of length ``k + 1``.
    """
    k = int(k)
    x = float(x)
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k}")
    if not (0.0 < x < k):
        raise DomainError(f"need 0 < x < k, got x={x}, k={k}")
    logp = math.log1p(-x / k)
    j = np.arange(k + 1, dtype=np.float64)
    # c_k(p) = (1 - p) / (1 - p^(k+1))
    log_c = math.log(x / k) - math.log(-math.expm1((k + 1) * logp))
    return np.exp(log_c + j * logp)


def delta_geometric(alpha, x, zero_branch="stated"):
    """Limit of D_alpha(truncated geometric, uniform) for p = 1 - x/k, k -> inf.

    For ``alpha`` not in {0, 1}::

        [x^(a-1) (e^(xa) - 1) - a (e^x - 1)^a] / [a^2 (a-1) (e^x - 1)^a]

    ``alpha = 1`` uses ln(x / (e (e^x - 1))) + x e^x / (e^x - 1).

    ``alpha = 0`` has two branches.  ``zero_branch="stated"`` returns the
    published value (ln(e^x - 1) - ln x) / 2.  ``zero_branch="limit"``
    returns the actual alpha -> 0 limit of the general formula,
    ln(e^x - 1) - ln x - x/2 (the reverse information divergence of the
    limiting density).  The two differ; see the README.
    """
    alpha = float(alpha)
    x = float(x)
    if not (x > 0 and math.isfinite(x)):
        raise DomainError(f"x must be positive, got {x}")
    if alpha < 0:
        raise DomainError(f"alpha must be >= 0, got {alpha}")
    em1 = math.expm1(x)
    if is_log_order(alpha):
        return math.log(x / (math.e * em1)) + x * math.exp(x) / em1
    if abs(alpha) < ALPHA_ONE_TOL:
        if zero_branch == "stated":
            return (math.log(em1) - math.log(x)) / 2.0
        if zero_branch == "limit":
            return math.log(em1) - math.log(x) - x / 2.0
        raise DomainError(f"unknown zero_branch {zero_branch!r}")
    num = x ** (alpha - 1.0) * math.expm1(x * alpha) - alpha * em1**alpha
    return num / (alpha * alpha * (alpha - 1.0) * em1**alpha)


def _verdict_converged(seq, window, tol):
    tail = np.asarray(seq[-window:], dtype=np.float64)
    if tail.size < window or not np.all(np.isfinite(tail)):
        return False
    return float(np.ptp(tail)) < tol


@dataclass
class AssumptionReport:
    n_grid: list
    k_values: list
    a1_ok: bool
    rho_values: list
    a2_rho: float
    q_max: list
    a2_ok: bool
    d_sequence: list
    a3_delta: float
    a3_last_deviations: list
    a3_converged: bool
    a3_ok: bool
    log_bound: list
    notes: list = field(default_factory=list)


def check_assumptions(q_schedule, p_schedule, alpha, n_grid, window=5, tol=1e-3,
                      rho_floor=0.05, decay_tol=0.05):
    """Probe the cell-growth, regularity and identifiability assumptions.

    ``q_schedule`` and ``p_schedule`` map a sample size ``n`` to a
    probability vector.  The checks are finite-grid verdicts:

    * cells: k_n <= n everywhere and k_n nondecreasing and not constant;
    * regularity: rho_n = k_n * min_j q_nj stays above ``rho_floor`` and shows
      no power-law decay (least-squares slope of log rho_n on log n above
      ``-decay_tol``), and max_j q_nj decreases;
    * identifiability: D_alpha(P_n, Q_n) over the last ``window`` grid points
      has range below ``tol`` and a positive limit.
    """
    alpha = check_order(alpha)
    n_grid = [int(n) for n in n_grid]
    notes = []
    ks, rhos, qmax, ds, logb = [], [], [], [], []
    for n in n_grid:
        q = as_prob_vector(q_schedule(n), "q")
        p = as_prob_vector(p_schedule(n), "p")
        k = q.size
        ks.append(k)
        rho = k * float(np.min(q))
        rhos.append(rho)
        qmax.append(float(np.max(q)))
        ds.append(power_divergence(p, q, alpha) if rho > 0 else math.inf)
        # -ln q_nj < ln(k / rho) under the regularity assumption
        logb.append(math.log(k / rho) if rho > 0 else math.inf)

    a1_ok = all(k <= n for k, n in zip(ks, n_grid)) and all(
        b >= a for a, b in zip(ks, ks[1:])) and (len(ks) < 2 or ks[-1] > ks[0])
    if not a1_ok:
        notes.append("cells: k_n must satisfy k_n <= n and increase along the grid")

    a2_rho = min(rhos)
    collapsing = False
    if len(rhos) > 1 and min(rhos) > 0:
        slope = np.polyfit(np.log(n_grid), np.log(rhos), 1)[0]
        collapsing = bool(slope < -decay_tol)
    qmax_falls = len(qmax) < 2 or qmax[-1] < qmax[0]
    a2_ok = a2_rho >= rho_floor and not collapsing and qmax_falls
    if collapsing:
        notes.append("regularity: k*min(q) trends to 0 along the grid")
    if not qmax_falls:
        notes.append("regularity: max(q) does not decrease")

    converged = _verdict_converged(ds, window, tol)
    a3_delta = float(ds[-1])
    dev = [float(d - a3_delta) for d in ds[-window:]]
    a3_ok = converged and a3_delta > tol
    if converged and a3_delta <= tol:
        notes.append("hypothesis regime: identifiability violated (limit is 0)")
    elif not converged:
        notes.append(f"identifiability: last {window} divergences vary by >= {tol}")
    return AssumptionReport(
        n_grid=n_grid, k_values=ks, a1_ok=a1_ok, rho_values=rhos, a2_rho=a2_rho,
        q_max=qmax, a2_ok=a2_ok, d_sequence=ds, a3_delta=a3_delta,
        a3_last_deviations=dev, a3_converged=converged, a3_ok=a3_ok, log_bound=logb,
        notes=notes,
    )


@dataclass
class ContiguityReport:
    n_grid: list
    d1_sequence: list
    bounded_flag: bool
    # per n: (Q_n(A_n), P_n(A_n), |A_n|) for the reverse-direction witness
    witness_sets: list
    notes: list = field(default_factory=list)


def _reverse_witness(p, q, q_mass):
    """Cells of smallest p/q ratio until Q-mass >= q_mass, ties at the cut included."""
    ratio = p / q
    order = np.argsort(ratio, kind="stable")
    cum = np.cumsum(q[order])
    cut = int(np.searchsorted(cum, q_mass - 1e-15))
    cut = min(cut, q.size - 1)
    members = ratio <= ratio[order[cut]]
    return float(np.sum(q[members])), float(np.sum(p[members])), int(np.count_nonzero(members))


def contiguity_diagnostic(q_schedule, p_schedule, n_grid, q_mass=0.25, growth_tol=1e-3,
                          bound=None):
    """Finite-grid evidence about contiguity in both directions.

    Forward (P_n relative to Q_n): bounded information divergence is a
    sufficient condition.  The sequence counts as bounded when it is finite
    and does not grow by more than ``growth_tol`` over the second half of the
    grid, or when it stays below an explicit ``bound``.

    Reverse (Q_n relative to P_n): for each n, the set A_n of cells with the
    smallest likelihood ratio p/q covering Q-mass ``q_mass`` is reported with
    (Q_n(A_n), P_n(A_n)).  Small P_n(A_n) at fixed Q-mass exposes a failure
    of reverse contiguity.
    """
    n_grid = [int(n) for n in n_grid]
    d1, witnesses = [], []
    for n in n_grid:
        q = as_prob_vector(q_schedule(n), "q")
        p = as_prob_vector(p_schedule(n), "p")
        d1.append(power_divergence(p, q, 1.0))
        witnesses.append(_reverse_witness(p, q, q_mass))
    finite = all(math.isfinite(d) for d in d1)
    if bound is not None:
        bounded = finite and max(d1) <= bound
    else:
        half = len(d1) // 2
        bounded = finite and (d1[-1] - d1[half] <= growth_tol)
    notes = []
    if bounded:
        notes.append("forward: bounded D1 certifies P_n contiguous to Q_n on this grid")
    else:
        notes.append("forward: D1 grows along the grid; no certificate")
    if any(w[1] < 1e-12 for w in witnesses):
        notes.append(f"reverse: sets of Q-mass >= {q_mass} carry zero P-mass")
    return ContiguityReport(n_grid=n_grid, d1_sequence=d1, bounded_flag=bounded,
                            witness_sets=witnesses, notes=notes)
