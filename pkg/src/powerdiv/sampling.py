"""Multinomial sampling and batch simulation of divergence statistics.

Reproducibility: replicate ``i`` is drawn from a substream keyed by
``(seed.value, seed.stream, i // BLOCK)`` at position ``i % BLOCK``.  The
output of :func:`simulate_statistics` is therefore a pure function of the
seed and does not depend on how many workers evaluate the blocks.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .divergence import as_prob_vector, check_order, power_divergence_rows, _check_positive
from .errors import DomainError

__all__ = ["BLOCK", "Seed", "as_seed", "sample_counts", "empirical", "simulate_counts",
           "simulate_statistics"]

BLOCK = 1024

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class Seed:
    value: int
    stream: int = 0

    def __post_init__(self):
        for name in ("value", "stream"):
            v = getattr(self, name)
            if not (0 <= int(v) <= _MASK64):
                raise DomainError(f"seed {name} must be an unsigned 64-bit integer")


def as_seed(seed):
    if isinstance(seed, Seed):
        return seed
    if isinstance(seed, tuple):
        return Seed(*seed)
    return Seed(int(seed))


def _block_generator(seed, block):
    ss = np.random.SeedSequence(entropy=[seed.value, seed.stream], spawn_key=(block,))
    return np.random.Generator(np.random.PCG64(ss))


def _check_n(n):
    n = int(n)
    if n < 1:
        raise DomainError(f"sample size n must be >= 1, got {n}")
    return n


def sample_counts(p, n, seed, index=0):
    """One draw from Mult_k(n, p): replicate ``index`` of the seeded stream."""
    p = as_prob_vector(p, "p")
    n = _check_n(n)
    seed = as_seed(seed)
    block, offset = divmod(int(index), BLOCK)
    rng = _block_generator(seed, block)
    draws = rng.multinomial(n, p, size=offset + 1)
    return draws[offset]


def empirical(counts):
    """Empirical distribution counts / n."""
    x = np.asarray(counts)
    if x.ndim != 1 or x.size == 0 or np.any(x < 0):
        raise DomainError("counts must be a non-empty vector of nonnegative integers")
    n = int(np.sum(x))
    if n < 1:
        raise DomainError("empirical distribution needs n >= 1")
    return x.astype(np.float64) / n


def _blocks(reps):
    full, rest = divmod(reps, BLOCK)
    sizes = [BLOCK] * full + ([rest] if rest else [])
    return list(enumerate(sizes))


def simulate_counts(p, n, reps, seed, workers=1):
    """``reps`` seeded multinomial draws as an integer array of shape (reps, k)."""
    p = as_prob_vector(p, "p")
    n = _check_n(n)
    reps = int(reps)
    if reps < 1:
        raise DomainError("reps must be >= 1")
    seed = as_seed(seed)

    def draw(item):
        block, size = item
        return _block_generator(seed, block).multinomial(n, p, size=size)

    blocks = _blocks(reps)
    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(draw, blocks))
    else:
        parts = [draw(b) for b in blocks]
    return np.concatenate(parts, axis=0)


def simulate_statistics(p_true, q_null, alpha, n, reps, seed, workers=1):
    """Realizations of D_alpha(empirical type, q_null) with types drawn from p_true.

    Returns a float64 array of length ``reps``; entry ``i`` depends only on
    ``seed`` and ``i``.
    """
    alpha = check_order(alpha)
    p_true = as_prob_vector(p_true, "p_true")
    q_null = as_prob_vector(q_null, "q_null")
    if p_true.shape != q_null.shape:
        raise DomainError("p_true and q_null differ in dimension")
    _check_positive(q_null, "q_null")
    n = _check_n(n)
    seed = as_seed(seed)
    reps = int(reps)
    if reps < 1:
        raise DomainError("reps must be >= 1")
    out = np.empty(reps, dtype=np.float64)
    blocks = _blocks(reps)

    def run(item):
        block, size = item
        x = _block_generator(seed, block).multinomial(n, p_true, size=size)
        start = block * BLOCK
        out[start:start + size] = power_divergence_rows(x / n, q_null, alpha)

    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, blocks))
    else:
        for b in blocks:
            run(b)
    return out
