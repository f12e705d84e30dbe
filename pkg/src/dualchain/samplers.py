"""Random instance generators for property tests and experiments."""
from __future__ import annotations

import numpy as np

from . import kernels
from .chains import BDParams, make_bd


def random_kernel(rng, n: int) -> np.ndarray:
    """Dirichlet rows; no structure beyond stochasticity."""
    return rng.dirichlet(np.ones(n), size=n)


def random_monotone_kernel(rng, n: int, n_maps: int = 6) -> np.ndarray:
    """Mixture of nondecreasing deterministic maps plus a rank-one part.

    Both ingredients are monotone and the rank-one part makes every entry
    positive, so the result is a strictly positive monotone kernel.
    """
    m = np.zeros((n, n))
    w = rng.dirichlet(np.ones(n_maps))
    for j in range(n_maps):
        f = np.sort(rng.integers(0, n, size=n))
        m[np.arange(n), f] += w[j]
    mu = rng.dirichlet(np.ones(n))
    out = 0.9 * m + 0.1 * mu[None, :]
    return kernels.validate_kernel(out, require="stochastic").matrix


def random_monotone_bd(rng, N: int, low: float = 0.08, high: float = 0.45) -> BDParams:
    """Birth-death chain with p_x + q_{x+1} < 1 and transitions bounded
    away from zero, so the Siegmund dual exists and absorption is fast."""
    p = np.zeros(N + 1)
    q = np.zeros(N + 1)
    p[:N] = rng.uniform(low, high, size=N)
    q[1:] = rng.uniform(low, high, size=N)
    return make_bd(p, q)


def random_constant_blockmass_kernel(rng, N: int, k: int, delta: float) -> np.ndarray:
    """Every row puts mass delta on {0..k} and 1 - delta on {k+1..N}."""
    n = N + 1
    m = np.zeros((n, n))
    m[:, : k + 1] = delta * rng.dirichlet(np.ones(k + 1), size=n)
    m[:, k + 1 :] = (1.0 - delta) * rng.dirichlet(np.ones(n - k - 1), size=n)
    return kernels.validate_kernel(m, require="stochastic").matrix
