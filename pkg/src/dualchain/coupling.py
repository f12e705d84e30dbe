"""Diaconis-Fill coupling of an ergodic chain with its intertwined companion.

The pair (X_n, X~_n) moves by

    Pbar((x, xt), (y, yt)) = P(x, y) Ptilde(xt, yt) Lambda(yt, y) / (Lambda P)(xt, y)

with 0/0 read as 0.  Started from rho_0(x, xt) = nu0(xt) Lambda(xt, x) the
joint law stays in product form rho_n(x, xt) = nu_n(xt) Lambda(xt, x), so the
observed marginal follows P, the hidden marginal follows Ptilde, and the
conditional law of X_n given the hidden trajectory is the link row of the
current hidden state.
"""
from __future__ import annotations

import hashlib
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import errors, kernels
from .kernels import as_matrix, sup_norm
from .tolerances import EPS_NEG, EPS_STOCH, RESID_TOL


@dataclass(frozen=True)
class ProductKernel:
    """Coupled kernel on pair states s = x * n_tilde + xt (C order).

    ``consistent`` marks the pairs with Lambda(xt, x) > 0; the coupled walk
    never leaves them.  Rows at inconsistent pairs are set to hold in place
    so the matrix stays stochastic.
    """

    matrix: np.ndarray
    p: np.ndarray
    p_tilde: np.ndarray
    link: np.ndarray
    consistent: np.ndarray

    @property
    def n(self) -> int:
        return self.p.shape[0]

    @property
    def n_tilde(self) -> int:
        return self.p_tilde.shape[0]

    def pair_index(self, x: int, xt: int) -> int:
        return x * self.n_tilde + xt

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for m in (self.p, self.p_tilde, self.link):
            h.update(np.ascontiguousarray(m).tobytes())
            h.update(repr(m.shape).encode())
        return h.hexdigest()


def product_kernel(P, p_tilde, link) -> ProductKernel:
    m = as_matrix(P)
    pt = as_matrix(p_tilde)
    L = as_matrix(link)
    n = m.shape[0]
    nt = pt.shape[0]
    if L.shape != (nt, n):
        raise errors.DimensionMismatchError("link must map hidden rows to observed columns")
    r = sup_norm(pt @ L - L @ m)
    if r > RESID_TOL:
        raise errors.IntertwiningResidualError(f"link residual {r:.3g}")

    W = L @ m                                    # (xt, y)
    M = pt[:, None, :] * L.T[None, :, :]         # (xt, y, yt) = Ptilde(xt,yt) L(yt,y)
    D = np.divide(M, W[:, :, None], out=np.zeros_like(M), where=W[:, :, None] > 0)
    joint = m[:, None, :, None] * D[None, :, :, :]
    big = joint.reshape(n * nt, n * nt)

    consistent = (L.T > EPS_NEG)                 # (x, xt)
    flat = consistent.reshape(-1)
    sums = big.sum(axis=1)
    bad = flat & (np.abs(sums - 1.0) > EPS_STOCH)
    if np.any(bad):
        s = int(np.argmax(bad))
        raise errors.NotStochasticError(
            f"coupled row at pair {divmod(s, nt)} sums to {sums[s]}"
        )
    idx = np.flatnonzero(~flat)
    big[idx] = 0.0
    big[idx, idx] = 1.0
    return ProductKernel(matrix=big, p=m, p_tilde=pt, link=L, consistent=consistent)


def exact_joint(pk: ProductKernel, pi_tilde0, n_steps: int) -> dict:
    """Push the product-form initial law through the coupled kernel and
    certify, at every step, the three structural identities: observed
    marginal = pi0 P^n, hidden marginal = nu0 Ptilde^n, and joint law =
    product form nu_n(xt) Lambda(xt, x)."""
    nu0 = kernels.validate_prob_vector(pi_tilde0, "pi_tilde0")
    if nu0.shape[0] != pk.n_tilde:
        raise errors.DimensionMismatchError("pi_tilde0 length mismatch")
    L = pk.link
    rho = (nu0[None, :] * L.T).reshape(-1)       # rho0(x, xt)
    pi0 = nu0 @ L

    mu = pi0.copy()
    nu = nu0.copy()
    obs_dev = hid_dev = prod_dev = 0.0
    for _ in range(n_steps):
        rho = rho @ pk.matrix
        mu = mu @ pk.p
        nu = nu @ pk.p_tilde
        grid = rho.reshape(pk.n, pk.n_tilde)
        obs_dev = max(obs_dev, sup_norm(grid.sum(axis=1) - mu))
        hid_dev = max(hid_dev, sup_norm(grid.sum(axis=0) - nu))
        prod_dev = max(prod_dev, sup_norm(grid - (nu[None, :] * L.T)))
    return {
        "joint": rho,
        "observed_marginal_dev": obs_dev,
        "hidden_marginal_dev": hid_dev,
        "product_form_dev": prod_dev,
        "observed_final": mu,
        "hidden_final": nu,
    }


@dataclass(frozen=True)
class TrajectoryBatch:
    x: np.ndarray          # (n_paths, n_steps + 1) observed coordinates
    x_tilde: np.ndarray    # hidden coordinates, same shape
    seed: int
    fingerprint: str

    @property
    def n_paths(self) -> int:
        return self.x.shape[0]

    @property
    def n_steps(self) -> int:
        return self.x.shape[1] - 1


def _worker_count() -> int:
    env = os.environ.get("DUALCHAIN_THREADS", "")
    if env.strip():
        try:
            return max(1, int(env))
        except ValueError:
            raise errors.ConfigError(f"DUALCHAIN_THREADS={env!r} is not an integer")
    return 1


def _simulate_block(cum, start_cum, seed, lo, hi, n_steps):
    # One Philox substream per trajectory (key = [seed, index]) so results
    # are identical for any worker split.
    count = hi - lo
    u = np.empty((count, n_steps + 1))
    for i in range(count):
        g = np.random.Generator(np.random.Philox(key=[seed, lo + i]))
        u[i] = g.random(n_steps + 1)
    states = np.searchsorted(start_cum, u[:, 0], side="right")
    out = np.empty((count, n_steps + 1), dtype=np.int64)
    out[:, 0] = states
    for t in range(1, n_steps + 1):
        rows = cum[states]
        states = (u[:, t, None] > rows).sum(axis=1)
        out[:, t] = states
    return lo, out


def simulate(pk: ProductKernel, pi_tilde0, n_steps: int, n_paths: int,
             seed: int = 0) -> TrajectoryBatch:
    """Sample coupled trajectories from the product-form initial law.

    Reproducible for a fixed seed independently of DUALCHAIN_THREADS: path i
    always consumes its own counter-based stream.
    """
    nu0 = kernels.validate_prob_vector(pi_tilde0, "pi_tilde0")
    rho0 = (nu0[None, :] * pk.link.T).reshape(-1)
    start_cum = np.cumsum(rho0)
    cum = np.cumsum(pk.matrix, axis=1)
    # guard against round-off overshoot in inverse-transform sampling
    start_cum[-1] = 1.0
    cum[:, -1] = 1.0

    workers = _worker_count()
    out = np.empty((n_paths, n_steps + 1), dtype=np.int64)
    bounds = np.linspace(0, n_paths, workers + 1, dtype=int)
    if workers == 1:
        _, block = _simulate_block(cum, start_cum, seed, 0, n_paths, n_steps)
        out[:] = block
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            futs = [
                ex.submit(_simulate_block, cum, start_cum, seed, lo, hi, n_steps)
                for lo, hi in zip(bounds[:-1], bounds[1:])
                if hi > lo
            ]
            for f in futs:
                lo, block = f.result()
                out[lo:lo + block.shape[0]] = block
    x, xt = np.divmod(out, pk.n_tilde)
    return TrajectoryBatch(x=x, x_tilde=xt, seed=seed, fingerprint=pk.fingerprint())


def empirical_report(batch: TrajectoryBatch, pk: ProductKernel, pi_tilde0,
                     times=None, min_hits: int = 30) -> dict:
    """Compare occupation frequencies with the exact laws at selected times.

    Marginal frequencies must sit within three binomial standard errors of
    the exact probabilities; conditionally on the hidden state (where at
    least ``min_hits`` paths land) the observed coordinate must match the
    link row to the same precision.
    """
    nu0 = kernels.validate_prob_vector(pi_tilde0, "pi_tilde0")
    if times is None:
        times = sorted({batch.n_steps // 2, batch.n_steps} - {0})
    paths = batch.n_paths
    pi0 = nu0 @ pk.link

    checks = []
    ok = True
    for t in times:
        mu = pi0.copy()
        nu = nu0.copy()
        for _ in range(t):
            mu = mu @ pk.p
            nu = nu @ pk.p_tilde
        fx = np.bincount(batch.x[:, t], minlength=pk.n) / paths
        fxt = np.bincount(batch.x_tilde[:, t], minlength=pk.n_tilde) / paths
        se_x = np.sqrt(np.maximum(mu * (1 - mu), 1e-12) / paths)
        se_xt = np.sqrt(np.maximum(nu * (1 - nu), 1e-12) / paths)
        obs_ok = bool(np.all(np.abs(fx - mu) <= 3 * se_x + 1e-12))
        hid_ok = bool(np.all(np.abs(fxt - nu) <= 3 * se_xt + 1e-12))

        cond = []
        for xt in range(pk.n_tilde):
            sel = batch.x_tilde[:, t] == xt
            hits = int(sel.sum())
            if hits < min_hits:
                continue
            fcond = np.bincount(batch.x[sel, t], minlength=pk.n) / hits
            row = pk.link[xt]
            se = np.sqrt(np.maximum(row * (1 - row), 1e-12) / hits)
            cond.append(bool(np.all(np.abs(fcond - row) <= 3 * se + 1e-12)))
        cond_ok = all(cond) if cond else True
        ok = ok and obs_ok and hid_ok and cond_ok
        checks.append({
            "time": int(t),
            "observed_within_3se": obs_ok,
            "hidden_within_3se": hid_ok,
            "conditional_within_3se": cond_ok,
            "conditioned_states": len(cond),
        })
    return {"ok": ok, "checks": checks, "n_paths": paths}
