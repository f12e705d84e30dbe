"""Structured chain families on {0..N}: birth-death kernels, Moran-type
frequency chains, Wright-Fisher sampling chains, and the scale-function
profile of doubly absorbing birth-death chains.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import errors, kernels
from .tolerances import EPS_NEG, EPS_STOCH, RESID_TOL


@dataclass(frozen=True)
class BDParams:
    """Tridiagonal transition data: up p_x, down q_x, hold r_x on {0..N}."""

    N: int
    p: np.ndarray
    q: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        for name in ("p", "q", "r"):
            v = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, v)
            v.setflags(write=False)

    @property
    def n(self) -> int:
        return self.N + 1


def make_bd(p, q, r=None, *, interior_positive: bool = True) -> BDParams:
    """Validate birth-death vectors. q_0 = 0 and p_N = 0 are mandatory; the
    hold vector is filled in as 1 - p - q when omitted.

    Interior positivity (p_x, q_x > 0 for 0 < x < N, plus p_0 > 0, q_N > 0
    checked separately by irreducibility) is demanded unless an absorbing
    variant is explicitly requested with ``interior_positive=False``.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape or p.ndim != 1 or p.size < 2:
        raise errors.DimensionMismatchError("p and q must be equal-length vectors")
    N = p.size - 1
    if r is None:
        r = 1.0 - p - q
    r = np.asarray(r, dtype=float)
    if r.shape != p.shape:
        raise errors.DimensionMismatchError("r length mismatch")
    if abs(q[0]) > EPS_NEG or abs(p[N]) > EPS_NEG:
        raise errors.InvalidBoundaryError("need q_0 = 0 and p_N = 0")
    for v, name in ((p, "p"), (q, "q"), (r, "r")):
        if np.min(v) < -EPS_NEG:
            raise errors.NegativeEntryError(f"{name} has a negative entry")
    if kernels.sup_norm(p + q + r - 1.0) > EPS_STOCH:
        raise errors.NotStochasticError("p + q + r must equal 1 on every state")
    if interior_positive:
        for x in range(1, N):
            if p[x] <= EPS_NEG or q[x] <= EPS_NEG:
                raise errors.InvalidBoundaryError(
                    f"interior state {x} has a vanishing transition; pass "
                    "interior_positive=False for absorbing variants"
                )
    return BDParams(N=N, p=np.clip(p, 0, None), q=np.clip(q, 0, None), r=np.clip(r, 0, None))


def bd_kernel(params: BDParams) -> kernels.Kernel:
    """Dense tridiagonal kernel from birth-death data."""
    n = params.n
    m = np.zeros((n, n))
    idx = np.arange(n)
    m[idx, idx] = params.r
    m[idx[:-1], idx[:-1] + 1] = params.p[:-1]
    m[idx[1:], idx[1:] - 1] = params.q[1:]
    return kernels.validate_kernel(m, require="stochastic")


def bd_params_from_kernel(P) -> BDParams:
    """Read birth-death vectors back from a tridiagonal stochastic matrix."""
    m = kernels.as_matrix(P)
    n = m.shape[0]
    off = np.abs(np.triu(m, 2)) + np.abs(np.tril(m, -2))
    if np.max(off, initial=0.0) > EPS_NEG:
        raise errors.DimensionMismatchError("kernel is not tridiagonal")
    p = np.zeros(n)
    q = np.zeros(n)
    p[: n - 1] = np.diag(m, 1)
    q[1:] = np.diag(m, -1)
    return make_bd(p, q, np.diag(m).copy(), interior_positive=False)


def is_irreducible_bd(params: BDParams) -> bool:
    interior = all(
        params.p[x] > EPS_NEG and params.q[x] > EPS_NEG for x in range(1, params.N)
    )
    return bool(params.p[0] > EPS_NEG and params.q[params.N] > EPS_NEG and interior)


def bd_stationary(params: BDParams) -> np.ndarray:
    """Product-form stationary law pi(y) = pi(0) prod_{z<y} p_z / q_{z+1}."""
    if not is_irreducible_bd(params):
        raise errors.NotIrreducibleError("stationary product form needs p_0, q_N > 0")
    ratios = params.p[:-1] / params.q[1:]
    w = np.concatenate([[1.0], np.cumprod(ratios)])
    return w / w.sum()


def reflected_walk_params(N: int, p: float, q: float) -> BDParams:
    """Nearest-neighbour walk with holding boundaries: up rate p below N,
    down rate q above 0, the remainder stays put."""
    if p <= 0 or q <= 0 or p + q > 1:
        raise errors.NotStochasticError("need p, q > 0 with p + q <= 1")
    pv = np.full(N + 1, p)
    qv = np.full(N + 1, q)
    pv[N] = 0.0
    qv[0] = 0.0
    return make_bd(pv, qv)


@dataclass(frozen=True)
class BiasFunction:
    """Sampling bias u -> p(u) tabulated on the grid x/N, with shape flags
    read off the table itself."""

    values: np.ndarray
    nondecreasing: bool
    positive_at_zero: bool
    below_one_at_one: bool

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        v.setflags(write=False)

    @property
    def N(self) -> int:
        return self.values.size - 1


def make_bias(values) -> BiasFunction:
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.size < 2:
        raise errors.InvalidBiasError("bias table needs at least two grid points")
    if np.min(v) < -EPS_NEG or np.max(v) > 1 + EPS_NEG:
        raise errors.InvalidBiasError("bias values must lie in [0, 1]")
    v = np.clip(v, 0.0, 1.0)
    nondec = bool(np.all(np.diff(v) >= -EPS_NEG))
    return BiasFunction(
        values=v,
        nondecreasing=nondec,
        positive_at_zero=bool(v[0] > EPS_NEG),
        below_one_at_one=bool(v[-1] < 1 - EPS_NEG),
    )


def complement_bias(bias: BiasFunction) -> BiasFunction:
    """Bias of the complement count N - X: u -> 1 - p(1 - u).

    On the grid this is an exact reversal, so applying it twice returns the
    original table bit for bit.
    """
    return make_bias(1.0 - bias.values[::-1])


def mutation_bias(a1: float, a2: float, N: int) -> BiasFunction:
    """Two-parameter mutation mechanism p(u) = (1 - a2) u + a1 (1 - u)."""
    if not (0 <= a1 <= 1 and 0 <= a2 <= 1):
        raise errors.InvalidBiasError("mutation rates must lie in [0, 1]")
    u = np.arange(N + 1) / N
    return make_bias((1.0 - a2) * u + a1 * (1.0 - u))


def moran_kernel(N: int, bias: BiasFunction) -> BDParams:
    """Pair-sampling chain: draw a site and resample it with bias p(x/N).

    p_x = (1 - x/N) p(x/N), q_x = (x/N) q(x/N), r_x the rest, with
    q(u) = 1 - p(u).
    """
    if bias.N != N:
        raise errors.DimensionMismatchError("bias grid does not match N")
    u = np.arange(N + 1) / N
    pv = bias.values
    qv = 1.0 - pv
    p = (1.0 - u) * pv
    q = u * qv
    r = u * pv + (1.0 - u) * qv
    return make_bd(p, q, r, interior_positive=False)


def wright_fisher_kernel(N: int, bias: BiasFunction) -> kernels.Kernel:
    """Binomial resampling rows P(x, .) = Binomial(N, p(x/N))."""
    if bias.N != N:
        raise errors.DimensionMismatchError("bias grid does not match N")
    y = np.arange(N + 1)
    rows = [stats.binom.pmf(y, N, pv) for pv in bias.values]
    return kernels.validate_kernel(np.array(rows), require="stochastic")


@dataclass(frozen=True)
class ScaleProfile:
    """Absorption profile of a doubly absorbing birth-death chain.

    ``eta`` is the scale function eta(x) = sum_{y<x} prod_{z<=y} q_z/p_z and
    ``phi``(x) = 1 - eta(x)/eta(N) the probability of absorbing at 0.
    ``dual_station`` is the stationary law of the one-step dual restricted to
    {0..N-1}; phi(x) = sum_{z>=x} dual_station(z) is asserted at build time.
    """

    eta: np.ndarray
    phi: np.ndarray
    dual_station: np.ndarray
    identity_residual: float


def absorption_profile(params: BDParams) -> ScaleProfile:
    """Scale-function absorption probabilities, cross-checked against the
    stationary law of the associated one-step dual.

    Requires hard absorption at both ends (p_0 = 0, r_0 = 1, q_N = 0,
    r_N = 1), interior positivity, and the cumulative-monotonicity condition
    p_x + q_{x+1} <= 1.
    """
    N = params.N
    if not (
        abs(params.p[0]) <= EPS_NEG
        and abs(params.q[N]) <= EPS_NEG
        and abs(params.r[0] - 1.0) <= EPS_STOCH
        and abs(params.r[N] - 1.0) <= EPS_STOCH
    ):
        raise errors.NotDoublyAbsorbingError("need r_0 = 1 and r_N = 1 exactly")
    for x in range(1, N):
        if params.p[x] <= EPS_NEG or params.q[x] <= EPS_NEG:
            raise errors.NotDoublyAbsorbingError("interior transitions must be positive")
    if np.max(params.p[:-1] + params.q[1:]) > 1 + EPS_STOCH:
        raise errors.NotMonotoneError("profile needs p_x + q_{x+1} <= 1")

    ratios = params.q[1:N] / params.p[1:N]
    terms = np.concatenate([[1.0], np.cumprod(ratios)])  # index y = 0..N-1
    eta = np.concatenate([[0.0], np.cumsum(terms)])  # eta(0)..eta(N)
    phi = 1.0 - eta / eta[N]

    # one-step dual restricted to {0..N-1}: births q_{x+1}, deaths p_x
    from .duals import siegmund_dual  # local import to avoid a cycle

    report = siegmund_dual(bd_kernel(params))
    sub = report.dual[:N, :N]
    station = kernels.stationary(kernels.validate_kernel(sub, require="stochastic"))
    tail = np.concatenate([np.cumsum(station[::-1])[::-1], [0.0]])  # sum_{z>=x}
    resid = kernels.sup_norm(phi - tail)
    if resid > RESID_TOL:
        raise errors.DualChainError(
            f"scale-function and dual-stationary profiles disagree ({resid})"
        )
    return ScaleProfile(eta=eta, phi=phi, dual_station=station, identity_residual=resid)
