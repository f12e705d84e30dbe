"""Dual functions H and dual kernels.

A kernel Phat is an H-dual of P when H Phat' = P H.  This module builds the
standard dual-function families (cumulative-indicator, two-block ultrametric,
hypergeometric, power/Vandermonde, potential), derives dual kernels either
from closed forms or by linear solves, and checks the feasibility conditions
that decide whether the dual is an honest substochastic kernel.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np
from scipy import linalg as sla

from . import errors, kernels
from .chains import bd_kernel, is_irreducible_bd
from .kernels import Kernel, as_matrix, sup_norm
from .tolerances import EPS_NEG, EPS_STOCH, RESID_TOL

COND_LIMIT = 1e12


@dataclass(frozen=True)
class DualFunction:
    """A nonnegative matrix H used on the right of the duality identity.

    ``family`` tags the construction ("siegmund", "ultrametric",
    "hypergeometric", "vandermonde", "potential", "custom"); ``params`` keeps
    the construction data; ``inverse`` is attached when a closed form exists
    and is verified against H at build time.
    """

    matrix: np.ndarray
    family: str
    params: dict = field(default_factory=dict)
    inverse: np.ndarray | None = None

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", m)
        m.setflags(write=False)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise errors.NonSquareError("dual function must be square")
        if not np.all(np.isfinite(m)):
            raise errors.NonFiniteEntryError("dual function has non-finite entries")
        if np.min(m) < -EPS_NEG:
            raise errors.NegativeEntryError("dual function must be nonnegative")
        if np.any(m.sum(axis=1) <= EPS_NEG) or np.any(m.sum(axis=0) <= EPS_NEG):
            raise errors.TrivialDualFunctionError(
                "dual function has a vanishing row or column"
            )
        if self.inverse is not None:
            inv = np.asarray(self.inverse, dtype=float)
            object.__setattr__(self, "inverse", inv)
            inv.setflags(write=False)
            if sup_norm(m @ inv - np.eye(m.shape[0])) > RESID_TOL:
                raise errors.SingularDualFunctionError(
                    "attached inverse fails H @ inv = Id"
                )

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def siegmund_function(N: int) -> DualFunction:
    """H(x, y) = 1(x <= y); inverse is the first-difference matrix."""
    H = np.triu(np.ones((N + 1, N + 1)))
    inv = np.eye(N + 1) - np.diag(np.ones(N), k=1)
    return DualFunction(H, "siegmund", {"N": N}, inverse=inv)


def ultrametric_function(N: int, k: int, alpha: float, beta: float) -> DualFunction:
    """Two-block weighting of the cumulative indicator.

    Blocks are C = {0..k} and C' = {k+1..N}; H(x, y) = 1(x <= y) times
    (1 + gamma(x)) inside a block and 1 across blocks, gamma = alpha on C and
    beta on C'.  The inverse is bidiagonal: row x holds 1/(1+gamma(x)) on the
    diagonal and -1/(1+gamma(x)) just above, except that the boundary row k
    carries the extra factor 1/(1+beta) on its superdiagonal entry.
    """
    if not (0 <= k < N):
        raise errors.InvalidUltrametricParamsError("need 0 <= k < N")
    if alpha < 0 or beta < 0:
        raise errors.InvalidUltrametricParamsError("need alpha, beta >= 0")
    n = N + 1
    gamma = np.where(np.arange(n) <= k, alpha, beta)
    same_block = (np.arange(n)[:, None] <= k) == (np.arange(n)[None, :] <= k)
    upper = np.triu(np.ones((n, n)))
    H = upper * (1.0 + gamma[:, None] * same_block)
    inv = np.zeros((n, n))
    for x in range(n):
        inv[x, x] = 1.0 / (1.0 + gamma[x])
        if x + 1 < n:
            extra = 1.0 / (1.0 + beta) if x == k else 1.0
            inv[x, x + 1] = -extra / (1.0 + gamma[x])
    return DualFunction(H, "ultrametric", {"N": N, "k": k, "alpha": alpha, "beta": beta}, inverse=inv)


def hypergeometric_function(N: int) -> DualFunction:
    """H(x, y) = C(N-x, y) / C(N, y): symmetric, zero when x + y > N."""
    H = np.zeros((N + 1, N + 1))
    for x in range(N + 1):
        for y in range(N + 1 - x):
            H[x, y] = comb(N - x, y) / comb(N, y)
    return DualFunction(H, "hypergeometric", {"N": N})


def vandermonde_function(N: int) -> DualFunction:
    """H(x, y) = (x/N)^y with 0^0 = 1.  Reporting only: extremely
    ill-conditioned as N grows, and no feasibility theory is attached."""
    x = np.arange(N + 1) / N
    y = np.arange(N + 1)
    H = x[:, None] ** y[None, :]
    H[0, 0] = 1.0
    return DualFunction(H, "vandermonde", {"N": N})


def potential_function(R) -> DualFunction:
    """H = (Id - R)^{-1} = sum_n R^n for strictly substochastic R with no
    mass-conserving class; the inverse Id - R is attached exactly."""
    RK = kernels.validate_kernel(R, require="substochastic")
    if RK.kind is not kernels.KernelKind.STRICTLY_SUBSTOCHASTIC:
        raise errors.PotentialHasStochasticClassError("R must lose mass somewhere")
    dec = kernels.classify(RK)
    if dec.stochastic_classes:
        raise errors.PotentialHasStochasticClassError(
            f"R keeps full mass on class {dec.stochastic_classes[0]}"
        )
    n = RK.n
    H = np.linalg.solve(np.eye(n) - RK.matrix, np.eye(n))
    return DualFunction(H, "potential", {"R": RK.matrix}, inverse=np.eye(n) - RK.matrix)


def dual_function(family: str, N: int | None = None, **params) -> DualFunction:
    if family == "siegmund":
        return siegmund_function(N)
    if family == "ultrametric":
        return ultrametric_function(N, params["k"], params["alpha"], params["beta"])
    if family == "hypergeometric":
        return hypergeometric_function(N)
    if family == "vandermonde":
        return vandermonde_function(N)
    if family == "potential":
        return potential_function(params["R"])
    raise ValueError(f"unknown dual family {family!r}")


@dataclass(frozen=True)
class DualReport:
    """Outcome of a dual-kernel construction.

    ``feasible`` is False when the candidate has entries below -EPS_NEG; the
    offending entries are listed in ``violations`` as (condition, (row, col),
    value).  ``mass_leaks`` holds 1 - row sums of the dual.
    """

    dual: np.ndarray
    feasible: bool
    residual: float
    mass_leaks: np.ndarray
    violations: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)


def is_monotone(P, slack: float = EPS_NEG) -> bool:
    """Rows are stochastically nondecreasing: cumulative sums F(x, y) are
    nonincreasing in x for every y.  For tridiagonal input this coincides
    with p_x + q_{x+1} <= 1 and the two computations are cross-checked."""
    m = as_matrix(P)
    F = np.cumsum(m, axis=1)
    by_cumulative = bool(np.all(F[1:] - F[:-1] <= slack))
    if _is_tridiagonal(m):
        n = m.shape[0]
        up = np.array([m[x, x + 1] for x in range(n - 1)])
        down = np.array([m[x + 1, x] for x in range(n - 1)])
        by_boundary = bool(np.all(up + down <= 1 + slack + EPS_STOCH))
        if by_boundary != by_cumulative:  # pragma: no cover - fp corner
            raise errors.DualChainError(
                "cumulative and tridiagonal monotonicity checks disagree"
            )
    return by_cumulative


def _is_tridiagonal(m: np.ndarray) -> bool:
    mask = np.abs(np.triu(m, 2)) + np.abs(np.tril(m, -2))
    return bool(np.max(mask, initial=0.0) <= EPS_NEG)


def siegmund_dual(P) -> DualReport:
    """Cumulative-indicator dual: Phat(y, x) = F(x, y) - F(x+1, y) with
    F(x, y) = sum_{z<=y} P(x, z) and F(N+1, .) = 0.

    Feasible exactly when P is monotone; the violating difference is
    recorded otherwise.  For stochastic P the last state is absorbing for
    the dual and row y loses mass 1 - F(0, y).
    """
    K = P if isinstance(P, Kernel) else kernels.validate_kernel(P)
    m = K.matrix
    n = K.n
    F = np.cumsum(m, axis=1)
    Fpad = np.vstack([F, np.zeros(n)])
    dual = (Fpad[:-1] - Fpad[1:]).T  # dual[y, x] = F(x, y) - F(x+1, y)

    violations = [
        ("monotone", (int(y), int(x)), float(dual[y, x]))
        for y, x in zip(*np.nonzero(dual < -EPS_NEG))
    ]
    feasible = not violations
    dual = np.where((dual < 0) & (dual >= -EPS_NEG), 0.0, dual)
    H = np.triu(np.ones((n, n)))
    residual = sup_norm(H @ dual.T - m @ H)
    leaks = 1.0 - dual.sum(axis=1)
    diagnostics = {
        "absorbing_last": bool(abs(dual[n - 1, n - 1] - 1.0) <= EPS_STOCH)
        if K.kind is kernels.KernelKind.STOCHASTIC
        else None,
        "leak_at_zero": float(leaks[0]),
        "stochastic_dual": bool(np.all(np.abs(leaks) <= EPS_STOCH)),
    }
    return DualReport(
        dual=dual,
        feasible=feasible,
        residual=residual,
        mass_leaks=leaks,
        violations=violations,
        diagnostics=diagnostics,
    )


def bd_siegmund_dual(params) -> np.ndarray:
    """Closed tridiagonal form of the cumulative dual of a birth-death
    kernel: down p_x, hold 1 - (p_x + q_{x+1}), up q_{x+1} (q_{N+1} = 0)."""
    n = params.n
    m = np.zeros((n, n))
    qpad = np.concatenate([params.q[1:], [0.0]])  # q_{x+1}
    for x in range(n):
        if x > 0:
            m[x, x - 1] = params.p[x]
        m[x, x] = 1.0 - (params.p[x] + qpad[x])
        if x + 1 < n:
            m[x, x + 1] = qpad[x]
    return m


def ultrametric_dual(P, k: int, alpha: float, beta: float) -> DualReport:
    """Two-block ultrametric dual assembled from the four case formulas.

    With F(x, y) = sum_{z<=y} P(x, z), F(N+1, .) = 0, gamma as in the dual
    function, and J(z) = P(k, z) - P(k+1, z)/(1+beta):

      x != k, y <= k:  (1+alpha)/(1+gamma(x)) * [F(x,y) - F(x+1,y)]
      x != k, y  > k:  1/(1+gamma(x)) * dFk(x)
                       + (1+beta)/(1+gamma(x)) * [dF(x,y) - dFk(x)]
      x  = k, y <= k:  sum_{z<=y} J(z)
      x  = k, y  > k:  1/(1+alpha) * sum_{z<=k} J(z)
                       + (1+beta)/(1+alpha) * sum_{k<z<=y} J(z)

    Feasibility is the entrywise nonnegativity of the result; negative
    entries are tagged with the cumulative condition they violate (lower
    block vs upper block).  Diagnostics include the constant-block-mass
    sufficient conditions and the row-mass profile with its conservative
    rows (row sums within EPS_STOCH of 1).
    """
    K = P if isinstance(P, Kernel) else kernels.validate_kernel(P)
    m = K.matrix
    n = K.n
    N = n - 1
    if not (0 <= k < N):
        raise errors.InvalidUltrametricParamsError("need 0 <= k < N")
    if alpha < 0 or beta < 0:
        raise errors.InvalidUltrametricParamsError("need alpha, beta >= 0")

    gamma = np.where(np.arange(n) <= k, alpha, beta)
    F = np.cumsum(m, axis=1)
    Fpad = np.vstack([F, np.zeros(n)])
    dF = Fpad[:-1] - Fpad[1:]  # dF[x, y] = F(x,y) - F(x+1,y)
    dFk = dF[:, k]

    dual = np.zeros((n, n))
    ys = np.arange(n)
    low = ys <= k
    high = ~low
    for x in range(n):
        if x != k:
            dual[low, x] = (1.0 + alpha) / (1.0 + gamma[x]) * dF[x, low]
            dual[high, x] = (
                dFk[x] / (1.0 + gamma[x])
                + (1.0 + beta) / (1.0 + gamma[x]) * (dF[x, high] - dFk[x])
            )
    J = m[k] - m[k + 1] / (1.0 + beta)
    cumJ = np.cumsum(J)
    dual[low, k] = cumJ[low]
    dual[high, k] = cumJ[k] / (1.0 + alpha) + (1.0 + beta) / (1.0 + alpha) * (
        cumJ[high] - cumJ[k]
    )

    violations = [
        (
            "lower-block-cumulative" if y <= k else "upper-block-cumulative",
            (int(y), int(x)),
            float(dual[y, x]),
        )
        for y, x in zip(*np.nonzero(dual < -EPS_NEG))
    ]
    feasible = not violations
    dual = np.where((dual < 0) & (dual >= -EPS_NEG), 0.0, dual)

    Hfn = ultrametric_function(N, k, alpha, beta)
    residual = sup_norm(Hfn.matrix @ dual.T - m @ Hfn.matrix)
    row_mass = dual.sum(axis=1)
    leaks = 1.0 - row_mass

    # row-mass profile in closed form (must agree with the assembled rows)
    L = np.empty(n)
    L[low] = F[0, low] + alpha / (1.0 + beta) * F[k + 1, low]
    L[high] = (
        F[0, k] / (1.0 + alpha)
        + (1.0 + beta) / (1.0 + alpha) * (F[0, high] - F[0, k])
        + alpha / ((1.0 + alpha) * (1.0 + beta)) * F[k + 1, k]
        + alpha / (1.0 + alpha) * (F[k + 1, high] - F[k + 1, k])
    )
    if feasible and sup_norm(L - row_mass) > 1e-9:  # pragma: no cover
        raise errors.DualChainError("row-mass profile disagrees with assembly")

    block_mass = F[:, k]
    delta = float(block_mass.mean())
    const_block = bool(np.ptp(block_mass) <= EPS_STOCH)
    # cumulative monotonicity across every adjacent row pair (x, x+1), x != k:
    # lower block uses F itself, upper block the above-k cumulative G = F - F(., k)
    rows = np.array([x for x in range(N) if x != k], dtype=int)
    lower_monotone = bool(np.all(dF[np.ix_(rows, low.nonzero()[0])] >= -EPS_NEG))
    upper_cols = high.nonzero()[0]
    upper_monotone = bool(
        np.all((dF[np.ix_(rows, upper_cols)] - dFk[rows, None]) >= -EPS_NEG)
    )
    conservative = [int(y) for y in range(n) if abs(row_mass[y] - 1.0) <= EPS_STOCH]
    diagnostics = {
        "row_mass": row_mass,
        "constant_block_mass": const_block,
        "delta": delta,
        "delta_substochastic": (1.0 + beta) / (1.0 + alpha + beta),
        "blockwise_monotone": bool(lower_monotone and upper_monotone),
        "conservative_rows": conservative,
        "substochastic": bool(np.all(row_mass <= 1 + EPS_STOCH)),
    }
    return DualReport(
        dual=dual,
        feasible=feasible,
        residual=residual,
        mass_leaks=leaks,
        violations=violations,
        diagnostics=diagnostics,
    )


def bd_ultrametric_rigidity(params, k: int, alpha: float, beta: float) -> dict:
    """Feasibility analysis of the two-block dual for an irreducible
    birth-death kernel.

    The report records: feasibility and (when beta > 0, 1 <= k <= N-2) the
    negative witness entry at (k+2, k-1) whose value is -beta p_k /
    (1+alpha); whether k >= 1 forces alpha = 0 through the row-k mass
    1 + alpha q_{k+1} / (1+beta); and for k = 0 the largest feasible alpha,
    p_0 / q_1, at which the dual becomes stochastic.
    """
    if not is_irreducible_bd(params):
        raise errors.NotIrreducibleError("rigidity analysis needs an irreducible chain")
    P = bd_kernel_cached(params)
    rep = ultrametric_dual(P, k, alpha, beta)
    N = params.N
    out = {
        "feasible": rep.feasible,
        "substochastic": rep.diagnostics["substochastic"],
        "monotone": is_monotone(P),
        "report": rep,
    }
    if beta > EPS_STOCH and 1 <= k <= N - 2:
        witness = float(rep.dual[k + 2, k - 1])
        predicted = -beta * params.p[k] / (1.0 + alpha)
        out["beta_witness"] = ((k + 2, k - 1), witness, predicted)
    if k >= 1:
        out["row_k_mass"] = float(rep.diagnostics["row_mass"][k])
        out["alpha_must_vanish"] = bool(alpha > EPS_STOCH)
    if k == 0:
        out["alpha_max"] = float(params.p[0] / params.q[1])
        out["stochastic_dual"] = bool(
            np.all(np.abs(rep.diagnostics["row_mass"] - 1.0) <= EPS_STOCH)
        )
    return out


_bd_kernel_cache: dict = {}


def bd_kernel_cached(params):
    key = (params.N, params.p.tobytes(), params.q.tobytes(), params.r.tobytes())
    if key not in _bd_kernel_cache:
        if len(_bd_kernel_cache) > 256:
            _bd_kernel_cache.clear()
        _bd_kernel_cache[key] = bd_kernel(params)
    return _bd_kernel_cache[key]


def cond1_estimate(H: DualFunction) -> float:
    m = H.matrix
    if H.inverse is not None:
        inv = H.inverse
    else:
        try:
            inv = np.linalg.inv(m)
        except np.linalg.LinAlgError:
            return np.inf
    return float(np.linalg.norm(m, 1) * np.linalg.norm(inv, 1))


def _support_refit(Hm, B, X):
    """Re-fit a solved dual on its detected support.

    An ill conditioned dual function smears the structural zeros of the
    dual into signed noise of size roughly cond(H) * eps (the flipped
    hypergeometric matrix reaches cond ~ 3e9 by N = 20).  The noise floor
    is read off the most negative entry of the solve; entries above ten
    times that form the support, and each dual row is re-solved by least
    squares over its active columns alone, which is well conditioned.
    The refit is kept only when it reproduces the identity within
    RESID_TOL; genuinely negative duals fail that gate and fall back to
    the dense solution untouched.
    """
    lo = float(X.min())
    if lo >= -EPS_NEG:
        return X
    tau = 10.0 * abs(lo)
    support = np.abs(X) > tau
    Y = np.zeros_like(X)
    for x in range(X.shape[1]):
        rows = np.nonzero(support[:, x])[0]
        if rows.size:
            w, *_ = np.linalg.lstsq(Hm[:, rows], B[:, x], rcond=None)
            Y[rows, x] = w
    if sup_norm(Hm @ Y - B) <= RESID_TOL:
        return Y
    return X


def dual_via_solve(P, H: DualFunction) -> DualReport:
    """Solve H X = P H for X = Phat' directly.

    Triangular families use back substitution (the hypergeometric matrix is
    triangular after a row flip); everything else goes through dense LU.  A
    1-norm condition estimate above 1e12 refuses the solve.  Solutions with
    negative entries get one support-refit pass to strip conditioning
    noise.  Entries in [-EPS_NEG, 0) are clamped to 0; anything lower marks
    the construction infeasible with the entry as witness.
    """
    m = as_matrix(P)
    Hm = H.matrix
    if m.shape != Hm.shape:
        raise errors.DimensionMismatchError("kernel and dual function size mismatch")
    cond = cond1_estimate(H)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise errors.SingularDualFunctionError(
            f"condition estimate {cond:.3g} above {COND_LIMIT:.0e}"
        )
    B = m @ Hm
    if H.family in ("siegmund", "ultrametric"):
        X = sla.solve_triangular(Hm, B, lower=False)
    elif H.family == "hypergeometric":
        X = sla.solve_triangular(Hm[::-1], B[::-1], lower=True)
    else:
        X = np.linalg.solve(Hm, B)
    X = _support_refit(Hm, B, X)
    dual = X.T
    violations = [
        ("nonnegativity", (int(y), int(x)), float(dual[y, x]))
        for y, x in zip(*np.nonzero(dual < -EPS_NEG))
    ]
    feasible = not violations
    dual = np.where((dual < 0) & (dual >= -EPS_NEG), 0.0, dual)
    residual = sup_norm(Hm @ dual.T - B)
    return DualReport(
        dual=dual,
        feasible=feasible,
        residual=residual,
        mass_leaks=1.0 - dual.sum(axis=1),
        violations=violations,
        diagnostics={"condition_estimate": cond},
    )


def verify_duality(P, H, dual, n_max: int = 20) -> dict:
    """Static, iterated, and transposed residuals of the duality identity.

    static:    ||H dual' - P H||
    dynamic:   max_{n <= n_max} ||P^n H - H (dual')^n||
    symmetric: ||dual H' - H' P'|| (the same relation read for the pair
               (dual, H') which is algebraically equivalent)
    """
    m = as_matrix(P)
    Hm = H.matrix if isinstance(H, DualFunction) else np.asarray(H, dtype=float)
    d = as_matrix(dual)
    static = sup_norm(Hm @ d.T - m @ Hm)
    left = Hm.copy()
    right = Hm.copy()
    dynamic = 0.0
    for _ in range(max(1, n_max)):
        left = m @ left
        right = right @ d.T
        dynamic = max(dynamic, sup_norm(left - right))
    symmetric = sup_norm(d @ Hm.T - Hm.T @ m.T)
    return {"static": static, "dynamic": dynamic, "symmetric": symmetric}


def potential_dual_check(R, P=None) -> dict:
    """Feasibility of the potential dual against a strictly substochastic R
    whose transpose is also substochastic.

    Defaults to the uniform kernel P = (n)^{-1} ones; the dual is computed
    as Phat' = (Id - R) P H and must be entrywise nonnegative with
    nonnegative row sums.
    """
    Hfn = potential_function(R)
    Rm = Hfn.params["R"]
    n = Rm.shape[0]
    col_sums = Rm.sum(axis=0)
    transpose_sub = bool(np.all(col_sums <= 1 + EPS_STOCH))
    if P is None:
        P = np.full((n, n), 1.0 / n)
    m = as_matrix(P)
    dual = ((np.eye(n) - Rm) @ m @ Hfn.matrix).T
    feasible = bool(np.min(dual) >= -EPS_NEG)
    dual = np.where((dual < 0) & (dual >= -EPS_NEG), 0.0, dual)
    residual = sup_norm(Hfn.matrix @ dual.T - m @ Hfn.matrix)
    return {
        "dual": dual,
        "feasible": feasible,
        "transpose_substochastic": transpose_sub,
        "row_sums_nonnegative": bool(np.all(dual.sum(axis=1) >= -EPS_NEG)),
        "residual": residual,
        "dual_function": Hfn,
    }
