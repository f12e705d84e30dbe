"""Dense finite-state kernels: validation, communication structure, stationary
laws, reversal, evolution, hitting probabilities.

States are always 0..n-1 and kernels are dense float64 matrices.  A kernel is
*stochastic* when every row sums to 1 within EPS_STOCH, *strictly
substochastic* when no row exceeds 1 but at least one loses mass, and
*general nonnegative* otherwise (dual functions, potentials).
"""
from __future__ import annotations

import enum
import heapq
from dataclasses import dataclass, field

import numpy as np

from . import errors
from .tolerances import EPS_NEG, EPS_STOCH, RESID_TOL


class KernelKind(enum.Enum):
    STOCHASTIC = "stochastic"
    STRICTLY_SUBSTOCHASTIC = "strictly-substochastic"
    GENERAL = "general-nonnegative"


@dataclass(frozen=True)
class Kernel:
    """A validated nonnegative square matrix, immutable after construction."""

    matrix: np.ndarray
    kind: KernelKind

    def __post_init__(self):
        self.matrix.setflags(write=False)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def row_sums(self) -> np.ndarray:
        return self.matrix.sum(axis=1)


def sup_norm(a) -> float:
    """Entrywise sup norm; the residual metric used everywhere."""
    a = np.asarray(a, dtype=float)
    return float(np.max(np.abs(a))) if a.size else 0.0


def as_matrix(P) -> np.ndarray:
    return P.matrix if isinstance(P, Kernel) else np.asarray(P, dtype=float)


def validate_prob_vector(v, name: str = "vector") -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise errors.DimensionMismatchError(f"{name} must be 1-d")
    if not np.all(np.isfinite(v)):
        raise errors.NonFiniteEntryError(f"{name} has non-finite entries")
    if np.min(v) < -EPS_NEG:
        raise errors.NegativeEntryError(f"{name} has entry {np.min(v)} < -{EPS_NEG}")
    if abs(v.sum() - 1.0) > EPS_STOCH:
        raise errors.NotStochasticError(f"{name} sums to {v.sum()}, not 1")
    return np.clip(v, 0.0, None)


def cumulative(v) -> np.ndarray:
    """Running sums: out[x] = sum_{y <= x} v[y]."""
    return np.cumsum(np.asarray(v, dtype=float))


def total_variation(mu, nu) -> float:
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    return 0.5 * float(np.abs(mu - nu).sum())


def validate_kernel(matrix, require: str | None = None) -> Kernel:
    """Validate a square nonnegative matrix and classify its row-sum kind.

    Entries in [-EPS_NEG, 0) are clamped to zero.  ``require`` can demand
    "stochastic" or "substochastic"; violations raise instead of classifying.
    """
    m = np.array(as_matrix(matrix), dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise errors.NonSquareError(f"kernel must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise errors.NonFiniteEntryError("kernel has NaN or infinite entries")
    lo = float(m.min()) if m.size else 0.0
    if lo < -EPS_NEG:
        i, j = np.unravel_index(int(np.argmin(m)), m.shape)
        raise errors.NegativeEntryError(f"entry ({i},{j}) = {lo} below -{EPS_NEG}")
    m[m < 0] = 0.0

    sums = m.sum(axis=1)
    if require == "stochastic":
        if np.any(sums > 1.0 + EPS_STOCH):
            raise errors.RowSumExceedsOneError(
                f"row {int(np.argmax(sums))} sums to {sums.max()} > 1"
            )
        if np.any(sums < 1.0 - EPS_STOCH):
            raise errors.NotStochasticError(
                f"row {int(np.argmin(sums))} sums to {sums.min()} < 1"
            )
        kind = KernelKind.STOCHASTIC
    elif require == "substochastic":
        if np.any(sums > 1.0 + EPS_STOCH):
            raise errors.RowSumExceedsOneError(
                f"row {int(np.argmax(sums))} sums to {sums.max()} > 1"
            )
        kind = (
            KernelKind.STOCHASTIC
            if np.all(np.abs(sums - 1.0) <= EPS_STOCH)
            else KernelKind.STRICTLY_SUBSTOCHASTIC
        )
    elif require is None:
        if np.all(np.abs(sums - 1.0) <= EPS_STOCH):
            kind = KernelKind.STOCHASTIC
        elif np.all(sums <= 1.0 + EPS_STOCH):
            kind = KernelKind.STRICTLY_SUBSTOCHASTIC
        else:
            kind = KernelKind.GENERAL
    else:
        raise ValueError(f"unknown requirement {require!r}")
    return Kernel(matrix=m, kind=kind)


@dataclass(frozen=True)
class ClassDecomposition:
    """Communicating classes in an order compatible with the flow of mass.

    ``classes`` is a list of sorted state tuples such that any positive
    transition goes from a class to itself or to a *later* class; among
    unordered classes the one containing the smallest state comes first.
    ``stochastic_classes`` are the classes whose restricted block keeps full
    mass; ``absorbing_states`` are the single states with P(a, a) = 1.
    """

    classes: list = field(default_factory=list)
    stochastic_classes: list = field(default_factory=list)
    absorbing_states: list = field(default_factory=list)

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def class_of(self, state: int) -> int:
        for i, cls in enumerate(self.classes):
            if state in cls:
                return i
        raise KeyError(state)


def _strongly_connected_components(adj: list[list[int]]) -> list[list[int]]:
    """Iterative Tarjan; returns components in reverse topological order."""
    n = len(adj)
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    comps: list[list[int]] = []
    counter = 0
    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        while work:
            v, pi = work[-1]
            if pi == 0:
                index[v] = low[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            advanced = False
            while pi < len(adj[v]):
                w = adj[v][pi]
                pi += 1
                if index[w] == -1:
                    work[-1] = (v, pi)
                    work.append((w, 0))
                    advanced = True
                    break
                if on_stack[w]:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                comps.append(comp)
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
    return comps


def classify(P) -> ClassDecomposition:
    """Decompose the positivity pattern of P into communicating classes.

    Edges are entries above EPS_NEG.  The class list is a deterministic
    topological order of the condensation (mass flows forward); ties are
    broken by the smallest contained state.
    """
    m = as_matrix(P)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise errors.NonSquareError("classify needs a square matrix")
    n = m.shape[0]
    pos = m > EPS_NEG
    adj = [list(np.nonzero(pos[x])[0]) for x in range(n)]
    comps = _strongly_connected_components(adj)

    comp_id = [0] * n
    for ci, comp in enumerate(comps):
        for v in comp:
            comp_id[v] = ci
    k = len(comps)
    out_edges: list[set] = [set() for _ in range(k)]
    indeg = [0] * k
    for x in range(n):
        for y in adj[x]:
            a, b = comp_id[x], comp_id[y]
            if a != b and b not in out_edges[a]:
                out_edges[a].add(b)
                indeg[b] += 1
    # Kahn's algorithm with a min-heap keyed by the smallest member state
    heap = [(min(comps[c]), c) for c in range(k) if indeg[c] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        _, c = heapq.heappop(heap)
        order.append(c)
        for b in out_edges[c]:
            indeg[b] -= 1
            if indeg[b] == 0:
                heapq.heappush(heap, (min(comps[b]), b))
    if len(order) != k:
        raise errors.DualChainError("condensation is not acyclic (internal bug)")

    classes = [tuple(sorted(comps[c])) for c in order]
    stochastic_classes = []
    for cls in classes:
        idx = list(cls)
        block_sums = m[np.ix_(idx, idx)].sum(axis=1)
        if np.all(np.abs(block_sums - 1.0) <= EPS_STOCH):
            stochastic_classes.append(cls)
    absorbing = [
        cls[0]
        for cls in classes
        if len(cls) == 1
        and abs(m[cls[0], cls[0]] - 1.0) <= EPS_STOCH
        and m[cls[0]].sum() - m[cls[0], cls[0]] <= EPS_STOCH
    ]
    return ClassDecomposition(
        classes=classes,
        stochastic_classes=stochastic_classes,
        absorbing_states=sorted(absorbing),
    )


def is_irreducible(P) -> bool:
    return classify(P).n_classes == 1


def stationary(P) -> np.ndarray:
    """Unique stationary law of an irreducible stochastic kernel.

    Solves the transposed balance equations with one row replaced by the
    normalization, then polishes with iterative refinement until the
    residual ||pi' P - pi'|| is below RESID_TOL.
    """
    K = P if isinstance(P, Kernel) else validate_kernel(P)
    if K.kind is not KernelKind.STOCHASTIC:
        raise errors.NotStochasticError("stationary law needs a stochastic kernel")
    if not is_irreducible(K):
        raise errors.NotIrreducibleError("kernel is not irreducible")
    m = K.matrix
    n = K.n
    A = m.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    try:
        pi = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - pathological
        raise errors.SingularSystemError(str(exc)) from exc
    for _ in range(3):
        if sup_norm(pi @ m - pi) <= RESID_TOL and abs(pi.sum() - 1.0) <= EPS_STOCH:
            break
        r = A @ pi - b
        pi = pi - np.linalg.solve(A, r)
    pi = np.clip(pi, 0.0, None)
    pi = pi / pi.sum()
    if sup_norm(pi @ m - pi) > RESID_TOL:
        raise errors.SingularSystemError("stationary solve did not converge")
    return pi


def reversal(P, pi) -> Kernel:
    """Time reversal with respect to pi: out(x, y) = pi(y) P(y, x) / pi(x)."""
    m = as_matrix(P)
    pi = np.asarray(pi, dtype=float)
    if pi.shape[0] != m.shape[0]:
        raise errors.DimensionMismatchError("pi length does not match kernel")
    if np.min(pi) <= 0:
        raise errors.ZeroStationaryEntryError("reversal needs pi > 0 entrywise")
    back = (m * pi[:, None]).T / pi[:, None]
    return validate_kernel(back, require="stochastic")


def evolve(pi0, P, n: int) -> np.ndarray:
    """n-step push-forward pi0' P^n by repeated vector-matrix products."""
    m = as_matrix(P)
    v = np.asarray(pi0, dtype=float).copy()
    if v.shape[0] != m.shape[0]:
        raise errors.DimensionMismatchError("initial law length mismatch")
    if n < 0:
        raise ValueError("n must be nonnegative")
    for _ in range(n):
        v = v @ m
    return v


def hitting_probabilities(P, target) -> np.ndarray:
    """Probability of reaching ``target`` before the kernel kills the path.

    For substochastic kernels the missing row mass acts as killing.  States
    that cannot reach the target get probability zero; the linear solve is
    restricted to states with a positive path to the target so closed
    classes away from the target do not make the system singular.
    """
    m = as_matrix(P)
    n = m.shape[0]
    target = sorted(set(int(t) for t in target))
    if not target or any(t < 0 or t >= n for t in target):
        raise errors.DimensionMismatchError("target must be a nonempty state set")
    h = np.zeros(n)
    for t in target:
        h[t] = 1.0

    pos = m > EPS_NEG
    # reverse reachability from the target
    can_reach = np.zeros(n, dtype=bool)
    frontier = list(target)
    for t in target:
        can_reach[t] = True
    while frontier:
        y = frontier.pop()
        preds = np.nonzero(pos[:, y])[0]
        for x in preds:
            if not can_reach[x]:
                can_reach[x] = True
                frontier.append(int(x))

    solve_states = [x for x in range(n) if can_reach[x] and x not in target]
    if solve_states:
        idx = np.array(solve_states)
        A = np.eye(len(idx)) - m[np.ix_(idx, idx)]
        rhs = m[np.ix_(idx, np.array(target))].sum(axis=1)
        try:
            sol = np.linalg.solve(A, rhs)
        except np.linalg.LinAlgError as exc:
            raise errors.SingularSystemError(
                "restricted hitting system is singular"
            ) from exc
        if np.min(sol) < -1e-9 or np.max(sol) > 1 + 1e-9:
            raise errors.SingularSystemError("hitting solve left [0, 1]")
        h[idx] = np.clip(sol, 0.0, 1.0)
    return h


def check_harmonic(P, h) -> float:
    """Residual ||P h - h|| measuring how far h is from being harmonic."""
    m = as_matrix(P)
    h = np.asarray(h, dtype=float)
    if h.shape[0] != m.shape[0]:
        raise errors.DimensionMismatchError("harmonic vector length mismatch")
    return sup_norm(m @ h - h)
