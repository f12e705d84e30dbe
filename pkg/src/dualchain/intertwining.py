"""From duality to intertwining.

Given a stochastic irreducible P with stationary law pi, a dual function H
and an H-dual Phat, the pipeline produces

    phi = H' pi            (positive, harmonic for Phat)
    Ptilde = D_phi^{-1} Phat D_phi        (stochastic)
    Lambda = D_phi^{-1} H' D_pi           (stochastic link)
    K = H D_phi^{-1}

with Ptilde Lambda = Lambda Pback and K Ptilde' = P K, where Pback is the
time reversal of P.  Every identity is checked numerically and the harmonic
structure of phi is decomposed over the mass-conserving classes of Phat.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import errors, kernels
from .duals import DualFunction, verify_duality
from .kernels import as_matrix, sup_norm
from .tolerances import EPS_NEG, EPS_STOCH, RESID_TOL


@dataclass(frozen=True)
class IntertwiningResult:
    pi: np.ndarray
    phi: np.ndarray
    link: np.ndarray         # Lambda, stochastic
    p_tilde: np.ndarray      # stochastic
    K: np.ndarray
    back: np.ndarray         # time reversal of P
    class_constants: list    # [(states of each mass-conserving class, c_l)]
    diagnostics: dict = field(default_factory=dict)


def _stochastic_or_raise(m: np.ndarray, what: str) -> None:
    if np.min(m) < -EPS_NEG or sup_norm(m.sum(axis=1) - 1.0) > EPS_STOCH:
        raise errors.LinkNotStochasticError(f"{what} is not a stochastic kernel")


def build_intertwining(P, H: DualFunction, dual) -> IntertwiningResult:
    """Run the full pipeline and verify each of its claims.

    Raises when P is not stochastic irreducible, when the duality residual
    of (P, H, dual) exceeds tolerance, when phi fails to be positive, or
    when the link or transformed kernel misses stochasticity.  The returned
    diagnostics record the residuals of: the weighted duality identity
    Phat (H' D_pi) = (H' D_pi) Pback, the intertwining, the K-duality, the
    harmonicity of phi, the class-constant decomposition of phi, plus the
    absorbing-state matches and power-trace spectrum comparison.
    """
    PK = kernels.validate_kernel(P, require="stochastic")
    if not kernels.is_irreducible(PK):
        raise errors.NotIrreducibleError("pipeline requires irreducible P")
    m = PK.matrix
    Hm = H.matrix
    d = as_matrix(dual)
    resid = verify_duality(m, H, d)
    if resid["static"] > EPS_STOCH:
        raise errors.DualityResidualError(
            f"duality residual {resid['static']:.3g} too large"
        )

    pi = kernels.stationary(PK)
    back = kernels.reversal(PK, pi).matrix
    phi = Hm.T @ pi
    if np.min(phi) <= 0:
        raise errors.HarmonicNotPositiveError("phi = H' pi has a nonpositive entry")
    harmonic_resid = sup_norm(d @ phi - phi)
    if harmonic_resid > RESID_TOL:
        raise errors.DualityResidualError(
            f"phi fails harmonicity for the dual: {harmonic_resid:.3g}"
        )

    weighted = Hm.T * pi[None, :]          # H' D_pi
    link = weighted / phi[:, None]         # Lambda
    p_tilde = d * (phi[None, :] / phi[:, None])
    K = Hm / phi[None, :]
    _stochastic_or_raise(link, "Lambda")
    _stochastic_or_raise(p_tilde, "Ptilde")

    diagnostics = {
        "duality": resid,
        "weighted_duality": sup_norm(d @ weighted - weighted @ back),
        "intertwining": sup_norm(p_tilde @ link - link @ back),
        "k_duality": sup_norm(K @ p_tilde.T - m @ K),
        "phi_harmonic": harmonic_resid,
    }

    dual_kind = kernels.validate_kernel(d).kind
    dec = kernels.classify(d)
    if dual_kind is kernels.KernelKind.STRICTLY_SUBSTOCHASTIC:
        # a strict mass loser cannot be irreducible and keep phi harmonic
        diagnostics["dual_irreducible"] = kernels.is_irreducible(d)
        if diagnostics["dual_irreducible"]:
            raise errors.DualChainError(
                "strictly substochastic dual with positive harmonic vector "
                "cannot be irreducible"
            )
    if not dec.stochastic_classes:
        raise errors.DualChainError("dual has no mass-conserving class")

    class_constants = []
    recomposed = np.zeros_like(phi)
    for cls in dec.stochastic_classes:
        vals = phi[list(cls)]
        c = float(vals.mean())
        if np.max(np.abs(vals - c)) > RESID_TOL:
            raise errors.DualChainError(
                f"phi is not constant on mass-conserving class {cls}"
            )
        h = kernels.hitting_probabilities(d, list(cls))
        recomposed += c * h
        class_constants.append((cls, c))
    diagnostics["phi_decomposition"] = sup_norm(recomposed - phi)

    if dual_kind is kernels.KernelKind.STOCHASTIC and kernels.is_irreducible(d):
        diagnostics["phi_constant"] = float(np.ptp(phi))
        diagnostics["p_tilde_equals_dual"] = sup_norm(p_tilde - d)
    if len(dec.stochastic_classes) == 1:
        c = class_constants[0][1]
        h = kernels.hitting_probabilities(d, list(dec.stochastic_classes[0]))
        diagnostics["doob"] = sup_norm(phi / c - h)

    abs_dual = set(_absorbing_states(d))
    abs_tilde = set(_absorbing_states(p_tilde))
    diagnostics["absorbing_match"] = abs_dual == abs_tilde
    if not diagnostics["absorbing_match"]:
        raise errors.DualChainError(
            "absorbing states of the dual and its stochastic transform differ"
        )
    diagnostics["absorbing_rows"] = {
        a: float(sup_norm(link[a] - pi)) for a in sorted(abs_tilde)
    }
    diagnostics["trace_comparison"] = spectrum_equivalence(m, p_tilde)

    return IntertwiningResult(
        pi=pi,
        phi=phi,
        link=link,
        p_tilde=p_tilde,
        K=K,
        back=back,
        class_constants=class_constants,
        diagnostics=diagnostics,
    )


def _absorbing_states(m: np.ndarray) -> list[int]:
    return [
        x
        for x in range(m.shape[0])
        if abs(m[x, x] - 1.0) <= EPS_STOCH
        and np.all(np.delete(m[x], x) <= EPS_NEG)
    ]


def link_row_check(link, pi, a_tilde: int, p_tilde) -> float:
    """Residual of pi' = e_a' Lambda at an absorbing state a of Ptilde."""
    L = as_matrix(link)
    pt = as_matrix(p_tilde)
    if a_tilde not in _absorbing_states(pt):
        raise errors.NotAbsorbingError(f"state {a_tilde} is not absorbing")
    r = sup_norm(L[a_tilde] - np.asarray(pi, dtype=float))
    if r > RESID_TOL:
        raise errors.IntertwiningResidualError(
            f"link row {a_tilde} deviates from pi by {r:.3g}"
        )
    return r


def constant_column_check(H, dual=None) -> list[tuple[int, float]]:
    """Strictly positive constant columns of H; each such column index is an
    absorbing state of any attached dual kernel."""
    Hm = H.matrix if isinstance(H, DualFunction) else np.asarray(H, dtype=float)
    out = []
    for j in range(Hm.shape[1]):
        col = Hm[:, j]
        if col[0] > EPS_NEG and np.max(np.abs(col - col[0])) <= RESID_TOL:
            out.append((j, float(col[0])))
    if dual is not None:
        d = as_matrix(dual)
        absorbing = set(_absorbing_states(d))
        for j, _ in out:
            if j not in absorbing:
                raise errors.NotAbsorbingError(
                    f"constant column {j} is not absorbing in the dual"
                )
    return out


def duality_from_intertwining(p_tilde, link, pi, p_back):
    """Reverse direction: an intertwining Ptilde Lambda = Lambda Pback with
    stochastic link yields the dual pair H = D_pi^{-1} Lambda', Phat =
    Ptilde, for which phi = H' pi is the all-ones vector."""
    pt = as_matrix(p_tilde)
    L = as_matrix(link)
    pb = as_matrix(p_back)
    piv = np.asarray(pi, dtype=float)
    r = sup_norm(pt @ L - L @ pb)
    if r > RESID_TOL:
        raise errors.IntertwiningResidualError(
            f"intertwining residual {r:.3g} too large"
        )
    Hm = L.T / piv[:, None]
    H = DualFunction(Hm, "custom", {"origin": "intertwining"})
    # P = D_pi^{-1} Pback' D_pi is the kernel this H-dual pairs with
    P = pb.T * (piv[None, :] / piv[:, None])
    resid = verify_duality(P, H, pt)
    if resid["static"] > RESID_TOL:
        raise errors.DualityResidualError(
            f"reconstructed duality residual {resid['static']:.3g}"
        )
    phi = Hm.T @ piv
    if sup_norm(phi - 1.0) > RESID_TOL:
        raise errors.DualityResidualError("reconstructed phi is not the ones vector")
    return H, pt


def spectrum_equivalence(P, p_tilde, m_max: int | None = None) -> dict:
    """Power traces tr(P^m) vs tr(Ptilde^m), m = 1..m_max (default n).

    Agreement of the first n power traces pins the characteristic
    polynomial, hence equality of spectra with multiplicities, without a
    nonsymmetric eigensolver.
    """
    a = as_matrix(P)
    b = as_matrix(p_tilde)
    if a.shape != b.shape:
        raise errors.DimensionMismatchError("size mismatch in trace comparison")
    n = a.shape[0]
    if m_max is None:
        m_max = n
    ta, tb = [], []
    pa = np.eye(n)
    pb = np.eye(n)
    for _ in range(m_max):
        pa = pa @ a
        pb = pb @ b
        ta.append(float(np.trace(pa)))
        tb.append(float(np.trace(pb)))
    ta = np.array(ta)
    tb = np.array(tb)
    dev = float(np.max(np.abs(ta - tb))) if m_max else 0.0
    return {
        "traces": ta,
        "traces_tilde": tb,
        "max_deviation": dev,
        "equal": bool(dev <= 1e-8 * n),
    }
