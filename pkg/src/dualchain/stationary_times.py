"""Separation distance, sharp strong-stationary structure, absorption laws.

Three independent routes compute the law of the absorption time of the
intertwined chain: exact matrix powers, the spectral product formula

    E(u^T) = prod_k (1 - t_k) u / (1 - t_k u)

expanded by convolving the signed factor series, and the birth-death
first-passage recurrences for mean, variance and probability generating
functions.  Separation obeys sep(pi_n, pi) <= P(T > n) with equality in the
presence of a witness state d with Lambda e_d = pi(d) e_boundary.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog
from scipy.signal import fftconvolve, lfilter

from . import errors, kernels
from .chains import BDParams
from .kernels import as_matrix, sup_norm, total_variation
from .spectra import Spectrum
from .tolerances import EPS_NEG, EPS_STOCH, RESID_TOL

TAIL_TARGET = 1e-12
TAIL_LIMIT = 1e-9
N_MAX_CAP = 10**6


def separation(mu, pi) -> float:
    """sep(mu, pi) = max_y (1 - mu(y)/pi(y)); dominates total variation."""
    mu = np.asarray(mu, dtype=float)
    pi = np.asarray(pi, dtype=float)
    if np.min(pi) <= 0:
        raise errors.ZeroStationaryEntryError("separation needs pi > 0")
    s = float(np.max(1.0 - mu / pi))
    if s < total_variation(mu, pi) - 1e-12:  # pragma: no cover - identity
        raise errors.DualChainError("separation fell below total variation")
    return s


def admissible_initials(link, pi0, pi=None) -> dict:
    """Solve pi_tilde0' Lambda = pi0' under nonnegativity.

    A direct dense solve (least squares for singular links) is tried first;
    when its particular solution has negative mass, a linear-programming
    feasibility pass searches the affine solution set for a nonnegative
    point.  Raises NotAdmissibleError when none exists.  The report also
    carries a left probability eigenvector of the link, the point rows
    (e_b' Lambda = e_c'), and, when ``pi`` is supplied, the cumulative
    closed-form candidate

        pi_tilde0(x) = pi_cum(x) (pi0(x)/pi(x) - pi0(x+1)/pi(x+1))

    which is valid exactly when the ratio pi0/pi is nonincreasing.
    """
    L = as_matrix(link)
    pi0 = kernels.validate_prob_vector(pi0, "pi0")
    n = L.shape[0]
    if pi0.shape[0] != n:
        raise errors.DimensionMismatchError("pi0 length mismatch")

    sol, *_ = np.linalg.lstsq(L.T, pi0, rcond=None)
    residual = sup_norm(L.T @ sol - pi0)
    method = "solve"
    if residual > RESID_TOL:
        raise errors.NotAdmissibleError(
            f"pi0 is not in the row span of the link (residual {residual:.3g})"
        )
    if np.min(sol) < -EPS_NEG:
        lp = linprog(
            c=np.zeros(n),
            A_eq=L.T,
            b_eq=pi0,
            bounds=[(0, None)] * n,
            method="highs",
        )
        if not lp.success:
            raise errors.NotAdmissibleError(
                f"no nonnegative solution; unconstrained minimum {sol.min():.3g}"
            )
        sol = lp.x
        residual = sup_norm(L.T @ sol - pi0)
        method = "lp"
    sol = np.clip(sol, 0.0, None)

    vals, vecs = np.linalg.eig(L.T)
    j = int(np.argmin(np.abs(vals - 1.0)))
    v = np.real(vecs[:, j])
    v = np.clip(v / v.sum(), 0.0, None)
    pi_link = v / v.sum()

    point_pairs = []
    for b in range(n):
        c = int(np.argmax(L[b]))
        if abs(L[b, c] - 1.0) <= RESID_TOL and L[b].sum() - L[b, c] <= RESID_TOL:
            point_pairs.append((b, c))

    out = {
        "pi_tilde0": sol,
        "residual": residual,
        "method": method,
        "pi_link": pi_link,
        "point_pairs": point_pairs,
    }
    if pi is not None:
        pi = np.asarray(pi, dtype=float)
        ratio = pi0 / pi
        pic = np.cumsum(pi)
        rpad = np.concatenate([ratio, [0.0]])
        candidate = pic * (rpad[:-1] - rpad[1:])
        out["closed_form"] = {
            "value": candidate,
            "ratio_nonincreasing": bool(np.all(np.diff(ratio) <= EPS_NEG)),
            "link_residual": sup_norm(candidate @ L - pi0),
        }
    return out


def sharpness_witness(link, pi, boundary: int, H=None) -> dict:
    """States d with Lambda e_d = pi(d) e_boundary (tolerance 1e-10).

    When H is supplied, also lists the rows of H supported on a single
    column (e_d' H = c e_a'), the dual-side form of the same condition.
    """
    L = as_matrix(link)
    pi = np.asarray(pi, dtype=float)
    n = L.shape[0]
    witnesses = []
    for d in range(n):
        target = np.zeros(n)
        target[boundary] = pi[d]
        if sup_norm(L[:, d] - target) <= RESID_TOL:
            witnesses.append(d)
    out = {
        "witnesses": witnesses,
        "degenerate_identity": bool(sup_norm(L - np.eye(n)) <= RESID_TOL),
    }
    if H is not None:
        Hm = H.matrix if hasattr(H, "matrix") else np.asarray(H, dtype=float)
        rows = []
        for d in range(Hm.shape[0]):
            a = int(np.argmax(np.abs(Hm[d])))
            if Hm[d, a] > EPS_NEG and np.abs(Hm[d]).sum() - abs(Hm[d, a]) <= RESID_TOL:
                rows.append((d, a, float(Hm[d, a])))
        out["h_point_rows"] = rows
    return out


@dataclass(frozen=True)
class SharpnessReport:
    table: np.ndarray        # columns: n, sep, survival
    max_gap: float
    witness: int | None
    boundary: int
    admissibility_residual: float
    sharp: bool


def verify_sharpness(P, p_tilde, link, pi0, pi_tilde0, n_max: int = 100,
                     boundary: int | None = None) -> SharpnessReport:
    """Tabulate sep(pi_n, pi) against P(T_boundary > n).

    ``P`` must be the kernel the link intertwines with p_tilde (for a
    reversible chain that is the chain itself; in general its reversal).
    The inequality sep <= survival is asserted at every n once the boundary
    row of the link equals pi; equality is asserted when a witness state
    exists.
    """
    m = as_matrix(P)
    pt = as_matrix(p_tilde)
    L = as_matrix(link)
    pi0 = kernels.validate_prob_vector(pi0, "pi0")
    pt0 = kernels.validate_prob_vector(pi_tilde0, "pi_tilde0")
    adm = sup_norm(pt0 @ L - pi0)
    if adm > RESID_TOL:
        raise errors.NotAdmissibleError(f"initial laws not linked: {adm:.3g}")
    r = sup_norm(pt @ L - L @ m)
    if r > RESID_TOL:
        raise errors.IntertwiningResidualError(f"link residual {r:.3g}")
    pi = kernels.stationary(m)

    candidates = [
        a
        for a in range(pt.shape[0])
        if abs(pt[a, a] - 1.0) <= EPS_STOCH and sup_norm(L[a] - pi) <= 1e-9
    ]
    if boundary is None:
        if not candidates:
            raise errors.NotAbsorbingError("no absorbing state carries pi in the link")
        boundary = candidates[-1]
    elif boundary not in candidates:
        raise errors.NotAbsorbingError(
            f"state {boundary} is not an absorbing pi-row of the link"
        )

    wit = sharpness_witness(L, pi, boundary)
    witness = wit["witnesses"][0] if wit["witnesses"] else None

    rows = []
    mu = pi0.copy()
    nu = pt0.copy()
    for n in range(n_max + 1):
        sep = separation(mu, pi)
        survival = float(1.0 - nu[boundary])
        rows.append((n, sep, survival))
        if sep > survival + 1e-9:
            raise errors.DualChainError(
                f"separation exceeded survival at n={n}: {sep} > {survival}"
            )
        mu = mu @ m
        nu = nu @ pt
    table = np.array(rows)
    max_gap = float(np.max(np.abs(table[:, 1] - table[:, 2])))
    sharp = witness is not None
    if sharp and max_gap > 1e-9:
        raise errors.DualChainError(
            f"witness present but sharp equality fails (gap {max_gap:.3g})"
        )
    return SharpnessReport(
        table=table,
        max_gap=max_gap,
        witness=witness,
        boundary=boundary,
        admissibility_residual=adm,
        sharp=sharp,
    )


@dataclass(frozen=True)
class AbsorptionStats:
    """Law of the absorption time truncated at n_max.

    pmf[n] = P(T = n) for n = 0..n_max; survival[n] = P(T > n); the mass
    beyond n_max is ``truncation_mass``; mean and variance include tail
    corrections (matrix route) or are closed-form exact (other routes).
    """

    pmf: np.ndarray
    survival: np.ndarray
    mean: float
    variance: float
    source: str
    truncation_mass: float = 0.0

    def __post_init__(self):
        p = np.asarray(self.pmf, dtype=float)
        s = np.asarray(self.survival, dtype=float)
        object.__setattr__(self, "pmf", p)
        object.__setattr__(self, "survival", s)
        p.setflags(write=False)
        s.setflags(write=False)
        if np.min(p) < -1e-12:
            raise errors.DualChainError(f"pmf has negative entry {p.min()}")
        if abs(p.sum() + self.truncation_mass - 1.0) > 1e-9:
            raise errors.DualChainError("pmf plus truncation mass misses 1")
        if np.any(np.diff(s) > 1e-12):
            raise errors.DualChainError("survival is not nonincreasing")

    @property
    def n_max(self) -> int:
        return self.pmf.shape[0] - 1


def _tail_corrections(survival: np.ndarray):
    """Geometric continuation of the survival sequence past its last entry:
    returns (extra E, extra second-moment sum) assuming P(T>n) decays with
    the last observed ratio."""
    s = survival
    n = s.shape[0] - 1
    if s[-1] <= 0 or n < 1 or s[-2] <= 0:
        return 0.0, 0.0
    rho = min(s[-1] / s[-2], 1.0 - 1e-12)
    g = rho / (1.0 - rho)
    extra_e = s[-1] * g
    extra_m2 = s[-1] * ((2 * n + 1) * g + 2 * rho / (1.0 - rho) ** 2)
    return float(extra_e), float(extra_m2)


def absorption_exact(p_tilde, start, boundary: int, n_max: int | None = None) -> AbsorptionStats:
    """Law of the first arrival at an absorbing state by matrix powers.

    n_max defaults to the first n with survival below 1e-12 (capped at
    10^6).  If the survivor mass still exceeds 1e-9 at the cap the
    truncation is refused.
    """
    pt = as_matrix(p_tilde)
    start = kernels.validate_prob_vector(start, "start")
    n = pt.shape[0]
    if boundary < 0 or boundary >= n:
        raise errors.DimensionMismatchError("boundary out of range")
    if abs(pt[boundary, boundary] - 1.0) > EPS_STOCH:
        raise errors.NotAbsorbingError(f"state {boundary} is not absorbing")

    cap = min(n_max, N_MAX_CAP) if n_max is not None else N_MAX_CAP
    auto = n_max is None
    pmf = [float(start[boundary])]
    survival = [1.0 - pmf[0]]
    nu = start
    arrived = pmf[0]
    while True:
        steps = len(pmf) - 1
        if survival[-1] <= (TAIL_TARGET if auto else -1.0) or steps >= cap:
            break
        nu = nu @ pt
        new_arrived = float(nu[boundary])
        pmf.append(max(new_arrived - arrived, 0.0))
        arrived = new_arrived
        survival.append(1.0 - arrived)
    pmf = np.array(pmf)
    survival = np.array(survival)
    trunc = float(survival[-1])
    if trunc > TAIL_LIMIT:
        raise errors.TruncationTooCoarseError(
            f"survivor mass {trunc:.3g} at n_max={len(pmf) - 1}"
        )
    extra_e, extra_m2 = _tail_corrections(survival)
    mean = float(survival.sum()) + extra_e
    m2 = float(((2 * np.arange(survival.shape[0]) + 1) * survival).sum()) + extra_m2
    return AbsorptionStats(
        pmf=pmf,
        survival=survival,
        mean=mean,
        variance=m2 - mean**2,
        source="matrix-power",
        truncation_mass=trunc,
    )


def _convolve(a: np.ndarray, b: np.ndarray, length: int) -> np.ndarray:
    if length <= 4096:
        return np.convolve(a, b)[:length]
    out = fftconvolve(a, b)[:length]
    return np.where(np.abs(out) < 1e-300, 0.0, out)


def absorption_spectral(spec: Spectrum, n_max: int | None = None) -> AbsorptionStats:
    """Absorption law from the eigenvalues alone.

    The generating-function factors (1-t_k)u/(1-t_k u) expand into the
    signed series (1-t_k) t_k^{n-1}; their convolution is the exact pmf for
    any sign pattern (for nonnegative spectra this is the independent-
    geometric-sum representation; factors with t_k < 0 contribute the
    Bernoulli-shift correction).  Moments come from the closed sums
    E = sum 1/(1-t_k) and Var = sum t_k/(1-t_k)^2, and the variance bound
    Var <= E/(1-t_1) is asserted.  Survival for n >= N-1 is cross-checked
    against the partial-fraction expansion when the eigenvalue gaps allow.
    """
    t = spec.eigenvalues[1:]
    N = t.shape[0]
    if N == 0:
        return AbsorptionStats(
            pmf=np.array([1.0]), survival=np.array([0.0]),
            mean=0.0, variance=0.0, source="spectral",
        )
    if np.any(t >= 1.0) or np.any(t <= -1.0):
        raise errors.SpectrumError("spectral route needs t_k in (-1, 1) for k >= 1")

    mean = float(np.sum(1.0 / (1.0 - t)))
    variance = float(np.sum(t / (1.0 - t) ** 2))
    gap = float(1.0 - t[0])
    if variance > mean / gap + 1e-9:
        raise errors.SpectrumError("variance bound E/(1-t_1) violated")

    if n_max is None:
        tbar = float(np.max(np.abs(t)))
        if tbar <= 0:
            n_max = N + 1
        else:
            n_max = min(int(np.log(TAIL_TARGET / N) / np.log(tbar)) + N + 2, N_MAX_CAP)
        n_max = max(n_max, N + 1)
    length = n_max + 1

    pmf = np.zeros(length)
    pmf[0] = 1.0
    ns = np.arange(length)
    for tk in t:
        factor = np.zeros(length)
        factor[1:] = (1.0 - tk) * tk ** (ns[1:] - 1)
        pmf = _convolve(pmf, factor, length)
    pmf = np.where((pmf < 0) & (pmf > -1e-12), 0.0, pmf)
    survival = 1.0 - np.cumsum(pmf)
    survival = np.maximum(survival, 0.0)

    diffs = np.abs(t[:, None] - t[None, :])[~np.eye(N, dtype=bool)]
    if N == 1 or float(diffs.min()) >= 1e-8:
        coef = np.array(
            [np.prod((1.0 - np.delete(t, l)) / (t[l] - np.delete(t, l)))
             for l in range(N)]
        )
        check = np.arange(max(N - 1, 0), min(length, max(N - 1, 0) + 50))
        pf = np.array([float(np.sum(coef * t**n)) for n in check])
        if sup_norm(pf - survival[check]) > 1e-9:
            raise errors.SpectrumError("partial-fraction tail disagrees with pmf")

    return AbsorptionStats(
        pmf=pmf,
        survival=survival,
        mean=mean,
        variance=variance,
        source="spectral",
        truncation_mass=float(survival[-1]),
    )


def absorption_recurrence(params: BDParams, n_max: int | None = None) -> AbsorptionStats:
    """First-passage route for a birth-death chain run from 0 up to N.

    The passage pieces S_y (time from y to y+1) satisfy
    E(S_y) = 1/p_y + (q_y/p_y) E(S_{y-1}) and Var(S_y) = (q_y/p_y)
    Var(S_{y-1}) + A_y; their generating functions obey
    f_y(u) = p_y u / (1 - r_y u - q_y u f_{y-1}(u)), expanded here as
    rational power series; the total time is the independent sum of the
    pieces.
    """
    N = params.N
    if N == 0:
        return AbsorptionStats(
            pmf=np.array([1.0]), survival=np.array([0.0]),
            mean=0.0, variance=0.0, source="recurrence",
        )
    p, q, r = params.p, params.q, params.r
    if np.any(p[:N] <= 0):
        raise errors.ZeroUpProbabilityError("needs p_y > 0 for y < N")

    ES = np.zeros(N)
    VS = np.zeros(N)
    ES[0] = 1.0 / p[0]
    VS[0] = (1.0 - p[0]) / p[0] ** 2
    for y in range(1, N):
        ES[y] = 1.0 / p[y] + (q[y] / p[y]) * ES[y - 1]
        A = (
            (p[y] - 1.0) / p[y] ** 2
            + 2.0 * (1.0 - p[y]) / p[y] * ES[y]
            + 2.0 * q[y] * (p[y] - 1.0) / p[y] ** 2 * ES[y - 1]
            + 2.0 * q[y] / p[y] * ES[y - 1] * ES[y]
            - q[y] * (q[y] - p[y]) / p[y] ** 2 * ES[y - 1] ** 2
        )
        VS[y] = (q[y] / p[y]) * VS[y - 1] + A
    mean = float(ES.sum())
    variance = float(VS.sum())

    if n_max is None:
        n_max = int(mean + 1)
        pmf = None
        while True:
            pmf, trunc = _recurrence_pmf(params, n_max)
            if trunc <= TAIL_TARGET or n_max >= N_MAX_CAP:
                break
            n_max = min(n_max * 2, N_MAX_CAP)
    else:
        pmf, trunc = _recurrence_pmf(params, n_max)
    if trunc > TAIL_LIMIT:
        raise errors.TruncationTooCoarseError(
            f"survivor mass {trunc:.3g} at n_max={n_max}"
        )
    survival = np.maximum(1.0 - np.cumsum(pmf), 0.0)
    return AbsorptionStats(
        pmf=pmf,
        survival=survival,
        mean=mean,
        variance=variance,
        source="recurrence",
        truncation_mass=float(trunc),
    )


def _recurrence_pmf(params: BDParams, n_max: int):
    N = params.N
    p, q, r = params.p, params.q, params.r
    length = n_max + 1
    impulse = np.zeros(length)
    impulse[0] = 1.0
    total = impulse
    f_prev = None
    for y in range(N):
        num = np.zeros(length)
        num[1] = p[y]
        den = np.zeros(length)
        den[0] = 1.0
        den[1] = -r[y]
        if y > 0:
            den[2:] -= q[y] * f_prev[1:-1]
        f_y = lfilter(num, den, impulse)
        total = _convolve(total, f_y, length)
        f_prev = f_y
    return total, float(max(1.0 - total.sum(), 0.0))


def cutoff_report(family, N_values) -> dict:
    """Sweep a chain family and tabulate the cutoff indicators.

    ``family`` maps N to either BDParams or a Spectrum.  Columns per N:
    mean E, variance, Var/E^2, and the product (1 - t_1) E whose growth
    along the list is the sufficient cutoff signal.
    """
    from .spectra import bd_spectrum

    rows = []
    for N in N_values:
        obj = family(N)
        spec = obj if isinstance(obj, Spectrum) else bd_spectrum(obj)
        t = spec.eigenvalues[1:]
        E = float(np.sum(1.0 / (1.0 - t)))
        V = float(np.sum(t / (1.0 - t) ** 2))
        gapE = spec.gap * E
        rows.append({
            "N": int(N),
            "mean": E,
            "variance": V,
            "relative_variance": V / E**2 if E > 0 else 0.0,
            "gap_times_mean": gapE,
        })
    g = [row["gap_times_mean"] for row in rows]
    growing = all(b > a * (1 + 1e-9) for a, b in zip(g, g[1:])) and len(g) > 1
    return {"rows": rows, "cutoff_flag": bool(growing)}
