import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualchain import errors
from dualchain.chains import (
    BDParams,
    bd_kernel,
    bd_params_from_kernel,
    make_bd,
    moran_kernel,
    mutation_bias,
    reflected_walk_params,
)
from dualchain.duals import dual_via_solve, hypergeometric_function, siegmund_dual, siegmund_function
from dualchain.intertwining import build_intertwining
from dualchain.samplers import random_monotone_bd
from dualchain.spectra import Spectrum, bd_spectrum, moran_mutation_spectrum
from dualchain.stationary_times import (
    absorption_exact,
    absorption_recurrence,
    absorption_spectral,
    admissible_initials,
    cutoff_report,
    separation,
    sharpness_witness,
    verify_sharpness,
)


def test_separation_basics():
    pi = np.array([0.25, 0.75])
    assert separation(pi, pi) == pytest.approx(0.0, abs=1e-15)
    assert separation(np.array([1.0, 0.0]), pi) == pytest.approx(1.0)
    with pytest.raises(errors.ZeroStationaryEntryError):
        separation(pi, np.array([1.0, 0.0]))


def test_admissible_initials_solve_path(pipeline_b):
    _, res = pipeline_b
    out = admissible_initials(res.link, np.array([1.0, 0.0, 0.0]), pi=res.pi)
    assert out["method"] == "solve"
    np.testing.assert_allclose(out["pi_tilde0"], [1.0, 0.0, 0.0], atol=1e-12)
    assert out["residual"] <= 1e-12
    assert (0, 0) in out["point_pairs"]
    cf = out["closed_form"]
    assert cf["ratio_nonincreasing"]
    np.testing.assert_allclose(cf["value"], out["pi_tilde0"], atol=1e-12)
    assert cf["link_residual"] <= 1e-12


def test_admissible_initials_closed_form_uniform(pipeline_b):
    _, res = pipeline_b
    pi0 = np.full(3, 1 / 3)
    out = admissible_initials(res.link, pi0, pi=res.pi)
    cf = out["closed_form"]
    assert cf["ratio_nonincreasing"]
    assert cf["link_residual"] <= 1e-12
    np.testing.assert_allclose(cf["value"] @ res.link, pi0, atol=1e-12)


def test_admissible_initials_lp_fallback():
    # singular link whose least-squares solution is negative although a
    # nonnegative one exists
    L = np.array([[1.0, 0.0, 0.0], [0.5, 0.2, 0.3], [0.0, 0.4, 0.6]])
    a = np.array([0.9, 0.05, 0.05])
    out = admissible_initials(L, a @ L)
    assert out["method"] == "lp"
    assert np.min(out["pi_tilde0"]) >= 0
    assert out["residual"] <= 1e-9


def test_admissible_initials_rejects_outside_span():
    L = np.array([[0.5, 0.5], [0.5, 0.5]])
    with pytest.raises(errors.NotAdmissibleError):
        admissible_initials(L, np.array([1.0, 0.0]))


def test_admissible_initials_rejects_outside_hull():
    L = np.array([[1.0, 0.0], [0.5, 0.5]])
    with pytest.raises(errors.NotAdmissibleError):
        admissible_initials(L, np.array([0.2, 0.8]))


def test_sharpness_witness_siegmund(pipeline_b):
    _, res = pipeline_b
    wit = sharpness_witness(res.link, res.pi, boundary=2, H=siegmund_function(2))
    assert wit["witnesses"] == [2]
    assert not wit["degenerate_identity"]
    assert (2, 2, 1.0) in wit["h_point_rows"]


def test_verify_sharpness_chain_a(pipeline_a):
    P, res = pipeline_a
    rep = verify_sharpness(
        P, res.p_tilde, res.link, np.array([1.0, 0.0]), np.array([1.0, 0.0]), n_max=30
    )
    assert rep.sharp and rep.witness == 1 and rep.boundary == 1
    assert rep.max_gap <= 1e-12
    # sep(n) = survival(n) = 2^{-n} for this chain
    np.testing.assert_allclose(rep.table[:, 1], 0.5 ** rep.table[:, 0], atol=1e-12)
    np.testing.assert_allclose(rep.table[:, 2], 0.5 ** rep.table[:, 0], atol=1e-12)


def test_verify_sharpness_chain_b(pipeline_b):
    P, res = pipeline_b
    rep = verify_sharpness(
        P,
        res.p_tilde,
        res.link,
        np.array([1.0, 0.0, 0.0]),
        np.array([1.0, 0.0, 0.0]),
        n_max=80,
    )
    assert rep.sharp and rep.witness == 2
    assert rep.max_gap <= 1e-9


def test_verify_sharpness_moran_hypergeometric():
    N = 5
    params = moran_kernel(N, mutation_bias(0.3, 0.2, N))
    P = bd_kernel(params)
    H = hypergeometric_function(N)
    res = build_intertwining(P, H, dual_via_solve(P, H).dual)
    pi0 = np.zeros(N + 1)
    pi0[0] = 1.0  # hidden start N is linked to the observed start 0
    pt0 = np.zeros(N + 1)
    pt0[N] = 1.0
    rep = verify_sharpness(P, res.p_tilde, res.link, pi0, pt0, n_max=150)
    assert rep.boundary == 0
    assert rep.witness == N
    assert rep.sharp
    assert rep.max_gap <= 1e-9


def test_verify_sharpness_rejects_bad_boundary(pipeline_a):
    P, res = pipeline_a
    with pytest.raises(errors.NotAbsorbingError):
        verify_sharpness(
            P, res.p_tilde, res.link,
            np.array([1.0, 0.0]), np.array([1.0, 0.0]), boundary=0,
        )


def test_absorption_exact_chain_a_geometric(pipeline_a):
    _, res = pipeline_a
    stats = absorption_exact(res.p_tilde, np.array([1.0, 0.0]), boundary=1)
    assert stats.mean == pytest.approx(2.0, abs=1e-9)
    assert stats.variance == pytest.approx(2.0, abs=1e-8)
    n = np.arange(1, 20)
    np.testing.assert_allclose(stats.pmf[1:20], 0.5**n, atol=1e-12)
    assert stats.source == "matrix-power"


def test_absorption_three_routes_chain_b(pipeline_b, chain_b):
    _, res = pipeline_b
    exact = absorption_exact(res.p_tilde, np.array([1.0, 0.0, 0.0]), boundary=2)
    spectral = absorption_spectral(bd_spectrum(chain_b), n_max=exact.n_max)
    recurrence = absorption_recurrence(
        bd_params_from_kernel(res.p_tilde), n_max=exact.n_max
    )
    for stats in (exact, spectral, recurrence):
        assert stats.mean == pytest.approx(20 / 3, rel=1e-9)
        assert stats.variance == pytest.approx(190 / 9, rel=1e-8)
    np.testing.assert_allclose(exact.pmf, spectral.pmf, atol=1e-10)
    np.testing.assert_allclose(exact.pmf, recurrence.pmf, atol=1e-10)


def test_absorption_spectral_negative_eigenvalue():
    # reflected walk p = q = 1/2, N = 2: spectrum (1, 1/2, -1/2); the
    # absorption law lives on even steps with pmf (3/4) 4^{-m} at n = 2m+2
    stats = absorption_spectral(Spectrum(np.array([1.0, 0.5, -0.5])), n_max=60)
    assert stats.mean == pytest.approx(8 / 3, abs=1e-12)
    assert stats.variance == pytest.approx(16 / 9, abs=1e-12)
    m = np.arange(0, 25)
    np.testing.assert_allclose(stats.pmf[2 * m + 2], 0.75 * 0.25**m, atol=1e-12)
    np.testing.assert_allclose(stats.pmf[2 * m + 1], 0.0, atol=1e-12)


def test_absorption_spectral_matches_pipeline_negative_case():
    params = reflected_walk_params(2, 0.5, 0.5)
    P = bd_kernel(params)
    res = build_intertwining(P, siegmund_function(2), siegmund_dual(P).dual)
    exact = absorption_exact(res.p_tilde, np.array([1.0, 0.0, 0.0]), boundary=2)
    spectral = absorption_spectral(bd_spectrum(params), n_max=exact.n_max)
    np.testing.assert_allclose(exact.pmf, spectral.pmf, atol=1e-12)


def test_bernoulli_shift_identity():
    # subtracting an independent Bernoulli(2/3) from the (1/2, -1/2) law
    # leaves an exact geometric: P(T - B = n) = 2^{-n}, n >= 1
    stats = absorption_spectral(Spectrum(np.array([1.0, 0.5, -0.5])), n_max=60)
    pmf = stats.pmf
    shifted = pmf[1:40] * (1 / 3) + pmf[2:41] * (2 / 3)
    np.testing.assert_allclose(shifted, 0.5 ** np.arange(1, 40), atol=1e-12)


def test_absorption_spectral_rejects_unit_eigenvalue():
    with pytest.raises(errors.SpectrumError):
        absorption_spectral(Spectrum(np.array([1.0, -1.0])))


def test_absorption_exact_truncation_guard(pipeline_b):
    _, res = pipeline_b
    with pytest.raises(errors.TruncationTooCoarseError):
        absorption_exact(res.p_tilde, np.array([1.0, 0.0, 0.0]), boundary=2, n_max=3)
    with pytest.raises(errors.NotAbsorbingError):
        absorption_exact(res.p_tilde, np.array([1.0, 0.0, 0.0]), boundary=0)


def test_absorption_recurrence_guards():
    params = make_bd(p=[0.0, 0.5, 0.0], q=[0.0, 0.5, 0.0], interior_positive=False)
    with pytest.raises(errors.ZeroUpProbabilityError):
        absorption_recurrence(params)
    with pytest.raises(errors.TruncationTooCoarseError):
        absorption_recurrence(make_bd(p=[0.3, 0.4, 0.0], q=[0.0, 0.1, 0.0],
                                      interior_positive=False), n_max=2)


def test_absorption_degenerate_single_state():
    params = BDParams(N=0, p=np.array([0.0]), q=np.array([0.0]), r=np.array([1.0]))
    stats = absorption_recurrence(params)
    assert stats.mean == 0.0 and stats.pmf[0] == 1.0
    exact = absorption_exact(np.array([[1.0]]), np.array([1.0]), boundary=0)
    assert exact.mean == 0.0 and exact.survival[0] == 0.0


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 12), st.integers(0, 2**31 - 1))
def test_three_routes_agree_random(N, seed):
    rng = np.random.default_rng(seed)
    params = random_monotone_bd(rng, N)
    P = bd_kernel(params)
    res = build_intertwining(P, siegmund_function(N), siegmund_dual(P).dual)
    start = np.zeros(N + 1)
    start[0] = 1.0
    exact = absorption_exact(res.p_tilde, start, boundary=N)
    spectral = absorption_spectral(bd_spectrum(params), n_max=exact.n_max)
    recurrence = absorption_recurrence(bd_params_from_kernel(res.p_tilde),
                                       n_max=exact.n_max)
    assert spectral.mean == pytest.approx(exact.mean, rel=1e-8)
    assert recurrence.mean == pytest.approx(exact.mean, rel=1e-8)
    assert spectral.variance == pytest.approx(exact.variance, rel=1e-6)
    np.testing.assert_allclose(exact.pmf, spectral.pmf, atol=1e-9)
    np.testing.assert_allclose(exact.pmf, recurrence.pmf, atol=1e-9)
    # variance never exceeds mean over the spectral gap
    t1 = bd_spectrum(params).eigenvalues[1]
    assert spectral.variance <= spectral.mean / (1 - t1) + 1e-9


def test_cutoff_report_moran_full_strength():
    # at a1 + a2 = 1 the mean is exactly N H_N and (gap x mean) = H_N grows
    out = cutoff_report(lambda N: moran_mutation_spectrum(N, 0.5, 0.5), [10, 30, 90])
    assert out["cutoff_flag"]
    for row in out["rows"]:
        N = row["N"]
        harmonic = np.sum(1.0 / np.arange(1, N + 1))
        assert row["mean"] == pytest.approx(N * harmonic, rel=1e-9)
        assert row["gap_times_mean"] == pytest.approx(harmonic, rel=1e-9)


def test_cutoff_report_flat_family_no_flag(chain_b):
    out = cutoff_report(lambda N: chain_b, [2, 4, 8])
    assert not out["cutoff_flag"]
    assert all(r["relative_variance"] > 0 for r in out["rows"])
