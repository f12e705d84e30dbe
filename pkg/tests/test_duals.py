import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualchain import errors
from dualchain.chains import bd_kernel, make_bd, moran_kernel, mutation_bias
from dualchain.duals import (
    DualFunction,
    bd_siegmund_dual,
    bd_ultrametric_rigidity,
    dual_function,
    dual_via_solve,
    hypergeometric_function,
    is_monotone,
    potential_dual_check,
    potential_function,
    siegmund_dual,
    siegmund_function,
    ultrametric_dual,
    ultrametric_function,
    vandermonde_function,
    verify_duality,
)
from dualchain.samplers import random_kernel, random_monotone_kernel

NON_MONOTONE = np.array([[0.1, 0.9], [0.8, 0.2]])


def test_dual_function_rejects_bad_input():
    with pytest.raises(errors.NonSquareError):
        DualFunction(np.ones((2, 3)), "custom")
    with pytest.raises(errors.NegativeEntryError):
        DualFunction(np.array([[1.0, -0.5], [0.0, 1.0]]), "custom")
    with pytest.raises(errors.TrivialDualFunctionError):
        DualFunction(np.array([[1.0, 0.0], [1.0, 0.0]]), "custom")
    with pytest.raises(errors.SingularDualFunctionError):
        DualFunction(np.eye(2), "custom", inverse=2 * np.eye(2))


def test_siegmund_function_shape():
    H = siegmund_function(3)
    assert np.array_equal(H.matrix, np.triu(np.ones((4, 4))))
    np.testing.assert_allclose(H.matrix @ H.inverse, np.eye(4), atol=1e-14)


def test_ultrametric_function_inverse_attached():
    H = ultrametric_function(3, 1, 0.7, 0.4)
    np.testing.assert_allclose(H.matrix @ H.inverse, np.eye(4), atol=1e-12)
    assert H.params == {"N": 3, "k": 1, "alpha": 0.7, "beta": 0.4}
    # alpha = beta = 0 degenerates to the cumulative indicator
    H0 = ultrametric_function(3, 1, 0.0, 0.0)
    np.testing.assert_allclose(H0.matrix, siegmund_function(3).matrix, atol=1e-15)


def test_hypergeometric_function_small_case():
    H = hypergeometric_function(2)
    np.testing.assert_allclose(
        H.matrix, [[1, 1, 1], [1, 0.5, 0], [1, 0, 0]], atol=1e-15
    )
    # column 0 is constant and the last row is the first unit vector
    H6 = hypergeometric_function(6).matrix
    np.testing.assert_allclose(H6[:, 0], 1.0, atol=1e-15)
    np.testing.assert_allclose(H6[6], np.eye(7)[0], atol=1e-15)


def test_vandermonde_function_values():
    H = vandermonde_function(4).matrix
    assert H[0, 0] == 1.0
    np.testing.assert_allclose(H[0, 1:], 0.0)
    np.testing.assert_allclose(H[4], 1.0)
    np.testing.assert_allclose(H[2, 2], 0.25)


def test_potential_function_requires_mass_loss():
    with pytest.raises(errors.PotentialHasStochasticClassError):
        potential_function(np.array([[0.5, 0.5], [0.5, 0.5]]))
    # substochastic overall but with one mass-conserving class
    R = np.array([[0.5, 0.0], [0.0, 1.0]])
    with pytest.raises(errors.PotentialHasStochasticClassError):
        potential_function(R)
    Hfn = potential_function(np.array([[0.3, 0.2], [0.1, 0.4]]))
    np.testing.assert_allclose(
        Hfn.matrix @ (np.eye(2) - np.array([[0.3, 0.2], [0.1, 0.4]])),
        np.eye(2),
        atol=1e-12,
    )


def test_dual_function_dispatch():
    assert dual_function("siegmund", 2).family == "siegmund"
    with pytest.raises(ValueError):
        dual_function("nope", 2)


def test_is_monotone():
    assert is_monotone(bd_kernel(make_bd(p=[0.3, 0.0], q=[0.0, 0.2])).matrix)
    assert not is_monotone(NON_MONOTONE)


def test_siegmund_dual_chain_a(chain_a):
    rep = siegmund_dual(bd_kernel(chain_a))
    assert rep.feasible
    np.testing.assert_allclose(rep.dual, [[0.5, 0.2], [0.0, 1.0]], atol=1e-15)
    np.testing.assert_allclose(rep.mass_leaks, [0.3, 0.0], atol=1e-15)
    assert rep.residual <= 1e-12
    # boundary identities of the cumulative construction
    P = bd_kernel(chain_a).matrix
    assert rep.dual[0, 1] == pytest.approx(1 - P[1, 1], abs=1e-15)
    assert rep.mass_leaks[0] == pytest.approx(1 - P[0, 0], abs=1e-15)


def test_siegmund_dual_flags_non_monotone():
    rep = siegmund_dual(NON_MONOTONE)
    assert not rep.feasible
    assert rep.violations
    cond, (y, x), val = rep.violations[0]
    assert val < 0
    # the witness is a cumulative difference F(x, y) - F(x+1, y)
    F = np.cumsum(NON_MONOTONE, axis=1)
    assert val == pytest.approx(F[x, y] - F[x + 1, y], abs=1e-15)


def test_bd_siegmund_closed_form(chain_b):
    direct = bd_siegmund_dual(chain_b)
    rep = siegmund_dual(bd_kernel(chain_b))
    np.testing.assert_allclose(direct, rep.dual, atol=1e-15)
    np.testing.assert_allclose(
        direct, [[0.7, 0.1, 0.0], [0.3, 0.5, 0.2], [0.0, 0.0, 1.0]], atol=1e-15
    )


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 20), st.integers(0, 2**31 - 1))
def test_monotone_iff_feasible(n, seed):
    rng = np.random.default_rng(seed)
    P = random_kernel(rng, n)
    rep = siegmund_dual(P)
    assert rep.feasible == is_monotone(P)
    Pm = random_monotone_kernel(rng, n)
    assert siegmund_dual(Pm).feasible


def test_ultrametric_dual_matches_direct_solve(rng):
    for _ in range(10):
        n = int(rng.integers(3, 8))
        k = int(rng.integers(0, n - 1))
        a, b = rng.uniform(0, 1.5, size=2)
        P = random_kernel(rng, n)
        rep = ultrametric_dual(P, k, a, b)
        via = dual_via_solve(P, ultrametric_function(n - 1, k, a, b))
        np.testing.assert_allclose(rep.dual, via.dual, atol=1e-10)


def test_ultrametric_dual_block_instance():
    # constant block mass 2/3 over {0,1} with blockwise monotone rows
    a = np.array([0.5, 0.4, 0.3, 0.2])
    b = np.array([0.25, 0.2, 0.15, 0.1])
    P = np.column_stack([a, 2 / 3 - a, b, 1 / 3 - b])
    rep = ultrametric_dual(P, k=1, alpha=0.7, beta=0.4)
    assert rep.feasible
    d = rep.diagnostics
    assert d["constant_block_mass"]
    assert d["blockwise_monotone"]
    assert d["substochastic"]
    assert d["delta"] == pytest.approx(2 / 3)
    np.testing.assert_allclose(
        d["row_mass"], [0.65, 1.0, 0.8558823529411765, 1.0], atol=1e-12
    )
    assert d["conservative_rows"] == [1, 3]
    assert rep.residual <= 1e-12


def test_ultrametric_dual_rejects_bad_params(chain_b):
    P = bd_kernel(chain_b)
    with pytest.raises(errors.InvalidUltrametricParamsError):
        ultrametric_dual(P, 2, 0.1, 0.1)
    with pytest.raises(errors.InvalidUltrametricParamsError):
        ultrametric_dual(P, 0, -0.1, 0.0)


def _blockwise_monotone_cbm(rng, N, k, delta):
    # constant mass delta on {0..k}, blockwise monotone via sorted row maps
    n = N + 1
    B = random_monotone_kernel(rng, k + 1)
    C = random_monotone_kernel(rng, n - k - 1)
    m = np.zeros((n, n))
    m[:, : k + 1] = delta * B[np.sort(rng.integers(0, k + 1, size=n))]
    m[:, k + 1 :] = (1 - delta) * C[np.sort(rng.integers(0, n - k - 1, size=n))]
    return m


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_blockwise_monotone_constant_mass_is_sufficient(seed):
    rng = np.random.default_rng(seed)
    N = int(rng.integers(2, 9))
    k = int(rng.integers(0, N))
    a, b = rng.uniform(0, 2, size=2)
    m = _blockwise_monotone_cbm(rng, N, k, float(rng.uniform(0.2, 0.8)))
    rep = ultrametric_dual(m, k, float(a), float(b))
    assert rep.diagnostics["constant_block_mass"]
    assert rep.diagnostics["blockwise_monotone"]
    assert rep.feasible


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_matched_delta_gives_substochastic_dual(seed):
    # rows k and N of the dual carry mass delta (1+a+b)/(1+b) and
    # (1+a+b)(1+b-b delta)/((1+a)(1+b)); both stay at 1 only when delta
    # equals (1+b)/(1+a+b), which is the unique substochastic tuning
    rng = np.random.default_rng(seed)
    N = int(rng.integers(2, 9))
    k = int(rng.integers(0, N))
    a, b = rng.uniform(0.1, 2, size=2)
    delta = (1 + b) / (1 + a + b)
    m = _blockwise_monotone_cbm(rng, N, k, delta)
    rep = ultrametric_dual(m, k, float(a), float(b))
    assert rep.feasible
    assert rep.diagnostics["substochastic"]
    assert {k, N} <= set(rep.diagnostics["conservative_rows"])
    off = _blockwise_monotone_cbm(rng, N, k, min(0.95, delta + 0.1))
    assert not ultrametric_dual(off, k, float(a), float(b)).diagnostics[
        "substochastic"
    ]


def test_rigidity_beta_witness():
    params = make_bd(p=[0.3, 0.25, 0.2, 0.15, 0.0], q=[0.0, 0.1, 0.12, 0.14, 0.16])
    out = bd_ultrametric_rigidity(params, k=1, alpha=0.7, beta=0.4)
    assert not out["feasible"]
    (pos, witness, predicted) = out["beta_witness"]
    assert pos == (3, 0)
    assert witness == pytest.approx(-0.4 * params.p[1] / 1.7, abs=1e-12)
    assert witness == pytest.approx(predicted, abs=1e-12)
    # k >= 1 with alpha > 0 inflates the row-k mass past 1
    assert out["row_k_mass"] == pytest.approx(1 + 0.7 * params.q[2] / 1.4, abs=1e-12)
    assert out["alpha_must_vanish"]
    # alpha = beta = 0 restores feasibility for monotone input
    ok = bd_ultrametric_rigidity(params, k=2, alpha=0.0, beta=0.0)
    assert ok["feasible"]
    assert ok["row_k_mass"] == pytest.approx(1.0, abs=1e-12)


def test_rigidity_k0_threshold(chain_a):
    out = bd_ultrametric_rigidity(chain_a, k=0, alpha=1.5, beta=0.0)
    assert out["alpha_max"] == pytest.approx(0.3 / 0.2)
    assert out["feasible"] and out["stochastic_dual"]
    below = bd_ultrametric_rigidity(chain_a, k=0, alpha=1.0, beta=0.0)
    assert below["feasible"] and not below["stochastic_dual"]
    assert below["substochastic"]
    above = bd_ultrametric_rigidity(chain_a, k=0, alpha=1.6, beta=0.0)
    assert not above["substochastic"]


def test_dual_via_solve_condition_gate():
    P = np.full((17, 17), 1 / 17)
    with pytest.raises(errors.SingularDualFunctionError):
        dual_via_solve(P, vandermonde_function(16))


def test_dual_via_solve_hypergeometric_moran():
    params = moran_kernel(6, mutation_bias(0.3, 0.2, 6))
    rep = dual_via_solve(bd_kernel(params), hypergeometric_function(6))
    assert rep.feasible
    assert rep.residual <= 1e-12
    np.testing.assert_allclose(
        rep.dual.sum(axis=1), 1 - 0.3 * np.arange(7) / 6, atol=1e-12
    )


def test_dual_via_solve_support_refit_large_moran():
    # by N = 20 the flipped triangular solve leaves O(1e-9) signed noise
    # on the structural zeros of the pure-death dual; the support refit
    # must strip it without loosening the identity
    N = 20
    params = moran_kernel(N, mutation_bias(0.3, 0.2, N))
    rep = dual_via_solve(bd_kernel(params), hypergeometric_function(N))
    assert rep.feasible
    assert rep.dual.min() >= 0
    assert rep.residual <= 1e-10
    off_band = rep.dual[np.triu_indices(N + 1, k=1)]
    assert np.max(np.abs(off_band)) == 0


def test_dual_via_solve_refit_keeps_true_negatives():
    # a non-monotone kernel pushed through the cumulative solve has real
    # negative entries; the refit must leave the verdict alone
    P = np.array([[0.1, 0.9], [0.8, 0.2]])
    rep = dual_via_solve(P, siegmund_function(1))
    assert not rep.feasible
    assert rep.dual.min() < -0.1


def test_dual_via_solve_dimension_mismatch(chain_a):
    with pytest.raises(errors.DimensionMismatchError):
        dual_via_solve(bd_kernel(chain_a), siegmund_function(3))


def test_verify_duality_residuals(chain_a):
    P = bd_kernel(chain_a)
    H = siegmund_function(1)
    rep = siegmund_dual(P)
    out = verify_duality(P, H, rep.dual, n_max=25)
    assert out["static"] <= 1e-12
    assert out["dynamic"] <= 1e-11
    assert out["symmetric"] <= 1e-12
    # the identity holds algebraically even for an infeasible candidate
    bad = siegmund_dual(NON_MONOTONE)
    out2 = verify_duality(NON_MONOTONE, siegmund_function(1), bad.dual)
    assert out2["static"] <= 1e-12


def test_potential_dual_check_uniform():
    R = np.array([[0.3, 0.2], [0.1, 0.4]])
    out = potential_dual_check(R)
    assert out["transpose_substochastic"]
    assert out["feasible"]
    assert out["row_sums_nonnegative"]
    assert out["residual"] <= 1e-12
