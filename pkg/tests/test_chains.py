import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualchain import errors
from dualchain.chains import (
    absorption_profile,
    bd_kernel,
    bd_params_from_kernel,
    bd_stationary,
    complement_bias,
    is_irreducible_bd,
    make_bd,
    make_bias,
    moran_kernel,
    mutation_bias,
    wright_fisher_kernel,
)
from dualchain.duals import is_monotone
from dualchain.kernels import stationary


def test_make_bd_boundary_rules():
    with pytest.raises(errors.InvalidBoundaryError):
        make_bd(p=[0.3, 0.1], q=[0.0, 0.2])  # p_N != 0
    with pytest.raises(errors.InvalidBoundaryError):
        make_bd(p=[0.3, 0.0], q=[0.1, 0.2])  # q_0 != 0
    with pytest.raises(errors.NotStochasticError):
        make_bd(p=[0.3, 0.0], q=[0.0, 0.2], r=[0.5, 0.5])


def test_make_bd_interior_positivity():
    with pytest.raises(errors.InvalidBoundaryError):
        make_bd(p=[0.3, 0.0, 0.0], q=[0.0, 0.1, 0.2])
    params = make_bd(p=[0.3, 0.0, 0.0], q=[0.0, 0.1, 0.2], interior_positive=False)
    assert params.N == 2


def test_bd_kernel_chain_a(chain_a):
    P = bd_kernel(chain_a)
    np.testing.assert_allclose(P.matrix, [[0.7, 0.3], [0.2, 0.8]], atol=1e-15)
    assert is_irreducible_bd(chain_a)


def test_bd_stationary_matches_dense(chain_b):
    pi = bd_stationary(chain_b)
    np.testing.assert_allclose(pi, [1 / 6, 1 / 3, 1 / 2], atol=1e-12)
    np.testing.assert_allclose(pi, stationary(bd_kernel(chain_b)), atol=1e-12)


def test_bd_params_round_trip(chain_b):
    back = bd_params_from_kernel(bd_kernel(chain_b).matrix)
    np.testing.assert_allclose(back.p, chain_b.p, atol=1e-15)
    np.testing.assert_allclose(back.q, chain_b.q, atol=1e-15)
    with pytest.raises(errors.DimensionMismatchError):
        bd_params_from_kernel(np.full((3, 3), 1 / 3))


def test_bias_table_validation():
    with pytest.raises(errors.InvalidBiasError):
        make_bias([0.2])
    with pytest.raises(errors.InvalidBiasError):
        make_bias([0.2, 1.4])
    b = make_bias([0.1, 0.5, 0.9])
    assert b.nondecreasing and b.positive_at_zero


def test_complement_bias_involution():
    b = make_bias([0.1, 0.4, 0.7, 0.95])
    np.testing.assert_allclose(
        complement_bias(complement_bias(b)).values, b.values, atol=1e-15
    )


def test_mutation_bias_endpoints():
    b = mutation_bias(0.3, 0.2, 4)
    assert b.values[0] == pytest.approx(0.3)
    assert b.values[-1] == pytest.approx(0.8)
    assert b.nondecreasing


def test_moran_kernel_quadratic_rows():
    # neutral bias p(u) = u: p_x = q_x = x(N-x)/N^2
    N = 5
    params = moran_kernel(N, make_bias(np.arange(N + 1) / N))
    x = np.arange(N + 1)
    np.testing.assert_allclose(params.p, (1 - x / N) * (x / N), atol=1e-15)
    np.testing.assert_allclose(params.q, (x / N) * (1 - x / N), atol=1e-15)


def test_moran_mutation_is_irreducible():
    params = moran_kernel(6, mutation_bias(0.3, 0.2, 6))
    assert is_irreducible_bd(params)
    pi = bd_stationary(params)
    assert np.min(pi) > 0


def test_wright_fisher_rows_are_binomial():
    N = 4
    K = wright_fisher_kernel(N, mutation_bias(0.3, 0.2, N))
    row = K.matrix[2]
    pv = mutation_bias(0.3, 0.2, N).values[2]
    from scipy.stats import binom

    np.testing.assert_allclose(row, binom.pmf(np.arange(N + 1), N, pv), atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 40), st.integers(0, 2**31 - 1))
def test_nondecreasing_bias_gives_monotone_moran(N, seed):
    rng = np.random.default_rng(seed)
    table = np.sort(rng.uniform(0, 1, size=N + 1))
    params = moran_kernel(N, make_bias(table))
    assert is_monotone(bd_kernel(params).matrix)


def test_absorption_profile_gambler_ruin():
    params = make_bd(p=[0.0, 0.5, 0.0], q=[0.0, 0.5, 0.0], interior_positive=False)
    prof = absorption_profile(params)
    assert prof.phi[1] == pytest.approx(0.5, abs=1e-15)
    np.testing.assert_allclose(prof.eta, [0.0, 1.0, 2.0], atol=1e-15)
    assert prof.identity_residual <= 1e-12


def test_absorption_profile_requires_double_absorption(chain_b):
    with pytest.raises(errors.NotDoublyAbsorbingError):
        absorption_profile(chain_b)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 12), st.integers(0, 2**31 - 1))
def test_absorption_profile_identity_random(N, seed):
    rng = np.random.default_rng(seed)
    p = np.zeros(N + 1)
    q = np.zeros(N + 1)
    p[1:N] = rng.uniform(0.05, 0.45, size=N - 1)
    q[1:N] = rng.uniform(0.05, 0.45, size=N - 1)
    prof = absorption_profile(make_bd(p, q, interior_positive=False))
    assert prof.identity_residual <= 1e-10
    assert np.all(np.diff(prof.phi) <= 1e-15)
