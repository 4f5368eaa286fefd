import numpy as np
import pytest
from scipy.linalg import solve_discrete_lyapunov

from mfl.errors import OracleError
from mfl.objectives import RidgeObjective
from mfl.oracles import (LinearChainSpec, finite_diff_grad_check,
                         ou_chain_stationary_covariance, quadrature_validate_mmd)


def test_update_matrix_structure():
    spec = LinearChainSpec(gamma=1.0, h=0.1, lambda_prime=0.5)
    p = spec.step_params()
    m = spec.update_matrix()
    assert np.allclose(m, [[1.0 - 0.5 * p.phi1, p.phi0],
                           [-0.5 * p.phi3, p.phi2]], rtol=1e-15)


@pytest.mark.parametrize("gamma,h,lam,temp", [
    (1.0, 0.05, 1.0, 1.0),
    (2.0, 0.1, 0.3, 1.0),
    (0.5, 0.2, 1.5, 2.0),
])
def test_lyapunov_fixed_point_matches_scipy(gamma, h, lam, temp):
    spec = LinearChainSpec(gamma=gamma, h=h, lambda_prime=lam, temperature=temp)
    ours = ou_chain_stationary_covariance(spec)
    ref = solve_discrete_lyapunov(spec.update_matrix(), spec.noise_covariance())
    assert np.allclose(ours, ref, rtol=1e-10)


def test_stationary_covariance_near_continuum_limit():
    # As h -> 0 the chain's stationary law approaches diag(1/lambda', 1)
    # with an O(h) gap: x-variance = 1/lambda' + h/2 + h^2/4 + O(h^3)
    # at lambda' = gamma = temperature = 1.
    for h in (0.1, 0.05, 0.025):
        cov = ou_chain_stationary_covariance(LinearChainSpec(1.0, h, 1.0))
        assert cov[0, 0] == pytest.approx(1.0 + h / 2.0 + h * h / 4.0, rel=1e-4)
        assert cov[1, 1] == pytest.approx(1.0 + h / 2.0, abs=h * h)


def test_unstable_chain_rejected():
    with pytest.raises(OracleError):
        ou_chain_stationary_covariance(
            LinearChainSpec(gamma=1.0, h=0.5, lambda_prime=2000.0))


def test_temperature_scales_stationary_covariance_linearly():
    base = ou_chain_stationary_covariance(LinearChainSpec(1.0, 0.05, 1.0, 1.0))
    hot = ou_chain_stationary_covariance(LinearChainSpec(1.0, 0.05, 1.0, 3.0))
    assert np.allclose(hot, 3.0 * base, rtol=1e-10)


def test_finite_diff_check_passes_on_exact_gradient():
    obj = RidgeObjective(dim=3, lambda_prime=0.4)
    x = np.random.Generator(np.random.Philox(1)).standard_normal((4, 3))
    assert finite_diff_grad_check(obj, x, particle=1) < 1e-8


def test_finite_diff_check_flags_wrong_gradient():
    class Wrong(RidgeObjective):
        def batch_grad(self, positions):
            return 2.0 * super().batch_grad(positions)

    obj = Wrong(dim=2, lambda_prime=0.4)
    x = np.random.Generator(np.random.Philox(2)).standard_normal((3, 2))
    assert finite_diff_grad_check(obj, x, particle=0) > 0.1


def test_finite_diff_eps_validated():
    obj = RidgeObjective(dim=1, lambda_prime=1.0)
    with pytest.raises(OracleError):
        finite_diff_grad_check(obj, np.ones((2, 1)), 0, eps=1e-2)


def test_quadrature_confirms_mmd_closed_forms():
    pair_err, data_err = quadrature_validate_mmd(0.3, -0.7, 1.1, sigma=0.9)
    assert pair_err < 1e-8
    assert data_err < 1e-9
