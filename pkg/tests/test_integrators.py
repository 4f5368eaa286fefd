import numpy as np
import pytest

from mfl.diagnostics import RunRecord
from mfl.errors import ConfigError, DivergenceError
from mfl.integrators import (EmNulaSpec, NlaSpec, NulaSpec, StepParams,
                             derive_step_params, em_nula_step, nla_step,
                             nula_step, run_chain)
from mfl.objectives import RidgeObjective
from mfl.particles import ParticleCloud, init_cloud
from mfl.rng import RngStreams


def _noiseless(gamma, h):
    p = derive_step_params(gamma, h)
    return StepParams(phi0=p.phi0, phi1=p.phi1, phi2=p.phi2, phi3=p.phi3,
                      sigma11=0.0, sigma12=0.0, sigma22=0.0)


def test_nula_step_hand_example():
    # x = 1, v = 0, g = x, gamma = 1, h = 0.1, no noise:
    # x' = 1 - phi1, v' = -phi0 with the frozen coefficient values.
    p = _noiseless(1.0, 0.1)
    cloud = ParticleCloud(np.array([[1.0]]), np.array([[0.0]]))
    out = nula_step(cloud, np.array([[1.0]]), p, RngStreams(0), 0)
    assert out.positions[0, 0] == pytest.approx(1.0 - 0.0048374180359595732, rel=1e-15)
    assert out.velocities[0, 0] == pytest.approx(-0.095162581964040427, rel=1e-15)


def test_nula_step_general_affine_form():
    p = _noiseless(2.0, 0.3)
    x = np.array([[0.5, -1.0], [2.0, 0.25]])
    v = np.array([[1.0, 0.0], [-0.5, 3.0]])
    g = np.array([[0.1, 0.2], [-0.3, 0.4]])
    out = nula_step(ParticleCloud(x, v), g, p, RngStreams(0), 0)
    assert np.allclose(out.positions, x + p.phi0 * v - p.phi1 * g, rtol=1e-15)
    assert np.allclose(out.velocities, p.phi2 * v - p.phi3 * g, rtol=1e-15)


def test_em_step_hand_example():
    # x' = x + h2 v; v' = (1 - h3) v - h2 g, h3 defaulting to gamma*h2.
    cloud = ParticleCloud(np.array([[1.0]]), np.array([[2.0]]))
    out = em_nula_step(cloud, np.array([[3.0]]), h2=0.1, gamma=0.5,
                       lambda2=0.0, rng=RngStreams(0), step=0)
    assert out.positions[0, 0] == pytest.approx(1.2, rel=1e-15)
    assert out.velocities[0, 0] == pytest.approx((1 - 0.05) * 2.0 - 0.3, rel=1e-15)


def test_em_step_explicit_h3_overrides_default():
    cloud = ParticleCloud(np.array([[0.0]]), np.array([[1.0]]))
    out = em_nula_step(cloud, np.array([[0.0]]), h2=0.1, gamma=1.0,
                       lambda2=0.0, rng=RngStreams(0), step=0, h3=0.5)
    assert out.velocities[0, 0] == pytest.approx(0.5, rel=1e-15)


def test_em_step_warns_when_damping_non_contractive():
    cloud = ParticleCloud(np.array([[0.0]]), np.array([[1.0]]))
    with pytest.warns(RuntimeWarning):
        em_nula_step(cloud, np.array([[0.0]]), h2=1.0, gamma=1.0,
                     lambda2=0.0, rng=RngStreams(0), step=0)


def test_nla_step_hand_example():
    out = nla_step(np.array([[2.0]]), np.array([[1.0]]), h1=0.25, lambda1=0.0,
                   rng=RngStreams(0), step=0)
    assert out[0, 0] == pytest.approx(1.75, rel=1e-15)


def test_nla_noise_variance():
    h1, lam = 0.01, 0.5
    out = nla_step(np.zeros((200_000, 1)), np.zeros((200_000, 1)), h1, lam,
                   RngStreams(3), 0)
    assert np.var(out) == pytest.approx(2 * lam * h1, rel=0.02)


def test_nla_divergence_raises():
    with pytest.raises(DivergenceError):
        nla_step(np.array([[1e12]]), np.array([[-1.0]]), 1.0, 0.0,
                 RngStreams(0), 5)


def test_run_chain_record_grid():
    obj = RidgeObjective(dim=2, lambda_prime=0.1)
    cloud = init_cloud(4, 2, 0.0, 0.1, RngStreams(0))
    spec = NulaSpec(derive_step_params(1.0, 0.01))
    records, final = run_chain(cloud, obj, spec, RngStreams(0), 25,
                               record_every=10)
    assert [r.step for r in records] == [10, 20, 25]
    assert isinstance(final, ParticleCloud)
    assert all(isinstance(r, RunRecord) for r in records)


def test_run_chain_zero_steps():
    obj = RidgeObjective(dim=1, lambda_prime=0.1)
    cloud = init_cloud(2, 1, 0.0, 0.1, RngStreams(0))
    records, final = run_chain(cloud, obj, NulaSpec(derive_step_params(1.0, 0.01)),
                               RngStreams(0), 0)
    assert records == []
    assert np.array_equal(final.positions, cloud.positions)


def test_run_chain_walltime_flag():
    obj = RidgeObjective(dim=1, lambda_prime=0.1)
    spec = NulaSpec(derive_step_params(1.0, 0.01))
    cloud = init_cloud(2, 1, 0.0, 0.1, RngStreams(0))
    off, _ = run_chain(cloud, obj, spec, RngStreams(0), 10, record_walltime=False)
    assert all(r.wall_ms == 0.0 for r in off)
    on, _ = run_chain(cloud, obj, spec, RngStreams(0), 10, record_walltime=True)
    assert on[-1].wall_ms > 0.0


def test_run_chain_callbacks_see_every_step():
    seen = []
    obj = RidgeObjective(dim=1, lambda_prime=0.1)
    cloud = init_cloud(2, 1, 0.0, 0.1, RngStreams(0))
    run_chain(cloud, obj, NulaSpec(derive_step_params(1.0, 0.01)), RngStreams(0),
              7, record_every=100, callbacks=[lambda k, c: seen.append(k)])
    assert seen == list(range(1, 8))


def test_run_chain_divergence_keeps_partial_records():
    obj = RidgeObjective(dim=1, lambda_prime=4.0)
    cloud = init_cloud(8, 1, 0.0, 0.1, RngStreams(0))
    spec = EmNulaSpec(h2=1.0, gamma=1.0, lambda2=0.0)
    with pytest.warns(RuntimeWarning), pytest.raises(DivergenceError) as exc:
        run_chain(cloud, obj, spec, RngStreams(0), 10_000, record_every=5)
    assert exc.value.step > 0
    assert len(exc.value.records) >= 1
    assert all(np.isfinite([r.loss, r.x_m2, r.v_m2]).all()
               for r in exc.value.records)


def test_noiseless_exact_ei_chain_contracts_ridge():
    obj = RidgeObjective(dim=3, lambda_prime=1.0)
    cloud = init_cloud(16, 3, 0.0, 1.0, RngStreams(1))
    spec = NulaSpec(_noiseless(1.0, 0.05))
    records, _ = run_chain(cloud, obj, spec, RngStreams(1), 500, record_every=50)
    losses = [r.loss for r in records]
    assert losses == sorted(losses, reverse=True)
    assert losses[-1] < 1e-6 * losses[0]


def test_run_chain_validates_arguments():
    obj = RidgeObjective(dim=1, lambda_prime=0.1)
    cloud = init_cloud(2, 1, 0.0, 0.1, RngStreams(0))
    spec = NulaSpec(derive_step_params(1.0, 0.01))
    with pytest.raises(ConfigError):
        run_chain(cloud, obj, spec, RngStreams(0), -1)
    with pytest.raises(ConfigError):
        run_chain(cloud, obj, spec, RngStreams(0), 5, record_every=0)


def test_nla_spec_keeps_velocities_fixed():
    obj = RidgeObjective(dim=2, lambda_prime=0.5)
    cloud = init_cloud(4, 2, 0.0, 1.0, RngStreams(2))
    _, final = run_chain(cloud, obj, NlaSpec(h1=0.01, lambda1=0.0),
                         RngStreams(2), 20)
    assert np.array_equal(final.velocities, cloud.velocities)
    assert not np.array_equal(final.positions, cloud.positions)
