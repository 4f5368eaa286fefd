"""Self-verification suite: every check pits an implementation against an
independent computation (high-precision arithmetic, series expansions,
Monte Carlo, finite differences, quadrature, or a Lyapunov fixed point)."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .diagnostics import RunRecord
from .integrators import (NulaSpec, StepParams, derive_step_params, run_chain,
                          sample_noise_block)
from .objectives import (KsdObjective, MmdObjective, NeuralNetObjective,
                         RidgeObjective, gaussian_score)
from .oracles import (LinearChainSpec, finite_diff_grad_check,
                      ou_chain_stationary_covariance, quadrature_validate_mmd)
from .particles import init_cloud
from .rng import RngStreams


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _mp_step_params(gamma: float, h: float) -> tuple[float, ...]:
    """Closed forms evaluated in 50-digit arithmetic (independent oracle)."""
    import mpmath as mp
    with mp.workdps(50):
        g = mp.mpf(repr(gamma))
        hh = mp.mpf(repr(h))
        e1 = mp.e**(-g * hh)
        e2 = mp.e**(-2 * g * hh)
        phi0 = (1 - e1) / g
        phi1 = (g * hh - (1 - e1)) / g**2
        phi2 = e1
        s11 = (2 / g) * (hh - 2 * (1 - e1) / g + (1 - e2) / (2 * g))
        s12 = (1 - 2 * e1 + e2) / g
        s22 = 1 - e2
        return tuple(float(v) for v in (phi0, phi1, phi2, s11, s12, s22))


def check_step_params_exact(n_grid: int = 20) -> CheckResult:
    gammas = np.geomspace(0.1, 100.0, n_grid)
    hs = np.geomspace(1e-5, 1.0, n_grid)
    worst = 0.0
    for g in gammas:
        for h in hs:
            p = derive_step_params(float(g), float(h))
            ours = (p.phi0, p.phi1, p.phi2, p.sigma11, p.sigma12, p.sigma22)
            ref = _mp_step_params(float(g), float(h))
            for a, b in zip(ours, ref):
                rel = abs(a - b) / max(abs(b), 1e-300)
                worst = max(worst, rel)
    return CheckResult("step_params_exact", worst < 1e-12,
                       f"worst relative error {worst:.3e} (tol 1e-12)")


def check_taylor_limits() -> CheckResult:
    worst = 0.0
    for g, h in [(1.0, 1e-3), (0.5, 1e-3), (1.0, 1e-4), (2.0, 5e-4)]:
        p = derive_step_params(g, h)
        targets = ((p.sigma11, (2.0 / 3.0) * g * h**3),
                   (p.sigma12, g * h**2),
                   (p.sigma22, 2.0 * g * h))
        for ours, leading in targets:
            worst = max(worst, abs(ours - leading) / leading)
    return CheckResult("taylor_limits", worst < 1e-2,
                       f"worst relative deviation from leading term {worst:.3e} (tol 1e-2)")


def check_phi_identity(n_grid: int = 20) -> CheckResult:
    # gamma*phi1 + phi0 = h holds exactly in exact arithmetic.  The residual
    # is normalized by h: for small gamma*h both sides are ~h and the
    # difference gamma*phi1 is itself O(h * gamma*h), so a residual relative
    # to gamma*phi1 would be dominated by representation error of phi0 alone.
    worst = 0.0
    for g in np.geomspace(0.1, 100.0, n_grid):
        for h in np.geomspace(1e-5, 1.0, n_grid):
            p = derive_step_params(float(g), float(h))
            worst = max(worst, abs(g * p.phi1 + p.phi0 - h) / h)
    return CheckResult("phi1_identity", worst < 1e-12,
                       f"worst h-relative residual of gamma*phi1 + phi0 = h: {worst:.3e}")


def check_covariance_psd(n_grid: int = 25) -> CheckResult:
    ok = True
    worst = 0.0
    for g in np.geomspace(0.1, 100.0, n_grid):
        for h in np.geomspace(1e-5, 1.0, n_grid):
            p = derive_step_params(float(g), float(h))
            det = p.sigma11 * p.sigma22 - p.sigma12**2
            floor = -1e-14 * p.sigma11 * p.sigma22
            if p.sigma11 < 0 or p.sigma22 < 0 or det < floor:
                ok = False
            worst = min(worst, det / max(p.sigma11 * p.sigma22, 1e-300))
    return CheckResult("covariance_psd", ok,
                       f"worst normalized determinant {worst:.3e} (floor -1e-14)")


def check_monotone_coefficients() -> CheckResult:
    ok = True
    for g in (0.1, 1.0, 10.0):
        hs = np.linspace(1e-4, 2.0, 200)
        phi0 = np.array([derive_step_params(g, float(h)).phi0 for h in hs])
        phi2 = np.array([derive_step_params(g, float(h)).phi2 for h in hs])
        if not (np.all(np.diff(phi0) > 0) and np.all(np.diff(phi2) < 0)
                and np.all(phi0 < 1.0 / g)):
            ok = False
    return CheckResult("monotone_coefficients", ok,
                       "phi0 increasing (bounded by 1/gamma), phi2 decreasing in h")


def check_noise_covariance_mc(n_draws: int, tol: float) -> CheckResult:
    p = derive_step_params(1.0, 0.5)
    rng = RngStreams(12345)
    bx, bv = sample_noise_block(p, rng, 0, n_draws, 1)
    emp = np.cov(np.hstack([bx, bv]).T)
    ref = np.array([[p.sigma11, p.sigma12], [p.sigma12, p.sigma22]])
    rel = np.max(np.abs(emp - ref) / np.abs(ref))
    return CheckResult("noise_covariance_mc", rel < tol,
                       f"max entrywise relative error {rel:.3e} "
                       f"({n_draws} draws, tol {tol})")


def check_small_h_correlation(n_draws: int = 200_000) -> CheckResult:
    p = derive_step_params(1.0, 1e-3)
    rng = RngStreams(777)
    bx, bv = sample_noise_block(p, rng, 0, n_draws, 1)
    corr = float(np.corrcoef(bx.ravel(), bv.ravel())[0, 1])
    target = math.sqrt(3.0) / 2.0
    err = abs(corr - target) / target
    return CheckResult("small_h_noise_correlation", err < 0.01,
                       f"corr(bx, bv) = {corr:.5f} vs sqrt(3)/2 = {target:.5f}")


def _small_objectives(seed: int = 0):
    g = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    a = g.standard_normal((5, 3))
    b = g.standard_normal(5)
    nn = NeuralNetObjective(inputs=a, labels=b, lambda_prime=1e-2)
    z = g.standard_normal((3, 2))
    mmd = MmdObjective(samples=z, sigma=0.8, lambda_prime=1e-2)
    score, jac = gaussian_score()
    ksd = KsdObjective(dim=2, score=score, score_jacobian=jac,
                       sigma1=1.2, sigma2=0.9, lambda_prime=1e-2)
    return {"nn": (nn, 3), "mmd": (mmd, 2), "ksd": (ksd, 2)}


def check_gradient_identities(n_instances: int = 5) -> CheckResult:
    worst = 0.0
    for seed in range(n_instances):
        g = np.random.Generator(np.random.Philox(np.random.SeedSequence((99, seed))))
        for name, (obj, d) in _small_objectives(seed).items():
            positions = g.standard_normal((4, d))
            err = finite_diff_grad_check(obj, positions, particle=seed % 4)
            worst = max(worst, err)
    return CheckResult("gradient_identities", worst < 1e-5,
                       f"worst finite-difference relative error {worst:.3e} (tol 1e-5)")


def check_mmd_quadrature(n_instances: int = 5) -> CheckResult:
    g = np.random.Generator(np.random.Philox(np.random.SeedSequence(42)))
    worst = 0.0
    for _ in range(n_instances):
        x, xp, z = g.uniform(-1.5, 1.5, size=3)
        sigma = g.uniform(0.5, 1.5)
        pe, de = quadrature_validate_mmd(float(x), float(xp), float(z), float(sigma))
        worst = max(worst, pe, de)
    return CheckResult("mmd_quadrature", worst < 1e-6,
                       f"worst absolute closed-form error {worst:.3e} (tol 1e-6)")


def check_stein_kernel_fd() -> CheckResult:
    score, jac = gaussian_score()
    obj = KsdObjective(dim=2, score=score, score_jacobian=jac,
                       sigma1=1.1, sigma2=0.7)
    g = np.random.Generator(np.random.Philox(np.random.SeedSequence(7)))
    eps = 1e-6
    worst_sym = 0.0
    worst_grad = 0.0
    for _ in range(10):
        x = g.standard_normal(2)
        y = g.standard_normal(2)
        worst_sym = max(worst_sym,
                        abs(obj.stein_kernel(x, y) - obj.stein_kernel(y, x)))
        analytic = obj.stein_kernel_grad_x(x, y)
        scale = max(float(np.max(np.abs(analytic))), 1e-12)
        for j in range(2):
            e = np.zeros(2)
            e[j] = eps
            num = (obj.stein_kernel(x + e, y) - obj.stein_kernel(x - e, y)) / (2 * eps)
            worst_grad = max(worst_grad, abs(num - analytic[j]) / scale)
    passed = worst_sym < 1e-12 and worst_grad < 1e-5
    return CheckResult("stein_kernel", passed,
                       f"symmetry gap {worst_sym:.3e}, grad FD error {worst_grad:.3e}")


def stationary_moment_test(n_particles: int = 2000, n_steps: int = 20_000,
                           h: float = 0.05, n_batches: int = 50
                           ) -> tuple[bool, str]:
    """Long NULA chain on the pure-ridge objective vs the Lyapunov oracle.

    Compares tail-half empirical x- and v-variances against the exact
    stationary covariance, with batch-means standard errors (autocorrelation
    adjustment across time batches).
    """
    spec = LinearChainSpec(gamma=1.0, h=h, lambda_prime=1.0, temperature=1.0)
    target = ou_chain_stationary_covariance(spec)
    rng = RngStreams(2024)
    cloud = init_cloud(n_particles, 1, 0.0, 1.0, rng)
    obj = RidgeObjective(dim=1, lambda_prime=1.0)

    x_series: list[float] = []
    v_series: list[float] = []

    def collect(step, c):
        if step > n_steps // 2:
            x_series.append(float(np.mean(c.positions**2)))
            v_series.append(float(np.mean(c.velocities**2)))

    run_chain(cloud, obj, NulaSpec(spec.step_params()), rng, n_steps,
              record_every=n_steps, callbacks=[collect])

    ok = True
    details = []
    for series, ref, label in ((x_series, target[0, 0], "x"),
                               (v_series, target[1, 1], "v")):
        arr = np.asarray(series)
        batches = np.array_split(arr, n_batches)
        means = np.array([b.mean() for b in batches])
        est = float(arr.mean())
        se = float(means.std(ddof=1) / math.sqrt(n_batches))
        z = abs(est - ref) / se
        details.append(f"{label}: {est:.5f} vs {ref:.5f} (|z| = {z:.2f})")
        if z > 3.0:
            ok = False
    return ok, "; ".join(details)


def check_stationary_moments() -> CheckResult:
    ok, detail = stationary_moment_test()
    return CheckResult("ou_stationary_moments", ok, detail)


def run_checks(level: str = "fast") -> list[CheckResult]:
    if level not in ("fast", "full"):
        raise ValueError(f"level must be 'fast' or 'full', got {level!r}")
    results = [
        check_step_params_exact(),
        check_taylor_limits(),
        check_phi_identity(),
        check_covariance_psd(),
        check_monotone_coefficients(),
        check_noise_covariance_mc(200_000, 0.03),
        check_small_h_correlation(),
        check_gradient_identities(),
        check_mmd_quadrature(),
        check_stein_kernel_fd(),
    ]
    if level == "full":
        results.append(check_noise_covariance_mc(1_000_000, 0.01))
        results.append(check_stationary_moments())
    return results
