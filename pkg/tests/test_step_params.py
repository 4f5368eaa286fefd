import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfl.errors import ConfigError
from mfl.integrators import StepParams, derive_step_params, tuned_step_params

# Frozen against 50-digit evaluation of the closed forms (independent oracle).
FROZEN = {
    (1.0, 0.1): (0.095162581964040427, 0.0048374180359595732,
                 0.90483741803595957, 0.00061891906585643399,
                 0.0090559170060627123, 0.18126924692201814),
    (2.0, 0.1): (0.090634623461009071, 0.0046826882694954647,
                 0.81873075307798186, 0.0011507415690720335,
                 0.016429269939837792, 0.3296799539643607),
    (1.0, 0.5): (0.39346934028736658, 0.10653065971263342,
                 0.60653065971263342, 0.058243197679091373,
                 0.15481812174617547, 0.63212055882855768),
}


@pytest.mark.parametrize("gamma,h", sorted(FROZEN))
def test_frozen_high_precision_values(gamma, h):
    p = derive_step_params(gamma, h)
    ref = FROZEN[(gamma, h)]
    ours = (p.phi0, p.phi1, p.phi2, p.sigma11, p.sigma12, p.sigma22)
    for a, b in zip(ours, ref):
        assert a == pytest.approx(b, rel=1e-14)


def test_phi3_equals_phi0():
    p = derive_step_params(3.0, 0.2)
    assert p.phi3 == p.phi0


def test_series_and_direct_branches_agree_at_threshold():
    # u = gamma*h straddling the series/direct switch at 0.5.  The genuine
    # variation over the 2e-9 step in h is ~4e-9 relative; a branch mismatch
    # would show up orders of magnitude larger.
    for u in (0.4999, 0.5, 0.5001):
        lo = derive_step_params(1.0, u * (1 - 1e-9))
        hi = derive_step_params(1.0, u * (1 + 1e-9))
        assert lo.phi1 == pytest.approx(hi.phi1, rel=2e-8)
        assert lo.sigma11 == pytest.approx(hi.sigma11, rel=2e-8)


def test_taylor_limits_small_h():
    gamma, h = 1.0, 1e-3
    p = derive_step_params(gamma, h)
    assert p.sigma11 == pytest.approx((2.0 / 3.0) * gamma * h**3, rel=1e-2)
    assert p.sigma12 == pytest.approx(gamma * h**2, rel=1e-2)
    assert p.sigma22 == pytest.approx(2.0 * gamma * h, rel=1e-2)


@settings(max_examples=200, deadline=None)
@given(gamma=st.floats(0.05, 200.0), h=st.floats(1e-8, 2.0))
def test_structural_properties(gamma, h):
    p = derive_step_params(gamma, h)
    # exact linear identity of the coefficients, h-normalized residual
    assert abs(gamma * p.phi1 + p.phi0 - h) / h < 1e-12
    # ranges
    # phi0 = (1 - e^{-gh})/g; at large gh the float value rounds to 1/g
    assert 0.0 < p.phi0 <= 1.0 / gamma
    assert 0.0 < p.phi2 < 1.0
    assert p.phi1 > 0.0
    # noise covariance is PSD
    det = p.sigma11 * p.sigma22 - p.sigma12**2
    assert det >= -1e-14 * p.sigma11 * p.sigma22
    assert p.sigma11 >= 0.0 and p.sigma22 >= 0.0


@settings(max_examples=100, deadline=None)
@given(gamma=st.floats(0.1, 50.0), h=st.floats(1e-6, 1.0),
       temp=st.floats(0.01, 10.0))
def test_temperature_scales_covariance_only(gamma, h, temp):
    base = derive_step_params(gamma, h)
    hot = derive_step_params(gamma, h, temperature=temp)
    assert (hot.phi0, hot.phi1, hot.phi2) == (base.phi0, base.phi1, base.phi2)
    assert hot.covariance() == pytest.approx(
        tuple(temp * s for s in base.covariance()), rel=1e-15)


def test_h_zero_degenerates_to_identity_step():
    p = derive_step_params(1.0, 0.0)
    assert p.phi0 == 0.0 and p.phi1 == 0.0 and p.phi2 == 1.0
    assert p.sigma11 == 0.0 and p.sigma12 == 0.0 and p.sigma22 == 0.0


def test_tuned_params_isotropic_noise():
    p = tuned_step_params(1e-4, 0.02, 0.99, 0.02, eta=1e-3)
    assert p.sigma11 == p.sigma22 == 1e-6
    assert p.sigma12 == 0.0
    assert p.phi3 == 0.02
    assert p.mode == "tuned"


@pytest.mark.parametrize("call", [
    lambda: derive_step_params(0.0, 0.1),
    lambda: derive_step_params(-1.0, 0.1),
    lambda: derive_step_params(1.0, -0.1),
    lambda: derive_step_params(1.0, 0.1, temperature=0.0),
    lambda: tuned_step_params(1e-4, 0.02, 1.5, 0.02, 1e-3),
    lambda: tuned_step_params(1e-4, 0.02, 0.99, 0.02, -1e-3),
    lambda: StepParams(0.1, 0.01, 0.9, 0.1, 1.0, 2.0, 1.0),  # not PSD
    lambda: StepParams(0.1, 0.01, 0.9, 0.1, 1.0, 0.0, 1.0, mode="bogus"),
])
def test_invalid_parameters_rejected(call):
    with pytest.raises(ConfigError):
        call()
