from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tailsitter_hmpc.core import EulerAttitude, UavState, VehicleParams, euler_to_rotation, rotation_to_euler, vec3

angles = st.floats(-1.2, 1.2, allow_nan=False)


def test_zero_attitude_is_identity():
    assert np.array_equal(euler_to_rotation(EulerAttitude()), np.eye(3))


def test_pitch_quarter_turn_points_thrust_along_x():
    R = euler_to_rotation(EulerAttitude(0.0, math.pi / 2, 0.0))
    np.testing.assert_allclose(R[:, 2], [1.0, 0.0, 0.0], atol=1e-15)


def test_thrust_column_matches_projection():
    R = euler_to_rotation(EulerAttitude(0.1, 0.2, 0.0))
    expected = [math.cos(0.1) * math.sin(0.2), -math.sin(0.1), math.cos(0.1) * math.cos(0.2)]
    np.testing.assert_allclose(R[:, 2], expected, rtol=0, atol=1e-15)


def test_rotation_orthonormal_on_random_attitudes():
    rng = np.random.default_rng(3)
    for phi, theta, psi in rng.uniform(-1.2, 1.2, size=(1000, 3)):
        R = euler_to_rotation(EulerAttitude(phi, theta, psi))
        np.testing.assert_allclose(R @ R.T, np.eye(3), atol=1e-12)
        assert abs(np.linalg.det(R) - 1.0) < 1e-12


@given(angles, angles, angles)
def test_euler_round_trip(phi, theta, psi):
    back = rotation_to_euler(euler_to_rotation(EulerAttitude(phi, theta, psi)))
    np.testing.assert_allclose(back, (phi, theta, psi), atol=1e-9)


def test_params_validation_and_hover_thrust():
    p = VehicleParams()
    assert p.hover_thrust == pytest.approx(0.83 * 9.81)
    with pytest.raises(ValueError):
        VehicleParams(m=0.0)
    with pytest.raises(ValueError):
        VehicleParams(tau_phi=-1.0)


def test_vec3_rejects_non_finite():
    with pytest.raises(ValueError):
        vec3(1.0, math.nan, 0.0)


def test_mpc_state_packing_round_trip():
    s = UavState(np.array([1.0, 2.0, 3.0]), np.array([0.1, 0.2, 0.3]), EulerAttitude(0.05, -0.04, 0.0))
    x = s.as_mpc_state()
    assert x.shape == (8,)
    back = UavState.from_mpc_state(x)
    assert np.array_equal(back.p, s.p) and np.array_equal(back.v, s.v) and back.att == s.att
