from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tailsitter_hmpc.baselines import (
    BaselineGains,
    PidController,
    PidState,
    TrackingError,
    backstepping_cmd,
    invert_virtual_inputs,
    pid_cmd,
    sliding_mode_cmd,
)
from tailsitter_hmpc.core import ControlInput, EulerAttitude, VehicleParams

P = VehicleParams()
G = BaselineGains()
ZERO = TrackingError(np.zeros(3), np.zeros(3))
finite = st.floats(-1e3, 1e3, allow_nan=False)
vec = st.tuples(finite, finite, finite).map(np.array)


def test_equilibrium_is_exact_hover():
    hover = ControlInput(P.m * P.g, 0.0, 0.0)
    assert backstepping_cmd(ZERO, np.zeros(3), EulerAttitude(), G, P) == hover
    assert sliding_mode_cmd(ZERO, np.zeros(3), EulerAttitude(), G, P) == hover
    assert pid_cmd(ZERO, PidState(), G, P, 0.01) == hover


def test_backstepping_hand_case():
    err = TrackingError(np.array([1.0, 0.0, 0.0]), np.zeros(3))
    cmd = backstepping_cmd(err, np.zeros(3), EulerAttitude(), G, P)
    u_x = 0.83 / (0.83 * 9.81) * 2.0
    assert cmd.thrust == pytest.approx(P.m * P.g, abs=1e-12)
    assert cmd.theta_cmd == pytest.approx(math.asin(u_x), abs=1e-12)
    assert cmd.theta_cmd == pytest.approx(0.2054, abs=1e-4)


def test_backstepping_saturates_roll():
    err = TrackingError(np.array([0.0, 50.0, 0.0]), np.zeros(3))
    cmd = backstepping_cmd(err, np.zeros(3), EulerAttitude(), G, P)
    assert abs(cmd.phi_cmd) == pytest.approx(G.angle_max, abs=1e-12)


def test_sliding_mode_hand_case():
    err = TrackingError(np.array([0.0, 0.0, 0.1]), np.zeros(3))
    cmd = sliding_mode_cmd(err, np.zeros(3), EulerAttitude(), G, P)
    assert cmd.thrust / P.m - P.g == pytest.approx(2.5 * math.tanh(3.0), abs=1e-12)
    # 2.4878 rounds tanh(3) to 0.9951 first; the exact value is 2.48764
    assert 2.5 * math.tanh(3.0) == pytest.approx(2.4878, abs=5e-4)


@given(finite, finite)
def test_sliding_mode_correction_is_odd(ex, edx):
    a = sliding_mode_cmd(TrackingError(np.array([ex, 0, 0]), np.array([edx, 0, 0])), np.zeros(3), EulerAttitude(), G, P)
    b = sliding_mode_cmd(TrackingError(np.array([-ex, 0, 0]), np.array([-edx, 0, 0])), np.zeros(3), EulerAttitude(), G, P)
    assert a.theta_cmd == pytest.approx(-b.theta_cmd, abs=1e-12)


@given(vec, vec, vec, st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
def test_commands_bounded(e, ed, acc, phi, theta):
    att = EulerAttitude(phi, theta, 0.0)
    mg = P.m * P.g
    for cmd in (
        backstepping_cmd(TrackingError(e, ed), acc, att, G, P),
        sliding_mode_cmd(TrackingError(e, ed), acc, att, G, P),
        pid_cmd(TrackingError(e, ed), PidState(), G, P, 0.01, att),
    ):
        assert G.thrust_min_ratio * mg - 1e-12 <= cmd.thrust <= G.thrust_max_ratio * mg + 1e-12
        assert abs(cmd.phi_cmd) <= G.angle_max + 1e-12 and abs(cmd.theta_cmd) <= G.angle_max + 1e-12


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_inversion_identity(u_x, u_y):
    phi, theta, ux_c, uy_c = invert_virtual_inputs(u_x, u_y, G.angle_max)
    assert math.cos(phi) * math.sin(theta) == pytest.approx(ux_c, abs=1e-9)
    assert -math.sin(phi) == pytest.approx(uy_c, abs=1e-9)


def test_pid_integral_clamp():
    ctrl = PidController(G, P, 0.01)
    err = TrackingError(np.array([1.0, 0.0, 0.0]), np.zeros(3))
    for _ in range(10_000):
        ctrl(err, np.zeros(3), EulerAttitude())
    assert ctrl.state.integral[0] == G.integral_limit


def test_verbatim_gravity_flag_tilts_at_zero_error():
    cmd = backstepping_cmd(ZERO, np.zeros(3), EulerAttitude(), BaselineGains(g_in_xy_rows=True), P)
    assert abs(cmd.theta_cmd) > 0.5


def test_gain_validation():
    with pytest.raises(ValueError):
        BaselineGains(epsilon=0.0)
    with pytest.raises(ValueError):
        BaselineGains(k_bx=(-1.0, 1.0))
