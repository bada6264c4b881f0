from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from tailsitter_hmpc.core import ControlInput, EulerAttitude, UavState, VehicleParams
from tailsitter_hmpc.plant import (
    Plant,
    PlantConfig,
    PlantState,
    TruthAeroParams,
    WindField,
    measure,
    plant_derivative,
    step_rk4,
    true_aero_force,
    truth_residual,
)

NO_AERO = TruthAeroParams((0.0, 0.0, 0.0), 0.0, 0.0)
speeds = st.floats(-6.0, 6.0, allow_nan=False)


def test_aero_force_hand_values():
    assert np.array_equal(true_aero_force(np.zeros(3), 7.0, TruthAeroParams()), np.zeros(3))
    f = true_aero_force(np.array([1.0, 0.0, 0.0]), 0.0, TruthAeroParams((0.5, 0.0, 0.0), 0.0, 0.0))
    np.testing.assert_allclose(f, [-0.5, 0.0, 0.0], atol=1e-15)
    f = true_aero_force(np.array([2.0, 0.0, 0.0]), 8.0, TruthAeroParams((0.0, 0.0, 0.0), 0.0, 0.05))
    np.testing.assert_allclose(f, [-0.8, 0.0, 0.0], atol=1e-15)


@given(speeds, speeds, speeds)
def test_aero_force_odd_without_lift_and_thrust(a, b, c):
    aero = TruthAeroParams((0.55, 0.12, 0.3), 0.0, 0.04)
    v = np.array([a, b, c])
    np.testing.assert_array_equal(true_aero_force(-v, 0.0, aero), -true_aero_force(v, 0.0, aero))


@given(speeds, speeds, speeds)
def test_aero_force_dissipative(a, b, c):
    v = np.array([a, b, c])
    assert float(true_aero_force(v, 9.0, TruthAeroParams()) @ v) <= 0.0


def test_hover_and_free_fall_derivatives():
    cfg = PlantConfig(aero=NO_AERO)
    d = plant_derivative(PlantState.hover(cfg.params), ControlInput(cfg.params.hover_thrust), np.zeros(3), cfg)
    np.testing.assert_allclose(d[0:6], 0.0, atol=1e-12)
    ps = PlantState(UavState(), 0.0)
    d = plant_derivative(ps, ControlInput(0.0), np.zeros(3), cfg)
    np.testing.assert_allclose(d[3:6], [0.0, 0.0, -9.81], atol=1e-15)


def test_drifting_with_wind_has_no_aero_force():
    cfg = PlantConfig()
    wind = np.array([2.0, -1.0, 0.5])
    ps = PlantState(UavState(v=wind.copy()), cfg.params.hover_thrust)
    d = plant_derivative(ps, ControlInput(cfg.params.hover_thrust), wind, cfg)
    np.testing.assert_allclose(d[3:6], 0.0, atol=1e-14)


def test_truth_residual_matches_plant_derivative():
    cfg = PlantConfig()
    rng = np.random.default_rng(1)
    for _ in range(20):
        v = rng.uniform(-3, 3, 3)
        att = EulerAttitude(*rng.uniform(-0.5, 0.5, 2), 0.0)
        T = rng.uniform(4, 12)
        ps = PlantState(UavState(v=v, att=att), T)
        d = plant_derivative(ps, ControlInput(T, att.phi, att.theta), np.zeros(3), cfg)
        thrust = np.array([math.cos(att.phi) * math.sin(att.theta), -math.sin(att.phi), math.cos(att.phi) * math.cos(att.theta)])
        nominal = thrust * T / cfg.params.m - np.array([0, 0, cfg.params.g])
        np.testing.assert_allclose(d[3:6] - nominal, truth_residual([*v, att.phi, att.theta, T], cfg), atol=1e-12)


def test_ballistic_motion_is_exact():
    cfg = PlantConfig(aero=NO_AERO, motor_tau=0.0)
    v0 = np.array([1.0, -2.0, 3.0])
    ps = PlantState(UavState(v=v0), 0.0)
    for _ in range(500):
        ps = step_rk4(ps, ControlInput(0.0), cfg, WindField())
    t = 1.0
    np.testing.assert_allclose(ps.state.p, v0 * t - 0.5 * 9.81 * t * t * np.array([0, 0, 1.0]), atol=1e-10)


def _maneuver(dt: float) -> np.ndarray:
    cfg = PlantConfig()
    ps = PlantState(UavState(v=np.array([1.0, 0.5, -0.5])), 6.0)
    cmd = ControlInput(10.0, 0.3, 0.4)
    # strong headwind keeps every body airspeed one-signed, away from the v|v| kink
    wind = WindField.constant(-4.0, -4.0, -4.0)
    n = int(round(5.0 / dt))
    for _ in range(n):
        ps = step_rk4(ps, cmd, cfg, wind, dt)
    return np.array(ps.pack())


def test_rk4_convergence_order():
    ref = _maneuver(0.02 / 16)
    e1 = np.max(np.abs(_maneuver(0.02) - ref))
    e2 = np.max(np.abs(_maneuver(0.01) - ref))
    assert math.log2(e1 / e2) >= 3.8


def test_attitude_first_order_response():
    cfg = PlantConfig(aero=NO_AERO)
    plant = Plant(cfg, initial=PlantState.hover(cfg.params))
    cmd = ControlInput(cfg.params.hover_thrust, 0.2, 0.0)
    for k in range(1, 301):
        plant.step(cmd)
        t = k * cfg.dt_sim
        if t >= 0.2:
            expected = 0.2 * (1 - math.exp(-t / cfg.tau_phi_true))
            assert abs(plant.raw[6] - expected) <= 0.02 * expected


def test_energy_non_increasing_under_drag():
    cfg = PlantConfig(aero=TruthAeroParams((0.55, 0.12, 0.3), 0.0, 0.0), motor_tau=0.0)
    ps = PlantState(UavState(p=np.array([0, 0, 50.0]), v=np.array([4.0, -3.0, 2.0]), att=EulerAttitude(0.3, -0.2)), 0.0)
    m, g = cfg.params.m, cfg.params.g
    energy = lambda s: 0.5 * m * float(s.state.v @ s.state.v) + m * g * s.state.p[2]
    prev = energy(ps)
    for _ in range(1000):
        ps = step_rk4(ps, ControlInput(0.0, 0.3, -0.2), cfg, WindField())
        e = energy(ps)
        assert e <= prev + 1e-12
        prev = e


def test_measurement_noise_and_determinism():
    cfg = PlantConfig(noise_att_sigma=0.0)
    ps = PlantState.hover(cfg.params)
    assert np.array_equal(measure(ps, cfg.noiseless(), None).p, ps.state.p)
    rng = np.random.default_rng(0)
    draws = np.array([measure(ps, cfg, rng).p for _ in range(100_000 // 3)]).ravel()
    assert abs(np.std(draws) / 1e-3 - 1.0) < 0.05
    a = [measure(ps, cfg, np.random.default_rng(4)).p for _ in range(3)]
    assert all(np.array_equal(a[0], x) for x in a)


def test_plant_traces_are_bit_identical():
    def trace(seed):
        cfg = replace(PlantConfig(), rng_seed=seed)
        plant = Plant(cfg, WindField("gusty", (1.0, 0.0, 0.0), 0.5))
        out = []
        for k in range(200):
            plant.step(ControlInput(8.5, 0.05 * math.sin(k / 10), 0.1), 5)
            out.append((plant.raw, tuple(plant.measure().p)))
        return out

    assert trace(5) == trace(5)
    assert trace(5) != trace(6)


def test_rejects_bad_config():
    import pytest

    with pytest.raises(ValueError):
        PlantConfig(dt_sim=0.0)
    with pytest.raises(ValueError):
        WindField("storm")
    with pytest.raises(ValueError):
        TruthAeroParams((0.1, 0.2, 0.3))
