from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tailsitter_hmpc.trajectories import (
    HOVER_ALTITUDE,
    CircleSpec,
    circle_ref,
    excitation_program,
    hover_ref,
    lemniscate_ref,
    preview,
    program_duration,
    step_ref,
)

times = st.floats(0.0, 120.0, allow_nan=False)


def test_step_reference():
    assert np.array_equal(step_ref(4.99).p_d, [0.0, 0.0, HOVER_ALTITUDE])
    assert np.array_equal(step_ref(5.0).p_d, [2.0, 0.0, HOVER_ALTITUDE])
    for t in (0.0, 5.0, 9.0):
        r = step_ref(t)
        assert not r.v_d.any() and not r.a_d.any()


def test_circle_speed_profile_endpoints():
    assert np.linalg.norm(circle_ref(0.0).v_d) == pytest.approx(1.5, abs=1e-12)
    assert np.linalg.norm(circle_ref(40.0).v_d) == pytest.approx(3.0, abs=1e-12)


@given(times)
def test_circle_radius_and_speed(t):
    spec = CircleSpec()
    r = circle_ref(t, spec)
    assert abs(np.linalg.norm(r.p_d[:2] - np.array(spec.center)) - 1.5) < 1e-12
    assert abs(np.linalg.norm(r.v_d) - spec.speed(t)) < 1e-9


def test_lemniscate_values():
    np.testing.assert_allclose(lemniscate_ref(0.0).p_d, [2.0, 0.0, HOVER_ALTITUDE], atol=1e-15)
    np.testing.assert_allclose(lemniscate_ref(math.pi / 3).p_d[:2], [0.0, 0.0], atol=1e-15)
    ts = np.linspace(0, 2 * math.pi, 20001)
    assert max(abs(lemniscate_ref(t).v_d[1]) for t in ts) == pytest.approx(3.0, abs=1e-6)


@given(times)
def test_lemniscate_closed_form(t):
    r = lemniscate_ref(t)
    np.testing.assert_allclose(r.p_d[:2], [2 * math.cos(1.5 * t), 2 * math.cos(1.5 * t) * math.sin(1.5 * t)], atol=1e-12)


@pytest.mark.parametrize("traj", [circle_ref, lemniscate_ref])
@given(t=st.floats(1.0, 60.0, allow_nan=False))
def test_derivatives_consistent(traj, t):
    h = 1e-4
    dp = (traj(t + h).p_d - traj(t - h).p_d) / (2 * h)
    dv = (traj(t + h).v_d - traj(t - h).v_d) / (2 * h)
    np.testing.assert_allclose(dp, traj(t).v_d, atol=1e-6)
    np.testing.assert_allclose(dv, traj(t).a_d, atol=1e-6)


def test_preview_sampling():
    pts = preview(hover_ref, 3.0, 20, 0.05)
    assert len(pts) == 21 and all(np.array_equal(p.p_d, pts[0].p_d) for p in pts)
    pts = preview(circle_ref, 0.0, 20, 0.05)
    # one second of arc at the initial speed
    a0 = math.atan2(*pts[0].p_d[1::-1])
    a1 = math.atan2(*pts[-1].p_d[1::-1])
    assert (a1 - a0) * 1.5 == pytest.approx(1.5 * 1.0 + 0.5 * (1.5 / 40.0), rel=1e-9)
    pts = preview(step_ref, 4.5, 20, 0.05)
    assert pts[0].p_d[0] == 0.0 and pts[-1].p_d[0] == 2.0
    with pytest.raises(ValueError):
        preview(hover_ref, 0.0, 0, 0.05)


def test_excitation_program_shape():
    prog = excitation_program(seed=0)
    assert len(prog) >= 18
    assert program_duration(prog) >= 1440.0
    again = excitation_program(seed=0)
    for a, b in zip(prog, again):
        assert a.name == b.name
        for t in (0.0, 7.3, 55.0):
            assert np.array_equal(a.trajectory(t).p_d, b.trajectory(t).p_d)


def test_reduced_program_caps_speed():
    for seg in excitation_program(seed=1, reduced=True):
        if seg.kind != "manual":
            continue
        ts = np.arange(0.0, seg.takeoff + seg.duration, 0.01)
        assert max(np.linalg.norm(seg.trajectory(t).v_d) for t in ts) <= 2.0 + 1e-9
