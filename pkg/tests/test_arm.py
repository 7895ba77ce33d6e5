"""Arm kinematics, contact reduction and the quasi-static pushing model."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tacbench.arm import (ContactSummary, ObjectState, PushParams,
                          WorkspaceLimits, apply_action, clamp_pose,
                          footprint_limit_ratio, push_step, resolve_contact)
from tacbench.common import Pose4, wrap_deg
from tacbench.geometry import HalfSpace, make_stimulus
from tacbench.sensors import make_sensor


# ---------------------------------------------------------------------------
# workspace and actions

@settings(max_examples=50, deadline=None)
@given(st.floats(-1000, 1000), st.floats(-1000, 1000),
       st.floats(-500, 500), st.floats(-720, 720))
def test_clamp_pose_idempotent(x, y, z, yaw):
    lim = WorkspaceLimits()
    once = clamp_pose(Pose4(x, y, z, yaw), lim)
    twice = clamp_pose(once, lim)
    # idempotent up to one re-projection rounding step
    assert math.hypot(twice.x - once.x, twice.y - once.y) < 1e-9
    assert twice.z == once.z and twice.yaw == once.yaw
    assert math.hypot(once.x - lim.base_x, once.y - lim.base_y) <= lim.reach + 1e-9
    assert lim.z_min <= once.z <= lim.z_max


def test_clamp_pose_inside_unchanged():
    p = Pose4(10.0, 20.0, 30.0, 40.0)
    assert clamp_pose(p) == p


def test_apply_action_edge_is_world_xy():
    q = apply_action(Pose4(0, 0, 0, 77.0), [1.0, -0.5], "edge", step_mm=2.0)
    assert (q.x, q.y) == pytest.approx((2.0, -1.0))
    assert q.yaw == pytest.approx(77.0)


def test_apply_action_push_is_heading_and_yaw():
    q = apply_action(Pose4(0, 0, 0, 90.0), [1.0, 1.0], "push",
                     step_mm=3.0, step_deg=2.0)
    assert (q.x, q.y) == pytest.approx((0.0, 3.0), abs=1e-12)
    assert q.yaw == pytest.approx(92.0)


def test_apply_action_surface_is_lateral():
    # at yaw 0 (pressing along +x) the lateral axis is +y
    q = apply_action(Pose4(0, 0, 0, 0.0), [1.0, 0.0], "surface", step_mm=1.5)
    assert (q.x, q.y) == pytest.approx((0.0, 1.5), abs=1e-12)


def test_apply_action_clips_and_validates():
    q = apply_action(Pose4(0, 0, 0, 0), [5.0, 0.0], "edge", step_mm=1.0)
    assert q.x == pytest.approx(1.0)
    with pytest.raises(ValueError):
        apply_action(Pose4(0, 0, 0, 0), [1.0, 0.0, 0.0], "edge")
    with pytest.raises(ValueError):
        apply_action(Pose4(0, 0, 0, 0), [1.0, 0.0], "juggle")


@settings(max_examples=50, deadline=None)
@given(st.floats(-1e4, 1e4))
def test_wrap_deg_range_and_identity(a):
    w = wrap_deg(a)
    assert -180.0 < w <= 180.0
    assert math.isclose(math.cos(math.radians(a)), math.cos(math.radians(w)),
                        abs_tol=1e-9)


# ---------------------------------------------------------------------------
# contact reduction

PLANE = HalfSpace((0.0, 0.0, 1.0), 0.0)


def test_resolve_contact_no_contact():
    c = resolve_contact(make_sensor("digit"), Pose4(0, 0, 5.0, 0), PLANE, "down")
    assert not c.in_contact
    assert c.max_penetration == 0.0


def test_resolve_contact_centroid_on_plane():
    sensor = make_sensor("tactip")
    c = resolve_contact(sensor, Pose4(3.0, -2.0, -1.5, 0.0), PLANE, "down")
    assert c.in_contact
    assert c.max_penetration == pytest.approx(1.5, abs=2e-3)   # half-pixel sag
    # symmetric press: centroid under the TCP
    assert c.centroid[0] == pytest.approx(3.0, abs=1e-6)
    assert c.centroid[1] == pytest.approx(-2.0, abs=1e-6)
    assert c.area > 0


def test_resolve_contact_normal_of_wall():
    wall = HalfSpace((-1.0, 0.0, 0.0), 0.0)
    c = resolve_contact(make_sensor("digit"), Pose4(0.5, 0.0, 40.0, 0.0),
                        wall, "horizontal")
    np.testing.assert_allclose(c.normal_xy, [-1.0, 0.0], atol=1e-6)


def test_object_state_validation():
    with pytest.raises(ValueError):
        ObjectState(0, 0, 0, -5.0, 0.3, "cube")


# ---------------------------------------------------------------------------
# pushing dynamics

def _contact_at(obj: ObjectState, offset_y: float) -> ContactSummary:
    """Contact on the object's -x face at lateral offset, pushing along +x."""
    stim = make_stimulus(obj.stimulus_id)
    xmin = stim.profile.bbox()[0]
    return ContactSummary(True, 0.5,
                          (obj.x + xmin, obj.y + offset_y, 20.0),
                          (-1.0, 0.0), 10.0)


def test_push_step_head_on_pure_translation():
    obj = ObjectState(0.0, 0.0, 0.0, 274.0, 0.3, "cube")
    out = push_step(obj, _contact_at(obj, 0.0), [1.0, 0.0], 0.0)
    assert out.x == pytest.approx(1.0, abs=1e-9)
    assert out.y == pytest.approx(0.0, abs=1e-9)
    assert out.theta == pytest.approx(0.0, abs=1e-9)


def test_push_step_offset_contact_rotates_correct_sign():
    obj = ObjectState(0.0, 0.0, 0.0, 274.0, 0.3, "cube")
    # contact below centre pushing +x torques the object counter-clockwise
    out = push_step(obj, _contact_at(obj, -10.0), [1.0, 0.0], 0.0)
    assert out.theta > 0
    out2 = push_step(obj, _contact_at(obj, 10.0), [1.0, 0.0], 0.0)
    assert out2.theta < 0
    assert out.theta == pytest.approx(-out2.theta, abs=1e-9)


def test_push_step_retreat_and_validation():
    obj = ObjectState(0.0, 0.0, 0.0, 274.0, 0.3, "cube")
    c = _contact_at(obj, 0.0)
    assert push_step(obj, c, [-1.0, 0.0], 0.0) == obj   # pulling away: no drag
    assert push_step(obj, c, [0.0, 0.0], 0.0) == obj
    with pytest.raises(ValueError):
        push_step(obj, ContactSummary(False, 0, (0, 0, 0), (1, 0), 0),
                  [1.0, 0.0], 0.0)
    with pytest.raises(ValueError):
        push_step(obj, c, [1.0, 0.0, 0.0], 0.0)


def test_push_step_sticking_tracks_contact_point():
    # sticking solution: the contact point moves exactly with the pusher
    obj = ObjectState(0.0, 0.0, 0.0, 363.0, 0.3, "cylinder")
    c = _contact_at(obj, 8.0)
    u = np.array([1.0, 0.1])
    out = push_step(obj, c, u, 0.0, PushParams(contact_friction=10.0))
    dtheta = math.radians(out.theta - obj.theta)
    r = c.centroid_xy - obj.center
    moved = (np.array([out.x - obj.x, out.y - obj.y])
             + dtheta * np.array([-r[1], r[0]]))
    np.testing.assert_allclose(moved, u, atol=1e-6)


def test_limit_ratio_disc_analytic():
    # uniform pressure on a disc of radius R: mean support radius is 2R/3
    got = footprint_limit_ratio("cylinder")
    assert got == pytest.approx(0.8 * 2.0 * 30.0 / 3.0, rel=0.01)


def _integration_oracle_omega(stimulus_id: str, r: np.ndarray,
                              u: np.ndarray) -> float:
    """Rotation per sticking push step by direct support-friction balance.

    With the contact point constrained to track the pusher, the free twist
    parameter is omega; quasi-static balance requires the support-friction
    wrench to be equivalent to a single force at the contact point, i.e.
    residual moment about the contact must vanish.
    """
    prof = make_stimulus(stimulus_id).profile
    xmin, xmax, ymin, ymax = prof.bbox()
    step = 1.0
    xs = np.arange(xmin + step / 2, xmax, step)
    ys = np.arange(ymin + step / 2, ymax, step)
    gx, gy = np.meshgrid(xs, ys)
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    pts = pts[prof.sdf2(pts) <= 0.0]

    def residual(omega: float) -> float:
        v = u - omega * np.array([-r[1], r[0]])
        vel = v[None, :] + omega * np.stack([-pts[:, 1], pts[:, 0]], axis=1)
        nrm = np.linalg.norm(vel, axis=1)
        unit = vel / np.maximum(nrm, 1e-12)[:, None]
        f = -unit.sum(axis=0)                       # net friction force
        m = -(pts[:, 0] * unit[:, 1] - pts[:, 1] * unit[:, 0]).sum()
        # moment of the support wrench about the contact point
        return m - (r[0] * f[1] - r[1] * f[0])

    lo, hi = -0.5, 0.5
    flo = residual(lo)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if residual(mid) * flo > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@pytest.mark.parametrize("stimulus_id,offset", [
    ("cube", 8.0), ("cube", -15.0), ("cylinder", 10.0), ("tri_prism", 6.0)])
def test_push_rotation_matches_friction_integration(stimulus_id, offset):
    obj = ObjectState(0.0, 0.0, 0.0, 300.0, 0.3, stimulus_id)
    c = _contact_at(obj, offset)
    u = np.array([1.0, 0.0])
    out = push_step(obj, c, u, 0.0, PushParams(contact_friction=10.0))
    got = math.radians(out.theta - obj.theta)
    want = _integration_oracle_omega(stimulus_id, c.centroid_xy - obj.center, u)
    assert got == pytest.approx(want, abs=0.1 * max(abs(want), 1e-3))
