"""Deterministic scripted controllers using privileged simulator state.

These are geometric baselines (and acceptance yardsticks), not tactile
policies: they read contour tangents, wall normals and goal bearings
directly from the environment.  Expected bounds: edge following < 0.5 mm
mean error on the disc; pushing reaches goal 10 within 250 steps on the
straight k=0 trajectory; surface following tracks the wall normal to ~2 deg.
"""

from __future__ import annotations

import math

import numpy as np

from .common import wrap_deg
from .envs import EdgeFollowEnv, PushEnv, SurfaceFollowEnv, TactileEnv


class EdgeOracle:
    """Pure-pursuit along the contour with a short lookahead."""

    def __init__(self, lookahead_mm: float = 1.5):
        self.lookahead = lookahead_mm

    def __call__(self, env: EdgeFollowEnv, obs) -> np.ndarray:
        _, s, _ = env.contour.nearest(env.tcp.xy)
        target = env.contour.point_at_arc(s + self.lookahead)
        delta = (target - env.tcp.xy) / env.cfg.step_mm
        return np.clip(delta, -1.0, 1.0)


class SurfaceOracle:
    """Track the wall normal, biasing the heading to servo contact depth."""

    def __init__(self, depth_gain: float = 0.25, max_tilt_deg: float = 20.0,
                 lateral_speed: float = 0.55):
        self.depth_gain = depth_gain
        self.max_tilt = max_tilt_deg
        # slower than full speed so the capped yaw rate can track the wall
        # normal (the disc needs ~1.5 deg of yaw per mm of lateral travel)
        self.lateral_speed = lateral_speed

    def __call__(self, env: SurfaceFollowEnv, obs) -> np.ndarray:
        xy = env.tcp.xy
        depth = -float(env.stimulus.profile.sdf2(xy[None, :])[0])
        depth_err = env.depth_target - depth
        normal_bearing = env._wall_normal_bearing(xy)
        tilt = -math.degrees(math.asin(np.clip(self.depth_gain * depth_err,
                                               -0.95, 0.95)))
        tilt = float(np.clip(tilt, -self.max_tilt, self.max_tilt))
        yaw_err = wrap_deg(normal_bearing + tilt - env.tcp.yaw)
        return np.array([self.lateral_speed,
                         np.clip(yaw_err / env.cfg.step_deg, -1.0, 1.0)])


class PushOracle:
    """Steer the pusher heading at the active goal, correcting object drift."""

    def __init__(self, drift_gain: float = 4.0, max_face_offset_deg: float = 25.0):
        self.drift_gain = drift_gain
        # never point further than this off the object's facing, else the
        # pusher slides off the face when the object cannot keep up
        self.max_face_offset = max_face_offset_deg

    def __call__(self, env: PushEnv, obs) -> np.ndarray:
        goal = env.trajectory.goals[min(env.goal_index, 9)]
        to_goal = goal - env.obj.center
        bearing = math.degrees(math.atan2(to_goal[1], to_goal[0]))
        # lateral offset of the object from the pusher's line of push
        h = env.tcp.heading()
        lat = np.array([-h[1], h[0]])
        drift = float((env.obj.center - env.tcp.xy) @ lat)
        desired = bearing + self.drift_gain * np.clip(drift, -5.0, 5.0)
        off = np.clip(wrap_deg(desired - env.obj.theta),
                      -self.max_face_offset, self.max_face_offset)
        yaw_err = wrap_deg(env.obj.theta + off - env.tcp.yaw)
        return np.array([1.0, np.clip(yaw_err / env.cfg.step_deg, -1.0, 1.0)])


def scripted_oracle(task: str):
    """Controller factory keyed by task name."""
    try:
        return {"edge": EdgeOracle(), "surface": SurfaceOracle(),
                "push": PushOracle()}[task]
    except KeyError:
        raise ValueError(f"unknown task: {task!r}") from None


def run_episode(env: TactileEnv, controller, seed: int = 0, max_steps=None):
    """Roll one episode under a controller; returns the finished trace."""
    obs, trace = env.reset(seed)
    steps = max_steps or env.cfg.resolved_max_steps()
    for _ in range(steps):
        obs, reward, done, info = env.step(controller(env, obs))
        if done:
            break
    return trace
