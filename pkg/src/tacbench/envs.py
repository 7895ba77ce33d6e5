"""The three task environments: object pushing, edge following, surface following.

Episodic reset/step contracts with dense bounded rewards, goal-segmented
push trajectories, per-episode domain randomization and bitwise-reproducible
traces.  Action conventions (tool-frame, per task) live in arm.apply_action.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .common import Pose4, wrap_deg
from .arm import (ContactSummary, ObjectState, PushParams, WorkspaceLimits,
                  apply_action, push_step, resolve_contact)
from .geometry import (Contour, EDGE_PLATE_TOP, SURFACE_WALL_HEIGHT,
                       PUSH_OBJECT_HEIGHT, contour_points, make_stimulus)
from .sensors import SensorModel, TactileImage, make_sensor, render_depth
from .translate import PerturbationModel, Translator, perturb, translate

TRACE_SCHEMA_VERSION = 1

GRAVITY_MM_S2 = 9810.0

# skin compliance constants for pushing: (stiffness N/mm, full-grip penetration mm).
# Softer skins seat deeper on light objects; the DIGIT's stiff elastomer needs
# a heavier object before the contact carries full steering authority.
PUSH_COMPLIANCE = {
    "tactip": (0.35, 1.2),
    "digitac": (0.60, 0.9),
    "digit": (1.80, 0.55),
}

# contact-depth setpoints: midpoints of the per-sensor sampling ranges
EDGE_DEPTH_SETPOINT = {"tactip": 3.5, "digitac": 3.0, "digit": 2.5}
EDGE_DEPTH_TOL = {"tactip": 1.5, "digitac": 1.0, "digit": 0.5}
SURF_DEPTH_SETPOINT = {"tactip": 2.5, "digitac": 2.0, "digit": 1.5}
SURF_DEPTH_TOL = {"tactip": 1.5, "digitac": 1.0, "digit": 0.5}
SURF_ANGLE_TOL = {"tactip": 15.0, "digitac": 15.0, "digit": 11.0}

REWARD_TERM_CLIP = 5.0      # each penalty term clipped to [0, 5]


# ---------------------------------------------------------------------------
# goal trajectories

TRAJECTORY_KINDS = ("straight", "curve", "sine")


@dataclass
class GoalTrajectory:
    kind: str
    k: float
    polyline: np.ndarray        # dense, arc pitch <= 0.5 mm
    goals: np.ndarray           # (n_goals, 2), final point of each section
    arc: np.ndarray             # cumulative arc length per polyline vertex

    @property
    def length(self) -> float:
        return float(self.arc[-1])

    def point_at_arc(self, s: float) -> np.ndarray:
        s = float(np.clip(s, 0.0, self.length))
        i = min(int(np.searchsorted(self.arc, s, side="right")) - 1,
                len(self.polyline) - 2)
        seg = self.polyline[i + 1] - self.polyline[i]
        seglen = max(float(np.linalg.norm(seg)), 1e-12)
        return self.polyline[i] + (s - self.arc[i]) / seglen * seg

    def tangent_at_arc(self, s: float) -> np.ndarray:
        h = 0.5
        t = self.point_at_arc(s + h) - self.point_at_arc(max(s - h, 0.0))
        return t / max(float(np.linalg.norm(t)), 1e-12)


def make_trajectory(kind: str, k: float = 0.0, n_goals: int = 10,
                    sine_amplitude_mm: float = 0.02,
                    x_max: float = 200.0) -> GoalTrajectory:
    """Dense push trajectory over x in [0, x_max] with equal-arc-length goals.

    straight: y = k x (k in [-0.3, 0.3]); curve: y = 0.001 x^2;
    sine: y = A sin(0.02 x) with configurable amplitude A.
    """
    if kind not in TRAJECTORY_KINDS:
        raise ValueError(f"unknown trajectory kind: {kind!r}")
    if kind == "straight" and not -0.3 <= k <= 0.3:
        raise ValueError(f"straight-line slope k={k} outside [-0.3, 0.3]")

    def f(x):
        if kind == "straight":
            return k * x
        if kind == "curve":
            return 0.001 * x * x
        return sine_amplitude_mm * np.sin(0.02 * x)

    # oversample in x, then verify arc pitch
    xs = np.linspace(0.0, x_max, int(x_max / 0.25) + 1)
    poly = np.stack([xs, f(xs)], axis=1)
    seg = np.linalg.norm(np.diff(poly, axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    total = arc[-1]
    targets = (np.arange(n_goals) + 1) * total / n_goals
    idx = np.clip(np.searchsorted(arc, targets, side="right") - 1, 0, len(poly) - 2)
    frac = (targets - arc[idx]) / np.maximum(seg[idx], 1e-12)
    goals = poly[idx] + frac[:, None] * (poly[idx + 1] - poly[idx])
    goals[-1] = poly[-1]
    return GoalTrajectory(kind=kind, k=k, polyline=poly, goals=goals, arc=arc)


# ---------------------------------------------------------------------------
# configuration and randomization

@dataclass(frozen=True)
class DomainRandomization:
    """Per-episode draw ranges; all zero-width by default (nominal params)."""

    depth_jitter_mm: float = 0.0        # +- on the contact-depth setpoint
    compliance_pct: float = 0.0         # +- fraction on max penetration
    friction_pct: float = 0.0           # +- fraction on friction coefficients
    obs_noise_max: float = 0.0          # sigma drawn from [0, max], mm
    tcp_noise: bool = False             # arm repeatability noise toggle


@dataclass(frozen=True)
class RandomizedParams:
    depth_jitter: float
    compliance_scale: float
    friction_scale: float
    obs_noise_sigma: float
    tcp_noise: bool

    def to_dict(self) -> dict:
        return asdict(self)


def randomize(cfg: "EnvConfig", rng: np.random.Generator) -> RandomizedParams:
    dr = cfg.randomization
    return RandomizedParams(
        depth_jitter=float(rng.uniform(-dr.depth_jitter_mm, dr.depth_jitter_mm)),
        compliance_scale=float(rng.uniform(1 - dr.compliance_pct, 1 + dr.compliance_pct)),
        friction_scale=float(rng.uniform(1 - dr.friction_pct, 1 + dr.friction_pct)),
        obs_noise_sigma=float(rng.uniform(0.0, dr.obs_noise_max)),
        tcp_noise=dr.tcp_noise,
    )


TCP_REPEATABILITY_SIGMA = 0.05  # mm


@dataclass(frozen=True)
class EnvConfig:
    task: str                           # 'push' | 'edge' | 'surface'
    sensor_id: str = "tactip"
    stimulus_id: str | None = None      # default per task below
    trajectory_kind: str = "straight"   # push only
    trajectory_k: float = 0.0
    sine_amplitude_mm: float = 0.02
    object_mass_g: float | None = None  # push only; None = stimulus default
    max_steps: int | None = None        # default per task
    step_mm: float = 1.0
    step_deg: float = 1.0
    goal_radius: float = 5.0            # push goal capture, mm
    grace_steps: int = 5                # contact-loss tolerance
    stall_steps: int = 120              # push: steps without goal progress
    progress_weight: float = 0.5        # edge/surface along-contour shaping
    edge_lost_mm: float = 10.0          # edge: failure distance off the contour
    random_start: bool = True           # edge/surface: start at a random arc
    proprio: bool = False               # TCP/goal proprioception extension
    randomization: DomainRandomization = DomainRandomization()
    support_friction: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if self.task not in ("push", "edge", "surface"):
            raise ValueError(f"unknown task: {self.task!r}")
        if self.max_steps is not None and self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")

    def resolved_stimulus(self) -> str:
        if self.stimulus_id is not None:
            return self.stimulus_id
        return {"push": "cube", "edge": "square", "surface": "disc"}[self.task]

    def resolved_max_steps(self) -> int:
        if self.max_steps is not None:
            return self.max_steps
        return 250 if self.task == "push" else 300


@dataclass
class Observation:
    image: TactileImage
    proprio: np.ndarray | None = None


@dataclass
class EpisodeTrace:
    schema_version: int = TRACE_SCHEMA_VERSION
    seed: int = 0
    task: str = ""
    randomized: dict = field(default_factory=dict)
    records: list = field(default_factory=list)
    success: bool = False
    failure_reason: str | None = None

    def add(self, **rec):
        if self.records and rec["t"] <= self.records[-1]["t"]:
            raise ValueError("trace timestamps must be strictly increasing")
        self.records.append(rec)

    def positions(self, source: str) -> np.ndarray:
        """(N, 2) xy series of 'tcp' or 'object' positions."""
        key = "tcp" if source == "tcp" else "object"
        pts = [(r[key]["x"], r[key]["y"]) for r in self.records if r.get(key)]
        return np.asarray(pts, dtype=float)

    def to_jsonl(self, path) -> None:
        with open(path, "w") as f:
            head = {"schema_version": self.schema_version, "seed": self.seed,
                    "task": self.task, "randomized": self.randomized,
                    "success": self.success, "failure_reason": self.failure_reason}
            f.write(json.dumps({"header": head}, sort_keys=True) + "\n")
            for r in self.records:
                f.write(json.dumps(r, sort_keys=True) + "\n")

    @classmethod
    def from_jsonl(cls, path) -> "EpisodeTrace":
        with open(path) as f:
            head = json.loads(f.readline())["header"]
            tr = cls(schema_version=head["schema_version"], seed=head["seed"],
                     task=head["task"], randomized=head["randomized"],
                     success=head["success"], failure_reason=head["failure_reason"])
            for line in f:
                tr.records.append(json.loads(line))
        return tr


# ---------------------------------------------------------------------------
# environments

class TactileEnv:
    """Base episodic environment; subclasses fill the task specifics."""

    mount = "down"

    def __init__(self, cfg: EnvConfig,
                 perturbation: PerturbationModel | None = None,
                 translator: Translator | None = None):
        self.cfg = cfg
        self.base_sensor = make_sensor(cfg.sensor_id)
        self.perturbation = perturbation
        self.translator = translator
        self.limits = WorkspaceLimits()
        self.rng = np.random.default_rng(cfg.seed)
        self.trace: EpisodeTrace | None = None
        self.t = 0
        self.done = True

    # -- subclass hooks
    def _reset_scene(self):
        raise NotImplementedError

    def _step_task(self, action: np.ndarray) -> tuple[float, bool, dict]:
        raise NotImplementedError

    def _proprio(self) -> np.ndarray | None:
        return None

    # -- common machinery
    def reset(self, seed: int | None = None) -> tuple[Observation, EpisodeTrace]:
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        self.params = randomize(self.cfg, self.rng)
        self.sensor = self.base_sensor.with_compliance_scale(self.params.compliance_scale)
        self.t = 0
        self.done = False
        self.lost_contact_steps = 0
        self._last_action = np.zeros(2)
        self.trace = EpisodeTrace(seed=seed if seed is not None else self.cfg.seed,
                                  task=self.cfg.task,
                                  randomized=self.params.to_dict())
        self._reset_scene()
        self._last_image = self._render()
        return self._observe(), self.trace

    def _render(self) -> TactileImage:
        return render_depth(self.sensor, self.tcp, self.scene, self.mount)

    def _observe(self) -> Observation:
        img = self._last_image
        if self.perturbation is not None:
            img = perturb(img, self.perturbation, self.rng)
        if self.params.obs_noise_sigma > 0:
            noisy = img.depth + self.rng.normal(
                0.0, self.params.obs_noise_sigma, size=img.depth.shape)
            img = TactileImage(np.clip(noisy, 0.0, self.sensor.max_penetration),
                               img.sensor_id, img.tcp_pose, img.feature, img.rel_pose)
        if self.translator is not None:
            img = translate(img, self.translator)
        return Observation(image=img, proprio=self._proprio())

    def _move_tcp(self, action: np.ndarray) -> Pose4:
        prev = self.tcp
        self.tcp = apply_action(prev, action, self.cfg.task,
                                self.cfg.step_mm, self.cfg.step_deg, self.limits)
        if self.params.tcp_noise:
            self.tcp = self.tcp.moved(
                dx=self.rng.normal(0, TCP_REPEATABILITY_SIGMA),
                dy=self.rng.normal(0, TCP_REPEATABILITY_SIGMA))
        return prev

    def step(self, action) -> tuple[Observation, float, bool, dict]:
        if self.done:
            raise RuntimeError("step() called on a finished episode; call reset()")
        action = np.asarray(action, dtype=float).ravel()
        self.t += 1
        reward, done, info = self._step_task(action)
        self._last_action = np.clip(action[:2], -1.0, 1.0)

        in_contact = bool(np.any(self._last_image.depth > 0))
        if in_contact:
            self.lost_contact_steps = 0
        else:
            self.lost_contact_steps += 1
            if self.lost_contact_steps > self.cfg.grace_steps:
                done = True
                self.trace.failure_reason = "contact_lost"
        if self.t >= self.cfg.resolved_max_steps():
            done = True
        self.done = done

        rec = {"t": self.t, "tcp": self.tcp.to_dict(),
               "action": [float(a) for a in action], "reward": float(reward),
               "in_contact": in_contact,
               "max_penetration": float(self._last_image.depth.max()),
               "done": bool(done)}
        rec.update({k: v for k, v in info.items() if k.startswith("trace_") is False
                    and isinstance(v, (int, float, str, bool, dict))})
        if hasattr(self, "obj"):
            rec["object"] = {"x": self.obj.x, "y": self.obj.y, "theta": self.obj.theta}
        self.trace.add(**rec)
        info["trace"] = self.trace
        return self._observe(), float(reward), bool(done), info


class EdgeFollowEnv(TactileEnv):
    """Slide the sensor along a plate boundary at fixed contact depth."""

    mount = "down"

    def __init__(self, cfg, perturbation=None, translator=None):
        super().__init__(cfg, perturbation, translator)
        sid = cfg.resolved_stimulus()
        self.stimulus = make_stimulus(sid)
        if self.stimulus.kind == "push":
            raise ValueError(f"{sid} is a push object, not an edge/surface stimulus")
        self.contour = contour_points(sid, spacing=1.0)
        self.scene = self.stimulus
        self.plate_top = self.stimulus.z1

    def _proprio(self):
        # previous action: lets a memoryless policy hold a travel direction
        return self._last_action.copy() if self.cfg.proprio else None

    def _reset_scene(self):
        self.depth_target = (EDGE_DEPTH_SETPOINT[self.cfg.sensor_id]
                             + self.params.depth_jitter)
        self.depth_tol = EDGE_DEPTH_TOL[self.cfg.sensor_id]
        s0 = 0.0
        if self.cfg.random_start:
            s0 = float(self.rng.uniform(0.0, self.contour.perimeter))
        start = self.contour.point_at_arc(s0)
        self.tcp = Pose4(start[0], start[1], self.plate_top - self.depth_target, 0.0)
        self.arc_s = s0
        self.total_progress = 0.0

    def truth_polyline(self) -> np.ndarray:
        return self.contour.points_closed()

    def _step_task(self, action):
        self._move_tcp(action)
        self._last_image = self._render()
        depth = float(self._last_image.depth.max())
        _, s, dist = self.contour.nearest(self.tcp.xy)

        half = self.contour.perimeter / 2.0
        dprog = (s - self.arc_s + half) % self.contour.perimeter - half
        self.arc_s = s
        self.total_progress += dprog

        depth_term = min(abs(depth - self.depth_target) / self.depth_tol,
                         REWARD_TERM_CLIP)
        dist_term = min(dist / 2.5, REWARD_TERM_CLIP)
        # alive bonus keeps on-contour steps net positive; without it ending
        # the episode early dominates every policy that has not learnt to move
        reward = 1.0 - (depth_term + dist_term) + self.cfg.progress_weight * (
            np.clip(dprog / self.cfg.step_mm, -1.0, 1.0))

        done = False
        if dist > self.cfg.edge_lost_mm:
            done = True
            self.trace.failure_reason = "edge_lost"
        elif abs(self.total_progress) >= self.contour.perimeter:
            done = True
            self.trace.success = True
        return reward, done, {"dist_mm": dist, "arc_s": s, "depth_mm": depth}


class SurfaceFollowEnv(TactileEnv):
    """Slide along a vertical wall at fixed depth, yaw normal to the wall."""

    mount = "horizontal"

    def __init__(self, cfg, perturbation=None, translator=None):
        super().__init__(cfg, perturbation, translator)
        sid = cfg.resolved_stimulus()
        self.stimulus = make_stimulus(sid)
        if self.stimulus.kind == "push":
            raise ValueError(f"{sid} is a push object, not an edge/surface stimulus")
        self.contour = contour_points(sid, spacing=1.0)
        self.scene = self.stimulus
        self.wall_z = SURFACE_WALL_HEIGHT / 2.0

    def _proprio(self):
        return self._last_action.copy() if self.cfg.proprio else None

    def _wall_normal_bearing(self, xy) -> float:
        p, s, _ = self.contour.nearest(xy)
        n = self.stimulus.profile.grad2(p[None, :])[0]
        return math.degrees(math.atan2(-n[1], -n[0]))    # pressing heading, into wall

    def _reset_scene(self):
        self.depth_target = (SURF_DEPTH_SETPOINT[self.cfg.sensor_id]
                             + self.params.depth_jitter)
        self.depth_tol = SURF_DEPTH_TOL[self.cfg.sensor_id]
        self.angle_tol = SURF_ANGLE_TOL[self.cfg.sensor_id]
        s0 = 0.0
        if self.cfg.random_start:
            s0 = float(self.rng.uniform(0.0, self.contour.perimeter))
        start = self.contour.point_at_arc(s0)
        n = self.stimulus.profile.grad2(start[None, :])[0]
        pos = start - n * self.depth_target
        self.tcp = Pose4(pos[0], pos[1], self.wall_z,
                         math.degrees(math.atan2(-n[1], -n[0])))
        _, self.arc_s, _ = self.contour.nearest(self.tcp.xy)
        self.total_progress = 0.0

    def truth_polyline(self) -> np.ndarray:
        """Nominal TCP path: the wall contour offset inward by the setpoint."""
        pts = self.contour.points
        n = self.stimulus.profile.grad2(pts)
        poly = pts - n * self.depth_target
        return np.vstack([poly, poly[:1]])

    def _step_task(self, action):
        self._move_tcp(action)
        self._last_image = self._render()
        depth = float(self._last_image.depth.max())
        _, s, _ = self.contour.nearest(self.tcp.xy)
        normal_bearing = self._wall_normal_bearing(self.tcp.xy)
        yaw_err = wrap_deg(self.tcp.yaw - normal_bearing)

        half = self.contour.perimeter / 2.0
        dprog = (s - self.arc_s + half) % self.contour.perimeter - half
        self.arc_s = s
        self.total_progress += dprog

        depth_term = min(abs(depth - self.depth_target) / self.depth_tol,
                         REWARD_TERM_CLIP)
        angle_term = min(abs(yaw_err) / self.angle_tol, REWARD_TERM_CLIP)
        # positive lateral action travels in the negative arc direction, so
        # shaping rewards -dprog to align with the action convention
        reward = 1.0 - (depth_term + angle_term) + self.cfg.progress_weight * (
            np.clip(-dprog / self.cfg.step_mm, -1.0, 1.0))

        done = False
        if abs(self.total_progress) >= self.contour.perimeter:
            done = True
            self.trace.success = True
        return reward, done, {"yaw_err_deg": yaw_err, "arc_s": s, "depth_mm": depth}


class PushEnv(TactileEnv):
    """Push a free object through 10 goals along a planar trajectory."""

    mount = "horizontal"

    def __init__(self, cfg, perturbation=None, translator=None):
        super().__init__(cfg, perturbation, translator)
        sid = cfg.resolved_stimulus()
        probe = make_stimulus(sid, cfg.object_mass_g)
        if probe.kind != "push":
            raise ValueError(f"{sid} is not a push object")
        self.mass_g = probe.mass_g
        self.profile = probe.profile
        self.trajectory = make_trajectory(cfg.trajectory_kind, cfg.trajectory_k,
                                          sine_amplitude_mm=cfg.sine_amplitude_mm)
        self.sensor_z = PUSH_OBJECT_HEIGHT / 2.0

    def _boundary_dist(self, direction: np.ndarray) -> float:
        # distance from the profile centre to its boundary along `direction`
        ts = np.linspace(0.0, 80.0, 161)
        pts = ts[:, None] * direction[None, :]
        d = self.profile.sdf2(pts)
        i = int(np.argmax(d > 0))
        lo, hi = ts[max(i - 1, 0)], ts[i]
        for _ in range(40):
            mid = 0.5 * (lo + hi)
            if float(self.profile.sdf2(np.array([[mid * direction[0],
                                                  mid * direction[1]]]))[0]) > 0:
                hi = mid
            else:
                lo = mid
        return 0.5 * (lo + hi)

    def _pen_eq(self) -> float:
        """Equilibrium penetration: skin force balancing support friction."""
        k, _ = PUSH_COMPLIANCE[self.cfg.sensor_id]
        mu = self.cfg.support_friction * self.params.friction_scale
        force_n = mu * (self.mass_g / 1000.0) * 9.81
        return float(np.clip(force_n / k, 0.05, 0.9 * self.sensor.max_penetration))

    def _grip_factor(self, pen: float) -> float:
        _, pen_grip = PUSH_COMPLIANCE[self.cfg.sensor_id]
        return float(np.clip(pen / pen_grip, 0.0, 1.0))

    def _reset_scene(self):
        tang = self.trajectory.tangent_at_arc(0.0)
        theta0 = math.degrees(math.atan2(tang[1], tang[0]))
        self.obj = ObjectState(0.0, 0.0, theta0, self.mass_g,
                               self.cfg.support_friction * self.params.friction_scale,
                               self.cfg.resolved_stimulus())
        back = self._boundary_dist(-tang)
        start = -tang * (back - 0.8 * self._pen_eq())
        self.tcp = Pose4(start[0], start[1], self.sensor_z, theta0)
        self.goal_index = 0
        self.steps_since_goal = 0
        self.scene = self.obj.shape()

    def _proprio(self):
        if not self.cfg.proprio:
            return None
        goal = self.trajectory.goals[min(self.goal_index, 9)]
        d = goal - self.tcp.xy
        bearing = math.degrees(math.atan2(d[1], d[0]))
        err = math.radians(wrap_deg(bearing - self.tcp.yaw))
        return np.array([math.sin(err), math.cos(err),
                         min(np.linalg.norm(d) / 100.0, 2.0),
                         self.goal_index / 10.0])

    def truth_polyline(self) -> np.ndarray:
        return self.trajectory.polyline

    def _step_task(self, action):
        goal = self.trajectory.goals[min(self.goal_index, 9)]
        prev_dist = float(np.linalg.norm(self.obj.center - goal))
        prev = self._move_tcp(action)
        self.scene = self.obj.shape()
        self._last_image = self._render()
        contact = resolve_contact(self.sensor, self.tcp, self.scene, self.mount,
                                  self._last_image)

        if contact.in_contact:
            pen_eq = self._pen_eq()
            pen = contact.max_penetration
            if pen > pen_eq:
                dxy = self.tcp.xy - prev.xy
                dyaw = math.radians(wrap_deg(self.tcp.yaw - prev.yaw))
                r_tcp = contact.centroid_xy - prev.xy
                dc = dxy + dyaw * np.array([-r_tcp[1], r_tcp[0]])
                n_in = -contact.normal_xy
                # steering authority comes from how deeply the skin seats at
                # equilibrium, which grows with object weight: a shallow
                # contact slips to relieve moments, so both the tangential
                # drag and the torque arm are scaled down by the grip factor
                eta = self._grip_factor(pen_eq)
                dc_t = dc - float(dc @ n_in) * n_in
                u = (pen - pen_eq) * n_in + eta * dc_t
                if np.linalg.norm(u) > 1e-12:
                    params = PushParams(
                        contact_friction=self.sensor.friction * self.params.friction_scale)
                    cx = self.obj.center + eta * (contact.centroid_xy - self.obj.center)
                    gripped = ContactSummary(
                        True, contact.max_penetration,
                        (float(cx[0]), float(cx[1]), contact.centroid[2]),
                        contact.normal, contact.area)
                    self.obj = push_step(self.obj, gripped, u, math.degrees(dyaw),
                                         params)
                    self.scene = self.obj.shape()
                    self._last_image = self._render()

        dist = float(np.linalg.norm(self.obj.center - goal))
        lat = float(np.min(np.linalg.norm(
            self.trajectory.polyline - self.obj.center, axis=1)))

        # alive bonus keeps in-contact steps net positive (without it shedding
        # the object early dominates every policy that has not learnt to push);
        # the shaping pays for distance *reduced* toward the goal active at the
        # start of the step, so capturing a goal never lowers future reward and
        # loitering just outside the capture radius earns only the bonus; the
        # lateral term keeps the object within goal-capture range of the path
        reward = (1.0 - min(lat / self.cfg.goal_radius, 1.0)
                  + float(np.clip((prev_dist - dist) / self.cfg.step_mm,
                                  -1.0, 1.0)))
        done = False
        self.steps_since_goal += 1
        if dist < self.cfg.goal_radius:
            reward += 1.0
            self.goal_index += 1
            self.steps_since_goal = 0
            if self.goal_index >= len(self.trajectory.goals):
                done = True
                self.trace.success = True
        if self.steps_since_goal > self.cfg.stall_steps:
            done = True
            self.trace.failure_reason = "stalled"
        return reward, done, {"goal_index": self.goal_index, "goal_dist_mm": dist}


def make_env(cfg: EnvConfig, perturbation=None, translator=None) -> TactileEnv:
    cls = {"push": PushEnv, "edge": EdgeFollowEnv, "surface": SurfaceFollowEnv}[cfg.task]
    return cls(cfg, perturbation, translator)
