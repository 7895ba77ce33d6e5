"""4-DoF arm workspace limits, contact reduction and quasi-static pushing.

Pushing uses an ellipsoidal limit-surface model with a single representative
contact point: the object's planar twist is proportional to the limit-surface
gradient at the applied contact force, with sticking/slipping resolved
against the skin friction cone.  All functions are pure over value types.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .common import Pose4, wrap_deg
from .geometry import Shape, Stimulus, make_stimulus
from .sensors import SensorModel, TactileImage, mount_frame, render_depth, _pixel_grid

TASKS = ("push", "edge", "surface")


@dataclass(frozen=True)
class WorkspaceLimits:
    """MG400-style reach envelope: radial limit about the base, z band."""

    base_x: float = -200.0
    base_y: float = 0.0
    reach: float = 440.0
    z_min: float = -60.0
    z_max: float = 300.0


def clamp_pose(p: Pose4, limits: WorkspaceLimits = WorkspaceLimits()) -> Pose4:
    """Project a pose onto the workspace; idempotent."""
    dx, dy = p.x - limits.base_x, p.y - limits.base_y
    r = math.hypot(dx, dy)
    x, y = p.x, p.y
    if r > limits.reach:
        scale = limits.reach / r
        x = limits.base_x + dx * scale
        y = limits.base_y + dy * scale
    z = min(max(p.z, limits.z_min), limits.z_max)
    return Pose4(x, y, z, wrap_deg(p.yaw))


def apply_action(p: Pose4, action, task: str,
                 step_mm: float = 1.0, step_deg: float = 1.0,
                 limits: WorkspaceLimits = WorkspaceLimits()) -> Pose4:
    """Apply a 2D action in [-1, 1]^2 under the task's action-space convention.

    push:    (forward along current yaw heading, yaw rate)
    edge:    (world dx, world dy), yaw held
    surface: (lateral slide perpendicular to the pressing heading, yaw rate)
    """
    action = np.asarray(action, dtype=float).ravel()
    if action.shape != (2,):
        raise ValueError(f"action must have exactly 2 components, got {action.shape}")
    a0, a1 = float(np.clip(action[0], -1, 1)), float(np.clip(action[1], -1, 1))
    if task == "push":
        h = p.heading()
        q = p.moved(dx=a0 * step_mm * h[0], dy=a0 * step_mm * h[1],
                    dyaw=a1 * step_deg)
    elif task == "edge":
        q = p.moved(dx=a0 * step_mm, dy=a1 * step_mm)
    elif task == "surface":
        a = math.radians(p.yaw)
        lat = np.array([-math.sin(a), math.cos(a)])     # u axis of the image frame
        q = p.moved(dx=a0 * step_mm * lat[0], dy=a0 * step_mm * lat[1],
                    dyaw=a1 * step_deg)
    else:
        raise ValueError(f"unknown task: {task!r}")
    return clamp_pose(q, limits)


@dataclass(frozen=True)
class ObjectState:
    """Planar rigid push object."""

    x: float
    y: float
    theta: float                # degrees
    mass_g: float
    support_friction: float
    stimulus_id: str

    def __post_init__(self):
        if self.mass_g <= 0:
            raise ValueError("mass must be positive")

    @property
    def center(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def shape(self, height_offset: float = 0.0) -> Shape:
        from .geometry import Transform
        return Transform(make_stimulus(self.stimulus_id, self.mass_g),
                         tx=self.x, ty=self.y, tz=height_offset, yaw_deg=self.theta)


@dataclass(frozen=True)
class ContactSummary:
    in_contact: bool
    max_penetration: float      # mm
    centroid: tuple             # world (x, y, z) mm of the contact centroid
    normal: tuple               # outward 2D unit normal of the scene at the centroid
    area: float                 # contact pixel count x pixel area, mm^2

    @property
    def centroid_xy(self) -> np.ndarray:
        return np.asarray(self.centroid[:2])

    @property
    def normal_xy(self) -> np.ndarray:
        return np.asarray(self.normal)


_NO_CONTACT = ContactSummary(False, 0.0, (0.0, 0.0, 0.0), (1.0, 0.0), 0.0)


def resolve_contact(sensor: SensorModel, tcp: Pose4, scene: Shape,
                    mount: str = "down",
                    image: TactileImage | None = None) -> ContactSummary:
    """Reduce a rendered depth image to a single contact summary."""
    if image is None:
        image = render_depth(sensor, tcp, scene, mount)
    depth = image.depth
    if not np.any(depth > 0.0):
        return _NO_CONTACT

    uu, vv, sag, _ = _pixel_grid(sensor)
    u_hat, v_hat, w_hat = mount_frame(tcp, mount)
    w = depth.ravel()
    total = w.sum()
    uc = float((uu.ravel() * w).sum() / total)
    vc = float((vv.ravel() * w).sum() / total)
    sc = float((sag.ravel() * w).sum() / total)
    centroid = (np.array([tcp.x, tcp.y, tcp.z])
                + uc * u_hat + vc * v_hat - sc * w_hat)

    h = 1e-3
    c = centroid[None, :]
    gx = scene.sdf(c + [h, 0, 0]) - scene.sdf(c - [h, 0, 0])
    gy = scene.sdf(c + [0, h, 0]) - scene.sdf(c - [0, h, 0])
    n = np.array([float(gx[0]), float(gy[0])])
    norm = np.linalg.norm(n)
    n = n / norm if norm > 1e-12 else np.array([1.0, 0.0])

    pixel_area = (sensor.footprint_w / sensor.width_px
                  * sensor.footprint_h / sensor.height_px)
    return ContactSummary(True, float(depth.max()), tuple(centroid), tuple(n),
                          float((depth > 0).sum() * pixel_area))


@dataclass(frozen=True)
class PushParams:
    """Quasi-static pushing parameters.

    limit_ratio is the ellipsoidal limit-surface moment/force ratio c in mm;
    None computes the mean contact-radius integral of the object footprint.
    """

    contact_friction: float = 0.5
    limit_ratio: float | None = None


#: the ellipsoidal model with c = mean|r| systematically under-rotates versus
#: direct support-friction integration; 0.8x corrects it to within ~5%
_LIMIT_RATIO_SCALE = 0.8


@lru_cache(maxsize=16)
def footprint_limit_ratio(stimulus_id: str) -> float:
    """Limit-surface moment/force ratio from the object footprint, mm.

    0.8 x the mean support-point radius under uniform pressure, calibrated
    against numerical friction integration.
    """
    stim = make_stimulus(stimulus_id)
    xmin, xmax, ymin, ymax = stim.profile.bbox()
    step = 0.5
    xs = np.arange(xmin + step / 2, xmax, step)
    ys = np.arange(ymin + step / 2, ymax, step)
    gx, gy = np.meshgrid(xs, ys)
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    inside = stim.profile.sdf2(pts) <= 0.0
    return _LIMIT_RATIO_SCALE * float(np.mean(np.hypot(pts[inside, 0], pts[inside, 1])))


def push_step(obj: ObjectState, contact: ContactSummary, motion, dtheta: float,
              params: PushParams = PushParams()) -> ObjectState:
    """Advance the object under a commanded contact-point displacement.

    `motion` is the 2D world displacement the pusher imposes on the contact
    point this step (mm); `dtheta` the pusher's own yaw change (deg), which
    only matters through the contact point motion already folded into
    `motion`.  Sticking follows the ellipsoidal limit-surface solution;
    forces outside the skin friction cone slip along the cone edge.
    """
    if not contact.in_contact:
        raise ValueError("push_step requires an in-contact summary")
    u = np.asarray(motion, dtype=float).ravel()
    if u.shape != (2,):
        raise ValueError("motion must be a 2D displacement")
    if np.linalg.norm(u) < 1e-15:
        return obj

    r = contact.centroid_xy - obj.center
    n_in = -contact.normal_xy                     # pushing direction, into the object
    if float(u @ n_in) <= 1e-12:
        return obj                                # pusher retreating: no drag modelled

    c = params.limit_ratio
    if c is None:
        c = footprint_limit_ratio(obj.stimulus_id)
    c2 = c * c
    rx, ry = float(r[0]), float(r[1])
    denom = c2 + rx * rx + ry * ry

    # sticking: contact point tracks the pusher exactly
    vx = ((c2 + rx * rx) * u[0] + rx * ry * u[1]) / denom
    vy = (rx * ry * u[0] + (c2 + ry * ry) * u[1]) / denom
    omega = (rx * vy - ry * vx) / c2              # rad per unit step

    # limit-surface force direction is parallel to the translation component
    f = np.array([vx, vy])
    fn = float(f @ n_in)
    ft_vec = f - fn * n_in
    ft = float(np.linalg.norm(ft_vec))
    mu = params.contact_friction
    if fn <= 0.0 or ft > mu * fn + 1e-12:
        # slip: project the force onto the nearest friction-cone edge
        t_hat = ft_vec / ft if ft > 1e-12 else np.array([-n_in[1], n_in[0]])
        alpha = math.atan(mu)
        f_dir = math.cos(alpha) * n_in + math.sin(alpha) * t_hat
        m_dir = rx * f_dir[1] - ry * f_dir[0]
        # scale so the normal contact-point displacement is preserved
        cp_vel = f_dir + (m_dir / c2) * np.array([-ry, rx])
        k_den = float(cp_vel @ n_in)
        if k_den <= 1e-12:
            return obj
        k = float(u @ n_in) / k_den
        vx, vy = k * f_dir[0], k * f_dir[1]
        omega = k * m_dir / c2

    return replace(obj, x=obj.x + vx, y=obj.y + vy,
                   theta=wrap_deg(obj.theta + math.degrees(omega)))
