"""Parametric tactile sensor models and the synthetic depth-image renderer.

Each sensor is modelled as a rigid tip surface observed by an orthographic
synthetic camera looking along the pressing axis.  A pixel's value is the
penetration of the scene past the undeformed tip surface along that pixel's
ray, clamped at the sensor's compliance limit.  Depths are physical mm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .common import Pose4
from .geometry import Shape

CAMERA_STANDOFF_MM = 30.0   # camera plane behind the tip apex; cancels out

SENSOR_IDS = ("tactip", "digit", "digitac")


@dataclass(frozen=True)
class SensorModel:
    sensor_id: str
    tip_kind: str               # 'dome' | 'flat' | 'shallow_dome'
    footprint_w: float          # camera/tip footprint, mm (image u axis)
    footprint_h: float          # mm (image v axis)
    dome_radius: float | None   # curvature radius of the skin, mm
    width_px: int
    height_px: int
    max_penetration: float      # compliance saturation depth, mm
    friction: float             # skin friction coefficient, used by dynamics

    def __post_init__(self):
        if self.width_px < 32 or self.height_px < 32:
            raise ValueError("image resolution must be at least 32 px")

    @property
    def tip_size(self) -> float:
        """Characteristic tip width, mm."""
        return max(self.footprint_w, self.footprint_h)

    def with_compliance_scale(self, scale: float) -> "SensorModel":
        return replace(self, max_penetration=self.max_penetration * scale)


_DEFAULTS = {
    # TacTip: hemispherical soft dome, square camera
    "tactip": SensorModel("tactip", "dome", 40.0, 40.0, 20.0, 128, 128, 5.0, 0.4),
    # DIGIT: flat, relatively stiff rectangular pad; broader across one axis
    "digit": SensorModel("digit", "flat", 18.0, 24.0, None, 96, 128, 2.0, 0.5),
    # DigiTac: TacTip-style domed skin on the DIGIT camera footprint
    "digitac": SensorModel("digitac", "shallow_dome", 18.0, 24.0, 40.0, 96, 128, 3.0, 0.4),
}


def make_sensor(sensor_id: str) -> SensorModel:
    try:
        return _DEFAULTS[sensor_id]
    except KeyError:
        raise ValueError(f"unknown sensor id: {sensor_id!r}") from None


@dataclass
class TactileImage:
    """H x W penetration depth map (mm, >= 0) with pose/label metadata."""

    depth: np.ndarray
    sensor_id: str
    tcp_pose: Pose4 | None = None
    feature: str = "none"       # 'edge' | 'surface' | 'none'
    rel_pose: dict | None = None

    @property
    def shape(self):
        return self.depth.shape


@lru_cache(maxsize=16)
def _pixel_grid(sensor: SensorModel):
    """Per-pixel (u, v) offsets, tip sag and validity mask, row-major H x W."""
    w, h = sensor.width_px, sensor.height_px
    u = (np.arange(w) + 0.5) / w * sensor.footprint_w - sensor.footprint_w / 2.0
    v = (np.arange(h) + 0.5) / h * sensor.footprint_h - sensor.footprint_h / 2.0
    uu, vv = np.meshgrid(u, v)          # (H, W)
    r = np.hypot(uu, vv)
    if sensor.tip_kind == "flat":
        sag = np.zeros_like(r)
        valid = np.ones_like(r, dtype=bool)
    else:
        R = sensor.dome_radius
        if sensor.tip_kind == "dome":
            valid = r <= 0.995 * R
        else:                            # shallow dome over the full pad
            valid = np.ones_like(r, dtype=bool)
            if np.max(r) >= R:
                raise ValueError("shallow dome radius smaller than pad diagonal")
        rc = np.minimum(r, 0.995 * R)
        sag = R - np.sqrt(R * R - rc * rc)
    return uu, vv, sag, valid


def mount_frame(pose: Pose4, mount: str):
    """(u_hat, v_hat, w_hat) world axes of the sensor image/pressing frame."""
    a = math.radians(pose.yaw)
    c, s = math.cos(a), math.sin(a)
    if mount == "down":
        return (np.array([c, s, 0.0]), np.array([-s, c, 0.0]),
                np.array([0.0, 0.0, -1.0]))
    if mount == "horizontal":
        return (np.array([-s, c, 0.0]), np.array([0.0, 0.0, 1.0]),
                np.array([c, s, 0.0]))
    raise ValueError(f"unknown mount: {mount!r}")


def render_depth(sensor: SensorModel, tcp_pose: Pose4, scene: Shape,
                 mount: str = "down") -> TactileImage:
    """Render the tactile depth image of `scene` at the given TCP pose.

    The TCP sits at the tip apex; rays run from the camera plane through
    the tip surface along the pressing axis.
    """
    uu, vv, sag, valid = _pixel_grid(sensor)
    u_hat, v_hat, w_hat = mount_frame(tcp_pose, mount)
    tcp = np.array([tcp_pose.x, tcp_pose.y, tcp_pose.z])

    uf = uu[valid]
    vf = vv[valid]
    origins = (tcp[None, :]
               + uf[:, None] * u_hat[None, :]
               + vf[:, None] * v_hat[None, :]
               - CAMERA_STANDOFF_MM * w_hat[None, :])
    t_tip = CAMERA_STANDOFF_MM - sag[valid]
    t_lo = t_tip - sensor.max_penetration - 0.25
    t_hit = scene.raycast(origins, w_hat, t_lo, t_tip)

    depth = np.zeros(sensor.height_px * sensor.width_px).reshape(
        sensor.height_px, sensor.width_px)
    pen = np.clip(t_tip - t_hit, 0.0, sensor.max_penetration)
    pen[~np.isfinite(t_hit)] = 0.0
    depth[valid] = pen
    return TactileImage(depth=depth, sensor_id=sensor.sensor_id, tcp_pose=tcp_pose)


def render_batch(sensor: SensorModel, poses, scene: Shape,
                 mount: str = "down") -> list[TactileImage]:
    """Elementwise render_depth over a pose list, order preserved."""
    return [render_depth(sensor, p, scene, mount) for p in poses]
