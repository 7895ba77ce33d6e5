"""Shared value types for poses and angles."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def wrap_deg(a: float) -> float:
    """Wrap an angle into (-180, 180] degrees."""
    a = math.fmod(a, 360.0)
    if a <= -180.0:
        a += 360.0
    elif a > 180.0:
        a -= 360.0
    return a


@dataclass(frozen=True)
class Pose4:
    """4-DoF TCP state: x, y, z in mm, yaw in degrees (-180, 180]."""

    x: float
    y: float
    z: float
    yaw: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "yaw", wrap_deg(self.yaw))

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])

    @property
    def xyz(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def heading(self) -> np.ndarray:
        """Unit vector along yaw in the xy plane."""
        a = math.radians(self.yaw)
        return np.array([math.cos(a), math.sin(a)])

    def moved(self, dx=0.0, dy=0.0, dz=0.0, dyaw=0.0) -> "Pose4":
        return Pose4(self.x + dx, self.y + dy, self.z + dz, self.yaw + dyaw)

    def to_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "z": self.z, "yaw": self.yaw}

    @classmethod
    def from_dict(cls, d: dict) -> "Pose4":
        return cls(d["x"], d["y"], d["z"], d.get("yaw", 0.0))
