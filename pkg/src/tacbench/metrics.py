"""Image similarity (SSIM) and trajectory-error evaluation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter


@dataclass(frozen=True)
class SsimConfig:
    window: int = 11
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 5.0      # mm; tie to the sensor's max penetration

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise ValueError("window must be odd and >= 3")
        if self.k1 <= 0 or self.k2 <= 0:
            raise ValueError("K1 and K2 must be positive")


def ssim(a, b, cfg: SsimConfig = SsimConfig()) -> float:
    """Mean windowed structural similarity over two equal-shape images."""
    a = np.asarray(getattr(a, "depth", a), dtype=float)
    b = np.asarray(getattr(b, "depth", b), dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    w = cfg.window
    c1 = (cfg.k1 * cfg.dynamic_range) ** 2
    c2 = (cfg.k2 * cfg.dynamic_range) ** 2

    mu_a = uniform_filter(a, w, mode="reflect")
    mu_b = uniform_filter(b, w, mode="reflect")
    var_a = uniform_filter(a * a, w, mode="reflect") - mu_a * mu_a
    var_b = uniform_filter(b * b, w, mode="reflect") - mu_b * mu_b
    cov = uniform_filter(a * b, w, mode="reflect") - mu_a * mu_b

    s = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)
         / ((mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)))
    pad = w // 2
    interior = s[pad:s.shape[0] - pad, pad:s.shape[1] - pad]
    if interior.size == 0:
        interior = s
    return float(interior.mean())


@dataclass(frozen=True)
class TrajError:
    mean: float
    max: float
    distances: tuple            # per recorded point, mm

    def __post_init__(self):
        if self.mean > self.max + 1e-12:
            raise ValueError("mean distance exceeds max")


def _point_polyline_distances(points: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Exact distance from each point to the nearest point on the polyline."""
    a, b = poly[:-1], poly[1:]
    e = b - a                                        # (M, 2)
    ee = np.einsum("ij,ij->i", e, e)
    w = points[:, None, :] - a[None, :, :]           # (N, M, 2)
    t = np.clip(np.einsum("nmj,mj->nm", w, e) / np.maximum(ee, 1e-30), 0.0, 1.0)
    proj = a[None, :, :] + t[..., None] * e[None, :, :]
    d = np.linalg.norm(points[:, None, :] - proj, axis=2)
    return d.min(axis=1)


def traj_error(actual, truth) -> TrajError:
    """Mean/max Euclidean distance of recorded points from a truth polyline.

    `actual` is an (N, 2) array of recorded positions (mm); `truth` either an
    (M, 2) polyline, a Contour, or a GoalTrajectory (its dense polyline).
    """
    points = np.asarray(actual, dtype=float).reshape(-1, 2)
    if points.shape[0] == 0:
        raise ValueError("empty trajectory")
    if hasattr(truth, "points_closed"):             # Contour
        poly = truth.points_closed()
    elif hasattr(truth, "polyline"):                # GoalTrajectory
        poly = np.asarray(truth.polyline)
    else:
        poly = np.asarray(truth, dtype=float).reshape(-1, 2)
    if poly.shape[0] < 2:
        raise ValueError("truth polyline needs at least 2 points")

    # chunk the segment sweep to bound memory for long traces
    dists = np.concatenate([
        _point_polyline_distances(points[i:i + 512], poly)
        for i in range(0, len(points), 512)
    ])
    return TrajError(float(dists.mean()), float(dists.max()), tuple(dists.tolist()))
