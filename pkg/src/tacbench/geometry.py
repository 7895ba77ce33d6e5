"""Signed-distance-field primitives, benchmark stimuli and contour extraction.

All shapes are planar extrusions or simple solids described by exact (or
conservatively bounded) signed distance fields in millimetres: negative
inside, positive outside, zero on the boundary.  Every field is kept
1-Lipschitz so that sphere tracing along camera rays is safe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from skimage import measure

# ---------------------------------------------------------------------------
# 2D profiles

_GRAD_H = 1e-5


class Profile:
    """A 2D region described by a signed distance function over (x, y) mm."""

    def sdf2(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def bbox(self) -> tuple[float, float, float, float]:
        """(xmin, xmax, ymin, ymax) bounding the region."""
        raise NotImplementedError

    def grad2(self, pts: np.ndarray) -> np.ndarray:
        """Unit outward gradient of the field, central differences."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        gx = (self.sdf2(pts + [_GRAD_H, 0.0]) - self.sdf2(pts - [_GRAD_H, 0.0]))
        gy = (self.sdf2(pts + [0.0, _GRAD_H]) - self.sdf2(pts - [0.0, _GRAD_H]))
        g = np.stack([gx, gy], axis=-1) / (2.0 * _GRAD_H)
        n = np.linalg.norm(g, axis=-1, keepdims=True)
        return g / np.maximum(n, 1e-12)

    def raycast2(self, origins, direction, t_lo, t_hi):
        """First boundary entry along origins + t*direction, in the plane.

        Same contract as Shape.raycast: np.inf on a miss, t_lo for rays
        already inside at t_lo.  The default marches the 2D field.
        """
        return _sphere_trace2(self, origins, direction, t_lo, t_hi)


def _entry_from_interval(t_in, t_out, t_lo):
    """Entry time given per-ray [t_in, t_out] overlap with the region."""
    t = np.where(t_in >= t_lo, t_in, np.where(t_out > t_lo, t_lo, np.inf))
    return np.where(t_in <= t_out, t, np.inf)


@dataclass(frozen=True)
class Circle2(Profile):
    cx: float
    cy: float
    r: float

    def sdf2(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return np.hypot(pts[:, 0] - self.cx, pts[:, 1] - self.cy) - self.r

    def bbox(self):
        return (self.cx - self.r, self.cx + self.r, self.cy - self.r, self.cy + self.r)

    def raycast2(self, origins, direction, t_lo, t_hi):
        o = np.atleast_2d(np.asarray(origins, dtype=float)) - [self.cx, self.cy]
        d = np.asarray(direction, dtype=float)
        b = o @ d
        disc = b * b - ((o * o).sum(axis=1) - self.r * self.r)
        ok = disc >= 0.0
        sq = np.sqrt(np.maximum(disc, 0.0))
        t_lo = np.broadcast_to(np.asarray(t_lo, dtype=float), (len(o),))
        t = _entry_from_interval(-b - sq, -b + sq, t_lo)
        return np.where(ok, t, np.inf)


@dataclass(frozen=True)
class Rect2(Profile):
    cx: float
    cy: float
    hx: float
    hy: float

    def sdf2(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        qx = np.abs(pts[:, 0] - self.cx) - self.hx
        qy = np.abs(pts[:, 1] - self.cy) - self.hy
        outside = np.hypot(np.maximum(qx, 0.0), np.maximum(qy, 0.0))
        inside = np.minimum(np.maximum(qx, qy), 0.0)
        return outside + inside

    def bbox(self):
        return (self.cx - self.hx, self.cx + self.hx, self.cy - self.hy, self.cy + self.hy)

    def raycast2(self, origins, direction, t_lo, t_hi):
        o = np.atleast_2d(np.asarray(origins, dtype=float)) - [self.cx, self.cy]
        d = np.asarray(direction, dtype=float)
        t_in = np.full(len(o), -np.inf)
        t_out = np.full(len(o), np.inf)
        for k, h in ((0, self.hx), (1, self.hy)):
            if abs(d[k]) < 1e-15:
                miss = np.abs(o[:, k]) > h
                t_in = np.where(miss, np.inf, t_in)
            else:
                ta = (-h - o[:, k]) / d[k]
                tb = (h - o[:, k]) / d[k]
                t_in = np.maximum(t_in, np.minimum(ta, tb))
                t_out = np.minimum(t_out, np.maximum(ta, tb))
        t_lo = np.broadcast_to(np.asarray(t_lo, dtype=float), (len(o),))
        return _entry_from_interval(t_in, t_out, t_lo)


@dataclass(frozen=True)
class HalfPlane2(Profile):
    """Region n . p <= offset, with unit normal n pointing outward."""

    nx: float
    ny: float
    offset: float = 0.0

    def sdf2(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return pts[:, 0] * self.nx + pts[:, 1] * self.ny - self.offset

    def bbox(self):
        raise ValueError("half-plane is unbounded")

    def raycast2(self, origins, direction, t_lo, t_hi):
        o = np.atleast_2d(np.asarray(origins, dtype=float))
        d = np.asarray(direction, dtype=float)
        dn = float(d[0] * self.nx + d[1] * self.ny)
        d0 = o[:, 0] * self.nx + o[:, 1] * self.ny - self.offset
        t_lo = np.broadcast_to(np.asarray(t_lo, dtype=float), (len(o),))
        if abs(dn) < 1e-15:
            return np.where(d0 <= 0.0, t_lo, np.inf)
        t_in = np.where(dn < 0, -d0 / dn, -np.inf)
        t_out = np.where(dn < 0, np.inf, -d0 / dn)
        return _entry_from_interval(t_in, t_out, t_lo)


class Polygon2(Profile):
    """Exact signed distance to a simple polygon (vertices CCW or CW)."""

    def __init__(self, verts):
        self.verts = np.asarray(verts, dtype=float).reshape(-1, 2)
        if len(self.verts) < 3:
            raise ValueError("polygon needs at least 3 vertices")

    def sdf2(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        v = self.verts
        nv = len(v)
        d = np.full(len(pts), np.inf)
        sign = np.ones(len(pts))
        for i in range(nv):
            a = v[i]
            b = v[(i + 1) % nv]
            e = b - a
            w = pts - a
            t = np.clip((w @ e) / max(e @ e, 1e-30), 0.0, 1.0)
            proj = a + t[:, None] * e
            d = np.minimum(d, np.linalg.norm(pts - proj, axis=1))
            # crossing-number parity for the sign
            c1 = pts[:, 1] >= a[1]
            c2 = pts[:, 1] < b[1]
            c3 = e[0] * w[:, 1] - e[1] * w[:, 0] > 0
            flip = (c1 & c2 & c3) | (~c1 & ~c2 & ~c3)
            sign = np.where(flip, -sign, sign)
        return sign * d

    def bbox(self):
        return (self.verts[:, 0].min(), self.verts[:, 0].max(),
                self.verts[:, 1].min(), self.verts[:, 1].max())

    def raycast2(self, origins, direction, t_lo, t_hi):
        o = np.atleast_2d(np.asarray(origins, dtype=float))
        d = np.asarray(direction, dtype=float)
        t_lo = np.broadcast_to(np.asarray(t_lo, dtype=float), (len(o),))
        best = np.full(len(o), np.inf)
        v = self.verts
        for i in range(len(v)):
            a, b = v[i], v[(i + 1) % len(v)]
            e = b - a
            denom = d[0] * e[1] - d[1] * e[0]
            if abs(denom) < 1e-15:
                continue
            w = a - o
            t = (w[:, 0] * e[1] - w[:, 1] * e[0]) / denom
            s = (w[:, 0] * d[1] - w[:, 1] * d[0]) / denom
            valid = (s >= 0.0) & (s < 1.0) & (t >= t_lo)
            best = np.where(valid, np.minimum(best, t), best)
        inside = self.sdf2(o + t_lo[:, None] * d) <= 0.0
        return np.where(inside, t_lo, best)


@dataclass(frozen=True)
class Flower2(Profile):
    """Circle with sinusoidal lobes: boundary r = r0 + amp*sin(lobes*theta).

    The field (r - R(theta)) is rescaled by its worst-case gradient norm so
    it stays a 1-Lipschitz lower bound on the true distance.
    """

    r0: float
    amp: float
    lobes: int

    def _lipschitz(self) -> float:
        r_min = self.r0 - self.amp
        return math.sqrt(1.0 + (self.amp * self.lobes / r_min) ** 2)

    def sdf2(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        r = np.hypot(pts[:, 0], pts[:, 1])
        th = np.arctan2(pts[:, 1], pts[:, 0])
        return (r - (self.r0 + self.amp * np.sin(self.lobes * th))) / self._lipschitz()

    def bbox(self):
        m = self.r0 + self.amp
        return (-m, m, -m, m)


@dataclass(frozen=True)
class UnionP(Profile):
    parts: tuple

    def sdf2(self, pts):
        return np.minimum.reduce([p.sdf2(pts) for p in self.parts])

    def raycast2(self, origins, direction, t_lo, t_hi):
        return np.minimum.reduce(
            [p.raycast2(origins, direction, t_lo, t_hi) for p in self.parts])

    def bbox(self):
        boxes = [p.bbox() for p in self.parts]
        return (min(b[0] for b in boxes), max(b[1] for b in boxes),
                min(b[2] for b in boxes), max(b[3] for b in boxes))


@dataclass(frozen=True)
class IntersectP(Profile):
    parts: tuple

    def sdf2(self, pts):
        return np.maximum.reduce([p.sdf2(pts) for p in self.parts])

    def bbox(self):
        boxes = [p.bbox() for p in self.parts]
        return (max(b[0] for b in boxes), min(b[1] for b in boxes),
                max(b[2] for b in boxes), min(b[3] for b in boxes))


# ---------------------------------------------------------------------------
# 3D shapes

_TRACE_FLOOR = 5e-3   # minimum march step, mm
_TRACE_ITERS = 64
_BISECT_ITERS = 48


class Shape:
    """Immutable SDF node.  sdf() takes (N, 3) points in mm."""

    def sdf(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def raycast(self, origins, direction, t_lo, t_hi):
        """First surface crossing along origins + t*direction.

        Returns t per ray (np.inf for a miss inside [t_lo, t_hi]); rays
        already inside the shape at t_lo report t_lo.
        """
        return _sphere_trace(self, origins, direction, t_lo, t_hi)


def _sphere_trace(shape, origins, direction, t_lo, t_hi):
    origins = np.asarray(origins, dtype=float)
    direction = np.asarray(direction, dtype=float)
    t_lo = np.broadcast_to(np.asarray(t_lo, dtype=float), (len(origins),)).copy()
    t_hi = np.broadcast_to(np.asarray(t_hi, dtype=float), (len(origins),))
    out = np.full(len(origins), np.inf)

    t = t_lo.copy()
    d = shape.sdf(origins + t[:, None] * direction)
    inside = d < 0.0
    out[inside] = t[inside]
    active = np.flatnonzero(~inside)
    for _ in range(_TRACE_ITERS):
        if active.size == 0:
            break
        t_prev = t[active]
        t_new = t_prev + np.maximum(d[active], _TRACE_FLOOR)
        d_new = shape.sdf(origins[active] + t_new[:, None] * direction)
        crossed = d_new < 0.0
        if np.any(crossed):
            idx = active[crossed]
            out[idx] = _bisect(shape, origins[idx], direction, t_prev[crossed],
                               t_new[crossed])
        t[active] = t_new
        d[active] = d_new
        escaped = t_new > t_hi[active] + _TRACE_FLOOR
        active = active[~crossed & ~escaped]
    return out


def _bisect(shape, origins, direction, lo, hi):
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        neg = shape.sdf(origins + mid[:, None] * direction) < 0.0
        hi = np.where(neg, mid, hi)
        lo = np.where(neg, lo, mid)
    return 0.5 * (lo + hi)


class _ProfileAsShape:
    """Adapter so the 3D marching helpers can walk a 2D field."""

    def __init__(self, profile):
        self.profile = profile

    def sdf(self, pts):
        return self.profile.sdf2(pts)


def _sphere_trace2(profile, origins, direction, t_lo, t_hi):
    return _sphere_trace(_ProfileAsShape(profile), origins, direction, t_lo, t_hi)


@dataclass(frozen=True)
class Sphere(Shape):
    center: tuple
    r: float

    def sdf(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return np.linalg.norm(pts - np.asarray(self.center), axis=1) - self.r


@dataclass(frozen=True)
class Box(Shape):
    center: tuple
    half: tuple

    def sdf(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        q = np.abs(pts - np.asarray(self.center)) - np.asarray(self.half)
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=1)
        inside = np.minimum(q.max(axis=1), 0.0)
        return outside + inside


@dataclass(frozen=True)
class Cylinder(Shape):
    """Finite vertical cylinder, axis along z."""

    center: tuple
    r: float
    hz: float

    def sdf(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        c = np.asarray(self.center)
        dr = np.hypot(pts[:, 0] - c[0], pts[:, 1] - c[1]) - self.r
        dz = np.abs(pts[:, 2] - c[2]) - self.hz
        outside = np.hypot(np.maximum(dr, 0.0), np.maximum(dz, 0.0))
        inside = np.minimum(np.maximum(dr, dz), 0.0)
        return outside + inside


@dataclass(frozen=True)
class HalfSpace(Shape):
    """Region n . p <= offset (unit outward normal n)."""

    normal: tuple
    offset: float = 0.0

    def sdf(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return pts @ np.asarray(self.normal, dtype=float) - self.offset

    def raycast(self, origins, direction, t_lo, t_hi):
        origins = np.atleast_2d(np.asarray(origins, dtype=float))
        n = np.asarray(self.normal, dtype=float)
        dn = float(np.dot(direction, n))
        d0 = origins @ n - self.offset
        out = np.full(len(origins), np.inf)
        t_lo = np.broadcast_to(np.asarray(t_lo, dtype=float), (len(origins),))
        if abs(dn) < 1e-12:
            return out
        t = -d0 / dn
        going_in = dn < 0.0
        if not going_in:
            return out
        out = np.where(t >= t_lo, t, t_lo)  # already inside at t_lo -> t_lo
        inside0 = d0 + t_lo * dn < 0.0
        out = np.where(inside0, t_lo, out)
        return out


@dataclass(frozen=True)
class Extrusion(Shape):
    """2D profile extruded along z over [z0, z1].  Exact if the profile is."""

    profile: Profile
    z0: float
    z1: float

    def sdf(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        d2 = self.profile.sdf2(pts[:, :2])
        zc = 0.5 * (self.z0 + self.z1)
        dz = np.abs(pts[:, 2] - zc) - 0.5 * (self.z1 - self.z0)
        outside = np.hypot(np.maximum(d2, 0.0), np.maximum(dz, 0.0))
        inside = np.minimum(np.maximum(d2, dz), 0.0)
        return outside + inside

    def raycast(self, origins, direction, t_lo, t_hi):
        direction = np.asarray(direction, dtype=float)
        origins = np.atleast_2d(np.asarray(origins, dtype=float))
        # fast path: rays straight down onto the top face
        if direction[2] < -(1.0 - 1e-12) and np.all(origins[:, 2] >= self.z1):
            t = (self.z1 - origins[:, 2]) / direction[2]
            xy = origins[:, :2] + t[:, None] * direction[:2]
            hit = self.profile.sdf2(xy) <= 0.0
            return np.where(hit, t, np.inf)
        # fast path: horizontal rays reduce to a 2D cast against the profile
        if abs(direction[2]) < 1e-12:
            in_band = (origins[:, 2] >= self.z0) & (origins[:, 2] <= self.z1)
            d2 = direction[:2] / np.linalg.norm(direction[:2])
            t = self.profile.raycast2(origins[:, :2], d2, t_lo, t_hi)
            return np.where(in_band, t, np.inf)
        return _sphere_trace(self, origins, direction, t_lo, t_hi)


@dataclass(frozen=True)
class Union(Shape):
    parts: tuple

    def sdf(self, pts):
        return np.minimum.reduce([p.sdf(pts) for p in self.parts])

    def raycast(self, origins, direction, t_lo, t_hi):
        return np.minimum.reduce(
            [p.raycast(origins, direction, t_lo, t_hi) for p in self.parts])


@dataclass(frozen=True)
class Intersection(Shape):
    parts: tuple

    def sdf(self, pts):
        return np.maximum.reduce([p.sdf(pts) for p in self.parts])


@dataclass(frozen=True)
class Difference(Shape):
    a: Shape
    b: Shape

    def sdf(self, pts):
        return np.maximum(self.a.sdf(pts), -self.b.sdf(pts))


@dataclass(frozen=True)
class Round(Shape):
    """Grow the child surface outward by r (rounds convex corners)."""

    child: Shape
    r: float

    def sdf(self, pts):
        return self.child.sdf(pts) - self.r


@dataclass(frozen=True)
class Transform(Shape):
    """Rigid transform of the child: rotate by yaw about z, then translate."""

    child: Shape
    tx: float = 0.0
    ty: float = 0.0
    tz: float = 0.0
    yaw_deg: float = 0.0

    def _to_local(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float)) - np.asarray(
            [self.tx, self.ty, self.tz])
        a = math.radians(self.yaw_deg)
        c, s = math.cos(a), math.sin(a)
        x = c * pts[:, 0] + s * pts[:, 1]
        y = -s * pts[:, 0] + c * pts[:, 1]
        return np.stack([x, y, pts[:, 2]], axis=1)

    def sdf(self, pts):
        return self.child.sdf(self._to_local(pts))

    def raycast(self, origins, direction, t_lo, t_hi):
        o = self._to_local(origins)
        a = math.radians(self.yaw_deg)
        c, s = math.cos(a), math.sin(a)
        d = np.asarray(direction, dtype=float)
        d_local = np.array([c * d[0] + s * d[1], -s * d[0] + c * d[1], d[2]])
        return self.child.raycast(o, d_local, t_lo, t_hi)


def sdf_eval(shape: Shape, point) -> float:
    """Signed distance of a single 3D point, mm."""
    return float(shape.sdf(np.asarray(point, dtype=float).reshape(1, 3))[0])


# ---------------------------------------------------------------------------
# Benchmark stimuli

EDGE_PLATE_TOP = 20.0        # edge plates: z in [0, 20], followed boundary on top
SURFACE_WALL_HEIGHT = 80.0   # surface stimuli: vertical walls, z in [0, 80]
PUSH_OBJECT_HEIGHT = 40.0    # push objects: z in [0, 40]

EDGE_IDS = ("square", "clover", "teardrop")
SURFACE_IDS = ("arch", "flower", "disc")
PUSH_IDS = ("cube", "cylinder", "tri_prism")
ALL_IDS = EDGE_IDS + SURFACE_IDS + PUSH_IDS

# push object default masses, grams (range matching the printed set: the
# prism is the lightest at 185 g, the cylinder the heaviest at 363 g)
DEFAULT_MASS_G = {"cube": 274.0, "cylinder": 363.0, "tri_prism": 185.0}


def _teardrop_profile() -> Profile:
    # circle hulled with an apex point: circle + tangent triangle
    r, apex = 25.0, np.array([0.0, 55.0])
    d = np.linalg.norm(apex)
    phi = math.acos(r / d)          # angle from apex direction to tangent point
    base = math.atan2(apex[1], apex[0])
    t1 = np.array([r * math.cos(base + phi), r * math.sin(base + phi)])
    t2 = np.array([r * math.cos(base - phi), r * math.sin(base - phi)])
    return UnionP((Circle2(0.0, 0.0, r), Polygon2([apex, t1, t2])))


def _tri_prism_profile() -> Profile:
    side = 60.0
    h = side * math.sqrt(3.0) / 2.0
    # equilateral triangle centred on its centroid, vertex along +x so the
    # back face sits flat against a pusher travelling in +x
    return Polygon2([(2 * h / 3, 0.0), (-h / 3, side / 2), (-h / 3, -side / 2)])


_PROFILES = {
    "square": lambda: Rect2(0.0, 0.0, 50.0, 50.0),
    "clover": lambda: UnionP(tuple(
        Circle2(cx, cy, 22.0)
        for cx, cy in ((16.0, 0.0), (-16.0, 0.0), (0.0, 16.0), (0.0, -16.0)))),
    "teardrop": _teardrop_profile,
    "arch": lambda: UnionP((Rect2(0.0, 20.0, 40.0, 20.0), Circle2(0.0, 40.0, 40.0))),
    "flower": lambda: Flower2(32.0, 5.0, 4),
    "disc": lambda: Circle2(0.0, 0.0, 40.0),
    "cube": lambda: Rect2(0.0, 0.0, 25.0, 25.0),
    "cylinder": lambda: Circle2(0.0, 0.0, 30.0),
    "tri_prism": _tri_prism_profile,
}


class Stimulus(Shape):
    """A benchmark stimulus: an extruded profile plus task metadata."""

    def __init__(self, stimulus_id: str, mass_g: float | None = None):
        if stimulus_id not in _PROFILES:
            raise ValueError(f"unknown stimulus id: {stimulus_id!r}")
        self.stimulus_id = stimulus_id
        self.kind = ("edge" if stimulus_id in EDGE_IDS
                     else "surface" if stimulus_id in SURFACE_IDS else "push")
        self.profile = _PROFILES[stimulus_id]()
        if self.kind == "edge":
            self.z0, self.z1 = 0.0, EDGE_PLATE_TOP
        elif self.kind == "surface":
            self.z0, self.z1 = 0.0, SURFACE_WALL_HEIGHT
        else:
            self.z0, self.z1 = 0.0, PUSH_OBJECT_HEIGHT
        if self.kind == "push":
            self.mass_g = DEFAULT_MASS_G[stimulus_id] if mass_g is None else float(mass_g)
            if self.mass_g <= 0:
                raise ValueError("mass must be positive")
        else:
            if mass_g is not None:
                raise ValueError(f"{stimulus_id} is not a push object")
            self.mass_g = None
        self._solid = Extrusion(self.profile, self.z0, self.z1)

    def sdf(self, pts):
        return self._solid.sdf(pts)

    def raycast(self, origins, direction, t_lo, t_hi):
        return self._solid.raycast(origins, direction, t_lo, t_hi)

    def metadata(self) -> dict:
        bb = self.profile.bbox()
        return {
            "id": self.stimulus_id,
            "kind": self.kind,
            "footprint_mm": [bb[1] - bb[0], bb[3] - bb[2]],
            "height_mm": self.z1 - self.z0,
            "mass_g": self.mass_g,
        }


def make_stimulus(stimulus_id: str, mass_g: float | None = None) -> Stimulus:
    return Stimulus(stimulus_id, mass_g)


# ---------------------------------------------------------------------------
# Contour extraction

@dataclass
class Contour:
    """Ordered polyline on a profile boundary, counter-clockwise, mm."""

    points: np.ndarray          # (N, 2), no duplicate closing point
    closed: bool
    spacing: float
    arc: np.ndarray = field(init=False)     # cumulative arc length, len N
    perimeter: float = field(init=False)

    def __post_init__(self):
        pts = self.points_closed() if self.closed else self.points
        seglen = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        cum = np.concatenate([[0.0], np.cumsum(seglen)])
        self.perimeter = float(cum[-1])
        self.arc = cum[: len(self.points)]

    def points_closed(self) -> np.ndarray:
        """Points with the first vertex appended at the end (closed only)."""
        if not self.closed:
            return self.points
        return np.vstack([self.points, self.points[:1]])

    def point_at_arc(self, s: float) -> np.ndarray:
        pts = self.points_closed()
        arc = np.concatenate([self.arc, [self.perimeter]]) if self.closed else self.arc
        s = float(np.mod(s, self.perimeter)) if self.closed else float(np.clip(s, 0, arc[-1]))
        i = int(np.searchsorted(arc, s, side="right") - 1)
        i = min(i, len(pts) - 2)
        seg = pts[i + 1] - pts[i]
        seglen = max(np.linalg.norm(seg), 1e-12)
        return pts[i] + (s - arc[i]) / seglen * seg

    def tangent_at_arc(self, s: float) -> np.ndarray:
        h = max(self.spacing * 0.5, 1e-3)
        t = self.point_at_arc(s + h) - self.point_at_arc(s - h)
        return t / max(np.linalg.norm(t), 1e-12)

    def nearest(self, p) -> tuple[np.ndarray, float, float]:
        """Nearest point on the polyline: (point, arc position, distance)."""
        p = np.asarray(p, dtype=float)
        pts = self.points_closed()
        a, b = pts[:-1], pts[1:]
        e = b - a
        ee = np.einsum("ij,ij->i", e, e)
        t = np.clip(np.einsum("ij,ij->i", p - a, e) / np.maximum(ee, 1e-30), 0, 1)
        proj = a + t[:, None] * e
        d = np.linalg.norm(proj - p, axis=1)
        i = int(np.argmin(d))
        arc = np.concatenate([self.arc, [self.perimeter]]) if self.closed else self.arc
        s = arc[i] + t[i] * math.sqrt(ee[i])
        return proj[i], float(s), float(d[i])


def _refine_to_boundary(profile: Profile, pts: np.ndarray, tol=1e-9, iters=12):
    pts = pts.copy()
    for _ in range(iters):
        d = profile.sdf2(pts)
        if np.max(np.abs(d)) < tol:
            break
        g = profile.grad2(pts)
        pts -= d[:, None] * g
    return pts


def _signed_area(pts: np.ndarray) -> float:
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _extract_dense_boundary(profile: Profile, grid_mm=0.25) -> np.ndarray:
    xmin, xmax, ymin, ymax = profile.bbox()
    pad = 4.0
    xs = np.arange(xmin - pad, xmax + pad + grid_mm, grid_mm)
    ys = np.arange(ymin - pad, ymax + pad + grid_mm, grid_mm)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    fld = profile.sdf2(np.stack([gx.ravel(), gy.ravel()], axis=1)).reshape(gx.shape)
    contours = measure.find_contours(fld, 0.0)
    if not contours:
        raise ValueError("no zero level-set found for profile")
    best = max(contours, key=len)
    pts = np.stack([xs[0] + best[:, 0] * grid_mm, ys[0] + best[:, 1] * grid_mm], axis=1)
    if np.allclose(pts[0], pts[-1]):
        pts = pts[:-1]
    pts = _refine_to_boundary(profile, pts)
    if _signed_area(pts) < 0.0:
        pts = pts[::-1]
    return pts


@lru_cache(maxsize=64)
def _contour_cached(stimulus_id: str, spacing: float) -> Contour:
    stim = make_stimulus(stimulus_id)
    dense = _extract_dense_boundary(stim.profile)
    seglen = np.linalg.norm(np.diff(np.vstack([dense, dense[:1]]), axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(seglen)])
    total = arc[-1]
    n = max(3, int(round(total / spacing)))
    # anchor the start at the rightmost boundary point for determinism
    start = int(np.argmax(dense[:, 0] * 1e6 + dense[:, 1]))
    dense = np.roll(dense, -start, axis=0)
    seglen = np.linalg.norm(np.diff(np.vstack([dense, dense[:1]]), axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(seglen)])
    targets = np.arange(n) * total / n
    idx = np.searchsorted(arc, targets, side="right") - 1
    idx = np.clip(idx, 0, len(dense) - 1)
    nxt = (idx + 1) % len(dense)
    frac = (targets - arc[idx]) / np.maximum(seglen[idx], 1e-12)
    pts = dense[idx] + frac[:, None] * (dense[nxt] - dense[idx])
    pts = _refine_to_boundary(stim.profile, pts)
    return Contour(points=pts, closed=True, spacing=total / n)


def contour_points(stimulus_id: str, spacing: float) -> Contour:
    """Boundary polyline of an edge or surface stimulus at ~uniform spacing."""
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    if stimulus_id in PUSH_IDS:
        raise ValueError(f"{stimulus_id} is a push object; it has no followed contour")
    if stimulus_id not in ALL_IDS:
        raise ValueError(f"unknown stimulus id: {stimulus_id!r}")
    return _contour_cached(stimulus_id, float(spacing))


# canonical data-collection feature scenes (straight edge / flat surface)

def straight_edge_scene() -> Shape:
    """Plate occupying y <= 0, top face at z = 0; the edge runs along x."""
    return Extrusion(HalfPlane2(0.0, 1.0, 0.0), -EDGE_PLATE_TOP, 0.0)


def flat_surface_scene() -> Shape:
    """Vertical wall occupying x >= 0 with its face in the x = 0 plane."""
    return HalfSpace((-1.0, 0.0, 0.0), 0.0)
