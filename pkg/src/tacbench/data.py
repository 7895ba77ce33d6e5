"""Pose-sampled contact dataset collection and on-disk formats.

Images are rendered against the canonical straight-edge / flat-surface
feature scenes at relative poses drawn uniformly from per-sensor range
tables, then quantised to micrometres (the on-disk unit).  On disk a
dataset is a directory: ``images/NNNNN.pgm`` (16-bit binary P5),
``labels.jsonl`` and ``manifest.json``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .common import Pose4
from .geometry import SURFACE_WALL_HEIGHT, flat_surface_scene, straight_edge_scene
from .sensors import SensorModel, TactileImage, make_sensor, render_depth

SCHEMA_VERSION = 1

# pose sampling ranges per (sensor, feature); units mm / deg
DEFAULT_RANGES = {
    ("tactip", "edge"): {"y": (-6.0, 6.0), "z": (2.0, 5.0), "Rz": (-179.0, 180.0)},
    ("digitac", "edge"): {"y": (-5.0, 5.0), "z": (2.0, 4.0), "Rz": (-179.0, 180.0)},
    ("digit", "edge"): {"y": (-5.0, 5.0), "z": (2.0, 3.0), "Rz": (-179.0, 180.0)},
    ("tactip", "surface"): {"x": (1.0, 4.0), "Rz": (-15.0, 15.0)},
    ("digitac", "surface"): {"x": (1.0, 3.0), "Rz": (-15.0, 15.0)},
    ("digit", "surface"): {"x": (1.0, 2.0), "Rz": (-11.0, 11.0)},
}

# rotationally symmetric tips need no yaw-dependent range correction
SYMMETRIC_SENSORS = ("tactip",)

YAW_SCALE_MIN = 0.3     # floor of the tangent-rule y-range scale


@dataclass(frozen=True)
class SampleRangeTable:
    ranges: dict = field(default_factory=lambda: dict(DEFAULT_RANGES))

    def entry(self, sensor_id: str, feature: str) -> dict:
        try:
            return self.ranges[(sensor_id, feature)]
        except KeyError:
            raise KeyError(f"no sampling ranges for ({sensor_id}, {feature})") from None

    def to_jsonable(self) -> dict:
        return {f"{s}/{f}": {k: list(v) for k, v in e.items()}
                for (s, f), e in self.ranges.items()}


def yaw_range_scale(rz_deg: float) -> float:
    """Tangent-rule y-range scale for non-symmetric sensors on the edge.

    Rz is wrapped into (-90, 90] relative to the edge axis; the raw
    |tan(Rz)| rule degenerates near 0 and 90 degrees, so the scale is
    clamped into [YAW_SCALE_MIN, 1].
    """
    rz = math.fmod(rz_deg + 90.0, 180.0)
    if rz <= 0.0:
        rz += 180.0
    rz -= 90.0
    return min(max(abs(math.tan(math.radians(rz))), YAW_SCALE_MIN), 1.0)


def sample_pose(sensor_id: str, feature: str, table: SampleRangeTable,
                rng: np.random.Generator) -> dict:
    """Draw one relative contact pose uniformly from the table ranges."""
    e = table.entry(sensor_id, feature)
    rz = float(rng.uniform(*e["Rz"]))
    if feature == "edge":
        lo, hi = e["y"]
        if sensor_id not in SYMMETRIC_SENSORS:
            s = yaw_range_scale(rz)
            lo, hi = lo * s, hi * s
        return {"y": float(rng.uniform(lo, hi)),
                "z": float(rng.uniform(*e["z"])), "Rz": rz}
    if feature == "surface":
        return {"x": float(rng.uniform(*e["x"])), "Rz": rz}
    raise ValueError(f"unknown feature: {feature!r}")


def pose_for_feature(feature: str, rel: dict) -> tuple[Pose4, str]:
    """(TCP pose, mount) realising a relative contact pose on a feature scene."""
    if feature == "edge":
        return Pose4(0.0, rel["y"], -rel["z"], rel["Rz"]), "down"
    if feature == "surface":
        return Pose4(rel["x"], 0.0, SURFACE_WALL_HEIGHT / 2.0, rel["Rz"]), "horizontal"
    raise ValueError(f"unknown feature: {feature!r}")


def feature_scene(feature: str):
    return straight_edge_scene() if feature == "edge" else flat_surface_scene()


def quantize_um(depth: np.ndarray) -> np.ndarray:
    """Round to micrometres, the lossless on-disk resolution."""
    return np.round(depth * 1000.0) / 1000.0


@dataclass
class DatasetItem:
    image: TactileImage
    extra: dict = field(default_factory=dict)   # unknown label fields, preserved

    @property
    def rel_pose(self) -> dict:
        return self.image.rel_pose


@dataclass
class ContactDataset:
    sensor_id: str
    feature: str
    split: str                  # 'train' | 'val'
    seed: int
    items: list
    ranges: SampleRangeTable = field(default_factory=SampleRangeTable)

    def __len__(self):
        return len(self.items)


def collect(sensor_id: str, feature: str, n_train: int = 5000, n_val: int = 2000,
            seed: int = 0,
            table: SampleRangeTable | None = None,
            sensor: SensorModel | None = None):
    """Render (train, val) contact datasets for one sensor/feature pair."""
    table = table or SampleRangeTable()
    sensor = sensor or make_sensor(sensor_id)
    scene = feature_scene(feature)
    rng = np.random.default_rng(seed)

    def _make(split, n):
        items = []
        for _ in range(n):
            rel = sample_pose(sensor_id, feature, table, rng)
            pose, mount = pose_for_feature(feature, rel)
            img = render_depth(sensor, pose, scene, mount)
            img.depth = quantize_um(img.depth)
            img.feature = feature
            img.rel_pose = rel
            items.append(DatasetItem(image=img))
        return ContactDataset(sensor_id, feature, split, seed, items, table)

    return _make("train", n_train), _make("val", n_val)


# ---------------------------------------------------------------------------
# on-disk format

class DatasetFormatError(ValueError):
    pass


def write_pgm16(path, depth_mm: np.ndarray) -> None:
    um = np.round(np.asarray(depth_mm) * 1000.0)
    if um.max(initial=0.0) > 65535:
        raise ValueError("depth exceeds the 16-bit micrometre range")
    h, w = um.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        f.write(um.astype(">u2").tobytes())


def read_pgm16(path) -> np.ndarray:
    data = Path(path).read_bytes()
    try:
        magic, dims, maxval_and_rest = data.split(b"\n", 2)
        w, h = map(int, dims.split())
        maxval, raw = maxval_and_rest.split(b"\n", 1)
        if magic != b"P5" or int(maxval) != 65535:
            raise ValueError("not a 16-bit P5 file")
        if len(raw) < w * h * 2:
            raise ValueError(f"truncated pixel data ({len(raw)} < {w * h * 2} bytes)")
        um = np.frombuffer(raw[: w * h * 2], dtype=">u2").reshape(h, w)
    except ValueError as e:
        raise DatasetFormatError(f"{path}: {e}") from e
    return um.astype(float) / 1000.0


def save_dataset(ds: ContactDataset, path) -> None:
    path = Path(path)
    (path / "images").mkdir(parents=True, exist_ok=True)
    with open(path / "labels.jsonl", "w") as f:
        for i, item in enumerate(ds.items):
            write_pgm16(path / "images" / f"{i:05d}.pgm", item.image.depth)
            rec = {"index": i, "rel_pose": item.rel_pose,
                   "feature": item.image.feature, "sensor_id": item.image.sensor_id,
                   "tcp_pose": item.image.tcp_pose.to_dict()}
            rec.update(item.extra)
            f.write(json.dumps(rec, sort_keys=True) + "\n")
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "sensor_id": ds.sensor_id, "feature": ds.feature, "split": ds.split,
        "seed": ds.seed, "count": len(ds.items),
        "ranges": ds.ranges.to_jsonable(),
    }
    with open(path / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)


_KNOWN_LABEL_KEYS = {"index", "rel_pose", "feature", "sensor_id", "tcp_pose"}


def load_dataset(path) -> ContactDataset:
    path = Path(path)
    try:
        manifest = json.loads((path / "manifest.json").read_text())
    except FileNotFoundError:
        raise DatasetFormatError(f"{path}: missing manifest.json") from None
    except json.JSONDecodeError as e:
        raise DatasetFormatError(f"{path}/manifest.json: {e}") from e
    if manifest.get("schema_version") != SCHEMA_VERSION:
        raise DatasetFormatError(
            f"{path}: unsupported schema_version {manifest.get('schema_version')}")

    items = []
    with open(path / "labels.jsonl") as f:
        for lineno, line in enumerate(f):
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise DatasetFormatError(
                    f"{path}/labels.jsonl record {lineno}: {e}") from e
            i = rec["index"]
            depth = read_pgm16(path / "images" / f"{i:05d}.pgm")
            img = TactileImage(depth=depth, sensor_id=rec["sensor_id"],
                               tcp_pose=Pose4.from_dict(rec["tcp_pose"]),
                               feature=rec["feature"], rel_pose=rec["rel_pose"])
            extra = {k: v for k, v in rec.items() if k not in _KNOWN_LABEL_KEYS}
            items.append(DatasetItem(image=img, extra=extra))
    if len(items) != manifest["count"]:
        raise DatasetFormatError(
            f"{path}: manifest count {manifest['count']} != {len(items)} records")

    ranges = SampleRangeTable({
        tuple(k.split("/")): {a: tuple(v) for a, v in e.items()}
        for k, e in manifest["ranges"].items()})
    return ContactDataset(manifest["sensor_id"], manifest["feature"],
                          manifest["split"], manifest["seed"], items, ranges)
