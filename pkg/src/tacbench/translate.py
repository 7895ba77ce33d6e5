"""Real-to-sim image translation interface with baseline translators.

No real sensor exists at desk scale, so a parametric perturbation model
stands in for the "real" image domain; translators map perturbed images
back toward the clean simulated distribution.  The evaluation pipeline
composes translate(perturb(render(...))) in that order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.ndimage import gaussian_filter

from .sensors import TactileImage
from .serial import read_blob, write_blob


@dataclass(frozen=True)
class PerturbationModel:
    """Synthetic real-domain corruption, applied blur -> gain/offset -> noise
    -> dropout -> clamp."""

    noise_sigma: float = 0.0        # mm, Gaussian pixel noise
    gain_range: tuple = (1.0, 1.0)  # multiplicative drift, drawn per image
    offset_range: tuple = (0.0, 0.0)  # mm additive drift, drawn per image
    blur_sigma: float = 0.0         # px
    dropout_p: float = 0.0          # per-pixel zeroing probability
    max_depth: float = 5.0          # clamp ceiling, mm

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise ValueError("noise sigma must be >= 0")
        if not 0.0 <= self.dropout_p <= 1.0:
            raise ValueError("dropout probability must be in [0, 1]")


def perturb(img: TactileImage, model: PerturbationModel,
            rng: np.random.Generator) -> TactileImage:
    x = np.asarray(img.depth, dtype=float)
    if model.blur_sigma > 0:
        x = gaussian_filter(x, model.blur_sigma, mode="nearest")
    gain = rng.uniform(*model.gain_range)
    offset = rng.uniform(*model.offset_range)
    x = gain * x + offset
    if model.noise_sigma > 0:
        x = x + rng.normal(0.0, model.noise_sigma, size=x.shape)
    if model.dropout_p > 0:
        x = np.where(rng.random(x.shape) < model.dropout_p, 0.0, x)
    x = np.clip(x, 0.0, model.max_depth)
    return replace(img, depth=x)


TRANSLATOR_KINDS = ("identity", "affine", "external-table")


class TranslatorLoadError(IOError):
    pass


@dataclass(frozen=True)
class Translator:
    """Image-to-image map applied to incoming (perturbed) tactile images.

    affine: out = gain * in + offset, with scalar or per-pixel parameters.
    external-table: per-pixel polynomial sum_k coeff[k] * in**k, loaded from
    an externally trained model export.
    """

    kind: str
    gain: np.ndarray | float = 1.0
    offset: np.ndarray | float = 0.0
    table: np.ndarray | None = None     # (K, H, W) polynomial coefficients
    max_depth: float = 5.0

    def __post_init__(self):
        if self.kind not in TRANSLATOR_KINDS:
            raise ValueError(f"unknown translator kind: {self.kind!r}")


def translate(img: TactileImage, t: Translator) -> TactileImage:
    x = np.asarray(img.depth, dtype=float)
    if t.kind == "identity":
        return img
    if t.kind == "affine":
        g, o = np.asarray(t.gain), np.asarray(t.offset)
        for p in (g, o):
            if p.ndim and p.shape != x.shape:
                raise ValueError(f"parameter shape {p.shape} != image {x.shape}")
        y = g * x + o
    else:
        if t.table is None:
            raise ValueError("external-table translator has no table loaded")
        if t.table.shape[1:] != x.shape:
            raise ValueError(f"table shape {t.table.shape[1:]} != image {x.shape}")
        y = sum(t.table[k] * x ** k for k in range(t.table.shape[0]))
    return replace(img, depth=np.clip(y, 0.0, t.max_depth))


def calibrate_affine(pairs, per_pixel: bool = True,
                     max_depth: float = 5.0) -> Translator:
    """Closed-form least-squares gain/offset mapping perturbed -> clean.

    `pairs` is a list of (perturbed, clean) images of one common shape.
    Degenerate (constant) input pixels keep gain 1 and fit offset only.
    """
    if not pairs:
        raise ValueError("need at least one calibration pair")
    xs = np.stack([np.asarray(getattr(p, "depth", p), dtype=float) for p, _ in pairs])
    ys = np.stack([np.asarray(getattr(c, "depth", c), dtype=float) for _, c in pairs])
    if xs.shape != ys.shape:
        raise ValueError("perturbed/clean shape mismatch")

    if per_pixel:
        mx = xs.mean(axis=0)
        my = ys.mean(axis=0)
        var = (xs * xs).mean(axis=0) - mx * mx
        cov = (xs * ys).mean(axis=0) - mx * my
        ok = var > 1e-12
        gain = np.where(ok, np.divide(cov, var, out=np.ones_like(cov), where=ok), 1.0)
        offset = my - gain * mx
    else:
        mx, my = xs.mean(), ys.mean()
        var = (xs * xs).mean() - mx * mx
        cov = (xs * ys).mean() - mx * my
        gain = cov / var if var > 1e-12 else 1.0
        offset = my - gain * mx
    return Translator("affine", gain=gain, offset=offset, max_depth=max_depth)


def save_translator(t: Translator, path) -> None:
    header = {"type": "translator", "kind": t.kind, "max_depth": t.max_depth}
    arrays = {}
    if t.kind == "affine":
        arrays["gain"] = np.asarray(t.gain, dtype=float)
        arrays["offset"] = np.asarray(t.offset, dtype=float)
    elif t.kind == "external-table":
        arrays["table"] = np.asarray(t.table, dtype=float)
    write_blob(path, header, arrays)


def load_translator(path) -> Translator:
    try:
        header, arrays = read_blob(path)
    except (FileNotFoundError, ValueError) as e:
        raise TranslatorLoadError(str(e)) from e
    if header.get("type") != "translator":
        raise TranslatorLoadError(f"{path}: not a translator file")
    kind = header["kind"]
    if kind == "identity":
        return Translator("identity", max_depth=header["max_depth"])
    if kind == "affine":
        gain, offset = arrays["gain"], arrays["offset"]
        return Translator("affine",
                          gain=float(gain) if gain.ndim == 0 else gain,
                          offset=float(offset) if offset.ndim == 0 else offset,
                          max_depth=header["max_depth"])
    if kind == "external-table":
        return Translator("external-table", table=arrays["table"],
                          max_depth=header["max_depth"])
    raise TranslatorLoadError(f"{path}: unknown translator kind {kind!r}")
