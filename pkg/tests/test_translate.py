"""Perturbation model and sim-to-sim translators."""

import numpy as np
import pytest

from tacbench.common import Pose4
from tacbench.sensors import TactileImage
from tacbench.serial import BlobFormatError
from tacbench.translate import (PerturbationModel, Translator,
                                TranslatorLoadError, calibrate_affine,
                                load_translator, perturb, save_translator,
                                translate)


def img_of(depth) -> TactileImage:
    return TactileImage(depth=np.asarray(depth, dtype=float),
                        sensor_id="tactip", tcp_pose=Pose4(0, 0, 0, 0))


def rand_img(rng, shape=(32, 32)) -> TactileImage:
    return img_of(rng.uniform(0.0, 4.0, size=shape))


def test_perturbation_validation():
    with pytest.raises(ValueError):
        PerturbationModel(noise_sigma=-0.1)
    with pytest.raises(ValueError):
        PerturbationModel(dropout_p=1.5)


def test_perturb_identity_when_disabled():
    rng = np.random.default_rng(0)
    img = rand_img(rng)
    out = perturb(img, PerturbationModel(), rng)
    np.testing.assert_allclose(out.depth, img.depth)
    assert out.sensor_id == img.sensor_id


def test_perturb_clamps_to_valid_depths():
    rng = np.random.default_rng(1)
    model = PerturbationModel(noise_sigma=0.5, gain_range=(0.5, 2.0),
                              offset_range=(-1.0, 1.0), blur_sigma=1.0,
                              dropout_p=0.2, max_depth=5.0)
    for _ in range(10):
        out = perturb(rand_img(rng), model, rng)
        assert out.depth.min() >= 0.0
        assert out.depth.max() <= 5.0


def test_perturb_dropout_zeroes_pixels():
    rng = np.random.default_rng(2)
    img = img_of(np.full((64, 64), 3.0))
    out = perturb(img, PerturbationModel(dropout_p=0.3), rng)
    frac = np.mean(out.depth == 0.0)
    assert 0.2 < frac < 0.4


def test_identity_translator():
    rng = np.random.default_rng(3)
    img = rand_img(rng)
    out = translate(img, Translator("identity"))
    np.testing.assert_allclose(out.depth, img.depth)


def test_affine_translator_math():
    t = Translator("affine", gain=2.0, offset=0.5, max_depth=100.0)
    out = translate(img_of([[1.0, 2.0]]), t)
    np.testing.assert_allclose(out.depth, [[2.5, 4.5]])


def test_calibrate_affine_recovers_exact_map():
    # clean = a * perturbed + b with per-pixel coefficients
    rng = np.random.default_rng(4)
    a = rng.uniform(0.8, 1.2, size=(16, 16))
    b = rng.uniform(-0.2, 0.2, size=(16, 16))
    pairs = []
    for _ in range(8):
        x = rng.uniform(0.5, 4.0, size=(16, 16))
        pairs.append((img_of(x), img_of(a * x + b)))
    t = calibrate_affine(pairs, max_depth=100.0)
    np.testing.assert_allclose(t.gain, a, atol=1e-9)
    np.testing.assert_allclose(t.offset, b, atol=1e-9)
    x = rng.uniform(0.5, 4.0, size=(16, 16))
    out = translate(img_of(x), t)
    np.testing.assert_allclose(out.depth, a * x + b, atol=1e-9)


def test_calibrate_affine_degenerate_pixels():
    # constant perturbed pixels keep gain 1 and fit the offset
    pairs = [(img_of(np.full((4, 4), 2.0)), img_of(np.full((4, 4), 3.0)))
             for _ in range(3)]
    t = calibrate_affine(pairs)
    np.testing.assert_allclose(t.gain, 1.0)
    np.testing.assert_allclose(t.offset, 1.0)


def test_calibrate_affine_validation():
    with pytest.raises(ValueError):
        calibrate_affine([])
    with pytest.raises(ValueError):
        calibrate_affine([(img_of(np.zeros((4, 4))), img_of(np.zeros((5, 5))))])


def test_external_table_translator():
    # quadratic per-pixel table: y = c0 + c1 x + c2 x^2
    table = np.stack([np.full((2, 2), 0.1), np.full((2, 2), 1.5),
                      np.full((2, 2), -0.05)])
    t = Translator("external-table", table=table, max_depth=100.0)
    x = np.array([[1.0, 2.0], [0.0, 3.0]])
    out = translate(img_of(x), t)
    np.testing.assert_allclose(out.depth, 0.1 + 1.5 * x - 0.05 * x * x)
    with pytest.raises(ValueError):
        translate(img_of(np.zeros((3, 3))), t)     # shape mismatch
    with pytest.raises(ValueError):
        translate(img_of(x), Translator("external-table", table=None))


def test_translator_save_load_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    t = Translator("affine", gain=rng.uniform(0.9, 1.1, (8, 8)),
                   offset=rng.uniform(-0.1, 0.1, (8, 8)), max_depth=5.0)
    p = tmp_path / "t.tacb"
    save_translator(t, p)
    back = load_translator(p)
    assert back.kind == "affine"
    np.testing.assert_array_equal(back.gain, t.gain)
    np.testing.assert_array_equal(back.offset, t.offset)
    assert back.max_depth == t.max_depth


def test_load_translator_errors(tmp_path):
    with pytest.raises((TranslatorLoadError, FileNotFoundError)):
        load_translator(tmp_path / "missing.tacb")
    bad = tmp_path / "bad.tacb"
    bad.write_bytes(b"NOPE" + b"\x00" * 32)
    with pytest.raises((TranslatorLoadError, BlobFormatError)):
        load_translator(bad)
