"""Augmentation operators: identities, formula oracles, draw-order pins."""

from __future__ import annotations

import math

import numpy as np
import pytest
from PIL import Image, ImageOps

from convaug import (
    AugmentPipeline,
    ColorJitterSpec,
    ImageBuffer,
    LightingSpec,
    RandAugmentSpec,
    RandomErasingSpec,
    RngStream,
    apply_pipeline,
    fit_pca,
    load_pipeline_config,
)
from convaug.augment import (
    DEFAULT_EIGENVALUES,
    DEFAULT_EIGENVECTORS,
    RAND_AUGMENT_OPS,
    _rand_augment_apply,
    adjust_brightness,
    adjust_contrast,
    adjust_saturation,
    color_jitter,
    equalize,
    lighting_shift,
    pca_lighting,
    posterize,
    rand_augment,
    random_erasing,
    rotate,
    solarize,
    translate,
)

from conftest import random_image


def clamp8(v: float) -> int:
    return min(max(int(math.floor(v + 0.5)) if v >= 0 else int(math.ceil(v - 0.5)), 0), 255)


# --- color jitter -------------------------------------------------------------


def test_color_jitter_zero_deltas_identity(rng):
    spec = ColorJitterSpec(0.0, 0.0, 0.0)
    for _ in range(20):
        img = random_image(rng)
        out = color_jitter(img, spec, RngStream(int(rng.integers(2**32))))
        assert np.array_equal(out.data, img.data)


def test_brightness_forced_factor_scalar():
    img = ImageBuffer.full(1, 1, 100)
    assert (adjust_brightness(img, 2.0).data == 200).all()
    assert (adjust_brightness(img, 0.0).data == 0).all()
    assert (adjust_brightness(img, 3.0).data == 255).all()  # clamped


def test_brightness_exact_per_pixel(rng):
    img = random_image(rng, 9, 7)
    for f in (0.0, 0.25, 0.5, 1.0, 1.37, 1.9):
        got = adjust_brightness(img, f).data
        for v in range(256):
            mask = img.data == v
            assert (got[mask] == clamp8(v * f)).all()


def test_saturation_zero_is_grayscale(rng):
    img = random_image(rng, 6, 6)
    out = adjust_saturation(img, 0.0).data
    pix = img.data.astype(np.float64)
    luma = pix[..., 0] * 0.299 + pix[..., 1] * 0.587 + pix[..., 2] * 0.114
    for ch in range(3):
        want = np.vectorize(clamp8)(luma)
        assert np.array_equal(out[..., ch], want.astype(np.uint8))


def test_saturation_one_is_identity(rng):
    img = random_image(rng)
    assert np.array_equal(adjust_saturation(img, 1.0).data, img.data)


def test_contrast_two_tone_oracle():
    data = np.zeros((1, 2, 3), dtype=np.uint8)
    data[0, 1] = 200  # gray pixels: luma mean = 100
    img = ImageBuffer(data)
    out = adjust_contrast(img, 0.5).data
    assert out[0, 0].tolist() == [50, 50, 50]
    assert out[0, 1].tolist() == [150, 150, 150]
    assert np.array_equal(adjust_contrast(img, 1.0).data, img.data)


def test_contrast_scalar_loop_oracle(rng):
    img = random_image(rng, 5, 8)
    pix = img.data.astype(np.float64)
    mean_gray = float(
        (pix[..., 0] * 0.299 + pix[..., 1] * 0.587 + pix[..., 2] * 0.114).mean()
    )
    for f in (0.3, 0.8, 1.4):
        got = adjust_contrast(img, f).data
        for r in range(5):
            for c in range(8):
                for ch in range(3):
                    want = clamp8(mean_gray + (float(img.data[r, c, ch]) - mean_gray) * f)
                    assert abs(int(got[r, c, ch]) - want) <= 1


def test_color_jitter_draw_order_pin(rng):
    # documented order: f_b, f_c, f_s, then a permutation of the three ops
    img = random_image(rng, 8, 8)
    spec = ColorJitterSpec(0.4, 0.4, 0.4)
    for seed in (0, 1, 99):
        got = color_jitter(img, spec, RngStream(seed))
        replay = RngStream(seed)
        f_b = replay.uniform(0.6, 1.4)
        f_c = replay.uniform(0.6, 1.4)
        f_s = replay.uniform(0.6, 1.4)
        steps = [
            lambda im: adjust_brightness(im, f_b),
            lambda im: adjust_contrast(im, f_c),
            lambda im: adjust_saturation(im, f_s),
        ]
        want = img
        for i in replay.permutation(3):
            want = steps[i](want)
        assert np.array_equal(got.data, want.data)


def test_color_jitter_deterministic(rng):
    img = random_image(rng)
    spec = ColorJitterSpec()
    a = color_jitter(img, spec, RngStream(7)).data
    b = color_jitter(img, spec, RngStream(7)).data
    assert np.array_equal(a, b)


# --- pca lighting -------------------------------------------------------------


def test_lighting_zero_std_identity(rng):
    spec = LightingSpec(alpha_std=0.0)
    for _ in range(20):
        img = random_image(rng)
        out = pca_lighting(img, spec, RngStream(int(rng.integers(2**32))))
        assert np.array_equal(out.data, img.data)


def test_lighting_identity_basis_shift():
    eye = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))
    spec = LightingSpec(alpha_std=0.1, eigenvalues=(1.0, 1.0, 1.0), eigenvectors=eye)
    img = ImageBuffer.full(4, 4, 100)
    out = lighting_shift(img, (10.0 / 255.0, 0.0, 0.0), spec)
    assert (out.data[..., 0] == 110).all()
    assert (out.data[..., 1] == 100).all()
    assert (out.data[..., 2] == 100).all()


def test_lighting_matrix_vector_oracle(rng):
    # random orthonormal basis from QR, forced alphas, vs plain-loop oracle
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    spec = LightingSpec(
        alpha_std=0.1,
        eigenvalues=(0.5, 0.2, 0.07),
        eigenvectors=tuple(tuple(float(v) for v in row) for row in q),
    )
    alphas = (0.11, -0.23, 0.05)
    img = random_image(rng, 5, 5)
    got = lighting_shift(img, alphas, spec).data
    for ch in range(3):
        delta = sum(q[ch][j] * alphas[j] * spec.eigenvalues[j] * 255.0 for j in range(3))
        for r in range(5):
            for c in range(5):
                want = clamp8(float(img.data[r, c, ch]) + delta)
                assert abs(int(got[r, c, ch]) - want) <= 1


def test_lighting_shift_is_per_channel_constant(rng):
    # mid-range input far from saturation: diff must be constant per channel
    data = rng.integers(90, 160, size=(12, 12, 3), dtype=np.uint8)
    img = ImageBuffer(data)
    out = pca_lighting(img, LightingSpec(alpha_std=0.05), RngStream(3)).data
    diff = out.astype(np.int32) - data.astype(np.int32)
    for ch in range(3):
        assert np.unique(diff[..., ch]).size == 1


def test_lighting_consumes_six_draws():
    s1, s2 = RngStream(44), RngStream(44)
    pca_lighting(ImageBuffer.full(2, 2, 100), LightingSpec(), s1)
    for _ in range(6):
        s2.next_u64()
    assert s1.next_u64() == s2.next_u64()


def test_default_eigenbasis_unit_columns():
    vecs = np.asarray(DEFAULT_EIGENVECTORS)
    norms = np.linalg.norm(vecs, axis=0)
    assert np.abs(norms - 1.0).max() <= 1e-6
    assert DEFAULT_EIGENVALUES == (0.2175, 0.0188, 0.0045)
    # columns renormalized from the conventional 4-decimal values
    raw = np.array(
        [
            [-0.5675, 0.7192, 0.4009],
            [-0.5808, -0.0045, -0.8140],
            [-0.5836, -0.6948, 0.4203],
        ]
    )
    assert np.allclose(vecs, raw / np.linalg.norm(raw, axis=0), atol=1e-12)


def test_lighting_spec_rejects_bad_basis():
    with pytest.raises(ValueError):
        LightingSpec(eigenvectors=((2.0, 0, 0), (0, 1.0, 0), (0, 0, 1.0)))
    with pytest.raises(ValueError):
        LightingSpec(alpha_std=-0.1)


# --- random erasing -----------------------------------------------------------


def test_random_erasing_p0_identity(rng):
    spec = RandomErasingSpec(probability=0.0)
    for _ in range(20):
        img = random_image(rng)
        out = random_erasing(img, spec, RngStream(int(rng.integers(2**32))))
        assert np.array_equal(out.data, img.data)


def find_rect(before: np.ndarray, after: np.ndarray):
    changed = (before != after).any(axis=2)
    ys, xs = np.nonzero(changed)
    assert ys.size > 0
    return ys.min(), ys.max() + 1, xs.min(), xs.max() + 1


def test_random_erasing_p1_rectangle_contract():
    spec = RandomErasingSpec(
        probability=1.0, fill_mode="constant", fill_value=0
    )
    img = ImageBuffer.full(40, 60, 100)
    hw = 40 * 60
    s_low, s_high = spec.area_range
    for seed in range(30):
        out = random_erasing(img, spec, RngStream(seed)).data
        y0, y1, x0, x1 = find_rect(img.data, out)
        h, w = y1 - y0, x1 - x0
        # the changed region is exactly one filled rectangle
        assert (out[y0:y1, x0:x1] == 0).all()
        mask = np.ones_like(out, dtype=bool)
        mask[y0:y1, x0:x1] = False
        assert np.array_equal(out[mask], img.data[mask])
        # realized area within the configured range, +/- rounding slack
        slack = 2 * (h + w)
        assert h * w >= s_low * hw - slack
        assert h * w <= s_high * hw + slack


def test_random_erasing_aspect_bounds():
    spec = RandomErasingSpec(probability=1.0, aspect_range=(0.5, 2.0),
                             fill_mode="constant", fill_value=7)
    img = ImageBuffer.full(50, 50, 200)
    for seed in range(30):
        out = random_erasing(img, spec, RngStream(seed)).data
        y0, y1, x0, x1 = find_rect(img.data, out)
        h, w = y1 - y0, x1 - x0
        ratio = h / w
        # rounding both sides by +/-0.5 bounds the realized ratio
        assert (h - 0.5) / (w + 0.5) <= 2.0 + 0.2
        assert (h + 0.5) / (w - 0.5) >= 0.5 - 0.05
        assert ratio > 0


def test_random_erasing_draw_order_pin(rng):
    img = random_image(rng, 24, 24)
    spec = RandomErasingSpec(probability=1.0)
    for seed in (3, 8, 21):
        got = random_erasing(img, spec, RngStream(seed)).data
        replay = RngStream(seed)
        assert replay.next_float64() < 1.0  # gate
        area = 24.0 * 24.0
        for _ in range(10):
            target = replay.uniform(0.02 * area, 0.33 * area)
            ratio = math.exp(replay.uniform(math.log(0.3), math.log(3.3)))
            h = int(math.floor(math.sqrt(target * ratio) + 0.5))
            w = int(math.floor(math.sqrt(target / ratio) + 0.5))
            if h < 1 or w < 1 or h > 24 or w > 24:
                continue
            top = replay.next_below(24 - h + 1)
            left = replay.next_below(24 - w + 1)
            fill = np.frombuffer(replay.next_bytes(h * w * 3), dtype=np.uint8)
            want = img.data.copy()
            want[top : top + h, left : left + w] = fill.reshape(h, w, 3)
            break
        else:
            want = img.data
        assert np.array_equal(got, want)


def test_random_erasing_monte_carlo_light(rng):
    img = random_image(rng, 16, 16)
    spec = RandomErasingSpec(probability=0.5)
    modified = 0
    trials = 2000
    for seed in range(trials):
        out = random_erasing(img, spec, RngStream(seed)).data
        if not np.array_equal(out, img.data):
            modified += 1
    assert abs(modified / trials - 0.5) < 0.04


def test_random_erasing_spec_validation():
    with pytest.raises(ValueError):
        RandomErasingSpec(probability=1.5)
    with pytest.raises(ValueError):
        RandomErasingSpec(area_range=(0.0, 0.3))
    with pytest.raises(ValueError):
        RandomErasingSpec(area_range=(0.4, 0.2))
    with pytest.raises(ValueError):
        RandomErasingSpec(aspect_range=(-1.0, 2.0))
    with pytest.raises(ValueError):
        RandomErasingSpec(fill_mode="stripes")


# --- rand augment -------------------------------------------------------------


def test_solarize_per_pixel(rng):
    img = random_image(rng, 6, 9)
    for t in (0, 77, 128, 255, 256):
        got = solarize(img, t).data
        want = np.where(img.data < t, img.data, 255 - img.data)
        assert np.array_equal(got, want.astype(np.uint8))
    assert np.array_equal(solarize(img, 256).data, img.data)


def test_posterize_bitmask(rng):
    img = random_image(rng, 6, 9)
    for bits in range(1, 9):
        got = posterize(img, bits).data
        mask = 0xFF & ~((1 << (8 - bits)) - 1)
        assert np.array_equal(got, img.data & mask)
    assert np.array_equal(posterize(img, 8).data, img.data)


def test_equalize_matches_pil(rng):
    for _ in range(60):
        h, w = int(rng.integers(1, 24)), int(rng.integers(1, 24))
        img = random_image(rng, h, w)
        want = np.asarray(ImageOps.equalize(Image.fromarray(img.data, "RGB")))
        assert np.array_equal(equalize(img).data, want)


def test_equalize_matches_pil_adversarial():
    cases = [
        np.full((5, 5, 3), 7, np.uint8),
        np.array([[[0, 0, 0], [255, 255, 255]]] * 8, np.uint8),
        np.array([[[254, 1, 128]]], np.uint8),
        np.concatenate(
            [np.zeros((1, 99, 3), np.uint8), np.full((1, 1, 3), 255, np.uint8)], axis=1
        ),
    ]
    for data in cases:
        img = ImageBuffer(data)
        want = np.asarray(ImageOps.equalize(Image.fromarray(data, "RGB")))
        assert np.array_equal(equalize(img).data, want)


def test_rand_augment_identity_op(rng):
    img = random_image(rng)
    assert np.array_equal(_rand_augment_apply(img, "identity", 9, 1).data, img.data)
    # find a seed whose first selection draw picks the identity slot
    seed = next(s for s in range(2000) if RngStream(s).next_below(12) == 0)
    out = rand_augment(img, 1, 9, RngStream(seed))
    assert np.array_equal(out.data, img.data)


def test_rand_augment_magnitude_zero_ops(rng):
    img = random_image(rng, 10, 10)
    for op in RAND_AUGMENT_OPS:
        if op == "equalize":
            continue  # not magnitude-scaled
        for sign in (1, -1):
            out = _rand_augment_apply(img, op, 0, sign)
            assert np.array_equal(out.data, img.data), op


def test_rand_augment_magnitude_mappings(rng):
    img = random_image(rng, 8, 8)
    assert np.array_equal(
        _rand_augment_apply(img, "brightness", 10, 1).data,
        adjust_brightness(img, 1.0 + 0.9 * (10 / 10.0)).data,
    )
    assert np.array_equal(
        _rand_augment_apply(img, "brightness", 10, -1).data,
        adjust_brightness(img, 1.0 - 0.9 * (10 / 10.0)).data,
    )
    assert np.array_equal(
        _rand_augment_apply(img, "posterize", 10, 1).data, posterize(img, 4).data
    )
    assert np.array_equal(
        _rand_augment_apply(img, "solarize", 5, 1).data, solarize(img, 128).data
    )


def test_translate_integer_pixels_exact(rng):
    img = random_image(rng, 8, 8)
    out = translate(img, 3.0, 0.0).data
    assert np.array_equal(out[:, 3:], img.data[:, :-3])
    assert (out[:, :3] == 0).all()
    out = translate(img, 0.0, -2.0).data
    assert np.array_equal(out[:-2, :], img.data[2:, :])
    assert (out[-2:, :] == 0).all()


def test_rotate_zero_identity_and_quarter_turn(rng):
    img = random_image(rng, 8, 8)
    assert np.array_equal(rotate(img, 0.0).data, img.data)
    got = rotate(img, 90.0).data
    assert np.array_equal(got, np.rot90(img.data, k=-1)) or np.array_equal(
        got, np.rot90(img.data, k=1)
    )


def test_rand_augment_selection_replay(rng):
    img = random_image(rng, 10, 10)
    for seed in (2, 13, 57):
        got = rand_augment(img, 3, 7, RngStream(seed))
        replay = RngStream(seed)
        want = img
        for _ in range(3):
            op = RAND_AUGMENT_OPS[replay.next_below(12)]
            sign = 1
            if op not in ("identity", "posterize", "solarize", "equalize"):
                sign = 1 if replay.next_below(2) == 0 else -1
            want = _rand_augment_apply(want, op, 7, sign)
        assert np.array_equal(got.data, want.data)


# --- pipeline -----------------------------------------------------------------


def test_empty_pipeline_identity(rng):
    img = random_image(rng)
    out = apply_pipeline(img, AugmentPipeline(ops=(), global_seed=9), "s")
    assert np.array_equal(out.data, img.data)


def test_composed_identities(rng):
    pipeline = AugmentPipeline(
        ops=(ColorJitterSpec(0, 0, 0), RandomErasingSpec(probability=0.0)),
        global_seed=123,
    )
    for _ in range(10):
        img = random_image(rng)
        out = apply_pipeline(img, pipeline, "sample")
        assert np.array_equal(out.data, img.data)


def full_pipeline() -> AugmentPipeline:
    return AugmentPipeline(
        ops=(
            ColorJitterSpec(0.4, 0.4, 0.4),
            LightingSpec(alpha_std=0.1),
            RandomErasingSpec(probability=1.0),
            RandAugmentSpec(n_ops=2, magnitude=9),
        ),
        global_seed=2023,
    )


def test_pipeline_determinism(rng):
    img = random_image(rng, 32, 32)
    a = apply_pipeline(img, full_pipeline(), "clip-7")
    b = apply_pipeline(img, full_pipeline(), "clip-7")
    assert np.array_equal(a.data, b.data)
    c = apply_pipeline(img, full_pipeline(), "clip-8")
    assert not np.array_equal(a.data, c.data)


def test_pipeline_same_sample_same_parameters(rng):
    # frames of one sample get identical draws: the erased rectangle lands
    # at the same place in two different frames
    pipeline = AugmentPipeline(
        ops=(RandomErasingSpec(probability=1.0, fill_mode="constant", fill_value=0),),
        global_seed=5,
    )
    f1 = ImageBuffer(rng.integers(1, 256, size=(20, 20, 3), dtype=np.uint8))
    f2 = ImageBuffer(rng.integers(1, 256, size=(20, 20, 3), dtype=np.uint8))
    r1 = find_rect(f1.data, apply_pipeline(f1, pipeline, "clip").data)
    r2 = find_rect(f2.data, apply_pipeline(f2, pipeline, "clip").data)
    assert r1 == r2


def test_pipeline_op_index_keys_streams(rng):
    # two copies of the same op must not reuse one stream
    img = random_image(rng, 24, 24)
    one = AugmentPipeline(ops=(RandomErasingSpec(probability=1.0),), global_seed=1)
    two = AugmentPipeline(
        ops=(RandomErasingSpec(probability=0.0), RandomErasingSpec(probability=1.0)),
        global_seed=1,
    )
    a = apply_pipeline(img, one, "s").data
    b = apply_pipeline(img, two, "s").data
    assert not np.array_equal(a, b)


# --- config loading -----------------------------------------------------------


def test_load_pipeline_config(tmp_path):
    cfg = tmp_path / "aug.yaml"
    cfg.write_text(
        "seed: 11\n"
        "ops:\n"
        "  - kind: color_jitter\n"
        "    brightness: 0.3\n"
        "    contrast: 0.2\n"
        "    saturation: 0.1\n"
        "  - kind: lighting\n"
        "    alpha_std: 0.05\n"
        "  - kind: random_erasing\n"
        "    probability: 0.25\n"
        "    area: [0.05, 0.2]\n"
        "    aspect: [0.5, 2.0]\n"
        "    fill:\n"
        "      constant: 128\n"
        "  - kind: rand_augment\n"
        "    n_ops: 2\n"
        "    magnitude: 7\n",
        encoding="utf-8",
    )
    pipeline = load_pipeline_config(cfg)
    assert pipeline.global_seed == 11
    cj, light, re_spec, ra = pipeline.ops
    assert cj == ColorJitterSpec(0.3, 0.2, 0.1)
    assert light.alpha_std == 0.05
    assert re_spec.probability == 0.25
    assert re_spec.area_range == (0.05, 0.2)
    assert re_spec.fill_mode == "constant"
    assert re_spec.fill_value == 128
    assert ra == RandAugmentSpec(n_ops=2, magnitude=7)
    assert load_pipeline_config(cfg, seed_override=99).global_seed == 99


def test_load_pipeline_config_errors(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("ops:\n  - kind: vortex\n", encoding="utf-8")
    with pytest.raises(ValueError, match="vortex"):
        load_pipeline_config(bad)
    bad.write_text("ops: 5\n", encoding="utf-8")
    with pytest.raises(ValueError):
        load_pipeline_config(bad)
    with pytest.raises(FileNotFoundError):
        load_pipeline_config(tmp_path / "missing.yaml")


# --- fit-pca ------------------------------------------------------------------


def test_fit_pca_covariance_oracle(rng):
    # correlated pixel cloud with a known dominant direction
    base = rng.normal(0.0, 40.0, size=(4000, 1))
    noise = rng.normal(0.0, 6.0, size=(4000, 3))
    pixels = np.clip(128.0 + base * np.array([[1.0, 0.8, 0.6]]) + noise, 0, 255)
    data = pixels.reshape(50, 80, 3).astype(np.uint8)
    spec = fit_pca([ImageBuffer(data)], alpha_std=0.2)
    assert spec.alpha_std == 0.2

    x = data.reshape(-1, 3).astype(np.float64) / 255.0
    cov = np.cov(x, rowvar=False, ddof=0)
    vecs = np.asarray(spec.eigenvectors)
    vals = np.asarray(spec.eigenvalues)
    # descending, non-negative eigenvalues; unit columns; sign convention
    assert vals[0] >= vals[1] >= vals[2] >= 0
    assert np.allclose(np.linalg.norm(vecs, axis=0), 1.0, atol=1e-12)
    for j in range(3):
        col = vecs[:, j]
        assert col[np.argmax(np.abs(col))] > 0
        # eigenpair property: cov @ v = lambda * v
        assert np.allclose(cov @ col, vals[j] * col, atol=1e-9)
    # full reconstruction
    assert np.allclose(vecs @ np.diag(vals) @ vecs.T, cov, atol=1e-9)


def test_fit_pca_output_is_valid_lighting_spec(rng):
    imgs = [random_image(rng, 10, 10) for _ in range(4)]
    spec = fit_pca(imgs)
    assert isinstance(spec, LightingSpec)  # construction enforces unit columns


def test_fit_pca_rejects_empty():
    with pytest.raises(ValueError):
        fit_pca([])
