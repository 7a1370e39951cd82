"""Seeded, composable augmentation operators over 8-bit RGB images.

Four operator families: ColorJitter (brightness/contrast/saturation),
PCA lighting, RandomErasing, and RandAugment. Every operator
is a pure function of ``(image, spec, rng)``; given the same
:class:`~convaug.core.RngStream` seed it produces the same bytes on every
platform. Draw order is part of each operator's contract and is documented
in its docstring, so goldens stay stable.

Pixel math uses float64 intermediates and re-quantizes with the core
rounding rule (round half away from zero, clamp to [0, 255]) after each
logical operation. Grayscale conversions use ITU-R BT.601 luma weights
(0.299, 0.587, 0.114).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np
import yaml

from .core import ImageBuffer, RngStream, derive_sample_seed, quantize_u8, round_half_away

__all__ = [
    "ColorJitterSpec",
    "LightingSpec",
    "RandomErasingSpec",
    "RandAugmentSpec",
    "AugmentPipeline",
    "color_jitter",
    "pca_lighting",
    "random_erasing",
    "rand_augment",
    "apply_pipeline",
    "adjust_brightness",
    "adjust_contrast",
    "adjust_saturation",
    "lighting_shift",
    "solarize",
    "posterize",
    "equalize",
    "rotate",
    "translate",
    "shear",
    "load_pipeline_config",
    "fit_pca",
    "DEFAULT_EIGENVALUES",
    "DEFAULT_EIGENVECTORS",
    "RAND_AUGMENT_OPS",
]

LUMA_WEIGHTS = (0.299, 0.587, 0.114)

# Conventional natural-image RGB-covariance basis (rows are channels, columns
# are principal directions), with columns renormalized to exact unit length:
# the widely circulated 4-decimal values are off by ~1e-5, which would fail
# the 1e-6 unit-norm check below.
_RAW_EIGENVECTORS = np.array(
    [
        [-0.5675, 0.7192, 0.4009],
        [-0.5808, -0.0045, -0.8140],
        [-0.5836, -0.6948, 0.4203],
    ],
    dtype=np.float64,
)
_NORMED = _RAW_EIGENVECTORS / np.linalg.norm(_RAW_EIGENVECTORS, axis=0, keepdims=True)

DEFAULT_EIGENVALUES: tuple[float, float, float] = (0.2175, 0.0188, 0.0045)
DEFAULT_EIGENVECTORS: tuple[tuple[float, ...], ...] = tuple(
    tuple(float(v) for v in row) for row in _NORMED
)


@dataclass(frozen=True)
class ColorJitterSpec:
    """Max relative deltas; factors are drawn from [max(0, 1-x), 1+x]."""

    brightness: float = 0.4
    contrast: float = 0.4
    saturation: float = 0.4

    def __post_init__(self) -> None:
        if min(self.brightness, self.contrast, self.saturation) < 0:
            raise ValueError("color jitter deltas must be >= 0")


@dataclass(frozen=True)
class LightingSpec:
    """PCA lighting: Gaussian-scaled shift along an RGB color eigenbasis.

    ``eigenvectors`` rows are channels, columns are principal directions;
    each column must have unit norm within 1e-6.
    """

    alpha_std: float = 0.1
    eigenvalues: tuple[float, float, float] = DEFAULT_EIGENVALUES
    eigenvectors: tuple[tuple[float, ...], ...] = DEFAULT_EIGENVECTORS

    def __post_init__(self) -> None:
        if self.alpha_std < 0:
            raise ValueError("alpha_std must be >= 0")
        vecs = np.asarray(self.eigenvectors, dtype=np.float64)
        if vecs.shape != (3, 3):
            raise ValueError(f"eigenvectors must be 3x3, got {vecs.shape}")
        norms = np.linalg.norm(vecs, axis=0)
        if np.any(np.abs(norms - 1.0) > 1e-6):
            raise ValueError(f"eigenvector columns must have unit norm, got {norms}")
        if len(self.eigenvalues) != 3:
            raise ValueError("eigenvalues must have 3 entries")


@dataclass(frozen=True)
class RandomErasingSpec:
    """Parameters for occluding a random rectangle with random or constant fill."""

    probability: float = 0.5
    area_range: tuple[float, float] = (0.02, 0.33)
    aspect_range: tuple[float, float] = (0.3, 3.3)
    fill_mode: str = "random"  # "random" (per-pixel values) or "constant"
    fill_value: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError("probability must be in [0, 1]")
        s_low, s_high = self.area_range
        if not 0.0 < s_low <= s_high < 1.0:
            raise ValueError(f"area_range must satisfy 0 < low <= high < 1, got {self.area_range}")
        r_low, r_high = self.aspect_range
        if not 0.0 < r_low <= r_high:
            raise ValueError(f"aspect_range must satisfy 0 < low <= high, got {self.aspect_range}")
        if self.fill_mode not in ("random", "constant"):
            raise ValueError(f"fill_mode must be 'random' or 'constant', got {self.fill_mode!r}")
        if not 0 <= self.fill_value <= 255:
            raise ValueError("fill_value must be in [0, 255]")


@dataclass(frozen=True)
class RandAugmentSpec:
    """N randomly chosen transforms at a shared integer magnitude in 0..10."""

    n_ops: int = 2
    magnitude: int = 9

    def __post_init__(self) -> None:
        if self.n_ops < 1:
            raise ValueError("n_ops must be >= 1")
        if not 0 <= self.magnitude <= 10:
            raise ValueError("magnitude must be in [0, 10]")


OperatorSpec = Union[ColorJitterSpec, LightingSpec, RandomErasingSpec, RandAugmentSpec]


@dataclass(frozen=True)
class AugmentPipeline:
    """Ordered operator list plus the global seed that keys every draw."""

    ops: tuple[OperatorSpec, ...] = ()
    global_seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "ops", tuple(self.ops))
        for op in self.ops:
            if not isinstance(op, (ColorJitterSpec, LightingSpec, RandomErasingSpec, RandAugmentSpec)):
                raise ValueError(f"unknown operator spec {type(op).__name__}")


# --- scalar-formula primitives (the forced-parameter oracle surface) --------


def _as_float(img: ImageBuffer) -> np.ndarray:
    return img.data.astype(np.float64)


def _luma(pixels: np.ndarray) -> np.ndarray:
    r, g, b = LUMA_WEIGHTS
    return pixels[..., 0] * r + pixels[..., 1] * g + pixels[..., 2] * b


def adjust_brightness(img: ImageBuffer, factor: float) -> ImageBuffer:
    """v -> v * factor, re-quantized."""
    return ImageBuffer(quantize_u8(_as_float(img) * factor))


def adjust_contrast(img: ImageBuffer, factor: float) -> ImageBuffer:
    """v -> mean_gray + (v - mean_gray) * factor.

    ``mean_gray`` is the scalar float64 mean of the (unquantized) luma image.
    """
    pixels = _as_float(img)
    mean_gray = float(_luma(pixels).mean())
    return ImageBuffer(quantize_u8(mean_gray + (pixels - mean_gray) * factor))


def adjust_saturation(img: ImageBuffer, factor: float) -> ImageBuffer:
    """v -> luma_pixel + (v - luma_pixel) * factor, per pixel; factor 0 is grayscale."""
    pixels = _as_float(img)
    luma = _luma(pixels)[..., None]
    return ImageBuffer(quantize_u8(luma + (pixels - luma) * factor))


def lighting_shift(img: ImageBuffer, alphas: Sequence[float], spec: LightingSpec) -> ImageBuffer:
    """Add the per-channel shift ``E @ (alpha * eigenvalue) * 255`` everywhere."""
    vecs = np.asarray(spec.eigenvectors, dtype=np.float64)
    vals = np.asarray(spec.eigenvalues, dtype=np.float64)
    delta = vecs @ (np.asarray(alphas, dtype=np.float64) * vals) * 255.0
    return ImageBuffer(quantize_u8(_as_float(img) + delta[None, None, :]))


def solarize(img: ImageBuffer, threshold: int) -> ImageBuffer:
    """v -> v if v < threshold else 255 - v. threshold 256 is the identity."""
    v = img.data
    return ImageBuffer(np.where(v < threshold, v, 255 - v).astype(np.uint8))


def posterize(img: ImageBuffer, bits: int) -> ImageBuffer:
    """Zero the (8 - bits) low bits of every sample. bits 8 is the identity."""
    if not 1 <= bits <= 8:
        raise ValueError("bits must be in [1, 8]")
    mask = 0xFF & ~((1 << (8 - bits)) - 1)
    return ImageBuffer(img.data & np.uint8(mask))


def equalize(img: ImageBuffer) -> ImageBuffer:
    """Classic cumulative-histogram equalization, per channel.

    Integer LUT construction: with ``step = (pixels - last_nonzero_bin) // 255``
    the LUT entry for level i is ``(step // 2 + cumsum(hist[:i])) // step``;
    degenerate histograms (<= 1 occupied bin or step 0) map to the identity.
    """
    out = np.empty_like(img.data)
    for c in range(3):
        channel = img.data[..., c]
        hist = np.bincount(channel.ravel(), minlength=256).astype(np.int64)
        nonzero = hist[hist > 0]
        if nonzero.size <= 1:
            out[..., c] = channel
            continue
        step = (int(nonzero.sum()) - int(nonzero[-1])) // 255
        if step == 0:
            out[..., c] = channel
            continue
        cum = np.concatenate(([0], np.cumsum(hist)[:-1]))
        lut = np.clip((step // 2 + cum) // step, 0, 255).astype(np.uint8)
        out[..., c] = lut[channel]
    return ImageBuffer(out)


# --- geometric primitives (inverse-mapped bilinear, zero fill) ---------------


def _affine_bilinear(img: ImageBuffer, inv: np.ndarray) -> ImageBuffer:
    """Sample the source through an inverse-affine map.

    ``inv`` is the 2x3 matrix taking destination pixel centers (x + 0.5,
    y + 0.5) to source centers. Taps outside the image contribute zero, per
    the zero-fill convention for geometric augmentation.
    """
    h, w = img.height, img.width
    src = img.data.astype(np.float64)
    xs = np.arange(w, dtype=np.float64) + 0.5
    ys = np.arange(h, dtype=np.float64) + 0.5
    gx, gy = np.meshgrid(xs, ys)
    sx = inv[0, 0] * gx + inv[0, 1] * gy + inv[0, 2] - 0.5
    sy = inv[1, 0] * gx + inv[1, 1] * gy + inv[1, 2] - 0.5

    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    fx = (sx - x0)[..., None]
    fy = (sy - y0)[..., None]

    acc = np.zeros((h, w, 3), dtype=np.float64)
    for dy, wy in ((0, 1.0 - fy), (1, fy)):
        for dx, wx in ((0, 1.0 - fx), (1, fx)):
            xi = x0 + dx
            yi = y0 + dy
            valid = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
            tap = src[np.clip(yi, 0, h - 1), np.clip(xi, 0, w - 1)]
            acc += wy * wx * np.where(valid[..., None], tap, 0.0)
    return ImageBuffer(quantize_u8(acc))


def rotate(img: ImageBuffer, degrees: float) -> ImageBuffer:
    """Rotate about the image center; bilinear, zero fill."""
    theta = math.radians(degrees)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    cx, cy = img.width / 2.0, img.height / 2.0
    # inverse rotation: R(-theta) about (cx, cy)
    inv = np.array(
        [
            [cos_t, sin_t, cx - cos_t * cx - sin_t * cy],
            [-sin_t, cos_t, cy + sin_t * cx - cos_t * cy],
        ]
    )
    return _affine_bilinear(img, inv)


def translate(img: ImageBuffer, dx: float, dy: float) -> ImageBuffer:
    """Shift content by (dx, dy) pixels; bilinear, zero fill."""
    inv = np.array([[1.0, 0.0, -dx], [0.0, 1.0, -dy]])
    return _affine_bilinear(img, inv)


def shear(img: ImageBuffer, sx: float, sy: float) -> ImageBuffer:
    """Shear about the image center; bilinear, zero fill.

    Exactly one of ``sx``/``sy`` should be nonzero for the RandAugment ops.
    """
    cx, cy = img.width / 2.0, img.height / 2.0
    inv = np.array([[1.0, -sx, sx * cy], [-sy, 1.0, sy * cx]])
    return _affine_bilinear(img, inv)


# --- randomized operators ----------------------------------------------------


def color_jitter(img: ImageBuffer, spec: ColorJitterSpec, rng: RngStream) -> ImageBuffer:
    """Randomly perturb brightness, contrast, and saturation.

    Draw order: brightness factor, contrast factor, saturation factor (each
    uniform on [max(0, 1-x), 1+x]), then a Fisher-Yates permutation of the
    three ops. Ops apply in permuted order, re-quantizing after each.
    """
    f_b = rng.uniform(max(0.0, 1.0 - spec.brightness), 1.0 + spec.brightness)
    f_c = rng.uniform(max(0.0, 1.0 - spec.contrast), 1.0 + spec.contrast)
    f_s = rng.uniform(max(0.0, 1.0 - spec.saturation), 1.0 + spec.saturation)
    steps = [
        lambda im: adjust_brightness(im, f_b),
        lambda im: adjust_contrast(im, f_c),
        lambda im: adjust_saturation(im, f_s),
    ]
    for i in rng.permutation(3):
        img = steps[i](img)
    return img


def pca_lighting(img: ImageBuffer, spec: LightingSpec, rng: RngStream) -> ImageBuffer:
    """Add a random shift along the PCA eigenbasis.

    Draws three standard normals (Box-Muller, two u64 each) scaled by
    ``alpha_std``; the resulting shift is constant across the image.
    """
    alphas = [rng.normal() * spec.alpha_std for _ in range(3)]
    return lighting_shift(img, alphas, spec)


def random_erasing(img: ImageBuffer, spec: RandomErasingSpec, rng: RngStream) -> ImageBuffer:
    """Erase one random rectangle with random or constant values.

    Draw order: one uniform for the probability gate; then per attempt (up
    to 10) a uniform area in [s_low*HW, s_high*HW], a log-uniform aspect in
    [r_low, r_high], and — once a rectangle fits — its top and left offsets.
    Random fill bytes come from consecutive u64 draws, little-endian, in
    row-major (h, w, 3) order. Pixels outside the rectangle are untouched.
    """
    if rng.next_float64() >= spec.probability:
        return img
    h_img, w_img = img.height, img.width
    area = float(h_img * w_img)
    s_low, s_high = spec.area_range
    r_low, r_high = spec.aspect_range
    for _ in range(10):
        target = rng.uniform(s_low * area, s_high * area)
        ratio = math.exp(rng.uniform(math.log(r_low), math.log(r_high)))
        rect_h = int(round_half_away(math.sqrt(target * ratio)))
        rect_w = int(round_half_away(math.sqrt(target / ratio)))
        if rect_h < 1 or rect_w < 1 or rect_h > h_img or rect_w > w_img:
            continue
        top = rng.next_below(h_img - rect_h + 1)
        left = rng.next_below(w_img - rect_w + 1)
        out = img.data.copy()
        if spec.fill_mode == "random":
            patch = np.frombuffer(rng.next_bytes(rect_h * rect_w * 3), dtype=np.uint8)
            out[top : top + rect_h, left : left + rect_w] = patch.reshape(rect_h, rect_w, 3)
        else:
            out[top : top + rect_h, left : left + rect_w] = spec.fill_value
        return ImageBuffer(out)
    return img


# Fixed operator table; the selection draw indexes into this order.
RAND_AUGMENT_OPS = (
    "identity",
    "brightness",
    "contrast",
    "saturation",
    "posterize",
    "solarize",
    "equalize",
    "rotate",
    "translate_x",
    "translate_y",
    "shear_x",
    "shear_y",
)

_SIGNED_OPS = frozenset(
    {"brightness", "contrast", "saturation", "rotate", "translate_x", "translate_y", "shear_x", "shear_y"}
)


def _rand_augment_apply(img: ImageBuffer, op: str, magnitude: int, sign: int) -> ImageBuffer:
    """Apply one table op at the linear magnitude mapping (m in 0..10).

    Mappings: enhance factor 1 + s*0.9*m/10; posterize keeps 8 - round(4m/10)
    bits; solarize threshold 256 - round(256m/10); rotate s*3m degrees;
    translate s*0.03m of the axis extent; shear s*0.03m.
    """
    m = magnitude / 10.0
    if op == "identity":
        return img
    if op == "brightness":
        return adjust_brightness(img, 1.0 + sign * 0.9 * m)
    if op == "contrast":
        return adjust_contrast(img, 1.0 + sign * 0.9 * m)
    if op == "saturation":
        return adjust_saturation(img, 1.0 + sign * 0.9 * m)
    if op == "posterize":
        return posterize(img, 8 - int(round_half_away(4.0 * m)))
    if op == "solarize":
        return solarize(img, 256 - int(round_half_away(256.0 * m)))
    if op == "equalize":
        return equalize(img)
    if op == "rotate":
        return rotate(img, sign * 30.0 * m)
    if op == "translate_x":
        return translate(img, sign * 0.3 * m * img.width, 0.0)
    if op == "translate_y":
        return translate(img, 0.0, sign * 0.3 * m * img.height)
    if op == "shear_x":
        return shear(img, sign * 0.3 * m, 0.0)
    if op == "shear_y":
        return shear(img, 0.0, sign * 0.3 * m)
    raise ValueError(f"unknown rand-augment op {op!r}")


def rand_augment(img: ImageBuffer, n_ops: int, magnitude: int, rng: RngStream) -> ImageBuffer:
    """Apply ``n_ops`` uniformly chosen table ops at the shared magnitude.

    Per op: one draw selects the operator (with replacement); signed ops
    (enhance and geometric families) then draw one direction bit. Identity,
    posterize, solarize, and equalize consume no extra draws.
    """
    if n_ops < 1:
        raise ValueError("n_ops must be >= 1")
    if not 0 <= magnitude <= 10:
        raise ValueError("magnitude must be in [0, 10]")
    for _ in range(n_ops):
        op = RAND_AUGMENT_OPS[rng.next_below(len(RAND_AUGMENT_OPS))]
        sign = 1
        if op in _SIGNED_OPS:
            sign = 1 if rng.next_below(2) == 0 else -1
        img = _rand_augment_apply(img, op, magnitude, sign)
    return img


def apply_pipeline(img: ImageBuffer, pipeline: AugmentPipeline, sample_id: str) -> ImageBuffer:
    """Run the pipeline's operators in order.

    Operator i receives a fresh stream seeded by
    ``derive_sample_seed(global_seed, sample_id, i)``, so the same
    (seed, sample) pair always reproduces the same bytes, and multi-frame
    samples augmented frame-by-frame get identical parameters per frame.
    """
    for i, op in enumerate(pipeline.ops):
        rng = RngStream(derive_sample_seed(pipeline.global_seed, sample_id, i))
        if isinstance(op, ColorJitterSpec):
            img = color_jitter(img, op, rng)
        elif isinstance(op, LightingSpec):
            img = pca_lighting(img, op, rng)
        elif isinstance(op, RandomErasingSpec):
            img = random_erasing(img, op, rng)
        elif isinstance(op, RandAugmentSpec):
            img = rand_augment(img, op.n_ops, op.magnitude, rng)
        else:  # pragma: no cover - AugmentPipeline validates on construction
            raise ValueError(f"unknown operator spec {type(op).__name__}")
    return img


# --- configuration and PCA fitting -------------------------------------------


def _op_from_config(node: dict, where: str) -> OperatorSpec:
    if not isinstance(node, dict) or "kind" not in node:
        raise ValueError(f"{where}: each op needs a 'kind' key")
    kind = node["kind"]
    args = {k: v for k, v in node.items() if k != "kind"}
    try:
        if kind == "color_jitter":
            return ColorJitterSpec(**args)
        if kind == "lighting":
            if "eigenvalues" in args:
                args["eigenvalues"] = tuple(args["eigenvalues"])
            if "eigenvectors" in args:
                args["eigenvectors"] = tuple(tuple(row) for row in args["eigenvectors"])
            return LightingSpec(**args)
        if kind == "random_erasing":
            if "area" in args:
                args["area_range"] = tuple(args.pop("area"))
            if "aspect" in args:
                args["aspect_range"] = tuple(args.pop("aspect"))
            fill = args.pop("fill", None)
            if fill is not None:
                if fill == "random":
                    args["fill_mode"] = "random"
                elif isinstance(fill, int):
                    args["fill_mode"] = "constant"
                    args["fill_value"] = fill
                elif isinstance(fill, dict) and "constant" in fill:
                    args["fill_mode"] = "constant"
                    args["fill_value"] = int(fill["constant"])
                else:
                    raise ValueError(f"bad fill {fill!r}")
            return RandomErasingSpec(**args)
        if kind == "rand_augment":
            return RandAugmentSpec(**args)
    except TypeError as exc:
        raise ValueError(f"{where}: bad parameters for {kind!r}: {exc}") from None
    raise ValueError(f"{where}: unknown op kind {kind!r}")


def load_pipeline_config(path: str | Path, seed_override: int | None = None) -> AugmentPipeline:
    """Load a pipeline from a YAML config file.

    Schema::

        seed: 1234            # optional, overridden by --seed on the CLI
        ops:
          - kind: color_jitter
            brightness: 0.4
            contrast: 0.4
            saturation: 0.4
          - kind: lighting
            alpha_std: 0.1
          - kind: random_erasing
            probability: 0.5
            area: [0.02, 0.33]
            aspect: [0.3, 3.3]
            fill: random      # or a constant 0..255
          - kind: rand_augment
            n_ops: 2
            magnitude: 9
    """
    path = Path(path)
    # read errors propagate as OSError: the CLI maps them to its I/O exit code
    raw = path.read_text(encoding="utf-8")
    try:
        doc = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ValueError(f"{path}: invalid YAML: {exc}") from exc
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: top level must be a mapping")
    ops_node = doc.get("ops", [])
    if not isinstance(ops_node, list):
        raise ValueError(f"{path}: 'ops' must be a list")
    ops = tuple(_op_from_config(op, f"{path}: ops[{i}]") for i, op in enumerate(ops_node))
    seed = seed_override if seed_override is not None else int(doc.get("seed", 0))
    return AugmentPipeline(ops=ops, global_seed=seed)


def fit_pca(images: Iterable[ImageBuffer], alpha_std: float = 0.1) -> LightingSpec:
    """Fit the lighting eigenbasis to a corpus: eigendecomposition of the
    population covariance of RGB values scaled to [0, 1].

    Eigenvalues are sorted descending; each eigenvector column's sign is
    fixed so its largest-magnitude component is positive.
    """
    count = 0
    total = np.zeros(3, dtype=np.float64)
    outer = np.zeros((3, 3), dtype=np.float64)
    for img in images:
        pixels = img.data.reshape(-1, 3).astype(np.float64) / 255.0
        count += pixels.shape[0]
        total += pixels.sum(axis=0)
        outer += pixels.T @ pixels
    if count == 0:
        raise ValueError("fit_pca needs at least one image")
    mean = total / count
    cov = outer / count - np.outer(mean, mean)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.clip(eigvals[order], 0.0, None)
    eigvecs = eigvecs[:, order]
    for j in range(3):
        k = int(np.argmax(np.abs(eigvecs[:, j])))
        if eigvecs[k, j] < 0:
            eigvecs[:, j] = -eigvecs[:, j]
    return LightingSpec(
        alpha_std=alpha_std,
        eigenvalues=tuple(float(v) for v in eigvals),
        eigenvectors=tuple(tuple(float(v) for v in row) for row in eigvecs),
    )
