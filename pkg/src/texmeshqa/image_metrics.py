"""Full-reference image quality metrics over texture images.

All metrics operate on luminance in [0, 1]. The structural similarity
family uses the standard published parameters: 11x11 Gaussian window with
sigma 1.5, stabilizers K1=0.01 and K2=0.03 at dynamic range 1, and the
five-scale exponents (0.0448, 0.2856, 0.3001, 0.2363, 0.1333) with
contrast/structure pooled at every scale and luminance only at the
coarsest. Local statistics are computed over fully interior windows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .distortions import resample_back
from .mesh import TextureImage

WINDOW_SIZE = 11
WINDOW_SIGMA = 1.5
K1 = 0.01
K2 = 0.03
MS_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)

REC601 = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class LuminanceImage:
    """Row-major floating luminance in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 2 or vals.shape[0] < 1 or vals.shape[1] < 1:
            raise ValueError(f"luminance image must be 2-D, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)) or vals.min() < 0.0 or vals.max() > 1.0:
            raise ValueError("luminance values must be finite in [0, 1]")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


def to_luminance(img: TextureImage) -> LuminanceImage:
    """RGB -> Rec.601 luminance scaled to [0, 1]; grayscale passes through."""
    px = img.pixels.astype(np.float64) / 255.0
    if img.channels == 1:
        return LuminanceImage(px[:, :, 0])
    r, g, b = REC601
    # normalize by the accumulated weight sum so a constant image maps to
    # exactly its own value despite the weights' floating representation
    lum = (px[:, :, 0] * r + px[:, :, 1] * g + px[:, :, 2] * b) / (r + g + b)
    return LuminanceImage(np.clip(lum, 0.0, 1.0))


def image_rmse(a: LuminanceImage, b: LuminanceImage) -> float:
    """Root mean square pixel difference; requires equal dimensions."""
    _check_dims(a, b)
    return float(np.sqrt(np.mean((a.values - b.values) ** 2)))


def _check_dims(a: LuminanceImage, b: LuminanceImage) -> None:
    if (a.height, a.width) != (b.height, b.width):
        raise ValueError(
            f"image dimensions differ: {a.height}x{a.width} vs {b.height}x{b.width}"
        )


def _gaussian_kernel_1d(size: int = WINDOW_SIZE, sigma: float = WINDOW_SIGMA) -> np.ndarray:
    half = (size - 1) / 2.0
    x = np.arange(size) - half
    k = np.exp(-(x**2) / (2.0 * sigma**2))
    return k / k.sum()


def _windowed_mean(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Gaussian-weighted local mean over fully interior windows."""
    half = len(kernel) // 2
    out = correlate1d(img, kernel, axis=0, mode="constant")
    out = correlate1d(out, kernel, axis=1, mode="constant")
    return out[half:-half, half:-half]


def _ssim_maps(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-window luminance and contrast/structure similarity maps."""
    c1 = K1 * K1
    c2 = K2 * K2
    kernel = _gaussian_kernel_1d()

    mu_a = _windowed_mean(a, kernel)
    mu_b = _windowed_mean(b, kernel)
    var_a = _windowed_mean(a * a, kernel) - mu_a**2
    var_b = _windowed_mean(b * b, kernel) - mu_b**2
    cov = _windowed_mean(a * b, kernel) - mu_a * mu_b

    lum = (2.0 * mu_a * mu_b + c1) / (mu_a**2 + mu_b**2 + c1)
    cs = (2.0 * cov + c2) / (var_a + var_b + c2)
    return lum, cs


def ssim(a: LuminanceImage, b: LuminanceImage) -> float:
    """Mean structural similarity; 1 for identical images."""
    _check_dims(a, b)
    if a.height < WINDOW_SIZE or a.width < WINDOW_SIZE:
        raise ValueError(
            f"images must be at least {WINDOW_SIZE}x{WINDOW_SIZE} for the local window"
        )
    lum, cs = _ssim_maps(a.values, b.values)
    return float(np.mean(lum * cs))


def _downsample2(img: np.ndarray) -> np.ndarray:
    """2x2 box average then stride 2; trailing odd row/column dropped."""
    h, w = img.shape
    h2, w2 = h // 2, w // 2
    trimmed = img[: 2 * h2, : 2 * w2]
    return trimmed.reshape(h2, 2, w2, 2).mean(axis=(1, 3))


def ms_ssim_scale_count(height: int, width: int, max_scales: int = len(MS_WEIGHTS)) -> int:
    """How many dyadic scales keep the image at least one window wide."""
    scales = 1
    side = min(height, width)
    while scales < max_scales and side // 2 >= WINDOW_SIZE:
        side //= 2
        scales += 1
    return scales


def ms_ssim(a: LuminanceImage, b: LuminanceImage, scales: int | None = None) -> float:
    """Multi-scale structural similarity in [0, 1].

    When the image is too small for the full five scales the scale count
    shrinks and the exponents are renormalized to sum to one.
    """
    _check_dims(a, b)
    if a.height < WINDOW_SIZE or a.width < WINDOW_SIZE:
        raise ValueError(
            f"images must be at least {WINDOW_SIZE}x{WINDOW_SIZE} for the local window"
        )
    available = ms_ssim_scale_count(a.height, a.width)
    if scales is None:
        scales = available
    elif not 1 <= scales <= available:
        raise ValueError(f"scale count must be in [1, {available}], got {scales}")

    weights = np.array(MS_WEIGHTS[:scales])
    weights /= weights.sum()

    xa, xb = a.values, b.values
    cs_means = []
    lum_mean = None
    for level in range(scales):
        lum, cs = _ssim_maps(xa, xb)
        cs_means.append(max(np.mean(cs), 0.0))
        if level == scales - 1:
            lum_mean = max(np.mean(lum), 0.0)
        else:
            xa = _downsample2(xa)
            xb = _downsample2(xb)

    value = lum_mean ** weights[-1]
    for mean_cs, w in zip(cs_means, weights):
        value *= mean_cs**w
    return float(min(value, 1.0))


TEXTURE_METRICS = ("rmse", "ssim", "ms_ssim")


@dataclass(frozen=True)
class TextureQuality:
    """Per-texture metric values and their texel-count-weighted mean."""

    metric: str
    per_texture: tuple[tuple[int, float], ...]
    aggregate: float


def texture_quality(
    distorted: tuple[TextureImage, ...],
    reference: tuple[TextureImage, ...],
    metric: str = "ms_ssim",
) -> TextureQuality:
    """Evaluate an image metric texture-by-texture and aggregate.

    Distorted textures are bilinearly restored to the reference
    resolution first, so sub-sampled textures compare at reference scale.
    The aggregate weights each texture by its reference texel count.
    """
    if metric not in TEXTURE_METRICS:
        raise ValueError(f"metric must be one of {TEXTURE_METRICS}, got {metric!r}")
    distorted = tuple(distorted)
    reference = tuple(reference)
    if len(distorted) != len(reference):
        raise ValueError(
            f"texture counts differ: {len(distorted)} vs {len(reference)}"
        )
    if not reference:
        raise ValueError("texture sets are empty")

    fn = {"rmse": image_rmse, "ssim": ssim, "ms_ssim": ms_ssim}[metric]
    values = []
    weights = []
    for i, (d, r) in enumerate(zip(distorted, reference)):
        d = resample_back(d, r.width, r.height)
        values.append((i, float(fn(to_luminance(d), to_luminance(r)))))
        weights.append(r.texel_count)
    total = float(sum(weights))
    aggregate = sum(v * w for (_, v), w in zip(values, weights)) / total
    return TextureQuality(metric=metric, per_texture=tuple(values), aggregate=aggregate)
