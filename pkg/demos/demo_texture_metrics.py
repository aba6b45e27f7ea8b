"""Texture-quality metrics over a synthetic texture set.

Degrades textures by JPEG recompression and sub-sampling at the usual
strength ladders, then compares RMSE, single-scale and multi-scale
structural similarity side by side.
"""

import numpy as np
from scipy.ndimage import gaussian_filter

from texmeshqa import TextureImage, jpeg_recompress, subsample_texture, texture_quality


def make_texture(seed, size=256):
    rng = np.random.default_rng(seed)
    y, x = np.mgrid[0:size, 0:size] / size
    base = 0.4 + 0.3 * np.sin(12 * x) * np.cos(8 * y)
    detail = gaussian_filter(rng.uniform(-0.25, 0.25, (size, size)), 1.5)
    values = np.clip(base + detail, 0, 1)
    return TextureImage((values * 255).astype(np.uint8)[:, :, None])


def main():
    references = (make_texture(1), make_texture(2, size=128))
    print("texture set: 256x256 and 128x128 (aggregates weight by texel count)\n")

    print("JPEG recompression:")
    print(f"{'quality':>8} {'rmse':>8} {'ssim':>8} {'ms_ssim':>8}")
    for quality in (90, 50, 20, 8, 2):
        distorted = tuple(jpeg_recompress(t, quality) for t in references)
        row = [
            texture_quality(distorted, references, metric).aggregate
            for metric in ("rmse", "ssim", "ms_ssim")
        ]
        print(f"{quality:>8} {row[0]:>8.4f} {row[1]:>8.4f} {row[2]:>8.4f}")

    print("\nsub-sampling (bilinear down, restored to reference size for comparison):")
    print(f"{'percent':>8} {'rmse':>8} {'ssim':>8} {'ms_ssim':>8}")
    for percent in (50, 25, 10, 5, 3):
        distorted = tuple(subsample_texture(t, percent) for t in references)
        row = [
            texture_quality(distorted, references, metric).aggregate
            for metric in ("rmse", "ssim", "ms_ssim")
        ]
        print(f"{percent:>8} {row[0]:>8.4f} {row[1]:>8.4f} {row[2]:>8.4f}")


if __name__ == "__main__":
    main()
