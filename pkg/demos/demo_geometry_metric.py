"""Walkthrough of the curvature-based geometry metric.

Builds a bumpy test surface, applies the geometric distortion families at
several strengths, and shows how the multi-scale curvature-deviation
distance separates them while plain geometric RMSE conflates
perceptually different changes of the same magnitude.
"""

import numpy as np

from texmeshqa import geometry_rmse, laplacian_smooth, mean_curvature, quantize, sdcd
from texmeshqa.sdcd import SdcdConfig
from texmeshqa.shapes import bumpy_sphere


def main():
    reference = bumpy_sphere(subdivisions=4)
    print(f"reference surface: {reference.vertex_count} vertices, "
          f"{reference.triangle_count} triangles")

    curv = mean_curvature(reference)
    print(f"mean curvature: mean {curv.values.mean():.2f}, "
          f"p5 {np.percentile(curv.values, 5):.2f}, p95 {np.percentile(curv.values, 95):.2f}")

    config = SdcdConfig.from_reference(reference)
    print(f"neighborhood radii: {', '.join(f'{r:.4f}' for r in config.scales.radii)} "
          f"(base scale {config.scales.epsilon:.4f})\n")

    print("coordinate quantization — cell size doubles per removed bit:")
    print(f"{'bits':>5} {'distance':>10} {'similarity':>11} {'geom rmse':>10}")
    for bits in (11, 10, 9, 8, 7):
        distorted = quantize(reference, bits)
        result = sdcd(distorted, reference, config, reference_curvature=curv)
        rmse = geometry_rmse(distorted, reference)
        print(f"{bits:>5} {result.distance:>10.4f} {result.similarity:>11.4f} {rmse:>10.6f}")

    print("\nsmoothing — low-frequency shape loss, perceptually milder:")
    print(f"{'iters':>5} {'distance':>10} {'similarity':>11} {'geom rmse':>10}")
    for iterations in (1, 5, 15, 40):
        distorted = laplacian_smooth(reference, iterations)
        result = sdcd(distorted, reference, config, reference_curvature=curv)
        rmse = geometry_rmse(distorted, reference)
        print(f"{iterations:>5} {result.distance:>10.4f} {result.similarity:>11.4f} {rmse:>10.6f}")

    print("\nHeavy smoothing piles up ten times the RMSE of 7-bit quantization "
          "yet scores a smaller curvature-deviation distance: once the surface "
          "is uniformly flattened the curvature differences stop VARYING "
          "across neighborhoods. The metric reads global, low-frequency shape "
          "change as mild and local high-frequency damage as severe, which is "
          "the ordering human observers report.")


if __name__ == "__main__":
    main()
