"""Perceptual quality assessment of textured 3D meshes.

The toolkit covers the full pipeline: loading textured meshes, measuring
geometry fidelity through multi-scale curvature-difference statistics,
measuring texture fidelity through structural similarity, fusing the two
into a combined quality index, regenerating distortion corpora, running
live paired-comparison studies, and benchmarking metrics against
subjective scores.
"""

from .benchmark import (
    BenchmarkReport,
    LogisticFit,
    MetricSeries,
    evaluate_metric,
    logistic_fit,
    pearson,
    spearman,
)
from .correspondence import CorrespondenceMap, correspond, geometry_rmse
from .curvature import CurvatureField, mean_curvature
from .distortions import (
    DistortionSpec,
    apply_distortion,
    jpeg_recompress,
    laplacian_smooth,
    quantize,
    resample_back,
    subsample_texture,
)
from .fusion import AlphaFit, QualityPair, combine, fit_alpha, fit_alpha_leave_one_out
from .image_metrics import (
    LuminanceImage,
    TextureQuality,
    image_rmse,
    ms_ssim,
    ssim,
    texture_quality,
    to_luminance,
)
from .mesh import Aabb, TextureImage, TexturedMesh, bounding_box
from .obj_io import load_mesh, parse_obj, save_mesh, write_obj
from .scoring import (
    ConcordanceResult,
    PreferenceMatrix,
    SubjectiveScores,
    kendalls_w,
    preference_matrix,
    thurstone_case_v,
    vote_scores,
)
from .sdcd import ScaleSet, SdcdConfig, SdcdResult, local_delta, sdcd
from .sorting import SortSession, StudyDesign, grid_design, replay, simulate_sessions

__version__ = "0.1.0"
