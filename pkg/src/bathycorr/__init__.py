"""Refraction correction for through-water photogrammetric point clouds.

Image-based bathymetry systematically underestimates depth because rays bend
at the air-water interface. This package pairs an apparent-depth cloud with
a reference cloud, trains a linear epsilon-insensitive support vector
regressor mapping apparent to true depth, applies it to full clouds, and
ships the evaluation tooling (M3C2 distances, R², cross-sections) plus a
Snell's-law scene simulator used as ground truth in the test suite.

Numeric hot paths run through numba-compiled kernels by default; set
``BATHYCORR_NUMBA=0`` to force the pure-numpy fallback (same results, same
API — see ``benchmarks/bench_kernels.py`` for the speed difference).
"""

from .backend import USE_NUMBA, backend_name
from .errors import BathycorrError, ConfigError, InputError, NumericalError
from .evaluation import (
    ComparisonReport,
    DistanceStats,
    M3c2Params,
    SectionProfile,
    distance_stats,
    extract_section,
    fitting_score,
    m3c2_distance,
)
from .pairing import (
    SampleSet,
    filter_samples,
    merge_sets,
    read_samples,
    reduce_to_reference,
    split_samples,
    write_samples,
)
from .pointcloud import PointCloud, SpatialIndex, build_index, read_cloud, write_cloud
from .simulate import (
    GridSeabed,
    PlaneSeabed,
    SimResult,
    SimScene,
    SinusoidSeabed,
    SlopeSeabed,
    add_noise,
    apparent_point,
    camera_grid,
    refract_ray,
    simulate_scene,
)
from .svr import (
    SvrHyperparams,
    SvrModel,
    TrainingSummary,
    correct_cloud,
    fit_least_squares,
    fit_svr,
    load_model,
    predict,
    primal_objective,
    save_model,
)

__version__ = "0.1.0"

__all__ = [
    "USE_NUMBA",
    "backend_name",
    "BathycorrError",
    "ConfigError",
    "InputError",
    "NumericalError",
    "PointCloud",
    "SpatialIndex",
    "build_index",
    "read_cloud",
    "write_cloud",
    "SampleSet",
    "reduce_to_reference",
    "filter_samples",
    "split_samples",
    "merge_sets",
    "read_samples",
    "write_samples",
    "SvrHyperparams",
    "SvrModel",
    "TrainingSummary",
    "fit_svr",
    "fit_least_squares",
    "predict",
    "correct_cloud",
    "save_model",
    "load_model",
    "primal_objective",
    "SimScene",
    "SimResult",
    "PlaneSeabed",
    "SlopeSeabed",
    "SinusoidSeabed",
    "GridSeabed",
    "camera_grid",
    "refract_ray",
    "apparent_point",
    "simulate_scene",
    "add_noise",
    "M3c2Params",
    "DistanceStats",
    "ComparisonReport",
    "SectionProfile",
    "m3c2_distance",
    "distance_stats",
    "fitting_score",
    "extract_section",
    "__version__",
]
