"""One-class boundary modeling with automatic Gaussian-bandwidth selection."""

__version__ = "0.1.0"

from .datasets import (
    Dataset,
    SampleSchedule,
    SweepGrid,
    draw_sample,
    gen_banana,
    gen_star,
    gen_three_clusters,
    inside_banana,
    inside_star,
    inside_three_clusters,
    load_csv,
    write_csv,
    zscore,
)
from .evaluation import (
    ConfusionCounts,
    F1Score,
    confusion,
    default_bounds,
    f1,
    f1_sweep,
    grid_score_2d,
    nsv_curve,
)
from .kernels import KernelMatrix, gaussian_kernel, kernel_matrix
from .sampling import SamplingRun, SamplingTrainConfig, sample_train
from .selection import (
    DEFAULT_GRID_2D,
    DEFAULT_GRID_LARGE,
    ConvergenceParams,
    RandomizedSweepConfig,
    SelectionTrace,
    cv_objective,
    cv_select,
    dfn_objective,
    dfn_select,
    full_peak,
    randomized_sweep,
    sampling_peak,
)
from .smoothing import (
    Curve,
    SplineFit,
    eval_spline,
    first_difference,
    first_local_max,
    first_zero_crossing_of_band,
    fit_pspline,
    second_difference,
)
from .svdd import (
    ConvergenceError,
    ScoreResult,
    SvddConfig,
    SvddModel,
    TrainCurve,
    load_model,
    save_model,
    score,
    score_points,
    solve_dual,
    train_curve,
)

__all__ = [
    "__version__",
    "Dataset", "SampleSchedule", "SweepGrid", "draw_sample",
    "gen_banana", "gen_star", "gen_three_clusters",
    "inside_banana", "inside_star", "inside_three_clusters",
    "load_csv", "write_csv", "zscore",
    "KernelMatrix", "gaussian_kernel", "kernel_matrix",
    "ConvergenceError", "ScoreResult", "SvddConfig", "SvddModel", "TrainCurve",
    "load_model", "save_model", "score", "score_points", "solve_dual", "train_curve",
    "SamplingRun", "SamplingTrainConfig", "sample_train",
    "Curve", "SplineFit", "eval_spline", "first_difference", "second_difference",
    "fit_pspline", "first_local_max", "first_zero_crossing_of_band",
    "ConvergenceParams", "RandomizedSweepConfig", "SelectionTrace",
    "DEFAULT_GRID_2D", "DEFAULT_GRID_LARGE",
    "full_peak", "sampling_peak", "cv_objective", "cv_select",
    "dfn_objective", "dfn_select", "randomized_sweep",
    "ConfusionCounts", "F1Score", "confusion", "f1", "f1_sweep",
    "grid_score_2d", "default_bounds", "nsv_curve",
]
