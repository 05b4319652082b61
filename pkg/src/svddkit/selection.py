"""Bandwidth selection: peak criteria, kernel-statistic criteria, sweeps.

Two families live here. The peak methods locate the first extremum of the
training objective's difference curves (full-data or sampling-based, with
an increasing-sample-size convergence rule). The kernel-statistic methods
pick the bandwidth maximizing a closed-form function of the kernel matrix
(coefficient of variation, or the farthest/nearest-neighbor gap), which
needs no training at all; the randomized sweep maps how those answers
distribute across repeated subsampling.
"""

from __future__ import annotations

import csv
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .datasets import Dataset, SampleSchedule, SweepGrid
from .kernels import pairwise_sq_dists
from .sampling import SamplingTrainConfig, sample_train
from .smoothing import (
    Curve,
    NoLocalMaxError,
    NoZeroCrossingError,
    SplineFit,
    first_difference,
    first_local_max,
    first_zero_crossing_of_band,
    fit_pspline,
    second_difference,
)
from .svdd import TrainCurve, train_curve

__all__ = [
    "ConvergenceParams",
    "TraceEntry",
    "SelectionTrace",
    "RandomizedSweepConfig",
    "SweepSizeStats",
    "SweepResult",
    "FullPeakResult",
    "SelectorResult",
    "SelectionError",
    "full_peak",
    "sampling_peak",
    "cv_objective",
    "cv_select",
    "dfn_objective",
    "dfn_select",
    "randomized_sweep",
    "DEFAULT_GRID_2D",
    "DEFAULT_GRID_LARGE",
    "write_trace_csv",
    "write_sweep_csv",
    "write_sweep_values_csv",
    "write_objective_csv",
]

# step sizes that resolve the reference 2-D shapes vs. larger tabular data
DEFAULT_GRID_2D = SweepGrid(s_min=0.05, s_max=10.0, delta_s=0.05)
DEFAULT_GRID_LARGE = SweepGrid(s_min=0.5, s_max=60.0, delta_s=0.5)

_CV_EPS = 1e-6


class SelectionError(RuntimeError):
    """A selection run failed; the message says at which stage and inputs."""


@dataclass(frozen=True)
class ConvergenceParams:
    """Stop once s_opt moves by <= eps_s relative for u consecutive sizes."""

    eps_s: float = 0.05
    u: int = 3

    def __post_init__(self):
        if not (self.eps_s > 0 and np.isfinite(self.eps_s)):
            raise ValueError(f"eps_s must be > 0, got {self.eps_s}")
        if self.u < 1:
            raise ValueError(f"u must be >= 1, got {self.u}")


@dataclass(frozen=True)
class TraceEntry:
    """One schedule size's answer; s_opt is None when the smoothed first
    difference at that size had no interior local maximum (small samples
    can produce curves too noisy or too flat to vote)."""

    sample_size: int
    s_opt: float | None
    seconds: float


@dataclass(frozen=True)
class SelectionTrace:
    entries: tuple[TraceEntry, ...]
    converged: bool
    converged_at: int | None
    final_s: float


@dataclass(frozen=True)
class FullPeakResult:
    """Both peak readings plus every intermediate curve, for diagnostics.

    s_opt is the band-zero-crossing answer on the smoothed second
    difference; s_opt_first_diff is the first-local-maximum answer on the
    smoothed first difference. Either may be None when its method found
    nothing on the grid (the matching *_error field says why).
    """

    curve: TrainCurve
    oof_curve: Curve
    diff1: Curve
    diff2: Curve
    fit1: SplineFit
    fit2: SplineFit
    s_opt: float | None
    s_opt_first_diff: float | None
    band_error: str | None
    first_diff_error: str | None


@dataclass(frozen=True)
class SelectorResult:
    """Grid argmax of a kernel-statistic objective, with the whole curve."""

    s_opt: float
    curve: Curve


@dataclass(frozen=True)
class RandomizedSweepConfig:
    repeats: int  # draws per sample size
    schedule: SampleSchedule
    method: str  # "cv" or "dfn"
    s_grid: SweepGrid
    seed: int
    with_replacement: bool = True

    def __post_init__(self):
        if self.repeats < 1:
            raise ValueError(f"repeats must be >= 1, got {self.repeats}")
        if self.method not in ("cv", "dfn"):
            raise ValueError(f"method must be 'cv' or 'dfn', got {self.method!r}")


@dataclass(frozen=True)
class SweepSizeStats:
    sample_size: int
    mean: float
    variance: float
    values: tuple[float, ...]
    seconds: float


@dataclass(frozen=True)
class SweepResult:
    method: str
    stats: tuple[SweepSizeStats, ...]


def _cell_seed(seed: int, *indices: int) -> int:
    """Independent per-cell seed for a work matrix, stable across runs."""
    parts = [seed & 0xFFFFFFFFFFFFFFFF, *indices]
    return int(np.random.SeedSequence(parts).generate_state(1)[0])


# --- peak criteria -----------------------------------------------------------

def full_peak(
    data,
    grid: SweepGrid,
    f: float,
    *,
    knots: int = 100,
    degree: int = 3,
    penalty_order: int = 2,
    lam: float | str = "auto",
    kkt_tol: float = 1e-6,
    max_passes: int | None = None,
    threads: int = 1,
) -> FullPeakResult:
    """Peak criterion on the full-data objective curve.

    Trains once per grid bandwidth, then reads the curve two ways: the
    first grid point where the 95% band of the smoothed second difference
    contains zero (the principal answer), and the first local maximum of
    the smoothed first difference (reported side by side). Raises
    SelectionError only when both readings fail.
    """
    if len(grid.values()) < 6:
        raise ValueError("peak criterion needs a grid of at least 6 points")
    curve = train_curve(
        data, grid, f, kkt_tol=kkt_tol, max_passes=max_passes, threads=threads
    )
    oof_curve = Curve(xs=curve.s_values, ys=curve.oof)
    diff1 = first_difference(oof_curve)
    diff2 = second_difference(oof_curve)
    fit1 = fit_pspline(diff1, knots=knots, degree=degree, penalty_order=penalty_order, lam=lam)
    fit2 = fit_pspline(diff2, knots=knots, degree=degree, penalty_order=penalty_order, lam=lam)

    s_band, band_error = None, None
    try:
        s_band = first_zero_crossing_of_band(fit2, diff2.xs)
    except NoZeroCrossingError as err:
        band_error = str(err)
    s_first, first_error = None, None
    try:
        s_first = first_local_max(fit1, diff1.xs)
    except NoLocalMaxError as err:
        first_error = str(err)
    if s_band is None and s_first is None:
        raise SelectionError(
            f"no peak found on grid [{grid.s_min:g}, {grid.s_max:g}]: "
            f"{band_error}; {first_error}"
        )
    return FullPeakResult(
        curve=curve,
        oof_curve=oof_curve,
        diff1=diff1,
        diff2=diff2,
        fit1=fit1,
        fit2=fit2,
        s_opt=s_band,
        s_opt_first_diff=s_first,
        band_error=band_error,
        first_diff_error=first_error,
    )


def sampling_peak(
    data,
    schedule: SampleSchedule,
    grid: SweepGrid,
    f: float,
    conv: ConvergenceParams = ConvergenceParams(),
    *,
    knots: int = 100,
    degree: int = 3,
    penalty_order: int = 2,
    lam: float | str = "auto",
    sample_max_iters: int = 200,
    sample_stall_iters: int = 5,
    sample_r2_rel_tol: float = 0.01,
    kkt_tol: float = 1e-6,
    threads: int = 1,
) -> SelectionTrace:
    """Peak criterion on sampling-trained objective curves of growing size.

    For each schedule size: one sampling training per grid bandwidth (each
    cell gets its own seed stream derived from schedule.seed), then the
    first local maximum of the smoothed first difference gives s_opt for
    that size. Stops early once s_opt is stable per the convergence rule.

    A size whose smoothed curve has no interior local maximum casts no
    vote: its entry is recorded with s_opt=None and the consecutive-
    stability streak resets. Tiny samples routinely produce such curves
    (independent per-cell draws leave more sampling noise than s signal),
    and the convergence rule is the instrument that waits them out.
    Solver and fitting failures still abort, tagged with the size.
    """
    s_values = grid.values()
    entries: list[TraceEntry] = []
    converged = False
    converged_at = None
    streak = 0
    prev_s: float | None = None
    for a, n_i in enumerate(schedule.sizes()):
        t0 = time.perf_counter()

        def one(b: int) -> float:
            cfg = SamplingTrainConfig(
                sample_size=n_i,
                max_iters=sample_max_iters,
                stall_iters=sample_stall_iters,
                r2_rel_tol=sample_r2_rel_tol,
                seed=_cell_seed(schedule.seed, a, b),
            )
            return sample_train(data, float(s_values[b]), f, cfg, kkt_tol=kkt_tol).model.oof

        try:
            if threads > 1:
                with ThreadPoolExecutor(max_workers=threads) as pool:
                    oofs = list(pool.map(one, range(len(s_values))))
            else:
                oofs = [one(b) for b in range(len(s_values))]
            diff1 = first_difference(Curve(xs=s_values, ys=np.asarray(oofs)))
            fit = fit_pspline(
                diff1, knots=knots, degree=degree, penalty_order=penalty_order, lam=lam
            )
        except (RuntimeError, ValueError) as err:
            raise SelectionError(f"sampling peak failed at sample size {n_i}: {err}") from err

        try:
            s_opt_i = first_local_max(fit, diff1.xs)
        except NoLocalMaxError:
            s_opt_i = None

        entries.append(
            TraceEntry(sample_size=n_i, s_opt=s_opt_i, seconds=time.perf_counter() - t0)
        )
        if s_opt_i is None:
            streak = 0
            prev_s = None
            continue
        if prev_s is not None:
            if abs(s_opt_i - prev_s) <= conv.eps_s * abs(prev_s):
                streak += 1
            else:
                streak = 0
            if streak >= conv.u:
                prev_s = s_opt_i
                converged = True
                converged_at = n_i
                break
        prev_s = s_opt_i
    if prev_s is None:
        voted = [e.s_opt for e in entries if e.s_opt is not None]
        if not voted:
            raise SelectionError(
                "sampling peak found no local maximum at any sample size; "
                "widen the bandwidth grid"
            )
        prev_s = voted[-1]
    return SelectionTrace(
        entries=tuple(entries),
        converged=converged,
        converged_at=converged_at,
        final_s=prev_s,
    )


# --- kernel-statistic criteria ----------------------------------------------

def _points(data) -> np.ndarray:
    if isinstance(data, Dataset):
        return data.points
    return Dataset(points=np.asarray(data, dtype=np.float64)).points


def _offdiag_sq_dists(pts: np.ndarray) -> np.ndarray:
    # one entry per unordered pair: mean and population variance over these
    # equal those over all n(n-1) ordered off-diagonal kernel entries
    iu = np.triu_indices(pts.shape[0], k=1)
    return pairwise_sq_dists(pts)[iu]

def _cv_value(off_d2: np.ndarray, s: float) -> float:
    k = np.exp(off_d2 / (-2.0 * s * s))
    mean = float(np.mean(k))
    var = float(np.mean((k - mean) ** 2))
    return var / (mean + _CV_EPS)


def cv_objective(data, s: float) -> float:
    """Variance over mean (plus a small floor) of off-diagonal kernel entries."""
    pts = _points(data)
    if pts.shape[0] < 2:
        raise ValueError("cv_objective needs at least 2 points")
    if not s > 0:
        raise ValueError(f"bandwidth must be > 0, got {s}")
    return _cv_value(_offdiag_sq_dists(pts), s)


def _dfn_value(d2: np.ndarray, s: float) -> float:
    k = np.exp(d2 / (-2.0 * s * s))
    np.fill_diagonal(k, -np.inf)
    farthest = k.max(axis=1)  # largest similarity to a *different* point
    np.fill_diagonal(k, 1.0)
    nearest = k.min(axis=1)
    n = d2.shape[0]
    return float(2.0 / n * (farthest.sum() - nearest.sum()))


def dfn_objective(data, s: float) -> float:
    """Mean gap between each point's largest and smallest kernel similarity.

    The minimum runs over all points including the point itself; the unit
    self-similarity can never attain it for distinct points, so this
    matches the j != i reading while keeping the formula verbatim.
    """
    pts = _points(data)
    if pts.shape[0] < 2:
        raise ValueError("dfn_objective needs at least 2 points")
    if not s > 0:
        raise ValueError(f"bandwidth must be > 0, got {s}")
    return _dfn_value(pairwise_sq_dists(pts), s)


def cv_select(data, grid: SweepGrid) -> SelectorResult:
    """Grid argmax of cv_objective; ties go to the smallest bandwidth."""
    pts = _points(data)
    if pts.shape[0] < 2:
        raise ValueError("cv_select needs at least 2 points")
    off_d2 = _offdiag_sq_dists(pts)
    s_values = grid.values()
    values = np.array([_cv_value(off_d2, s) for s in s_values])
    best = int(np.argmax(values))
    return SelectorResult(s_opt=float(s_values[best]), curve=Curve(xs=s_values, ys=values))


def dfn_select(data, grid: SweepGrid) -> SelectorResult:
    """Grid argmax of dfn_objective; ties go to the smallest bandwidth."""
    pts = _points(data)
    if pts.shape[0] < 2:
        raise ValueError("dfn_select needs at least 2 points")
    d2 = pairwise_sq_dists(pts)
    s_values = grid.values()
    values = np.array([_dfn_value(d2, s) for s in s_values])
    best = int(np.argmax(values))
    return SelectorResult(s_opt=float(s_values[best]), curve=Curve(xs=s_values, ys=values))


# --- randomized subsample sweep ----------------------------------------------

def randomized_sweep(data, cfg: RandomizedSweepConfig) -> SweepResult:
    """Distribution of the cv/dfn answer over repeated random subsamples.

    Each (size, repeat) cell draws its own subsample and selects s on it.
    A requested size at or above n uses the full dataset, so a one-cell
    sweep collapses to the plain full-data selector answer.
    """
    pts = _points(data)
    n = pts.shape[0]
    select = cv_select if cfg.method == "cv" else dfn_select
    if not cfg.with_replacement and cfg.schedule.n_max > n:
        raise ValueError("without replacement needs sample sizes <= n")
    stats: list[SweepSizeStats] = []
    for a, n_i in enumerate(cfg.schedule.sizes()):
        t0 = time.perf_counter()
        values = []
        for b in range(cfg.repeats):
            if n_i >= n:
                sub = pts
            else:
                rng = np.random.default_rng(_cell_seed(cfg.seed, a, b))
                if cfg.with_replacement:
                    idx = rng.integers(0, n, size=n_i)
                else:
                    idx = rng.choice(n, size=n_i, replace=False)
                sub = pts[idx]
            values.append(select(sub, cfg.s_grid).s_opt)
        arr = np.asarray(values)
        stats.append(
            SweepSizeStats(
                sample_size=n_i,
                mean=float(arr.mean()),
                variance=float(arr.var()),
                values=tuple(values),
                seconds=time.perf_counter() - t0,
            )
        )
    return SweepResult(method=cfg.method, stats=tuple(stats))


# --- CSV exports ---------------------------------------------------------------

def write_trace_csv(path, trace: SelectionTrace) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n_i", "s_opt", "seconds"])
        for e in trace.entries:
            s_txt = "nan" if e.s_opt is None else repr(e.s_opt)
            writer.writerow([e.sample_size, s_txt, repr(e.seconds)])


def write_sweep_csv(path, result: SweepResult) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n_i", "mean_s_opt", "var_s_opt", "seconds"])
        for st in result.stats:
            writer.writerow(
                [st.sample_size, repr(st.mean), repr(st.variance), repr(st.seconds)]
            )


def write_sweep_values_csv(path, result: SweepResult) -> None:
    """Long-format per-draw values: one row per (size, repeat)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n_i", "repeat", "s_opt"])
        for st in result.stats:
            for b, v in enumerate(st.values):
                writer.writerow([st.sample_size, b, repr(v)])


def write_objective_csv(path, curve: Curve) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["s", "value"])
        for x, y in zip(curve.xs, curve.ys):
            writer.writerow([repr(float(x)), repr(float(y))])
