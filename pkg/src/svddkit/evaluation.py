"""Classification scoring (precision/recall/F1), 2-D boundary grids, NSV curves."""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .datasets import Dataset, SweepGrid
from .smoothing import Curve
from .svdd import SvddConfig, SvddModel, score_points, solve_dual, train_curve

__all__ = [
    "ConfusionCounts",
    "F1Score",
    "F1SweepResult",
    "Grid2D",
    "confusion",
    "f1",
    "f1_sweep",
    "grid_score_2d",
    "default_bounds",
    "nsv_curve",
    "write_grid_csv",
    "write_grid_svg",
]


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be nonnegative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class F1Score:
    precision: float
    recall: float
    f1: float


def confusion(truth, predicted_inside) -> ConfusionCounts:
    """Count outcomes; truth True = target class, prediction True = inside.

    A target point predicted inside is a true positive; a non-target point
    predicted inside is a false positive.
    """
    t = np.asarray(truth, dtype=bool)
    p = np.asarray(predicted_inside, dtype=bool)
    if t.shape != p.shape or t.ndim != 1:
        raise ValueError(f"truth and prediction must be equal 1-D, got {t.shape} vs {p.shape}")
    if len(t) == 0:
        raise ValueError("cannot build a confusion matrix from zero points")
    return ConfusionCounts(
        tp=int(np.sum(t & p)),
        fp=int(np.sum(~t & p)),
        tn=int(np.sum(~t & ~p)),
        fn=int(np.sum(t & ~p)),
    )


def f1(counts: ConfusionCounts) -> F1Score:
    """Precision, recall, and their harmonic mean; degenerate cases are 0."""
    precision = counts.tp / (counts.tp + counts.fp) if counts.tp + counts.fp else 0.0
    recall = counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn else 0.0
    score = (
        2.0 * precision * recall / (precision + recall) if precision + recall else 0.0
    )
    return F1Score(precision=precision, recall=recall, f1=score)


@dataclass(frozen=True)
class F1SweepResult:
    curve: Curve  # s vs F1
    precision: np.ndarray
    recall: np.ndarray
    best_s: float
    best_f1: float


def f1_sweep(
    train: Dataset,
    score_set: Dataset,
    grid: SweepGrid,
    f: float,
    *,
    inside_is_target: bool = True,
    kkt_tol: float = 1e-6,
    threads: int = 1,
) -> F1SweepResult:
    """Train per grid bandwidth, score the labeled set, track F1.

    ``inside_is_target=False`` flips the orientation for problems where
    the modeled class is the anomaly.
    """
    if score_set.labels is None:
        raise ValueError("scoring dataset must carry labels")
    truth = score_set.labels
    if truth.all() or not truth.any():
        raise ValueError("scoring dataset must contain both classes")

    def one(s: float) -> F1Score:
        model = solve_dual(train, SvddConfig(s=float(s), f=f, kkt_tol=kkt_tol))
        _, outlier = score_points(model, score_set.points)
        predicted_target = ~outlier if inside_is_target else outlier
        return f1(confusion(truth, predicted_target))

    s_values = grid.values()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, s_values))
    else:
        results = [one(s) for s in s_values]
    f1_values = np.array([r.f1 for r in results])
    best = int(np.argmax(f1_values))  # ties: smallest s
    return F1SweepResult(
        curve=Curve(xs=np.asarray(s_values), ys=f1_values),
        precision=np.array([r.precision for r in results]),
        recall=np.array([r.recall for r in results]),
        best_s=float(s_values[best]),
        best_f1=float(f1_values[best]),
    )


@dataclass(frozen=True)
class Grid2D:
    """Inside/outside verdicts at cell centers; flags[iy, ix] pairs ys[iy], xs[ix]."""

    xs: np.ndarray
    ys: np.ndarray
    flags: np.ndarray

    @property
    def inside_count(self) -> int:
        return int(np.sum(self.flags))


def default_bounds(data: Dataset) -> tuple[float, float, float, float]:
    """Data bounding box expanded by 20% of its span on every side."""
    lo = data.points.min(axis=0)
    hi = data.points.max(axis=0)
    pad = 0.2 * (hi - lo)
    return (
        float(lo[0] - pad[0]),
        float(hi[0] + pad[0]),
        float(lo[1] - pad[1]),
        float(hi[1] + pad[1]),
    )


def grid_score_2d(
    model: SvddModel, bounds: tuple[float, float, float, float], resolution: int
) -> Grid2D:
    """Score a resolution x resolution lattice spanning the bounds."""
    if model.m != 2:
        raise ValueError(f"grid scoring needs a 2-D model, got {model.m} columns")
    if resolution < 2:
        raise ValueError(f"resolution must be >= 2, got {resolution}")
    xlo, xhi, ylo, yhi = bounds
    if not (xhi > xlo and yhi > ylo):
        raise ValueError(f"degenerate bounds {bounds}")
    xs = np.linspace(xlo, xhi, resolution)
    ys = np.linspace(ylo, yhi, resolution)
    gx, gy = np.meshgrid(xs, ys)
    cells = np.column_stack([gx.ravel(), gy.ravel()])
    _, outlier = score_points(model, cells)
    return Grid2D(xs=xs, ys=ys, flags=(~outlier).reshape(resolution, resolution))


def nsv_curve(
    data,
    grid: SweepGrid,
    f: float,
    *,
    kkt_tol: float = 1e-6,
    max_passes: int | None = None,
    threads: int = 1,
) -> Curve:
    """Support-vector count per grid bandwidth (one full training each)."""
    tc = train_curve(
        data, grid, f, kkt_tol=kkt_tol, max_passes=max_passes, threads=threads
    )
    return Curve(xs=tc.s_values, ys=tc.nsv.astype(np.float64))


def write_grid_csv(path, grid: Grid2D) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "inside"])
        for iy, y in enumerate(grid.ys):
            for ix, x in enumerate(grid.xs):
                writer.writerow([repr(float(x)), repr(float(y)), int(grid.flags[iy, ix])])


_SVG_OUTSIDE = "#e8edf4"
_SVG_INSIDE = "#2b6cb0"


def write_grid_svg(path, grid: Grid2D) -> None:
    """Two-color heatmap; one rect per run of inside cells, y axis up."""
    height = len(grid.ys)
    width = len(grid.xs)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width} {height}" '
        f'shape-rendering="crispEdges">',
        f'<rect width="{width}" height="{height}" fill="{_SVG_OUTSIDE}"/>',
    ]
    for iy in range(height):
        row = grid.flags[iy]
        svg_y = height - 1 - iy  # flip so larger y draws nearer the top
        ix = 0
        while ix < width:
            if row[ix]:
                start = ix
                while ix < width and row[ix]:
                    ix += 1
                parts.append(
                    f'<rect x="{start}" y="{svg_y}" width="{ix - start}" height="1" '
                    f'fill="{_SVG_INSIDE}"/>'
                )
            else:
                ix += 1
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts))
        fh.write("\n")
