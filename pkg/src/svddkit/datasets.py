"""Dataset container, CSV ingestion, and 2-D reference-shape generators.

The three generators (star, three clusters, banana) produce the fixed
geometries used by the experiment harness. Each generator is a pure
function of (n, seed) and has an exact membership oracle so generated
points can serve as ground truth when scoring boundaries.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Dataset",
    "SweepGrid",
    "SampleSchedule",
    "CsvFormatError",
    "load_csv",
    "write_csv",
    "gen_star",
    "gen_three_clusters",
    "gen_banana",
    "inside_star",
    "inside_three_clusters",
    "inside_banana",
    "draw_sample",
    "zscore",
]

TARGET = "target"
OTHER = "other"


class CsvFormatError(ValueError):
    """Raised when a CSV file cannot be parsed into a numeric dataset."""


@dataclass(frozen=True)
class Dataset:
    """An n x m matrix of real observations with optional binary labels.

    ``labels``, when present, holds one boolean per row: True for the
    target class, False for the other class. All arrays are read-only.
    """

    points: np.ndarray
    labels: np.ndarray | None = None
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=np.float64)
        if pts.ndim != 2:
            raise ValueError(f"points must be 2-D, got shape {pts.shape}")
        n, m = pts.shape
        if n < 1 or m < 1:
            raise ValueError(f"need n >= 1 and m >= 1, got {n} x {m}")
        if not np.all(np.isfinite(pts)):
            bad = np.argwhere(~np.isfinite(pts))[0]
            raise ValueError(f"non-finite entry at row {bad[0]}, column {bad[1]}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.labels is not None:
            lab = np.asarray(self.labels, dtype=bool)
            if lab.shape != (n,):
                raise ValueError(f"labels must have length {n}, got {lab.shape}")
            lab.setflags(write=False)
            object.__setattr__(self, "labels", lab)
        if self.names is not None:
            names = tuple(str(c) for c in self.names)
            if len(names) != m:
                raise ValueError(f"names must have length {m}, got {len(names)}")
            object.__setattr__(self, "names", names)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def m(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class SweepGrid:
    """Uniform bandwidth grid s_min, s_min + step, ..., <= s_max."""

    s_min: float
    s_max: float
    delta_s: float

    def __post_init__(self):
        if not (self.s_min > 0 and math.isfinite(self.s_min)):
            raise ValueError(f"s_min must be > 0, got {self.s_min}")
        if not self.s_max > self.s_min:
            raise ValueError(f"s_max must exceed s_min, got {self.s_max}")
        if not (self.delta_s > 0 and math.isfinite(self.delta_s)):
            raise ValueError(f"delta_s must be > 0, got {self.delta_s}")
        if len(self.values()) < 4:
            raise ValueError("grid must contain at least 4 points")

    def values(self) -> np.ndarray:
        # Tolerate float drift so e.g. 0.05..10 step 0.05 includes 10.0.
        count = int(math.floor((self.s_max - self.s_min) / self.delta_s + 1e-9)) + 1
        return self.s_min + self.delta_s * np.arange(count)


@dataclass(frozen=True)
class SampleSchedule:
    """Increasing sample sizes n_min, n_min + delta_n, ..., <= n_max."""

    n_min: int
    n_max: int
    delta_n: int
    seed: int = 0

    def __post_init__(self):
        if self.n_min < 1 or self.n_max < self.n_min:
            raise ValueError(
                f"need 1 <= n_min <= n_max, got {self.n_min}, {self.n_max}"
            )
        if self.delta_n < 1:
            raise ValueError(f"delta_n must be >= 1, got {self.delta_n}")

    def sizes(self) -> list[int]:
        return list(range(self.n_min, self.n_max + 1, self.delta_n))


def load_csv(path, label_column: str | None = None, target_value: str = "1") -> Dataset:
    """Read a comma-separated, header-first, UTF-8 numeric file.

    When ``label_column`` is given, that column is removed from the numeric
    block and mapped to labels: cell == ``target_value`` means target class.
    Parse failures report the offending cell by row and column name.
    """
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except FileNotFoundError:
        raise FileNotFoundError(f"no such data file: {path}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        label_idx = None
        if label_column is not None:
            try:
                label_idx = header.index(label_column)
            except ValueError:
                raise CsvFormatError(
                    f"{path}: no column named {label_column!r} in header {header}"
                ) from None
        names = tuple(h for i, h in enumerate(header) if i != label_idx)
        rows: list[list[float]] = []
        labels: list[bool] = []
        for rownum, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and row[0].strip() == ""):
                continue  # ignore blank lines
            if len(row) != len(header):
                raise CsvFormatError(
                    f"{path}: row {rownum} has {len(row)} cells, expected {len(header)}"
                )
            vals = []
            for i, cell in enumerate(row):
                if i == label_idx:
                    labels.append(cell.strip() == target_value)
                    continue
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise CsvFormatError(
                        f"{path}: row {rownum}, column {header[i]!r}: "
                        f"not a number: {cell!r}"
                    ) from None
            rows.append(vals)
        if not rows:
            raise CsvFormatError(f"{path}: no data rows")
    return Dataset(
        points=np.array(rows, dtype=np.float64),
        labels=np.array(labels, dtype=bool) if label_idx is not None else None,
        names=names,
    )


def write_csv(dataset: Dataset, path, label_column: str = "label") -> None:
    """Write a dataset as CSV; floats use shortest round-trip formatting."""
    names = dataset.names or tuple(f"x{i}" for i in range(dataset.m))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        if dataset.labels is not None:
            writer.writerow(list(names) + [label_column])
            for row, lab in zip(dataset.points, dataset.labels):
                writer.writerow([repr(float(v)) for v in row] + ["1" if lab else "0"])
        else:
            writer.writerow(names)
            for row in dataset.points:
                writer.writerow([repr(float(v)) for v in row])


def write_meta(path, shape: str, n: int, seed: int) -> None:
    """Sidecar JSON describing how a generated dataset was produced."""
    meta = {"shape": shape, "n": n, "seed": seed}
    with open(f"{path}.meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")


# --- five-pointed star ------------------------------------------------------

_STAR_OUTER = 1.0
_STAR_INNER = 0.5


def _star_vertices() -> np.ndarray:
    angles = np.pi / 2 + np.arange(10) * (np.pi / 5)
    radii = np.where(np.arange(10) % 2 == 0, _STAR_OUTER, _STAR_INNER)
    return np.column_stack([radii * np.cos(angles), radii * np.sin(angles)])


_STAR_POLY = _star_vertices()


def _inside_polygon(points: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Even-odd rule point-in-polygon test, vectorized over points."""
    x = points[:, 0][:, None]
    y = points[:, 1][:, None]
    x1, y1 = poly[:, 0][None, :], poly[:, 1][None, :]
    x2 = np.roll(poly[:, 0], -1)[None, :]
    y2 = np.roll(poly[:, 1], -1)[None, :]
    straddles = (y1 <= y) != (y2 <= y)
    with np.errstate(divide="ignore", invalid="ignore"):
        x_cross = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
    hits = straddles & (x < x_cross)
    return np.sum(hits, axis=1) % 2 == 1


def inside_star(point) -> bool | np.ndarray:
    """Membership oracle for the star generator (exact polygon test)."""
    pts = np.atleast_2d(np.asarray(point, dtype=np.float64))
    res = _inside_polygon(pts, _STAR_POLY)
    return bool(res[0]) if np.asarray(point).ndim == 1 else res


def gen_star(n: int, seed: int) -> Dataset:
    """n points filling a five-pointed star (outer radius 1, inner 0.5).

    Rejection sampling from the bounding square against the polygon test,
    so every point satisfies inside_star by construction.
    """
    if n < 50:
        raise ValueError(f"star generator needs n >= 50, got {n}")
    rng = np.random.default_rng(seed)
    kept: list[np.ndarray] = []
    total = 0
    while total < n:
        cand = rng.uniform(-1.0, 1.0, size=(4 * n, 2))
        good = cand[_inside_polygon(cand, _STAR_POLY)]
        kept.append(good)
        total += len(good)
    return Dataset(points=np.concatenate(kept)[:n], names=("x", "y"))


# --- three clusters ---------------------------------------------------------

_CLUSTER_CENTERS = np.array([[0.0, 0.0], [4.0, 0.0], [2.0, 3.5]])
_CLUSTER_SIGMA = 0.35
_CLUSTER_RADIUS = 3.5 * _CLUSTER_SIGMA


def inside_three_clusters(point) -> bool | np.ndarray:
    """True when within 3.5 sigma of the nearest cluster center."""
    pts = np.atleast_2d(np.asarray(point, dtype=np.float64))
    d2 = np.min(
        np.sum((pts[:, None, :] - _CLUSTER_CENTERS[None, :, :]) ** 2, axis=2), axis=1
    )
    res = d2 <= _CLUSTER_RADIUS**2
    return bool(res[0]) if np.asarray(point).ndim == 1 else res


def gen_three_clusters(n: int, seed: int) -> Dataset:
    """n points split round-robin among three isotropic Gaussian clusters.

    Draws are truncated at the membership radius (3.5 sigma, rejecting
    ~0.2% of raw draws) so the oracle holds for every generated point.
    """
    if n < 30:
        raise ValueError(f"cluster generator needs n >= 30, got {n}")
    rng = np.random.default_rng(seed)
    pts = np.empty((n, 2), dtype=np.float64)
    for i in range(n):
        center = _CLUSTER_CENTERS[i % 3]
        while True:
            offset = rng.normal(0.0, _CLUSTER_SIGMA, size=2)
            if offset @ offset <= _CLUSTER_RADIUS**2:
                break
        pts[i] = center + offset
    return Dataset(points=pts, names=("x", "y"))


# --- banana -----------------------------------------------------------------

_BANANA_R_MIN = 2.0
_BANANA_R_MAX = 3.0


def inside_banana(point) -> bool | np.ndarray:
    """True when in the upper-half annulus band 2 <= r <= 3, y >= 0."""
    pts = np.atleast_2d(np.asarray(point, dtype=np.float64))
    r = np.hypot(pts[:, 0], pts[:, 1])
    res = (r >= _BANANA_R_MIN) & (r <= _BANANA_R_MAX) & (pts[:, 1] >= 0.0)
    return bool(res[0]) if np.asarray(point).ndim == 1 else res


def gen_banana(n: int, seed: int) -> Dataset:
    """n points on a thickened half-circle arc: theta ~ U(0, pi), r ~ U(2, 3)."""
    if n < 50:
        raise ValueError(f"banana generator needs n >= 50, got {n}")
    rng = np.random.default_rng(seed)
    theta = rng.uniform(0.0, np.pi, size=n)
    r = rng.uniform(_BANANA_R_MIN, _BANANA_R_MAX, size=n)
    pts = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
    return Dataset(points=pts, names=("x", "y"))


# --- sampling and transforms ------------------------------------------------

def draw_sample(data: Dataset, k: int, seed: int) -> Dataset:
    """k rows drawn uniformly with replacement; deterministic per seed."""
    if k < 1:
        raise ValueError(f"sample size must be >= 1, got {k}")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, data.n, size=k)
    return Dataset(
        points=data.points[idx].copy(),
        labels=data.labels[idx].copy() if data.labels is not None else None,
        names=data.names,
    )


def zscore(data: Dataset) -> Dataset:
    """Per-column standardization to zero mean, unit variance.

    Optional; nothing in the pipeline applies it implicitly. Constant
    columns are left centered but unscaled.
    """
    mu = data.points.mean(axis=0)
    sd = data.points.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    return Dataset(points=(data.points - mu) / sd, labels=data.labels, names=data.names)
