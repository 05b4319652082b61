"""Difference curves, penalized B-spline smoothing, and extremum location.

The smoother is a standard difference-penalized B-spline regression: cubic
basis on equidistant knots extended past both ends of the data range, an
order-d difference penalty on coefficients, and the penalty weight chosen
by generalized cross-validation over a log-spaced ladder. Knots are
deliberately NOT clamped at the boundary; with the plain extended knot
vector, polynomial trends up to degree penalty_order - 1 lie exactly in
the penalty null space, so e.g. a straight line survives any penalty
weight under the default second-order penalty.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BSpline

__all__ = [
    "Curve",
    "SplineFit",
    "NonUniformGridError",
    "NoLocalMaxError",
    "NoZeroCrossingError",
    "first_difference",
    "second_difference",
    "fit_pspline",
    "eval_spline",
    "spline_band",
    "local_maxima",
    "first_local_max",
    "first_zero_crossing_of_band",
    "write_band_csv",
]

GCV_LADDER = tuple(10.0**k for k in range(-6, 7))


class NonUniformGridError(ValueError):
    """The difference quotients assume an equally spaced grid."""


class NoLocalMaxError(RuntimeError):
    """No interior local maximum on the evaluation grid (curve monotone?)."""


class NoZeroCrossingError(RuntimeError):
    """The confidence band never contains zero on the evaluation grid."""


@dataclass(frozen=True)
class Curve:
    """Paired (xs, ys) samples with strictly increasing xs."""

    xs: np.ndarray
    ys: np.ndarray

    def __post_init__(self):
        xs = np.ascontiguousarray(self.xs, dtype=np.float64)
        ys = np.ascontiguousarray(self.ys, dtype=np.float64)
        if xs.ndim != 1 or ys.ndim != 1 or len(xs) != len(ys):
            raise ValueError("xs and ys must be 1-D and equally long")
        if len(xs) < 1:
            raise ValueError("curve needs at least 1 point")
        if not np.all(np.diff(xs) > 0):
            raise ValueError("xs must be strictly increasing")
        if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
            raise ValueError("curve values must be finite")
        xs.setflags(write=False)
        ys.setflags(write=False)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    def __len__(self) -> int:
        return len(self.xs)


def _uniform_step(xs: np.ndarray) -> float:
    h = xs[1] - xs[0]
    if np.max(np.abs(np.diff(xs) - h)) > 1e-9 * h:
        raise NonUniformGridError("grid spacing varies by more than 1e-9 relative")
    return float(h)


def first_difference(curve: Curve) -> Curve:
    """Forward difference quotient; output drops the last grid point."""
    h = _uniform_step(curve.xs)
    return Curve(xs=curve.xs[:-1], ys=np.diff(curve.ys) / h)


def second_difference(curve: Curve) -> Curve:
    """(y[i+2] - 2 y[i+1] + y[i]) / h^2; output drops the last two points."""
    if len(curve) < 3:
        raise ValueError(f"second difference needs >= 3 points, got {len(curve)}")
    h = _uniform_step(curve.xs)
    y = curve.ys
    return Curve(xs=curve.xs[:-2], ys=(y[2:] - 2.0 * y[1:-1] + y[:-2]) / h**2)


@dataclass(frozen=True)
class SplineFit:
    """Result of a penalized B-spline regression.

    ``knots`` is the interior knot count; ``coefficients`` has
    knots + degree + 1 entries. ``coef_cov`` is the sandwich covariance of
    the coefficients used for pointwise standard errors.
    """

    knots: int
    degree: int
    penalty_order: int
    lam: float
    coefficients: np.ndarray
    sigma2: float
    edf: float
    knot_vector: np.ndarray
    coef_cov: np.ndarray
    x_min: float
    x_max: float

    def __post_init__(self):
        expected = self.knots + self.degree + 1
        if len(self.coefficients) != expected:
            raise ValueError(
                f"expected {expected} coefficients, got {len(self.coefficients)}"
            )
        if self.lam < 0:
            raise ValueError(f"penalty weight must be >= 0, got {self.lam}")


def _basis(xs: np.ndarray, knot_vector: np.ndarray, degree: int) -> np.ndarray:
    return BSpline.design_matrix(xs, knot_vector, degree, extrapolate=False).toarray()


def _knot_vector(x_min: float, x_max: float, knots: int, degree: int) -> np.ndarray:
    h = (x_max - x_min) / (knots + 1)
    return x_min + h * np.arange(-degree, knots + degree + 2)


def fit_pspline(
    curve: Curve,
    knots: int = 100,
    degree: int = 3,
    penalty_order: int = 2,
    lam: float | str = "auto",
) -> SplineFit:
    """Least squares on a B-spline basis plus lam * ||D_d c||^2.

    lam="auto" picks the ladder value minimizing GCV(lam) =
    n * RSS / (n - edf)^2. The normal matrix is inverted with a
    Hermitian pseudoinverse so the saturated lam=0 case stays solvable.
    """
    n = len(curve)
    if knots < penalty_order + 1:
        raise ValueError(f"need knots >= penalty_order + 1, got {knots}")
    if n <= degree + 1:
        raise ValueError(f"need more than degree + 1 = {degree + 1} points, got {n}")
    x_min, x_max = float(curve.xs[0]), float(curve.xs[-1])
    t = _knot_vector(x_min, x_max, knots, degree)
    B = _basis(curve.xs, t, degree)
    nbasis = B.shape[1]
    if penalty_order >= nbasis:
        raise ValueError("penalty order too high for the basis size")
    D = np.diff(np.eye(nbasis), penalty_order, axis=0)
    BtB = B.T @ B
    Bty = B.T @ curve.ys
    DtD = D.T @ D

    def solve_at(weight: float):
        a_pinv = np.linalg.pinv(BtB + weight * DtD, hermitian=True)
        coef = a_pinv @ Bty
        resid = curve.ys - B @ coef
        rss = float(resid @ resid)
        edf = float(np.trace(a_pinv @ BtB))
        return a_pinv, coef, rss, edf

    if lam == "auto":
        best = None
        for weight in GCV_LADDER:
            _, _, rss, edf = solve_at(weight)
            denom = n - edf
            gcv = n * rss / denom**2 if denom > 1e-9 else np.inf
            if best is None or gcv < best[1]:
                best = (weight, gcv)
        lam = best[0]
    elif not (isinstance(lam, (int, float)) and lam >= 0 and np.isfinite(lam)):
        raise ValueError(f"lam must be 'auto' or a finite value >= 0, got {lam!r}")

    a_pinv, coef, rss, edf = solve_at(float(lam))
    denom = n - edf
    sigma2 = rss / denom if denom > 1e-9 else 0.0
    coef_cov = a_pinv @ BtB @ a_pinv * sigma2
    return SplineFit(
        knots=knots,
        degree=degree,
        penalty_order=penalty_order,
        lam=float(lam),
        coefficients=coef,
        sigma2=float(sigma2),
        edf=edf,
        knot_vector=t,
        coef_cov=coef_cov,
        x_min=x_min,
        x_max=x_max,
    )


def eval_spline(fit: SplineFit, x):
    """Fitted value and pointwise standard error at x (scalar or array)."""
    scalar = np.ndim(x) == 0
    xs = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if np.any(xs < fit.x_min) or np.any(xs > fit.x_max):
        raise ValueError(
            f"evaluation points must lie in [{fit.x_min:g}, {fit.x_max:g}]"
        )
    B = _basis(xs, fit.knot_vector, fit.degree)
    values = B @ fit.coefficients
    variances = np.einsum("ij,jk,ik->i", B, fit.coef_cov, B)
    se = np.sqrt(np.maximum(variances, 0.0))
    if scalar:
        return float(values[0]), float(se[0])
    return values, se


def spline_band(fit: SplineFit, xs) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Fitted values with the pointwise 95% band (value, lower, upper)."""
    values, se = eval_spline(fit, xs)
    half = 1.96 * se
    return values, values - half, values + half


def local_maxima(fit: SplineFit, xs_grid) -> np.ndarray:
    """Grid positions of interior local maxima, plateaus counted once.

    A plateau qualifies when the fitted value rises into it and drops
    after it; the reported position is the plateau's leftmost point.
    """
    xs = np.asarray(xs_grid, dtype=np.float64)
    v, _ = eval_spline(fit, xs)
    found = []
    i = 1
    while i < len(v) - 1:
        if v[i] > v[i - 1]:
            j = i
            while j + 1 < len(v) and v[j + 1] == v[i]:
                j += 1
            if j < len(v) - 1 and v[j + 1] < v[i]:
                found.append(xs[i])
            i = j + 1
        else:
            i += 1
    return np.asarray(found, dtype=np.float64)


def first_local_max(fit: SplineFit, xs_grid) -> float:
    peaks = local_maxima(fit, xs_grid)
    if len(peaks) == 0:
        raise NoLocalMaxError(
            "no interior local maximum on the grid; widen the bandwidth range"
        )
    return float(peaks[0])


def first_zero_crossing_of_band(fit: SplineFit, xs_grid) -> float:
    """Smallest grid x whose 95% band contains zero."""
    xs = np.asarray(xs_grid, dtype=np.float64)
    _, lower, upper = spline_band(fit, xs)
    hits = np.flatnonzero((lower <= 0.0) & (upper >= 0.0))
    if len(hits) == 0:
        raise NoZeroCrossingError(
            "95% band never contains zero on the grid; widen the bandwidth range"
        )
    return float(xs[hits[0]])


def write_band_csv(path, curve: Curve, fit: SplineFit) -> None:
    """CSV of the raw curve with its smoothed values and 95% band."""
    smoothed, lower, upper = spline_band(fit, curve.xs)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["s", "raw", "smoothed", "lower95", "upper95"])
        for row in zip(curve.xs, curve.ys, smoothed, lower, upper):
            writer.writerow([repr(float(v)) for v in row])
