"""SVDD dual training, thresholding, and scoring with a Gaussian kernel.

The trainer solves

    minimize    a' K a
    subject to  sum(a) = 1,   0 <= a_i <= C,   C = 1 / (n f)

by pairwise coordinate descent on the maximal-KKT-violating pair. Because
every diagonal kernel entry is 1 and the alphas sum to 1, this is the
one-class data-description dual; the reported objective value is

    oof = a' K a - 1

which is nonpositive and increases toward 0 as the bandwidth grows (the
tightest description shrinks to a point in feature space).
"""

from __future__ import annotations

import json
import time
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .datasets import Dataset, SweepGrid
from .kernels import cross_kernel, kernel_matrix, kernel_row, sq_dists_to_point

__all__ = [
    "SvddConfig",
    "SvddModel",
    "ScoreResult",
    "TrainCurve",
    "ConvergenceError",
    "solve_dual",
    "score",
    "score_points",
    "train_curve",
    "save_model",
    "load_model",
    "model_to_dict",
    "model_from_dict",
]

FORMAT_VERSION = 1

_CACHE_MAX_N = 10_000  # dense n x n kernel kept in memory at or below this n
_ROW_CACHE_CAP = 128  # LRU capacity for the on-the-fly row path


class ConvergenceError(RuntimeError):
    """Solver hit its update budget before reaching the KKT tolerance."""

    def __init__(self, message: str, *, gap: float, updates: int, bandwidth: float):
        super().__init__(message)
        self.gap = gap
        self.updates = updates
        self.bandwidth = bandwidth


@dataclass(frozen=True)
class SvddConfig:
    """Training knobs for one (s, f) fit.

    max_passes counts sweeps of n pairwise updates; None resolves to
    max(1000, 10 * n) once the data size is known.
    """

    s: float
    f: float
    kkt_tol: float = 1e-6
    max_passes: int | None = None

    def __post_init__(self):
        if not (self.s > 0 and np.isfinite(self.s)):
            raise ValueError(f"bandwidth s must be > 0, got {self.s}")
        if not 0 < self.f < 1:
            raise ValueError(f"outlier fraction f must be in (0, 1), got {self.f}")
        if not (self.kkt_tol > 0 and np.isfinite(self.kkt_tol)):
            raise ValueError(f"kkt_tol must be > 0, got {self.kkt_tol}")
        if self.max_passes is not None and self.max_passes < 1:
            raise ValueError(f"max_passes must be >= 1, got {self.max_passes}")


@dataclass(frozen=True)
class SvddModel:
    """A trained description: support vectors, multipliers, and threshold."""

    sv_points: np.ndarray
    alphas: np.ndarray
    s: float
    f: float
    C: float
    r_squared: float
    oof: float

    def __post_init__(self):
        pts = np.ascontiguousarray(self.sv_points, dtype=np.float64)
        al = np.ascontiguousarray(self.alphas, dtype=np.float64)
        if pts.ndim != 2 or al.ndim != 1 or len(al) != pts.shape[0]:
            raise ValueError("sv_points and alphas must align (n_sv rows)")
        pts.setflags(write=False)
        al.setflags(write=False)
        object.__setattr__(self, "sv_points", pts)
        object.__setattr__(self, "alphas", al)

    @property
    def nsv(self) -> int:
        return self.sv_points.shape[0]

    @property
    def m(self) -> int:
        return self.sv_points.shape[1]

    @property
    def sv_interior_flags(self) -> np.ndarray:
        """True for unbounded support vectors (alpha < C), which sit on the boundary."""
        return self.alphas < self.C


@dataclass(frozen=True)
class ScoreResult:
    distance_sq: float
    is_outlier: bool


@dataclass(frozen=True)
class TrainCurve:
    """Aligned per-bandwidth results of a grid sweep of full trainings."""

    s_values: np.ndarray
    oof: np.ndarray
    nsv: np.ndarray
    seconds: np.ndarray


def _points_of(data) -> np.ndarray:
    if isinstance(data, Dataset):
        return data.points
    return Dataset(points=np.asarray(data, dtype=np.float64)).points


class _KernelOps:
    """Column access to the kernel matrix, dense or computed on demand."""

    def __init__(self, points: np.ndarray, s: float):
        self.points = points
        self.s = s
        self.n = points.shape[0]
        if self.n <= _CACHE_MAX_N:
            self.dense = kernel_matrix(points, s).values
            self._rows = None
        else:
            self.dense = None
            self._rows: OrderedDict[int, np.ndarray] = OrderedDict()

    def col(self, i: int) -> np.ndarray:
        if self.dense is not None:
            return self.dense[i]
        row = self._rows.get(i)
        if row is None:
            row = kernel_row(self.points, i, self.s)
            self._rows[i] = row
            if len(self._rows) > _ROW_CACHE_CAP:
                self._rows.popitem(last=False)
        else:
            self._rows.move_to_end(i)
        return row

    def matvec(self, alphas: np.ndarray) -> np.ndarray:
        if self.dense is not None:
            return self.dense @ alphas
        out = np.empty(self.n)
        step = 512
        for a in range(0, self.n, step):
            b = min(a + step, self.n)
            out[a:b] = cross_kernel(self.points[a:b], self.points, self.s) @ alphas
        return out


def solve_dual(data, config: SvddConfig) -> SvddModel:
    """Train on all rows of ``data`` at the config's (s, f).

    Bound hits are snapped to exactly C and exactly 0 so the support-vector
    cut and the interior test are bit-exact, and the gradient vector is
    refreshed from scratch before the threshold is computed.
    """
    pts = _points_of(data)
    n = pts.shape[0]
    C = 1.0 / (n * config.f)
    if n * C < 1.0:
        raise ValueError(f"infeasible: n*C = {n * C:.6g} < 1 (f = {config.f})")
    tol = config.kkt_tol
    max_updates = (config.max_passes or max(1000, 10 * n)) * n

    kern = _KernelOps(pts, config.s)
    if kern.dense is not None:
        alphas = np.full(n, 1.0 / n)
        q = kern.matvec(alphas)  # q = K a, maintained incrementally below
        refresh_every = 10 * n
    else:
        # a uniform start above the dense-cache cutoff would cost a full
        # n^2 warmup matvec; seed the simplex on the first ceil(1/C) points
        alphas = np.zeros(n)
        k_full = int(1.0 // C)
        if k_full * C > 1.0:
            k_full -= 1
        alphas[:k_full] = C
        rem = 1.0 - k_full * C
        if rem > 0.0:
            alphas[k_full] = rem
        q = np.zeros(n)
        for j in np.flatnonzero(alphas):
            q += alphas[j] * kern.col(j)
        refresh_every = None

    updates = 0
    while True:
        lo = np.where(alphas < C, q, np.inf)
        i = int(np.argmin(lo))
        hi = np.where(alphas > 0.0, q, -np.inf)
        j = int(np.argmax(hi))
        gap = 2.0 * (q[j] - q[i])  # max KKT violation on the gradient scale
        if gap <= tol:
            break
        if updates >= max_updates:
            raise ConvergenceError(
                f"no convergence after {updates} pair updates at s={config.s:g} "
                f"(KKT gap {gap:.3e} > {tol:.3e})",
                gap=float(gap),
                updates=updates,
                bandwidth=config.s,
            )
        ki = kern.col(i)
        kj = kern.col(j)
        eta = 2.0 * (1.0 - ki[j])
        step = gap / (2.0 * eta) if eta > 1e-15 else np.inf
        room_i = C - alphas[i]
        room_j = alphas[j]
        delta = min(step, room_i, room_j)
        if delta == room_i:
            alphas[i] = C
        else:
            alphas[i] += delta
        if delta == room_j:
            alphas[j] = 0.0
        else:
            alphas[j] -= delta
        q += delta * (ki - kj)
        updates += 1
        if refresh_every is not None and updates % refresh_every == 0:
            q = kern.matvec(alphas)

    cut = tol * C
    _drain_stragglers(alphas, q, kern, C, cut)

    if kern.dense is not None:
        q = kern.matvec(alphas)
        quad = float(alphas @ q)
        keep = alphas > cut
        sv_alphas = alphas[keep]
        boundary_d2 = 1.0 - 2.0 * q[keep] + quad
    else:
        # exact gradient is only needed where alpha > 0; a full matvec
        # here would repeat the n^2 warmup this path exists to avoid
        nz = np.flatnonzero(alphas > 0.0)
        q_nz = np.empty(nz.size)
        step = 512
        for a0 in range(0, nz.size, step):
            b0 = min(a0 + step, nz.size)
            q_nz[a0:b0] = cross_kernel(pts[nz[a0:b0]], pts[nz], config.s) @ alphas[nz]
        quad = float(alphas[nz] @ q_nz)
        keep_nz = alphas[nz] > cut
        keep = np.zeros(n, dtype=bool)
        keep[nz[keep_nz]] = True
        sv_alphas = alphas[keep]
        boundary_d2 = 1.0 - 2.0 * q_nz[keep_nz] + quad
    oof = quad - 1.0
    interior = sv_alphas < C
    if interior.any():
        r_squared = float(np.mean(boundary_d2[interior]))
    else:
        # every multiplier at the box bound: no point sits exactly on the
        # boundary, so put the threshold at the outermost support vector
        r_squared = float(np.max(boundary_d2))

    model = SvddModel(
        sv_points=pts[keep].copy(),
        alphas=sv_alphas,
        s=config.s,
        f=config.f,
        C=C,
        r_squared=r_squared,
        oof=oof,
    )
    _check_model(model)
    return model


def _drain_stragglers(alphas, q, kern, C, cut) -> None:
    """Move numerically-tiny multipliers to the best receiver, in place.

    Bound snapping leaves non-support multipliers at exactly 0; anything
    in (0, cut] is residue from the stopping tolerance. Transferring it to
    the lowest-gradient point with room keeps sum(a) = 1 exact and changes
    the objective by at most O(cut * tol).
    """
    for j in np.flatnonzero((alphas > 0.0) & (alphas <= cut)):
        while alphas[j] > 0.0:
            lo = np.where(alphas < C, q, np.inf)
            lo[j] = np.inf
            i = int(np.argmin(lo))
            if not np.isfinite(lo[i]):
                break  # nowhere to put it; keep the point as a support vector
            take = min(alphas[j], C - alphas[i])
            if take == alphas[j]:
                alphas[j] = 0.0
            else:
                alphas[j] -= take
            if take == C - alphas[i]:
                alphas[i] = C
            else:
                alphas[i] += take
            q += take * (kern.col(i) - kern.col(j))


def _check_model(model: SvddModel) -> None:
    # cheap always-on sanity net; violations mean a solver bug, not bad input
    total = float(np.sum(model.alphas))
    if abs(total - 1.0) > 1e-8:
        raise RuntimeError(f"internal: sum(alpha) = {total!r} drifted from 1")
    if np.any(model.alphas <= 0.0) or np.any(model.alphas > model.C * (1 + 1e-12)):
        raise RuntimeError("internal: alpha outside (0, C]")
    if model.r_squared < -1e-9:
        raise RuntimeError(f"internal: negative threshold {model.r_squared!r}")


def score(model: SvddModel, z) -> ScoreResult:
    """Squared feature-space distance of z to the center, and the verdict.

    distance_sq = 1 - 2 sum_i a_i k(x_i, z) + a' K a; outlier iff it
    strictly exceeds the model threshold.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (model.m,):
        raise ValueError(f"point has shape {z.shape}, model expects ({model.m},)")
    k = np.exp(sq_dists_to_point(model.sv_points, z) / (-2.0 * model.s**2))
    d2 = 1.0 - 2.0 * float(model.alphas @ k) + (model.oof + 1.0)
    return ScoreResult(distance_sq=d2, is_outlier=d2 > model.r_squared)


def score_points(model: SvddModel, points) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized score: returns (distance_sq array, is_outlier array)."""
    pts = _points_of(points)
    if pts.shape[1] != model.m:
        raise ValueError(f"points have {pts.shape[1]} columns, model expects {model.m}")
    cross = cross_kernel(pts, model.sv_points, model.s) @ model.alphas
    d2 = 1.0 - 2.0 * cross + (model.oof + 1.0)
    return d2, d2 > model.r_squared


def train_curve(
    data,
    grid: SweepGrid,
    f: float,
    *,
    kkt_tol: float = 1e-6,
    max_passes: int | None = None,
    threads: int = 1,
) -> TrainCurve:
    """One full training per grid bandwidth; results ordered by the grid."""
    s_values = grid.values()

    def one(s: float):
        t0 = time.perf_counter()
        model = solve_dual(data, SvddConfig(s=s, f=f, kkt_tol=kkt_tol, max_passes=max_passes))
        return model.oof, model.nsv, time.perf_counter() - t0

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, s_values))
    else:
        results = [one(s) for s in s_values]
    oof, nsv, seconds = zip(*results)
    return TrainCurve(
        s_values=np.asarray(s_values, dtype=np.float64),
        oof=np.asarray(oof, dtype=np.float64),
        nsv=np.asarray(nsv, dtype=np.int64),
        seconds=np.asarray(seconds, dtype=np.float64),
    )


# --- persistence -------------------------------------------------------------

def model_to_dict(model: SvddModel) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "s": model.s,
        "f": model.f,
        "C": model.C,
        "r_squared": model.r_squared,
        "oof": model.oof,
        "sv": model.sv_points.tolist(),
        "alphas": model.alphas.tolist(),
    }


def model_from_dict(doc: dict) -> SvddModel:
    try:
        version = doc["format_version"]
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported model format_version {version!r}")
        return SvddModel(
            sv_points=np.asarray(doc["sv"], dtype=np.float64),
            alphas=np.asarray(doc["alphas"], dtype=np.float64),
            s=float(doc["s"]),
            f=float(doc["f"]),
            C=float(doc["C"]),
            r_squared=float(doc["r_squared"]),
            oof=float(doc["oof"]),
        )
    except KeyError as missing:
        raise ValueError(f"model document missing key {missing}") from None


def save_model(model: SvddModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh)
        fh.write("\n")


def load_model(path) -> SvddModel:
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
