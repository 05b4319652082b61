"""Approximate SVDD training on small with-replacement samples.

Each iteration draws a fresh sample, merges it with the support vectors
found so far, and retrains on the merged set. The support vectors act as
a running summary of the boundary, so the working problem stays small
while the description converges to nearly the full-data one. Training
stops once the threshold R-squared stalls (small relative change over
several consecutive iterations).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datasets import Dataset
from .svdd import SvddConfig, SvddModel, solve_dual

__all__ = ["SamplingTrainConfig", "SamplingRun", "sample_train"]


@dataclass(frozen=True)
class SamplingTrainConfig:
    sample_size: int
    max_iters: int = 200
    stall_iters: int = 5
    r2_rel_tol: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.sample_size < 2:
            raise ValueError(f"sample_size must be >= 2, got {self.sample_size}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.stall_iters < 1:
            raise ValueError(f"stall_iters must be >= 1, got {self.stall_iters}")
        if not (self.r2_rel_tol > 0 and np.isfinite(self.r2_rel_tol)):
            raise ValueError(f"r2_rel_tol must be > 0, got {self.r2_rel_tol}")


@dataclass(frozen=True)
class SamplingRun:
    """Final model plus the iteration trace that produced it."""

    model: SvddModel
    iterations: int
    converged: bool
    r2_trace: tuple[float, ...]


def sample_train(
    data,
    s: float,
    f: float,
    cfg: SamplingTrainConfig,
    *,
    kkt_tol: float = 1e-6,
) -> SamplingRun:
    """Iterative sample-merge-retrain loop; deterministic per cfg.seed.

    A sample_size at or above the dataset size degenerates to one full
    training (sampling could not reduce the problem anyway), which makes
    the reduction exact rather than merely close.
    """
    pts = data.points if isinstance(data, Dataset) else Dataset(points=np.asarray(data, dtype=np.float64)).points
    n = pts.shape[0]
    config = SvddConfig(s=s, f=f, kkt_tol=kkt_tol)

    if cfg.sample_size >= n:
        model = solve_dual(pts, config)
        return SamplingRun(model=model, iterations=1, converged=True, r2_trace=(model.r_squared,))

    rng = np.random.default_rng(cfg.seed)
    sv_points = np.empty((0, pts.shape[1]))
    trace: list[float] = []
    stall = 0
    model = None
    for iteration in range(1, cfg.max_iters + 1):
        idx = rng.integers(0, n, size=cfg.sample_size)
        merged = np.unique(np.vstack([pts[idx], sv_points]), axis=0)
        model = solve_dual(merged, config)
        sv_points = model.sv_points
        trace.append(model.r_squared)
        if len(trace) >= 2:
            prev = trace[-2]
            if abs(trace[-1] - prev) <= cfg.r2_rel_tol * max(abs(prev), 1e-12):
                stall += 1
            else:
                stall = 0
        if stall >= cfg.stall_iters:
            return SamplingRun(
                model=model, iterations=iteration, converged=True, r2_trace=tuple(trace)
            )
    return SamplingRun(
        model=model, iterations=cfg.max_iters, converged=False, r2_trace=tuple(trace)
    )
