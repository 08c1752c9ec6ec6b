"""Similarity alignment of point clouds and reconstruction error metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateAngle, DegenerateConfiguration, EmptyInput

RANK_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class SimilarityTransform:
    scale: float
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("similarity scale must be positive")

    def apply(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return self.scale * pts @ self.rotation.T + self.translation

    def objective(self, est, gt) -> float:
        return float(np.sum((self.apply(est) - np.asarray(gt, dtype=float)) ** 2))


def fit_similarity(est, gt) -> SimilarityTransform:
    """Least-squares ``(s, R, t)`` with ``s R est_i + t ~ gt_i`` (Umeyama).

    Raises:
        DegenerateConfiguration: fewer than three points, or either cloud
            collinear / coincident.
    """
    x = np.asarray(est, dtype=float)
    y = np.asarray(gt, dtype=float)
    if x.shape != y.shape or x.ndim != 2 or x.shape[1] != 3:
        raise ValueError("expected two equal-length (n, 3) point lists")
    n = len(x)
    if n < 3:
        raise DegenerateConfiguration("need at least three correspondences")
    mx, my = x.mean(axis=0), y.mean(axis=0)
    dx, dy = x - mx, y - my
    for cloud in (dx, dy):
        sv = np.linalg.svd(cloud, compute_uv=False)
        if sv[1] <= RANK_TOL * max(sv[0], 1.0):
            raise DegenerateConfiguration("points are collinear or coincident")
    cov = dy.T @ dx / n
    U, d, Vt = np.linalg.svd(cov)
    if d[1] <= RANK_TOL * max(d[0], 1.0):
        raise DegenerateConfiguration("cross-covariance has rank below 2")
    S = np.ones(3)
    if np.linalg.det(U) * np.linalg.det(Vt) < 0:
        S[2] = -1.0
    R = U @ np.diag(S) @ Vt
    var_x = np.sum(dx**2) / n
    s = float(np.sum(d * S) / var_x)
    t = my - s * R @ mx
    return SimilarityTransform(s, R, t)


def align(est, gt):
    """``est`` mapped by the best similarity onto ``gt``, plus the transform."""
    T = fit_similarity(est, gt)
    return T.apply(est), T


def position_error(p_est, p) -> float:
    return float(np.linalg.norm(np.asarray(p_est, dtype=float) - np.asarray(p, dtype=float)))


def distance_error(p1_est, p2_est, p1, p2) -> float:
    """``|d(p1, p2) - d(p1_est, p2_est)|``."""
    return abs(position_error(p1, p2) - position_error(p1_est, p2_est))


def _angle(a, b) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise DegenerateAngle("zero-length vector in angle")
    return float(np.arccos(np.clip((a @ b) / (na * nb), -1.0, 1.0)))


def angle_error(p1_est, p2_est, p3_est, p1, p2, p3) -> float:
    """Absolute difference of the angles at vertex 1 of the two triangles."""
    e = [np.asarray(v, dtype=float) for v in (p1_est, p2_est, p3_est)]
    g = [np.asarray(v, dtype=float) for v in (p1, p2, p3)]
    return abs(_angle(e[1] - e[0], e[2] - e[0]) - _angle(g[1] - g[0], g[2] - g[0]))


@dataclass(frozen=True)
class ErrorStats:
    mean: float
    std: float
    median: float
    min: float
    max: float
    count: int = 0


def aggregate(values) -> ErrorStats:
    """Summary statistics; ``std`` uses the population (1/n) denominator."""
    v = np.asarray(list(values), dtype=float)
    if v.size == 0:
        raise EmptyInput("cannot aggregate an empty list")
    return ErrorStats(
        float(v.mean()), float(v.std()), float(np.median(v)), float(v.min()), float(v.max()), int(v.size)
    )
