"""Relative pose from calibrated correspondences.

Convention: a :class:`RelativePose` ``(R, d)`` between cameras 1 and 2 has
``R = R2 R1^T`` (camera-1 frame to camera-2 frame) and ``d`` the unit
direction from camera 1's center to camera 2's center, expressed in camera
1's frame.  The essential matrix is ``E = [t]x R`` with ``t = -R d``, so that
``b2^T E b1 = 0`` for corresponding bearings.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AmbiguousCheirality, DegenerateConfiguration, DegenerateGeometry
from .geometry import Ray, rotation_angle, skew
from .triangulation import midpoint

# second-smallest singular value of the normalized design matrix, relative to
# the largest, below which the null space is considered more than 1-D
NULLSPACE_TOL = 1e-8
SAME_POSE_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class EssentialMatrix:
    matrix: np.ndarray
    # smallest / second-smallest singular value of the design matrix;
    # ~0 for noise-free data, grows with noise
    residual_ratio: float = 0.0

    def residuals(self, bearings1, bearings2) -> np.ndarray:
        b1 = np.asarray(bearings1, dtype=float)
        b2 = np.asarray(bearings2, dtype=float)
        return np.einsum("ij,jk,ik->i", b2, self.matrix, b1)


@dataclass(frozen=True, eq=False)
class RelativePose:
    rotation: np.ndarray
    direction: np.ndarray
    notes: tuple = ()

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float)
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float))
        object.__setattr__(self, "direction", d / np.linalg.norm(d))

    @property
    def translation(self) -> np.ndarray:
        """``t`` of ``x2 = R x1 + t`` for a unit baseline."""
        return -self.rotation @ self.direction

    def essential(self) -> np.ndarray:
        E = skew(self.translation) @ self.rotation
        return E * (np.sqrt(2.0) / np.linalg.norm(E))

    def angle_to(self, other: "RelativePose") -> tuple[float, float]:
        """Geodesic rotation error and translation-direction angle, radians."""
        dR = rotation_angle(self.rotation.T @ other.rotation)
        c = np.clip(self.direction @ other.direction, -1.0, 1.0)
        s = np.linalg.norm(np.cross(self.direction, other.direction))
        return dR, float(np.arctan2(s, c))


def essential_from_pose(R, t) -> np.ndarray:
    E = skew(t) @ np.asarray(R, dtype=float)
    return E * (np.sqrt(2.0) / np.linalg.norm(E))


def _normalizer(x):
    """Similarity taking 2D points to zero mean and mean distance sqrt(2)."""
    mean = x.mean(axis=0)
    dist = np.linalg.norm(x - mean, axis=1).mean()
    s = np.sqrt(2.0) / dist if dist > 0 else 1.0
    return np.array([[s, 0.0, -s * mean[0]], [0.0, s, -s * mean[1]], [0.0, 0.0, 1.0]])


def estimate_essential(bearings1, bearings2) -> EssentialMatrix:
    """Normalized eight-point estimate of ``E`` from unit bearings.

    Bearings are dehomogenized by their z component (all must have z > 0),
    Hartley-normalized, and the SVD null vector of the design matrix is
    projected onto the essential manifold with singular values (1, 1, 0).

    Raises:
        DegenerateConfiguration: fewer than eight correspondences, or the design
            matrix has a null space of dimension above one (e.g. all points in
            a single plane through both centers).
    """
    b1 = np.asarray(bearings1, dtype=float)
    b2 = np.asarray(bearings2, dtype=float)
    if b1.shape != b2.shape or b1.ndim != 2 or b1.shape[1] != 3:
        raise ValueError("bearings must be two equal-length (n, 3) arrays")
    if len(b1) < 8:
        raise DegenerateConfiguration(f"need at least 8 correspondences, got {len(b1)}")
    if np.any(b1[:, 2] <= 0) or np.any(b2[:, 2] <= 0):
        raise DegenerateConfiguration("bearings must point in front of the camera")
    x1 = b1[:, :2] / b1[:, 2:3]
    x2 = b2[:, :2] / b2[:, 2:3]
    T1, T2 = _normalizer(x1), _normalizer(x2)
    h1 = np.column_stack([x1, np.ones(len(x1))]) @ T1.T
    h2 = np.column_stack([x2, np.ones(len(x2))]) @ T2.T
    A = (h2[:, :, None] * h1[:, None, :]).reshape(len(h1), 9)
    _, s, Vt = np.linalg.svd(A, full_matrices=True)
    sv = np.zeros(9)
    sv[: len(s)] = s
    if sv[7] <= NULLSPACE_TOL * sv[0]:
        raise DegenerateConfiguration("epipolar design matrix has a multi-dimensional null space")
    E = T2.T @ Vt[-1].reshape(3, 3) @ T1
    U, d, Vt = np.linalg.svd(E)
    sigma = (d[0] + d[1]) / 2.0
    E = U @ np.diag([sigma, sigma, 0.0]) @ Vt
    E *= np.sqrt(2.0) / np.linalg.norm(E)
    return EssentialMatrix(E, float(sv[8] / sv[7]))


def decompose_essential(E) -> list[RelativePose]:
    """The four ``(R, d)`` factorizations of an essential matrix.

    Ordered ``(Ra, +t), (Ra, -t), (Rb, +t), (Rb, -t)``.
    """
    E = E.matrix if isinstance(E, EssentialMatrix) else np.asarray(E, dtype=float)
    U, _, Vt = np.linalg.svd(E)
    if np.linalg.det(U) < 0:
        U = -U
    if np.linalg.det(Vt) < 0:
        Vt = -Vt
    W = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    t = U[:, 2]
    out = []
    for R in (U @ W @ Vt, U @ W.T @ Vt):
        for sign in (1.0, -1.0):
            out.append(RelativePose(R, -R.T @ (sign * t)))
    return out


def _cheirality_count(pose: RelativePose, b1, b2) -> int:
    R, d = pose.rotation, pose.direction
    count = 0
    for f1, f2 in zip(b1, b2):
        try:
            p = midpoint([Ray(np.zeros(3), f1), Ray(d, R.T @ f2)]).point
        except DegenerateGeometry:
            continue
        if p[2] > 0 and (R @ (p - d))[2] > 0:
            count += 1
    return count


def _same_pose(a: RelativePose, b: RelativePose) -> bool:
    dR, dt = a.angle_to(b)
    return dR <= SAME_POSE_TOL and dt <= SAME_POSE_TOL


def select_pose(candidates, bearings1, bearings2) -> RelativePose:
    """Pick the candidate putting the most triangulated points in front of
    both cameras (camera 1 at the identity, unit baseline).

    Raises:
        AmbiguousCheirality: the best count is shared by geometrically
            different candidates.
    """
    b1 = np.atleast_2d(np.asarray(bearings1, dtype=float))
    b2 = np.atleast_2d(np.asarray(bearings2, dtype=float))
    if len(b1) < 1 or len(b1) != len(b2):
        raise ValueError("need at least one correspondence")
    counts = [_cheirality_count(c, b1, b2) for c in candidates]
    best = max(counts)
    winners = [i for i, n in enumerate(counts) if n == best]
    chosen = candidates[winners[0]]
    notes = (f"cheirality support {best}/{len(b1)}",)
    if len(winners) > 1:
        if not all(_same_pose(chosen, candidates[i]) for i in winners[1:]):
            raise AmbiguousCheirality(f"cheirality counts tie: {counts}")
        notes += ("tie broken by lowest index",)
    return RelativePose(chosen.rotation, chosen.direction, notes)


def relative_pose(bearings1, bearings2) -> RelativePose:
    """Estimate, decompose and disambiguate in one call."""
    E = estimate_essential(bearings1, bearings2)
    return select_pose(decompose_essential(E), bearings1, bearings2)
