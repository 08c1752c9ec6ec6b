"""Pinhole camera model, projection and lines of sight.

Conventions: camera frame has z forward, x right, y down.  A pose stores the
world-to-camera rotation ``R`` and the camera center ``c`` so that a world
point ``p`` has camera coordinates ``R @ (p - c)`` and the camera matrix is
``K [R | -R c]``.  Points and pixels are plain float arrays of shape (3,)
and (2,).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CheiralityViolation

ROTATION_TOL = 1e-9


def skew(v) -> np.ndarray:
    """Cross-product matrix ``[v]x`` such that ``skew(a) @ b == a x b``."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def is_rotation(R, tol: float = ROTATION_TOL) -> bool:
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        return False
    return bool(
        np.abs(R.T @ R - np.eye(3)).max() <= tol
        and abs(np.linalg.det(R) - 1.0) <= tol
    )


def nearest_rotation(M) -> np.ndarray:
    """Project a 3x3 matrix onto SO(3) in the Frobenius sense."""
    U, _, Vt = np.linalg.svd(np.asarray(M, dtype=float))
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt))])
    return U @ D @ Vt


def axis_angle(axis, angle: float) -> np.ndarray:
    """Rodrigues rotation about ``axis`` (normalized here) by ``angle`` radians."""
    k = np.asarray(axis, dtype=float)
    k = k / np.linalg.norm(k)
    Kx = skew(k)
    return np.eye(3) + np.sin(angle) * Kx + (1.0 - np.cos(angle)) * (Kx @ Kx)


def rotation_angle(R) -> float:
    """Geodesic angle of a rotation matrix, in radians."""
    c = (np.trace(R) - 1.0) / 2.0
    # arccos is badly conditioned near 0; use the skew part as well
    s = np.linalg.norm([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]]) / 2.0
    return float(np.arctan2(s, c))


def look_at(center, target=(0.0, 0.0, 0.0)) -> np.ndarray:
    """World-to-camera rotation with the optical axis from ``center`` to ``target``.

    Image "up" is the world +z axis projected orthogonally to the optical axis,
    falling back to +y when the axis is within 1e-6 of +-z.
    """
    forward = np.asarray(target, dtype=float) - np.asarray(center, dtype=float)
    return look_along(forward)


def look_along(direction) -> np.ndarray:
    z_cam = np.asarray(direction, dtype=float)
    z_cam = z_cam / np.linalg.norm(z_cam)
    up = np.array([0.0, 0.0, 1.0])
    if 1.0 - abs(z_cam @ up) < 1e-6:
        up = np.array([0.0, 1.0, 0.0])
    up = up - (up @ z_cam) * z_cam
    up /= np.linalg.norm(up)
    y_cam = -up
    x_cam = np.cross(y_cam, z_cam)
    return np.vstack([x_cam, y_cam, z_cam])


@dataclass(frozen=True)
class Calibration:
    fx: float
    fy: float
    cx: float
    cy: float
    skew: float = 0.0

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")

    @property
    def K(self) -> np.ndarray:
        return np.array(
            [[self.fx, self.skew, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    @property
    def K_inv(self) -> np.ndarray:
        # closed-form inverse of an upper-triangular K
        fx, fy, s, cx, cy = self.fx, self.fy, self.skew, self.cx, self.cy
        return np.array(
            [
                [1.0 / fx, -s / (fx * fy), (s * cy - cx * fy) / (fx * fy)],
                [0.0, 1.0 / fy, -cy / fy],
                [0.0, 0.0, 1.0],
            ]
        )

    @classmethod
    def from_matrix(cls, K) -> "Calibration":
        K = np.asarray(K, dtype=float)
        K = K / K[2, 2]
        return cls(K[0, 0], K[1, 1], K[0, 2], K[1, 2], K[0, 1])


@dataclass(frozen=True, eq=False)
class Pose:
    rotation: np.ndarray
    center: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.array(self.rotation, dtype=float)
        c = np.array(self.center, dtype=float).reshape(3)
        if not is_rotation(R):
            raise ValueError("pose rotation is not a proper orthonormal matrix")
        if not np.all(np.isfinite(c)):
            raise ValueError("camera center must be finite")
        R.flags.writeable = False
        c.flags.writeable = False
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "center", c)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    @property
    def translation(self) -> np.ndarray:
        """``t = -R c``, the world origin expressed in the camera frame."""
        return -self.rotation @ self.center

    def to_camera(self, p) -> np.ndarray:
        return self.rotation @ (np.asarray(p, dtype=float) - self.center)


# calibration shared by every synthetic experiment
DEFAULT_CALIBRATION = Calibration(300.0, 300.0, 320.0, 240.0, 0.0)
DEFAULT_WIDTH = 640
DEFAULT_HEIGHT = 480


@dataclass(frozen=True, eq=False)
class Camera:
    calib: Calibration
    pose: Pose
    width: int = DEFAULT_WIDTH
    height: int = DEFAULT_HEIGHT

    def __post_init__(self):
        if int(self.width) <= 0 or int(self.height) <= 0:
            raise ValueError("image size must be positive")

    @property
    def center(self) -> np.ndarray:
        return self.pose.center

    @property
    def rotation(self) -> np.ndarray:
        return self.pose.rotation

    @property
    def P(self) -> np.ndarray:
        """3x4 camera matrix ``K [R | -R c]``."""
        R = self.pose.rotation
        return self.calib.K @ np.hstack([R, (-R @ self.pose.center)[:, None]])

    def depth(self, point) -> float:
        return float(self.pose.to_camera(point)[2])

    def with_pose(self, pose: Pose) -> "Camera":
        return Camera(self.calib, pose, self.width, self.height)


@dataclass(frozen=True, eq=False)
class Ray:
    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        o = np.array(self.origin, dtype=float).reshape(3)
        d = np.array(self.direction, dtype=float).reshape(3)
        n = np.linalg.norm(d)
        if not np.isfinite(n) or n == 0.0:
            raise ValueError("ray direction must be a nonzero finite vector")
        if abs(n - 1.0) > 1e-12:
            d = d / n
        o.flags.writeable = False
        d.flags.writeable = False
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "direction", d)

    def at(self, s: float) -> np.ndarray:
        return self.origin + s * self.direction

    def distance_to(self, point) -> float:
        v = np.asarray(point, dtype=float) - self.origin
        return float(np.linalg.norm(v - (v @ self.direction) * self.direction))


def project(camera: Camera, point) -> np.ndarray:
    """Pixel coordinates of ``point``; no clamping to the image bounds.

    Raises:
        CheiralityViolation: the point is not strictly in front of the camera.
    """
    x = camera.calib.K @ camera.pose.to_camera(point)
    if not x[2] > 0.0:
        raise CheiralityViolation(f"point {np.asarray(point).tolist()} has non-positive depth")
    return x[:2] / x[2]


def project_many(camera: Camera, points) -> np.ndarray:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    x = (points - camera.pose.center) @ (camera.calib.K @ camera.pose.rotation).T
    if np.any(~(x[:, 2] > 0.0)):
        raise CheiralityViolation("a point has non-positive depth")
    return x[:, :2] / x[:, 2:3]


def bearing(calib: Calibration, pixel) -> np.ndarray:
    """Unit camera-frame direction ``K^-1 [u, v, 1]`` (positive z)."""
    u, v = pixel
    b = calib.K_inv @ np.array([u, v, 1.0])
    return b / np.linalg.norm(b)


def line_of_sight(camera: Camera, pixel) -> Ray:
    """Ray from the camera center through ``pixel``, directed into the scene."""
    d = camera.pose.rotation.T @ bearing(camera.calib, pixel)
    return Ray(camera.pose.center, d)
