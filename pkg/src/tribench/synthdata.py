"""Seeded synthetic scenes, camera configurations and noise processes.

Random streams come from numpy's counter-based Philox generator keyed by a
``SeedSequence(seed, spawn_key=keys)``; :func:`rng_for` documents the key
layout.  Any trial can therefore be regenerated on its own, in any order or
process, with bit-identical results.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    DEFAULT_CALIBRATION,
    DEFAULT_HEIGHT,
    DEFAULT_WIDTH,
    Camera,
    Pose,
    axis_angle,
    look_along,
    look_at,
)

CONF_CENTERS = {
    1: ([-5.0, -1.0, 0.0], [-5.0, 1.0, 0.0]),
    2: ([-12.0, 0.0, 0.0], [-2.0, 0.0, 0.0]),
    3: ([-10.0, 2.0, -1.0], [-5.0, -2.0, 1.0]),
}
BOX_CENTERS = ([-7.0, 3.0, 0.0], [-10.0, -3.0, 1.0], [-8.0, 0.0, -2.0])
BOX_HALF_EXTENT = np.array([1.5, 4.0, 3.0])
SPHERE_DIAMETER = 0.5


def rng_for(seed: int, *keys: int) -> np.random.Generator:
    """Independent Philox stream for ``(seed, *keys)``.

    Experiments key streams as ``(experiment_code, level_index, trial)``
    and derive per-camera sub-streams by appending the camera index.
    """
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class NoiseSpec:
    sigma_center: float = 0.01
    sigma_angle: float = 0.1  # degrees
    sigma_pixel: float = 0.0
    level: float = 1.0

    def __post_init__(self):
        if min(self.sigma_center, self.sigma_angle, self.sigma_pixel, self.level) < 0:
            raise ValueError("noise parameters must be non-negative")


@dataclass(frozen=True, eq=False)
class Scene:
    cameras: list
    points: np.ndarray
    label: str = ""
    notes: tuple = field(default=())

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        for cam in self.cameras:
            if np.any(((pts - cam.center) @ cam.rotation.T)[:, 2] <= 0):
                raise ValueError("scene point behind a camera")


def _camera(center, rotation) -> Camera:
    return Camera(DEFAULT_CALIBRATION, Pose(rotation, center), DEFAULT_WIDTH, DEFAULT_HEIGHT)


def make_conf(conf: int) -> list[Camera]:
    """Camera pair of sensitivity configuration 1, 2 or 3.

    Configurations 1 and 2 look at the origin.  In configuration 3 both
    optical axes point along +x.
    """
    if conf not in CONF_CENTERS:
        raise ValueError(f"configuration must be 1, 2 or 3, got {conf}")
    centers = [np.array(c) for c in CONF_CENTERS[conf]]
    if conf == 3:
        return [_camera(c, look_along([1.0, 0.0, 0.0])) for c in centers]
    return [_camera(c, look_at(c)) for c in centers]


def box_cameras(n_cameras: int = 2) -> list[Camera]:
    if n_cameras not in (2, 3):
        raise ValueError("box scene supports 2 or 3 cameras")
    return [_camera(np.array(c), look_at(c)) for c in BOX_CENTERS[:n_cameras]]


def make_box_scene(seed, n_cameras: int = 2, n_points: int = 20, rng=None) -> Scene:
    """Cameras around a 3x8x6 box centered at the origin; points uniform in the box."""
    rng = rng if rng is not None else rng_for(seed)
    cams = box_cameras(n_cameras)
    pts = rng.uniform(-BOX_HALF_EXTENT, BOX_HALF_EXTENT, size=(n_points, 3))
    return Scene(cams, pts, f"box-{n_cameras}cam")


def sample_sphere_points(seed, n: int, diameter: float = SPHERE_DIAMETER, rng=None) -> np.ndarray:
    """``n`` points uniform in the ball of the given diameter about the origin."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = rng if rng is not None else rng_for(seed)
    v = rng.standard_normal((n, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    r = (diameter / 2.0) * rng.uniform(size=(n, 1)) ** (1.0 / 3.0)
    return v * r


def perturb_pose(pose: Pose, noise: NoiseSpec, rng) -> Pose:
    """Gaussian jitter of the center and a rotation about a random axis.

    The rotation noise is applied on the left, i.e. in the camera frame.
    Random draws happen even at level 0 so streams stay aligned across levels.
    """
    dc = rng.standard_normal(3) * (noise.sigma_center * noise.level)
    axis = rng.standard_normal(3)
    angle = np.deg2rad(rng.standard_normal() * noise.sigma_angle * noise.level)
    if noise.level == 0:
        return pose
    axis /= np.linalg.norm(axis)
    return Pose(axis_angle(axis, angle) @ pose.rotation, pose.center + dc)


def perturb_camera(camera: Camera, noise: NoiseSpec, rng) -> Camera:
    return camera.with_pose(perturb_pose(camera.pose, noise, rng))


def perturb_pixels(pixels, sigma_pixel: float, rng) -> np.ndarray:
    """IID Gaussian noise on every coordinate; no clipping to the image."""
    px = np.asarray(pixels, dtype=float)
    noise = rng.standard_normal(px.shape) * sigma_pixel
    if sigma_pixel == 0:
        return px.copy()
    return px + noise
