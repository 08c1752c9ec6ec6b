"""Scene and instance builders shared by the test modules."""

from __future__ import annotations

import numpy as np

from tribench.geometry import DEFAULT_CALIBRATION, Camera, Pose, line_of_sight, look_at, project
from tribench.synthdata import BOX_HALF_EXTENT, box_cameras, make_conf, sample_sphere_points

CONFIGS = ("conf1", "conf2", "conf3", "box")


def config_cameras(name):
    if name == "box":
        return box_cameras(2)
    return make_conf(int(name[-1]))


def config_point(name, rng):
    if name == "box":
        return rng.uniform(-BOX_HALF_EXTENT, BOX_HALF_EXTENT)
    return sample_sphere_points(None, 1, rng=rng)[0]


def noisy_instance(name, rng, sigma=2.0):
    """Cameras, ground-truth point and pixel-noisy measurements."""
    cams = config_cameras(name)
    p = config_point(name, rng)
    pixels = [project(c, p) + rng.normal(0.0, sigma, 2) for c in cams]
    return cams, p, pixels


def random_rotation(rng):
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def camera_looking_at(center, target=(0.0, 0.0, 0.0)):
    return Camera(DEFAULT_CALIBRATION, Pose(look_at(center, target), np.asarray(center, float)))


def random_cameras(rng, n, radius=6.0):
    """``n`` cameras on a sphere around the origin, each aimed near the origin."""
    cams = []
    for _ in range(n):
        d = rng.normal(size=3)
        d /= np.linalg.norm(d)
        cams.append(camera_looking_at(radius * d, rng.normal(0.0, 0.2, 3)))
    return cams


def rays_for(cameras, pixels):
    return [line_of_sight(c, u) for c, u in zip(cameras, pixels)]


def rigid_transform_camera(camera, G, t):
    """The same physical camera after moving the world by ``x -> G x + t``."""
    pose = Pose(camera.rotation @ G.T, G @ camera.center + t)
    return camera.with_pose(pose)
