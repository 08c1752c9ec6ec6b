import numpy as np
import pytest

from tribench.geometry import DEFAULT_CALIBRATION, Pose, is_rotation, project_many
from tribench.synthdata import (
    NoiseSpec,
    Scene,
    make_box_scene,
    make_conf,
    perturb_pixels,
    perturb_pose,
    rng_for,
    sample_sphere_points,
)


def test_conf_centers():
    np.testing.assert_array_equal([c.center for c in make_conf(1)], [[-5, -1, 0], [-5, 1, 0]])
    np.testing.assert_array_equal([c.center for c in make_conf(2)], [[-12, 0, 0], [-2, 0, 0]])
    np.testing.assert_array_equal([c.center for c in make_conf(3)], [[-10, 2, -1], [-5, -2, 1]])


@pytest.mark.parametrize("conf", [1, 2, 3])
def test_conf_cameras(conf):
    for cam in make_conf(conf):
        assert cam.calib == DEFAULT_CALIBRATION
        assert (cam.width, cam.height) == (640, 480)
        if conf in (1, 2):
            axis = -cam.center / np.linalg.norm(cam.center)
        else:
            axis = np.array([1.0, 0.0, 0.0])
        np.testing.assert_allclose(cam.rotation[2], axis, atol=1e-15)


def test_conf2_axes_along_x():
    for cam in make_conf(2):
        np.testing.assert_allclose(cam.rotation[2], [1, 0, 0], atol=1e-15)


def test_bad_conf():
    with pytest.raises(ValueError):
        make_conf(4)


def test_box_scene():
    s = make_box_scene(0, 3, 20)
    np.testing.assert_array_equal([c.center for c in s.cameras],
                                  [[-7, 3, 0], [-10, -3, 1], [-8, 0, -2]])
    assert s.points.shape == (20, 3)
    assert np.all(np.abs(s.points) <= [1.5, 4, 3])
    for cam in s.cameras:
        np.testing.assert_allclose(cam.rotation[2], -cam.center / np.linalg.norm(cam.center), atol=1e-15)


def test_box_scene_deterministic():
    a, b = make_box_scene(42, 2), make_box_scene(42, 2)
    assert a.points.tobytes() == b.points.tobytes()
    assert make_box_scene(43, 2).points.tobytes() != a.points.tobytes()


def test_scene_visibility():
    for seed in range(20):
        s = make_box_scene(seed, 3)
        for cam in s.cameras:
            project_many(cam, s.points)  # raises on non-positive depth
    cams = make_conf(1)
    with pytest.raises(ValueError):
        Scene(cams, np.array([[-6.0, 0.0, 0.0]]))


@pytest.mark.parametrize("conf", [1, 2, 3])
def test_sphere_points_visible_in_confs(conf):
    pts = sample_sphere_points(0, 1000)
    for cam in make_conf(conf):
        project_many(cam, pts)


def test_sphere_points():
    pts = sample_sphere_points(1, 100_000)
    r = np.linalg.norm(pts, axis=1)
    assert r.max() <= 0.25
    assert np.linalg.norm(pts.mean(axis=0)) < 0.01
    # uniform in the ball: P(r < 0.125) = 1/8
    assert np.mean(r < 0.125) == pytest.approx(0.125, abs=0.005)
    assert sample_sphere_points(1, 10).tobytes() == sample_sphere_points(1, 10).tobytes()
    with pytest.raises(ValueError):
        sample_sphere_points(0, 0)


def test_perturb_pose_level_zero():
    pose = make_conf(3)[0].pose
    out = perturb_pose(pose, NoiseSpec(level=0.0), rng_for(0))
    assert out is pose


def test_perturb_pose_statistics():
    pose = Pose(np.eye(3), np.zeros(3))
    rng = rng_for(9)
    noise = NoiseSpec(0.01, 0.1, 0.0, 1.0)
    centers, angles = [], []
    for _ in range(100_000):
        p = perturb_pose(pose, noise, rng)
        centers.append(p.center)
        R = p.rotation
        angles.append(np.arccos(np.clip((np.trace(R) - 1) / 2, -1, 1)))
    centers = np.array(centers)
    assert np.allclose(centers.std(axis=0), 0.01, rtol=0.02)
    # |angle| of a N(0, 0.1 deg) draw has rms 0.1 deg
    rms = np.sqrt(np.mean(np.square(angles)))
    assert np.rad2deg(rms) == pytest.approx(0.1, rel=0.02)
    assert is_rotation(R)


def test_perturb_pose_scales_with_level():
    pose = Pose(np.eye(3), np.zeros(3))
    a = perturb_pose(pose, NoiseSpec(level=1.0), rng_for(3, 1))
    b = perturb_pose(pose, NoiseSpec(level=5.0), rng_for(3, 1))
    np.testing.assert_allclose(b.center, 5 * a.center, rtol=1e-12)


def test_perturb_pixels():
    px = np.random.default_rng(0).uniform(0, 640, (50_000, 2))
    assert np.array_equal(perturb_pixels(px, 0.0, rng_for(1)), px)
    out = perturb_pixels(px, 1.0, rng_for(1))
    assert (out - px).std() == pytest.approx(1.0, rel=0.02)
    # no clipping to the image
    edge = np.array([[0.0, 0.0]] * 1000)
    assert np.any(perturb_pixels(edge, 1.0, rng_for(2)) < 0)


def test_noise_spec_validation():
    with pytest.raises(ValueError):
        NoiseSpec(sigma_center=-1)
    with pytest.raises(ValueError):
        NoiseSpec(level=-0.5)


def test_rng_streams_independent_and_reproducible():
    a = rng_for(5, 1, 2).standard_normal(4)
    assert np.array_equal(a, rng_for(5, 1, 2).standard_normal(4))
    assert not np.array_equal(a, rng_for(5, 2, 1).standard_normal(4))
    assert not np.array_equal(a, rng_for(6, 1, 2).standard_normal(4))
    assert isinstance(rng_for(0).bit_generator, np.random.Philox)
