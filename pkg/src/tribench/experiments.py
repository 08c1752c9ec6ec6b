"""Monte-Carlo experiments: pose-noise sensitivity and full reconstruction.

Each trial is an independent task with its own random stream (see
:func:`tribench.synthdata.rng_for`), so running trials in parallel or in a
different order yields bit-identical records.
"""

from __future__ import annotations

import hashlib
import itertools
import logging
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import triangulation as tri
from .errors import DegenerateConfiguration, TriBenchError
from .geometry import Camera, Pose, bearing, line_of_sight, project_many
from .io import CorrespondenceSet, TrialRecord
from .metrics import aggregate, angle_error, distance_error, fit_similarity, position_error
from .relpose import relative_pose
from .synthdata import (
    NoiseSpec,
    make_box_scene,
    make_conf,
    perturb_camera,
    perturb_pixels,
    rng_for,
    sample_sphere_points,
)
from .viewgraph import GlobalPoses, ViewingGraph, solve_viewing_graph

log = logging.getLogger(__name__)

KINDS = ("position", "distance", "angle")
POINTS_PER_KIND = {"position": 1, "distance": 2, "angle": 3}
MIN_SHARED = 8
# configuration notes carried in every record of that configuration
CONF_NOTES = {3: "conf3 optical axes along +x"}


def _rays(cameras, pixels):
    return [line_of_sight(c, u) for c, u in zip(cameras, pixels)]


def _two(cameras):
    if len(cameras) != 2:
        raise ValueError(f"two-view method called with {len(cameras)} cameras")


def _m_midpoint(cameras, pixels):
    return tri.midpoint(_rays(cameras, pixels))


def _m_midpoint_irls(cameras, pixels):
    return tri.midpoint_irls(_rays(cameras, pixels))


def _m_l2(cameras, pixels):
    _two(cameras)
    return tri.l2_twoview(cameras[0], cameras[1], pixels[0], pixels[1])


def _m_l1(cameras, pixels):
    _two(cameras)
    return tri.l1_twoview(cameras[0], cameras[1], pixels[0], pixels[1])


def _m_angular_l1(cameras, pixels):
    _two(cameras)
    return tri.angular_l1_twoview(*_rays(cameras, pixels))


def _m_angular_l2(cameras, pixels):
    _two(cameras)
    return tri.angular_l2_twoview(*_rays(cameras, pixels))


def _m_l2_refine(cameras, pixels):
    return tri.l2_multiview_refine(cameras, pixels)


def _m_l1_irls(cameras, pixels):
    return tri.l1_multiview_irls(cameras, pixels)


# name -> (callable(cameras, pixels) -> TriangulationResult, two_view_only)
METHODS = {
    "midpoint": (_m_midpoint, False),
    "midpoint-irls": (_m_midpoint_irls, False),
    "l2": (_m_l2, True),
    "l1": (_m_l1, True),
    "angular-l1": (_m_angular_l1, True),
    "angular-l2": (_m_angular_l2, True),
    "l2-refine": (_m_l2_refine, False),
    "l1-irls": (_m_l1_irls, False),
}
TWO_VIEW_METHODS = ("midpoint", "midpoint-irls", "l2", "l1", "angular-l1", "angular-l2")
MULTI_VIEW_METHODS = ("midpoint", "midpoint-irls", "l2-refine", "l1-irls")

# labels attached to records of methods whose construction is our own choice
METHOD_NOTES = {
    "midpoint-irls": "weights 1/depth^2",
    "l2-refine": "damped Gauss-Newton from mid-point",
    "l1-irls": "IRLS from mid-point",
}


def default_methods(n_views: int) -> tuple:
    return TWO_VIEW_METHODS if n_views == 2 else MULTI_VIEW_METHODS


def check_methods(methods, n_views: int) -> tuple:
    methods = tuple(methods)
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}; choose from {sorted(METHODS)}")
        if METHODS[m][1] and n_views != 2:
            raise ValueError(f"method {m!r} is two-view only")
    return methods


def triangulate(method: str, cameras, pixels) -> tri.TriangulationResult:
    return METHODS[method][0](cameras, pixels)


def _failure(exp, trial, level, method, kind, exc) -> TrialRecord:
    return TrialRecord(exp, trial, level, method, kind, float("nan"), False,
                       f"failed: {type(exc).__name__}: {exc}")


def _notes(method, *extra) -> str:
    parts = [METHOD_NOTES[method]] if method in METHOD_NOTES else []
    parts += [e for e in extra if e]
    return "; ".join(parts)


def _map(fn, tasks, jobs):
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


def _guarded(fn, task, exp, trial, level, methods, kind):
    """Run one trial; any exception becomes failure records for that trial only."""
    try:
        return fn(task)
    except Exception as exc:  # noqa: BLE001 - isolate the trial, keep the suite running
        log.warning("%s trial %d level %s failed: %s", exp, trial, level, exc)
        return [_failure(exp, trial, level, m, kind, exc) for m in methods]


# ---------------------------------------------------------------------------
# Sensitivity to camera pose noise
# ---------------------------------------------------------------------------


def sensitivity_experiment_id(conf: int, kind: str) -> str:
    return f"sensitivity-conf{conf}-{kind}"


def _level_key(level: float) -> int:
    return int(round(float(level) * 1_000_000))


def _kind_error(kind, est, gt) -> float:
    if kind == "position":
        return position_error(est[0], gt[0])
    if kind == "distance":
        return distance_error(est[0], est[1], gt[0], gt[1])
    return angle_error(est[0], est[1], est[2], gt[0], gt[1], gt[2])


def sensitivity_trial(task) -> list[TrialRecord]:
    conf, kind, level, trial, methods, seed, noise, align = task
    exp = sensitivity_experiment_id(conf, kind)
    rng = rng_for(seed, 100 + 10 * conf + KINDS.index(kind), _level_key(level), trial)
    cams = make_conf(conf)
    pts = sample_sphere_points(None, POINTS_PER_KIND[kind], rng=rng)
    pixels = [perturb_pixels(project_many(c, pts), noise.sigma_pixel, rng) for c in cams]
    level_noise = NoiseSpec(noise.sigma_center, noise.sigma_angle, noise.sigma_pixel, level)
    noisy_cams = [perturb_camera(c, level_noise, rng) for c in cams]
    out = []
    for m in methods:
        try:
            results = [triangulate(m, noisy_cams, [px[k] for px in pixels]) for k in range(len(pts))]
            est = np.array([r.point for r in results])
            if align:
                est = fit_similarity(est, pts).apply(est) if len(pts) >= 3 else est
            value = _kind_error(kind, est, pts)
            conv = all(r.converged for r in results) and bool(np.isfinite(value))
            out.append(TrialRecord(exp, trial, float(level), m, kind, value, conv,
                                   _notes(m, CONF_NOTES.get(conf))))
        except Exception as exc:  # noqa: BLE001 - a failed method must not abort the trial
            out.append(_failure(exp, trial, float(level), m, kind, exc))
    return out


def run_sensitivity(conf: int, kind: str, levels, trials: int = 100, methods=None, seed: int = 0,
                    noise: NoiseSpec | None = None, align: bool = False, jobs: int = 1) -> list[TrialRecord]:
    """Pose-noise sensitivity of each method for one configuration and error kind.

    Per trial, 1/2/3 points are drawn in the sphere, projected with the true
    cameras, both camera poses are perturbed at the given level, and every
    method triangulates the unperturbed pixels with the perturbed cameras.
    Errors are computed in the world frame unless ``align`` is set.
    """
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    make_conf(conf)
    methods = check_methods(methods or TWO_VIEW_METHODS, 2)
    noise = noise or NoiseSpec()
    exp = sensitivity_experiment_id(conf, kind)
    tasks = [(conf, kind, float(lv), t, methods, seed, noise, align) for lv in levels for t in range(trials)]
    fn = _SensitivityRunner(exp, methods, kind)
    return [r for batch in _map(fn, tasks, jobs) for r in batch]


class _SensitivityRunner:
    def __init__(self, exp, methods, kind):
        self.exp, self.methods, self.kind = exp, methods, kind

    def __call__(self, task):
        return _guarded(sensitivity_trial, task, self.exp, task[3], task[2], self.methods, self.kind)


# ---------------------------------------------------------------------------
# Full reconstruction
# ---------------------------------------------------------------------------


def _pose_digest(poses: GlobalPoses) -> str:
    h = hashlib.sha256()
    for R, c in zip(poses.rotations, poses.centers):
        h.update(np.ascontiguousarray(R, dtype=float).tobytes())
        h.update(np.ascontiguousarray(c, dtype=float).tobytes())
    return h.hexdigest()[:12]


def estimate_poses(cs: CorrespondenceSet, camera_ids=None, point_ids=None) -> GlobalPoses:
    """Camera poses (gauge-fixed frame) from pairwise essential matrices.

    Two cameras use the selected relative pose directly; more cameras build
    and solve a viewing graph over every pair with at least eight shared
    points.  Ground-truth poses in ``cs`` are never used.
    """
    ids = list(camera_ids if camera_ids is not None else cs.camera_ids)
    allowed = None if point_ids is None else set(point_ids)
    graph = ViewingGraph(len(ids))
    for a, b in itertools.combinations(range(len(ids)), 2):
        ca, cb = ids[a], ids[b]
        shared = [p for p in cs.shared_points([ca, cb]) if allowed is None or p in allowed]
        if len(shared) < MIN_SHARED:
            log.info("pair %s-%s: %d shared points, skipped", ca, cb, len(shared))
            continue
        Ka, Kb = cs.cameras[ca].calib, cs.cameras[cb].calib
        b1 = np.array([bearing(Ka, cs.observations[p][ca]) for p in shared])
        b2 = np.array([bearing(Kb, cs.observations[p][cb]) for p in shared])
        try:
            graph.add_edge(a, b, relative_pose(b1, b2))
        except TriBenchError as exc:
            raise type(exc)(f"camera pair {ca}-{cb}: {exc}") from exc
    if len(ids) == 2:
        if not graph.edges:
            raise DegenerateConfiguration(f"camera pair {ids[0]}-{ids[1]}: fewer than {MIN_SHARED} shared points")
        pose = graph.edges[0][2]
        return GlobalPoses([np.eye(3), pose.rotation], [np.zeros(3), pose.direction.copy()])
    return solve_viewing_graph(graph)


def reconstruct(cs: CorrespondenceSet, method: str, camera_ids=None, point_ids=None, poses=None):
    """Poses and triangulated points ``{point_id: xyz}`` in the gauge frame.

    Calibrations come from ``cs.cameras``.  Pass precomputed ``poses`` to
    share one pose estimate between several methods.
    """
    ids = list(camera_ids if camera_ids is not None else cs.camera_ids)
    if poses is None:
        poses = estimate_poses(cs, ids, point_ids)
    cams = [Camera(cs.cameras[c].calib, Pose(R, ctr), cs.cameras[c].width, cs.cameras[c].height)
            for c, R, ctr in zip(ids, poses.rotations, poses.centers)]
    pids = cs.shared_points(ids) if point_ids is None else list(point_ids)
    points, results = {}, {}
    for pid in pids:
        obs = cs.observations[pid]
        use = [k for k, c in enumerate(ids) if c in obs]
        try:
            r = triangulate(method, [cams[k] for k in use], [obs[ids[k]] for k in use])
        except TriBenchError as exc:
            raise type(exc)(f"point {pid}: {exc}") from exc
        points[pid] = r.point
        results[pid] = r
    return poses, points, results


def evaluate_reconstruction(cs: CorrespondenceSet, methods, camera_ids, point_ids):
    """Per-method (per-point aligned errors, all converged, notes)."""
    poses = estimate_poses(cs, camera_ids, point_ids)
    digest = _pose_digest(poses)
    gt = np.array([cs.gt_points[p] for p in point_ids])
    out = {}
    for m in methods:
        try:
            _, pts, res = reconstruct(cs, m, camera_ids, point_ids, poses=poses)
            est = np.array([pts[p] for p in point_ids])
            aligned = fit_similarity(est, gt).apply(est)
            errs = np.linalg.norm(aligned - gt, axis=1)
            conv = all(r.converged for r in res.values())
            out[m] = (errs, conv, _notes(m, f"pose={digest}", f"std={errs.std():.6g}"))
        except Exception as exc:  # noqa: BLE001
            out[m] = exc
    return out


def _records_from_eval(exp, trial, level, evals):
    recs = []
    for m, item in evals.items():
        if isinstance(item, Exception):
            recs.append(_failure(exp, trial, level, m, "aligned-3d", item))
            continue
        errs, conv, notes = item
        value = float(errs.mean())
        recs.append(TrialRecord(exp, trial, level, m, "aligned-3d", value,
                                conv and bool(np.isfinite(value)), notes))
    return recs


def synth_trial_data(n_cameras: int, trial: int, seed: int, pixel_noise: float = 1.0, n_points: int = 20):
    """The scene and noisy measurements of one reconstruction trial."""
    rng = rng_for(seed, 200 + n_cameras, trial)
    scene = make_box_scene(None, n_cameras, n_points, rng=rng)
    pixels = [perturb_pixels(project_many(c, scene.points), pixel_noise, rng) for c in scene.cameras]
    return scene, pixels


def sfm_synth_trial(task) -> list[TrialRecord]:
    n_cameras, trial, seed, pixel_noise, methods = task
    scene, pixels = synth_trial_data(n_cameras, trial, seed, pixel_noise)
    obs = {i: {k: pixels[k][i] for k in range(n_cameras)} for i in range(len(scene.points))}
    cs = CorrespondenceSet(obs, dict(enumerate(scene.cameras)), dict(enumerate(scene.points)))
    ids = list(range(n_cameras))
    evals = evaluate_reconstruction(cs, methods, ids, list(range(len(scene.points))))
    return _records_from_eval(f"sfm-synth-{n_cameras}cam", trial, float(pixel_noise), evals)


class _SfmRunner:
    def __init__(self, exp, methods):
        self.exp, self.methods = exp, methods

    def __call__(self, task):
        return _guarded(sfm_synth_trial, task, self.exp, task[1], float(task[3]), self.methods, "aligned-3d")


def run_sfm_synth(n_cameras: int = 2, trials: int = 100, methods=None, seed: int = 0,
                  pixel_noise: float = 1.0, jobs: int = 1) -> list[TrialRecord]:
    """Full synthetic reconstruction: box scene, pixel noise, essential
    matrices, (viewing graph,) triangulation, similarity alignment.  One
    record per (trial, method) holding the mean aligned 3D point error."""
    if n_cameras not in (2, 3):
        raise ValueError("n_cameras must be 2 or 3")
    methods = check_methods(methods or default_methods(n_cameras), n_cameras)
    tasks = [(n_cameras, t, seed, float(pixel_noise), methods) for t in range(trials)]
    runner = _SfmRunner(f"sfm-synth-{n_cameras}cam", methods)
    return [r for batch in _map(runner, tasks, jobs) for r in batch]


def run_sfm_real(cs: CorrespondenceSet, n_view: int = 2, points_per_run: int = 20, runs: int = 10,
                 seed: int = 0, methods=None) -> list[TrialRecord]:
    """Reconstruction on ingested correspondences, for every camera pair or triple.

    Combinations with fewer than eight shared points are skipped (and listed
    in ``cs.skipped``).  Each run samples ``points_per_run`` shared points
    without replacement; trial index is ``combination * runs + run``.
    """
    if n_view not in (2, 3):
        raise ValueError("n_view must be 2 or 3")
    if cs.gt_points is None:
        raise ValueError("ground-truth points are required for evaluation")
    methods = check_methods(methods or default_methods(n_view), n_view)
    exp = f"sfm-real-{n_view}view"
    records = []
    for ci, combo in enumerate(itertools.combinations(cs.camera_ids, n_view)):
        shared = cs.shared_points(combo)
        tag = "-".join(str(c) for c in combo)
        if len(shared) < MIN_SHARED:
            log.info("cameras %s: %d shared points, skipped", tag, len(shared))
            cs.skipped.append((combo, len(shared)))
            continue
        if points_per_run > len(shared):
            raise ValueError(f"cameras {tag}: {points_per_run} points requested, {len(shared)} available")
        for run in range(runs):
            rng = rng_for(seed, 300 + n_view, ci, run)
            sample = sorted(int(p) for p in rng.choice(shared, size=points_per_run, replace=False))
            trial = ci * runs + run
            try:
                evals = evaluate_reconstruction(cs, methods, list(combo), sample)
            except Exception as exc:  # noqa: BLE001
                log.warning("cameras %s run %d failed: %s", tag, run, exc)
                records += [_failure(exp, trial, 0.0, m, "aligned-3d", exc) for m in methods]
                continue
            for r in _records_from_eval(exp, trial, 0.0, evals):
                records.append(TrialRecord(r.experiment, r.trial, r.level, r.method, r.kind, r.value,
                                           r.converged, "; ".join(filter(None, [f"cameras={tag}", r.notes]))))
    return records


# ---------------------------------------------------------------------------
# Summaries
# ---------------------------------------------------------------------------


def summarize(records):
    """``{(experiment, level, method): ErrorStats}`` over successful records."""
    groups: dict = {}
    for r in records:
        if r.converged and np.isfinite(r.value):
            groups.setdefault((r.experiment, r.level, r.method), []).append(r.value)
    return {k: aggregate(v) for k, v in sorted(groups.items())}


def mean_by_method(records, level=None) -> dict:
    """Mean value per method, optionally restricted to one level."""
    vals: dict = {}
    for r in records:
        if level is not None and r.level != level:
            continue
        if np.isfinite(r.value):
            vals.setdefault(r.method, []).append(r.value)
    return {m: float(np.mean(v)) for m, v in vals.items()}
