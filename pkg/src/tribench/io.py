"""Text file formats: cameras, correspondences, ground-truth points, trial CSV.

Cameras file, one camera per line::

    id fx fy cx cy skew width height r11 r12 r13 r21 r22 r23 r31 r32 r33 cx cy cz

(rotation row-major, world-to-camera; the trailing triple is the camera
center).  Correspondence file: ``point_id camera_id u v``.  Ground-truth
points: ``point_id x y z``.  Blank lines and ``#`` comments are ignored.
Floats are written with 17 significant digits so values round-trip exactly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputFormatError
from .geometry import Calibration, Camera, Pose

CSV_HEADER = ["experiment", "trial", "level", "method", "kind", "value", "converged", "notes"]


def fmt(x: float) -> str:
    return format(float(x), ".17g")


@dataclass(frozen=True)
class TrialRecord:
    experiment: str
    trial: int
    level: float
    method: str
    kind: str
    value: float
    converged: bool
    notes: str = ""

    def sort_key(self):
        return (self.experiment, self.level, self.trial, self.method)


@dataclass
class CorrespondenceSet:
    """Observations ``{point_id: {camera_id: (u, v)}}`` with their cameras.

    ``cameras`` holds the calibrated cameras from the cameras file; their
    poses are ground truth and only ever used for evaluation.
    """

    observations: dict
    cameras: dict
    gt_points: dict | None = None
    skipped: list = field(default_factory=list)

    def __post_init__(self):
        for pid, obs in self.observations.items():
            missing = [c for c in obs if c not in self.cameras]
            if missing:
                raise InputFormatError(f"point {pid} observed by unknown camera(s) {missing}")
            if len(obs) < 2:
                raise InputFormatError(f"point {pid} is observed by fewer than two cameras")

    @property
    def camera_ids(self) -> list:
        return sorted(self.cameras)

    def shared_points(self, camera_ids) -> list:
        ids = [pid for pid, obs in self.observations.items() if all(c in obs for c in camera_ids)]
        if self.gt_points is not None:
            ids = [pid for pid in ids if pid in self.gt_points]
        return sorted(ids)


def _lines(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise InputFormatError(f"not UTF-8 text: {exc}", path) from exc
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield n, line.split()


def _parse(path, n, tokens, width, kinds):
    if len(tokens) != width:
        raise InputFormatError(f"expected {width} fields, got {len(tokens)}", path, n)
    try:
        return [k(t) for k, t in zip(kinds, tokens)]
    except ValueError as exc:
        raise InputFormatError(str(exc), path, n) from exc


def read_cameras(path) -> dict:
    cams = {}
    for n, tok in _lines(path):
        v = _parse(path, n, tok, 20, [int] + [float] * 5 + [int, int] + [float] * 12)
        cid = v[0]
        if cid in cams:
            raise InputFormatError(f"duplicate camera id {cid}", path, n)
        try:
            calib = Calibration(v[1], v[2], v[3], v[4], v[5])
            pose = Pose(np.array(v[8:17]).reshape(3, 3), np.array(v[17:20]))
            cams[cid] = Camera(calib, pose, v[6], v[7])
        except ValueError as exc:
            raise InputFormatError(str(exc), path, n) from exc
    if not cams:
        raise InputFormatError("no cameras found", path)
    return cams


def read_observations(path) -> dict:
    obs: dict = {}
    for n, tok in _lines(path):
        pid, cid, u, v = _parse(path, n, tok, 4, [int, int, float, float])
        if cid in obs.setdefault(pid, {}):
            raise InputFormatError(f"point {pid} observed twice by camera {cid}", path, n)
        obs[pid][cid] = np.array([u, v])
    return obs


def read_points(path) -> dict:
    pts = {}
    for n, tok in _lines(path):
        pid, x, y, z = _parse(path, n, tok, 4, [int, float, float, float])
        pts[pid] = np.array([x, y, z])
    return pts


def load_correspondences(corr_path, cameras_path, points_path=None) -> CorrespondenceSet:
    cams = read_cameras(cameras_path)
    obs = read_observations(corr_path)
    gt = read_points(points_path) if points_path is not None else None
    return CorrespondenceSet(obs, cams, gt)


def write_cameras(path, cameras: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for cid in sorted(cameras):
            cam = cameras[cid]
            k = cam.calib
            vals = [k.fx, k.fy, k.cx, k.cy, k.skew]
            fields = [str(cid)] + [fmt(x) for x in vals] + [str(int(cam.width)), str(int(cam.height))]
            fields += [fmt(x) for x in cam.pose.rotation.reshape(-1)]
            fields += [fmt(x) for x in cam.pose.center]
            fh.write(" ".join(fields) + "\n")


def write_observations(path, observations: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for pid in sorted(observations):
            for cid in sorted(observations[pid]):
                u, v = observations[pid][cid]
                fh.write(f"{pid} {cid} {fmt(u)} {fmt(v)}\n")


def write_points(path, points: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for pid in sorted(points):
            fh.write(f"{pid} " + " ".join(fmt(x) for x in points[pid]) + "\n")


def export_scene(directory, cameras, pixels, points) -> tuple[Path, Path, Path]:
    """Write a synthetic scene in the correspondence-file formats.

    ``pixels[k][i]`` is point ``i`` as seen by camera ``k``; camera and point
    ids are their list indices.
    """
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    cam_path, corr_path, pts_path = d / "cameras.txt", d / "correspondences.txt", d / "points.txt"
    write_cameras(cam_path, dict(enumerate(cameras)))
    obs = {i: {k: pixels[k][i] for k in range(len(cameras))} for i in range(len(points))}
    write_observations(corr_path, obs)
    write_points(pts_path, dict(enumerate(np.asarray(points))))
    return cam_path, corr_path, pts_path


def write_csv(records, path) -> Path:
    """Write trial records sorted by (experiment, level, trial, method)."""
    path = Path(path)
    rows = sorted(records, key=TrialRecord.sort_key)
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for r in rows:
                w.writerow([r.experiment, r.trial, fmt(r.level), r.method, r.kind,
                            fmt(r.value), int(bool(r.converged)), r.notes])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def read_csv(path) -> list[TrialRecord]:
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        if header != CSV_HEADER:
            raise InputFormatError(f"unexpected CSV header {header}", path)
        for row in rd:
            out.append(TrialRecord(row[0], int(row[1]), float(row[2]), row[3], row[4],
                                   float(row[5]), bool(int(row[6])), row[7]))
    return out
