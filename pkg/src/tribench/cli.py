"""Command-line entry point.

Exit codes: 0 success, 2 input-format error, 3 degenerate-geometry abort,
4 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import experiments as ex
from .errors import DegenerateError, InputFormatError
from .io import load_correspondences, read_cameras, read_observations, write_csv
from .synthdata import NoiseSpec

EXIT_OK, EXIT_FORMAT, EXIT_DEGENERATE, EXIT_IO = 0, 2, 3, 4


def parse_levels(text: str) -> list[float]:
    """``a:b`` (inclusive integer range), ``a:b:step`` or a comma list."""
    try:
        if ":" in text:
            parts = [float(p) for p in text.split(":")]
            if len(parts) == 2:
                parts.append(1.0)
            a, b, step = parts
            if step <= 0:
                raise ValueError
            n = int(np.floor((b - a) / step + 1e-9)) + 1
            return [a + k * step for k in range(n)]
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad level specification {text!r}") from None


def parse_methods(text: str) -> tuple:
    return tuple(m.strip() for m in text.split(",") if m.strip())


def _print_summary(records, out=sys.stdout):
    summary = ex.summarize(records)
    failed = sum(1 for r in records if not np.isfinite(r.value))
    print(f"{'experiment':<28} {'level':>6} {'method':<14} {'n':>4} {'mean':>12} {'std':>12} "
          f"{'median':>12} {'min':>12} {'max':>12}", file=out)
    for (exp, level, method), s in summary.items():
        print(f"{exp:<28} {level:>6g} {method:<14} {s.count:>4d} {s.mean:>12.6g} {s.std:>12.6g} "
              f"{s.median:>12.6g} {s.min:>12.6g} {s.max:>12.6g}", file=out)
    if failed:
        print(f"{failed} record(s) failed; see the notes column", file=out)


def _finish(records, path):
    write_csv(records, path)
    _print_summary(records)
    print(f"wrote {len(records)} records to {path}")


def cmd_sensitivity(args):
    noise = NoiseSpec(args.sigma_center, args.sigma_angle, args.pixel_noise)
    recs = ex.run_sensitivity(args.conf, args.kind, args.levels, args.trials,
                              args.methods or None, args.seed, noise, args.align, args.jobs)
    _finish(recs, args.out)


def cmd_sfm_synth(args):
    recs = ex.run_sfm_synth(args.cameras, args.trials, args.methods or None, args.seed,
                            args.pixel_noise, args.jobs)
    _finish(recs, args.out)


def cmd_sfm_real(args):
    cs = load_correspondences(args.correspondences, args.cameras_file, args.gt_points)
    recs = ex.run_sfm_real(cs, args.views, args.points_per_run, args.runs, args.seed,
                           args.methods or None)
    for combo, n in cs.skipped:
        print(f"skipped cameras {'-'.join(map(str, combo))}: {n} shared points", file=sys.stderr)
    _finish(recs, args.out)


def cmd_triangulate(args):
    cams = read_cameras(args.cameras_file)
    obs = read_observations(args.observations)
    for pid in sorted(obs):
        ids = sorted(obs[pid])
        missing = [c for c in ids if c not in cams]
        if missing:
            raise InputFormatError(f"point {pid} refers to unknown camera(s) {missing}", args.observations)
        if len(ids) < 2:
            raise InputFormatError(f"point {pid} has fewer than two observations", args.observations)
        ex.check_methods([args.method], len(ids))
        r = ex.triangulate(args.method, [cams[c] for c in ids], [obs[pid][c] for c in ids])
        x, y, z = r.point
        print(f"{pid} {x:.17g} {y:.17g} {z:.17g}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tribench", description="Triangulation benchmark harness")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sensitivity", help="camera-pose noise sensitivity")
    s.add_argument("--conf", type=int, choices=(1, 2, 3), required=True)
    s.add_argument("--kind", choices=ex.KINDS, required=True)
    s.add_argument("--levels", type=parse_levels, default=parse_levels("1:10"))
    s.add_argument("--trials", type=int, default=100)
    s.add_argument("--methods", type=parse_methods, default=())
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--sigma-center", type=float, default=0.01)
    s.add_argument("--sigma-angle", type=float, default=0.1, help="degrees at level 1")
    s.add_argument("--pixel-noise", type=float, default=0.0)
    s.add_argument("--align", action="store_true", help="similarity-align before scoring")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sensitivity)

    s = sub.add_parser("sfm-synth", help="full synthetic reconstruction")
    s.add_argument("--cameras", type=int, choices=(2, 3), default=2)
    s.add_argument("--trials", type=int, default=100)
    s.add_argument("--pixel-noise", type=float, default=1.0)
    s.add_argument("--methods", type=parse_methods, default=())
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sfm_synth)

    s = sub.add_parser("sfm-real", help="reconstruction from correspondence files")
    s.add_argument("--correspondences", required=True)
    s.add_argument("--cameras-file", required=True)
    s.add_argument("--gt-points", required=True)
    s.add_argument("--views", type=int, choices=(2, 3), default=2)
    s.add_argument("--runs", type=int, default=10)
    s.add_argument("--points-per-run", type=int, default=20)
    s.add_argument("--methods", type=parse_methods, default=())
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sfm_real)

    s = sub.add_parser("triangulate", help="triangulate every point of an observation file")
    s.add_argument("--cameras-file", required=True)
    s.add_argument("--observations", required=True)
    s.add_argument("--method", default="midpoint")
    s.set_defaults(func=cmd_triangulate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except InputFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except DegenerateError as exc:
        print(f"degenerate geometry: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
