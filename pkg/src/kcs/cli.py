"""Command-line interface.

Subcommands: ``reconstruct``, ``synth``, ``evaluate``, ``export-plot`` and
``convert-mocap``.  Any option may also come from a JSON file given with
``--config``; keys are the long option names with dashes replaced by
underscores, and command-line flags take precedence.

Exit codes: 0 success, 1 usage or parse error, 2 numerical failure
(degenerate geometry, divergence, or no convergence).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (
    DegenerateGeometryError,
    DegenerateInputError,
    DivergenceError,
    FormatError,
    KcsError,
)
from .evaluation import per_frame_errors, reprojection_error
from .io import (
    atomic_write_text,
    read_json,
    read_poses,
    read_skeleton,
    read_tracks,
    write_json,
    write_poses,
    write_skeleton,
    write_tracks,
)
from .kinematic_chain import build_c

log = logging.getLogger("kcs")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2

# option name -> hard default; None means "required unless in config"
DEFAULTS = {
    "reconstruct": {
        "tracks": None, "skeleton": None, "mean_pose": None, "out": None, "diagnostics": None,
        "k": 4, "lambda": 100.0, "max_outer": 10, "outer_tol": 1e-4, "max_inner": 300,
        "inner_tol": 1e-6, "seed": 0,
    },
    "synth": {
        "out_dir": None, "frames": 100, "paths": 1, "seed": 0, "noise": 0.0,
        "max_rotation": 15.0, "scale_min": 100.0, "scale_max": 100.0, "motion": "walk",
        "amplitude": 0.5, "skeleton": None, "mean_pose": None,
    },
    "evaluate": {"estimate": None, "ground_truth": None, "out": None, "no_scale_align": False},
    "export-plot": {
        "poses": None, "skeleton": None, "diagnostics": None, "out_dir": None, "frames": "0",
        "view": "front", "no_series": False,
    },
    "convert-mocap": {"asf": None, "amc": None, "out": None, "every": 1, "write_skeleton": None},
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _build_parser():
    p = _Parser(prog="kcs", description="Monocular kinematic-chain reconstruction.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", type=Path, help="JSON file with option values")

    r = sub.add_parser("reconstruct", help="reconstruct 3D poses from 2D tracks")
    common(r)
    r.add_argument("--tracks", type=Path)
    r.add_argument("--skeleton", type=Path)
    r.add_argument("--mean-pose", type=Path, help="defaults to the bundled pose for the 15-joint skeleton")
    r.add_argument("--out", type=Path, help="output pose file")
    r.add_argument("--diagnostics", type=Path, help="defaults to <out>.diagnostics.json")
    r.add_argument("--k", type=int, help="number of basis shapes K")
    r.add_argument("--lambda", type=float, dest="lambda", help="data-term weight")
    r.add_argument("--max-outer", type=int)
    r.add_argument("--outer-tol", type=float)
    r.add_argument("--max-inner", type=int)
    r.add_argument("--inner-tol", type=float)
    r.add_argument("--seed", type=int)

    s = sub.add_parser("synth", help="generate synthetic tracks and ground truth")
    common(s)
    s.add_argument("--out-dir", type=Path)
    s.add_argument("--frames", type=int)
    s.add_argument("--paths", type=int, help="number of random camera paths")
    s.add_argument("--seed", type=int)
    s.add_argument("--noise", type=float, help="Gaussian pixel noise sigma")
    s.add_argument("--max-rotation", type=float, help="total camera rotation bound (degrees)")
    s.add_argument("--scale-min", type=float)
    s.add_argument("--scale-max", type=float)
    s.add_argument("--motion", choices=["walk", "random"])
    s.add_argument("--amplitude", type=float, help="max joint amplitude (rad) for random motion")
    s.add_argument("--skeleton", type=Path, help="custom skeleton (random motion only)")
    s.add_argument("--mean-pose", type=Path, help="rest pose for a custom skeleton")

    e = sub.add_parser("evaluate", help="compare estimated and ground-truth poses")
    common(e)
    e.add_argument("--estimate", type=Path)
    e.add_argument("--ground-truth", type=Path)
    e.add_argument("--out", type=Path, help="metrics JSON (stdout if omitted)")
    e.add_argument("--no-scale-align", action="store_true", default=None,
                   help="rigid instead of similarity alignment")

    x = sub.add_parser("export-plot", help="export wireframes and convergence series")
    common(x)
    x.add_argument("--poses", type=Path)
    x.add_argument("--skeleton", type=Path)
    x.add_argument("--diagnostics", type=Path, help="defaults to <poses>.diagnostics.json")
    x.add_argument("--out-dir", type=Path)
    x.add_argument("--frames", help="comma separated frame list, or 'all'")
    x.add_argument("--view", choices=["front", "side", "top"])
    x.add_argument("--no-series", action="store_true", default=None,
                   help="only wireframes; do not require diagnostics")

    c = sub.add_parser("convert-mocap", help="convert CMU ASF/AMC to a pose file")
    common(c)
    c.add_argument("--asf", type=Path)
    c.add_argument("--amc", type=Path)
    c.add_argument("--out", type=Path)
    c.add_argument("--every", type=int, help="keep every n-th frame")
    c.add_argument("--write-skeleton", type=Path, help="also write the 15-joint skeleton file")
    return p


def _options(args):
    defaults = DEFAULTS[args.command]
    merged = dict(defaults)
    if args.config is not None:
        cfg = read_json(args.config)
        if not isinstance(cfg, dict):
            raise FormatError("config must be a JSON object", args.config)
        unknown = sorted(set(cfg) - set(defaults))
        if unknown:
            raise FormatError(f"unknown config keys for {args.command}: {unknown}", args.config)
        merged.update(cfg)
    for key in defaults:
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    return merged


def _require(opts, *keys):
    missing = [k for k in keys if opts.get(k) is None]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + k.replace("_", "-") for k in missing))


def _mean_pose_for(skeleton, path):
    from .datasets import human15_mean_pose, human15_skeleton

    if path is not None:
        poses, _, _ = read_poses(path, skeleton.names)
        if poses.shape[0] != 1:
            raise FormatError(f"mean pose file must hold one frame, found {poses.shape[0]}", path)
        return poses[0]
    if skeleton.names == human15_skeleton().names:
        return human15_mean_pose()
    raise UsageError("--mean-pose is required for skeletons other than the bundled one")


def cmd_reconstruct(opts):
    from .pipeline import PipelineConfig, reconstruct
    from .shape import SvtParams

    _require(opts, "tracks", "skeleton", "out")
    skeleton = read_skeleton(opts["skeleton"])
    W, names, meta = read_tracks(opts["tracks"], skeleton.names)
    X0 = _mean_pose_for(skeleton, opts["mean_pose"])
    config = PipelineConfig(
        K=int(opts["k"]),
        svt=SvtParams(
            penalty_weight=float(opts["lambda"]),
            max_inner_iters=int(opts["max_inner"]),
            rel_tol=float(opts["inner_tol"]),
        ),
        max_outer_iters=int(opts["max_outer"]),
        outer_rel_tol=float(opts["outer_tol"]),
        seed=int(opts["seed"]),
    )
    out = Path(opts["out"])
    diag_path = Path(opts["diagnostics"]) if opts["diagnostics"] else out.with_name(out.name + ".diagnostics.json")
    result = reconstruct(W, skeleton, X0, config)
    d = result.diagnostics
    settings = {k: opts[k] for k in ("k", "lambda", "max_outer", "outer_tol", "max_inner", "inner_tol", "seed")}
    report = {
        "format": "kcs-diagnostics",
        "format_version": 1,
        "settings": settings,
        "converged": d.converged,
        "outer_iterations": d.outer_iterations,
        "reprojection_error": d.reprojection_error,
        "nuclear_norm": d.nuclear_norm,
        "half_step_error": d.half_step_error,
        "inner_iterations": d.inner_iterations,
        "rejected_shape_steps": d.rejected_shape_steps,
        "joint_reprojection_error": reprojection_error(W, result.cameras, result.poses_3d, result.translations_2d),
        "cameras": result.cameras.matrices.tolist(),
        "translations_2d": result.translations_2d.tolist(),
    }
    write_poses(out, result.poses_3d, skeleton.names, {"source": "kcs reconstruct", "settings": settings})
    write_json(diag_path, report)
    if not d.converged:
        log.error("no convergence after %d outer iterations; outputs written", d.outer_iterations)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_synth(opts):
    from .datasets import human15_mean_pose, human15_skeleton
    from .synthetic import (
        CameraPathSpec,
        derive_seeds,
        generate_camera_path,
        generate_motion,
        project,
        random_motion_spec,
        walking_motion_spec,
    )

    _require(opts, "out_dir")
    if opts["paths"] < 1 or opts["frames"] < 1:
        raise UsageError("--paths and --frames must be positive")
    if opts["noise"] < 0:
        raise UsageError("--noise must be non-negative")
    if opts["skeleton"] is not None:
        skeleton = read_skeleton(opts["skeleton"])
        rest = _mean_pose_for(skeleton, opts["mean_pose"])
    else:
        skeleton, rest = human15_skeleton(), human15_mean_pose()
    f = int(opts["frames"])
    if opts["motion"] == "walk":
        if skeleton.names != human15_skeleton().names:
            raise UsageError("walk motion is defined for the bundled 15-joint skeleton; use --motion random")
        mspec = walking_motion_spec(skeleton, rest, f, seed=opts["seed"])
    else:
        mspec = random_motion_spec(skeleton, rest, f, float(opts["amplitude"]), seed=opts["seed"])
    poses = generate_motion(mspec)
    out_dir = Path(opts["out_dir"])
    write_skeleton(out_dir / "skeleton.skel", skeleton)
    write_poses(out_dir / "mean_pose.csv", rest, skeleton.names, {"source": "kcs synth rest pose"})
    # output location is not a data parameter; leaving it out keeps files relocatable
    echo = {k: (str(v) if isinstance(v, Path) else v) for k, v in opts.items() if k != "out_dir"}
    seeds = derive_seeds(int(opts["seed"]), int(opts["paths"]))
    for i, path_seed in enumerate(seeds):
        cspec = CameraPathSpec(
            f, float(opts["max_rotation"]), (float(opts["scale_min"]), float(opts["scale_max"])), seed=path_seed
        )
        cams = generate_camera_path(cspec)
        W = project(poses, cams, float(opts["noise"]), seed=path_seed)
        meta = {"synth": echo, "path_index": i, "path_seed": path_seed, "motion": mspec.describe()}
        write_tracks(out_dir / f"tracks_{i:03d}.csv", W, skeleton.names, meta)
        write_poses(out_dir / f"ground_truth_{i:03d}.csv", poses, skeleton.names, meta)
        write_json(out_dir / f"cameras_{i:03d}.json", {"path_seed": path_seed, "cameras": cams.matrices.tolist()})
    return EXIT_OK


def cmd_evaluate(opts):
    _require(opts, "estimate", "ground_truth")
    gt, names, _ = read_poses(opts["ground_truth"])
    est, _, _ = read_poses(opts["estimate"], names)
    if est.shape[0] != gt.shape[0]:
        raise FormatError(f"estimate has {est.shape[0]} frames, ground truth {gt.shape[0]}", opts["estimate"])
    scale = not opts["no_scale_align"]
    m, p = per_frame_errors(est, gt, scale=scale)
    report = {
        "format": "kcs-metrics",
        "format_version": 1,
        "alignment": "similarity" if scale else "rigid",
        "num_frames": int(gt.shape[0]),
        "mean_mpjpe": float(m.mean()),
        "sequence_3d_error": float(p.mean()),
        "per_frame": [{"frame": k, "mpjpe": float(a), "3dpe": float(b)} for k, (a, b) in enumerate(zip(m, p))],
    }
    if opts["out"] is not None:
        write_json(opts["out"], report)
    else:
        sys.stdout.write(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


_VIEWS = {"front": (0, 1), "side": (2, 1), "top": (0, 2)}


def wireframe_svg(pose, skeleton, view="front", size=400):
    """SVG document with one ``<line>`` per edge of ``skeleton``."""
    a, b = _VIEWS[view]
    pts = np.stack([pose[a], pose[b]])
    lo, hi = pts.min(axis=1), pts.max(axis=1)
    span = float(max(hi - lo)) or 1.0
    pad = 0.05 * size
    scale = (size - 2 * pad) / span

    def xy(i):
        return pad + (pts[0, i] - lo[0]) * scale, size - pad - (pts[1, i] - lo[1]) * scale

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">']
    for r, t in skeleton.edges:
        x1, y1 = xy(r)
        x2, y2 = xy(t)
        out.append(f'  <line x1="{x1:.3f}" y1="{y1:.3f}" x2="{x2:.3f}" y2="{y2:.3f}" stroke="black" stroke-width="2"/>')
    for i in range(pose.shape[1]):
        x, y = xy(i)
        out.append(f'  <circle cx="{x:.3f}" cy="{y:.3f}" r="3" fill="crimson"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _frame_list(spec, f):
    if spec == "all":
        return list(range(f))
    try:
        frames = [int(s) for s in str(spec).split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"bad frame list {spec!r}") from None
    bad = [k for k in frames if not 0 <= k < f]
    if bad:
        raise UsageError(f"frames {bad} outside [0, {f})")
    return frames


def cmd_export_plot(opts):
    _require(opts, "poses", "skeleton", "out_dir")
    skeleton = read_skeleton(opts["skeleton"])
    poses, names, _ = read_poses(opts["poses"], skeleton.names)
    out_dir = Path(opts["out_dir"])
    diag = None
    if not opts["no_series"]:
        dpath = Path(opts["diagnostics"]) if opts["diagnostics"] else Path(str(opts["poses"]) + ".diagnostics.json")
        if not dpath.exists():
            raise FormatError("missing diagnostics (pass --diagnostics or --no-series)", dpath)
        diag = read_json(dpath)
        if "reprojection_error" not in diag or "nuclear_norm" not in diag:
            raise FormatError("diagnostics lack the convergence series", dpath)
    frames = _frame_list(opts["frames"], poses.shape[0])
    # all content is rendered before anything is written
    files = {f"frame_{k:04d}.svg": wireframe_svg(poses[k], skeleton, opts["view"]) for k in frames}
    if diag is not None:
        rows = ["iteration,reprojection_error_px,nuclear_norm"]
        rows += [f"{i},{e!r},{n!r}" for i, (e, n) in enumerate(zip(diag["reprojection_error"], diag["nuclear_norm"]))]
        files["convergence.csv"] = "\n".join(rows) + "\n"
        if "half_step_error" in diag:
            rows = ["half_step,reprojection_error_px"]
            rows += [f"{i},{e!r}" for i, e in enumerate(diag["half_step_error"])]
            files["half_steps.csv"] = "\n".join(rows) + "\n"
    for name, text in files.items():
        atomic_write_text(out_dir / name, text)
    write_poses(out_dir / "trajectory.csv", poses, names, {"source": str(opts["poses"])})
    return EXIT_OK


def cmd_convert_mocap(opts):
    from .datasets import human15_skeleton
    from .mocap import CMU_JOINT_MAP, read_amc, read_asf, to_human15

    _require(opts, "asf", "amc", "out")
    if int(opts["every"]) < 1:
        raise UsageError("--every must be positive")
    skeleton = human15_skeleton()
    asf = read_asf(opts["asf"])
    frames = read_amc(opts["amc"])
    poses = to_human15(asf, frames, skeleton.names, int(opts["every"]))
    meta = {"source": str(opts["amc"]), "units": "mm", "every": int(opts["every"]), "joint_map": CMU_JOINT_MAP}
    write_poses(opts["out"], poses, skeleton.names, meta)
    if opts["write_skeleton"] is not None:
        write_skeleton(opts["write_skeleton"], skeleton)
    return EXIT_OK


COMMANDS = {
    "reconstruct": cmd_reconstruct,
    "synth": cmd_synth,
    "evaluate": cmd_evaluate,
    "export-plot": cmd_export_plot,
    "convert-mocap": cmd_convert_mocap,
}


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s: %(message)s"
    )
    try:
        opts = _options(args)
        return COMMANDS[args.command](opts)
    except UsageError as exc:
        print(f"kcs {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DegenerateGeometryError, DivergenceError, DegenerateInputError) as exc:
        print(f"kcs {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (KcsError, ValueError) as exc:
        print(f"kcs {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
