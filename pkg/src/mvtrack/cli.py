"""Command line entry point: ``mvtrack {track,simulate,evaluate,ablate,bench}``."""
from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__
from .config import _TYPES, PRESETS, PipelineConfig, load_config
from .diagnostics import Diagnostics
from .errors import MVTrackError

LATENCY_NOTE = """\
Latency: windows of size nu advance by step delta. Positions are written once
the following window has been linked, so a frame leaves the tracker at most
nu + delta - 1 frames after it arrives (49 frames with the default nu=30,
delta=20), plus the compute time of one window.
"""


_ALIASES = {
    "io.calibration": "--calibration",
    "io.detections": "--detections",
    "io.ground_truth": "--ground-truth",
    "io.output": "--output",
    "io.diagnostics": "--diagnostics",
}


def _add_config_flags(p):
    p.add_argument("--config", help="YAML configuration file")
    p.add_argument("--preset", choices=sorted(PRESETS), help="named hyperparameter preset")
    p.add_argument("--debug", action="store_true", help="record merge audits and candidate counts")
    for key, typ in _TYPES.items():
        if key == "debug":
            continue
        flags = [f"--{key}"] + ([_ALIASES[key]] if key in _ALIASES else [])
        kw = {"dest": "cfg:" + key, "default": None, "metavar": key.split(".")[-1].upper()}
        if typ is bool:
            kw["choices"] = ["true", "false"]
        p.add_argument(*flags, **kw)


def _build_config(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    if args.preset:
        cfg = cfg.with_overrides(PRESETS[args.preset])
    overrides = {k[4:]: v for k, v in vars(args).items() if k.startswith("cfg:") and v is not None}
    if args.debug:
        overrides["debug"] = True
    return cfg.with_overrides(overrides) if overrides else cfg


def _write_diagnostics(diag: Diagnostics, path):
    if path:
        with open(path, "w") as fh:
            diag.write_jsonl(fh)
    elif diag.verbose:
        diag.write_jsonl(sys.stderr)
    elif diag.events:
        print(json.dumps({"diagnostics": dict(sorted(diag.counts().items()))}), file=sys.stderr)


def cmd_track(args):
    from .io import format_track_record
    from .pipeline import run_pipeline

    cfg = _build_config(args)
    handle = {}

    def writer():
        # opened on first use so a failed run leaves no partial file behind
        if "out" not in handle:
            handle["out"] = open(cfg.io.output, "w") if cfg.io.output else sys.stdout
            handle["out"].write("# global_id frame X Y Z [X Y Z]*K\n")
        return handle["out"]

    def emit(records):
        out = writer()
        for gid, t, pos in records:
            out.write(format_track_record(gid, t, pos) + "\n")
        out.flush()

    try:
        res = run_pipeline(cfg, on_emit=emit)
        out = writer()
    finally:
        if handle.get("out") not in (None, sys.stdout):
            handle["out"].close()
    _write_diagnostics(res.diagnostics, cfg.io.diagnostics)
    if res.report is not None:
        print(res.report.format(), file=sys.stderr if out is sys.stdout else sys.stdout)
        if res.pcp is not None:
            print(f"pcp = {res.pcp[1]:.6f}", file=sys.stderr if out is sys.stdout else sys.stdout)
    return 0


def cmd_simulate(args):
    from .io import write_calibration, write_detections, write_tracks
    from .sim import NoiseConfig, SceneConfig, degenerate_scenarios, generate_scene, render_detections

    if args.scenario:
        sc = degenerate_scenarios()[args.scenario]
        scene_cfg, noise = sc.scene, sc.noise
    else:
        scene_cfg = SceneConfig(n_persons=args.persons, n_cameras=args.cameras, duration=args.frames,
                                seed=args.seed)
        noise = NoiseConfig(args.pixel_sigma, args.miss_rate, args.fp_rate, args.id_swap_rate,
                            seed=args.seed)
    scene = generate_scene(scene_cfg)
    dets = render_detections(scene, noise, args.mode)
    os.makedirs(args.out_dir, exist_ok=True)
    write_calibration(os.path.join(args.out_dir, "calibration.txt"), scene.cameras)
    write_detections(os.path.join(args.out_dir, "detections.txt"), dets.streams)
    gt = scene.pose_tracks() if args.mode == "pose" else scene.footprint_tracks()
    write_tracks(os.path.join(args.out_dir, "ground_truth.txt"), gt)
    print(json.dumps({"out_dir": args.out_dir, "cameras": len(scene.cameras),
                      "persons": scene_cfg.n_persons, "frames": scene_cfg.duration,
                      "detections": dets.count()}))
    return 0


def cmd_evaluate(args):
    from .io import load_tracks
    from .metrics import clear_mot, load_limbs, pcp

    gt = load_tracks(args.ground_truth)
    pred = load_tracks(args.tracks)
    report = clear_mot(gt, pred, args.threshold)
    rec = report.as_record()
    pose = any(v.ndim == 2 for traj in gt.values() for v in list(traj.values())[:1])
    if pose:
        _, avg = pcp(gt, pred, args.alpha, load_limbs(args.limbs))
        rec["pcp"] = avg
    if args.json:
        print(json.dumps(rec))
    else:
        print(report.format())
        if pose:
            print(f"pcp = {rec['pcp']:.6f}")
    return 0


def _parse_vary(spec):
    if "=" not in spec:
        raise MVTrackError(f"--vary expects key=v1,v2,... got {spec!r}")
    key, values = spec.split("=", 1)
    return key, [v for v in values.split(",") if v]


def cmd_ablate(args):
    from .pipeline import run_pipeline

    base = _build_config(args)
    if base.io.ground_truth is None:
        raise MVTrackError("ablate needs --ground-truth")
    runs = []
    if args.presets:
        for name in args.presets.split(","):
            if name not in PRESETS:
                raise MVTrackError(f"unknown preset {name!r}")
            runs.append((f"preset={name}", base.with_overrides(PRESETS[name])))
    for spec in args.vary or []:
        key, values = _parse_vary(spec)
        for v in values:
            runs.append((f"{key}={v}", base.with_overrides({key: v})))
    if not runs:
        runs.append(("base", base))
    rows = []
    for label, cfg in runs:
        res = run_pipeline(cfg)
        rec = {"run": label, **res.report.as_record()}
        if res.pcp is not None:
            rec["pcp"] = res.pcp[1]
        rows.append(rec)
    if args.json:
        print(json.dumps(rows, indent=2))
    else:
        from .bench import format_table
        print(format_table(rows))
    return 0


def _int_list(s):
    return tuple(int(x) for x in s.split(",") if x)


def cmd_bench(args):
    from . import kernels
    from .bench import assoc_scaling_slope, benchmark, compare_backends, format_table, to_json

    if args.compare_backends:
        rows = compare_backends()
        print(json.dumps(rows, indent=2) if args.json else format_table(rows))
        return 0
    backend = args.backend or kernels.BACKEND
    with kernels.use_backend(backend):
        rows = benchmark(_int_list(args.cameras), _int_list(args.persons), args.frames, args.repeats)
    if args.json:
        print(to_json(rows))
    else:
        print(format_table(rows))
        if len(rows) > 1:
            print(f"# association log-log slope vs N_p*N_c: {assoc_scaling_slope(rows):.3f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mvtrack", description="Multi-camera 3D multi-person tracking.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("track", help="track people from calibration + detections files",
                       epilog=LATENCY_NOTE, formatter_class=argparse.RawDescriptionHelpFormatter)
    _add_config_flags(p)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("simulate", help="write a synthetic scene as calibration/detection/GT files")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--persons", type=int, default=5)
    p.add_argument("--cameras", type=int, default=4)
    p.add_argument("--frames", type=int, default=600)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pixel-sigma", type=float, default=0.0)
    p.add_argument("--miss-rate", type=float, default=0.0)
    p.add_argument("--fp-rate", type=float, default=0.0)
    p.add_argument("--id-swap-rate", type=float, default=0.0)
    p.add_argument("--mode", choices=["box", "pose"], default="box")
    p.add_argument("--scenario", help="named failure-mode preset (overrides scene and noise options)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", help="score a tracks file against ground truth")
    p.add_argument("--ground-truth", required=True)
    p.add_argument("--tracks", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--alpha", type=float, default=0.5, help="PCP limb tolerance")
    p.add_argument("--limbs", help="limb table YAML for PCP")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="rerun the pipeline over config variations")
    _add_config_flags(p)
    p.add_argument("--vary", action="append", help="key=v1,v2,... (repeatable)")
    p.add_argument("--presets", help="comma-separated preset names")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("bench", help="tracking throughput over cameras x persons")
    p.add_argument("--cameras", default="2,4,6")
    p.add_argument("--persons", default="2,4,8")
    p.add_argument("--frames", type=int, default=300)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--backend", choices=["python", "cython"])
    p.add_argument("--compare-backends", action="store_true", help="time the clustering kernel per backend")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_bench)
    return parser


def _error_record(exc):
    rec = {"error": type(exc).__name__, "message": str(exc)}
    for attr in ("line", "path", "frame", "context"):
        val = getattr(exc, attr, None)
        if val is not None:
            rec[attr] = val
    return rec


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (MVTrackError, OSError, KeyError, ValueError) as exc:
        print(json.dumps(_error_record(exc), default=str), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
