"""Command-line entry point: ``emaptrack {track,synth,eval,ablate}``."""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import formats, metrics, synth
from .emap import EmapMode
from .errors import EmapError, InputError
from .tracker import TrackerConfig, run_sequence

log = logging.getLogger("emaptrack")

EXIT_INPUT_ERROR = 2


def _config(args, mode: EmapMode, m: formats.SequenceManifest) -> TrackerConfig:
    return TrackerConfig(
        mode=mode,
        iou_min=args.iou_min,
        max_age=args.max_age,
        min_hits=args.min_hits,
        dt_default=m.dt_default,
        report_extrapolated=getattr(args, "report_extrapolated", False),
        freeze_gap_depth=getattr(args, "freeze_gap_depth", False),
        max_range=m.max_range,
    )


def cmd_track(args) -> int:
    mode = EmapMode.parse(args.mode)
    m = formats.load_manifest(args.manifest)
    frames = formats.load_frames(m, need_odometry=mode is not EmapMode.BASELINE)
    table = run_sequence(frames, m.camera, _config(args, mode, m))
    formats.write_tracks(args.out, table)
    log.info("wrote %d rows to %s", len(table), args.out)
    return 0


def _custom_scenario(path: Path) -> synth.Scenario:
    try:
        doc = formats.tomllib.loads(path.read_text(encoding="utf-8"))
    except formats.tomllib.TOMLDecodeError as exc:
        raise InputError(f"{path}: invalid TOML: {exc}") from None
    try:
        c = doc.get("camera", {})
        cam = synth.CAMERA if not c else synth.CameraModel(
            float(c["f"]), float(c["cx"]), float(c["cy"]), int(c["width"]), int(c["height"]))
        ego = doc["ego"]
        n = int(ego["frames"])
        dt = float(ego.get("dt", synth.DT))

        def series(key):
            v = ego.get(key, 0.0)
            arr = np.full(n, float(v)) if np.isscalar(v) else np.asarray(v, dtype=float)
            if len(arr) != n:
                raise InputError(f"{path}: ego.{key} has {len(arr)} entries, expected {n}")
            return arr

        script = synth.EgoScript(np.full(n, dt), series("speed"), series("yaw_rate"))
        objects = [
            synth.WorldObject(
                id=int(o["id"]),
                position=tuple(float(v) for v in o["position"]),
                velocity=tuple(float(v) for v in o.get("velocity", (0.0, 0.0, 0.0))),
                size=tuple(float(v) for v in o.get("size", synth.CAR)),
                label=str(o.get("label", "Car")),
            )
            for o in doc.get("objects", [])
        ]
    except KeyError as exc:
        raise InputError(f"{path}: missing key {exc}") from None
    except (TypeError, ValueError) as exc:
        raise InputError(f"{path}: {exc}") from None
    return synth.Scenario(str(doc.get("name", path.stem)), "custom", cam, objects, script)


def write_scenario(scn: synth.Scenario, out_dir: Path, dropout: float, seed: int, noise: float,
                   depth_images: bool = False, omit=()) -> Path:
    """Simulate, corrupt and write one scenario in the tracker's file formats."""
    out_dir.mkdir(parents=True, exist_ok=True)
    frames = synth.simulate(scn.objects, scn.script, scn.camera)
    dets = synth.corrupt(frames, synth.DropoutSchedule(frozenset(omit), dropout), noise, seed)
    formats.write_detections(out_dir / "detections.csv", dets, with_depth=not depth_images)
    formats.write_odometry(out_dir / "odometry.csv", [fr.ego for fr in frames])
    gt = [
        formats.TrackRow(fr.index, b.object_id, b.label, b.box, 1.0, False)
        for fr in frames for b in fr.boxes
    ]
    formats.write_tracks(out_dir / "gt.csv", gt)
    if depth_images:
        for fr in frames:
            formats.write_depth(out_dir / "depth", fr.index, synth.depth_image(fr, scn.objects, scn.camera))
    manifest = out_dir / "manifest.toml"
    formats.write_manifest(
        manifest, scn.camera, f"scenario-{scn.name}", "detections.csv", "odometry.csv",
        "depth" if depth_images else None, "gt.csv", dt_default=float(scn.script.dt[0]) if len(scn.script) else 0.1,
    )
    return manifest


def cmd_synth(args) -> int:
    scenarios = synth.builtin_scenarios()
    if args.scenario in scenarios:
        scn = scenarios[args.scenario]
    else:
        path = Path(args.scenario)
        if not path.is_file():
            raise InputError(f"unknown scenario {args.scenario!r} (use 1-4 or a TOML file)")
        scn = _custom_scenario(path)
    if not 0.0 <= args.dropout <= 1.0:
        raise InputError("--dropout must lie in [0, 1]")
    manifest = write_scenario(scn, Path(args.out_dir), args.dropout, args.seed, args.noise, args.depth_images)
    log.info("wrote scenario %s to %s", scn.name, manifest)
    return 0


def cmd_eval(args) -> int:
    pred = formats.parse_tracks(args.pred)
    if args.exclude_extrapolated:
        pred = [r for r in pred if not r.extrapolated]
    gt = formats.parse_tracks(args.gt)
    report = metrics.evaluate(pred, gt, args.iou, Path(args.pred).stem)
    out = Path(args.report)
    out.write_text(metrics.format_table([report]), encoding="utf-8")
    out.with_suffix(".csv").write_text(metrics.reports_to_csv([report]), encoding="utf-8")
    if args.emit_plot_data:
        out.with_name(out.stem + "_plot.csv").write_text(metrics.plot_data_csv([report]), encoding="utf-8")
    print(metrics.format_table([report]), end="")
    return 0


def _ablate_one(manifest: str, cfg_args) -> List[metrics.AblationRow]:
    m = formats.load_manifest(manifest)
    if m.ground_truth is None or not m.ground_truth.is_file():
        raise InputError(f"{manifest}: ablation needs a ground_truth file")
    frames = formats.load_frames(m, need_odometry=True)
    gt = formats.parse_tracks(m.ground_truth, m.classes or None)
    seq = metrics.SequenceInput(m.name, frames, m.camera, gt)
    return metrics.ablate([seq], _config(cfg_args, EmapMode.BASELINE, m), include_extrapolated=False)


def cmd_ablate(args) -> int:
    if args.jobs > 1 and len(args.manifest) > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            per_seq = list(pool.map(_ablate_one, args.manifest, [args] * len(args.manifest)))
    else:
        per_seq = [_ablate_one(m, args) for m in args.manifest]
    rows = []
    for i, mode in enumerate(metrics.ABLATION_ORDER):
        reports = [seq_rows[i].per_sequence[0] for seq_rows in per_seq]
        rows.append(metrics.AblationRow(mode, reports, metrics.average_reports(reports, mode.label)))
    text = metrics.format_ablation(rows)
    out = Path(args.out)
    out.write_text(text, encoding="utf-8")
    out.with_suffix(".csv").write_text(metrics.reports_to_csv([r.mean for r in rows]), encoding="utf-8")
    if args.emit_plot_data:
        reports = [rep for r in rows for rep in (
            metrics.EvalReport(f"{r.mode.label}/{p.name}", p.idsw, p.mota, p.idf1, p.fp, p.fn, p.gt, p.matches)
            for p in r.per_sequence)]
        out.with_name(out.stem + "_plot.csv").write_text(metrics.plot_data_csv(reports), encoding="utf-8")
    print(text, end="")
    return 0


def _add_tracker_options(p):
    p.add_argument("--iou-min", type=float, default=0.3, help="association IoU gate (default 0.3)")
    p.add_argument("--max-age", type=int, default=10)
    p.add_argument("--min-hits", type=int, default=2)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="emaptrack", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("track", help="run the tracker on one sequence")
    p.add_argument("--manifest", required=True)
    p.add_argument("--mode", choices=["baseline", "rot", "trans", "full"], default="full")
    p.add_argument("--out", required=True)
    p.add_argument("--report-extrapolated", action="store_true",
                   help="also emit unmatched confirmed tracks, flagged as extrapolated")
    p.add_argument("--freeze-gap-depth", action="store_true",
                   help="keep the last matched depth during detection gaps")
    _add_tracker_options(p)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("synth", help="generate a synthetic sequence")
    p.add_argument("--scenario", required=True, help="1, 2, 3, 4 or a scenario TOML file")
    p.add_argument("--dropout", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=0.0, help="corner noise std in px")
    p.add_argument("--depth-images", action="store_true",
                   help="write PGM depth rasters instead of a per-detection depth column")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="score a track file against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--iou", type=float, default=0.5)
    p.add_argument("--exclude-extrapolated", action="store_true")
    p.add_argument("--emit-plot-data", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="four-mode ablation over one or more sequences")
    p.add_argument("--manifest", required=True, nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--emit-plot-data", action="store_true")
    _add_tracker_options(p)
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (EmapError, ValueError, OSError) as exc:
        print(f"emaptrack {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
