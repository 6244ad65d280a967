"""Command-line driver: track, evaluate, simulate, profile.

Every command is deterministic given its inputs, seed, and flags; each run
writes a ``*.manifest.json`` (or ``manifest.json`` for directory outputs)
next to its outputs recording the merged configuration, paths, seed, tool
version, and wall-clock timings per stage.  Timings are informational and
are the only manifest fields that vary between identical reruns — the
outputs themselves are byte-identical.

Exit codes: 0 on success (all outputs fully written), 2 for usage errors,
1 for anything else; partially written outputs are deleted on failure.
"""

import argparse
import math
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .geometry import CameraIntrinsics
from .io import (
    FormatError,
    read_detections,
    read_intrinsics,
    read_raster,
    read_results,
    write_detections,
    write_results,
    write_tracks,
)
from .metrics import (
    VOID,
    DvpqConfig,
    PanopticMap,
    PanopticSequence,
    dvpq,
    stq,
    vpq,
)
from .simulator import (
    DEFAULT_INTRINSICS,
    TABLE2_FAMILIES,
    ObjectMotion,
    ScenarioConfig,
    generate,
    table2_config,
    truth_to_document,
)
from .tracker import TrackerConfig, TrackerState, step


class UsageError(ValueError):
    pass


@dataclass
class RunManifest:
    command: str
    version: str
    config: dict
    inputs: dict
    outputs: list
    seed: int = None
    timings: dict = field(default_factory=dict)


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits on usage errors and --version
        return int(exc.code or 0)
    written = []
    try:
        args.run(args, written)
        return 0
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (FormatError, ValueError, OSError) as exc:
        for path in written:
            Path(path).unlink(missing_ok=True)
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="casctrack",
        description="Cascaded detection association, sequence metrics, and scene simulation.",
    )
    parser.add_argument("--version", action="version", version=f"casctrack {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("track", help="associate a detection file into tracks")
    p.add_argument("--detections", required=True, help="detection text file")
    p.add_argument("--intrinsics", help="camera intrinsics file (needed by the sm stage)")
    _tracker_flags(p)
    p.add_argument("--out", required=True, help="track record file to write")
    p.set_defaults(run=cmd_track)

    p = sub.add_parser("evaluate", help="score prediction rasters against truth rasters")
    p.add_argument("--mode", required=True, choices=("dvpq", "vpq", "stq"))
    p.add_argument("--pred", required=True, help="directory of predicted rasters")
    p.add_argument("--truth", required=True, help="directory of truth rasters")
    p.add_argument("--things", default="1", help="comma-separated thing class ids")
    p.add_argument("--lambda-grid", default="0.1,0.25,0.5",
                   help="comma-separated depth thresholds; 'inf' allowed (dvpq)")
    p.add_argument("--k-grid", default="1,2,3,4",
                   help="comma-separated window sizes (dvpq/vpq)")
    p.add_argument("--out", required=True, help="results JSON to write")
    p.set_defaults(run=cmd_evaluate)

    p = sub.add_parser("simulate", help="generate a synthetic scenario")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--scenario", help="scenario config JSON")
    group.add_argument("--suite", choices=("table2",), help="bundled scenario suite")
    p.add_argument("--seed", type=int, help="noise seed (overrides the config file)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(run=cmd_simulate)

    p = sub.add_parser("profile", help="per-frame tracker latency by stage set")
    p.add_argument("--detections", required=True, help="detection text file")
    p.add_argument("--intrinsics", help="camera intrinsics file (default: simulator camera)")
    p.add_argument("--repetitions", type=int, default=5)
    _tracker_flags(p, stages=False)
    p.add_argument("--out", required=True, help="results JSON to write")
    p.set_defaults(run=cmd_profile)
    return parser


def _tracker_flags(p, stages=True):
    if stages:
        p.add_argument("--stages", default="am,sm", help="comma list drawn from {am, sm}")
    p.add_argument("--am-gate", type=float, default=0.5)
    p.add_argument("--sm-gate", type=float, default=2.0)
    p.add_argument("--max-age", type=int, default=1)
    p.add_argument("--kernel-update", choices=("replace", "ema"), default="replace")
    p.add_argument("--ema-alpha", type=float, default=0.5)


def _tracker_config(args, stages):
    return TrackerConfig(
        stages=stages,
        am_gate=args.am_gate,
        sm_gate=args.sm_gate,
        max_age=args.max_age,
        kernel_update=args.kernel_update,
        ema_alpha=args.ema_alpha,
    )


# ------------------------------------------------------------------- track


def cmd_track(args, written):
    stages = tuple(s for s in args.stages.split(",") if s)
    if "sm" in stages and not args.intrinsics:
        raise UsageError("--stages includes 'sm' but no --intrinsics was given")
    try:
        config = _tracker_config(args, stages)
    except ValueError as exc:
        raise UsageError(str(exc)) from None

    t0 = time.perf_counter()
    sequence, kernel_dim, frames = read_detections(args.detections)
    intrinsics = read_intrinsics(args.intrinsics) if args.intrinsics else None
    t_read = time.perf_counter()

    state = TrackerState()
    records = []
    for frame, dets in frames:
        state, assignments = step(state, dets, intrinsics, config, frame=frame)
        records.extend((frame, i, tid) for i, tid in assignments)
    t_track = time.perf_counter()

    out = Path(args.out)
    written.append(out)
    write_tracks(out, sequence if sequence is not None else "empty", records)
    _manifest(
        written,
        out,
        RunManifest(
            command="track",
            version=__version__,
            config={"stages": list(stages), "am_gate": config.am_gate,
                    "sm_gate": config.sm_gate, "max_age": config.max_age,
                    "kernel_update": config.kernel_update, "ema_alpha": config.ema_alpha,
                    "kernel_dim": kernel_dim},
            inputs={"detections": str(args.detections),
                    "intrinsics": str(args.intrinsics) if args.intrinsics else None},
            outputs=[str(out)],
            timings={"read_s": t_read - t0, "track_s": t_track - t_read,
                     "write_s": time.perf_counter() - t_track},
        ),
    )


# ---------------------------------------------------------------- evaluate


def _aligned_stems(pred_dir, truth_dir):
    pred = {p.name[: -len(".seg.upr")] for p in Path(pred_dir).glob("*.seg.upr")}
    truth = {p.name[: -len(".seg.upr")] for p in Path(truth_dir).glob("*.seg.upr")}
    for stem in sorted(truth - pred):
        raise FormatError(f"frame {stem!r}: present in truth, missing in prediction")
    for stem in sorted(pred - truth):
        raise FormatError(f"frame {stem!r}: present in prediction, missing in truth")
    if not truth:
        raise FormatError(f"no *.seg.upr rasters found in {truth_dir}")
    return sorted(truth)


def _load_sequence(directory, stems, with_depth):
    directory = Path(directory)
    frames, depths = [], [] if with_depth else None
    for stem in stems:
        raster = read_raster(directory / f"{stem}.seg.upr")
        if not isinstance(raster, PanopticMap):
            raise FormatError(f"frame {stem!r}: {directory} holds a depth raster, "
                              "expected panoptic")
        frames.append(raster)
        if with_depth:
            dep_path = directory / f"{stem}.dep.upr"
            if not dep_path.exists():
                raise FormatError(f"frame {stem!r}: depth raster missing in {directory}")
            dep = read_raster(dep_path)
            if isinstance(dep, PanopticMap):
                raise FormatError(f"frame {stem!r}: {dep_path} is not a depth raster")
            depths.append(dep)
    return PanopticSequence(frames, depths)


def _parse_grid(text, kind, what):
    try:
        values = tuple(kind(tok) for tok in text.split(",") if tok)
    except ValueError:
        raise UsageError(f"bad {what} {text!r}") from None
    if not values:
        raise UsageError(f"{what} must not be empty")
    return values


def _split_means(per_class, things):
    thing_vals = [v for c, v in per_class.items() if c in things]
    stuff_vals = [v for c, v in per_class.items() if c not in things]
    return (
        sum(thing_vals) / len(thing_vals) if thing_vals else 0.0,
        sum(stuff_vals) / len(stuff_vals) if stuff_vals else 0.0,
    )


def cmd_evaluate(args, written):
    things = _parse_grid(args.things, int, "--things")
    k_grid = _parse_grid(args.k_grid, int, "--k-grid")
    lambda_grid = _parse_grid(args.lambda_grid, float, "--lambda-grid")

    t0 = time.perf_counter()
    stems = _aligned_stems(args.pred, args.truth)
    with_depth = args.mode == "dvpq"
    pred = _load_sequence(args.pred, stems, with_depth)
    truth = _load_sequence(args.truth, stems, with_depth)
    t_read = time.perf_counter()

    doc = {"mode": args.mode, "frames": len(stems), "things": sorted(things)}
    if args.mode == "dvpq":
        result = dvpq(pred, truth, DvpqConfig(things, k_grid, lambda_grid))
        doc.update(dvpq=result.dvpq, dvpq_thing=result.dvpq_thing,
                   dvpq_stuff=result.dvpq_stuff,
                   cells=[{**c, "lam": _json_float(c["lam"])} for c in result.cells])
        bars = [(f"k={c['k']} lam={_json_float(c['lam'])}", c["value"])
                for c in result.cells]
    elif args.mode == "vpq":
        cells = []
        for k in k_grid:
            res = vpq(pred, truth, k, things)
            thing, stuff = _split_means(res.per_class, set(things))
            cells.append({"k": int(k), "value": res.aggregate,
                          "thing": thing, "stuff": stuff})
        overall = sum(c["value"] for c in cells) / len(cells)
        thing = sum(c["thing"] for c in cells) / len(cells)
        stuff = sum(c["stuff"] for c in cells) / len(cells)
        doc.update(vpq=overall, vpq_thing=thing, vpq_stuff=stuff, cells=cells)
        bars = [(f"k={c['k']}", c["value"]) for c in cells]
    else:
        result = stq(pred, truth, things)
        doc.update(stq=result.stq, aq=result.aq, sq=result.sq)
        bars = [("AQ", result.aq), ("SQ", result.sq), ("STQ", result.stq)]
    t_eval = time.perf_counter()

    out = Path(args.out)
    written.append(out)
    write_results(out, doc)
    svg = out.with_suffix(out.suffix + ".svg")
    written.append(svg)
    _write_svg_bars(svg, f"{args.mode} over {len(stems)} frames", bars)
    _manifest(
        written,
        out,
        RunManifest(
            command="evaluate",
            version=__version__,
            config={"mode": args.mode, "things": sorted(things),
                    "k_grid": list(k_grid),
                    "lambda_grid": [_json_float(v) for v in lambda_grid]},
            inputs={"pred": str(args.pred), "truth": str(args.truth)},
            outputs=[str(out), str(svg)],
            timings={"read_s": t_read - t0, "evaluate_s": t_eval - t_read,
                     "write_s": time.perf_counter() - t_eval},
        ),
    )


def _json_float(value):
    return "inf" if math.isinf(value) else float(value)


# ---------------------------------------------------------------- simulate


def cmd_simulate(args, written):
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    if args.suite == "table2":
        if args.seed is None:
            raise UsageError("--suite table2 needs --seed")
        jobs = [(family, table2_config(family, args.seed)) for family in TABLE2_FAMILIES]
    else:
        doc = read_results(args.scenario)
        cfg = _scenario_from_document(doc, seed_override=args.seed)
        jobs = [(Path(args.scenario).stem, cfg)]

    outputs, configs = [], {}
    for name, cfg in jobs:
        frames, truth = generate(cfg, DEFAULT_INTRINSICS)
        det_path = out_dir / f"{name}.detections.txt"
        truth_path = out_dir / f"{name}.truth.json"
        written.extend([det_path, truth_path])
        write_detections(det_path, f"{name}-seed{cfg.seed}", list(enumerate(frames)),
                         kernel_dim=cfg.embedding_dim)
        write_results(truth_path, truth_to_document(truth))
        outputs.extend([str(det_path), str(truth_path)])
        configs[name] = _config_document(cfg)

    _manifest(
        written,
        out_dir / "manifest.json",
        RunManifest(
            command="simulate",
            version=__version__,
            config=configs,
            inputs={"scenario": args.scenario, "suite": args.suite},
            outputs=outputs,
            seed=args.seed,
            timings={"generate_s": time.perf_counter() - t0},
        ),
        adjacent=False,
    )


def _config_document(cfg: ScenarioConfig) -> dict:
    doc = asdict(cfg)
    if doc.get("objects") is not None:
        doc["objects"] = [asdict(o) for o in cfg.objects]
    return doc


def _scenario_from_document(doc, seed_override=None) -> ScenarioConfig:
    if not isinstance(doc, dict):
        raise FormatError("scenario config must be a JSON object")
    data = dict(doc)
    if seed_override is not None:
        data["seed"] = seed_override
    objects = data.pop("objects", None)
    if objects is not None:
        data["objects"] = tuple(ObjectMotion(**o) for o in objects)
    for key in ("categories", "x_range", "z_range", "vx_range", "vz_range"):
        if key in data:
            data[key] = tuple(data[key])
    if "occlusions" in data:
        data["occlusions"] = tuple(tuple(w) for w in data["occlusions"])
    try:
        return ScenarioConfig(**data)
    except TypeError as exc:
        raise FormatError(f"bad scenario config: {exc}") from None


# ----------------------------------------------------------------- profile


def cmd_profile(args, written):
    if args.repetitions < 1:
        raise UsageError("--repetitions must be >= 1")
    try:
        base_cfg = _tracker_config(args, ("am", "sm"))
    except ValueError as exc:
        raise UsageError(str(exc)) from None

    t0 = time.perf_counter()
    _, kernel_dim, frames = read_detections(args.detections)
    intrinsics = (read_intrinsics(args.intrinsics) if args.intrinsics
                  else DEFAULT_INTRINSICS)
    t_read = time.perf_counter()

    stage_sets = {"none": None, "am": ("am",), "sm": ("sm",), "am_sm": ("am", "sm")}
    configs = {
        name: None if stages is None else TrackerConfig(
            stages=stages, am_gate=base_cfg.am_gate, sm_gate=base_cfg.sm_gate,
            max_age=base_cfg.max_age, kernel_update=base_cfg.kernel_update,
            ema_alpha=base_cfg.ema_alpha)
        for name, stages in stage_sets.items()
    }
    _run_stage_pass(frames, intrinsics, configs["am_sm"])  # warm the jit/caches

    per_stage = {}
    for name, config in configs.items():
        samples = []
        for _ in range(args.repetitions):
            samples.extend(_run_stage_pass(frames, intrinsics, config))
        arr = np.asarray(samples) * 1e3
        per_stage[name] = {
            "mean_ms": float(arr.mean()),
            "p50_ms": float(np.percentile(arr, 50)),
            "p99_ms": float(np.percentile(arr, 99)),
        }
    baseline = per_stage["none"]["mean_ms"]
    for name, stats in per_stage.items():
        stats["delta_ms"] = 0.0 if name == "none" else stats["mean_ms"] - baseline
    t_run = time.perf_counter()

    doc = {
        "mode": "profile",
        "repetitions": args.repetitions,
        "frames": len(frames),
        "detections_per_frame": max((len(d) for _, d in frames), default=0),
        "per_stage": per_stage,
    }
    out = Path(args.out)
    written.append(out)
    write_results(out, doc)
    svg = out.with_suffix(out.suffix + ".svg")
    written.append(svg)
    _write_svg_bars(
        svg,
        "per-frame latency delta vs no-tracking (ms)",
        [(name, stats["delta_ms"]) for name, stats in per_stage.items()],
    )
    _manifest(
        written,
        out,
        RunManifest(
            command="profile",
            version=__version__,
            config={"repetitions": args.repetitions, "am_gate": base_cfg.am_gate,
                    "sm_gate": base_cfg.sm_gate, "max_age": base_cfg.max_age,
                    "kernel_update": base_cfg.kernel_update,
                    "ema_alpha": base_cfg.ema_alpha, "kernel_dim": kernel_dim},
            inputs={"detections": str(args.detections),
                    "intrinsics": str(args.intrinsics) if args.intrinsics else None},
            outputs=[str(out), str(svg)],
            timings={"read_s": t_read - t0, "profile_s": t_run - t_read,
                     "write_s": time.perf_counter() - t_run},
        ),
    )


def _run_stage_pass(frames, intrinsics, config):
    """One pass over all frames; returns per-frame wall-clock seconds.

    ``config=None`` is the no-tracking baseline: detections are consumed and
    handed fresh ids with no matching work at all.
    """
    samples = []
    state = TrackerState()
    next_free = 1
    for frame, dets in frames:
        start = time.perf_counter()
        if config is None:
            _ = [(i, next_free + i) for i in range(len(dets))]
            next_free += len(dets)
        else:
            state, _ = step(state, dets, intrinsics, config, frame=frame)
        samples.append(time.perf_counter() - start)
    return samples


# ----------------------------------------------------------------- helpers


def _manifest(written, anchor, manifest: RunManifest, adjacent=True):
    path = Path(str(anchor) + ".manifest.json") if adjacent else Path(anchor)
    written.append(path)
    write_results(path, asdict(manifest))


def _write_svg_bars(path, title, bars):
    """Static vector bar chart; no plotting dependency."""
    bar_w, gap, height, base = 72, 28, 180, 40
    width = gap + len(bars) * (bar_w + gap)
    vmax = max([abs(v) for _, v in bars] + [1e-9])
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{max(width, 320)}" '
        f'height="{height + 2 * base}" font-family="monospace" font-size="12">',
        f'<text x="{gap}" y="20">{title}</text>',
    ]
    for i, (label, value) in enumerate(bars):
        h = 0 if vmax == 0 else int(round(height * abs(value) / vmax))
        x = gap + i * (bar_w + gap)
        y = base + (height - h)
        parts.append(
            f'<rect x="{x}" y="{y}" width="{bar_w}" height="{h}" fill="#4878a8"/>'
        )
        parts.append(f'<text x="{x}" y="{y - 4}">{value:.6g}</text>')
        parts.append(f'<text x="{x}" y="{base + height + 16}">{label}</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(parts) + "\n")
