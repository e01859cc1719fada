"""Command-line front end.

Exit codes: 0 success, 1 processing error (stage and cause on stderr),
2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import warnings
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import __version__
from .config import PipelineConfig, load_config
from .core.cloud import ClassLabel
from .core.io import load_point_cloud, save_point_cloud
from .errors import ConfigError, SpecError, TerrainSegError
from .evaluation.metrics import evaluate, render_report
from .evaluation.synth import SceneSpec, generate_synthetic_scene
from .features import compute_features
from .fusion import fuse
from .rulepipe import annotate
from .segment import clean_building_points, extract_ground, ground_postprocess, smooth_labels

log = logging.getLogger("terrainseg")


class StageFailure(Exception):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"{stage}: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


@contextmanager
def stage(name: str):
    try:
        yield
    except (TerrainSegError, ValueError, IndexError, OSError) as exc:
        raise StageFailure(name, exc) from exc


def _json_value(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, (np.floating, np.integer)):
        return _json_value(x.item())
    return x


def _write_text(path, text: str):
    Path(path).write_text(text, encoding="utf-8", newline="\n")


def cmd_features(args, cfg: PipelineConfig):
    with stage("load"):
        cloud = load_point_cloud(args.input)
    with stage("features"):
        feats = compute_features(cloud, cfg.features)
    lines = "".join(feats.dump_lines())
    header = "# id verticality roughness density valid\n"
    if args.output:
        with stage("write"):
            _write_text(args.output, header + lines)
    else:
        sys.stdout.write(header + lines)


def _ground_ids(cloud, mode, cfg):
    if mode is None:
        mode = "from-file" if cloud.has_labels else "auto"
    if mode == "from-file":
        if not cloud.has_labels:
            raise ValueError("input has no label property; use --ground-labels auto")
        return np.flatnonzero(cloud.labels == ClassLabel.GROUND)
    ids = extract_ground(cloud, cfg.ground)
    if cfg.stages.ground_postprocess:
        ids, _ = ground_postprocess(cloud, ids)
    return ids


def cmd_annotate(args, cfg: PipelineConfig):
    out = Path(args.output) if args.output else Path(args.input).with_suffix(".labeled.ply")
    trace_path = Path(args.trace) if args.trace else out.with_suffix(".trace.txt")
    with stage("load"):
        cloud = load_point_cloud(args.input)
    with stage("ground"):
        ground = _ground_ids(cloud, args.ground_labels, cfg)
    with stage("annotate"):
        result = annotate(cloud, ground, cfg.rules, cfg.features, cfg.stages.roof_stages)
    labels = result.cloud.labels
    if cfg.stages.smooth:
        with stage("smooth"):
            labels = smooth_labels(cloud, labels, cfg.smooth)
    if cfg.stages.clean:
        with stage("clean"):
            labels = clean_building_points(cloud, labels, cfg.smooth)
    with stage("write"):
        save_point_cloud(cloud.with_labels(labels), out)
        report = result.trace.report() if result.trace is not None else "no non-ground points\n"
        _write_text(trace_path, report)
    for note in result.warnings:
        print(f"warning: {note}", file=sys.stderr)


def cmd_evaluate(args, cfg: PipelineConfig):
    with stage("load"):
        pred = load_point_cloud(args.pred)
        truth = load_point_cloud(args.truth)
        if not pred.has_labels or not truth.has_labels:
            raise ValueError("both clouds need a label property")
    with stage("evaluate"):
        report = evaluate(pred.labels, truth.labels)
    sys.stdout.write(render_report(report))
    if args.json:
        with stage("write"):
            _write_text(args.json, report.to_json())


def cmd_fuse(args, cfg: PipelineConfig):
    out = Path(args.output)
    with stage("load"):
        uav = load_point_cloud(args.uav)
        bing = load_point_cloud(args.bing)
    with stage("fuse"):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            result = fuse(uav, bing, config=cfg.fusion_config(False if args.no_semantic else None))
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    diag = {k: _json_value(v) for k, v in result.diagnostics.items()}
    diag["stages"] = {k: [_json_value(v) for v in t.matrix().ravel()] for k, t in result.stages.items()}
    diag["warnings"] = list(result.warnings)
    diag["bing_points_kept"] = len(result.trimmed_bing)
    with stage("write"):
        out.mkdir(parents=True, exist_ok=True)
        _write_text(out / "transform.txt", result.transform.to_text())
        save_point_cloud(result.trimmed_bing, out / "bing_trimmed.ply")
        save_point_cloud(result.aligned_uav, out / "uav_aligned.ply")
        _write_text(out / "diagnostics.json", json.dumps(diag, indent=2, sort_keys=True) + "\n")


def cmd_synth(args, cfg: PipelineConfig):
    with stage("spec"):
        try:
            data = json.loads(Path(args.spec).read_text())
        except json.JSONDecodeError as exc:
            raise SpecError(f"spec is not valid JSON: {exc}") from exc
        spec = SceneSpec.from_dict(data)
    with stage("synth"):
        cloud, truth = generate_synthetic_scene(spec)
    with stage("write"):
        save_point_cloud(cloud if args.strip_labels else cloud.with_labels(truth), args.output)
        if args.truth:
            save_point_cloud(cloud.with_labels(truth), args.truth)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="terrainseg", description="Rule-based point-cloud annotation and fusion.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    p.add_argument("--config", help="JSON config file (overrides defaults key by key)")
    p.add_argument("--print-config", action="store_true", help="print the effective config and exit")
    sub = p.add_subparsers(dest="command", metavar="COMMAND")

    def add(name, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", dest="sub_config", help="JSON config file")
        return sp

    sp = add("features", "compute and dump per-point features")
    sp.add_argument("input")
    sp.add_argument("-o", "--output", help="dump file (default: stdout)")
    sp.set_defaults(func=cmd_features)

    sp = add("annotate", "label ground, building and tree points")
    sp.add_argument("input")
    sp.add_argument("-o", "--output", help="labeled cloud (default: <input>.labeled.ply)")
    sp.add_argument("--ground-labels", choices=("from-file", "auto"),
                    help="ground source (default: from-file when labels are present, else auto)")
    sp.add_argument("--trace", help="stage trace report (default: next to the output)")
    sp.set_defaults(func=cmd_annotate)

    sp = add("evaluate", "print the metrics table for a labeled cloud against truth")
    sp.add_argument("pred")
    sp.add_argument("truth")
    sp.add_argument("--json", help="also write the metrics as JSON")
    sp.set_defaults(func=cmd_evaluate)

    sp = add("fuse", "register a UAV cloud onto a Bing cloud and trim the overlap")
    sp.add_argument("uav")
    sp.add_argument("bing")
    sp.add_argument("-o", "--output", default="fused", help="output directory")
    sp.add_argument("--no-semantic", action="store_true", help="skip the ground-border stage")
    sp.set_defaults(func=cmd_fuse)

    sp = add("synth", "generate a synthetic scene with truth labels")
    sp.add_argument("spec", help="JSON scene spec")
    sp.add_argument("-o", "--output", required=True)
    sp.add_argument("--truth", help="also write a labeled copy here")
    sp.add_argument("--strip-labels", action="store_true", help="omit labels from --output")
    sp.set_defaults(func=cmd_synth)
    return p


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    config_path = getattr(args, "sub_config", None) or args.config
    try:
        cfg = load_config(config_path) if config_path else PipelineConfig()
    except ConfigError as exc:
        print(f"terrainseg: config error: {exc}", file=sys.stderr)
        return 2
    if args.print_config:
        sys.stdout.write(cfg.to_json())
        return 0
    if args.command is None:
        parser.print_usage(sys.stderr)
        print("terrainseg: error: a command is required", file=sys.stderr)
        return 2
    try:
        args.func(args, cfg)
    except StageFailure as exc:
        print(f"terrainseg: error in stage {exc}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(run_cli())
