"""Command-line entry point: one subcommand per pipeline stage.

A scene directory holds::

    scene.json            objects, poses, masses (input)
    views/                depth images + JSON sidecars (input)
    cloud.ply             fused, labeled point cloud          <- fuse
    candidates.jsonl      suction candidates                   <- sample
    evaluations.jsonl     per-candidate gate outcomes          <- evaluate
    scores.ply/.json      ground-truth score map               <- annotate
    affordance.ply        baseline score map                   <- rank
    ranked.jsonl          ranked grasps                        <- rank
    metrics.json          precision report                     <- metrics

Exit codes: 0 ok, 1 runtime failure, 2 input or configuration error.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from collections import Counter
from pathlib import Path

import numpy as np

from .config import ConfigError, PipelineConfig
from .geometry.io import FormatError

DEFAULT_SCENE = "scene_000"


def _cloud_path(d: Path) -> Path:
    return d / "cloud.ply"


def _require(path: Path) -> Path:
    if not path.exists():
        raise FileNotFoundError(f"missing input: {path}")
    return path


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2) + "\n")


# ----------------------------------------------------------------------------
# stages

def cmd_make_demo(args, cfg: PipelineConfig) -> int:
    """Write the bundled demo scene plus rendered depth views."""
    from .fixtures import demo_cameras, demo_scene
    from .geometry.bvh import SceneIndex
    from .geometry.camera import render_depth
    from .geometry.io import write_scene, write_view
    from .geometry.types import CameraIntrinsics

    out = Path(args.out) / args.scene_name
    out.mkdir(parents=True, exist_ok=True)
    scene = demo_scene()
    write_scene(out / "scene.json", scene)
    r = cfg.render
    intr = CameraIntrinsics.from_fov(r.width, r.height, r.hfov_deg)
    index = SceneIndex(scene)
    for k, pose in enumerate(demo_cameras(r.n_views, r.ring_radius, r.ring_height)):
        depth, labels = render_depth(index, intr, pose)
        write_view(out / "views", f"view_{k:03d}", depth, intr, pose, labels, fmt="f32")
    print(f"wrote {out}")
    return 0


def fuse_views(view_dir, cfg: PipelineConfig):
    """Back-project every view, estimate normals per view and object, merge and crop."""
    from .geometry.camera import depth_to_pointcloud, merge_views
    from .geometry.io import list_views, read_view
    from .geometry.normals import estimate_normals
    from .geometry.types import PointCloud

    view_dir = Path(view_dir)
    sidecars = list_views(view_dir)
    # a depth image without a sidecar has no intrinsics
    for img in sorted(list(view_dir.glob("*.pgm")) + list(view_dir.glob("*.f32"))):
        if img.stem.endswith("_labels"):
            continue
        if not img.with_suffix(".json").exists():
            raise FileNotFoundError(f"intrinsics not found: {img.with_suffix('.json')}")
    if not sidecars:
        raise FileNotFoundError(f"intrinsics not found: no view sidecars in {view_dir}")
    k = cfg.fusion.normal_k
    clouds = []
    for side in sidecars:
        depth, intr, extr, labels = read_view(side)
        pc = depth_to_pointcloud(depth, intr, extr, labels)
        if pc.labels is None:
            pc = pc.with_labels(np.zeros(len(pc), dtype=np.int64))
        parts = []
        for inst in np.unique(pc.labels):
            sub = pc.subset(np.flatnonzero(pc.labels == inst))
            if len(sub) < 4:
                continue
            parts.append(estimate_normals(sub, min(k, len(sub) - 1), extr.translation))
        if parts:
            clouds.append(PointCloud(np.vstack([p.points for p in parts]),
                                     np.vstack([p.normals for p in parts]),
                                     np.concatenate([p.labels for p in parts])))
    if not clouds:
        raise ValueError("views contain no valid depth")
    merged = merge_views(clouds, cfg.fusion.voxel)
    lo, hi = np.array(cfg.fusion.workspace_min), np.array(cfg.fusion.workspace_max)
    inside = np.all((merged.points >= lo) & (merged.points <= hi), axis=1)
    return merged.subset(np.flatnonzero(inside))


def cmd_fuse(args, cfg: PipelineConfig) -> int:
    from .geometry.io import write_ply

    d = Path(args.scene_dir)
    views = Path(args.views or cfg.io.views or d / "views")
    cloud = fuse_views(views, cfg)
    out = Path(args.out) if args.out else _cloud_path(d)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_ply(out, cloud)
    print(f"fused {len(cloud)} points -> {out}")
    return 0


def cmd_sample(args, cfg: PipelineConfig) -> int:
    from .candidates import generate_candidates, write_candidates
    from .geometry.io import read_ply

    d = Path(args.scene_dir)
    cloud = read_ply(_require(_cloud_path(d)))
    if cloud.normals is None or cloud.labels is None:
        raise FormatError(f"{_cloud_path(d)}: needs nx,ny,nz and instance_id properties")
    cands = generate_candidates(cloud, cfg.sampler_config())
    write_candidates(d / "candidates.jsonl", cands)
    flagged = Counter(f for c in cands for f in c.flags)
    extra = "".join(f", {n} {f}" for f, n in sorted(flagged.items()))
    print(f"sampled {len(cands)} candidates{extra}")
    return 0


def _scene(d: Path, cfg: PipelineConfig):
    from .geometry.io import read_scene
    path = Path(cfg.io.scene) if cfg.io.scene else d / "scene.json"
    return read_scene(_require(path))


def _evaluator(d: Path, cfg: PipelineConfig):
    from .geometry.bvh import SceneIndex
    from .wrench import Evaluator, build_support_graph

    scene = _scene(d, cfg)
    index = SceneIndex(scene)
    graph = build_support_graph(scene, index, cfg.wrench.contact_gap)
    return Evaluator(scene, cfg.cup_model(), cfg.collision_params(), index, graph)


def cmd_evaluate(args, cfg: PipelineConfig) -> int:
    from .candidates import read_candidates
    from .wrench import GATES, write_evaluations

    d = Path(args.scene_dir)
    gate = args.gate or cfg.evaluation.gate
    cands = read_candidates(_require(d / "candidates.jsonl"))
    ev = _evaluator(d, cfg)
    records = ev.evaluate_parallel(cands, cfg.worker_count(), GATES[gate])
    write_evaluations(d / "evaluations.jsonl", records)
    print(f"evaluated {len(records)} candidates (gates: {gate})")
    for name, attr in (("collision", "q_collision"), ("seal", "q_seal"), ("dynamics", "q_dynamics")):
        vals = [getattr(r, attr) for r in records]
        run = sum(v is not None for v in vals)
        if run == 0:
            print(f"  {name:<10} skipped")
        else:
            print(f"  {name:<10} {sum(v is True for v in vals):>6} / {run} passed")
    print(f"  {'Q':<10} {sum(r.q for r in records):>6} / {len(records)}")
    return 0


def _joined_records(d: Path):
    """Candidates with q == 1, joined from candidates.jsonl and evaluations.jsonl."""
    from .candidates import read_candidates
    from .wrench import read_evaluations

    cands = {c.candidate_id: c for c in read_candidates(_require(d / "candidates.jsonl"))}
    out = []
    for i, r in enumerate(read_evaluations(_require(d / "evaluations.jsonl"))):
        for key in ("candidate_id", "q"):
            if key not in r:
                raise FormatError(f"evaluations.jsonl:{i + 1}.{key}: missing")
        if r["candidate_id"] not in cands:
            raise FormatError(f"evaluations.jsonl:{i + 1}.candidate_id: unknown id {r['candidate_id']}")
        if r["q"] == 1:
            out.append(cands[r["candidate_id"]])
    return out


def cmd_annotate(args, cfg: PipelineConfig) -> int:
    from .annotation import annotate_scores, crop_patches, write_score_map
    from .geometry.io import read_ply, write_ply
    from .geometry.spatial import PointIndex

    d = Path(args.scene_dir)
    cloud = read_ply(_require(_cloud_path(d)))
    positives = _joined_records(d)
    index = PointIndex(cloud)
    score_map = annotate_scores(cloud, index, positives, cfg.annotation.radius)
    write_score_map(d / "scores.ply", cloud, score_map)
    print(f"annotated {int(score_map.scores.sum())} / {len(cloud)} points "
          f"from {len(positives)} passing candidates")
    n = cfg.annotation.n_patches
    if n > 0:
        pdir = d / "patches"
        pdir.mkdir(exist_ok=True)
        patches = crop_patches(cloud, score_map, n, cfg.annotation.points_per_patch,
                               cfg.seed, index)
        for k, p in enumerate(patches):
            write_ply(pdir / f"patch_{k:03d}.ply", p.cloud, extra={"score": p.scores.scores})
        print(f"wrote {n} patches to {pdir}")
    return 0


def cmd_rank(args, cfg: PipelineConfig) -> int:
    from .annotation import read_score_map, write_score_colors, write_score_map
    from .candidates import read_candidates
    from .geometry.io import read_ply
    from .policy import normal_variance_affordance, rank_candidates, safety_margin_filter, write_ranked

    d = Path(args.scene_dir)
    cloud = read_ply(_require(_cloud_path(d)))
    cands = read_candidates(_require(d / "candidates.jsonl"))
    scores_path = args.scores or cfg.io.scores
    if scores_path:
        score_cloud, scores = read_score_map(_require(Path(scores_path)))
        if len(score_cloud) != len(cloud):
            raise FormatError(f"{scores_path}: point count differs from cloud.ply")
    else:
        scores = normal_variance_affordance(cloud, radius=cfg.policy.affordance_radius)
        write_score_map(d / "affordance.ply", cloud, scores, sidecar=False)
    margin = cfg.policy.safety_margin if args.margin is None else args.margin
    if margin > 0:
        cands = safety_margin_filter(_scene(d, cfg), cands, margin)
    ranked = rank_candidates(cands, scores)
    write_ranked(d / "ranked.jsonl", ranked)
    if args.colored:
        write_score_colors(args.colored, cloud, scores)
    print(f"ranked {len(ranked)} candidates")
    return 0


def cmd_metrics(args, cfg: PipelineConfig) -> int:
    from .evaluation import BUCKETS, aggregate_reports, batch_oracle, online_precision
    from .policy import read_ranked
    from .wrench import GATES, read_evaluations

    reports, names = [], []
    for sd in args.scene_dirs:
        d = Path(sd)
        ranked = read_ranked(_require(d / "ranked.jsonl"))
        if args.online:
            ev = _evaluator(d, cfg)
            gates = GATES[cfg.evaluation.gate]
            oracle = lambda c, ev=ev: ev.evaluate([c], gates)[0]
        else:
            oracle = batch_oracle(read_evaluations(_require(d / "evaluations.jsonl")))
        rep = online_precision(ranked, oracle)
        reports.append(rep)
        names.append(d.name)
        print(f"== {d.name}")
        print(rep.to_text())
        _write_json(d / "metrics.json", {"precision": rep.as_row(),
                                         "n_evaluated": rep.n_evaluated,
                                         "n_positive": rep.n_positive})
    agg = aggregate_reports(reports)
    if len(reports) > 1:
        for kind in ("mean", "pooled"):
            print(f"== {kind} over {len(reports)} scenes")
            print("  ".join(f"{k}={v:.4f}" for k, v in agg[kind].items()))
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["scene"] + [b for b, _ in BUCKETS])
            for name, rep in zip(names, reports):
                w.writerow([name] + [f"{rep.as_row()[b]:.6f}" for b, _ in BUCKETS])
            for kind in ("mean", "pooled"):
                w.writerow([kind] + [f"{agg[kind][b]:.6f}" for b, _ in BUCKETS])
    return 0


def cmd_compare_models(args, cfg: PipelineConfig) -> int:
    from .evaluation import model_comparison_report

    rep = model_comparison_report(cup=cfg.cup_model())
    text = rep.to_csv()
    if args.csv:
        Path(args.csv).write_text(text)
    if args.json:
        _write_json(Path(args.json), rep.to_json())
    sys.stdout.write(text)
    wrong = [r["case"] for r in rep.rows if r["full_960"] != r["expected_960"]]
    print(f"{len(rep.rows)} cases, {len(rep.disagreements)} disagreements between models, "
          f"{len(wrong)} full-model mismatches with the analytic table")
    return 0


def cmd_fixtures(args, cfg: PipelineConfig) -> int:
    from .fixtures import emit_fixtures

    path = emit_fixtures(args.emit, cfg.cup_model())
    print(f"wrote {path}")
    return 0


def cmd_config_dump(args, cfg: PipelineConfig) -> int:
    sys.stdout.write(cfg.dumps())
    return 0


def cmd_pipeline(args, cfg: PipelineConfig) -> int:
    """make-demo, fuse, sample, evaluate, annotate, rank, metrics in one go."""
    args.scene_name = DEFAULT_SCENE
    cmd_make_demo(args, cfg)
    d = Path(args.out) / DEFAULT_SCENE
    ns = argparse.Namespace(scene_dir=str(d), views=None, out=None, gate=None, scores=None,
                            margin=None, colored=None, scene_dirs=[str(d)], online=False, csv=None)
    for step in (cmd_fuse, cmd_sample, cmd_evaluate, cmd_annotate, cmd_rank, cmd_metrics):
        step(ns, cfg)
    return 0


# ----------------------------------------------------------------------------
# argument parsing

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (see config-dump for all fields)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config field, e.g. --set cup.preset=cup_25mm")
    common.add_argument("--jobs", type=int, help="worker threads (0 = one per CPU)")
    common.add_argument("--seed", type=int, help="random seed")

    p = argparse.ArgumentParser(prog="suctiongrasp", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        sp = sub.add_parser(name, parents=[common], help=help_, description=help_)
        sp.set_defaults(func=func)
        return sp

    sp = add("make-demo", cmd_make_demo, "write the demo scene and rendered depth views")
    sp.add_argument("out", help="dataset directory")
    sp.add_argument("--scene-name", default=DEFAULT_SCENE)

    sp = add("fuse", cmd_fuse, "fuse depth views into a labeled cloud with normals (cloud.ply)")
    sp.add_argument("scene_dir")
    sp.add_argument("--views", help="view directory (default: SCENE_DIR/views)")
    sp.add_argument("--out", help="output PLY (default: SCENE_DIR/cloud.ply)")

    sp = add("sample", cmd_sample, "sample suction candidates (candidates.jsonl)")
    sp.add_argument("scene_dir")

    sp = add("evaluate", cmd_evaluate, "run the quality gates (evaluations.jsonl)")
    sp.add_argument("scene_dir")
    sp.add_argument("--gate", choices=["all", "geometric", "seal-only"],
                    help="gate set: all, geometric (collision + seal) or seal-only")

    sp = add("annotate", cmd_annotate, "build the ground-truth score map (scores.ply)")
    sp.add_argument("scene_dir")

    sp = add("rank", cmd_rank, "rank candidates by a score map (ranked.jsonl)")
    sp.add_argument("scene_dir")
    sp.add_argument("--scores", help="external score map PLY with a 'score' property "
                                     "(default: baseline flatness affordance)")
    sp.add_argument("--margin", type=float, help="safety margin in meters")
    sp.add_argument("--colored", help="also write a PLY colored by score")

    sp = add("metrics", cmd_metrics, "top-k precision of ranked grasps (metrics.json)")
    sp.add_argument("scene_dirs", nargs="+")
    sp.add_argument("--online", action="store_true",
                    help="query the evaluator per candidate instead of reading evaluations.jsonl")
    sp.add_argument("--csv", help="write per-scene and aggregate rows to this CSV")

    sp = add("compare-models", cmd_compare_models,
             "compare the full and 8-vertex seal models on the test board")
    sp.add_argument("--csv", help="write the comparison table")
    sp.add_argument("--json", help="write the table and disagreement report")

    sp = add("fixtures", cmd_fixtures, "emit test-board pads and scenes")
    sp.add_argument("--emit", required=True, metavar="DIR")

    add("config-dump", cmd_config_dump, "print the effective configuration")

    sp = add("pipeline", cmd_pipeline, "run every stage on the demo scene")
    sp.add_argument("out", help="dataset directory")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        overrides = list(args.set)
        if args.jobs is not None:
            overrides.append(f"jobs={args.jobs}")
        if args.seed is not None:
            overrides.append(f"seed={args.seed}")
        cfg = PipelineConfig.load(args.config, overrides)
        return args.func(args, cfg)
    except (ConfigError, FormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
