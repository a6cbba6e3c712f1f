"""
From depth images to ranked grasps
==================================

The full chain on the bundled clutter scene, in process: render a ring of
depth views, fuse them into one labeled cloud, sample candidates per object,
run the quality gates, turn the passing grasps into a score map, and see how
well the flatness baseline ranks the candidates. The ``suctiongrasp pipeline``
command does the same and writes every stage to disk.
"""

import numpy as np

from suctiongrasp.annotation import annotate_scores
from suctiongrasp.candidates import SamplerConfig, generate_candidates
from suctiongrasp.config import PipelineConfig
from suctiongrasp.evaluation import batch_oracle, mse_score, online_precision
from suctiongrasp.fixtures import demo_cameras, demo_scene
from suctiongrasp.geometry import (CameraIntrinsics, PointCloud, PointIndex, SceneIndex,
                                   depth_to_pointcloud, estimate_normals, merge_views,
                                   render_depth)
from suctiongrasp.policy import normal_variance_affordance, rank_candidates
from suctiongrasp.wrench import Evaluator

cfg = PipelineConfig()
scene = demo_scene()
index = SceneIndex(scene)
intr = CameraIntrinsics.from_fov(320, 240, 60.0)

# render and back-project; normals are estimated per view and per object
clouds = []
for pose in demo_cameras(4):
    depth, labels = render_depth(index, intr, pose)
    view = depth_to_pointcloud(depth, intr, pose, labels)
    parts = [estimate_normals(view.subset(np.flatnonzero(view.labels == i)), 20, pose.translation)
             for i in np.unique(view.labels)]
    clouds.append(PointCloud(np.vstack([p.points for p in parts]),
                             np.vstack([p.normals for p in parts]),
                             np.concatenate([p.labels for p in parts])))
cloud = merge_views(clouds, voxel=0.002)
# keep the table top only
lo, hi = np.array(cfg.fusion.workspace_min), np.array(cfg.fusion.workspace_max)
cloud = cloud.subset(np.flatnonzero(np.all((cloud.points >= lo) & (cloud.points <= hi), axis=1)))
print(f"fused cloud: {len(cloud)} points, instances {sorted(set(cloud.labels.tolist()))}")

# 100 candidates per object, spread out by farthest point sampling
cands = generate_candidates(cloud, SamplerConfig(100))
records = Evaluator(scene, cfg.cup_model()).evaluate(cands)
print(f"{len(cands)} candidates")
print(f"  clear of obstacles: {sum(r.q_collision is True for r in records)}")
print(f"  and sealing:        {sum(r.q_seal is True for r in records)}")
print(f"  and liftable:       {sum(r.q for r in records)}")
lifted = [r.wrench for r in records if r.wrench is not None and not r.wrench.passed]
for reason in ("force", "torque", "bend"):
    print(f"  lift failures by {reason}: {sum(w.failure_reason == reason for w in lifted)}")

# ground truth: everything within 1.5 cm of a passing contact
pindex = PointIndex(cloud)
truth = annotate_scores(cloud, pindex, records)
baseline = normal_variance_affordance(cloud)
print(f"positive points: {int(truth.scores.sum())} of {len(cloud)}")
print(f"baseline vs truth, mean squared error: {mse_score(baseline, truth):.4f}")

# flatness alone does not see weight or clearance, so its precision is modest
ranked = rank_candidates(cands, baseline)
report = online_precision(ranked, batch_oracle(records))
print()
print(report.to_text())
