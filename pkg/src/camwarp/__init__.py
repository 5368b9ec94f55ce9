"""Deterministic geometric core for camera trajectory editing.

Lifts per-frame depth into pointmaps, computes target-view flow fields,
performs z-buffered reprojection with static/dynamic aggregation, re-aligns
positional-encoding maps, recovers relative poses robustly, and evaluates
the results. The generative rendering that consumes these outputs is out of
scope here; holes are first-class output.
"""

from .camera import (
    CameraTrajectory,
    Intrinsics,
    PoseSE3,
    RelativeTransform,
    apply_relative,
    interpolate_trajectory,
    preset_trajectory,
    project,
    relative_pose,
    unproject,
)
from .geometry import (
    DepthMap,
    DynamicMask,
    FlowField,
    Pointmap,
    compute_flow,
    estimate_dynamic_mask,
    lift_depth,
)
from .metrics import MetricReport, difficulty_distortion, occlusion_masks, psnr, ssim
from .pe import CoordinateMap, PEMap, coordinate_maps, realign_pe, sinusoidal_pe
from .pose import (
    Correspondence,
    PoseEstimationError,
    RansacConfig,
    pnp_ransac,
    pose_from_depth_matches,
    refine_pose,
)
from .synth import SyntheticScene, analytic_plane_flow, make_scene, render_scene
from .warp import Frame, WarpResult, aggregate_all_frames, backward_sample, forward_warp

__version__ = "0.1.0"

__all__ = [
    "CameraTrajectory", "Intrinsics", "PoseSE3", "RelativeTransform",
    "apply_relative", "interpolate_trajectory", "preset_trajectory",
    "project", "relative_pose", "unproject",
    "DepthMap", "DynamicMask", "FlowField", "Pointmap",
    "compute_flow", "estimate_dynamic_mask", "lift_depth",
    "MetricReport", "difficulty_distortion", "occlusion_masks", "psnr", "ssim",
    "CoordinateMap", "PEMap", "coordinate_maps", "realign_pe", "sinusoidal_pe",
    "Correspondence", "PoseEstimationError", "RansacConfig",
    "pnp_ransac", "pose_from_depth_matches", "refine_pose",
    "SyntheticScene", "analytic_plane_flow", "make_scene", "render_scene",
    "Frame", "WarpResult", "aggregate_all_frames", "backward_sample", "forward_warp",
]
