"""Procedural synthetic scenes with closed-form geometry and textures.

Every scene is ray-cast analytically: depths are exact, textures are
band-limited functions of the surface point (no sampling noise), and
generation is bit-deterministic for fixed parameters. These scenes supply
the independent ground truth for flow, warp, aggregation, and pose tests.

World coordinates coincide with the identity camera's frame (+z into the
scene). Planes are fronto-parallel to that frame.
"""

from dataclasses import dataclass

import numpy as np

from .camera import CameraTrajectory, Intrinsics, PoseSE3
from .geometry import DepthMap, DynamicMask, FlowField, pixel_grid
from .warp import Frame

SCENE_KINDS = ("checker_plane", "two_planes", "textured_sphere", "moving_box")

_DEFAULTS = {
    "checker_plane": {"depth": 5.0, "period": 4.0},
    "two_planes": {
        "near_depth": 2.0,
        "far_depth": 4.0,
        "near_half_size": 0.5,
        "period": 4.0,
    },
    "textured_sphere": {
        "radius": 0.8,
        "depth": 3.0,
        "background_depth": 8.0,
        "period": 4.0,
    },
    "moving_box": {
        "box_depth": 2.5,
        "background_depth": 5.0,
        "half_size": 0.4,
        "velocity_x": 0.1,
        "velocity_y": 0.0,
        "period": 4.0,
    },
}


@dataclass(frozen=True)
class SyntheticScene:
    frames: tuple
    depths: tuple
    trajectory: CameraTrajectory
    dynamic_masks: tuple
    description: dict

    def __post_init__(self):
        n = len(self.frames)
        if not (len(self.depths) == len(self.trajectory.poses) == len(self.dynamic_masks) == n):
            raise ValueError("scene sequences must have equal length")

    @property
    def frame_count(self):
        return len(self.frames)


def default_camera(width=128, height=96):
    return Intrinsics(fx=100.0, fy=100.0, cx=width / 2.0, cy=height / 2.0, width=width, height=height)


def static_trajectory(intrinsics, frame_count):
    return CameraTrajectory(intrinsics, tuple(PoseSE3.identity() for _ in range(frame_count)))


def _plane_texture(x, y, period):
    # smoothed checker: product of sines keeps the spectrum band-limited so
    # sub-pixel resampling error stays small
    a = np.sin(2.0 * np.pi * x / period) * np.sin(2.0 * np.pi * y / period)
    r = 0.5 + 0.35 * a
    g = 0.5 + 0.35 * np.sin(2.0 * np.pi * (x + y) / (1.7 * period))
    b = 0.5 + 0.35 * np.cos(2.0 * np.pi * (x - y) / (1.3 * period))
    return np.stack([r, g, b], axis=-1)


def _sphere_texture(pt, center, period):
    local = pt - center
    r = 0.5 + 0.3 * np.sin(2.0 * np.pi * local[..., 0] / period) * np.cos(
        2.0 * np.pi * local[..., 1] / period
    )
    g = 0.5 + 0.3 * np.cos(2.0 * np.pi * (local[..., 1] + local[..., 2]) / period)
    b = 0.55 + 0.25 * np.sin(2.0 * np.pi * local[..., 2] / period)
    return np.stack([r, g, b], axis=-1)


def _box_color(t):
    # per-frame distinct color so aggregation tests can trace provenance
    return np.array([220.0, (30.0 + 17.0 * t) % 256.0, 40.0]) / 255.0


def _rays(pose, intrinsics):
    """Ray origins and directions in world coordinates.

    Directions are scaled so the ray parameter equals camera z-depth.
    """
    grid = pixel_grid(intrinsics.height, intrinsics.width)
    d_cam = np.stack(
        [
            (grid[..., 0] - intrinsics.cx) / intrinsics.fx,
            (grid[..., 1] - intrinsics.cy) / intrinsics.fy,
            np.ones_like(grid[..., 0]),
        ],
        axis=-1,
    )
    origin = pose.center()
    directions = d_cam @ pose.rotation  # == d_cam @ (R^T)^T, i.e. R^T applied
    return origin, directions


def _plane_hit(origin, directions, depth):
    dz = directions[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        s = (depth - origin[2]) / dz
    return np.where((dz > 1e-12) | (dz < -1e-12), s, -1.0)


def _cast(kind, params, t, origin, directions):
    """Nearest-hit query: returns (depth, color [0,1], hit, dynamic)."""
    shape = directions.shape[:2]
    depth = np.full(shape, np.inf)
    color = np.zeros(shape + (3,))
    dynamic = np.zeros(shape, dtype=bool)
    period = params["period"]

    def consider(s, colors, dyn=False):
        nonlocal depth, color, dynamic
        hit = (s > 1e-9) & (s < depth)
        depth = np.where(hit, s, depth)
        color = np.where(hit[..., None], colors, color)
        dynamic = np.where(hit, dyn, dynamic)

    if kind == "checker_plane":
        s = _plane_hit(origin, directions, params["depth"])
        pt = origin + s[..., None] * directions
        consider(s, _plane_texture(pt[..., 0], pt[..., 1], period))
    elif kind == "two_planes":
        s_far = _plane_hit(origin, directions, params["far_depth"])
        pt = origin + s_far[..., None] * directions
        consider(s_far, _plane_texture(pt[..., 0] + 0.33, pt[..., 1], period))
        s_near = _plane_hit(origin, directions, params["near_depth"])
        pt = origin + s_near[..., None] * directions
        half = params["near_half_size"]
        inside = (np.abs(pt[..., 0]) <= half) & (np.abs(pt[..., 1]) <= half)
        s_near = np.where(inside, s_near, -1.0)
        consider(s_near, 0.2 + 0.6 * _plane_texture(pt[..., 0], pt[..., 1], 0.8 * period))
    elif kind == "textured_sphere":
        s_bg = _plane_hit(origin, directions, params["background_depth"])
        pt = origin + s_bg[..., None] * directions
        consider(s_bg, _plane_texture(pt[..., 0], pt[..., 1], period))
        center = np.array([0.0, 0.0, params["depth"]])
        oc = origin - center
        a = np.sum(directions * directions, axis=-1)
        b = 2.0 * np.sum(directions * oc, axis=-1)
        c = float(oc @ oc) - params["radius"] ** 2
        disc = b * b - 4.0 * a * c
        with np.errstate(invalid="ignore"):
            s_sph = (-b - np.sqrt(disc)) / (2.0 * a)
        s_sph = np.where(disc >= 0, s_sph, -1.0)
        pt = origin + s_sph[..., None] * directions
        consider(s_sph, _sphere_texture(pt, center, period))
    elif kind == "moving_box":
        s_bg = _plane_hit(origin, directions, params["background_depth"])
        pt = origin + s_bg[..., None] * directions
        consider(s_bg, _plane_texture(pt[..., 0], pt[..., 1], period))
        s_box = _plane_hit(origin, directions, params["box_depth"])
        pt = origin + s_box[..., None] * directions
        bx = params["velocity_x"] * t
        by = params["velocity_y"] * t
        half = params["half_size"]
        inside = (np.abs(pt[..., 0] - bx) <= half) & (np.abs(pt[..., 1] - by) <= half)
        s_box = np.where(inside, s_box, -1.0)
        consider(s_box, np.broadcast_to(_box_color(t), pt.shape).copy(), dyn=True)
    else:
        raise ValueError(f"unknown scene kind {kind!r}; expected one of {SCENE_KINDS}")

    hit = np.isfinite(depth)
    return np.where(hit, depth, 0.0), color, hit, dynamic


def _quantize(color):
    return np.clip(np.floor(color * 255.0 + 0.5), 0, 255).astype(np.uint8)


def render_scene(scene, pose, intrinsics=None, time_index=0):
    """Analytic ray cast of the scene at an arbitrary pose.

    time_index selects the frame for time-varying geometry (the moving box).
    """
    k = intrinsics if intrinsics is not None else scene.trajectory.intrinsics
    origin, directions = _rays(pose, k)
    depth, color, hit, _ = _cast(
        scene.description["kind"], scene.description["params"], time_index, origin, directions
    )
    return Frame(_quantize(color)), DepthMap(depth, hit)


def make_scene(kind, params=None, frame_count=12, camera=None):
    """Build a deterministic synthetic scene with exact depths and masks."""
    if kind not in SCENE_KINDS:
        raise ValueError(f"unknown scene kind {kind!r}; expected one of {SCENE_KINDS}")
    merged = dict(_DEFAULTS[kind])
    for key, value in (params or {}).items():
        if key not in merged:
            raise ValueError(f"unknown param {key!r} for scene kind {kind!r}")
        merged[key] = float(value)
    if camera is None:
        camera = static_trajectory(default_camera(), frame_count)
    if len(camera.poses) != frame_count:
        raise ValueError(
            f"camera trajectory length {len(camera.poses)} != frame count {frame_count}"
        )
    frames, depths, masks = [], [], []
    for t, pose in enumerate(camera.poses):
        origin, directions = _rays(pose, camera.intrinsics)
        depth, color, hit, dynamic = _cast(kind, merged, t, origin, directions)
        frames.append(Frame(_quantize(color)))
        depths.append(DepthMap(depth, hit))
        masks.append(DynamicMask(dynamic))
    return SyntheticScene(
        tuple(frames),
        tuple(depths),
        camera,
        tuple(masks),
        {"kind": kind, "params": merged},
    )


def analytic_plane_flow(plane_depth, e_src, e_tgt, intrinsics):
    """Exact flow a fronto-parallel plane induces between two cameras.

    The plane sits at z = plane_depth in the source camera frame. The flow
    follows the plane homography H = K (R + t n^T / d) K^-1 of the relative
    transform; target depths are exact.
    """
    if plane_depth <= 0:
        raise ValueError("plane must be in front of the source camera")
    rel = e_tgt.compose(e_src.inverse())
    r, t = rel.rotation, rel.translation
    k = intrinsics.matrix()
    n = np.array([0.0, 0.0, 1.0])
    h = k @ (r + np.outer(t, n) / plane_depth) @ np.linalg.inv(k)

    grid = pixel_grid(intrinsics.height, intrinsics.width)
    ones = np.ones(grid.shape[:2])
    src_h = np.stack([grid[..., 0], grid[..., 1], ones], axis=-1)
    tgt_h = src_h @ h.T
    # target z-depth of the plane point d*K^-1*(u,v,1) under the relative move
    p = src_h @ np.linalg.inv(k).T
    z = plane_depth * (p @ r[2]) + t[2]
    ok = z > 1e-6
    with np.errstate(divide="ignore", invalid="ignore"):
        u = tgt_h[..., 0] / tgt_h[..., 2]
        v = tgt_h[..., 1] / tgt_h[..., 2]
    vectors = np.stack([u, v], axis=-1) - grid
    vectors = np.where(ok[..., None], vectors, 0.0)
    return FlowField(vectors, ok, np.where(ok, z, 0.0))
