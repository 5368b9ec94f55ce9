"""Forward z-buffered reprojection, multi-frame aggregation, bilinear gather.

All conflict resolution follows a total order so results are bit-identical
regardless of evaluation order: smaller target depth wins, then (for
aggregation) the reference frame beats other frames, then smaller frame
index, then smaller row-major source index. Holes are first-class output;
no inpainting of any kind happens here.
"""

from dataclasses import dataclass

import numpy as np

from .camera import MIN_PROJECTION_DEPTH
from .geometry import FRAME_WORLD, pixel_grid


@dataclass(frozen=True)
class Frame:
    """H x W x 3 8-bit sRGB image."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValueError(f"frame must be HxWx3, got shape {px.shape}")
        if px.dtype != np.uint8:
            raise ValueError(f"frame must be uint8, got {px.dtype}")
        object.__setattr__(self, "pixels", px)

    @property
    def shape(self):
        return self.pixels.shape[:2]


@dataclass(frozen=True)
class WarpResult:
    """Reprojected image, per-pixel target depth (+inf in holes), hole mask."""

    image: Frame
    depth_buffer: np.ndarray
    hole_mask: np.ndarray

    def __post_init__(self):
        holes = np.asarray(self.hole_mask, dtype=bool)
        depth = np.asarray(self.depth_buffer, dtype=np.float64)
        if depth.shape != self.image.shape or holes.shape != self.image.shape:
            raise ValueError("warp result component shapes disagree")
        if not np.array_equal(holes, np.isinf(depth)):
            raise ValueError("hole mask must coincide with infinite depth-buffer entries")
        if np.any(depth[~holes] <= 0):
            raise ValueError("non-hole depths must be positive")
        object.__setattr__(self, "depth_buffer", depth)
        object.__setattr__(self, "hole_mask", holes)

    @property
    def hole_fraction(self):
        return float(np.mean(self.hole_mask))


def _round_pixel(x):
    # round half up, matching rasterization convention; deterministic
    return np.floor(x + 0.5).astype(np.int64)


def _splat(colors, targets_uv, depths, priorities, height, width):
    """Scatter colored points into a z-buffer.

    priorities is a tuple of secondary sort keys (ascending preference) used
    after depth; the winner at each pixel is the lexicographic minimum of
    (depth, *priorities).
    """
    tu, tv = targets_uv
    inside = (tu >= 0) & (tu < width) & (tv >= 0) & (tv < height)
    tu, tv, depths = tu[inside], tv[inside], depths[inside]
    colors = colors[inside]
    keys = tuple(p[inside] for p in priorities)

    image = np.zeros((height, width, 3), dtype=np.uint8)
    depth_buffer = np.full((height, width), np.inf)
    holes = np.ones((height, width), dtype=bool)
    if tu.size == 0:
        return image, depth_buffer, holes

    # sort ascending by (depth, *keys); scattering in reverse order makes the
    # overall minimum the last (surviving) write at each pixel
    order = np.lexsort(keys[::-1] + (depths,))[::-1]
    flat = tv[order] * width + tu[order]
    image.reshape(-1, 3)[flat] = colors[order]
    depth_buffer.reshape(-1)[flat] = depths[order]
    holes.reshape(-1)[flat] = False
    return image, depth_buffer, holes


def forward_warp(frame, flow):
    """Splat each valid source pixel along its flow vector into the target view.

    Conflicts resolve by smaller target depth, then smaller row-major source
    index. Pixels never hit are holes.
    """
    h, w = frame.shape
    if flow.shape != (h, w):
        raise ValueError(f"flow shape {flow.shape} != frame shape {(h, w)}")
    grid = pixel_grid(h, w)
    target = grid + flow.vectors
    valid = flow.validity.reshape(-1)
    tu = _round_pixel(target[..., 0].reshape(-1)[valid])
    tv = _round_pixel(target[..., 1].reshape(-1)[valid])
    depths = flow.target_depth.reshape(-1)[valid]
    colors = frame.pixels.reshape(-1, 3)[valid]
    src_index = np.flatnonzero(valid)
    image, depth_buffer, holes = _splat(colors, (tu, tv), depths, (src_index,), h, w)
    return WarpResult(Frame(image), depth_buffer, holes)


def aggregate_all_frames(frames, pointmaps, dynamic_masks, t, target_pose, intrinsics):
    """All-frame reprojection: static points from every frame plus all of frame t.

    Pointmaps must share the world frame. Every frame contributes its
    static-masked points; frame t additionally contributes its dynamic points.
    One z-buffer resolves visibility; at equal depth frame t wins, then the
    smaller frame index, then the smaller row-major source index.
    """
    n = len(frames)
    if not (len(pointmaps) == len(dynamic_masks) == n):
        raise ValueError(
            f"sequence lengths disagree: {n} frames, {len(pointmaps)} pointmaps, "
            f"{len(dynamic_masks)} masks"
        )
    if not 0 <= t < n:
        raise ValueError(f"frame index {t} outside [0, {n - 1}]")
    for pm in pointmaps:
        if pm.frame != FRAME_WORLD:
            raise ValueError("aggregation requires world-frame pointmaps")

    h, w = frames[0].shape
    all_colors, all_tu, all_tv, all_depth = [], [], [], []
    all_not_t, all_frame_idx, all_src_idx = [], [], []
    for s in range(n):
        if s != t:
            keep = pointmaps[s].validity & ~dynamic_masks[s].mask
        else:
            keep = pointmaps[s].validity
        pts = pointmaps[s].points[keep]
        cam = pts @ target_pose.rotation.T + target_pose.translation
        z = cam[:, 2]
        front = z > MIN_PROJECTION_DEPTH
        cam, z = cam[front], z[front]
        u = intrinsics.fx * cam[:, 0] / z + intrinsics.cx
        v = intrinsics.fy * cam[:, 1] / z + intrinsics.cy
        src_idx = np.flatnonzero(keep.reshape(-1))[front]
        all_colors.append(frames[s].pixels[keep][front])
        all_tu.append(_round_pixel(u))
        all_tv.append(_round_pixel(v))
        all_depth.append(z)
        all_not_t.append(np.full(z.shape, 0 if s == t else 1, dtype=np.int64))
        all_frame_idx.append(np.full(z.shape, s, dtype=np.int64))
        all_src_idx.append(src_idx)

    image, depth_buffer, holes = _splat(
        np.concatenate(all_colors),
        (np.concatenate(all_tu), np.concatenate(all_tv)),
        np.concatenate(all_depth),
        (
            np.concatenate(all_not_t),
            np.concatenate(all_frame_idx),
            np.concatenate(all_src_idx),
        ),
        h,
        w,
    )
    return WarpResult(Frame(image), depth_buffer, holes)


def bilinear_sample(grid, coords_u, coords_v):
    """Bilinear lookup of an HxWxC grid at float coordinates, border-clamped.

    Returns (values, du, dv): the sampled values and their derivatives with
    respect to the u and v coordinate (piecewise-linear, evaluated on the
    interior of each cell).
    """
    h, w = grid.shape[:2]
    u = np.clip(coords_u, 0.0, w - 1.0)
    v = np.clip(coords_v, 0.0, h - 1.0)
    u0 = np.floor(u).astype(np.int64)
    v0 = np.floor(v).astype(np.int64)
    u1 = np.minimum(u0 + 1, w - 1)
    v1 = np.minimum(v0 + 1, h - 1)
    fu = (u - u0)[..., None]
    fv = (v - v0)[..., None]
    g00 = grid[v0, u0]
    g01 = grid[v0, u1]
    g10 = grid[v1, u0]
    g11 = grid[v1, u1]
    top = g00 * (1.0 - fu) + g01 * fu
    bot = g10 * (1.0 - fu) + g11 * fu
    values = top * (1.0 - fv) + bot * fv
    du = (g01 - g00) * (1.0 - fv) + (g11 - g10) * fv
    dv = bot - top
    return values, du, dv


def backward_sample(grid, flow):
    """Gather grid values at flow-displaced coordinates.

    output(u, v) = bilinear(grid, u + f_u, v + f_v) with border clamping.
    Invalid-flow pixels yield zeros; the accompanying validity grid reports
    them. Returns (HxWxC array, HxW bool).
    """
    g = np.asarray(grid, dtype=np.float64)
    squeeze = g.ndim == 2
    if squeeze:
        g = g[..., None]
    h, w = g.shape[:2]
    if flow.shape != (h, w):
        raise ValueError(f"flow shape {flow.shape} != grid shape {(h, w)}")
    base = pixel_grid(h, w)
    values, _, _ = bilinear_sample(
        g, base[..., 0] + flow.vectors[..., 0], base[..., 1] + flow.vectors[..., 1]
    )
    values = np.where(flow.validity[..., None], values, 0.0)
    if squeeze:
        values = values[..., 0]
    return values, flow.validity.copy()
