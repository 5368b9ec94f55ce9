"""Pointmap lifting, camera-induced flow fields, and dynamic-region masks.

Pointmaps carry an explicit frame tag ("camera" for the source camera frame,
"world" for world coordinates) so conversions are never implicit. Flow is the
2D displacement a relative camera motion imposes on the lifted geometry:
f(u, v) = project(M . G(u, v)) - (u, v).
"""

from dataclasses import dataclass

import numpy as np

from .camera import MIN_PROJECTION_DEPTH

FRAME_CAMERA = "camera"
FRAME_WORLD = "world"


def _as_grid(a, name, dtype=np.float64, channels=None):
    out = np.asarray(a, dtype=dtype)
    want = 2 if channels is None else 3
    if out.ndim != want or (channels is not None and out.shape[2] != channels):
        suffix = "" if channels is None else f"x{channels}"
        raise ValueError(f"{name} must be HxW{suffix}, got shape {out.shape}")
    return out


@dataclass(frozen=True)
class DepthMap:
    """Per-pixel z-depth with a validity grid. Valid depths are positive finite."""

    values: np.ndarray
    validity: np.ndarray

    def __post_init__(self):
        vals = _as_grid(self.values, "depth values")
        valid = np.asarray(self.validity, dtype=bool)
        if valid.shape != vals.shape:
            raise ValueError(f"validity shape {valid.shape} != values shape {vals.shape}")
        good = vals[valid]
        if good.size and not (np.all(good > 0) & np.all(np.isfinite(good))):
            raise ValueError("valid depth entries must be strictly positive and finite")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "validity", valid)

    @staticmethod
    def from_values(values):
        vals = np.asarray(values, dtype=np.float64)
        return DepthMap(vals, np.isfinite(vals) & (vals > 0))

    @property
    def shape(self):
        return self.values.shape


@dataclass(frozen=True)
class Pointmap:
    """H x W grid of 3D points plus validity, tagged with its coordinate frame."""

    points: np.ndarray
    validity: np.ndarray
    frame: str

    def __post_init__(self):
        pts = _as_grid(self.points, "points", channels=3)
        valid = np.asarray(self.validity, dtype=bool)
        if valid.shape != pts.shape[:2]:
            raise ValueError(f"validity shape {valid.shape} != grid shape {pts.shape[:2]}")
        if self.frame not in (FRAME_CAMERA, FRAME_WORLD):
            raise ValueError(f"frame must be {FRAME_CAMERA!r} or {FRAME_WORLD!r}, got {self.frame!r}")
        if pts[valid].size and not np.all(np.isfinite(pts[valid])):
            raise ValueError("valid pointmap entries must be finite")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "validity", valid)

    @property
    def shape(self):
        return self.points.shape[:2]


@dataclass(frozen=True)
class FlowField:
    """Per-pixel 2D displacement (du, dv) with validity and target-view depth."""

    vectors: np.ndarray
    validity: np.ndarray
    target_depth: np.ndarray

    def __post_init__(self):
        vec = _as_grid(self.vectors, "flow vectors", channels=2)
        valid = np.asarray(self.validity, dtype=bool)
        depth = _as_grid(self.target_depth, "target depth")
        if valid.shape != vec.shape[:2] or depth.shape != vec.shape[:2]:
            raise ValueError("flow component shapes disagree")
        if vec[valid].size and not np.all(np.isfinite(vec[valid])):
            raise ValueError("valid flow vectors must be finite")
        object.__setattr__(self, "vectors", vec)
        object.__setattr__(self, "validity", valid)
        object.__setattr__(self, "target_depth", depth)

    @staticmethod
    def zero(height, width):
        return FlowField(
            np.zeros((height, width, 2)),
            np.ones((height, width), dtype=bool),
            np.zeros((height, width)),
        )

    @property
    def shape(self):
        return self.vectors.shape[:2]


@dataclass(frozen=True)
class DynamicMask:
    """Boolean grid, true where the pixel moves independently of the camera."""

    mask: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mask, dtype=bool)
        if m.ndim != 2:
            raise ValueError(f"mask must be HxW, got shape {m.shape}")
        object.__setattr__(self, "mask", m)


def pixel_grid(height, width):
    """(u, v) coordinates of every pixel center as an HxWx2 array."""
    u, v = np.meshgrid(np.arange(width, dtype=np.float64), np.arange(height, dtype=np.float64))
    return np.stack([u, v], axis=-1)


def lift_depth(depth, intrinsics, pose=None):
    """Lift a depth map to a pointmap.

    With no pose the points stay in the source camera frame (the stationary
    camera is the identity). With a world-to-camera pose they are moved to
    world coordinates via its inverse.
    """
    h, w = depth.shape
    if (w, h) != (intrinsics.width, intrinsics.height):
        raise ValueError(
            f"depth {w}x{h} does not match intrinsics {intrinsics.width}x{intrinsics.height}"
        )
    grid = pixel_grid(h, w)
    d = np.where(depth.validity, depth.values, 1.0)
    x = (grid[..., 0] - intrinsics.cx) * d / intrinsics.fx
    y = (grid[..., 1] - intrinsics.cy) * d / intrinsics.fy
    points = np.stack([x, y, d], axis=-1)
    frame = FRAME_CAMERA
    if pose is not None:
        inv = pose.inverse()
        points = points @ inv.rotation.T + inv.translation
        frame = FRAME_WORLD
    points = np.where(depth.validity[..., None], points, 0.0)
    return Pointmap(points, depth.validity.copy(), frame)


def compute_flow(pointmap, rel, intrinsics, source_pose=None):
    """Flow induced on a pointmap by a relative camera motion.

    The pointmap must be in the source camera frame; a world-frame pointmap
    is accepted only together with the source extrinsic that brings it there.
    Pixels whose transformed point has z <= 1e-6 are invalid.
    """
    if pointmap.frame == FRAME_WORLD:
        if source_pose is None:
            raise ValueError("world-frame pointmap requires the source extrinsic")
        pts = pointmap.points @ source_pose.rotation.T + source_pose.translation
    elif source_pose is not None:
        raise ValueError("source_pose given but pointmap is already in the camera frame")
    else:
        pts = pointmap.points

    m = rel.pose
    exact_identity = (
        pointmap.frame == FRAME_CAMERA
        and np.array_equal(m.rotation, np.eye(3))
        and not m.translation.any()
    )
    if exact_identity:
        # Eq. at the identity is exactly zero; skip the projection round trip
        # so no floating-point residue appears
        z = pts[..., 2]
        ok = pointmap.validity & (z > MIN_PROJECTION_DEPTH)
        h, w = pointmap.shape
        return FlowField(np.zeros((h, w, 2)), ok, np.where(ok, z, 0.0))
    tgt = pts @ m.rotation.T + m.translation
    z = tgt[..., 2]
    ok = pointmap.validity & (z > MIN_PROJECTION_DEPTH)
    with np.errstate(divide="ignore", invalid="ignore"):
        u = intrinsics.fx * tgt[..., 0] / z + intrinsics.cx
        v = intrinsics.fy * tgt[..., 1] / z + intrinsics.cy
    h, w = pointmap.shape
    grid = pixel_grid(h, w)
    vectors = np.stack([u, v], axis=-1) - grid
    vectors = np.where(ok[..., None], vectors, 0.0)
    depth = np.where(ok, z, 0.0)
    return FlowField(vectors, ok, depth)


def estimate_dynamic_mask(optical_flow, induced_flow, threshold=1.5):
    """Pixels where measured optical flow and camera-induced flow disagree.

    A pixel is dynamic iff both flows are valid and the Euclidean difference
    strictly exceeds the threshold; anything else is static.
    """
    if optical_flow.shape != induced_flow.shape:
        raise ValueError(
            f"flow shapes differ: {optical_flow.shape} vs {induced_flow.shape}"
        )
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    diff = np.linalg.norm(optical_flow.vectors - induced_flow.vectors, axis=-1)
    both = optical_flow.validity & induced_flow.validity
    return DynamicMask(both & (diff > threshold))
