"""Pinhole camera models, SE(3) pose algebra, and trajectory construction.

Coordinate conventions used throughout the package:

- Camera frame: right-handed, +x right, +y down, +z forward. The camera
  looks along +z; points with z <= 0 are behind it.
- Extrinsics map world to camera coordinates: x_cam = R @ x_world + t.
- Image frame: u grows right, v grows down, origin at the top-left pixel
  center. Projection is the zero-skew pinhole model
  u = fx * x / z + cx,  v = fy * y / z + cy.
- A relative transform maps source-camera coordinates to target-camera
  coordinates, so the target extrinsic is E_tgt = M @ E_src. A stationary
  camera has the identity extrinsic.

Externally estimated poses must be converted to these conventions once at
ingest (see the camera JSON schema in the io module).
"""

from dataclasses import dataclass, field

import numpy as np

ORTHONORMALITY_TOL = 1e-9
MIN_PROJECTION_DEPTH = 1e-6


def _readonly(a, shape, name):
    out = np.array(a, dtype=np.float64)
    if out.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {out.shape}")
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Intrinsics:
    """Zero-skew pinhole intrinsics in pixel units."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if not (0 <= self.cx < self.width):
            raise ValueError(f"cx={self.cx} outside [0, width={self.width})")
        if not (0 <= self.cy < self.height):
            raise ValueError(f"cy={self.cy} outside [0, height={self.height})")

    def matrix(self):
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )


@dataclass(frozen=True)
class PoseSE3:
    """World-to-camera rigid transform: x_cam = rotation @ x_world + translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", _readonly(self.rotation, (3, 3), "rotation"))
        object.__setattr__(
            self, "translation", _readonly(self.translation, (3,), "translation")
        )
        err = np.abs(self.rotation.T @ self.rotation - np.eye(3)).max()
        if err > ORTHONORMALITY_TOL:
            raise ValueError(f"rotation not orthonormal (max |R^T R - I| = {err:.3e})")
        det = np.linalg.det(self.rotation)
        if abs(det - 1.0) > ORTHONORMALITY_TOL:
            raise ValueError(f"rotation determinant {det:.12f} != +1")

    @staticmethod
    def identity():
        return PoseSE3(np.eye(3), np.zeros(3))

    def inverse(self):
        r_inv = self.rotation.T
        return PoseSE3(r_inv, -r_inv @ self.translation)

    def transform(self, points):
        """Apply to one 3-vector or an (..., 3) array of points."""
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation.T + self.translation

    def compose(self, other):
        """self after other: (self @ other).transform(x) = self(other(x))."""
        return PoseSE3(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def center(self):
        """Camera center in world coordinates."""
        return -self.rotation.T @ self.translation

    def matrix34(self):
        return np.hstack([self.rotation, self.translation[:, None]])


@dataclass(frozen=True)
class RelativeTransform:
    """Rigid map from source-camera to target-camera coordinates."""

    pose: PoseSE3

    @staticmethod
    def identity():
        return RelativeTransform(PoseSE3.identity())


@dataclass(frozen=True)
class CameraTrajectory:
    intrinsics: Intrinsics
    poses: tuple = field(default=())

    def __post_init__(self):
        poses = tuple(self.poses)
        if len(poses) < 1:
            raise ValueError("trajectory needs at least one pose")
        if not all(isinstance(p, PoseSE3) for p in poses):
            raise TypeError("poses must be PoseSE3 instances")
        object.__setattr__(self, "poses", poses)

    def __len__(self):
        return len(self.poses)


def project(point_cam, intrinsics):
    """Pinhole projection of camera-frame points.

    Accepts a single 3-vector or an (..., 3) array. Returns (pixel, depth)
    where depth is the camera-frame z. Points with z <= 1e-6 get NaN pixel
    coordinates (the invalid marker); depth is returned unchanged.
    """
    pts = np.asarray(point_cam, dtype=np.float64)
    x, y, z = pts[..., 0], pts[..., 1], pts[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = intrinsics.fx * x / z + intrinsics.cx
        v = intrinsics.fy * y / z + intrinsics.cy
    pixel = np.stack([u, v], axis=-1)
    bad = z <= MIN_PROJECTION_DEPTH
    if np.any(bad):
        pixel = np.where(bad[..., None], np.nan, pixel)
    return pixel, np.array(z, copy=True)


def unproject(pixel, depth, intrinsics):
    """Lift pixels at the given z-depth back into the camera frame.

    Inverse of project for depth > 0; raises ValueError on non-positive depth.
    """
    pix = np.asarray(pixel, dtype=np.float64)
    d = np.asarray(depth, dtype=np.float64)
    if np.any(d <= 0):
        raise ValueError("depth must be positive")
    x = (pix[..., 0] - intrinsics.cx) * d / intrinsics.fx
    y = (pix[..., 1] - intrinsics.cy) * d / intrinsics.fy
    return np.stack([x, y, np.broadcast_to(d, x.shape)], axis=-1)


def relative_pose(source, target):
    """Transform M with x_target_cam = M(x_source_cam), i.e. M = E_tgt o E_src^-1."""
    if np.array_equal(source.rotation, target.rotation) and np.array_equal(
        source.translation, target.translation
    ):
        # identical poses compose to the exact identity, not a rounded one
        return RelativeTransform.identity()
    return RelativeTransform(target.compose(source.inverse()))


def apply_relative(source, rel):
    """Target extrinsic obtained by applying rel to the source camera."""
    return rel.pose.compose(source)


# ---------------------------------------------------------------------------
# quaternion helpers (w, x, y, z)

def rotation_to_quat(r):
    m = np.asarray(r, dtype=np.float64)
    k = (
        np.array(
            [
                [m[0, 0] - m[1, 1] - m[2, 2], 0, 0, 0],
                [m[0, 1] + m[1, 0], m[1, 1] - m[0, 0] - m[2, 2], 0, 0],
                [m[0, 2] + m[2, 0], m[1, 2] + m[2, 1], m[2, 2] - m[0, 0] - m[1, 1], 0],
                [m[2, 1] - m[1, 2], m[0, 2] - m[2, 0], m[1, 0] - m[0, 1], m[0, 0] + m[1, 1] + m[2, 2]],
            ]
        )
        / 3.0
    )
    vals, vecs = np.linalg.eigh(k)
    q = vecs[[3, 0, 1, 2], np.argmax(vals)]
    if q[0] < 0:
        q = -q
    return q


def quat_to_rotation(q):
    w, x, y, z = np.asarray(q, dtype=np.float64) / np.linalg.norm(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def slerp(q0, q1, t):
    """Shortest-arc spherical interpolation between unit quaternions."""
    q0 = np.asarray(q0, dtype=np.float64)
    q1 = np.asarray(q1, dtype=np.float64)
    dot = float(np.dot(q0, q1))
    if dot < 0.0:
        q1 = -q1
        dot = -dot
    if dot > 0.9999995:
        out = q0 + t * (q1 - q0)
        return out / np.linalg.norm(out)
    theta = np.arccos(np.clip(dot, -1.0, 1.0))
    s = np.sin(theta)
    return (np.sin((1.0 - t) * theta) / s) * q0 + (np.sin(t * theta) / s) * q1


def _interp_pose(pose_a, pose_b, t):
    q = slerp(rotation_to_quat(pose_a.rotation), rotation_to_quat(pose_b.rotation), t)
    trans = (1.0 - t) * pose_a.translation + t * pose_b.translation
    return PoseSE3(quat_to_rotation(q), trans)


def interpolate_trajectory(keyframes, frame_count, intrinsics=None):
    """Dense pose list from sparse (frame_index, PoseSE3) keyframes.

    Rotations interpolate by shortest-arc slerp, translations linearly,
    uniformly in frame index. Keyframe poses are reproduced exactly; frames
    outside the keyframe range hold the nearest keyframe pose. Returns a
    CameraTrajectory when intrinsics are given, else the pose list.
    """
    if len(keyframes) < 1:
        raise ValueError("at least one keyframe required")
    indices = [int(i) for i, _ in keyframes]
    if any(i < 0 or i >= frame_count for i in indices):
        raise ValueError(f"keyframe indices must lie in [0, {frame_count - 1}]")
    if any(b <= a for a, b in zip(indices, indices[1:])):
        raise ValueError("keyframe indices must be strictly increasing")
    poses_at = {i: p for i, p in keyframes}

    out = []
    for f in range(frame_count):
        if f <= indices[0]:
            out.append(poses_at[indices[0]])
        elif f >= indices[-1]:
            out.append(poses_at[indices[-1]])
        elif f in poses_at:
            out.append(poses_at[f])
        else:
            seg = next(k for k in range(len(indices) - 1) if indices[k] < f < indices[k + 1])
            a, b = indices[seg], indices[seg + 1]
            t = (f - a) / (b - a)
            out.append(_interp_pose(poses_at[a], poses_at[b], t))
    if intrinsics is not None:
        return CameraTrajectory(intrinsics, tuple(out))
    return out


def _rotation_y(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _orbit_relative(angle, radius):
    # Orbit in the x-z plane about the look-at point (0, 0, radius) of the
    # source camera, keeping the look-at point on the optical axis.
    look_at = np.array([0.0, 0.0, radius])
    center = look_at - radius * np.array([np.sin(angle), 0.0, np.cos(angle)])
    forward = (look_at - center) / radius
    right = np.cross(np.array([0.0, 1.0, 0.0]), forward)
    right /= np.linalg.norm(right)
    down = np.cross(forward, right)
    cam_to_src = np.stack([right, down, forward], axis=1)
    r = cam_to_src.T
    return RelativeTransform(PoseSE3(r, -r @ center))


PRESET_PARAMS = {
    "orbit": ("radius", "total_degrees"),
    "dolly": ("total_offset",),
    "truck": ("total_offset",),
    "arc": ("radius", "total_degrees"),
    "static": (),
}


def preset_trajectory(kind, params, frame_count, base):
    """Compose a named camera move onto a base trajectory.

    Per-frame relative transforms ramp linearly in frame index from identity
    at frame 0 to the full move at frame T-1. Presets: static (no-op), truck
    (translate along x by total_offset), dolly (translate along z), orbit
    (circle the look-at point at the given radius by total_degrees), arc
    (translate along the same circle without re-aiming).
    """
    if kind not in PRESET_PARAMS:
        raise ValueError(f"unknown preset kind {kind!r}; expected one of {sorted(PRESET_PARAMS)}")
    missing = [k for k in PRESET_PARAMS[kind] if k not in params]
    if missing:
        raise ValueError(f"preset {kind!r} missing params: {', '.join(missing)}")
    if frame_count != len(base.poses):
        raise ValueError(
            f"frame count {frame_count} != base trajectory length {len(base.poses)}"
        )

    def fraction(i):
        return 0.0 if frame_count == 1 else i / (frame_count - 1)

    rels = []
    for i in range(frame_count):
        s = fraction(i)
        if kind == "static":
            rel = RelativeTransform.identity()
        elif kind == "truck":
            rel = RelativeTransform(PoseSE3(np.eye(3), np.array([s * params["total_offset"], 0.0, 0.0])))
        elif kind == "dolly":
            rel = RelativeTransform(PoseSE3(np.eye(3), np.array([0.0, 0.0, s * params["total_offset"]])))
        elif kind == "orbit":
            rel = _orbit_relative(np.deg2rad(s * params["total_degrees"]), params["radius"])
        else:  # arc: same circular path as orbit, orientation held fixed
            angle = np.deg2rad(s * params["total_degrees"])
            radius = params["radius"]
            center = np.array([0.0, 0.0, radius]) - radius * np.array(
                [np.sin(angle), 0.0, np.cos(angle)]
            )
            rel = RelativeTransform(PoseSE3(np.eye(3), -center))
        rels.append(rel)
    return CameraTrajectory(
        base.intrinsics, tuple(apply_relative(p, m) for p, m in zip(base.poses, rels))
    )
