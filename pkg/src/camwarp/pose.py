"""Robust relative-pose recovery from 3D-2D correspondences.

The hypothesize-and-verify loop samples minimal sets, solves a direct linear
transform for the 3x4 projection in normalized image coordinates, extracts
the nearest rotation via the SVD polar factor, scores by reprojection error,
and refits the best model on its inliers with Gauss-Newton. Everything is
deterministic given the config seed.
"""

from dataclasses import dataclass

import numpy as np

from .camera import MIN_PROJECTION_DEPTH, PoseSE3, RelativeTransform, unproject

DEGENERACY_CONDITION_LIMIT = 1e8


class PoseEstimationError(RuntimeError):
    """Raised when no acceptable pose can be recovered."""


@dataclass(frozen=True)
class Correspondence:
    """A 3D point in the source camera frame and its pixel in the target image."""

    point3d: np.ndarray
    pixel: np.ndarray

    def __post_init__(self):
        p3 = np.asarray(self.point3d, dtype=np.float64).reshape(3)
        px = np.asarray(self.pixel, dtype=np.float64).reshape(2)
        if not np.all(np.isfinite(p3)) or p3[2] <= 0:
            raise ValueError("point3d must be finite with z > 0")
        object.__setattr__(self, "point3d", p3)
        object.__setattr__(self, "pixel", px)


@dataclass(frozen=True)
class RansacConfig:
    inlier_threshold: float = 2.0
    confidence: float = 0.999
    max_iterations: int = 10000
    min_sample: int = 6
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.confidence < 1:
            raise ValueError("confidence must lie in (0, 1)")
        if self.inlier_threshold <= 0:
            raise ValueError("inlier_threshold must be positive")
        if self.min_sample < 6:
            raise ValueError("min_sample must be >= 6 for the DLT solver")


def _normalized(corrs, intrinsics):
    pts = np.stack([c.point3d for c in corrs])
    pix = np.stack([c.pixel for c in corrs])
    xn = (pix[:, 0] - intrinsics.cx) / intrinsics.fx
    yn = (pix[:, 1] - intrinsics.cy) / intrinsics.fy
    return pts, np.stack([xn, yn], axis=1)


def _solve_dlt(points3d, norm_pix):
    """3x4 projection from >= 6 correspondences in normalized coordinates.

    Returns None when the sample is degenerate (condition number of the
    design matrix beyond the limit, e.g. coplanar or collinear points).
    """
    n = points3d.shape[0]
    xh = np.hstack([points3d, np.ones((n, 1))])
    a = np.zeros((2 * n, 12))
    a[0::2, 0:4] = xh
    a[0::2, 8:12] = -norm_pix[:, 0:1] * xh
    a[1::2, 4:8] = xh
    a[1::2, 8:12] = -norm_pix[:, 1:2] * xh
    _, s, vt = np.linalg.svd(a)
    if s[-1] <= 0 or s[0] / s[-1] > DEGENERACY_CONDITION_LIMIT:
        return None
    p = vt[-1].reshape(3, 4)
    # resolve the global sign so points land in front of the camera
    if np.median(xh @ p[2]) < 0:
        p = -p
    m = p[:, :3]
    u, sv, vtm = np.linalg.svd(m)
    d = np.linalg.det(u @ vtm)
    r = u @ np.diag([1.0, 1.0, d]) @ vtm
    scale = np.mean(sv)
    if scale <= 0 or d <= 0:
        return None
    return PoseSE3(r, p[:, 3] / scale)


def _reprojection_errors(pose, points3d, pixels, intrinsics):
    cam = points3d @ pose.rotation.T + pose.translation
    z = cam[:, 2]
    ok = z > MIN_PROJECTION_DEPTH
    err = np.full(points3d.shape[0], np.inf)
    zs = np.where(ok, z, 1.0)
    u = intrinsics.fx * cam[:, 0] / zs + intrinsics.cx
    v = intrinsics.fy * cam[:, 1] / zs + intrinsics.cy
    err[ok] = np.hypot(u - pixels[:, 0], v - pixels[:, 1])[ok]
    return err


def _rodrigues(omega):
    theta = np.linalg.norm(omega)
    if theta < 1e-12:
        k = np.array(
            [[0, -omega[2], omega[1]], [omega[2], 0, -omega[0]], [-omega[1], omega[0], 0]]
        )
        return np.eye(3) + k
    axis = omega / theta
    k = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + np.sin(theta) * k + (1 - np.cos(theta)) * (k @ k)


def refine_pose(initial, corrs, intrinsics):
    """Gauss-Newton minimization of summed squared reprojection error.

    Pose updates live in the 6-parameter tangent space (rotation via
    exponential-map increments applied on the left). Steps that would
    increase the cost are halved; iteration stops when the update norm
    drops below 1e-10 or after 50 iterations.
    """
    if len(corrs) < 3:
        raise ValueError("refinement needs at least 3 correspondences")
    pts = np.stack([c.point3d for c in corrs])
    pix = np.stack([c.pixel for c in corrs])
    r = initial.rotation.copy()
    t = initial.translation.copy()

    def cost(rm, tv):
        cam = pts @ rm.T + tv
        z = np.maximum(cam[:, 2], MIN_PROJECTION_DEPTH)
        u = intrinsics.fx * cam[:, 0] / z + intrinsics.cx
        v = intrinsics.fy * cam[:, 1] / z + intrinsics.cy
        res = np.stack([u - pix[:, 0], v - pix[:, 1]], axis=1)
        return float(np.sum(res * res)), res, cam

    current, res, cam = cost(r, t)
    for _ in range(50):
        z = np.maximum(cam[:, 2], MIN_PROJECTION_DEPTH)
        x, y = cam[:, 0], cam[:, 1]
        n = pts.shape[0]
        # d(pixel)/d(cam point), then chain through the se(3) increment
        j = np.zeros((n, 2, 6))
        du = np.stack([intrinsics.fx / z, np.zeros(n), -intrinsics.fx * x / z**2], axis=1)
        dv = np.stack([np.zeros(n), intrinsics.fy / z, -intrinsics.fy * y / z**2], axis=1)
        for row, dp in ((0, du), (1, dv)):
            # d(cam)/d(omega) = -[cam]_x for a left-applied increment
            j[:, row, 0] = dp[:, 2] * cam[:, 1] - dp[:, 1] * cam[:, 2]
            j[:, row, 1] = dp[:, 0] * cam[:, 2] - dp[:, 2] * cam[:, 0]
            j[:, row, 2] = dp[:, 1] * cam[:, 0] - dp[:, 0] * cam[:, 1]
            j[:, row, 3:6] = dp
        jf = j.reshape(-1, 6)
        h = jf.T @ jf
        g = jf.T @ res.reshape(-1)
        sv = np.linalg.svd(h, compute_uv=False)
        if sv[-1] <= 0 or sv[0] / sv[-1] > 1e14:
            raise PoseEstimationError("normal equations are rank-deficient")
        delta = np.linalg.solve(h, -g)
        if np.linalg.norm(delta) < 1e-10:
            break
        step = 1.0
        accepted = False
        while step > 1e-12:
            d = step * delta
            r_new = _rodrigues(d[:3]) @ r
            t_new = _rodrigues(d[:3]) @ t + d[3:]
            c_new, res_new, cam_new = cost(r_new, t_new)
            if c_new <= current:
                r, t, current, res, cam = r_new, t_new, c_new, res_new, cam_new
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
    # re-orthonormalize against accumulated floating-point drift
    u, _, vt = np.linalg.svd(r)
    r = u @ np.diag([1.0, 1.0, np.linalg.det(u @ vt)]) @ vt
    return PoseSE3(r, t)


def pnp_ransac(corrs, intrinsics, config=RansacConfig()):
    """Robust pose from 3D-2D correspondences.

    Returns (PoseSE3, inlier index set). Raises PoseEstimationError when the
    input is infeasible or no model reaches min_sample inliers.
    """
    if len(corrs) < config.min_sample:
        raise PoseEstimationError(
            f"need at least {config.min_sample} correspondences, got {len(corrs)}"
        )
    pts, norm = _normalized(corrs, intrinsics)
    pix = np.stack([c.pixel for c in corrs])
    rng = np.random.default_rng(config.seed)
    n = len(corrs)
    m = config.min_sample

    best_pose = None
    best_inliers = np.zeros(n, dtype=bool)
    best_count = 0
    required = config.max_iterations
    it = 0
    while it < required and it < config.max_iterations:
        it += 1
        sample = rng.choice(n, size=m, replace=False)
        cand = _solve_dlt(pts[sample], norm[sample])
        if cand is None:
            continue
        err = _reprojection_errors(cand, pts, pix, intrinsics)
        inliers = err < config.inlier_threshold
        count = int(inliers.sum())
        if count > best_count:
            best_pose, best_inliers, best_count = cand, inliers, count
            w = count / n
            if 0 < w < 1:
                bound = np.log(1 - config.confidence) / np.log(1 - w**m)
                required = min(config.max_iterations, int(np.ceil(bound)))
            elif w >= 1:
                required = it

    if best_pose is None or best_count < config.min_sample:
        raise PoseEstimationError(
            f"no model with >= {config.min_sample} inliers after {it} iterations"
        )
    refined = refine_pose(best_pose, [corrs[i] for i in np.flatnonzero(best_inliers)], intrinsics)
    err = _reprojection_errors(refined, pts, pix, intrinsics)
    final_inliers = err < config.inlier_threshold
    if int(final_inliers.sum()) < config.min_sample:
        # refinement should not lose the consensus set; keep the raw model if it does
        refined, final_inliers = best_pose, best_inliers
    return refined, set(np.flatnonzero(final_inliers).tolist())


def pose_from_depth_matches(depth_src, matches, intrinsics, config=RansacConfig()):
    """Source-to-target relative pose from depth and pixel matches.

    Each (pixel_src, pixel_tgt) match with valid source depth is lifted to a
    3D point in the source camera frame and paired with pixel_tgt; matches on
    invalid depth are dropped. Returns the source-to-target RelativeTransform.
    """
    corrs = []
    h, w = depth_src.shape
    for pixel_src, pixel_tgt in matches:
        u, v = int(round(pixel_src[0])), int(round(pixel_src[1]))
        if not (0 <= u < w and 0 <= v < h) or not depth_src.validity[v, u]:
            continue
        p3 = unproject(np.asarray(pixel_src, dtype=np.float64), depth_src.values[v, u], intrinsics)
        corrs.append(Correspondence(p3, pixel_tgt))
    if not corrs:
        raise PoseEstimationError("all matches reference invalid depth")
    pose, _ = pnp_ransac(corrs, intrinsics, config)
    return RelativeTransform(pose)
