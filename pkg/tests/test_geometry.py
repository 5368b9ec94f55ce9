import numpy as np
import pytest

from camwarp.camera import Intrinsics, PoseSE3, RelativeTransform, relative_pose
from camwarp.geometry import (
    DepthMap,
    FlowField,
    compute_flow,
    estimate_dynamic_mask,
    lift_depth,
)
from camwarp.synth import analytic_plane_flow

K = Intrinsics(fx=100.0, fy=100.0, cx=64.0, cy=48.0, width=128, height=96)
K_SMALL = Intrinsics(fx=1.0, fy=1.0, cx=0.0, cy=0.0, width=4, height=3)


def constant_depth(value, k=K):
    return DepthMap.from_values(np.full((k.height, k.width), float(value)))


class TestLiftDepth:
    def test_unit_focal_origin(self):
        pm = lift_depth(constant_depth(1.0, K_SMALL), K_SMALL)
        assert np.allclose(pm.points[0, 0], [0.0, 0.0, 1.0])
        assert pm.frame == "camera"

    def test_inverse_pinhole_value(self):
        # pixel (cx+fx, cy) at depth 3 lifts to (3, 0, 3)
        k = Intrinsics(fx=50.0, fy=50.0, cx=64.0, cy=48.0, width=128, height=96)
        pm = lift_depth(constant_depth(3.0, k), k)
        u, v = int(k.cx + k.fx), int(k.cy)
        assert np.allclose(pm.points[v, u], [3.0, 0.0, 3.0])

    def test_validity_propagates(self):
        vals = np.full((K.height, K.width), 2.0)
        vals[10, 20] = -1.0
        pm = lift_depth(DepthMap.from_values(vals), K)
        assert not pm.validity[10, 20]
        assert pm.validity.sum() == K.height * K.width - 1

    def test_brute_force_oracle_bitwise(self):
        rng = np.random.default_rng(21)
        vals = rng.uniform(0.5, 9.0, size=(K.height, K.width))
        depth = DepthMap.from_values(vals)
        pm = lift_depth(depth, K)
        for v in range(0, K.height, 7):
            for u in range(0, K.width, 11):
                d = vals[v, u]
                expected = np.array([(u - K.cx) * d / K.fx, (v - K.cy) * d / K.fy, d])
                assert np.array_equal(pm.points[v, u], expected)

    def test_world_frame_lift(self):
        rng = np.random.default_rng(22)
        angle = 0.3
        pose = PoseSE3(
            np.array(
                [
                    [np.cos(angle), 0, np.sin(angle)],
                    [0, 1, 0],
                    [-np.sin(angle), 0, np.cos(angle)],
                ]
            ),
            rng.uniform(-1, 1, size=3),
        )
        depth = constant_depth(4.0)
        pm = lift_depth(depth, K, pose)
        assert pm.frame == "world"
        # world point must re-project through the extrinsic to the camera point
        cam = lift_depth(depth, K)
        back = pm.points @ pose.rotation.T + pose.translation
        assert np.abs(back - cam.points).max() < 1e-12

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            lift_depth(constant_depth(1.0, K_SMALL), K)


class TestComputeFlow:
    def test_identity_motion_zero_flow(self):
        pm = lift_depth(constant_depth(5.0), K)
        flow = compute_flow(pm, RelativeTransform.identity(), K)
        assert np.array_equal(flow.vectors, np.zeros_like(flow.vectors))
        assert flow.validity.all()
        assert np.array_equal(flow.target_depth, np.full((K.height, K.width), 5.0))

    def test_translation_against_plane_oracle(self):
        # camera moves +x by delta: uniform flow (-fx*delta/d, 0)
        d, delta = 2.0, 0.25
        pm = lift_depth(constant_depth(d), K)
        tgt = PoseSE3(np.eye(3), np.array([-delta, 0.0, 0.0]))
        flow = compute_flow(pm, relative_pose(PoseSE3.identity(), tgt), K)
        expected = np.array([-K.fx * delta / d, 0.0])
        assert np.abs(flow.vectors - expected).max() < 1e-6

    def test_halfturn_roll_mirrors_offsets(self):
        # 180 degree rotation about the optical axis with centered principal
        # point maps offset (a, b) to (-a, -b): flow = (-2a, -2b)
        k = Intrinsics(fx=50.0, fy=50.0, cx=32.0, cy=24.0, width=64, height=48)
        pm = lift_depth(constant_depth(3.0, k), k)
        rot = PoseSE3(np.diag([-1.0, -1.0, 1.0]), np.zeros(3))
        flow = compute_flow(pm, RelativeTransform(rot), k)
        u, v = 40, 30
        a, b = u - k.cx, v - k.cy
        assert np.abs(flow.vectors[v, u] - [-2 * a, -2 * b]).max() < 1e-9

    def test_points_behind_target_invalid(self):
        pm = lift_depth(constant_depth(1.0), K)
        back = PoseSE3(np.eye(3), np.array([0.0, 0.0, -5.0]))  # pushes z to -4
        flow = compute_flow(pm, RelativeTransform(back), K)
        assert not flow.validity.any()
        assert np.array_equal(flow.vectors, np.zeros_like(flow.vectors))

    def test_world_frame_requires_source_pose(self):
        pose = PoseSE3(np.eye(3), np.array([1.0, 0.0, 0.0]))
        pm = lift_depth(constant_depth(2.0), K, pose)
        with pytest.raises(ValueError):
            compute_flow(pm, RelativeTransform.identity(), K)
        flow = compute_flow(pm, RelativeTransform.identity(), K, source_pose=pose)
        assert np.abs(flow.vectors).max() < 1e-9

    def test_agreement_with_homography_oracle(self):
        rng = np.random.default_rng(23)
        d = 5.0
        pm = lift_depth(constant_depth(d), K)
        for _ in range(5):
            angle = rng.uniform(-0.1, 0.1)
            tgt = PoseSE3(
                np.array(
                    [
                        [np.cos(angle), 0, np.sin(angle)],
                        [0, 1, 0],
                        [-np.sin(angle), 0, np.cos(angle)],
                    ]
                ),
                rng.uniform(-0.3, 0.3, size=3),
            )
            flow = compute_flow(pm, relative_pose(PoseSE3.identity(), tgt), K)
            oracle = analytic_plane_flow(d, PoseSE3.identity(), tgt, K)
            assert np.array_equal(flow.validity, oracle.validity)
            diff = np.abs(flow.vectors - oracle.vectors)[flow.validity]
            assert diff.max() < 1e-6

    def test_validity_subset_of_pointmap(self):
        vals = np.full((K.height, K.width), 2.0)
        vals[::5, ::5] = 0.0
        pm = lift_depth(DepthMap.from_values(vals), K)
        flow = compute_flow(pm, RelativeTransform.identity(), K)
        assert not np.any(flow.validity & ~pm.validity)


class TestFlowComposition:
    def test_inverse_flow_returns_home(self):
        from camwarp.warp import bilinear_sample
        from camwarp.geometry import pixel_grid

        d = 4.0
        pm = lift_depth(constant_depth(d), K)
        tgt = PoseSE3(np.eye(3), np.array([-0.2, 0.1, 0.05]))
        fwd = compute_flow(pm, relative_pose(PoseSE3.identity(), tgt), K)
        # lift the scene as seen from the target camera: plane z' = d + 0.05
        pm_back = lift_depth(constant_depth(d + 0.05), K)
        bwd = compute_flow(pm_back, relative_pose(tgt, PoseSE3.identity()), K)
        grid = pixel_grid(K.height, K.width)
        displaced = grid + fwd.vectors
        back_at, _, _ = bilinear_sample(
            bwd.vectors, displaced[..., 0], displaced[..., 1]
        )
        total = fwd.vectors + back_at
        inside = (
            (displaced[..., 0] >= 0)
            & (displaced[..., 0] <= K.width - 1)
            & (displaced[..., 1] >= 0)
            & (displaced[..., 1] <= K.height - 1)
        )
        assert np.abs(total[inside]).max() < 1e-4


class TestDynamicMask:
    def make_flow(self, vectors):
        h, w = vectors.shape[:2]
        return FlowField(vectors, np.ones((h, w), dtype=bool), np.ones((h, w)))

    def test_equal_flows_static(self):
        v = np.random.default_rng(0).normal(size=(6, 8, 2))
        mask = estimate_dynamic_mask(self.make_flow(v), self.make_flow(v.copy()), 1.5)
        assert not mask.mask.any()

    def test_single_dynamic_pixel(self):
        tau = 1.5
        a = np.zeros((6, 8, 2))
        b = np.zeros((6, 8, 2))
        b[3, 4, 0] = 2 * tau
        mask = estimate_dynamic_mask(self.make_flow(a), self.make_flow(b), tau)
        assert mask.mask[3, 4]
        assert mask.mask.sum() == 1

    def test_threshold_tie_is_static(self):
        tau = 1.5
        a = np.zeros((4, 4, 2))
        b = np.zeros((4, 4, 2))
        b[1, 1, 1] = tau  # difference exactly tau: strict inequality keeps it static
        mask = estimate_dynamic_mask(self.make_flow(a), self.make_flow(b), tau)
        assert not mask.mask.any()

    def test_invalid_pixels_static(self):
        a = np.zeros((4, 4, 2))
        b = np.full((4, 4, 2), 10.0)
        fa = self.make_flow(a)
        fb = FlowField(b, np.zeros((4, 4), dtype=bool), np.ones((4, 4)))
        mask = estimate_dynamic_mask(fa, fb, 1.0)
        assert not mask.mask.any()

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            estimate_dynamic_mask(
                self.make_flow(np.zeros((4, 4, 2))), self.make_flow(np.zeros((5, 4, 2))), 1.0
            )
