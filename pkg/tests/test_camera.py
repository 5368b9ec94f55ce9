import numpy as np
import pytest

from camwarp.camera import (
    CameraTrajectory,
    Intrinsics,
    PoseSE3,
    RelativeTransform,
    apply_relative,
    interpolate_trajectory,
    preset_trajectory,
    project,
    quat_to_rotation,
    relative_pose,
    rotation_to_quat,
    unproject,
)

K = Intrinsics(fx=100.0, fy=100.0, cx=64.0, cy=48.0, width=128, height=96)


def random_pose(rng, max_angle=0.5, max_offset=2.0):
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = rng.uniform(-max_angle, max_angle)
    q = np.concatenate([[np.cos(angle / 2)], np.sin(angle / 2) * axis])
    return PoseSE3(quat_to_rotation(q), rng.uniform(-max_offset, max_offset, size=3))


class TestProject:
    def test_optical_axis(self):
        k = Intrinsics(1.0, 1.0, 0.0, 0.0, 10, 10)
        pixel, depth = project(np.array([0.0, 0.0, 1.0]), k)
        assert np.allclose(pixel, [0.0, 0.0])
        assert depth == 1.0

    def test_pinhole_equations(self):
        # fx*x/z + cx = 100*0.1/2 + 64 = 69; fy*y/z + cy = 100*(-0.2)/2 + 48 = 38
        pixel, depth = project(np.array([0.1, -0.2, 2.0]), K)
        assert np.allclose(pixel, [69.0, 38.0])
        assert depth == 2.0

    def test_behind_camera_marked_invalid(self):
        pixel, depth = project(np.array([0.0, 0.0, -1.0]), K)
        assert np.all(np.isnan(pixel))
        assert depth == -1.0

    def test_batched(self):
        pts = np.array([[0.1, -0.2, 2.0], [0.0, 0.0, -1.0]])
        pixel, depth = project(pts, K)
        assert np.allclose(pixel[0], [69.0, 38.0])
        assert np.all(np.isnan(pixel[1]))


class TestUnproject:
    def test_principal_point(self):
        p = unproject(np.array([64.0, 48.0]), 7.5, K)
        assert np.allclose(p, [0.0, 0.0, 7.5])

    def test_inverse_pinhole(self):
        # (164-64)*2/100 = 2
        p = unproject(np.array([164.0, 48.0]), 2.0, K)
        assert np.allclose(p, [2.0, 0.0, 2.0])

    def test_nonpositive_depth_rejected(self):
        with pytest.raises(ValueError):
            unproject(np.array([10.0, 10.0]), 0.0, K)
        with pytest.raises(ValueError):
            unproject(np.array([10.0, 10.0]), -1.0, K)

    def test_round_trip(self):
        rng = np.random.default_rng(7)
        pix = rng.uniform(0, [K.width, K.height], size=(100, 2))
        depth = rng.uniform(0.1, 50.0, size=100)
        back, d = project(unproject(pix, depth, K), K)
        assert np.abs(back - pix).max() < 1e-9
        assert np.abs(d - depth).max() < 1e-9


class TestPoseAlgebra:
    def test_identity_relative(self):
        rng = np.random.default_rng(3)
        e = random_pose(rng)
        rel = relative_pose(e, e)
        assert np.allclose(rel.pose.rotation, np.eye(3), atol=1e-12)
        assert np.allclose(rel.pose.translation, 0.0, atol=1e-12)

    def test_identity_source(self):
        rng = np.random.default_rng(4)
        tgt = random_pose(rng)
        rel = relative_pose(PoseSE3.identity(), tgt)
        assert np.allclose(rel.pose.rotation, tgt.rotation)
        assert np.allclose(rel.pose.translation, tgt.translation)

    def test_point_mapping_oracle(self):
        # M must map source-camera coordinates to target-camera coordinates
        rng = np.random.default_rng(5)
        for _ in range(10):
            src, tgt = random_pose(rng), random_pose(rng)
            rel = relative_pose(src, tgt)
            pts = rng.uniform(-5, 5, size=(50, 3))
            direct = tgt.transform(pts)
            via_rel = rel.pose.transform(src.transform(pts))
            assert np.abs(direct - via_rel).max() < 1e-9

    def test_apply_relative_reproduces_target(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            src, tgt = random_pose(rng), random_pose(rng)
            back = apply_relative(src, relative_pose(src, tgt))
            assert np.abs(back.rotation - tgt.rotation).max() < 1e-9
            assert np.abs(back.translation - tgt.translation).max() < 1e-9

    def test_invariants_enforced(self):
        with pytest.raises(ValueError):
            PoseSE3(np.eye(3) * 2.0, np.zeros(3))
        bad = np.eye(3)
        bad[0, 0] = -1.0  # orthonormal but det = -1
        with pytest.raises(ValueError):
            PoseSE3(bad, np.zeros(3))


class TestQuaternions:
    def test_round_trip(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            r = random_pose(rng).rotation
            assert np.abs(quat_to_rotation(rotation_to_quat(r)) - r).max() < 1e-12


class TestInterpolateTrajectory:
    def test_two_identical_keyframes(self):
        p = PoseSE3.identity()
        poses = interpolate_trajectory([(0, p), (11, p)], 12)
        assert len(poses) == 12
        for q in poses:
            assert np.allclose(q.rotation, np.eye(3))
            assert np.allclose(q.translation, 0.0)

    def test_linear_midpoint(self):
        a = PoseSE3(np.eye(3), np.zeros(3))
        b = PoseSE3(np.eye(3), np.array([1.0, 0.0, 0.0]))
        poses = interpolate_trajectory([(0, a), (10, b)], 11)
        assert np.allclose(poses[5].translation, [0.5, 0.0, 0.0])

    def test_slerp_half_angle(self):
        # half of a 90 degree yaw is exactly 45 degrees
        yaw90 = PoseSE3(quat_to_rotation([np.cos(np.pi / 4), 0, np.sin(np.pi / 4), 0]), np.zeros(3))
        poses = interpolate_trajectory([(0, PoseSE3.identity()), (10, yaw90)], 11)
        c, s = np.cos(np.pi / 4), np.sin(np.pi / 4)
        expected = quat_to_rotation([np.cos(np.pi / 8), 0, np.sin(np.pi / 8), 0])
        assert np.abs(poses[5].rotation - expected).max() < 1e-9
        assert np.allclose(poses[5].rotation, np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]]))

    def test_endpoint_exact(self):
        rng = np.random.default_rng(11)
        a, b = random_pose(rng), random_pose(rng)
        poses = interpolate_trajectory([(2, a), (9, b)], 12)
        assert np.array_equal(poses[2].rotation, a.rotation)
        assert np.array_equal(poses[9].rotation, b.rotation)
        # clamping outside the keyframe range
        assert np.array_equal(poses[0].rotation, a.rotation)
        assert np.array_equal(poses[11].rotation, b.rotation)

    def test_reversal_consistency(self):
        rng = np.random.default_rng(12)
        a, b = random_pose(rng), random_pose(rng)
        fwd = interpolate_trajectory([(0, a), (9, b)], 10)
        rev = interpolate_trajectory([(0, b), (9, a)], 10)
        for f, r in zip(fwd, rev[::-1]):
            assert np.abs(f.rotation - r.rotation).max() < 1e-12
            assert np.abs(f.translation - r.translation).max() < 1e-12

    def test_single_keyframe_constant(self):
        rng = np.random.default_rng(13)
        p = random_pose(rng)
        poses = interpolate_trajectory([(4, p)], 8)
        assert all(np.array_equal(q.rotation, p.rotation) for q in poses)

    def test_errors(self):
        p = PoseSE3.identity()
        with pytest.raises(ValueError):
            interpolate_trajectory([], 5)
        with pytest.raises(ValueError):
            interpolate_trajectory([(0, p), (0, p)], 5)
        with pytest.raises(ValueError):
            interpolate_trajectory([(0, p), (7, p)], 5)

    def test_orthonormal_everywhere(self):
        rng = np.random.default_rng(14)
        kf = [(0, random_pose(rng)), (5, random_pose(rng)), (11, random_pose(rng))]
        for q in interpolate_trajectory(kf, 12):
            assert np.abs(q.rotation.T @ q.rotation - np.eye(3)).max() < 1e-9
            assert abs(np.linalg.det(q.rotation) - 1.0) < 1e-9


class TestPresets:
    def base(self, n=12):
        return CameraTrajectory(K, tuple(PoseSE3.identity() for _ in range(n)))

    def test_static_identity(self):
        traj = preset_trajectory("static", {}, 12, self.base())
        for p in traj.poses:
            assert np.allclose(p.rotation, np.eye(3))
            assert np.allclose(p.translation, 0.0)

    def test_truck_endpoint(self):
        traj = preset_trajectory("truck", {"total_offset": 1.0}, 11, self.base(11))
        assert np.allclose(traj.poses[10].translation, [1.0, 0.0, 0.0])
        assert np.allclose(traj.poses[10].rotation, np.eye(3))
        assert np.allclose(traj.poses[5].translation, [0.5, 0.0, 0.0])

    def test_dolly_axis(self):
        traj = preset_trajectory("dolly", {"total_offset": -0.8}, 11, self.base(11))
        assert np.allclose(traj.poses[10].translation, [0.0, 0.0, -0.8])

    def test_orbit_keeps_lookat(self):
        radius, total = 2.0, 90.0
        traj = preset_trajectory(
            "orbit", {"radius": radius, "total_degrees": total}, 12, self.base()
        )
        look_at = np.array([0.0, 0.0, radius])
        for i, p in enumerate(traj.poses):
            center = p.center()
            assert abs(np.linalg.norm(center - look_at) - radius) < 1e-9
            # look-at point projects onto the optical axis
            cam = p.transform(look_at)
            assert np.abs(cam[:2]).max() < 1e-9
            assert abs(cam[2] - radius) < 1e-9
        # last frame sits at the full angle along the orbit circle
        end = traj.poses[-1].center()
        expected = look_at - radius * np.array(
            [np.sin(np.deg2rad(total)), 0.0, np.cos(np.deg2rad(total))]
        )
        assert np.abs(end - expected).max() < 1e-9

    def test_orbit_first_frame_is_base(self):
        traj = preset_trajectory("orbit", {"radius": 3.0, "total_degrees": 40.0}, 12, self.base())
        assert np.abs(traj.poses[0].rotation - np.eye(3)).max() < 1e-12
        assert np.abs(traj.poses[0].translation).max() < 1e-12

    def test_arc_holds_orientation(self):
        traj = preset_trajectory("arc", {"radius": 2.0, "total_degrees": 60.0}, 12, self.base())
        for p in traj.poses:
            assert np.allclose(p.rotation, np.eye(3))

    def test_errors(self):
        with pytest.raises(ValueError):
            preset_trajectory("zoom", {}, 12, self.base())
        with pytest.raises(ValueError):
            preset_trajectory("orbit", {"radius": 2.0}, 12, self.base())


class TestIntrinsicsInvariants:
    def test_rejects_bad_values(self):
        with pytest.raises(ValueError):
            Intrinsics(-1.0, 1.0, 0.0, 0.0, 10, 10)
        with pytest.raises(ValueError):
            Intrinsics(1.0, 1.0, 20.0, 0.0, 10, 10)
