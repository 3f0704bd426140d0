import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import convert_pose_matrix_oracle
from simdrive.geometry import (
    CONVENTIONS,
    LH_FRU_WHEEL,
    RH_FLU_ROOF,
    CameraCalibration,
    DegenerateIntrinsicsError,
    InvalidPoseError,
    NonInvertibleError,
    Pose,
    RoofOffset,
    Transform4,
    compose,
    convention_change_matrix,
    convention_from_name,
    convert_pose,
    default_camera_rig,
    hom,
    image_to_ego_matrix,
    invert,
    normalize_angle,
)

OFF = RoofOffset(1.5)


class TestFrameConvention:
    def test_exactly_two_presets(self):
        assert set(CONVENTIONS) == {"RH_FLU_ROOF", "LH_FRU_WHEEL"}

    def test_preset_semantics(self):
        assert RH_FLU_ROOF.handedness == "right"
        assert RH_FLU_ROOF.lateral_axis == "left_positive"
        assert RH_FLU_ROOF.origin_ref == "roof_center"
        assert LH_FRU_WHEEL.handedness == "left"
        assert LH_FRU_WHEEL.lateral_axis == "right_positive"
        assert LH_FRU_WHEEL.origin_ref == "wheel_contact_plane"

    def test_serializes_by_name(self):
        assert convention_from_name("RH_FLU_ROOF") is RH_FLU_ROOF
        with pytest.raises(Exception):
            convention_from_name("NED")


class TestConvertPose:
    def test_hand_example_cross_checked_by_matrix_oracle(self):
        # Derived by hand (negate y and yaw, z - h_roof) and confirmed by
        # the independent 4x4 affine oracle.
        p = Pose(10.0, 3.0, 0.5, 0.5236)
        out = convert_pose(p, LH_FRU_WHEEL, RH_FLU_ROOF, OFF)
        oracle = convert_pose_matrix_oracle(10.0, 3.0, 0.5, 0.5236, 1.5, "LH_to_RH")
        assert (out.x, out.y, out.z) == (10.0, -3.0, -1.0)
        assert out.yaw == pytest.approx(-0.5236, abs=1e-15)
        assert (out.x, out.y, out.z, out.yaw) == pytest.approx(oracle, abs=1e-12)

    def test_identity_when_same_convention(self):
        p = Pose(1.0, 2.0, 3.0, 0.7)
        assert convert_pose(p, RH_FLU_ROOF, RH_FLU_ROOF, OFF) is p

    def test_involution_exact(self):
        p = Pose(12.5, -7.25, 0.875, 2.5)
        back = convert_pose(convert_pose(p, LH_FRU_WHEEL, RH_FLU_ROOF, OFF),
                            RH_FLU_ROOF, LH_FRU_WHEEL, OFF)
        assert (back.x, back.y, back.z, back.yaw) == (p.x, p.y, p.z, p.yaw)

    def test_non_finite_rejected(self):
        with pytest.raises(InvalidPoseError):
            Pose(float("nan"), 0.0, 0.0, 0.0)

    @settings(max_examples=200, deadline=None)
    @given(
        x=st.floats(-1e3, 1e3), y=st.floats(-1e3, 1e3),
        z=st.floats(-3, 3), yaw=st.floats(-math.pi + 1e-9, math.pi),
    )
    def test_property_involution_and_x_preserved(self, x, y, z, yaw):
        p = Pose(x, y, z, yaw)
        there = convert_pose(p, LH_FRU_WHEEL, RH_FLU_ROOF, OFF)
        back = convert_pose(there, RH_FLU_ROOF, LH_FRU_WHEEL, OFF)
        assert there.x == p.x
        assert abs(back.x - p.x) < 1e-12
        assert abs(back.y - p.y) < 1e-12
        assert abs(back.z - p.z) < 1e-12
        assert abs(back.yaw - p.yaw) < 1e-12

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.tuples(st.floats(-100, 100), st.floats(-100, 100), st.floats(-2, 2)),
                    min_size=2, max_size=6))
    def test_handedness_flip_preserves_distances(self, points):
        converted = [convert_pose(Pose(x, y, z, 0.0), LH_FRU_WHEEL, RH_FLU_ROOF, OFF)
                     for x, y, z in points]
        for (a, ca), (b, cb) in zip(zip(points, converted), zip(points[1:], converted[1:])):
            d0 = math.dist(a, b)
            d1 = math.dist((ca.x, ca.y, ca.z), (cb.x, cb.y, cb.z))
            assert d1 == pytest.approx(d0, abs=1e-9)


class TestNormalizeAngle:
    def test_range_is_half_open_at_pi(self):
        assert normalize_angle(math.pi) == math.pi
        assert normalize_angle(-math.pi) == math.pi
        assert normalize_angle(3 * math.pi) == pytest.approx(math.pi)

    def test_in_range_returned_unchanged(self):
        for a in (-3.0, -0.5, 0.0, 1.0, math.pi):
            assert normalize_angle(a) == a


class TestTransform4:
    def test_bottom_row_enforced(self):
        m = np.eye(4)
        m[3, 0] = 1e-9
        with pytest.raises(Exception):
            Transform4(m)

    def test_compose_identity(self):
        t = Transform4.translate(1.0, 2.0, 3.0)
        assert np.array_equal(compose(Transform4.identity(), t).m, t.m)

    def test_compose_translations_hand_product(self):
        out = compose(Transform4.translate(1, 0, 0), Transform4.translate(0, 2, 0))
        assert np.array_equal(out.m, Transform4.translate(1, 2, 0).m)

    def test_compose_then_invert_is_identity(self):
        t = compose(Transform4.rot_z(0.83), Transform4.translate(2.0, -1.0, 0.5))
        err = np.abs(compose(t, invert(t)).m - np.eye(4)).max()
        assert err < 1e-12

    def test_invert_identity_and_translation(self):
        assert np.array_equal(invert(Transform4.identity()).m, np.eye(4))
        inv = invert(Transform4.translate(1, 2, 3))
        assert np.allclose(inv.m, Transform4.translate(-1, -2, -3).m, atol=1e-15)

    def test_invert_quarter_turn_is_negative_quarter_turn(self):
        inv = invert(Transform4.rot_z(math.pi / 2))
        assert np.allclose(inv.m, Transform4.rot_z(-math.pi / 2).m, atol=1e-12)

    def test_singular_matrix_rejected(self):
        m = np.eye(4)
        m[0, 0] = 0.0
        with pytest.raises(NonInvertibleError):
            invert(Transform4(m))

    def test_flat_roundtrip(self):
        t = compose(Transform4.rot_z(0.4), Transform4.translate(1, 2, 3))
        flat = t.to_flat()
        assert len(flat) == 16
        assert np.array_equal(Transform4.from_flat(flat).m, t.m)


class TestImageToEgoMatrix:
    def test_unit_intrinsics_identity(self):
        cam = CameraCalibration("front", fx=1, fy=1, cx=0, cy=0)
        assert np.allclose(image_to_ego_matrix(cam).m, np.eye(4))

    def test_analytic_inverse_intrinsics(self):
        cam = CameraCalibration("front", fx=2, fy=2, cx=3, cy=4)
        out = image_to_ego_matrix(cam).m
        expected = np.eye(4)
        expected[:3, :3] = [[0.5, 0, -1.5], [0, 0.5, -2.0], [0, 0, 1.0]]
        assert np.allclose(out, expected, atol=1e-15)

    def test_translation_extrinsic_passes_through(self):
        t = Transform4.translate(0.8, -0.3, 1.4)
        cam = CameraCalibration("front", fx=1, fy=1, cx=0, cy=0, T_cam_to_ego=t)
        out = image_to_ego_matrix(cam)
        assert np.allclose(out.m[:3, 3], [0.8, -0.3, 1.4])

    def test_recovers_extrinsic_when_right_composed_with_k(self):
        for cam in default_camera_rig("real"):
            recovered = compose(image_to_ego_matrix(cam), hom(cam.intrinsic_matrix()))
            assert np.abs(recovered.m - cam.T_cam_to_ego.m).max() < 1e-10

    def test_degenerate_intrinsics_error(self):
        with pytest.raises(DegenerateIntrinsicsError):
            CameraCalibration("front", fx=0.0, fy=1.0, cx=0, cy=0)


class TestConventionChangeMatrix:
    def test_matches_convert_pose_on_positions(self):
        c = convention_change_matrix(LH_FRU_WHEEL, RH_FLU_ROOF, OFF)
        p = convert_pose(Pose(4.0, -2.0, 0.25, 0.0), LH_FRU_WHEEL, RH_FLU_ROOF, OFF)
        assert np.allclose(c.apply_point([4.0, -2.0, 0.25]), [p.x, p.y, p.z])

    def test_default_rigs_have_six_distinct_views(self):
        for kind in ("sim", "real"):
            rig = default_camera_rig(kind)
            assert len(rig) == 6
            assert len({c.name for c in rig}) == 6
            assert all(c.width == 1600 and c.height == 900 for c in rig)
