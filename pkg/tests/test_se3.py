import json

import numpy as np
import pytest

from conftest import random_transform
from graspgauge.errors import ParameterError
from graspgauge.se3 import (PosePair, RigidTransform, compose,
                            gripper_target_est, gripper_target_gt, invert,
                            perturb_pose, pose_from_json, pose_to_json,
                            rot_z, translation)

I = RigidTransform.identity()


def assert_close(a: RigidTransform, b: RigidTransform, tol=1e-9):
    assert np.max(np.abs(a.rotation - b.rotation)) < tol
    assert np.max(np.abs(a.translation - b.translation)) < tol


def test_compose_identity():
    rng = np.random.default_rng(0)
    t = random_transform(rng)
    assert_close(compose(I, t), t)
    assert_close(compose(t, I), t)


def test_compose_inverse_is_identity():
    rng = np.random.default_rng(1)
    for _ in range(20):
        t = random_transform(rng)
        assert_close(compose(t, invert(t)), I)
        assert_close(compose(invert(t), t), I)


def test_rotation_group_closure():
    assert_close(compose(rot_z(90.0), rot_z(90.0)), rot_z(180.0))


def test_invert_trivial():
    assert_close(invert(I), I)
    assert_close(invert(translation([1, 2, 3])), translation([-1, -2, -3]))
    rng = np.random.default_rng(2)
    t = random_transform(rng)
    assert_close(invert(invert(t)), t)


def test_gripper_target_trivial():
    rng = np.random.default_rng(3)
    t = random_transform(rng)
    assert_close(gripper_target_gt(I, I, t), t)
    assert_close(gripper_target_gt(t, I, I), t)
    assert_close(gripper_target_est(I, t, I), t)


def test_gripper_target_matches_matrix_product():
    # oracle: direct 4x4 homogeneous product
    rng = np.random.default_rng(4)
    for _ in range(25):
        a, b, c = (random_transform(rng) for _ in range(3))
        want = a.as_matrix() @ b.as_matrix() @ c.as_matrix()
        got = gripper_target_gt(a, b, c).as_matrix()
        assert np.max(np.abs(want - got)) < 1e-9
        assert np.max(np.abs(
            gripper_target_est(a, b, c).as_matrix() - want)) < 1e-9


def test_est_shift_moves_target_in_camera_axes():
    rng = np.random.default_rng(5)
    t_w2c = random_transform(rng)
    t_c2o = random_transform(rng)
    t_o2g = random_transform(rng)
    shifted = RigidTransform(t_c2o.rotation, t_c2o.translation + [5.0, 0, 0])
    base = gripper_target_gt(t_w2c, t_c2o, t_o2g)
    moved = gripper_target_est(t_w2c, shifted, t_o2g)
    want = t_w2c.rotation @ np.array([5.0, 0, 0])
    assert np.allclose(moved.translation - base.translation, want, atol=1e-9)
    assert np.allclose(moved.rotation, base.rotation, atol=1e-12)


def test_chain_associativity():
    rng = np.random.default_rng(6)
    for _ in range(20):
        a, b, c = (random_transform(rng) for _ in range(3))
        assert_close(gripper_target_gt(a, b, c), compose(a, compose(b, c)),
                     tol=1e-8)


def test_relative_pose_independent_of_world_frame():
    # a fixed camera-frame offset between est and gt gives the same
    # gripper-frame error no matter where the camera sits in the world
    rng = np.random.default_rng(7)
    t_c2o = random_transform(rng)
    offset = random_transform(rng, t_scale=5.0)
    t_c2o_est = compose(offset, t_c2o)
    t_o2g = random_transform(rng)
    rels = []
    for _ in range(5):
        t_w2c = random_transform(rng)
        gt = gripper_target_gt(t_w2c, t_c2o, t_o2g)
        est = gripper_target_est(t_w2c, t_c2o_est, t_o2g)
        rels.append(compose(invert(gt), est).as_matrix())
    for m in rels[1:]:
        assert np.max(np.abs(m - rels[0])) < 1e-8


def test_outputs_orthonormal():
    rng = np.random.default_rng(8)
    t = I
    for _ in range(300):
        t = compose(t, random_transform(rng))
    r = t.rotation
    assert np.max(np.abs(r.T @ r - np.eye(3))) < 1e-9
    assert abs(np.linalg.det(r) - 1.0) < 1e-9


def test_perturb_zero_sigma_is_exact():
    rng = np.random.default_rng(9)
    t = random_transform(rng)
    assert perturb_pose(t, 0.0, 0.0, 123) is t


def test_perturb_deterministic():
    t = translation([1, 2, 3])
    a = perturb_pose(t, 5.0, 10.0, 42)
    b = perturb_pose(t, 5.0, 10.0, 42)
    assert np.array_equal(a.rotation, b.rotation)
    assert np.array_equal(a.translation, b.translation)


def test_perturb_rejects_negative_sigma():
    with pytest.raises(ParameterError):
        perturb_pose(I, -1.0, 0.0, 0)
    with pytest.raises(ParameterError):
        perturb_pose(I, 0.0, -1.0, 0)


def test_perturb_translation_magnitude_matches_chi3():
    # ||t|| of an isotropic Gaussian follows a chi distribution with 3
    # dof: E = sigma * 2 * sqrt(2/pi) = sigma * 1.5957691...
    sigma = 10.0
    n = 10_000
    norms = [np.linalg.norm(perturb_pose(I, sigma, 0.0, 1000 + k).translation)
             for k in range(n)]
    want = sigma * 2.0 * np.sqrt(2.0 / np.pi)
    assert abs(np.mean(norms) - want) / want < 0.02


def test_perturb_fixed_axis_rotates_about_that_axis():
    t = translation([0, 0, 600.0])
    p = perturb_pose(t, 0.0, 20.0, 7, axis=[0, 0, 1])
    rel = p.rotation            # rotation applied in the object frame
    assert np.allclose(rel[:, 2], [0, 0, 1], atol=1e-12)
    assert np.array_equal(p.translation, t.translation)


def test_pose_json_roundtrip(tmp_path):
    rng = np.random.default_rng(10)
    t = random_transform(rng)
    blob = json.dumps(pose_to_json(t))
    back = pose_from_json(json.loads(blob))
    assert np.array_equal(back.rotation, t.rotation)
    assert np.array_equal(back.translation, t.translation)


def test_pose_pair_holds_valid_transforms():
    rng = np.random.default_rng(11)
    pair = PosePair(gt=random_transform(rng), est=random_transform(rng))
    for t in (pair.gt, pair.est):
        assert np.max(np.abs(t.rotation.T @ t.rotation - np.eye(3))) < 1e-9
