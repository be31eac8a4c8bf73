import numpy as np
import pytest

from conftest import random_transform
from graspgauge import primitives
from graspgauge.errors import ContentError, ParameterError
from graspgauge.gripper import GripperModel, GripperPose
from graspgauge.mesh import make_mesh
from graspgauge.oracle import (OutcomeCategory, SimParams, evaluate_grasp,
                               object_mass_properties)
from graspgauge.se3 import (RigidTransform, compose, rot_z, translation)

IDENT = RigidTransform.identity()
PARAMS = SimParams()


def centered_grasp(opening=50.0):
    return GripperPose(IDENT, opening)


def test_centered_cube_grasp_succeeds(cube, gripper85):
    out = evaluate_grasp(cube, IDENT, gripper85, centered_grasp(), PARAMS)
    assert out.category == OutcomeCategory.SUCCESS
    assert len(out.contact_points) == 2
    # contacts on the two grasped faces
    xs = sorted(p[0] for p in out.contact_points)
    assert abs(xs[0] + 20.0) < 0.1 and abs(xs[1] - 20.0) < 0.1


def test_retracted_grasp_is_no_contact(cube, gripper85):
    pose = GripperPose(translation([0, 0, -50.0]), 50.0)
    out = evaluate_grasp(cube, IDENT, gripper85, pose, PARAMS)
    assert out.category == OutcomeCategory.NO_CONTACT


def test_closing_axis_offset_thresholds(cube, gripper85):
    """Closed form for the 40 mm cube, opening 50, finger thickness 10:
    the left finger box spans [-45 + d, -25 + d], so it prods the cube
    from d = 5 until it passes beyond at d = 55; after that both fingers
    sit on the +x side and close on nothing."""
    res = PARAMS.close_resolution
    for step in range(0, 121):
        d = 0.5 * step
        pose = GripperPose(translation([d, 0, 0]), 50.0)
        out = evaluate_grasp(cube, IDENT, gripper85, pose, PARAMS)
        if d < 5.0:
            want = {OutcomeCategory.SUCCESS}
        elif d <= 55.0:
            want = {OutcomeCategory.COLLISION}
        else:
            want = {OutcomeCategory.NO_CONTACT}
        near_threshold = min(abs(d - 5.0), abs(d - 55.0)) <= res
        if not near_threshold:
            assert out.category in want, (d, out.category)


def wedge_mesh(apex_deg=60.0, height=60.0, depth=40.0):
    """Triangular prism whose two slanted faces meet at apex_deg."""
    half = np.tan(np.radians(apex_deg / 2.0)) * height
    sec = [[-half, 0.0], [half, 0.0], [0.0, height]]     # (x, z)
    hd = depth / 2.0
    front = [[x, hd, z] for x, z in sec]
    back = [[x, -hd, z] for x, z in sec]
    v = np.asarray(front + back)
    v -= v.mean(axis=0)
    tris = [[0, 2, 1], [3, 4, 5]]                        # caps
    for i in range(3):
        j = (i + 1) % 3
        tris += [[i, j, 3 + j], [i, 3 + j, 3 + i]]
    return make_mesh(v, np.asarray(tris))


def test_wedge_grasp_slips_by_cone_test():
    # 60 deg wedge with mu = 0.5: the mean contact normals oppose at
    # 60 deg, outside the 26.57 deg friction cone
    wedge = wedge_mesh()
    g = GripperModel("wide", 120.0, 0.0, (5.0, 10.0, 20.0),
                     (40.0, 15.0, 10.0), 10.0, 0.5)
    # grasp across the slanted faces, approach horizontal (-y); the
    # opening must clear the widest section inside the finger window
    # (world z in [-10, 10] -> half width up to 28.87 mm)
    rot = RigidTransform(np.array([[1.0, 0, 0], [0, 0, -1.0], [0, 1.0, 0]]),
                         np.zeros(3))
    pose = GripperPose(rot, 75.0)
    params = SimParams(close_resolution=1.0)
    out = evaluate_grasp(wedge, IDENT, g, pose, params)
    assert out.category == OutcomeCategory.SLIPPED
    assert "friction cone" in out.failure_detail


def test_one_sided_contact_is_slipped(gripper85):
    # slab entirely on the left finger's side of the grasp center
    slab = primitives.box(extents=(10.0, 30.0, 30.0))
    t_obj = translation([-15.0, 0.0, 0.0])     # slab spans x in [-20, -10]
    out = evaluate_grasp(slab, t_obj, gripper85, centered_grasp(50.0), PARAMS)
    assert out.category == OutcomeCategory.SLIPPED
    assert "one-sided" in out.failure_detail


def test_opening_outside_stroke_rejected(cube, gripper85):
    with pytest.raises(ParameterError):
        evaluate_grasp(cube, IDENT, gripper85,
                       GripperPose(IDENT, 200.0), PARAMS)


def test_collision_checked_before_closing(cube, gripper85):
    # palm planted inside the object: stage 1 must classify, stage 2
    # would also have found contact
    pose = GripperPose(translation([0, 0, 60.0]), 50.0)
    out = evaluate_grasp(cube, IDENT, gripper85, pose, PARAMS)
    assert out.category == OutcomeCategory.COLLISION
    assert "palm" in out.failure_detail


def test_determinism_bit_for_bit(cube, gripper85):
    pose = GripperPose(compose(rot_z(17.0), translation([1.0, 2.0, 0.5])),
                       50.0)
    a = evaluate_grasp(cube, IDENT, gripper85, pose, PARAMS)
    b = evaluate_grasp(cube, IDENT, gripper85, pose, PARAMS)
    assert a.category == b.category
    assert a.closing_travel_mm == b.closing_travel_mm
    assert a.failure_detail == b.failure_detail
    for p, q in zip(a.contact_points, b.contact_points):
        assert np.array_equal(p, q)


def test_equivariance_gravity_preserving(cube, gripper85):
    # translations and yaw keep gravity fixed: outcomes must agree
    rng = np.random.default_rng(3)
    for k in range(8):
        base_target = GripperPose(
            compose(rot_z(10.0 * k), translation([2.0, 1.0, 3.0])), 50.0)
        t = compose(rot_z(float(rng.uniform(0, 360))),
                    translation(rng.uniform(-200, 200, 3)))
        a = evaluate_grasp(cube, IDENT, gripper85, base_target, PARAMS)
        b = evaluate_grasp(cube, t, gripper85,
                           GripperPose(compose(t, base_target.t_w2g), 50.0),
                           PARAMS)
        assert a.category == b.category
        assert abs(a.closing_travel_mm - b.closing_travel_mm) \
            <= PARAMS.close_resolution


def test_equivariance_full_with_rotated_gravity(cube, gripper85):
    rng = np.random.default_rng(4)
    for _ in range(6):
        t = random_transform(rng)
        target = GripperPose(translation([1.5, -2.0, 1.0]), 50.0)
        a = evaluate_grasp(cube, IDENT, gripper85, target, PARAMS)
        rotated_g = tuple(t.rotation @ np.array(PARAMS.gravity))
        b = evaluate_grasp(cube, t, gripper85,
                           GripperPose(compose(t, target.t_w2g), 50.0),
                           SimParams(gravity=rotated_g))
        assert a.category == b.category


# -- wrench feasibility ----------------------------------------------------------

def test_wrench_feasibility_hand_cases():
    """Closed-form cases for the lift test on a 40 mm cube's x-faces.

    With the contact line through the mass center the plain friction
    cones carry the load. A line offset perpendicular to gravity leaves a
    torque about the line that point contacts (pad radius 0) can never
    resist, while any positive pad radius can (squeeze force is
    unbounded). An offset parallel to gravity produces no such torque.
    """
    from graspgauge.oracle import _wrench_feasible
    f_ext = np.array([0.0, 0.0, -1.0])
    com = np.zeros(3)
    n_l, n_r = np.array([-1.0, 0, 0]), np.array([1.0, 0, 0])

    def feas(cl, cr, r):
        return _wrench_feasible([np.asarray(cl, float), np.asarray(cr, float)],
                                [n_l, n_r], [r, r], 0.5, f_ext, com, 20.0)

    assert feas([-20, 0, 0], [20, 0, 0], 0.0)
    assert not feas([-20, 10, 0], [20, 10, 0], 0.0)
    assert feas([-20, 10, 0], [20, 10, 0], 1.0)
    assert feas([-20, 0, 10], [20, 0, 10], 0.0)


def test_wrench_infeasible_outside_cone_span():
    # normals tilted 60 deg from opposition: the cones cannot even
    # balance each other plus gravity
    from graspgauge.oracle import _wrench_feasible
    a = np.radians(60.0)
    n_l = np.array([-np.cos(a / 2), 0.0, np.sin(a / 2)])
    n_r = np.array([np.cos(a / 2), 0.0, np.sin(a / 2)])
    feas = _wrench_feasible(
        [np.array([-20.0, 0, 0]), np.array([20.0, 0, 0])], [n_l, n_r],
        [5.0, 5.0], 0.5, np.array([0.0, 0.0, -1.0]), np.zeros(3), 20.0)
    assert not feas


# -- mass properties -----------------------------------------------------------


def test_cube_mass_exact():
    c = primitives.cube(edge=100.0, resolution=1)
    mass, cen = object_mass_properties(c, 1000.0)
    assert abs(mass - 1.0) < 1e-12
    assert np.allclose(cen, 0.0, atol=1e-9)


def test_centroid_translates_with_mesh(cube):
    from graspgauge.mesh import transformed
    moved = transformed(cube, translation([5.0, -3.0, 11.0]))
    _, cen0 = object_mass_properties(cube, 500.0)
    _, cen1 = object_mass_properties(moved, 500.0)
    assert np.allclose(cen1 - cen0, [5.0, -3.0, 11.0], atol=1e-9)


def test_icosphere_volume_within_two_percent(icosphere):
    mass, _ = object_mass_properties(icosphere, 1000.0)
    want = 1000.0 * (4.0 / 3.0) * np.pi * 30.0 ** 3 * 1e-9
    assert abs(mass - want) / want < 0.02


def test_tiny_volume_rejected():
    flat = make_mesh([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0.001]],
                     [[0, 1, 2], [1, 3, 2]])
    with pytest.raises(ContentError):
        object_mass_properties(flat, 500.0)


def test_open_mesh_warns_and_uses_abs_volume(cube, caplog):
    import logging
    open_mesh = make_mesh(cube.vertices, cube.triangles[:-4])
    with caplog.at_level(logging.WARNING):
        mass, _ = object_mass_properties(open_mesh, 500.0)
    assert mass > 0
    assert any("not closed" in r.message for r in caplog.records)


def test_density_must_be_positive(cube):
    with pytest.raises(ParameterError):
        object_mass_properties(cube, 0.0)
