import math

import numpy as np
import pytest
import yaml

from artifact.errors import DimensionMismatch, ParseError, ValidationError
from artifact.model import (
    CollisionSphere,
    JointLimits,
    JointSpec,
    RobotModel,
    compose_gantry_chain,
    end_effector_pose,
    forward_kinematics,
    jacobian,
    load_robot_model,
    robot_to_dict,
    translate_base,
)
from artifact.scenarios import gantry_arm, planar_2r
from artifact.transforms import Pose

from helpers import random_chain

ONE_JOINT = """
robot:
  name: one
  end_effector_link: 0
  joints:
    - {name: j1, kind: revolute, axis: [0, 0, 1],
       origin: {xyz: [0, 0, 0], quat: [1, 0, 0, 0]},
       limits: {lower: -1, upper: 1, max_velocity: 1, max_acceleration: 1, max_jerk: 1}}
  collision_spheres:
    - {link: 0, center: [0.1, 0, 0], radius: 0.05}
  self_collision_ignore: []
"""


def _doc(**changes):
    d = yaml.safe_load(ONE_JOINT)
    for path, value in changes.items():
        node = d["robot"]
        keys = path.split("__")
        for k in keys[:-1]:
            node = node[int(k)] if k.isdigit() else node[k]
        node[keys[-1]] = value
    return yaml.safe_dump(d)


def test_load_minimal_document():
    r = load_robot_model(ONE_JOINT)
    assert r.dof == 1 and r.n_spheres == 1


def test_dangling_sphere_rejected(ur5e):
    d = robot_to_dict(ur5e)
    d["robot"]["collision_spheres"].append({"link": 7, "center": [0, 0, 0], "radius": 0.1})
    with pytest.raises(ValidationError):
        load_robot_model(yaml.safe_dump(d))


@pytest.mark.parametrize(
    "text",
    ["robot: [1, 2", "robot: 3", "other: {}", "robot: {joints: []}", _doc(joints__0__axis=[0, 1])],
)
def test_parse_errors(text):
    with pytest.raises(ParseError):
        load_robot_model(text)


@pytest.mark.parametrize(
    "text",
    [
        _doc(joints__0__axis=[0, 0, 2]),
        _doc(joints__0__limits={"lower": 1, "upper": -1}),
        _doc(joints__0__limits={"lower": -1, "upper": 1, "max_velocity": 0}),
        _doc(collision_spheres=[{"link": 0, "center": [0, 0, 0], "radius": -1}]),
    ],
)
def test_validation_errors(text):
    with pytest.raises(ValidationError):
        load_robot_model(text)


def test_ur5e_home_pose_matches_hand_product(ur5e):
    # base height 0.1625, upper arm 0.425, forearm 0.3922, wrist offsets 0.1333 / -0.0997,
    # flange 0.0996 along the wrist_3 y axis
    assert ur5e.dof == 6
    home = end_effector_pose(ur5e, np.zeros(6))
    assert np.allclose(home.position, [0.425 + 0.3922, 0.1333 + 0.0996, 0.1625 - 0.0997], atol=1e-12)
    assert home.allclose(ur5e.home_pose, atol=1e-12)


def test_roundtrip_document(ur5e, rng):
    again = load_robot_model(yaml.safe_dump(robot_to_dict(ur5e)))
    q = rng.uniform(-2, 2, 6)
    assert np.array_equal(end_effector_pose(again, q).position, end_effector_pose(ur5e, q).position)
    assert again.self_collision_ignore == ur5e.self_collision_ignore


def test_adjacent_links_ignored_and_symmetric(ur5e):
    for i in range(5):
        assert (i, i + 1) in ur5e.self_collision_ignore
    assert all(i < j for i, j in ur5e.self_collision_ignore)


def test_identity_chain_fk():
    r = RobotModel(tuple(JointSpec(f"j{i}", "revolute", (0, 0, 1), Pose(), JointLimits(-1, 1)) for i in range(3)))
    ee = forward_kinematics(r, np.zeros(3))[-1]
    assert ee.allclose(Pose.identity(), atol=0.0)


def test_prismatic_translation():
    r = RobotModel((JointSpec("z", "prismatic", (0, 0, 1), Pose(), JointLimits(-1, 1)),))
    ee = end_effector_pose(r, [0.5])
    assert np.allclose(ee.position, [0, 0, 0.5], atol=0) and np.allclose(ee.orientation, [1, 0, 0, 0])
    jac = jacobian(r, [0.2])
    assert np.allclose(jac[:3, 0], [0, 0, 1]) and np.allclose(jac[3:, 0], 0)


def test_planar_2r_fk():
    ee = end_effector_pose(planar_2r(), [math.pi / 2, -math.pi / 2])
    assert np.allclose(ee.position, [1.0, 1.0, 0.0], atol=1e-12)


def test_zero_moment_arm_column():
    # joint 1 rotates about z through the tool point
    r = RobotModel(
        (
            JointSpec("a", "revolute", (0, 1, 0), Pose(), JointLimits(-3, 3)),
            JointSpec("b", "revolute", (0, 0, 1), Pose((0.5, 0, 0)), JointLimits(-3, 3)),
        )
    )
    jac = jacobian(r, [0.4, -0.7])
    assert np.allclose(jac[:3, 1], 0.0, atol=1e-15)


def test_dimension_mismatch(ur5e):
    with pytest.raises(DimensionMismatch):
        forward_kinematics(ur5e, np.zeros(5))
    with pytest.raises(DimensionMismatch):
        jacobian(ur5e, np.zeros(7))


def test_fk_returns_unit_quaternions_and_is_deterministic(ur5e, rng):
    for _ in range(20):
        q = rng.uniform(-3, 3, 6)
        a, b = forward_kinematics(ur5e, q), forward_kinematics(ur5e, q.copy())
        assert len(a) == 7
        for pa, pb in zip(a, b):
            assert abs(np.linalg.norm(pa.orientation) - 1.0) < 1e-9
            assert np.array_equal(pa.position, pb.position) and np.array_equal(pa.orientation, pb.orientation)


def fd_jacobian(robot, q, h=1e-6):
    cols = []
    base = end_effector_pose(robot, q)
    for j in range(robot.dof):
        qp, qm = q.copy(), q.copy()
        qp[j] += h
        qm[j] -= h
        pp, pm = end_effector_pose(robot, qp), end_effector_pose(robot, qm)
        lin = (pp.position - pm.position) / (2 * h)
        # angular velocity from the relative rotation of the two probes
        from artifact.transforms import so3_log

        ang = so3_log(pp.rotation @ pm.rotation.T) / (2 * h)
        cols.append(np.concatenate([lin, ang]))
    del base
    return np.stack(cols, axis=1)


def jacobian_fd_max_error(rng, n, dof, gantry):
    worst = 0.0
    for _ in range(n):
        r = random_chain(rng, dof - 1 if gantry else dof)
        if gantry:
            r = gantry_arm(r)
        q = rng.uniform(-2.5, 2.5, r.dof)
        q = np.clip(q, r.lower, r.upper)
        worst = max(worst, float(np.abs(jacobian(r, q) - fd_jacobian(r, q)).max()))
    return worst


def test_jacobian_matches_fd_small(rng):
    assert jacobian_fd_max_error(rng, 20, 6, False) < 1e-5
    assert jacobian_fd_max_error(rng, 20, 7, True) < 1e-5


def test_ur5e_jacobian_fd(ur5e, rng):
    for _ in range(10):
        q = rng.uniform(-3, 3, 6)
        assert np.abs(jacobian(ur5e, q) - fd_jacobian(ur5e, q)).max() < 1e-5


def gantry_joint(kind="prismatic"):
    return JointSpec("g", kind, (1, 0, 0), Pose(), JointLimits(-1, 1))


def test_gantry_composition(ur5e, rng):
    g = compose_gantry_chain(ur5e, gantry_joint(), [CollisionSphere(0, (0, 0, 0), 0.05)])
    assert g.dof == 7
    assert g.n_spheres == ur5e.n_spheres + 1
    assert (0, 1) in g.self_collision_ignore
    assert all((i + 1, j + 1) in g.self_collision_ignore for i, j in ur5e.self_collision_ignore)
    assert [s.link_index for s in g.spheres[1:]] == [s.link_index + 1 for s in ur5e.spheres]
    for _ in range(20):
        q = rng.uniform(-3, 3, 6)
        base = end_effector_pose(ur5e, q)
        assert np.abs(end_effector_pose(g, np.r_[0.0, q]).position - base.position).max() < 1e-12
        shifted = end_effector_pose(g, np.r_[0.3, q])
        assert np.allclose(shifted.position - base.position, [0.3, 0, 0], atol=1e-12)
        assert shifted.rotation_error(base) < 1e-12


def test_gantry_rejects_revolute(ur5e):
    with pytest.raises(ValidationError):
        compose_gantry_chain(ur5e, gantry_joint("revolute"), [])


def test_translate_base_matches_gantry(ur5e, rng):
    g = gantry_arm(ur5e)
    for _ in range(10):
        gv = rng.uniform(-0.5, 0.5)
        q = rng.uniform(-3, 3, 6)
        a = end_effector_pose(g, np.r_[gv, q])
        b = end_effector_pose(translate_base(ur5e, (gv, 0, 0)), q)
        assert np.abs(a.position - b.position).max() < 1e-12
