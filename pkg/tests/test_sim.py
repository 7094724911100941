import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from artifact.errors import ConfigError, OverlappingScript, UnknownId
from artifact.model import JointLimits, JointSpec, RobotModel
from artifact.sim import SimState, detach, load_episode, script_obstacle_motion, sim_step, try_attach
from artifact.transforms import Pose
from artifact.world import Obstacle, WorldScene, add_obstacle


def lift_robot(vmax=0.5):
    joints = (
        JointSpec("z", "prismatic", (0, 0, 1), Pose(), JointLimits(-1, 1, vmax, 10, 100)),
        JointSpec("r", "revolute", (0, 0, 1), Pose(), JointLimits(-3, 3, vmax, 10, 100)),
    )
    return RobotModel(joints)


def scene_with_cube(z=0.0):
    return add_obstacle(WorldScene(), Obstacle.cuboid("cube", (0.02, 0.02, 0.02), Pose((0.0, 0.0, z))))


def test_hold_command():
    s = SimState(lift_robot(), 0.0, [0.1, 0.2], scene_with_cube())
    s2 = sim_step(s, [0.1, 0.2], 0.01)
    assert np.array_equal(s2.config, s.config) and s2.time == 0.01
    assert s2.scene.version == s.scene.version


def test_velocity_clamp():
    s = SimState(lift_robot(0.5), 0.0, [0.0, 0.0], WorldScene())
    s2 = sim_step(s, [0.0, 1.0], 0.1)
    assert s2.config[1] == pytest.approx(0.05, abs=1e-15)


def test_attached_cube_rises_with_lift():
    s = SimState(lift_robot(1.0), 0.0, [0.0, 0.0], scene_with_cube(0.003))
    s, ok = try_attach(s, "cube", Pose((0.0, 0.0, 0.0)))
    assert ok
    z0 = s.scene.get("cube").pose.position[2]
    for _ in range(20):
        s = sim_step(s, [0.2, 0.0], 0.01)
    assert s.config[0] == pytest.approx(0.2, abs=1e-12)
    assert s.scene.get("cube").pose.position[2] - z0 == pytest.approx(0.2, abs=1e-12)
    # the attached pose always equals end effector composed with the grasp transform
    assert (s.ee_pose() @ s.attached[1]).allclose(s.scene.get("cube").pose, atol=1e-12)
    s = detach(s)
    before = s.scene.get("cube").pose.position.copy()
    s = sim_step(s, [0.0, 0.0], 0.1)
    assert np.array_equal(s.scene.get("cube").pose.position, before)


def test_attach_requires_proximity():
    s = SimState(lift_robot(), 0.0, [0.0, 0.0], scene_with_cube())
    s2, ok = try_attach(s, "cube", Pose((0.0, 0.0, 0.05)))
    assert not ok and s2.attached is None


def test_scripted_displacement_and_inactive_window():
    s = SimState(lift_robot(), 0.0, [0.0, 0.0], scene_with_cube())
    moving = script_obstacle_motion(s, "cube", (0.1, 0, 0), 0.0, 1.0)
    for _ in range(150):
        moving = sim_step(moving, [0.0, 0.0], 0.01)
    assert np.allclose(moving.scene.get("cube").pose.position, [0.1, 0, 0], atol=1e-12)
    late = script_obstacle_motion(s, "cube", (0.1, 0, 0), 5.0, 6.0)
    for _ in range(100):
        late = sim_step(late, [0.0, 0.0], 0.01)
    assert np.array_equal(late.scene.get("cube").pose.position, [0, 0, 0])
    assert late.scene.version == s.scene.version


def test_script_errors():
    s = SimState(lift_robot(), 0.0, [0.0, 0.0], scene_with_cube())
    with pytest.raises(UnknownId):
        script_obstacle_motion(s, "ghost", (0, 0, 0), 0, 1)
    s = script_obstacle_motion(s, "cube", (0, 0, 1), 0, 1)
    with pytest.raises(OverlappingScript):
        script_obstacle_motion(s, "cube", (1, 0, 0), 0.5, 2)
    script_obstacle_motion(s, "cube", (1, 0, 0), 1.0, 2)  # touching windows do not overlap
    with pytest.raises(ValueError):
        script_obstacle_motion(s, "cube", (1, 0, 0), 3, 3)


@settings(max_examples=60, deadline=None)
@given(
    arrays(np.float64, (10, 2), elements=st.floats(-1, 1)),
    st.floats(0.001, 0.2),
    st.booleans(),
)
def test_step_properties(commands, dt, scripted):
    robot = lift_robot(0.7)
    s = SimState(robot, 0.0, [0.0, 0.0], scene_with_cube())
    if scripted:
        s = script_obstacle_motion(s, "cube", (0.0, 0.3, 0.0), 0.5 * dt, 4.5 * dt)
    for cmd in commands:
        nxt = sim_step(s, cmd, dt)
        assert nxt.time > s.time and nxt.time == pytest.approx(s.time + dt, abs=1e-12)
        assert np.all(np.abs(nxt.config - s.config) <= robot.max_velocity * dt + 1e-12)
        moved = not np.array_equal(nxt.scene.get("cube").pose.position, s.scene.get("cube").pose.position)
        assert (nxt.scene.version > s.scene.version) == moved
        s = nxt


def test_load_episode(tmp_path):
    from artifact.cli import data_path

    (tmp_path / "r.yaml").write_text(data_path("ur5e.yaml").read_text())
    (tmp_path / "s.yaml").write_text(data_path("workcell.yaml").read_text())
    (tmp_path / "ep.yaml").write_text(
        """
episode:
  robot: r.yaml
  scene: s.yaml
  start: [0.0, -1.2, 1.5, -1.87, -1.57, 0.0]
  goal: {xyz: [0.45, 0.35, 0.25], quat: [0, 1, 0, 0]}
  duration: 2.0
  scripts:
    - {id: cube, velocity: [0, 0, 0.1], t_start: 0.5, t_end: 1.0}
  goal_changes:
    - {t: 1.0, goal: {xyz: [0.45, -0.35, 0.25], quat: [0, 1, 0, 0]}}
  task: shuttle
"""
    )
    ep = load_episode(tmp_path / "ep.yaml")
    assert ep.duration == 2.0 and ep.scripts[0].obstacle_id == "cube" and ep.task == "shuttle"
    assert ep.goal_changes[0][0] == 1.0
    with pytest.raises(ConfigError):
        load_episode(tmp_path / "missing.yaml")
