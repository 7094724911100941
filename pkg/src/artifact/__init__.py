"""Motion planning for serial manipulators: kinematics, costs, optimization, MPC."""
from .kernels import BACKEND, available_backends, use_backend
from .model import RobotModel, load_robot_model, forward_kinematics, end_effector_pose, jacobian
from .transforms import Pose
from .trajectory import Trajectory
from .world import Obstacle, WorldScene, load_scene

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Obstacle",
    "Pose",
    "RobotModel",
    "Trajectory",
    "WorldScene",
    "available_backends",
    "end_effector_pose",
    "forward_kinematics",
    "jacobian",
    "load_robot_model",
    "load_scene",
    "use_backend",
]
