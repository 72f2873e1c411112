"""Collaborative-manipulation toolkit: multi-robot grasp planning and transport.

Pipeline: fuse multi-view point clouds of a target object, generate
collision-free grasp candidates, synthesize local grasp poses, score
coalitions with wrench-space metrics, and plan two-stage closed-chain
trajectories for the robot team.
"""

__version__ = "0.1.0"

from .geometry import (  # noqa: F401
    Configuration,
    GraspPose,
    Pose,
    RobotModel,
    compose,
    forward_kinematics,
    inverse_kinematics,
    pose_from_tva,
    pose_loss,
    tva_from_pose,
)
