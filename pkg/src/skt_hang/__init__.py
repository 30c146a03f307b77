"""Hanging-task pipeline: scene generation, geometric hanging oracle,
template-deforming trajectory network, and evaluation harness."""

PIPELINE_VERSION = 1

from .geometry import (  # noqa: E402,F401
    GravityVector,
    SE3Pose,
    SKTrajectory,
    augment_trajectory,
    make_rotation,
    relative_grasp,
    resample_path,
)
