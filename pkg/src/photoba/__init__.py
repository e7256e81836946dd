"""Photometric bundle adjustment for RGB-D and LiDAR range images.

Refines an initial trajectory by minimizing a multi-cue photometric
error (intensity, depth/range, normals) over all frame poses, coarse to
fine, for pinhole and spherical sensors alike, with optional two-sensor
fusion.
"""

from .geometry import Pose, PerturbationVector, boxplus, exp, relative, skew
from .sensors import (
    PINHOLE,
    SPHERICAL,
    Intrinsics,
    SensorExtrinsics,
    project,
    projective_jacobian,
    unproject,
)
from .cues import CueImage, CuePyramid, NormalConfig, build_pyramid, estimate_normals, sample
from .graph import FrameNode, MatchCriteria, MatchGraph, build_graph, overlap_ratio
from .solver import (
    BAProblem,
    SolverConfig,
    SolveResult,
    reproject,
    solve_fusion,
    solve_hierarchical,
    solve_level,
)
from .evaluation import Trajectory, associate, ate_rmse, evaluate_ate, horn_align

__version__ = "0.1.0"

__all__ = [
    "BAProblem",
    "CueImage",
    "CuePyramid",
    "FrameNode",
    "Intrinsics",
    "MatchCriteria",
    "MatchGraph",
    "NormalConfig",
    "PerturbationVector",
    "PINHOLE",
    "Pose",
    "SensorExtrinsics",
    "SolveResult",
    "SolverConfig",
    "SPHERICAL",
    "Trajectory",
    "associate",
    "ate_rmse",
    "boxplus",
    "build_graph",
    "build_pyramid",
    "estimate_normals",
    "evaluate_ate",
    "exp",
    "horn_align",
    "overlap_ratio",
    "project",
    "projective_jacobian",
    "relative",
    "reproject",
    "sample",
    "skew",
    "solve_fusion",
    "solve_hierarchical",
    "solve_level",
    "unproject",
]
