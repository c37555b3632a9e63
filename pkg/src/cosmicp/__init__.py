"""Point-set registration with a correntropy similarity matrix (CoSM-ICP)."""

from .core import (EulerPose, Method, RegistrationConfig, RigidTransform, apply, compose,
                   euler_to_transform, transform_error)
from .correntropy import SimilarityMatrix, build_similarity, gaussian_kernel, rank_proxy
from .datasets import load_bunny
from .harness import ExperimentPlan, aggregate, export, run_plan
from .pcd import parse_pcd, read_pcd, save_pcd, write_pcd
from .preprocess import (OutlierSpec, TransformSampler, inject_outliers, sample_pose,
                         voxel_grid_filter)
from .registration import (RegistrationReport, estimate_step, extract_rotation,
                           find_correspondences, register, rmse)
from .spatial import KdTree

__version__ = "0.1.0"

__all__ = [
    "EulerPose", "ExperimentPlan", "KdTree", "Method", "OutlierSpec", "RegistrationConfig",
    "RegistrationReport", "RigidTransform", "SimilarityMatrix", "TransformSampler",
    "aggregate", "apply", "build_similarity", "compose", "estimate_step", "euler_to_transform",
    "export", "extract_rotation", "find_correspondences", "gaussian_kernel", "inject_outliers",
    "load_bunny", "parse_pcd", "rank_proxy", "read_pcd", "register", "rmse", "run_plan",
    "sample_pose", "save_pcd", "transform_error", "voxel_grid_filter", "write_pcd",
]
