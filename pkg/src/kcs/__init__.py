"""Monocular 3D reconstruction of kinematic chains.

Poses are mapped into bone space (``B = X C``), where a low-rank
factorization with a nuclear-norm penalty is solved jointly with
weak-perspective cameras.
"""
__version__ = "0.1.0"

from .camera import CameraSet, WeakPerspectiveCamera, estimate_all_cameras, estimate_camera
from .datasets import human15_mean_pose, human15_skeleton
from .errors import (
    DegenerateGeometryError,
    DegenerateInputError,
    DimensionError,
    DivergenceError,
    FormatError,
    KcsError,
    ParameterError,
    TopologyError,
)
from .evaluation import mpjpe, per_frame_errors, procrustes_align, reprojection_error, sequence_3d_error, three_dpe
from .factorization import extract_basis, kcs_basis
from .kinematic_chain import Skeleton, bone_lengths, build_c, build_d, from_kcs, gram, nuclear_norm, to_kcs
from .pipeline import PipelineConfig, ReconstructionResult, reconstruct
from .shape import SvtParams, solve_shape, svt_shrink

__all__ = [
    "__version__",
    "CameraSet", "WeakPerspectiveCamera", "estimate_camera", "estimate_all_cameras",
    "human15_skeleton", "human15_mean_pose",
    "KcsError", "TopologyError", "DimensionError", "ParameterError", "DegenerateInputError",
    "DegenerateGeometryError", "DivergenceError", "FormatError",
    "mpjpe", "procrustes_align", "three_dpe", "per_frame_errors", "sequence_3d_error", "reprojection_error",
    "extract_basis", "kcs_basis",
    "Skeleton", "build_c", "build_d", "to_kcs", "from_kcs", "gram", "nuclear_norm", "bone_lengths",
    "PipelineConfig", "ReconstructionResult", "reconstruct",
    "SvtParams", "solve_shape", "svt_shrink",
]
