"""Alternating camera / shape factorization for kinematic chains."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .camera import CameraSet, as_camera_array, estimate_all_cameras
from .errors import DegenerateInputError, DimensionError, ParameterError
from .factorization import (
    PoseBasis,
    Transform,
    center_rows,
    extract_basis,
    kcs_basis,
    subtract_mean,
    unstack_observations,
)
from .kinematic_chain import build_c, build_d
from .shape import SvtParams, solve_shape

__all__ = [
    "PipelineConfig",
    "Diagnostics",
    "ReconstructionResult",
    "reconstruct",
    "recover_translation",
    "bone_residual_rms",
]

log = logging.getLogger(__name__)

# Slack on the monotone-error guard; relative to the pixel error scale.
_MONOTONE_SLACK = 1e-9


@dataclass(frozen=True)
class PipelineConfig:
    K: int = 4
    svt: SvtParams = field(default_factory=SvtParams)
    max_outer_iters: int = 10
    outer_rel_tol: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.K < 1:
            raise ParameterError(f"K must be positive, got {self.K}")
        if self.max_outer_iters < 1:
            raise ParameterError("max_outer_iters must be at least 1")
        if not self.outer_rel_tol > 0:
            raise ParameterError("outer_rel_tol must be positive")


@dataclass
class Diagnostics:
    """Per-iteration traces.

    ``reprojection_error`` and ``nuclear_norm`` have one entry per outer
    iteration (after its shape step).  ``half_step_error`` interleaves the
    error after each camera step and each shape step, starting with the
    initial camera pass.  Errors are RMS bone misfits in pixels.
    """

    reprojection_error: list = field(default_factory=list)
    nuclear_norm: list = field(default_factory=list)
    half_step_error: list = field(default_factory=list)
    inner_iterations: list = field(default_factory=list)
    rejected_shape_steps: int = 0
    converged: bool = False

    @property
    def outer_iterations(self):
        return len(self.reprojection_error)


@dataclass
class ReconstructionResult:
    cameras: CameraSet
    poses_3d: np.ndarray  # (f, 3, j), root at origin
    transform: Transform
    diagnostics: Diagnostics
    translations_2d: np.ndarray  # (f, 2)
    basis: PoseBasis | None = None
    kcs_basis: object = None


def bone_residual_rms(W, C, cameras, model_bones):
    """RMS over frames and bones of the 2D misfit ``X'_k C - P_k M_k``."""
    frames = unstack_observations(W)
    P = as_camera_array(cameras)
    R = frames @ C - P @ model_bones
    return float(np.sqrt(np.sum(R * R) / (R.shape[0] * R.shape[2])))


def recover_translation(W, cameras, poses_3d):
    """Per-frame 2D offset minimizing ``||X'_k - (P_k X_k + t 1^T)||_F``.

    The least-squares offset is the difference of centroids.
    """
    frames = unstack_observations(W)
    P = as_camera_array(cameras)
    X = np.asarray(poses_3d, dtype=float)
    if X.shape[0] != frames.shape[0] or P.shape[0] != frames.shape[0]:
        raise DimensionError("frame counts of observations, cameras and poses differ")
    return (frames - P @ X).mean(axis=2)


def _fallback_basis(j, K):
    # orthonormal basis of the complement of the ones vector
    M = np.eye(j) - 1.0 / j
    _, _, Vt = np.linalg.svd(M)
    return PoseBasis(Vt[: min(3 * K, j - 1)])


def reconstruct(W, skeleton, X0, config=None, callback=None):
    """Reconstruct 3D poses from stacked 2D joint tracks.

    Parameters
    ----------
    W : (2f, j) array
        Fully observed image tracks in pixels.
    skeleton : Skeleton
    X0 : (3, j) array
        Initial (mean) pose; fixes the output scale.
    config : PipelineConfig, optional
    callback : callable, optional
        Called as ``callback(iteration, poses_3d, cameras)`` after each outer
        iteration, with poses in output units.

    Returns
    -------
    ReconstructionResult
    """
    config = config or PipelineConfig()
    frames = unstack_observations(W)
    f, _, j = frames.shape
    X0 = np.asarray(X0, dtype=float)
    if skeleton.num_joints != j or X0.shape != (3, j):
        raise DimensionError(
            f"tracks have {j} joints, skeleton {skeleton.num_joints}, mean pose {X0.shape}"
        )
    if not np.all(np.isfinite(frames)):
        raise DegenerateInputError("tracks contain non-finite values")
    C = build_c(skeleton)
    D = build_d(skeleton)

    # Normalize: unit mean bone length in the model, image into [-1, 1].
    bone_scale = float(np.linalg.norm(X0 @ C, axis=0).mean())
    if bone_scale <= 0:
        raise DegenerateInputError("mean pose has zero bone lengths")
    centroids = frames.mean(axis=2, keepdims=True)
    image_scale = float(np.abs(frames - centroids).max())
    if image_scale <= 0:
        raise DegenerateInputError("tracks show no spatial extent")
    Wn = ((frames - centroids) / image_scale).reshape(2 * f, j)
    X0n = X0 / bone_scale
    B0 = X0n @ C
    px = image_scale  # normalized residual -> pixels

    diag = Diagnostics()
    cams = estimate_all_cameras(Wn, C, B0)
    model = np.broadcast_to(B0, (f,) + B0.shape)
    err = bone_residual_rms(Wn, C, cams, model) * px
    diag.half_step_error.append(err)

    W_hat = center_rows(subtract_mean(Wn, cams, X0n))
    K = min(config.K, max(1, (min(2 * f, j) // 3)))
    if K != config.K:
        log.warning("K=%d exceeds the rank bound for %d frames x %d joints; using K=%d", config.K, f, j, K)
    try:
        basis = extract_basis(W_hat, K)
    except DegenerateInputError:
        basis = _fallback_basis(j, K)
    kb = kcs_basis(basis, C)
    S = kb.S
    A = np.zeros((f, 3, kb.rank))

    prev_err = None
    for it in range(config.max_outer_iters):
        if it > 0:
            cams = estimate_all_cameras(Wn, C, A @ S + B0, previous=cams)
            err = bone_residual_rms(Wn, C, cams, A @ S + B0) * px
            diag.half_step_error.append(err)
        sol = solve_shape(Wn, C, cams, S, B0, config.svt, warm_start=A.reshape(3 * f, -1))
        A_new = sol.transform.blocks()
        err_new = bone_residual_rms(Wn, C, cams, A_new @ S + B0) * px
        if err_new > err * (1 + _MONOTONE_SLACK) + _MONOTONE_SLACK:
            # composite objective fell but the data misfit rose; keep the old shape
            diag.rejected_shape_steps += 1
            err_new = err
        else:
            A = A_new
        err = err_new
        diag.half_step_error.append(err)
        diag.reprojection_error.append(err)
        diag.nuclear_norm.append(float(np.linalg.svd(A.reshape(3 * f, -1), compute_uv=False).sum()))
        diag.inner_iterations.append(sol.iterations)
        if callback is not None:
            callback(it, (A @ S + B0) @ D * bone_scale, cams.scaled(px / bone_scale))
        log.debug("outer %d: reprojection %.6g px, |A|_* %.6g", it, err, diag.nuclear_norm[-1])
        if prev_err is not None:
            change = abs(prev_err - err) / max(prev_err, 1e-300)
            if change < config.outer_rel_tol or err <= 1e-12 * px:
                diag.converged = True
                break
        elif err <= 1e-12 * px:
            diag.converged = True
            break
        prev_err = err

    poses = (A @ S + B0) @ D * bone_scale
    cameras = cams.scaled(px / bone_scale)
    translations = recover_translation(np.asarray(W, dtype=float), cameras, poses)
    return ReconstructionResult(
        cameras=cameras,
        poses_3d=poses,
        transform=Transform(A.reshape(3 * f, -1) * bone_scale),
        diagnostics=diag,
        translations_2d=translations,
        basis=basis,
        kcs_basis=kb,
    )
