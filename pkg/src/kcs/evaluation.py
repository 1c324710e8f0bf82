"""Pose error metrics: MPJPE, aligned 3DPE, sequence 3D error, reprojection."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import as_camera_array
from .errors import DegenerateGeometryError, DimensionError
from .factorization import unstack_observations

__all__ = [
    "AlignmentTransform",
    "mpjpe",
    "procrustes_align",
    "three_dpe",
    "sequence_3d_error",
    "per_frame_errors",
    "reprojection_error",
]


@dataclass(frozen=True)
class AlignmentTransform:
    """``x -> scale * rotation @ x + translation``."""

    rotation: np.ndarray
    translation: np.ndarray
    scale: float = 1.0

    def apply(self, X):
        return self.scale * self.rotation @ np.asarray(X, dtype=float) + self.translation[:, None]


def _pair(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != 3:
        raise DimensionError(f"poses must both be 3 x j, got {a.shape} and {b.shape}")
    return a, b


def mpjpe(estimate, ground_truth):
    """Mean Euclidean distance between corresponding joints."""
    a, b = _pair(estimate, ground_truth)
    return float(np.linalg.norm(a - b, axis=0).mean())


def procrustes_align(estimate, ground_truth, scale=True):
    """Align ``estimate`` onto ``ground_truth`` by a similarity (or rigid) transform.

    Returns the transform and the aligned estimate.  With ``scale=False``
    the scale is fixed to 1.
    """
    a, b = _pair(estimate, ground_truth)
    if a.shape[1] < 3:
        raise DegenerateGeometryError("alignment needs at least three joints")
    mu_a = a.mean(axis=1, keepdims=True)
    mu_b = b.mean(axis=1, keepdims=True)
    a0, b0 = a - mu_a, b - mu_b
    cov = b0 @ a0.T
    U, s, Vt = np.linalg.svd(cov)
    if s[0] == 0 or s[1] <= 1e-12 * s[0]:
        raise DegenerateGeometryError("point sets are degenerate; rotation is undetermined")
    d = np.sign(np.linalg.det(U @ Vt)) or 1.0
    E = np.diag([1.0, 1.0, d])
    R = U @ E @ Vt
    c = float(np.trace(np.diag(s) @ E)) / float(np.sum(a0 * a0)) if scale else 1.0
    t = (mu_b - c * R @ mu_a).ravel()
    T = AlignmentTransform(R, t, c)
    return T, T.apply(a)


def three_dpe(estimate, ground_truth, scale=True):
    """MPJPE after :func:`procrustes_align`."""
    _, aligned = procrustes_align(estimate, ground_truth, scale=scale)
    return mpjpe(aligned, ground_truth)


def per_frame_errors(estimates, ground_truths, scale=True):
    """Return ``(mpjpe, 3dpe)`` arrays with one entry per frame."""
    est = np.asarray(estimates, dtype=float)
    gt = np.asarray(ground_truths, dtype=float)
    if est.shape != gt.shape:
        raise DimensionError(f"sequence shapes differ: {est.shape} vs {gt.shape}")
    m = np.array([mpjpe(e, g) for e, g in zip(est, gt)])
    p = np.array([three_dpe(e, g, scale=scale) for e, g in zip(est, gt)])
    return m, p


def sequence_3d_error(estimates, ground_truths, scale=True):
    """Mean 3DPE over all frames."""
    return float(per_frame_errors(estimates, ground_truths, scale=scale)[1].mean())


def reprojection_error(W, cameras, poses_3d, translations=None):
    """Mean per-joint image distance (pixels) of the projected poses.

    Missing ``translations`` are fitted per frame (centroid difference).
    """
    frames = unstack_observations(W)
    P = as_camera_array(cameras)
    X = np.asarray(poses_3d, dtype=float)
    proj = P @ X
    if translations is None:
        translations = (frames - proj).mean(axis=2)
    proj = proj + np.asarray(translations, dtype=float)[:, :, None]
    return float(np.linalg.norm(frames - proj, axis=1).mean())
