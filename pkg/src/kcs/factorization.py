"""Observation model: stacking, mean-pose subtraction and basis extraction.

Observations are kept as a single ``2f x j`` array ``W`` whose rows
``2k`` and ``2k + 1`` hold the image coordinates of frame ``k``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import as_camera_array
from .errors import DegenerateInputError, DimensionError, ParameterError

__all__ = [
    "PoseBasis",
    "KcsBasis",
    "Transform",
    "stack_observations",
    "unstack_observations",
    "subtract_mean",
    "center_rows",
    "extract_basis",
    "kcs_basis",
]


@dataclass(frozen=True)
class PoseBasis:
    """``3K x j`` joint-space basis with orthonormal rows."""

    Q: np.ndarray

    @property
    def K(self):
        return self.Q.shape[0] // 3


@dataclass(frozen=True)
class KcsBasis:
    """Shape basis in bone space.

    ``S`` has orthonormal rows and spans the same row space as
    ``raw = Q @ C``; ``raw == change @ S`` up to dropped null directions.
    Coefficients against ``S`` therefore have the same nuclear norm as
    the deformations ``A @ S`` they generate.
    """

    S: np.ndarray
    raw: np.ndarray
    change: np.ndarray

    @property
    def rank(self):
        return self.S.shape[0]


@dataclass
class Transform:
    """Stacked per-frame coefficients ``A_hat`` of shape ``(3f, r)``."""

    A_hat: np.ndarray

    @classmethod
    def zeros(cls, num_frames, rank):
        return cls(np.zeros((3 * num_frames, rank)))

    @property
    def num_frames(self):
        return self.A_hat.shape[0] // 3

    def blocks(self):
        """View as ``(f, 3, r)``."""
        return self.A_hat.reshape(self.num_frames, 3, -1)


def stack_observations(tracks):
    """Stack per-frame ``2 x j`` image poses into a ``2f x j`` matrix."""
    frames = [np.asarray(t, dtype=float) for t in tracks]
    if not frames:
        raise DimensionError("no frames to stack")
    j = frames[0].shape[-1]
    for k, fr in enumerate(frames):
        if fr.shape != (2, j):
            raise DimensionError(f"frame {k} has shape {fr.shape}, expected (2, {j})")
    return np.vstack(frames)


def unstack_observations(W):
    """Inverse of :func:`stack_observations` as a ``(f, 2, j)`` view."""
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] % 2:
        raise DimensionError(f"observation matrix must be 2f x j, got {W.shape}")
    return W.reshape(W.shape[0] // 2, 2, W.shape[1])


def subtract_mean(W, cameras, X0):
    """Return ``W - P @ X0_hat``.

    ``X0`` is either a single ``3 x j`` pose, repeated for every frame, or
    the already stacked ``3f x j`` matrix.
    """
    frames = unstack_observations(W)
    P = as_camera_array(cameras)
    f, _, j = frames.shape
    if P.shape[0] != f:
        raise DimensionError(f"{P.shape[0]} cameras for {f} frames")
    X0 = np.asarray(X0, dtype=float)
    if X0.shape == (3, j):
        X0 = np.broadcast_to(X0, (f, 3, j))
    elif X0.shape == (3 * f, j):
        X0 = X0.reshape(f, 3, j)
    else:
        raise DimensionError(f"mean pose of shape {X0.shape} does not fit {f} frames of {j} joints")
    return (frames - P @ X0).reshape(2 * f, j)


def center_rows(M):
    """Remove the per-row mean, i.e. project rows onto the complement of ``1``.

    Bones cancel this component (every column of ``C`` sums to zero), so a
    basis spent on it would be wasted.
    """
    M = np.asarray(M, dtype=float)
    return M - M.mean(axis=1, keepdims=True)


def extract_basis(W_hat, K):
    """Top ``3K`` right singular vectors of ``W_hat``, by decreasing singular value."""
    W_hat = np.asarray(W_hat, dtype=float)
    if K < 1:
        raise ParameterError(f"K must be positive, got {K}")
    if 3 * K > min(W_hat.shape):
        raise ParameterError(
            f"3K = {3 * K} exceeds the rank bound min{W_hat.shape} = {min(W_hat.shape)}"
        )
    if not np.all(np.isfinite(W_hat)):
        raise DegenerateInputError("observation residual has non-finite entries")
    _, s, Vt = np.linalg.svd(W_hat, full_matrices=False)
    if s[0] == 0.0:
        raise DegenerateInputError("observation residual is identically zero")
    return PoseBasis(Vt[: 3 * K].copy())


def kcs_basis(basis, C, rtol=1e-10):
    """Map a joint basis to bone space and orthonormalize its rows."""
    Q = basis.Q if isinstance(basis, PoseBasis) else np.asarray(basis, dtype=float)
    raw = Q @ np.asarray(C, dtype=float)
    U, s, Vt = np.linalg.svd(raw, full_matrices=False)
    keep = s > rtol * max(s[0], np.finfo(float).tiny) if s.size else np.zeros(0, bool)
    r = int(keep.sum())
    if r == 0:
        raise DegenerateInputError("pose basis has no component that survives the bone map")
    return KcsBasis(S=Vt[:r].copy(), raw=raw, change=U[:, :r] * s[:r])
