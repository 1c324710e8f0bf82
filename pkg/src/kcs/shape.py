"""Nuclear-norm shape estimation with cameras held fixed.

Minimizes the composite objective

    F(A) = lam / 2 * || W C - P (A S + B0_hat) ||_F^2 + || A ||_*

over the stacked ``3f x r`` coefficient matrix ``A`` by proximal gradient
descent, where the proximal step is singular value thresholding.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .camera import as_camera_array
from .errors import DimensionError, DivergenceError, ParameterError
from .factorization import KcsBasis, Transform, unstack_observations

__all__ = ["SvtParams", "ShapeSolution", "svt_shrink", "shape_objective", "solve_shape"]


@dataclass(frozen=True)
class SvtParams:
    """Proximal-gradient settings.

    ``step_size="auto"`` uses the reciprocal Lipschitz constant of the data
    term.  The shrinkage threshold always equals the step size since the
    nuclear norm carries unit weight.
    """

    penalty_weight: float = 100.0
    step_size: float | str = "auto"
    max_inner_iters: int = 300
    rel_tol: float = 1e-6
    backtracking: bool = True

    def __post_init__(self):
        if not self.penalty_weight > 0:
            raise ParameterError(f"penalty_weight must be positive, got {self.penalty_weight}")
        if self.step_size != "auto" and not (
            isinstance(self.step_size, (int, float)) and self.step_size > 0
        ):
            raise ParameterError(f"step_size must be 'auto' or positive, got {self.step_size!r}")
        if self.max_inner_iters < 1:
            raise ParameterError("max_inner_iters must be at least 1")
        if not 0 < self.rel_tol < 1:
            raise ParameterError(f"rel_tol must lie in (0, 1), got {self.rel_tol}")


@dataclass
class ShapeSolution:
    transform: Transform
    objective: float
    iterations: int
    objective_trace: list = field(default_factory=list)
    data_trace: list = field(default_factory=list)
    step_size: float = float("nan")


def svt_shrink(M, tau):
    """Soft-threshold the singular values of ``M`` by ``tau``."""
    M = np.asarray(M, dtype=float)
    if tau < 0:
        raise ParameterError(f"threshold must be non-negative, got {tau}")
    if tau == 0:
        return M.copy()
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    s = np.maximum(s - tau, 0.0)
    keep = s > 0
    return (U[:, keep] * s[keep]) @ Vt[keep]


def _setup(W, C, cameras, basis, B0):
    frames = unstack_observations(W)
    f, _, j = frames.shape
    C = np.asarray(C, dtype=float)
    if C.shape[0] != j:
        raise DimensionError(f"C has {C.shape[0]} rows for {j} joints")
    P = as_camera_array(cameras)
    if P.shape[0] != f:
        raise DimensionError(f"{P.shape[0]} cameras for {f} frames")
    S = basis.S if isinstance(basis, KcsBasis) else np.asarray(basis, dtype=float)
    if S.shape[1] != C.shape[1]:
        raise DimensionError(f"basis has {S.shape[1]} columns for {C.shape[1]} bones")
    B0 = np.asarray(B0, dtype=float)
    if B0.shape == (3, C.shape[1]):
        B0 = np.broadcast_to(B0, (f, 3, C.shape[1]))
    elif B0.shape == (3 * f, C.shape[1]):
        B0 = B0.reshape(f, 3, C.shape[1])
    else:
        raise DimensionError(f"initial bones of shape {B0.shape} do not fit")
    return frames @ C, P, S, B0


def _data_residual(WC, P, A, S, B0):
    return WC - P @ (A @ S + B0)


def shape_objective(W, C, cameras, basis, B0, A_hat, penalty_weight):
    """Evaluate the composite objective at ``A_hat``."""
    WC, P, S, B0 = _setup(W, C, cameras, basis, B0)
    A = np.asarray(A_hat, dtype=float).reshape(WC.shape[0], 3, S.shape[0])
    R = _data_residual(WC, P, A, S, B0)
    return 0.5 * penalty_weight * float(np.sum(R * R)) + float(
        np.linalg.svd(A.reshape(-1, S.shape[0]), compute_uv=False).sum()
    )


def solve_shape(W, C, cameras, basis, B0, params=None, warm_start=None):
    """Proximal gradient on the composite objective with cameras fixed.

    Parameters
    ----------
    W : (2f, j) array
        Stacked observations.
    C : (j, b) array
    cameras : CameraSet or (f, 2, 3) array
    basis : KcsBasis or (r, b) array
        Bone-space basis; rows should be orthonormal.
    B0 : (3, b) or (3f, b) array
        Initial bone configuration, shared or per frame.
    params : SvtParams
    warm_start : Transform or (3f, r) array, optional
        Starting coefficients; zeros by default.

    Returns
    -------
    ShapeSolution
        The objective at the output never exceeds the objective at
        ``warm_start``.
    """
    params = params or SvtParams()
    WC, P, S, B0 = _setup(W, C, cameras, basis, B0)
    f, r = WC.shape[0], S.shape[0]
    lam = params.penalty_weight
    if warm_start is None:
        A = np.zeros((f, 3, r))
    else:
        A0 = warm_start.A_hat if isinstance(warm_start, Transform) else warm_start
        A = np.array(A0, dtype=float).reshape(f, 3, r)

    PtP = np.transpose(P, (0, 2, 1))

    def data(A):
        R = _data_residual(WC, P, A, S, B0)
        with np.errstate(over="ignore", invalid="ignore"):
            return 0.5 * lam * float(np.sum(R * R)), R

    def nuc(A):
        return float(np.linalg.svd(A.reshape(3 * f, r), compute_uv=False).sum())

    if params.step_size == "auto":
        p_norm = max(float(np.linalg.norm(Pk, 2)) for Pk in P) if f else 0.0
        s_norm = float(np.linalg.norm(S, 2))
        L = lam * p_norm**2 * s_norm**2
        step = 1.0 / L if L > 0 else 1.0
    else:
        step = float(params.step_size)

    d, R = data(A)
    obj = d + nuc(A)
    if not np.isfinite(obj):
        raise DivergenceError("objective is not finite at the starting point")
    obj_trace, data_trace = [obj], [d]
    it = 0
    for it in range(1, params.max_inner_iters + 1):
        grad = -lam * (PtP @ R @ S.T)
        while True:
            A_new = svt_shrink((A - step * grad).reshape(3 * f, r), step).reshape(f, 3, r)
            d_new, R_new = data(A_new)
            obj_new = d_new + nuc(A_new)
            if not np.isfinite(obj_new):
                if not params.backtracking:
                    raise DivergenceError(f"objective became non-finite at inner iteration {it}")
            elif obj_new <= obj or not params.backtracking:
                break
            step *= 0.5
            if step < 1e-300:
                raise DivergenceError("step size underflow during backtracking")
        change = abs(obj - obj_new) / max(abs(obj), 1e-300)
        A, R, obj, d = A_new, R_new, obj_new, d_new
        obj_trace.append(obj)
        data_trace.append(d)
        if change < params.rel_tol:
            break
    return ShapeSolution(Transform(A.reshape(3 * f, r)), obj, it, obj_trace, data_trace, step)
