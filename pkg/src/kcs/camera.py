"""Weak-perspective camera estimation in bone space.

A weak-perspective camera is ``P = s * R[:2]`` with ``R`` a rotation and
``s >= 0``.  Its rows have equal norm and are orthogonal, which are the two
constraints checked by :func:`constraint_residuals`.  Cameras are fitted to
bone vectors (``X' @ C``), so no translation enters the problem.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGeometryError, DimensionError

__all__ = [
    "WeakPerspectiveCamera",
    "CameraSet",
    "as_camera_array",
    "constraint_residuals",
    "estimate_camera",
    "estimate_all_cameras",
]

_FLIP_XY = np.diag([-1.0, -1.0, 1.0])


@dataclass(frozen=True)
class WeakPerspectiveCamera:
    """Scaled orthographic camera.

    ``rotation`` is a full 3 x 3 rotation whose first two rows are the image
    axes and whose third row is the viewing direction.
    """

    scale: float
    rotation: np.ndarray
    residual: float = float("nan")
    ambiguous: bool = False
    alternatives: tuple = field(default=(), repr=False, compare=False)

    @property
    def rows(self):
        return self.rotation[:2]

    @property
    def matrix(self):
        return self.scale * self.rotation[:2]

    def project(self, X):
        return self.matrix @ X

    @classmethod
    def from_matrix(cls, P):
        """Nearest weak-perspective camera to an arbitrary ``2 x 3`` matrix."""
        P = np.asarray(P, dtype=float)
        U, s, Vt = np.linalg.svd(P, full_matrices=False)
        rows = U @ Vt
        return cls(float(s.mean()), _complete(rows))


@dataclass
class CameraSet:
    """One camera per frame; logically the block-diagonal ``P``."""

    cameras: list

    def __len__(self):
        return len(self.cameras)

    def __getitem__(self, k):
        return self.cameras[k]

    def __iter__(self):
        return iter(self.cameras)

    @property
    def matrices(self):
        """``(f, 2, 3)`` array of camera matrices."""
        return np.stack([c.matrix for c in self.cameras])

    @property
    def residuals(self):
        return np.array([c.residual for c in self.cameras])

    @property
    def ambiguous(self):
        return np.array([c.ambiguous for c in self.cameras])

    def block_diagonal(self):
        from scipy.linalg import block_diag

        return block_diag(*self.matrices)

    def scaled(self, factor):
        return CameraSet(
            [
                WeakPerspectiveCamera(c.scale * factor, c.rotation, c.residual * factor, c.ambiguous)
                for c in self.cameras
            ]
        )


def as_camera_array(cameras):
    """Coerce a :class:`CameraSet`, a camera list or an array to ``(f, 2, 3)``."""
    if isinstance(cameras, CameraSet):
        return cameras.matrices
    if isinstance(cameras, (list, tuple)) and cameras and isinstance(cameras[0], WeakPerspectiveCamera):
        return np.stack([c.matrix for c in cameras])
    P = np.asarray(cameras, dtype=float)
    if P.ndim == 2 and P.shape[0] % 2 == 0 and P.shape[1] == 3:
        P = P.reshape(-1, 2, 3)
    if P.ndim != 3 or P.shape[1:] != (2, 3):
        raise DimensionError(f"cannot interpret array of shape {P.shape} as cameras")
    return P


def constraint_residuals(P):
    """Return (equal row norms, orthogonal rows) residuals of a ``2 x 3`` matrix."""
    P = np.asarray(P, dtype=float)
    return float(P[0] @ P[0] - P[1] @ P[1]), float(P[0] @ P[1])


def _complete(rows):
    return np.vstack([rows, np.cross(rows[0], rows[1])])


def _plane_completions(O, M, U):
    """Both weak-perspective cameras agreeing with the in-plane affine fit.

    With ``A`` the ``2 x 2`` fit in the plane spanned by ``U[:, :2]``, the
    out-of-plane column ``c`` must equalize the row norms and make the rows
    orthogonal; ``(c1 + i c2)^2 = |a2|^2 - |a1|^2 - 2i a1.a2`` has two roots.
    """
    E = U[:, :2]
    A = np.linalg.lstsq((E.T @ M).T, O.T, rcond=None)[0].T
    a1, a2 = A
    z = np.sqrt(complex(a2 @ a2 - a1 @ a1, -2.0 * (a1 @ a2)))
    out = []
    for c in (np.array([z.real, z.imag]), -np.array([z.real, z.imag])):
        P = A @ E.T + np.outer(c, U[:, 2])
        Up, _, Vpt = np.linalg.svd(P, full_matrices=False)
        out.append(_complete(Up @ Vpt))
    return out


def _rodrigues(w):
    theta = np.linalg.norm(w)
    K = np.array([[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]], [-w[1], w[0], 0.0]])
    if theta < 1e-12:
        return np.eye(3) + K
    K /= theta
    return np.eye(3) + np.sin(theta) * K + (1.0 - np.cos(theta)) * (K @ K)


def _best_scale(O, R, M):
    """Optimal non-negative scale for fixed rotation; flips the image axes if needed."""
    PM = R[:2] @ M
    den = float(np.sum(PM * PM))
    s = float(np.sum(O * PM)) / den if den > 0 else 0.0
    if s < 0:
        R = _FLIP_XY @ R
        s = -s
    return s, R


def _cost(O, R, M, s):
    r = O - s * (R[:2] @ M)
    return float(np.sum(r * r))


def _refine(O, M, R, s, max_iter=30):
    """Levenberg-Marquardt on a local rotation increment and the scale."""
    cost = _cost(O, R, M, s)
    mu = 1e-6
    E = np.eye(3)
    crosses = [np.cross(E[i][:, None], M, axis=0) for i in range(3)]
    for _ in range(max_iter):
        RM = R[:2] @ M
        r = (O - s * RM).ravel()
        J = np.empty((r.size, 4))
        for i in range(3):
            J[:, i] = -s * (R[:2] @ crosses[i]).ravel()
        J[:, 3] = -RM.ravel()
        g = J.T @ r
        H = J.T @ J
        improved = False
        while mu < 1e12:
            step = np.linalg.solve(H + mu * np.diag(np.diag(H) + 1e-12), -g)
            R_new = R @ _rodrigues(step[:3])
            s_new = s + step[3]
            s_new, R_new = _best_scale(O, R_new, M)
            new_cost = _cost(O, R_new, M, s_new)
            if new_cost < cost:
                rel = (cost - new_cost) / max(cost, 1e-300)
                R, s, cost = R_new, s_new, new_cost
                mu = max(mu * 0.1, 1e-12)
                improved = True
                break
            mu *= 10.0
        if not improved or rel < 1e-14:
            break
    # re-orthonormalize against drift
    U, _, Vt = np.linalg.svd(R)
    R = U @ Vt
    s, R = _best_scale(O, R, M)
    return R, s, _cost(O, R, M, s)


def estimate_camera(observed_bones, model_bones, previous=None, planar_tol=1e-3, collinear_tol=1e-8):
    """Fit a weak-perspective camera mapping model bones to observed bones.

    Parameters
    ----------
    observed_bones : (2, b) array
        Image-space bones ``X'_i @ C``.
    model_bones : (3, b) array
        Current 3D bone estimate ``A_i @ S + B0``.
    previous : WeakPerspectiveCamera, optional
        Warm start.  The returned camera never has a larger residual than
        ``previous`` for the same bones.
    planar_tol : float
        Relative size of the smallest singular value of the model bones
        below which the input counts as coplanar and the result is flagged
        ambiguous.
    collinear_tol : float
        Relative size of the second singular value below which the bones
        are treated as collinear and no camera is determined.

    Returns
    -------
    WeakPerspectiveCamera
        ``residual`` is the Frobenius norm of the bone misfit.  When the
        depth-mirrored solution fits equally well, ``ambiguous`` is set and
        the other solution is listed in ``alternatives``.
    """
    O = np.asarray(observed_bones, dtype=float)
    M = np.asarray(model_bones, dtype=float)
    if O.ndim != 2 or M.ndim != 2 or O.shape[0] != 2 or M.shape[0] != 3 or O.shape[1] != M.shape[1]:
        raise DimensionError(f"observed {O.shape} and model {M.shape} bones do not match")
    if not (np.all(np.isfinite(O)) and np.all(np.isfinite(M))):
        raise DegenerateGeometryError("non-finite bones")
    U, sv, _ = np.linalg.svd(M)
    if sv.size < 2 or sv[0] == 0.0 or sv[1] <= collinear_tol * sv[0]:
        raise DegenerateGeometryError("model bones are collinear; camera is undetermined")
    planar = sv.size < 3 or sv[2] <= planar_tol * sv[0]
    normal = U[:, 2]

    P_ls = np.linalg.lstsq(M.T, O.T, rcond=None)[0].T
    Up, _, Vpt = np.linalg.svd(P_ls, full_matrices=False)
    R0 = _complete(Up @ Vpt)
    mirror = np.eye(3) - 2.0 * np.outer(normal, normal)
    starts = [R0, _complete((R0 @ mirror)[:2])] + _plane_completions(O, M, U)
    if previous is not None:
        starts.insert(0, np.asarray(previous.rotation, dtype=float))

    fits = []
    for R in starts:
        s, R = _best_scale(O, R, M)
        fits.append(_refine(O, M, R, s))
    order = sorted(range(len(fits)), key=lambda i: (fits[i][2], i))
    R, s, cost = fits[order[0]]
    resid = float(np.sqrt(cost))

    tol = 1e-6 * max(resid, 1e-12 * float(np.linalg.norm(O)) + 1e-300)
    alts = []
    for i in order[1:]:
        Ri, si, ci = fits[i]
        distinct = np.linalg.norm(Ri[:2] - R[:2]) > 1e-6
        if distinct and abs(np.sqrt(ci) - resid) <= tol and all(
            np.linalg.norm(Ri[:2] - a.rotation[:2]) > 1e-6 for a in alts
        ):
            alts.append(WeakPerspectiveCamera(si, Ri, float(np.sqrt(ci))))
    ambiguous = bool(planar or alts)
    return WeakPerspectiveCamera(s, R, resid, ambiguous, tuple(alts))


def estimate_all_cameras(W, C, model_bones, previous=None, **kwargs):
    """Estimate one camera per frame.

    ``model_bones`` is either one ``3 x b`` matrix shared by every frame or
    an ``(f, 3, b)`` stack.  Frames are solved independently; a sequential
    pass then resolves mirror ambiguities by picking, among equally good
    solutions, the one closest to the preceding frame's camera.
    """
    from .factorization import unstack_observations

    frames = unstack_observations(W)
    f = frames.shape[0]
    C = np.asarray(C, dtype=float)
    M = np.asarray(model_bones, dtype=float)
    if M.ndim == 2:
        M = np.broadcast_to(M, (f,) + M.shape)
    if M.shape[0] != f:
        raise DimensionError(f"{M.shape[0]} model bone sets for {f} frames")
    if previous is not None and len(previous) != f:
        raise DimensionError(f"{len(previous)} previous cameras for {f} frames")
    cams = []
    for k in range(f):
        prev = previous[k] if previous is not None else None
        try:
            cams.append(estimate_camera(frames[k] @ C, M[k], prev, **kwargs))
        except DegenerateGeometryError as exc:
            raise DegenerateGeometryError(str(exc), frame=k) from exc
    for k in range(1, f):
        cam = cams[k]
        if not cam.alternatives:
            continue
        ref = cams[k - 1].rotation[:2]
        options = (cam,) + cam.alternatives
        best = min(options, key=lambda c: np.linalg.norm(c.rotation[:2] - ref))
        if best is not cam:
            others = tuple(o for o in options if o is not best)
            cams[k] = WeakPerspectiveCamera(best.scale, best.rotation, best.residual, True, others)
    return CameraSet(cams)
