"""Ground-truth articulated motion, low-motion camera paths and projection.

Every generator takes an explicit seed; nothing touches global RNG state.
"""
from __future__ import annotations

from collections import deque
from dataclasses import asdict, dataclass, field

import numpy as np

from .camera import CameraSet, WeakPerspectiveCamera, as_camera_array
from .errors import DimensionError, ParameterError
from .factorization import stack_observations
from .kinematic_chain import Skeleton

__all__ = [
    "MotionSpec",
    "CameraPathSpec",
    "walking_motion_spec",
    "random_motion_spec",
    "generate_motion",
    "generate_camera_path",
    "derive_seeds",
    "project",
    "rotation_angle",
]


def _rotvec_matrix(w):
    theta = float(np.linalg.norm(w))
    if theta == 0.0:
        return np.eye(3)
    k = np.asarray(w, dtype=float) / theta
    K = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + np.sin(theta) * K + (1.0 - np.cos(theta)) * (K @ K)


def rotation_angle(R):
    """Geodesic angle (radians) of a rotation matrix."""
    R = np.asarray(R, dtype=float)
    # atan2 form stays accurate for small angles, unlike arccos of the trace
    v = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    return float(np.arctan2(np.linalg.norm(v) / 2.0, (np.trace(R) - 1.0) / 2.0))


@dataclass
class MotionSpec:
    """Sinusoidal joint-angle motion around a rest pose.

    Bone ``k`` (tree bones only) rotates about ``axes[k]``, expressed in its
    parent's frame, by ``offsets[k] + amplitudes[k] * sin(2 pi frequencies[k] t + phases[k])``
    radians at frame ``t``.  Frequencies are in cycles per frame.
    """

    skeleton: Skeleton
    rest_pose: np.ndarray
    num_frames: int
    amplitudes: np.ndarray
    frequencies: np.ndarray
    phases: np.ndarray
    axes: np.ndarray
    offsets: np.ndarray | None = None
    seed: int | None = None

    def __post_init__(self):
        nb = len(self.skeleton.bones)
        self.rest_pose = np.asarray(self.rest_pose, dtype=float)
        if self.rest_pose.shape != (3, self.skeleton.num_joints):
            raise DimensionError(f"rest pose {self.rest_pose.shape} does not match skeleton")
        if self.num_frames < 1:
            raise ParameterError("num_frames must be positive")
        for name in ("amplitudes", "frequencies", "phases"):
            arr = np.broadcast_to(np.asarray(getattr(self, name), dtype=float), (nb,)).copy()
            setattr(self, name, arr)
        self.offsets = (
            np.zeros(nb) if self.offsets is None
            else np.broadcast_to(np.asarray(self.offsets, dtype=float), (nb,)).copy()
        )
        axes = np.broadcast_to(np.asarray(self.axes, dtype=float), (nb, 3)).copy()
        norms = np.linalg.norm(axes, axis=1)
        if np.any(norms == 0):
            raise ParameterError("rotation axes must be non-zero")
        self.axes = axes / norms[:, None]
        if np.any(np.abs(self.offsets) + np.abs(self.amplitudes) > np.pi / 2):
            raise ParameterError("joint angles must stay within +-pi/2 of the rest pose")

    def describe(self):
        """Plain-data summary for file headers."""
        return {
            "num_frames": self.num_frames,
            "amplitudes": self.amplitudes.tolist(),
            "frequencies": self.frequencies.tolist(),
            "phases": self.phases.tolist(),
            "offsets": self.offsets.tolist(),
            "axes": self.axes.tolist(),
            "seed": self.seed,
        }


@dataclass
class CameraPathSpec:
    """Random smooth weak-perspective camera path.

    The path starts at a random view (azimuth uniform over the full circle,
    elevation within ``elevation_deg``) unless ``initial_rotation`` is given,
    and then performs a bounded random walk whose summed per-frame rotation
    angles never exceed ``max_rotation_deg``.
    """

    num_frames: int
    max_rotation_deg: float = 15.0
    scale_range: tuple = (100.0, 100.0)
    step_deg: float | None = None
    elevation_deg: tuple = (-20.0, 20.0)
    initial_rotation: np.ndarray | None = field(default=None, repr=False)
    seed: int = 0

    def __post_init__(self):
        if self.num_frames < 1:
            raise ParameterError("num_frames must be positive")
        if self.max_rotation_deg < 0:
            raise ParameterError("max_rotation_deg must be non-negative")
        lo, hi = self.scale_range
        if not 0 < lo <= hi:
            raise ParameterError(f"scale range must satisfy 0 < s_min <= s_max, got {self.scale_range}")
        if self.step_deg is not None and self.step_deg <= 0:
            raise ParameterError("step_deg must be positive")

    def describe(self):
        d = asdict(self)
        d["scale_range"] = list(self.scale_range)
        d["elevation_deg"] = list(self.elevation_deg)
        d["initial_rotation"] = None if self.initial_rotation is None else np.asarray(self.initial_rotation).tolist()
        return d


def _names_index(skeleton):
    return {n: i for i, n in enumerate(skeleton.names or ())}


def walking_motion_spec(skeleton, rest_pose, num_frames=100, cycles=2.0, variation=0.0, seed=0):
    """Gait-like motion for the bundled 15-joint skeleton.

    Hips and shoulders swing about the lateral (x) axis in antiphase, knees
    and elbows flex one way only, and the trunk twists slightly.
    ``variation`` scales random per-bone perturbations of the amplitudes.
    """
    idx = _names_index(skeleton)
    nb = len(skeleton.bones)
    child = {t: k for k, (_, t) in enumerate(skeleton.bones)}
    amp = np.zeros(nb)
    off = np.zeros(nb)
    phase = np.zeros(nb)
    axes = np.tile([1.0, 0.0, 0.0], (nb, 1))
    # (joint at the bone's child end, amplitude, offset, phase)
    table = [
        ("rknee", 0.45, 0.0, 0.0), ("lknee", 0.45, 0.0, np.pi),
        ("rankle", 0.3, 0.35, 0.5), ("lankle", 0.3, 0.35, np.pi + 0.5),
        ("lelbow", 0.35, 0.0, 0.0), ("relbow", 0.35, 0.0, np.pi),
        ("lwrist", 0.2, -0.3, 0.4), ("rwrist", 0.2, -0.3, np.pi + 0.4),
        ("head", 0.08, 0.0, 0.0),
    ]
    for name, a, o, ph in table:
        if name in idx and idx[name] in child:
            k = child[idx[name]]
            amp[k], off[k], phase[k] = a, o, ph
    if "thorax" in idx and idx["thorax"] in child:
        k = child[idx["thorax"]]
        amp[k], axes[k] = 0.12, [0.0, 1.0, 0.0]
    if variation:
        rng = np.random.default_rng(seed)
        amp = amp * (1.0 + variation * rng.uniform(-1.0, 1.0, nb))
    freq = np.full(nb, cycles / num_frames)
    return MotionSpec(skeleton, rest_pose, num_frames, amp, freq, phase, axes, off, seed)


def random_motion_spec(skeleton, rest_pose, num_frames=100, max_amplitude=0.5, seed=0):
    """Random axes, amplitudes, frequencies (0.5 to 3 cycles) and phases."""
    if not 0 <= max_amplitude <= np.pi / 2:
        raise ParameterError("max_amplitude must lie in [0, pi/2]")
    rng = np.random.default_rng(seed)
    nb = len(skeleton.bones)
    axes = rng.normal(size=(nb, 3))
    amp = rng.uniform(0.0, max_amplitude, nb)
    freq = rng.uniform(0.5, 3.0, nb) / num_frames
    phase = rng.uniform(0.0, 2 * np.pi, nb)
    return MotionSpec(skeleton, rest_pose, num_frames, amp, freq, phase, axes, None, seed)


def _tree_order(skeleton):
    """Bones in breadth-first order as ``(bone, parent_joint, child_joint)``."""
    adj = {i: [] for i in range(skeleton.num_joints)}
    for k, (r, t) in enumerate(skeleton.bones):
        adj[r].append((k, t))
        adj[t].append((k, r))
    order, seen = [], {skeleton.root}
    queue = deque([skeleton.root])
    while queue:
        u = queue.popleft()
        for k, v in adj[u]:
            if v not in seen:
                seen.add(v)
                order.append((k, u, v))
                queue.append(v)
    return order


def generate_motion(spec):
    """Forward kinematics of ``spec``; returns ``(f, 3, j)`` with the root at the origin."""
    sk = spec.skeleton
    rest = spec.rest_pose - spec.rest_pose[:, [sk.root]]
    order = _tree_order(sk)
    f, j = spec.num_frames, sk.num_joints
    out = np.zeros((f, 3, j))
    t = np.arange(f)
    angles = spec.offsets[:, None] + spec.amplitudes[:, None] * np.sin(
        2 * np.pi * spec.frequencies[:, None] * t[None, :] + spec.phases[:, None]
    )
    for frame in range(f):
        G = {sk.root: np.eye(3)}
        X = out[frame]
        for k, u, v in order:
            G[v] = G[u] @ _rotvec_matrix(spec.axes[k] * angles[k, frame])
            X[:, v] = X[:, u] + G[v] @ (rest[:, v] - rest[:, u])
    return out


def _initial_view(rng, elevation_deg):
    az = rng.uniform(0.0, 2 * np.pi)
    el = np.deg2rad(rng.uniform(*elevation_deg))
    return _rotvec_matrix([el, 0.0, 0.0]) @ _rotvec_matrix([0.0, az, 0.0])


def generate_camera_path(spec):
    """Ground-truth cameras for ``spec`` as a :class:`CameraSet`."""
    rng = np.random.default_rng(spec.seed)
    f = spec.num_frames
    R = _initial_view(rng, spec.elevation_deg)
    if spec.initial_rotation is not None:
        R = np.asarray(spec.initial_rotation, dtype=float)
    max_rad = np.deg2rad(spec.max_rotation_deg)
    step = np.deg2rad(spec.step_deg) if spec.step_deg else 2.0 * max_rad / max(f - 1, 1)
    steps = np.zeros((max(f - 1, 0), 3))
    v = rng.normal(size=3)
    v *= step / max(np.linalg.norm(v), 1e-300)
    for k in range(f - 1):
        v = v + rng.normal(scale=step / 4.0, size=3)
        n = np.linalg.norm(v)
        if n > step:
            v *= step / n
        steps[k] = v
    total = float(np.linalg.norm(steps, axis=1).sum())
    if total > max_rad:
        steps *= max_rad / total if total > 0 else 0.0
    lo, hi = spec.scale_range
    phase = rng.uniform(0.0, 2 * np.pi)
    cycles = rng.uniform(0.5, 1.5)
    t = np.arange(f) / max(f, 1)
    scales = lo + (hi - lo) * (0.5 + 0.5 * np.sin(2 * np.pi * cycles * t + phase))
    cams = []
    for k in range(f):
        if k > 0:
            R = _rotvec_matrix(steps[k - 1]) @ R
        cams.append(WeakPerspectiveCamera(float(scales[k]), R.copy(), 0.0))
    return CameraSet(cams)


def derive_seeds(seed, n):
    """``n`` distinct reproducible child seeds of ``seed``."""
    children = np.random.SeedSequence(seed).spawn(n)
    return [int(c.generate_state(1, dtype=np.uint32)[0]) for c in children]


def project(poses, cameras, noise_sigma=0.0, seed=0, translations=None):
    """Stack ``P_k X_k (+ t_k) + noise`` into a ``2f x j`` observation matrix."""
    X = np.asarray(poses, dtype=float)
    P = as_camera_array(cameras)
    if X.ndim != 3 or X.shape[1] != 3:
        raise DimensionError(f"poses must be (f, 3, j), got {X.shape}")
    if P.shape[0] != X.shape[0]:
        raise DimensionError(f"{P.shape[0]} cameras for {X.shape[0]} poses")
    if noise_sigma < 0:
        raise ParameterError("noise_sigma must be non-negative")
    frames = P @ X
    if translations is not None:
        frames = frames + np.asarray(translations, dtype=float)[:, :, None]
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        frames = frames + rng.normal(scale=noise_sigma, size=frames.shape)
    return stack_observations(list(frames))
