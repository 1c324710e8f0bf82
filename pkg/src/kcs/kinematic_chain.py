"""Skeleton topology and the mapping between joint coordinates and bones.

A pose ``X`` is a ``3 x j`` matrix of joint positions.  Its image in the
kinematic chain space is the ``3 x b`` bone matrix ``B = X @ C`` whose
column ``k`` is ``x_r - x_t`` for bone ``k = (r, t)``.  The matrix ``D``
inverts this on the tree part: ``(X @ C) @ D == X`` for any pose whose
root joint sits at the origin.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, TopologyError

__all__ = [
    "Skeleton",
    "build_c",
    "build_d",
    "to_kcs",
    "from_kcs",
    "gram",
    "nuclear_norm",
    "bone_lengths",
]


@dataclass(frozen=True)
class Skeleton:
    """Kinematic chain topology.

    Parameters
    ----------
    num_joints : int
        Number of joints ``j``.
    bones : sequence of (int, int)
        Tree edges ``(r, t)``; ``r`` is the parent by convention.  Must be
        a spanning tree of the joints.
    extra : sequence of (int, int)
        Additional rigid edges that close loops (e.g. hand to hand when
        both hands hold an object).  They add columns to ``C`` only.
    root : int
        Joint placed at the origin by :func:`build_d`.
    names : sequence of str, optional
        Joint names, used by the file formats.
    """

    num_joints: int
    bones: tuple
    extra: tuple = ()
    root: int = 0
    names: tuple | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "bones", tuple(tuple(int(v) for v in e) for e in self.bones))
        object.__setattr__(self, "extra", tuple(tuple(int(v) for v in e) for e in self.extra))
        if self.names is not None:
            object.__setattr__(self, "names", tuple(str(n) for n in self.names))
        _validate(self)

    @classmethod
    def from_parents(cls, parents, extra=(), names=None):
        """Build a skeleton from a parent array (``-1`` marks the root)."""
        parents = [int(p) for p in parents]
        roots = [i for i, p in enumerate(parents) if p < 0]
        if len(roots) != 1:
            raise TopologyError(f"expected exactly one root, found {len(roots)}")
        bones = [(p, i) for i, p in enumerate(parents) if p >= 0]
        return cls(len(parents), tuple(bones), tuple(extra), roots[0], names)

    @property
    def edges(self):
        """All edges in ``C`` column order: tree bones, then extra edges."""
        return self.bones + self.extra

    @property
    def num_bones(self):
        return len(self.bones) + len(self.extra)

    def joint_index(self, name):
        if self.names is None:
            raise KeyError(name)
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(name) from None


def _validate(sk):
    j = sk.num_joints
    if j < 1:
        raise TopologyError("skeleton needs at least one joint")
    if not 0 <= sk.root < j:
        raise TopologyError(f"root {sk.root} outside [0, {j})")
    for kind, edges in (("bone", sk.bones), ("extra edge", sk.extra)):
        for k, (r, t) in enumerate(edges):
            if not (0 <= r < j and 0 <= t < j):
                raise TopologyError(f"{kind} {k} = ({r}, {t}) has a joint outside [0, {j})")
            if r == t:
                raise TopologyError(f"{kind} {k} = ({r}, {t}) is a self-loop")
    if len(sk.bones) != j - 1:
        raise TopologyError(f"a tree over {j} joints needs {j - 1} bones, got {len(sk.bones)}")
    reached = _tree_paths(sk)
    missing = [i for i in range(j) if i not in reached]
    if missing:
        raise TopologyError(f"joints {missing} are not reachable from root {sk.root}")
    if sk.names is not None:
        if len(sk.names) != j:
            raise TopologyError(f"{len(sk.names)} names for {j} joints")
        if len(set(sk.names)) != j:
            raise TopologyError("joint names must be unique")


def _tree_paths(sk):
    """Map joint -> list of (bone index, sign) from root to that joint."""
    adj = {i: [] for i in range(sk.num_joints)}
    for k, (r, t) in enumerate(sk.bones):
        # stepping r -> t: x_t = x_r - b_k; stepping t -> r: x_r = x_t + b_k
        adj[r].append((t, k, -1.0))
        adj[t].append((r, k, 1.0))
    paths = {sk.root: []}
    queue = deque([sk.root])
    while queue:
        u = queue.popleft()
        for v, k, sign in adj[u]:
            if v not in paths:
                paths[v] = paths[u] + [(k, sign)]
                queue.append(v)
    return paths


def build_c(skeleton):
    """Return the ``j x b`` matrix with ``+1`` at row ``r`` and ``-1`` at row ``t`` per edge."""
    C = np.zeros((skeleton.num_joints, skeleton.num_bones))
    for k, (r, t) in enumerate(skeleton.edges):
        C[r, k] = 1.0
        C[t, k] = -1.0
    return C


def build_d(skeleton):
    """Return the ``b x j`` matrix mapping bones back to root-anchored joints.

    Column ``i`` sums the signed tree bones on the path from the root to
    joint ``i``.  Rows of extra edges are zero.
    """
    D = np.zeros((skeleton.num_bones, skeleton.num_joints))
    for i, path in _tree_paths(skeleton).items():
        for k, sign in path:
            D[k, i] += sign
    return D


def to_kcs(X, C):
    """Map a ``3 x j`` pose to its ``3 x b`` bone matrix."""
    X = np.asarray(X, dtype=float)
    C = np.asarray(C, dtype=float)
    if X.ndim != 2 or X.shape[0] != 3:
        raise DimensionError(f"pose must be 3 x j, got {X.shape}")
    if X.shape[1] != C.shape[0]:
        raise DimensionError(f"pose has {X.shape[1]} joints but C has {C.shape[0]} rows")
    return X @ C


def from_kcs(B, D):
    """Map a ``3 x b`` bone matrix back to a root-anchored pose."""
    B = np.asarray(B, dtype=float)
    D = np.asarray(D, dtype=float)
    if B.shape[-1] != D.shape[0]:
        raise DimensionError(f"B has {B.shape[-1]} bones but D has {D.shape[0]} rows")
    return B @ D


def gram(B):
    """Gram matrix ``B.T @ B``; its diagonal holds squared bone lengths."""
    B = np.asarray(B, dtype=float)
    return B.T @ B


def nuclear_norm(M):
    """Sum of singular values."""
    return float(np.linalg.svd(np.asarray(M, dtype=float), compute_uv=False).sum())


def bone_lengths(B):
    """Column norms of a bone matrix (or a stack of them, shape ``(..., 3, b)``)."""
    return np.linalg.norm(np.asarray(B, dtype=float), axis=-2)
