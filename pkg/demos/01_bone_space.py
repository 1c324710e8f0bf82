"""Walk through the bone-space representation on the bundled skeleton.

Run: python demos/01_bone_space.py
"""
import numpy as np

from kcs import build_c, build_d, gram, human15_mean_pose, human15_skeleton, nuclear_norm, to_kcs

sk = human15_skeleton()
X = human15_mean_pose()
C, D = build_c(sk), build_d(sk)
print(f"{sk.num_joints} joints, {sk.num_bones} bones; C is {C.shape}, D is {D.shape}")

# Bones are joint differences, so shifting the whole pose changes nothing.
B = to_kcs(X, C)
assert np.allclose(to_kcs(X + [[10.0], [-4.0], [2.0]], C), B)

# D walks from the root to every joint and adds up the bones on the way.
X_root = X - X[:, [sk.root]]
print("round trip error:", np.abs(B @ D - X_root).max())

# The Gram matrix holds squared bone lengths on its diagonal and has rank 3.
psi = gram(B)
print("bone lengths:", np.round(np.sqrt(np.diag(psi)), 3))
print("Gram singular values:", np.round(np.linalg.svd(psi, compute_uv=False)[:5], 4))

# Its trace is fixed by the bone lengths.  The nuclear norm is not: it also
# depends on how the bones are arranged.
parallel = np.array([[1.0, 1.0], [0, 0], [0, 0]])
orthogonal = np.eye(3)[:, :2]
print("two unit bones, parallel vs orthogonal nuclear norm:",
      round(nuclear_norm(parallel), 4), round(nuclear_norm(orthogonal), 4))

# A hand-to-hand rigid link adds one more column to C and a zero row to D.
linked = human15_skeleton(hand_link=True)
print("with hand link:", build_c(linked).shape, "last D row all zero:", not build_d(linked)[-1].any())
