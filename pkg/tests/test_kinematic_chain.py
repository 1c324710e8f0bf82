import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kcs.datasets import human15_skeleton
from kcs.errors import DimensionError, TopologyError
from kcs.kinematic_chain import (
    Skeleton,
    bone_lengths,
    build_c,
    build_d,
    from_kcs,
    gram,
    nuclear_norm,
    to_kcs,
)

from conftest import random_rotation, random_tree


def test_c_single_bone():
    C = build_c(Skeleton(2, [(0, 1)]))
    np.testing.assert_array_equal(C, [[1.0], [-1.0]])


def test_c_two_bone_chain():
    C = build_c(Skeleton(3, [(0, 1), (1, 2)]))
    np.testing.assert_array_equal(C, [[1, 0], [-1, 1], [0, -1]])


def test_c_hand_link_adds_one_column():
    plain, linked = human15_skeleton(), human15_skeleton(hand_link=True)
    C0, C1 = build_c(plain), build_c(linked)
    assert C1.shape == (15, C0.shape[1] + 1)
    np.testing.assert_array_equal(C1[:, :-1], C0)
    col = C1[:, -1]
    assert col[plain.joint_index("lwrist")] == 1 and col[plain.joint_index("rwrist")] == -1
    assert np.count_nonzero(col) == 2


def test_c_columns_sum_to_zero(rng):
    sk = random_tree(rng, 12)
    np.testing.assert_array_equal(build_c(sk).sum(axis=0), 0)


def test_d_single_bone_sign():
    D = build_d(Skeleton(2, [(0, 1)]))
    np.testing.assert_array_equal(D, [[0.0, -1.0]])


def test_d_chain_accumulates():
    D = build_d(Skeleton(3, [(0, 1), (1, 2)]))
    np.testing.assert_array_equal(D, [[0, -1, -1], [0, 0, -1]])


def test_d_extra_rows_zero():
    sk = human15_skeleton(hand_link=True)
    D = build_d(sk)
    np.testing.assert_array_equal(D[-1], 0)
    np.testing.assert_array_equal(D[:, sk.root], 0)


def test_round_trip_random_trees(rng):
    # (XC)D == X for 100 random trees and root-centred poses
    for _ in range(100):
        j = int(rng.integers(2, 25))
        sk = random_tree(rng, j)
        X = rng.normal(size=(3, j))
        X -= X[:, [sk.root]]
        np.testing.assert_allclose(from_kcs(to_kcs(X, build_c(sk)), build_d(sk)), X, atol=1e-12)


def test_round_trip_reversed_edges(rng):
    # edges pointing towards the root use the other sign
    sk = Skeleton(4, [(1, 0), (1, 2), (3, 2)], root=0)
    X = rng.normal(size=(3, 4))
    X -= X[:, [0]]
    np.testing.assert_allclose(to_kcs(X, build_c(sk)) @ build_d(sk), X, atol=1e-12)


def test_round_trip_with_consistent_extra_edge(rng, human, mean_pose):
    sk = human15_skeleton(hand_link=True)
    X = mean_pose - mean_pose[:, [sk.root]]
    np.testing.assert_allclose(to_kcs(X, build_c(sk)) @ build_d(sk), X, atol=1e-12)


def test_to_kcs_single_bone():
    B = to_kcs(np.array([[0.0, 1.0], [0, 0], [0, 0]]), build_c(Skeleton(2, [(0, 1)])))
    np.testing.assert_array_equal(B, [[-1.0], [0.0], [0.0]])


def test_to_kcs_matches_differences(rng):
    sk = random_tree(rng, 10)
    X = rng.normal(size=(3, 10))
    B = to_kcs(X, build_c(sk))
    for k, (r, t) in enumerate(sk.edges):
        np.testing.assert_allclose(B[:, k], X[:, r] - X[:, t], atol=1e-14)


@settings(max_examples=50, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    t=st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3),
)
def test_translation_invariance(seed, t):
    rng = np.random.default_rng(seed)
    j = int(rng.integers(2, 20))
    sk = random_tree(rng, j)
    C = build_c(sk)
    X = rng.integers(-100, 100, size=(3, j)).astype(float)
    shifted = X + np.asarray(t)[:, None]
    # integer poses plus a shared shift: differences are exact only up to rounding of the shift
    np.testing.assert_allclose(to_kcs(shifted, C), to_kcs(X, C), atol=1e-12 * (1 + max(map(abs, t))))


def test_translation_invariance_exact(rng):
    sk = random_tree(rng, 9)
    X = rng.integers(-50, 50, size=(3, 9)).astype(float)
    np.testing.assert_array_equal(to_kcs(X + np.array([[3.0], [-7.0], [11.0]]), build_c(sk)), to_kcs(X, build_c(sk)))


def test_to_kcs_dimension_error():
    C = build_c(Skeleton(3, [(0, 1), (1, 2)]))
    with pytest.raises(DimensionError):
        to_kcs(np.zeros((3, 4)), C)
    with pytest.raises(DimensionError):
        to_kcs(np.zeros((2, 3)), C)


def test_gram_examples():
    np.testing.assert_array_equal(gram(np.eye(3)[:, :2]), np.eye(2))
    assert np.trace(gram(np.eye(3)[:, :2])) == 2
    B = np.array([[2.0, 0], [0, 3], [0, 0]])
    np.testing.assert_array_equal(np.diag(gram(B)), [4, 9])


def test_gram_rank_and_trace(rng):
    for _ in range(20):
        B = rng.normal(size=(3, 8))
        s = np.linalg.svd(gram(B), compute_uv=False)
        assert np.all(s[3:] <= 1e-10 * s[0])
        np.testing.assert_allclose(np.trace(gram(B)), np.sum(bone_lengths(B) ** 2), rtol=1e-12)
        psi = gram(B)
        np.testing.assert_allclose(psi, psi.T)
        assert np.linalg.eigvalsh(psi).min() > -1e-10


def test_nuclear_norm_examples():
    assert nuclear_norm(np.diag([3.0, 1.0])) == pytest.approx(4.0, abs=1e-14)
    assert nuclear_norm(np.eye(3)[:, :2]) == pytest.approx(2.0, abs=1e-14)
    assert nuclear_norm(np.ones((2, 2))) == pytest.approx(2.0, abs=1e-14)


def test_nuclear_norm_is_trace_sqrt_gram(rng):
    from scipy.linalg import sqrtm

    B = rng.normal(size=(3, 7))
    assert nuclear_norm(B) == pytest.approx(np.trace(sqrtm(gram(B))).real, rel=1e-8)


def test_articulated_motion_keeps_trace_of_gram(rng):
    # fixed bone lengths pin trace(Psi) = sum of squared lengths, whatever the joint angles
    from kcs.synthetic import generate_motion, random_motion_spec
    from kcs.datasets import human15_mean_pose

    sk = human15_skeleton()
    poses = generate_motion(random_motion_spec(sk, human15_mean_pose(), 60, 1.2, seed=7))
    C = build_c(sk)
    traces = np.array([np.trace(gram(to_kcs(X, C))) for X in poses])
    np.testing.assert_allclose(traces, traces[0], rtol=1e-12)


def test_equal_lengths_do_not_fix_nuclear_norm():
    # two unit bones: parallel gives sqrt(2), orthogonal gives 2
    parallel = np.array([[1.0, 1.0], [0, 0], [0, 0]])
    orthogonal = np.eye(3)[:, :2]
    np.testing.assert_array_equal(bone_lengths(parallel), bone_lengths(orthogonal))
    assert nuclear_norm(parallel) == pytest.approx(np.sqrt(2), abs=1e-14)
    assert nuclear_norm(orthogonal) == pytest.approx(2.0, abs=1e-14)


def test_proposition1_under_global_rotation(rng):
    sk = random_tree(rng, 11)
    B = to_kcs(rng.normal(size=(3, 11)), build_c(sk))
    ref = nuclear_norm(B)
    for _ in range(10):
        assert nuclear_norm(random_rotation(rng) @ B) == pytest.approx(ref, rel=1e-9)


@pytest.mark.parametrize(
    "kwargs, msg",
    [
        (dict(num_joints=3, bones=[(0, 1), (1, 3)]), "outside"),
        (dict(num_joints=3, bones=[(0, 1), (1, 1)]), "self-loop"),
        (dict(num_joints=3, bones=[(0, 1)]), "needs 2 bones"),
        (dict(num_joints=4, bones=[(0, 1), (1, 0), (2, 3)]), "not reachable"),
        (dict(num_joints=2, bones=[(0, 1)], root=5), "root"),
        (dict(num_joints=2, bones=[(0, 1)], extra=[(0, 2)]), "outside"),
        (dict(num_joints=2, bones=[(0, 1)], names=["a", "a"]), "unique"),
    ],
)
def test_topology_errors(kwargs, msg):
    with pytest.raises(TopologyError, match=msg):
        Skeleton(**kwargs)


def test_from_parents():
    sk = Skeleton.from_parents([-1, 0, 1, 0], names=["a", "b", "c", "d"])
    assert sk.bones == ((0, 1), (1, 2), (0, 3))
    assert sk.num_bones == 3 and sk.joint_index("c") == 2
    with pytest.raises(TopologyError):
        Skeleton.from_parents([-1, -1])
