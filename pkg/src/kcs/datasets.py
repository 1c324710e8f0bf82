"""Bundled skeleton and mean pose."""
from __future__ import annotations

from importlib import resources

from .io import parse_poses, parse_skeleton
from .kinematic_chain import Skeleton

__all__ = ["human15_skeleton", "human15_mean_pose", "data_path"]


def data_path(name):
    return resources.files("kcs") / "data" / name


def human15_skeleton(hand_link=False):
    """15-joint human tree rooted at the pelvis.

    With ``hand_link=True`` a rigid wrist-to-wrist edge is added, as for a
    person holding an object with both hands.
    """
    p = data_path("human15.skel")
    sk = parse_skeleton(p.read_text(), str(p))
    if hand_link:
        sk = Skeleton(
            sk.num_joints,
            sk.bones,
            ((sk.joint_index("lwrist"), sk.joint_index("rwrist")),),
            sk.root,
            sk.names,
        )
    return sk


def human15_mean_pose():
    """Neutral standing pose (``3 x 15``), y up, z forward, mean bone length 1."""
    p = data_path("human15_mean.csv")
    poses, _, _ = parse_poses(p.read_text(), str(p), human15_skeleton().names)
    return poses[0]
