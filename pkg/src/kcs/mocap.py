"""CMU ASF/AMC motion capture reader and mapping onto the 15-joint skeleton.

Joint mapping (our joint <- position in the CMU skeleton):

=========== ==========================
pelvis      root position
rhip        end of ``rhipjoint``
rknee       end of ``rfemur``
rankle      end of ``rtibia``
lhip        end of ``lhipjoint``
lknee       end of ``lfemur``
lankle      end of ``ltibia``
thorax      end of ``thorax``
head        end of ``head``
lshoulder   end of ``lclavicle``
lelbow      end of ``lhumerus``
lwrist      end of ``lradius``
rshoulder   end of ``rclavicle``
relbow      end of ``rhumerus``
rwrist      end of ``rradius``
=========== ==========================

CMU files store lengths in units of ``(1 / length) inches`` where
``length`` comes from the ``:units`` section (0.45 for the CMU database);
positions are converted to millimetres.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError

__all__ = [
    "CMU_JOINT_MAP",
    "AsfBone",
    "AsfSkeleton",
    "read_asf",
    "read_amc",
    "forward_kinematics",
    "to_human15",
]

CMU_JOINT_MAP = {
    "pelvis": "root",
    "rhip": "rhipjoint",
    "rknee": "rfemur",
    "rankle": "rtibia",
    "lhip": "lhipjoint",
    "lknee": "lfemur",
    "lankle": "ltibia",
    "thorax": "thorax",
    "head": "head",
    "lshoulder": "lclavicle",
    "lelbow": "lhumerus",
    "lwrist": "lradius",
    "rshoulder": "rclavicle",
    "relbow": "rhumerus",
    "rwrist": "rradius",
}

_INCH_MM = 25.4


def _euler_xyz(deg):
    """Rotation ``Rz @ Ry @ Rx`` from degrees ``(x, y, z)``."""
    x, y, z = np.deg2rad(deg)
    cx, sx, cy, sy, cz, sz = np.cos(x), np.sin(x), np.cos(y), np.sin(y), np.cos(z), np.sin(z)
    Rx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    Ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    Rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    return Rz @ Ry @ Rx


@dataclass
class AsfBone:
    name: str
    direction: np.ndarray
    length: float
    axis: np.ndarray
    dof: tuple = ()
    children: list = field(default_factory=list)

    def __post_init__(self):
        self.C = _euler_xyz(self.axis)
        self.C_inv = self.C.T


@dataclass
class AsfSkeleton:
    bones: dict
    root_order: tuple
    root_axis: np.ndarray
    root_children: list
    length_unit: float = 1.0

    @property
    def to_mm(self):
        return _INCH_MM / self.length_unit


def read_asf(path):
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise FormatError(f"cannot read ASF file: {exc.strerror}", path) from exc
    bones = {}
    root_order = ("TX", "TY", "TZ", "RX", "RY", "RZ")
    root_axis = np.zeros(3)
    length_unit = 1.0
    root_children = []
    section = None
    cur = None
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith(":"):
            section = line.split()[0]
            continue
        tok = line.split()
        try:
            if section == ":units" and tok[0] == "length":
                length_unit = float(tok[1])
            elif section == ":root":
                if tok[0] == "order":
                    root_order = tuple(t.upper() for t in tok[1:])
                elif tok[0] == "axis":
                    if tok[1].upper() != "XYZ":
                        raise FormatError(f"unsupported root axis order {tok[1]}", path, lineno)
                elif tok[0] == "orientation":
                    root_axis = np.array([float(v) for v in tok[1:4]])
            elif section == ":bonedata":
                if tok[0] == "begin":
                    cur = {"dof": ()}
                elif tok[0] == "end":
                    if "name" not in cur:
                        raise FormatError("bone without name", path, lineno)
                    d = np.asarray(cur.get("direction", np.zeros(3)))
                    n = np.linalg.norm(d)
                    bones[cur["name"]] = AsfBone(
                        cur["name"],
                        d / n if n > 0 else d,
                        cur.get("length", 0.0),
                        np.asarray(cur.get("axis", np.zeros(3))),
                        cur["dof"],
                    )
                    cur = None
                elif cur is not None:
                    if tok[0] == "name":
                        cur["name"] = tok[1]
                    elif tok[0] == "direction":
                        cur["direction"] = np.array([float(v) for v in tok[1:4]])
                    elif tok[0] == "length":
                        cur["length"] = float(tok[1])
                    elif tok[0] == "axis":
                        if len(tok) > 4 and tok[4].upper() != "XYZ":
                            raise FormatError(f"unsupported axis order {tok[4]}", path, lineno)
                        cur["axis"] = np.array([float(v) for v in tok[1:4]])
                    elif tok[0] == "dof":
                        cur["dof"] = tuple(t.lower() for t in tok[1:])
            elif section == ":hierarchy":
                if tok[0] in ("begin", "end"):
                    continue
                parent = tok[0]
                if parent != "root" and parent not in bones:
                    raise FormatError(f"hierarchy names unknown bone {parent!r}", path, lineno)
                for child in tok[1:]:
                    if child not in bones:
                        raise FormatError(f"hierarchy names unknown bone {child!r}", path, lineno)
                (root_children if parent == "root" else bones[parent].children).extend(tok[1:])
        except FormatError:
            raise
        except (ValueError, IndexError, TypeError):
            raise FormatError(f"malformed line {line!r}", path, lineno) from None
    if not bones:
        raise FormatError("no bone data", path)
    return AsfSkeleton(bones, root_order, root_axis, root_children, length_unit)


def read_amc(path):
    """Return a list of ``{bone: values}`` dicts, one per frame."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise FormatError(f"cannot read AMC file: {exc.strerror}", path) from exc
    frames = []
    cur = None
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith(":"):
            continue
        tok = line.split()
        if len(tok) == 1 and tok[0].isdigit():
            cur = {}
            frames.append(cur)
            continue
        if cur is None:
            raise FormatError("bone values before the first frame number", path, lineno)
        try:
            cur[tok[0]] = np.array([float(v) for v in tok[1:]])
        except ValueError:
            raise FormatError(f"non-numeric values for {tok[0]!r}", path, lineno) from None
    if not frames:
        raise FormatError("no frames", path)
    return frames


def forward_kinematics(asf, frame):
    """Bone end positions (ASF units) for one AMC frame, plus ``'root'``."""
    rv = frame.get("root", np.zeros(6))
    vals = dict(zip(asf.root_order, rv))
    pos = np.array([vals.get("TX", 0.0), vals.get("TY", 0.0), vals.get("TZ", 0.0)])
    rot = _euler_xyz([vals.get("RX", 0.0), vals.get("RY", 0.0), vals.get("RZ", 0.0)])
    C_root = _euler_xyz(asf.root_axis)
    out = {"root": pos}
    stack = [(child, C_root @ rot @ C_root.T, pos) for child in asf.root_children]
    while stack:
        name, parent_rot, parent_pos = stack.pop()
        bone = asf.bones[name]
        angles = np.zeros(3)
        motion = frame.get(name)
        if motion is not None:
            for d, v in zip(bone.dof, motion):
                angles["xyz".index(d[1])] = v
        R = parent_rot @ bone.C @ _euler_xyz(angles) @ bone.C_inv
        end = parent_pos + bone.length * (R @ bone.direction)
        out[name] = end
        stack.extend((c, R, end) for c in bone.children)
    return out


def to_human15(asf, frames, names, every=1):
    """Map AMC frames to ``(f, 3, 15)`` joint positions in millimetres."""
    missing = [CMU_JOINT_MAP[n] for n in names if CMU_JOINT_MAP[n] not in asf.bones and CMU_JOINT_MAP[n] != "root"]
    if missing:
        raise FormatError(f"ASF skeleton lacks bones {missing}")
    out = []
    for frame in frames[::every]:
        ends = forward_kinematics(asf, frame)
        out.append(np.stack([ends[CMU_JOINT_MAP[n]] for n in names], axis=1))
    return np.asarray(out) * asf.to_mm
