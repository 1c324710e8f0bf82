"""Text file formats.

Skeleton files (``.skel``) are line based::

    # comment
    format-version 1
    joint pelvis
    joint rhip
    root pelvis
    bone pelvis rhip
    rigid lwrist rwrist

Track and pose files are comma separated with a commented header::

    # kcs-tracks
    # format-version: 1
    # <key>: <json value>
    frame,joint,u,v
    0,pelvis,512.0,300.25

Pose files use ``# kcs-poses`` and columns ``frame,joint,x,y,z``.  Floats are
written with ``repr`` so that parsing a written file returns identical
values.  Every writer replaces its target atomically.
"""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import FormatError
from .kinematic_chain import Skeleton

__all__ = [
    "FORMAT_VERSION",
    "atomic_write_text",
    "read_skeleton",
    "write_skeleton",
    "format_skeleton",
    "read_tracks",
    "write_tracks",
    "read_poses",
    "write_poses",
    "parse_poses",
    "parse_skeleton",
    "read_json",
    "write_json",
]

FORMAT_VERSION = 1

_KINDS = {
    "kcs-tracks": ("u", "v"),
    "kcs-poses": ("x", "y", "z"),
}


def atomic_write_text(path, text):
    """Write ``text`` to a temporary sibling and rename it over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


# -- skeleton -----------------------------------------------------------------

def format_skeleton(skeleton):
    if skeleton.names is None:
        raise ValueError("skeleton needs joint names to be written")
    n = skeleton.names
    lines = ["# kcs skeleton", f"format-version {FORMAT_VERSION}"]
    lines += [f"joint {name}" for name in n]
    lines.append(f"root {n[skeleton.root]}")
    lines += [f"bone {n[r]} {n[t]}" for r, t in skeleton.bones]
    lines += [f"rigid {n[r]} {n[t]}" for r, t in skeleton.extra]
    return "\n".join(lines) + "\n"


def write_skeleton(path, skeleton):
    atomic_write_text(path, format_skeleton(skeleton))


def read_skeleton(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise FormatError(f"cannot read skeleton file: {exc.strerror}", path) from exc
    return parse_skeleton(text, path)


def parse_skeleton(text, path="<string>"):
    names, bones, extra = [], [], []
    index = {}
    root = None
    version = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, *args = line.split()
        if key == "format-version":
            if len(args) != 1 or not args[0].isdigit():
                raise FormatError("format-version takes one integer", path, lineno)
            version = int(args[0])
            if version != FORMAT_VERSION:
                raise FormatError(f"unsupported format-version {version}", path, lineno)
        elif key == "joint":
            if len(args) != 1:
                raise FormatError("joint takes exactly one name", path, lineno)
            if args[0] in index:
                raise FormatError(f"duplicate joint {args[0]!r}", path, lineno)
            index[args[0]] = len(names)
            names.append(args[0])
        elif key in ("bone", "rigid", "root"):
            want = 1 if key == "root" else 2
            if len(args) != want:
                raise FormatError(f"{key} takes {want} joint name(s)", path, lineno)
            unknown = [a for a in args if a not in index]
            if unknown:
                raise FormatError(f"unknown joint(s) {unknown} (declare joints first)", path, lineno)
            ids = tuple(index[a] for a in args)
            if key == "root":
                if root is not None:
                    raise FormatError("root declared twice", path, lineno)
                root = ids[0]
            elif ids[0] == ids[1]:
                raise FormatError(f"{key} connects {args[0]!r} to itself", path, lineno)
            else:
                (bones if key == "bone" else extra).append(ids)
        else:
            raise FormatError(f"unknown keyword {key!r}", path, lineno)
    if version is None:
        raise FormatError("missing format-version line", path)
    if not names:
        raise FormatError("no joints declared", path)
    if root is None:
        raise FormatError("missing root line", path)
    try:
        return Skeleton(len(names), tuple(bones), tuple(extra), root, tuple(names))
    except Exception as exc:
        raise FormatError(f"invalid topology: {exc}", path) from exc


# -- delimited frame/joint tables ------------------------------------------------

def _fmt(v):
    return repr(float(v))


def _format_table(kind, values, names, metadata):
    cols = _KINDS[kind]
    buf = io.StringIO()
    buf.write(f"# {kind}\n# format-version: {FORMAT_VERSION}\n")
    for key, val in (metadata or {}).items():
        key = str(key)
        if ":" in key or "\n" in key:
            raise ValueError(f"bad metadata key {key!r}")
        buf.write(f"# {key}: {json.dumps(val, sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("frame", "joint") + cols)
    for k, frame in enumerate(values):
        for i, name in enumerate(names):
            w.writerow([k, name] + [_fmt(frame[c, i]) for c in range(len(cols))])
    return buf.getvalue()


def _parse_table(kind, text, path, joint_names=None):
    cols = _KINDS[kind]
    lines = text.splitlines()
    meta = {}
    version = None
    start = 0
    if not lines or lines[0].strip() != f"# {kind}":
        raise FormatError(f"expected first line '# {kind}'", path, 1)
    for start in range(1, len(lines)):
        line = lines[start]
        if not line.startswith("#"):
            break
        body = line[1:].strip()
        if not body:
            continue
        if ":" not in body:
            raise FormatError("header comment must be 'key: value'", path, start + 1)
        key, val = (s.strip() for s in body.split(":", 1))
        if key == "format-version":
            try:
                version = int(val)
            except ValueError:
                raise FormatError(f"bad format-version {val!r}", path, start + 1) from None
            if version != FORMAT_VERSION:
                raise FormatError(f"unsupported format-version {version}", path, start + 1)
            continue
        try:
            meta[key] = json.loads(val)
        except json.JSONDecodeError:
            meta[key] = val
    else:
        start = len(lines)
    if version is None:
        raise FormatError("missing '# format-version' header", path)
    header_line = start + 1
    if start >= len(lines):
        raise FormatError("missing column header", path, header_line)
    header = [h.strip() for h in lines[start].split(",")]
    if header != ["frame", "joint", *cols]:
        raise FormatError(f"expected columns {['frame', 'joint', *cols]}, got {header}", path, header_line)

    records = {}
    seen_names = []
    max_frame = -1
    reader = csv.reader(lines[start + 1:])
    for offset, row in enumerate(reader):
        lineno = header_line + 1 + offset
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2 + len(cols):
            raise FormatError(f"expected {2 + len(cols)} fields, got {len(row)}", path, lineno)
        try:
            frame = int(row[0])
        except ValueError:
            raise FormatError(f"frame index {row[0]!r} is not an integer", path, lineno) from None
        if frame < 0:
            raise FormatError(f"negative frame index {frame}", path, lineno)
        name = row[1].strip()
        try:
            vals = [float(c) for c in row[2:]]
        except ValueError:
            raise FormatError(f"non-numeric coordinate in {row[2:]}", path, lineno) from None
        if not all(np.isfinite(vals)):
            raise FormatError("non-finite coordinate", path, lineno)
        if (frame, name) in records:
            raise FormatError(f"duplicate record for frame {frame}, joint {name!r}", path, lineno)
        records[(frame, name)] = vals
        if name not in seen_names:
            seen_names.append(name)
        max_frame = max(max_frame, frame)
    if not records:
        raise FormatError("no data records", path)

    if joint_names is None:
        names = seen_names
    else:
        names = list(joint_names)
        unknown = [n for n in seen_names if n not in names]
        missing = [n for n in names if n not in seen_names]
        if unknown or missing:
            parts = []
            if unknown:
                parts.append(f"names not in skeleton: {unknown}")
            if missing:
                parts.append(f"skeleton joints absent from file: {missing}")
            raise FormatError("joint-name mismatch; " + "; ".join(parts), path)
    f = max_frame + 1
    out = np.empty((f, len(cols), len(names)))
    for k in range(f):
        for i, name in enumerate(names):
            try:
                out[k, :, i] = records[(k, name)]
            except KeyError:
                raise FormatError(
                    f"dense format violated: no record for frame {k}, joint {name!r}", path
                ) from None
    return out, names, meta


def write_tracks(path, W, names, metadata=None):
    """Write a ``2f x j`` observation matrix (or ``(f, 2, j)`` array)."""
    W = np.asarray(W, dtype=float)
    frames = W.reshape(-1, 2, W.shape[-1]) if W.ndim == 2 else W
    atomic_write_text(path, _format_table("kcs-tracks", frames, names, metadata))


def read_tracks(path, joint_names=None):
    """Return ``(W, names, metadata)`` with ``W`` of shape ``(2f, j)``."""
    frames, names, meta = _parse_table("kcs-tracks", _read(path), path, joint_names)
    return frames.reshape(-1, frames.shape[-1]), names, meta


def write_poses(path, poses, names, metadata=None):
    """Write an ``(f, 3, j)`` pose sequence (a single ``3 x j`` pose is allowed)."""
    poses = np.asarray(poses, dtype=float)
    if poses.ndim == 2:
        poses = poses[None]
    atomic_write_text(path, _format_table("kcs-poses", poses, names, metadata))


def read_poses(path, joint_names=None):
    """Return ``(poses, names, metadata)`` with poses of shape ``(f, 3, j)``."""
    return parse_poses(_read(path), path, joint_names)


def parse_poses(text, path="<string>", joint_names=None):
    return _parse_table("kcs-poses", text, path, joint_names)


def _read(path):
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise FormatError(f"cannot read file: {exc.strerror}", path) from exc


def write_json(path, obj):
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path):
    try:
        return json.loads(_read(path))
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc.msg}", path, exc.lineno) from exc
