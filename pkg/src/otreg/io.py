"""Point-cloud and transform file I/O.

Formats are selected by extension:
  .xyz  whitespace-separated x y z per line
  .off  OFF header; only vertices are read, faces are ignored
  .ply  ASCII PLY; only the vertex element's x/y/z properties are read

Transforms are JSON: {"rotation": [9 numbers row-major],
"translation": [3 numbers]}.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .geometry import PointCloud, RigidTransform


class CloudFormatError(ValueError):
    pass


def _parse_triple(fields: list[str], path, lineno: int) -> list[float]:
    if len(fields) < 3:
        raise CloudFormatError(f"{path}:{lineno}: expected 3 coordinates")
    try:
        return [float(v) for v in fields[:3]]
    except ValueError as exc:
        raise CloudFormatError(f"{path}:{lineno}: bad coordinate value") from exc


def _load_xyz(path: Path) -> np.ndarray:
    pts = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            fields = line.split()
            if not fields or fields[0].startswith("#"):
                continue
            pts.append(_parse_triple(fields, path, lineno))
    return np.asarray(pts, dtype=np.float64).reshape(len(pts), 3)


def _load_off(path: Path) -> np.ndarray:
    with open(path) as fh:
        lines = fh.readlines()
    rows = [(i + 1, ln.split()) for i, ln in enumerate(lines)
            if ln.split() and not ln.lstrip().startswith("#")]
    if not rows:
        raise CloudFormatError(f"{path}:1: empty OFF file")
    lineno, first = rows[0]
    if not first[0].upper().startswith("OFF"):
        raise CloudFormatError(f"{path}:{lineno}: missing OFF header")
    # counts may share the header line ("OFF 8 6 12") or follow it
    if len(first) >= 4:
        counts = first[1:4]
        body = rows[1:]
    else:
        if len(rows) < 2:
            raise CloudFormatError(f"{path}:{lineno}: missing vertex counts")
        lineno, counts = rows[1]
        body = rows[2:]
    try:
        n_vertices = int(counts[0])
    except (ValueError, IndexError) as exc:
        raise CloudFormatError(f"{path}:{lineno}: bad vertex count") from exc
    if len(body) < n_vertices:
        raise CloudFormatError(f"{path}: expected {n_vertices} vertices, "
                               f"found {len(body)}")
    pts = [_parse_triple(fields, path, ln) for ln, fields in body[:n_vertices]]
    return np.asarray(pts, dtype=np.float64).reshape(n_vertices, 3)


def _load_ply(path: Path) -> np.ndarray:
    with open(path) as fh:
        lines = fh.readlines()
    if not lines or lines[0].strip() != "ply":
        raise CloudFormatError(f"{path}:1: not a PLY file")
    n_vertices = None
    props: list[str] = []
    in_vertex_element = False
    body_start = None
    for i, raw in enumerate(lines[1:], start=2):
        fields = raw.split()
        if not fields:
            continue
        if fields[0] == "format":
            if fields[1] != "ascii":
                raise CloudFormatError(f"{path}:{i}: only ascii PLY is supported")
        elif fields[0] == "element":
            in_vertex_element = fields[1] == "vertex"
            if in_vertex_element:
                n_vertices = int(fields[2])
        elif fields[0] == "property" and in_vertex_element:
            props.append(fields[-1])
        elif fields[0] == "end_header":
            body_start = i
            break
    if body_start is None or n_vertices is None:
        raise CloudFormatError(f"{path}: incomplete PLY header")
    try:
        cols = [props.index(axis) for axis in ("x", "y", "z")]
    except ValueError as exc:
        raise CloudFormatError(f"{path}: vertex element lacks x/y/z") from exc

    pts = []
    lineno = body_start
    for raw in lines[body_start:]:
        lineno += 1
        fields = raw.split()
        if not fields:
            continue
        if len(fields) < len(props):
            raise CloudFormatError(f"{path}:{lineno}: short vertex row")
        try:
            pts.append([float(fields[c]) for c in cols])
        except ValueError as exc:
            raise CloudFormatError(f"{path}:{lineno}: bad coordinate value") from exc
        if len(pts) == n_vertices:
            break
    if len(pts) != n_vertices:
        raise CloudFormatError(f"{path}: expected {n_vertices} vertices, "
                               f"found {len(pts)}")
    return np.asarray(pts, dtype=np.float64).reshape(n_vertices, 3)


def load_cloud(path) -> PointCloud:
    path = Path(path)
    ext = path.suffix.lower()
    if ext == ".xyz":
        return PointCloud(_load_xyz(path))
    if ext == ".off":
        return PointCloud(_load_off(path))
    if ext == ".ply":
        return PointCloud(_load_ply(path))
    raise CloudFormatError(f"{path}: unsupported extension '{ext}' "
                           "(expected .xyz, .off or .ply)")


def save_cloud(pc: PointCloud, path) -> None:
    """Write .xyz with 9 significant digits, order preserved."""
    path = Path(path)
    with open(path, "w") as fh:
        for x, y, z in pc.points:
            fh.write(f"{x:.9g} {y:.9g} {z:.9g}\n")


def save_transform(t: RigidTransform, path) -> None:
    with open(Path(path), "w") as fh:
        json.dump({"rotation": t.rotation.reshape(-1).tolist(),
                   "translation": t.translation.tolist()}, fh, indent=2)


def load_transform(path) -> RigidTransform:
    with open(Path(path)) as fh:
        data = json.load(fh)
    rot = np.asarray(data["rotation"], dtype=np.float64).reshape(3, 3)
    trans = np.asarray(data["translation"], dtype=np.float64).reshape(3)
    return RigidTransform(rot, trans)
