"""Readers and writers for ASCII PLY and whitespace ``x y z r g b [label]`` text."""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from ..errors import EmptyCloud, MissingProperty, ParseError
from .cloud import PointCloud

PLY_ASCII = "ply-ascii"
XYZRGB_TEXT = "xyzrgb-text"
FORMATS = (PLY_ASCII, XYZRGB_TEXT)

_REAL_TYPES = {"float", "float32", "double", "float64"}
_INT_TYPES = {"char", "uchar", "int8", "uint8", "short", "ushort", "int16", "uint16",
              "int", "uint", "int32", "uint32"}


def guess_format(path) -> str:
    return PLY_ASCII if str(path).lower().endswith(".ply") else XYZRGB_TEXT


def origin_sidecar(path) -> Path:
    return Path(path).with_suffix(".origin")


def _fmt(x: float) -> str:
    return repr(float(x))


def load_point_cloud(path, format: str | None = None) -> PointCloud:
    fmt = format or guess_format(path)
    if fmt == PLY_ASCII:
        return _load_ply(path)
    if fmt == XYZRGB_TEXT:
        return _load_xyzrgb(path)
    raise ValueError(f"unknown point cloud format {fmt!r}")


def save_point_cloud(cloud: PointCloud, path, format: str | None = None) -> None:
    if len(cloud) == 0:
        raise EmptyCloud("refusing to write an empty cloud")
    fmt = format or guess_format(path)
    if fmt == PLY_ASCII:
        _save_ply(cloud, path)
    elif fmt == XYZRGB_TEXT:
        _save_xyzrgb(cloud, path)
    else:
        raise ValueError(f"unknown point cloud format {fmt!r}")


def _parse_rows(lines, ncols: int, where: str) -> np.ndarray:
    rows = []
    for lineno, line in lines:
        parts = line.split()
        if len(parts) != ncols:
            raise ParseError(f"{where}:{lineno}: expected {ncols} values, got {len(parts)}")
        rows.append(parts)
    try:
        return np.array(rows, dtype=np.float64).reshape(-1, ncols)
    except ValueError as exc:
        raise ParseError(f"{where}: non-numeric value ({exc})") from None


def _parse_origin(fields, where: str):
    if len(fields) != 4:
        raise ParseError(f"{where}: geo origin needs 'x y z crs_tag'")
    try:
        origin = np.array([float(v) for v in fields[:3]])
    except ValueError:
        raise ParseError(f"{where}: geo origin is not numeric") from None
    return origin, fields[3]


def _build(values: np.ndarray, names: list, where: str) -> PointCloud:
    col = {n: i for i, n in enumerate(names)}
    for req in ("x", "y", "z"):
        if req not in col:
            raise MissingProperty(f"{where}: no '{req}' property")
    for req in ("red", "green", "blue"):
        if req not in col:
            raise MissingProperty(f"{where}: no color property '{req}'")
    if len(values) == 0:
        raise EmptyCloud(f"{where}: zero vertices")
    xyz = values[:, [col["x"], col["y"], col["z"]]]
    rgb = values[:, [col["red"], col["green"], col["blue"]]]
    if not np.isfinite(xyz).all():
        raise ParseError(f"{where}: non-finite coordinate")
    if (rgb < 0).any() or (rgb > 255).any() or (rgb != np.round(rgb)).any():
        raise ParseError(f"{where}: color outside 0..255")
    labels = None
    if "label" in col:
        labels = values[:, col["label"]]
        if (labels != np.round(labels)).any() or (labels < 0).any() or (labels > 3).any():
            raise ParseError(f"{where}: invalid class label code")
        labels = labels.astype(np.uint8)
    return PointCloud(xyz, rgb.astype(np.uint8), labels)


def _load_ply(path) -> PointCloud:
    where = os.fspath(path)
    with open(path, "r", encoding="ascii", errors="replace") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != "ply":
        raise ParseError(f"{where}: missing 'ply' magic")
    names: list = []
    n_vertex = None
    in_vertex = False
    origin, crs = np.zeros(3), "local"
    fmt_ok = False
    end = None
    for i, line in enumerate(lines[1:], start=1):
        parts = line.split()
        if not parts:
            continue
        key = parts[0]
        if key == "format":
            if parts[1:3] != ["ascii", "1.0"]:
                raise ParseError(f"{where}: only 'format ascii 1.0' is supported")
            fmt_ok = True
        elif key == "comment":
            if len(parts) > 1 and parts[1] == "geo_origin":
                origin, crs = _parse_origin(parts[2:], where)
        elif key == "element":
            if len(parts) != 3:
                raise ParseError(f"{where}:{i + 1}: malformed element line")
            in_vertex = parts[1] == "vertex"
            if in_vertex:
                try:
                    n_vertex = int(parts[2])
                except ValueError:
                    raise ParseError(f"{where}:{i + 1}: bad vertex count") from None
            elif n_vertex is None:
                raise ParseError(f"{where}: elements before 'vertex' are not supported")
        elif key == "property":
            if in_vertex:
                if len(parts) != 3 or parts[1] == "list":
                    raise ParseError(f"{where}:{i + 1}: unsupported vertex property")
                if parts[1] not in _REAL_TYPES | _INT_TYPES:
                    raise ParseError(f"{where}:{i + 1}: unknown type {parts[1]!r}")
                names.append(parts[2])
        elif key == "end_header":
            end = i
            break
        elif key != "obj_info":
            raise ParseError(f"{where}:{i + 1}: unexpected header line")
    if end is None or not fmt_ok or n_vertex is None:
        raise ParseError(f"{where}: incomplete header")
    body = [(j + 1, ln) for j, ln in enumerate(lines[end + 1:], start=end + 1) if ln.strip()]
    if len(body) < n_vertex:
        raise ParseError(f"{where}: expected {n_vertex} vertices, found {len(body)}")
    values = _parse_rows(body[:n_vertex], len(names), where)
    cloud = _build(values, names, where)
    cloud.geo_origin, cloud.crs_tag = origin, crs
    return cloud


def _save_ply(cloud: PointCloud, path) -> None:
    header = [
        "ply",
        "format ascii 1.0",
        "comment geo_origin " + " ".join(_fmt(v) for v in cloud.geo_origin) + f" {cloud.crs_tag}",
        f"element vertex {len(cloud)}",
        "property double x",
        "property double y",
        "property double z",
        "property uchar red",
        "property uchar green",
        "property uchar blue",
    ]
    if cloud.labels is not None:
        header.append("property uchar label")
    header.append("end_header")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(header) + "\n")
        fh.writelines(_rows(cloud))


def _rows(cloud: PointCloud):
    xyz = cloud.xyz.tolist()
    rgb = cloud.rgb.tolist()
    if cloud.labels is None:
        for (x, y, z), (r, g, b) in zip(xyz, rgb):
            yield f"{x!r} {y!r} {z!r} {r} {g} {b}\n"
    else:
        for (x, y, z), (r, g, b), lab in zip(xyz, rgb, cloud.labels.tolist()):
            yield f"{x!r} {y!r} {z!r} {r} {g} {b} {lab}\n"


def _load_xyzrgb(path) -> PointCloud:
    where = os.fspath(path)
    with open(path, "r", encoding="ascii", errors="replace") as fh:
        body = [(i + 1, ln) for i, ln in enumerate(fh.read().splitlines())
                if ln.strip() and not ln.lstrip().startswith("#")]
    if not body:
        raise EmptyCloud(f"{where}: zero vertices")
    ncols = len(body[0][1].split())
    if ncols < 6:
        raise MissingProperty(f"{where}: rows need at least 'x y z r g b'")
    if ncols > 7:
        raise ParseError(f"{where}: too many columns ({ncols})")
    values = _parse_rows(body, ncols, where)
    names = ["x", "y", "z", "red", "green", "blue", "label"][:ncols]
    cloud = _build(values, names, where)
    sidecar = origin_sidecar(path)
    if sidecar.exists():
        fields = sidecar.read_text(encoding="ascii").split()
        cloud.geo_origin, cloud.crs_tag = _parse_origin(fields, os.fspath(sidecar))
    return cloud


def _save_xyzrgb(cloud: PointCloud, path) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.writelines(_rows(cloud))
    if cloud.crs_tag != "local" or np.any(cloud.geo_origin != 0):
        origin = " ".join(_fmt(v) for v in cloud.geo_origin)
        origin_sidecar(path).write_text(f"{origin} {cloud.crs_tag}\n", encoding="ascii")
