"""ASCII PCD (v0.7) reader and writer.

Only ``DATA ascii`` is supported.  Fields other than x, y and z are parsed for
arity but dropped from the returned cloud.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

HEADER_KEYS = ("VERSION", "FIELDS", "SIZE", "TYPE", "COUNT", "WIDTH", "HEIGHT",
               "VIEWPOINT", "POINTS", "DATA")
_REQUIRED = ("FIELDS", "WIDTH", "POINTS", "DATA")


class PcdError(ValueError):
    """Base class for PCD parse failures; ``line`` is 1-based or None."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MalformedHeader(PcdError):
    pass


class UnsupportedEncoding(PcdError):
    pass


class MalformedRecord(PcdError):
    pass


@dataclass(frozen=True)
class PcdHeader:
    version: str
    fields: tuple[str, ...]
    sizes: tuple[int, ...]
    types: tuple[str, ...]
    counts: tuple[int, ...]
    width: int
    height: int
    points: int
    viewpoint: tuple[float, ...] = (0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0)
    data_mode: str = "ascii"

    @property
    def values_per_point(self) -> int:
        return sum(self.counts)


def _decode(data) -> str:
    if isinstance(data, (bytes, bytearray, memoryview)):
        return bytes(data).decode("ascii", errors="strict")
    return data


def _ints(tokens, key, lineno):
    try:
        values = tuple(int(t) for t in tokens)
    except ValueError:
        raise MalformedHeader(f"{key} expects integers, got {' '.join(tokens)!r}", lineno) from None
    if any(v < 0 for v in values):
        raise MalformedHeader(f"{key} values must be nonnegative", lineno)
    return values


def _build_header(raw: dict, lines: dict) -> PcdHeader:
    for key in _REQUIRED:
        if key not in raw:
            raise MalformedHeader(f"missing {key} header entry", lines.get("DATA"))
    fields = tuple(raw["FIELDS"])
    nf = len(fields)
    if len(set(fields)) != nf:
        raise MalformedHeader("duplicate field name", lines["FIELDS"])
    sizes = _ints(raw.get("SIZE", ["4"] * nf), "SIZE", lines.get("SIZE"))
    types = tuple(raw.get("TYPE", ["F"] * nf))
    counts = _ints(raw.get("COUNT", ["1"] * nf), "COUNT", lines.get("COUNT"))
    for key, seq in (("SIZE", sizes), ("TYPE", types), ("COUNT", counts)):
        if len(seq) != nf:
            raise MalformedHeader(f"{key} has {len(seq)} entries for {nf} fields", lines.get(key))
    for axis in "xyz":
        if axis not in fields:
            raise MalformedHeader(f"field {axis!r} missing", lines["FIELDS"])
        k = fields.index(axis)
        if types[k] != "F" or sizes[k] not in (4, 8) or counts[k] != 1:
            raise MalformedHeader(f"field {axis!r} must be a 4- or 8-byte float", lines["FIELDS"])

    (width,) = _ints(raw["WIDTH"][:1], "WIDTH", lines["WIDTH"]) if raw["WIDTH"] else (None,)
    height_tokens = raw.get("HEIGHT", ["1"])
    (height,) = _ints(height_tokens[:1], "HEIGHT", lines.get("HEIGHT")) if height_tokens else (None,)
    (points,) = _ints(raw["POINTS"][:1], "POINTS", lines["POINTS"]) if raw["POINTS"] else (None,)
    if width is None or height is None or points is None:
        raise MalformedHeader("WIDTH/HEIGHT/POINTS need a value", lines.get("POINTS"))
    if width * height != points:
        raise MalformedHeader(f"WIDTH*HEIGHT = {width * height} but POINTS = {points}",
                              lines["POINTS"])

    viewpoint = (0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0)
    if "VIEWPOINT" in raw:
        try:
            viewpoint = tuple(float(t) for t in raw["VIEWPOINT"])
        except ValueError:
            raise MalformedHeader("VIEWPOINT expects numbers", lines["VIEWPOINT"]) from None
        if len(viewpoint) != 7:
            raise MalformedHeader("VIEWPOINT expects 7 numbers", lines["VIEWPOINT"])

    data_mode = " ".join(raw["DATA"]).lower()
    if data_mode in ("binary", "binary_compressed"):
        raise UnsupportedEncoding(f"DATA {data_mode} is not supported", lines["DATA"])
    if data_mode != "ascii":
        raise MalformedHeader(f"unknown DATA mode {data_mode!r}", lines["DATA"])

    return PcdHeader(
        version=" ".join(raw.get("VERSION", ["0.7"])),
        fields=fields, sizes=sizes, types=types, counts=counts,
        width=width, height=height, points=points, viewpoint=viewpoint,
        data_mode="ascii",
    )


def parse_pcd(data) -> tuple[PcdHeader, np.ndarray]:
    """Parse an ASCII PCD document given as bytes or str.

    Returns the header and an ``(N, 3)`` float64 array in file order.
    """
    text = _decode(data)
    lines = text.splitlines()
    raw: dict[str, list[str]] = {}
    where: dict[str, int] = {}
    body_start = None
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, *tokens = stripped.split()
        key = key.upper()
        if key not in HEADER_KEYS:
            raise MalformedHeader(f"unexpected header entry {key!r}", lineno)
        if key in raw:
            raise MalformedHeader(f"duplicate {key} header entry", lineno)
        raw[key] = tokens
        where[key] = lineno
        if key == "DATA":
            body_start = lineno
            break
    if body_start is None:
        raise MalformedHeader("header has no DATA entry", len(lines) or None)

    header = _build_header(raw, where)
    nvals = header.values_per_point
    offsets = np.cumsum((0,) + header.counts)
    cols = [int(offsets[header.fields.index(a)]) for a in "xyz"]

    out = np.empty((header.points, 3), dtype=np.float64)
    n = 0
    for lineno in range(body_start + 1, len(lines) + 1):
        tokens = lines[lineno - 1].split()
        if not tokens:
            continue
        if n == header.points:
            raise MalformedRecord(f"more records than POINTS = {header.points}", lineno)
        if len(tokens) != nvals:
            raise MalformedRecord(f"expected {nvals} values, got {len(tokens)}", lineno)
        for j, c in enumerate(cols):
            try:
                v = float(tokens[c])
            except ValueError:
                raise MalformedRecord(f"non-numeric token {tokens[c]!r}", lineno) from None
            if not math.isfinite(v):
                raise MalformedRecord(f"non-finite coordinate {tokens[c]!r}", lineno)
            out[n, j] = v
        # non-xyz fields still have to be numbers
        for t in tokens:
            try:
                float(t)
            except ValueError:
                raise MalformedRecord(f"non-numeric token {t!r}", lineno) from None
        n += 1
    if n != header.points:
        raise MalformedRecord(f"expected {header.points} records, found {n}", len(lines))
    return header, out


def write_pcd(cloud) -> bytes:
    """Serialize ``cloud`` as PCD v0.7 ASCII with float32 x/y/z fields."""
    pts = np.asarray(cloud, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] == 0:
        raise ValueError("write_pcd needs a nonempty (N, 3) cloud")
    n = pts.shape[0]
    head = (
        "VERSION 0.7\n"
        "FIELDS x y z\n"
        "SIZE 4 4 4\n"
        "TYPE F F F\n"
        "COUNT 1 1 1\n"
        f"WIDTH {n}\n"
        "HEIGHT 1\n"
        "VIEWPOINT 0 0 0 1 0 0 0\n"
        f"POINTS {n}\n"
        "DATA ascii\n"
    )
    body = "".join(f"{x:.9g} {y:.9g} {z:.9g}\n" for x, y, z in pts.tolist())
    return (head + body).encode("ascii")


def read_pcd(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as fh:
        return parse_pcd(fh.read())[1]


def save_pcd(path: str | os.PathLike, cloud) -> None:
    data = write_pcd(cloud)
    with open(path, "wb") as fh:
        fh.write(data)
