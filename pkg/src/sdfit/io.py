"""File formats: correspondences, label files, images, label maps and result JSON."""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import InvalidArgument
from .geometry import CorrespondenceSet


def _lines(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if line and not line.startswith("#"):
                yield lineno, line


def read_correspondences(path) -> CorrespondenceSet:
    """Parse ``x1 y1 x2 y2 score [gt_label]`` lines.

    Ground truth is kept only when every line carries a label.
    """
    rows, labels = [], []
    for lineno, line in _lines(path):
        parts = line.split()
        if len(parts) not in (5, 6):
            raise InvalidArgument(f"{path}:{lineno}: expected 5 or 6 fields, got {len(parts)}")
        try:
            rows.append([float(v) for v in parts[:5]])
            labels.append(int(parts[5]) if len(parts) == 6 else None)
        except ValueError as exc:
            raise InvalidArgument(f"{path}:{lineno}: {exc}") from None
    arr = np.array(rows, dtype=np.float64).reshape(-1, 5)
    gt = None
    if labels and all(g is not None for g in labels):
        gt = np.array(labels, dtype=np.int64)
    return CorrespondenceSet(arr[:, 0:2], arr[:, 2:4], arr[:, 4], gt)


def write_correspondences(path, data: CorrespondenceSet, header: str | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if header:
            for line in header.splitlines():
                fh.write(f"# {line}\n")
        fh.write("# x1 y1 x2 y2 score" + (" gt_label" if data.gt is not None else "") + "\n")
        for j in range(len(data)):
            vals = [*data.x1[j], *data.x2[j], data.scores[j]]
            line = " ".join(format_float(v) for v in vals)
            if data.gt is not None:
                line += f" {int(data.gt[j])}"
            fh.write(line + "\n")


def read_labels(path) -> np.ndarray:
    return np.array([int(line) for _, line in _lines(path)], dtype=np.int64)


def write_labels(path, labels) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for v in np.asarray(labels).reshape(-1):
            fh.write(f"{int(v)}\n")


def read_image(path) -> np.ndarray:
    """Load a PPM or PNG file as an (H, W, 3) uint8 array."""
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()


def write_image(path, image) -> None:
    Image.fromarray(np.asarray(image, dtype=np.uint8), "RGB").save(path)


def _read_pgm16(path) -> np.ndarray:
    data = Path(path).read_bytes()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        start = pos
        while not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    if tokens[0] != b"P5":
        raise InvalidArgument(f"{path}: not a binary PGM")
    w, h, maxval = (int(t) for t in tokens[1:])
    pos += 1
    dtype = ">u2" if maxval > 255 else "u1"
    arr = np.frombuffer(data, dtype=dtype, count=w * h, offset=pos)
    return arr.reshape(h, w).astype(np.int64)


def write_pgm16(path, labels) -> None:
    lab = np.asarray(labels)
    if lab.min() < 0 or lab.max() > 65535:
        raise InvalidArgument("label values must fit in 16 bits")
    h, w = lab.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        fh.write(lab.astype(">u2").tobytes())


def read_label_map(path) -> np.ndarray:
    """Read a precomputed superpixel map from CSV or 16-bit PGM."""
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        return _read_pgm16(path)
    arr = np.loadtxt(path, delimiter=",", dtype=np.int64, comments="#", ndmin=2)
    return arr


def write_label_map(path, labels) -> None:
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        write_pgm16(path, labels)
        return
    np.savetxt(path, np.asarray(labels, dtype=np.int64), fmt="%d", delimiter=",")


def format_float(x: float) -> str:
    x = float(x)
    if math.isnan(x) or math.isinf(x):
        raise InvalidArgument("cannot serialize non-finite float")
    s = format(x, ".17g")
    if not any(ch in s for ch in ".en"):
        s += ".0"
    return s


def _emit(obj, out: list) -> None:
    if isinstance(obj, dict):
        out.append("{")
        for i, key in enumerate(sorted(obj)):
            if i:
                out.append(",")
            out.append(json.dumps(str(key)) + ":")
            _emit(obj[key], out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, v in enumerate(obj):
            if i:
                out.append(",")
            _emit(v, out)
        out.append("]")
    elif isinstance(obj, (bool, np.bool_)) or obj is None:
        out.append(json.dumps(None if obj is None else bool(obj)))
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(format_float(obj))
    elif isinstance(obj, np.ndarray):
        _emit(obj.tolist(), out)
    else:
        out.append(json.dumps(str(obj)))


def dumps_stable(obj) -> str:
    """JSON with sorted keys, no whitespace and 17-significant-digit floats."""
    out: list = []
    _emit(obj, out)
    return "".join(out) + "\n"
