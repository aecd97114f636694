"""Artifact readers and writers: 8-bit graymaps (binary PGM), CSV tables
and JSON documents. Every writer has a matching reader."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .array import BeamPattern


def write_pgm(path, image: np.ndarray, lo: float, hi: float) -> None:
    """Write ``image`` (rows top to bottom) as a binary 8-bit PGM, mapping
    ``[lo, hi]`` linearly onto 0..255 with clipping; NaN maps to 0."""
    img = np.asarray(image, float)
    if img.ndim != 2:
        raise ValueError("image must be 2-D")
    if not hi > lo:
        raise ValueError("need hi > lo")
    scaled = np.clip((np.nan_to_num(img, nan=lo) - lo) / (hi - lo), 0.0, 1.0)
    data = np.round(scaled * 255).astype(np.uint8)
    h, w = data.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(data.tobytes())


def read_pgm(path) -> np.ndarray:
    """Read a binary PGM written by :func:`write_pgm`; returns uint8 rows."""
    raw = Path(path).read_bytes()
    fields, pos = [], 0
    while len(fields) < 4:
        while raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            pos = raw.index(b"\n", pos) + 1
            continue
        end = pos
        while not raw[end:end + 1].isspace():
            end += 1
        fields.append(raw[pos:end].decode("ascii"))
        pos = end
    if fields[0] != "P5":
        raise ValueError(f"{path}: not a binary PGM")
    w, h, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    if maxval > 255:
        raise ValueError(f"{path}: only 8-bit graymaps are supported")
    pos += 1  # single whitespace after maxval
    data = np.frombuffer(raw[pos:pos + w * h], dtype=np.uint8)
    if data.size != w * h:
        raise ValueError(f"{path}: truncated pixel data")
    return data.reshape(h, w)


def pattern_image(p: BeamPattern, floor_db: float = -60.0) -> np.ndarray:
    """Pattern on its product raster as an image, top row = highest v;
    points outside the raster mask are NaN."""
    r = p.raster
    if r is None:
        raise ValueError("pattern has no product raster")
    img = np.full(r.mask.shape, np.nan)
    img[r.mask] = np.maximum(p.gain_db, floor_db)
    return img[::-1]


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as f:
        wr = csv.writer(f, lineterminator="\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow([_cell(x) for x in row])


def _cell(x):
    if isinstance(x, (bool, np.bool_)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (list, tuple)):
        return " ".join(str(_cell(y)) for y in x)
    return x


def read_csv(path) -> list[dict]:
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())
