"""Image and table I/O for pipeline artifacts."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .stereo import as_gray


def read_gray(path) -> np.ndarray:
    """Load an 8- or 16-bit grayscale PNG/PGM as floats in [0, 1]."""
    im = Image.open(path)
    if im.mode in ("I;16", "I;16B", "I"):
        a = np.array(im)
        if a.dtype != np.uint16:
            a = np.clip(a, 0, 65535).astype(np.uint16)
        return as_gray(a)
    if im.mode != "L":
        im = im.convert("L")
    return as_gray(np.array(im, dtype=np.uint8))


def to_uint8(img) -> np.ndarray:
    a = np.asarray(img)
    if a.dtype == np.bool_:
        return a.astype(np.uint8) * 255
    return np.clip(np.rint(np.asarray(a, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


def write_gray(path, img) -> None:
    """Write a [0, 1] float (or boolean) image as 8-bit PNG or PGM."""
    Image.fromarray(to_uint8(img)).save(path)


def write_disparity_pgm(path, disp) -> None:
    """16-bit PGM with value = disparity * 256."""
    a = np.clip(np.asarray(disp, dtype=np.int64) * 256, 0, 65535).astype(np.uint16)
    Image.fromarray(a).save(path)


def read_disparity_pgm(path) -> np.ndarray:
    a = np.array(Image.open(path)).astype(np.int64)
    return a // 256


def write_counts_pgm(path, counts, negate: bool = False) -> None:
    """8-bit PGM of a count grid, clamped at 255."""
    a = np.asarray(counts, dtype=np.float64)
    if negate:
        a = -a
    Image.fromarray(np.clip(np.rint(a), 0, 255).astype(np.uint8)).save(path)


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_lanes_csv(path, lanes) -> None:
    rows = []
    for i, lane in enumerate(lanes):
        for v, u in zip(lane.rows, lane.cols):
            rows.append((i, int(v), f"{float(u):.3f}"))
    write_csv(path, ["lane_id", "v", "u"], rows)


def draw_overlay(path, img, lanes, color=(255, 0, 0), width: int = 2) -> None:
    """Red lane polylines on top of the grayscale image."""
    base = Image.fromarray(to_uint8(img)).convert("RGB")
    draw = ImageDraw.Draw(base)
    for lane in lanes:
        pts = [(float(u), float(v)) for v, u in zip(lane.rows, lane.cols)]
        if len(pts) >= 2:
            draw.line(pts, fill=color, width=width)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    base.save(path)
