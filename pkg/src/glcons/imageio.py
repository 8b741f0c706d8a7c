"""Plain-text PGM (P2) / PPM (P3) images and scribble masks."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


class ImageFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ImageGrid:
    """RGB image with values in [0, 1] (shape (H, W, 3)) and an optional scribble mask in {-1, 0, 1}."""

    rgb: np.ndarray
    mask: Optional[np.ndarray] = None

    def __post_init__(self):
        rgb = np.asarray(self.rgb, dtype=float)
        if rgb.ndim == 2:
            rgb = np.repeat(rgb[:, :, None], 3, axis=2)
        if rgb.ndim != 3 or rgb.shape[2] != 3 or rgb.shape[0] < 1 or rgb.shape[1] < 1:
            raise ValueError("image must have shape (H, W, 3)")
        if np.any(rgb < 0) or np.any(rgb > 1):
            raise ValueError("RGB values must lie in [0, 1]")
        object.__setattr__(self, "rgb", rgb)
        if self.mask is not None:
            m = np.asarray(self.mask)
            if m.shape != rgb.shape[:2]:
                raise ValueError(f"mask shape {m.shape} does not match image {rgb.shape[:2]}")
            if not np.all(np.isin(m, (-1, 0, 1))):
                raise ValueError("mask values must be -1, 0 or +1")
            object.__setattr__(self, "mask", m.astype(np.int8))

    @property
    def height(self) -> int:
        return self.rgb.shape[0]

    @property
    def width(self) -> int:
        return self.rgb.shape[1]

    def with_mask(self, mask) -> "ImageGrid":
        return ImageGrid(self.rgb, mask)


def _tokens(path):
    with open(path) as fh:
        text = fh.read()
    toks = []
    for line in text.splitlines():
        line = line.split("#", 1)[0]
        toks.extend(line.split())
    return toks


def read_pnm(path) -> np.ndarray:
    """Read a P2 (grey, returns (H, W)) or P3 (colour, returns (H, W, 3)) file as integers."""
    toks = _tokens(path)
    if not toks or toks[0] not in ("P2", "P3"):
        raise ImageFormatError(f"{path}: only plain P2/P3 files are supported")
    try:
        w, h, maxval = int(toks[1]), int(toks[2]), int(toks[3])
        data = np.array([int(t) for t in toks[4:]], dtype=np.int64)
    except (IndexError, ValueError) as exc:
        raise ImageFormatError(f"{path}: malformed header or pixel data") from exc
    if w < 1 or h < 1 or not 0 < maxval < 256:
        raise ImageFormatError(f"{path}: bad dimensions or maxval (8-bit only)")
    ch = 3 if toks[0] == "P3" else 1
    if data.size != w * h * ch:
        raise ImageFormatError(f"{path}: expected {w * h * ch} samples, found {data.size}")
    if np.any(data < 0) or np.any(data > maxval):
        raise ImageFormatError(f"{path}: sample out of range")
    if maxval != 255:
        data = np.rint(data * (255.0 / maxval)).astype(np.int64)
    return data.reshape(h, w, 3) if ch == 3 else data.reshape(h, w)


def write_pnm(path, pixels, comment: Optional[str] = None) -> None:
    """Write 8-bit integer pixels: (H, W) as P2, (H, W, 3) as P3."""
    px = np.asarray(pixels)
    if px.ndim not in (2, 3) or (px.ndim == 3 and px.shape[2] != 3):
        raise ValueError("pixels must have shape (H, W) or (H, W, 3)")
    if np.any(px < 0) or np.any(px > 255) or np.any(px != np.rint(px)):
        raise ValueError("pixels must be integers in [0, 255]")
    px = px.astype(np.int64)
    h, w = px.shape[:2]
    magic = "P3" if px.ndim == 3 else "P2"
    with open(path, "w") as fh:
        fh.write(f"{magic}\n")
        if comment:
            for line in comment.splitlines():
                fh.write(f"# {line}\n")
        fh.write(f"{w} {h}\n255\n")
        for row in px.reshape(h, -1):
            fh.write(" ".join(map(str, row.tolist())) + "\n")


def read_image(path) -> ImageGrid:
    px = read_pnm(path)
    return ImageGrid(px / 255.0)


def write_image(path, image: ImageGrid, comment: Optional[str] = None) -> None:
    write_pnm(path, np.rint(image.rgb * 255).astype(np.int64), comment)


def read_mask(path) -> np.ndarray:
    """Scribble mask from a P2 file: 0 -> -1, 255 -> +1, anything else unlabelled."""
    px = read_pnm(path)
    if px.ndim == 3:
        px = px[:, :, 0]
    return np.where(px == 0, -1, np.where(px == 255, 1, 0)).astype(np.int8)


def write_mask(path, mask, comment: Optional[str] = None) -> None:
    m = np.asarray(mask)
    write_pnm(path, np.where(m < 0, 0, np.where(m > 0, 255, 128)), comment)


def labels_to_pgm(path, labels, shape, comment: Optional[str] = None) -> None:
    """Write a {-1, +1} labelling as a 0/255 grey image."""
    lab = np.asarray(labels).reshape(shape)
    write_pnm(path, np.where(lab > 0, 255, 0), comment)
