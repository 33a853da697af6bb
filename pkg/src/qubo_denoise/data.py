"""Datasets: Bars-and-Stripes generation, IDX ingestion, PBM and native containers.

Native container (``.qdb``), all integers little-endian::

    offset  size  field
    0       4     magic  b"QDBS"
    4       2     format version (1)
    6       1     split  (0 train, 1 test, 2 unspecified)
    7       1     reserved, 0
    8       4     width
    12      4     height
    16      4     image count
    20      2     name length L
    22      L     name, UTF-8
    22+L    ...   images; each is its row-major pixels packed MSB-first
                  with np.packbits, padded to ceil(width*height/8) bytes

PBM files use the P4 (binary) variant on write; on read P1 and P4 are both
accepted. A PBM bit of 1 is pixel value 1.
"""
from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import List

import numpy as np

from .core import BinaryImage, as_bit_matrix

NATIVE_MAGIC = b"QDBS"
NATIVE_VERSION = 1
_SPLITS = {"train": 0, "test": 1, "": 2}
_SPLIT_NAMES = {v: k for k, v in _SPLITS.items()}
IDX_IMAGE_MAGIC = 0x00000803


class DataFormatError(ValueError):
    """A file does not follow the expected binary layout."""


@dataclass(eq=False)
class Dataset:
    """Equally sized binary images stored as rows of a ``(count, height*width)`` array."""

    name: str
    width: int
    height: int
    pixels: np.ndarray
    split: str = ""

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("dimensions must be positive")
        if self.split not in _SPLITS:
            raise ValueError(f"split must be 'train', 'test' or '', got {self.split!r}")
        px = np.asarray(self.pixels)
        if px.ndim == 3:
            px = px.reshape(px.shape[0], -1)
        if px.size == 0:
            px = np.zeros((0, self.width * self.height), dtype=np.uint8)
        else:
            px = as_bit_matrix(px, self.width * self.height, name="pixels")
        self.pixels = px

    def __len__(self):
        return self.pixels.shape[0]

    def __getitem__(self, k) -> BinaryImage:
        return BinaryImage(self.width, self.height, self.pixels[k])

    @property
    def images(self) -> List[BinaryImage]:
        return [self[k] for k in range(len(self))]

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (self.name == other.name and self.split == other.split
                and self.width == other.width and self.height == other.height
                and np.array_equal(self.pixels, other.pixels))

    def save(self, path) -> None:
        name = self.name.encode("utf-8")
        header = struct.pack("<4sHBBIIIH", NATIVE_MAGIC, NATIVE_VERSION, _SPLITS[self.split], 0,
                             self.width, self.height, len(self), len(name))
        body = np.packbits(self.pixels, axis=1).tobytes() if len(self) else b""
        Path(path).write_bytes(header + name + body)

    @classmethod
    def load(cls, path) -> "Dataset":
        raw = Path(path).read_bytes()
        fixed = struct.calcsize("<4sHBBIIIH")
        if len(raw) < fixed:
            raise DataFormatError(f"{path}: truncated header ({len(raw)} of {fixed} bytes)")
        magic, version, split, _, w, h, count, nlen = struct.unpack_from("<4sHBBIIIH", raw)
        if magic != NATIVE_MAGIC:
            raise DataFormatError(f"{path}: bad magic {magic!r} at offset 0")
        if version != NATIVE_VERSION:
            raise DataFormatError(f"{path}: unsupported version {version} at offset 4")
        if split not in _SPLIT_NAMES:
            raise DataFormatError(f"{path}: bad split code {split} at offset 6")
        if w < 1 or h < 1:
            raise DataFormatError(f"{path}: bad dimensions {w}x{h} at offset 8")
        off = fixed + nlen
        per = (w * h + 7) // 8
        need = off + count * per
        if len(raw) != need:
            raise DataFormatError(
                f"{path}: expected {need} bytes for {count} images, found {len(raw)}")
        name = raw[fixed:off].decode("utf-8")
        packed = np.frombuffer(raw, dtype=np.uint8, offset=off).reshape(count, per)
        px = np.unpackbits(packed, axis=1, count=w * h) if count else np.zeros((0, w * h), np.uint8)
        return cls(name, w, h, px, _SPLIT_NAMES[split])


# ----------------------------------------------------------------------------- BAS

def is_bas(img: BinaryImage) -> bool:
    """True if every row is constant or every column is constant."""
    a = img.to_array()
    rows = bool(np.all(a == a[:, :1]))
    cols = bool(np.all(a == a[:1, :]))
    return rows or cols


def gen_bas(width: int, height: int, count: int, seed=0, name: str = "bas",
            split: str = "") -> Dataset:
    """Sample Bars-and-Stripes images i.i.d.

    Each image picks rows or columns with probability 1/2, then gives every
    line an independent fair 0/1 value. Constant images are allowed.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if width < 1 or height < 1:
        raise ValueError("dimensions must be positive")
    rng = np.random.default_rng(seed)
    horizontal = rng.random(count) < 0.5
    row_vals = rng.integers(0, 2, size=(count, height), dtype=np.uint8)
    col_vals = rng.integers(0, 2, size=(count, width), dtype=np.uint8)
    imgs = np.where(horizontal[:, None, None],
                    np.broadcast_to(row_vals[:, :, None], (count, height, width)),
                    np.broadcast_to(col_vals[:, None, :], (count, height, width)))
    return Dataset(name, width, height, imgs.reshape(count, -1), split)


# ----------------------------------------------------------------------------- IDX

def _read_maybe_gzip(path) -> bytes:
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def load_idx(path) -> np.ndarray:
    """Parse an IDX image file (magic 0x00000803) into a ``(count, rows, cols)`` uint8 array.

    Gzip-compressed files are detected and decompressed transparently.
    """
    raw = _read_maybe_gzip(path)
    if len(raw) < 4:
        raise DataFormatError(f"{path}: need 4 bytes for magic at offset 0, found {len(raw)}")
    (magic,) = struct.unpack_from(">I", raw, 0)
    if magic != IDX_IMAGE_MAGIC:
        raise DataFormatError(f"{path}: bad IDX magic 0x{magic:08x} at offset 0 "
                              f"(expected 0x{IDX_IMAGE_MAGIC:08x})")
    if len(raw) < 16:
        raise DataFormatError(f"{path}: truncated header at offset 4: expected 16 bytes, "
                              f"available {len(raw)}")
    count, rows, cols = struct.unpack_from(">III", raw, 4)
    need = 16 + count * rows * cols
    if len(raw) < need:
        raise DataFormatError(f"{path}: truncated pixel data at offset 16: expected "
                              f"{need} bytes, available {len(raw)}")
    return np.frombuffer(raw, dtype=np.uint8, count=count * rows * cols,
                         offset=16).reshape(count, rows, cols).copy()


def write_idx(path, images) -> None:
    images = np.asarray(images, dtype=np.uint8)
    if images.ndim != 3:
        raise ValueError("expected an array of shape (count, rows, cols)")
    header = struct.pack(">IIII", IDX_IMAGE_MAGIC, *images.shape)
    Path(path).write_bytes(header + images.tobytes())


def downscale_nn(gray, target_w: int, target_h: int) -> np.ndarray:
    """Nearest-neighbor resize: output ``(r, c)`` takes source ``(r*H // th, c*W // tw)``.

    Works on a single ``(H, W)`` image or a stack ``(count, H, W)``.
    """
    if target_w < 1 or target_h < 1:
        raise ValueError("target dimensions must be >= 1")
    gray = np.asarray(gray)
    H, W = gray.shape[-2:]
    rows = (np.arange(target_h) * H) // target_h
    cols = (np.arange(target_w) * W) // target_w
    return gray[..., rows[:, None], cols[None, :]]


def binarize(gray, threshold: int = 128) -> np.ndarray:
    """``1`` where ``pixel >= threshold``; shape preserved."""
    return (np.asarray(gray) >= threshold).astype(np.uint8)


def idx_to_dataset(path, width: int = 12, height: int = 12, threshold: int = 128,
                   name: str = "mnist", split: str = "", limit: int | None = None) -> Dataset:
    """IDX images -> nearest-neighbor downscale -> binarize."""
    gray = load_idx(path)
    if limit is not None:
        gray = gray[:limit]
    small = downscale_nn(gray, width, height)
    return Dataset(name, width, height, binarize(small, threshold).reshape(len(small), -1), split)


# ----------------------------------------------------------------------------- PBM

def write_pbm(path, img: BinaryImage) -> None:
    header = f"P4\n{img.width} {img.height}\n".encode("ascii")
    body = np.packbits(img.to_array(), axis=1).tobytes()
    Path(path).write_bytes(header + body)


def _pbm_tokens(raw: bytes, count: int):
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            while pos < len(raw) and raw[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace() and raw[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise DataFormatError(f"truncated PBM header at offset {pos}")
        tokens.append(raw[start:pos])
    return tokens, pos


def read_pbm(path) -> BinaryImage:
    raw = Path(path).read_bytes()
    (magic, w, h), pos = _pbm_tokens(raw, 3)
    try:
        w, h = int(w), int(h)
    except ValueError as exc:
        raise DataFormatError(f"{path}: bad PBM dimensions") from exc
    if magic == b"P4":
        pos += 1
        per_row = (w + 7) // 8
        need = pos + per_row * h
        if len(raw) < need:
            raise DataFormatError(f"{path}: expected {need} bytes, available {len(raw)}")
        packed = np.frombuffer(raw, dtype=np.uint8, count=per_row * h, offset=pos)
        arr = np.unpackbits(packed.reshape(h, per_row), axis=1, count=w)
    elif magic == b"P1":
        digits = [c - 48 for c in raw[pos:] if c in (48, 49)]
        if len(digits) < w * h:
            raise DataFormatError(f"{path}: expected {w * h} pixels, found {len(digits)}")
        arr = np.array(digits[:w * h], dtype=np.uint8).reshape(h, w)
    else:
        raise DataFormatError(f"{path}: unsupported PBM magic {magic!r} at offset 0")
    return BinaryImage.from_array(arr)
