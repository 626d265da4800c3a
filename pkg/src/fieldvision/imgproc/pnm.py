"""Binary PPM (P6) / PGM (P5) reading and writing, 8-bit only."""

from __future__ import annotations

import os

import numpy as np


class PnmFormatError(ValueError):
    pass


def _tokens(data: bytes, count: int, pos: int):
    out = []
    n = len(data)
    while len(out) < count:
        while pos < n and data[pos : pos + 1].isspace():
            pos += 1
        if pos < n and data[pos : pos + 1] == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise PnmFormatError("truncated header")
        out.append(data[start:pos])
    return out, pos


def decode_pnm(data: bytes) -> np.ndarray:
    (magic, w, h, maxval), pos = _tokens(data, 4, 0)
    if magic not in (b"P6", b"P5"):
        raise PnmFormatError(f"unsupported magic {magic!r}")
    w, h, maxval = int(w), int(h), int(maxval)
    if maxval != 255:
        raise PnmFormatError("only maxval 255 is supported")
    pos += 1  # single whitespace after maxval
    channels = 3 if magic == b"P6" else 1
    size = w * h * channels
    body = data[pos : pos + size]
    if len(body) != size:
        raise PnmFormatError("truncated pixel data")
    arr = np.frombuffer(body, dtype=np.uint8).copy()
    return arr.reshape(h, w, 3) if channels == 3 else arr.reshape(h, w)


def encode_pnm(img: np.ndarray) -> bytes:
    img = np.asarray(img)
    if img.dtype != np.uint8:
        raise PnmFormatError("image must be uint8")
    if img.ndim == 3 and img.shape[2] == 3:
        magic = b"P6"
    elif img.ndim == 2:
        magic = b"P5"
    else:
        raise PnmFormatError(f"unsupported image shape {img.shape}")
    h, w = img.shape[:2]
    return magic + f"\n{w} {h}\n255\n".encode() + np.ascontiguousarray(img).tobytes()


def read_pnm(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as f:
        return decode_pnm(f.read())


def write_pnm(path: str | os.PathLike, img: np.ndarray) -> None:
    with open(path, "wb") as f:
        f.write(encode_pnm(img))
