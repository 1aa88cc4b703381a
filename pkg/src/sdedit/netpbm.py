"""Binary netpbm I/O: P6 (RGB) and P5 (grayscale), 8-bit only.

Pixels map linearly between byte values and floats in [0, 1]; writing clips.
"""

from __future__ import annotations

import io

import numpy as np

__all__ = ["read_netpbm", "write_netpbm", "encode_netpbm", "decode_netpbm"]


def _read_token(buf: io.BytesIO) -> bytes:
    """Next whitespace-delimited header token, skipping '#' comments."""
    token = b""
    while True:
        ch = buf.read(1)
        if ch == b"":
            raise ValueError("truncated netpbm header")
        if ch == b"#":
            while ch not in (b"\n", b""):
                ch = buf.read(1)
            continue
        if ch.isspace():
            if token:
                return token
            continue
        token += ch


def decode_netpbm(data: bytes) -> np.ndarray:
    """Parse P5/P6 bytes into a float image in [0, 1]: (H, W) or (H, W, 3)."""
    buf = io.BytesIO(data)
    magic = _read_token(buf)
    if magic not in (b"P5", b"P6"):
        raise ValueError(f"unsupported netpbm magic {magic!r} (need binary P5/P6)")
    width = int(_read_token(buf))
    height = int(_read_token(buf))
    maxval = int(_read_token(buf))
    if not (0 < maxval <= 255):
        raise ValueError(f"only 8-bit netpbm supported, maxval={maxval}")
    channels = 3 if magic == b"P6" else 1
    count = width * height * channels
    raster = buf.read(count)
    if len(raster) != count:
        raise ValueError(f"raster truncated: expected {count} bytes, got {len(raster)}")
    img = np.frombuffer(raster, dtype=np.uint8).astype(np.float64) / maxval
    img = img.reshape(height, width, channels)
    return img[:, :, 0] if channels == 1 else img


def encode_netpbm(img: np.ndarray) -> bytes:
    """Encode (H, W) as P5 or (H, W, 3) as P6 at 8-bit depth."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 3 and img.shape[2] == 1:
        img = img[:, :, 0]
    if img.ndim == 2:
        magic, channels = b"P5", 1
    elif img.ndim == 3 and img.shape[2] == 3:
        magic, channels = b"P6", 3
    else:
        raise ValueError(f"image must be (H, W) or (H, W, 3), got {img.shape}")
    h, w = img.shape[:2]
    bytes_ = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    header = b"%s\n%d %d\n255\n" % (magic, w, h)
    return header + bytes_.tobytes()


def read_netpbm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return decode_netpbm(fh.read())


def write_netpbm(path, img: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_netpbm(img))
