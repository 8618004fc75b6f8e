"""Binary PGM (P5) image files, the page and sample-store format."""

from __future__ import annotations

import numpy as np

from .errors import ValidationError


class PgmError(ValidationError):
    pass


def _read_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """First ``count`` whitespace tokens of a PGM header, honoring # comments."""
    tokens, i, n = [], 0, len(data)
    while len(tokens) < count and i < n:
        c = data[i:i + 1]
        if c == b"#":
            while i < n and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
        elif c.isspace():
            i += 1
        else:
            j = i
            while j < n and not data[j:j + 1].isspace() and data[j:j + 1] != b"#":
                j += 1
            tokens.append(data[i:j])
            i = j
    if len(tokens) < count:
        raise PgmError("truncated PGM header")
    return tokens, i


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    tokens, pos = _read_tokens(data, 4)
    if tokens[0] != b"P5":
        raise PgmError(f"not a binary PGM (magic {tokens[0]!r})")
    try:
        w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    except ValueError:
        raise PgmError("non-numeric PGM header field") from None
    if w < 1 or h < 1:
        raise PgmError(f"bad PGM size {w}x{h}")
    if not 0 < maxval < 256:
        raise PgmError(f"unsupported PGM maxval {maxval}")
    pixels = data[pos + 1: pos + 1 + w * h]
    if len(pixels) != w * h:
        raise PgmError("PGM payload shorter than width*height")
    return np.frombuffer(pixels, dtype=np.uint8).reshape(h, w).copy()


def write_pgm(path, image: np.ndarray) -> None:
    img = np.asarray(image)
    if img.ndim != 2:
        raise PgmError("PGM images must be two-dimensional")
    img = img.astype(np.uint8, copy=False)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def resize_nearest(image: np.ndarray, height: int, width: int) -> np.ndarray:
    """Nearest-neighbor resample; exact copy when the size already matches."""
    h, w = image.shape
    if (h, w) == (height, width):
        return image.copy()
    rows = np.minimum((np.arange(height) * h) // height, h - 1)
    cols = np.minimum((np.arange(width) * w) // width, w - 1)
    return image[np.ix_(rows, cols)]
