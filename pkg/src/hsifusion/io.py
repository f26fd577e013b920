"""File formats: HST1 tensors, SRF / metrics CSV and binary PGM error maps.

HST1 layout (little-endian)::

    offset 0   4 bytes   magic b"HST1"
    offset 4   3 x u32   I1, I2, I3
    offset 16  f64 x I1*I2*I3, first index fastest
"""

import csv
import os
import struct

import numpy as np

from .errors import DimensionError, FormatError

MAGIC = b"HST1"
HEADER = struct.Struct("<4s3I")
U32_MAX = 2**32 - 1


def write_hst(path, t):
    t = np.asarray(t, dtype=np.float64)
    if t.ndim != 3:
        raise DimensionError(f"HST1 stores 3rd-order tensors, got ndim={t.ndim}")
    if any(d > U32_MAX for d in t.shape):
        raise DimensionError(f"dimension too large for HST1: {t.shape}")
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, *t.shape))
        fh.write(t.astype("<f8").tobytes(order="F"))


def read_hst(path):
    with open(path, "rb") as fh:
        head = fh.read(HEADER.size)
        if len(head) < 4 or head[:4] != MAGIC:
            raise FormatError(f"{path}: bad magic {head[:4]!r}, expected {MAGIC!r}", offset=0)
        if len(head) < HEADER.size:
            raise FormatError(f"{path}: truncated header", offset=len(head))
        _, n1, n2, n3 = HEADER.unpack(head)
        count = n1 * n2 * n3
        size = os.fstat(fh.fileno()).st_size
        expected = HEADER.size + 8 * count
        if size < expected:
            raise FormatError(
                f"{path}: truncated payload, dims {n1}x{n2}x{n3} need {expected} bytes, file has {size}",
                offset=size,
            )
        if size > expected:
            raise FormatError(f"{path}: {size - expected} trailing bytes after payload", offset=expected)
        data = np.frombuffer(fh.read(8 * count), dtype="<f8")
    return data.reshape((n1, n2, n3), order="F").astype(np.float64)


def raw_to_hst(raw_path, dims, out_path, order="F", dtype="<f8"):
    """Convert a headerless float64 dump of shape ``dims`` into HST1."""
    data = np.fromfile(raw_path, dtype=dtype)
    n = int(np.prod(dims))
    if data.size != n:
        raise FormatError(f"{raw_path}: {data.size} values, dims {tuple(dims)} need {n}", offset=8 * min(data.size, n))
    write_hst(out_path, data.reshape(dims, order=order))


def read_srf(path):
    """SRF matrix from a header-less CSV (one row per MSI band)."""
    rows = []
    with open(path, newline="") as fh:
        for line_no, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                raise FormatError(f"{path}: non-numeric entry on line {line_no}") from None
    if not rows or len({len(r) for r in rows}) != 1:
        raise FormatError(f"{path}: SRF rows must be nonempty and of equal length")
    return np.array(rows)


def write_srf(path, srf):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in np.atleast_2d(srf):
            w.writerow([repr(float(v)) for v in row])


def write_metrics_csv(path, report):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["metric", "value"])
        for name, value in report.rows():
            w.writerow([name, repr(float(value))])


def read_metrics_csv(path):
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header != ["metric", "value"]:
            raise FormatError(f"{path}: unexpected header {header}")
        return {name: float(value) for name, value in r}


def error_map(ref_band, test_band, vmax=0.1):
    """``|ref - test|`` mapped linearly from ``[0, vmax]`` to 0..255 (clipped)."""
    err = np.abs(np.asarray(ref_band, dtype=np.float64) - test_band)
    return np.clip(np.rint(err / vmax * 255.0), 0, 255).astype(np.uint8)


def write_pgm(path, img, comment=None):
    """Binary 8-bit PGM (P5); rows are the first array axis."""
    img = np.asarray(img, dtype=np.uint8)
    rows, cols = img.shape
    head = b"P5\n"
    if comment:
        head += b"# " + comment.encode("ascii") + b"\n"
    head += f"{cols} {rows}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(head + img.tobytes(order="C"))


def read_pgm(path):
    """Return ``(image, comments)`` from a P5 file written by :func:`write_pgm`."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:2] != b"P5":
        raise FormatError(f"{path}: not a binary PGM", offset=0)
    pos = 2
    tokens, comments = [], []
    while len(tokens) < 3:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            end = data.index(b"\n", pos)
            comments.append(data[pos + 1:end].decode("ascii").strip())
            pos = end + 1
            continue
        end = pos
        while not data[end:end + 1].isspace():
            end += 1
        tokens.append(int(data[pos:end]))
        pos = end
    pos += 1
    cols, rows, maxval = tokens
    if maxval != 255:
        raise FormatError(f"{path}: only 8-bit PGM supported (maxval {maxval})", offset=pos)
    img = np.frombuffer(data[pos:pos + rows * cols], dtype=np.uint8)
    if img.size != rows * cols:
        raise FormatError(f"{path}: truncated pixel data", offset=len(data))
    return img.reshape(rows, cols), comments
