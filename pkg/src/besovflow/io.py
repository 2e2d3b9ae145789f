"""Field serialization and report writers.

Binary field layout (documented contract, little-endian throughout):

    offset  size  content
    0       4     magic  b"BFSF"
    4       4     uint32 version (1)
    8       4     uint32 n (points per axis)
    12      4     uint32 flags: bit0 real_valued, bit1 divergence_free, bit2 vector
    16      8     float64 box_length
    24      ...   payload: complex64 coefficients, C order, numpy-fft index
                  order along each axis; vector fields store the three
                  component cubes consecutively.

A JSON metadata sidecar (same path + ".json") repeats the header fields and
carries the dealias fraction.  All writes are atomic (tmp file + rename).
"""

import json
import os
import struct
import tempfile

import numpy as np

from .grid import GridSpec, SpectralScalarField, SpectralVectorField

MAGIC = b"BFSF"
VERSION = 1

FLAG_REAL = 1
FLAG_DIVFREE = 2
FLAG_VECTOR = 4


class FormatError(ValueError):
    pass


def _atomic_write_bytes(path, data: bytes):
    d = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str):
    _atomic_write_bytes(path, text.encode())


def write_json(path, obj):
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(x) for x in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    return str(x)


def save_field(path, field):
    vector = isinstance(field, SpectralVectorField)
    grid = field.grid
    if vector:
        real = field.components[0].real_valued
        flags = FLAG_VECTOR | (FLAG_REAL if real else 0) | \
            (FLAG_DIVFREE if field.divergence_free else 0)
        payload = np.stack([c.coeffs for c in field.components]).astype("<c8")
    else:
        real = field.real_valued
        flags = FLAG_REAL if real else 0
        payload = field.coeffs.astype("<c8")
    header = MAGIC + struct.pack("<III d", VERSION, grid.n, flags, grid.box_length)
    _atomic_write_bytes(path, header + payload.tobytes(order="C"))
    write_json(str(path) + ".json", {
        "format": "bfsf",
        "version": VERSION,
        "n": grid.n,
        "box_length": grid.box_length,
        "dealias_fraction": grid.dealias_fraction,
        "real_valued": bool(real),
        "divergence_free": bool(vector and field.divergence_free),
        "vector": vector,
        "dtype": "complex64",
        "order": "C",
        "index_order": "numpy-fft",
    })


def load_field(path):
    with open(path, "rb") as fh:
        head = fh.read(24)
        if len(head) < 24 or head[:4] != MAGIC:
            raise FormatError(f"{path}: not a BFSF field file")
        version, n, flags, box_length = struct.unpack("<III d", head[4:])
        if version != VERSION:
            raise FormatError(f"{path}: unsupported version {version}")
        payload = np.frombuffer(fh.read(), dtype="<c8")
    frac = 2.0 / 3.0
    sidecar = str(path) + ".json"
    if os.path.exists(sidecar):
        with open(sidecar) as fh:
            frac = json.load(fh).get("dealias_fraction", frac)
    grid = GridSpec(n, box_length, frac)
    vector = bool(flags & FLAG_VECTOR)
    real = bool(flags & FLAG_REAL)
    count = 3 * n ** 3 if vector else n ** 3
    if payload.size != count:
        raise FormatError(f"{path}: payload holds {payload.size} coefficients, expected {count}")
    data = payload.astype(np.complex128)
    if vector:
        cubes = data.reshape(3, n, n, n)
        return SpectralVectorField(
            tuple(SpectralScalarField(grid, cubes[a].copy(), real) for a in range(3)),
            divergence_free=bool(flags & FLAG_DIVFREE))
    return SpectralScalarField(grid, data.reshape(n, n, n).copy(), real)
