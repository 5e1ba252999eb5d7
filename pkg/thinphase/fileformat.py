"""
The ``THINPH1`` binary container for fields, masks and thin functions.

Layout, all little endian::

    7 bytes   magic "THINPH1"
    u16       format version (1)
    u8        thin dimension n
    f64 x 3   alpha, half extent, spacing
    u32 x n+1 node counts per axis
    payload   field:  f64 per node, thin axes major, y last
              mask:   one byte per slab node, 0 = ZERO, 1 = POSITIVE
              thin:   f64 per slab node
    trailer   optional: u32 length + UTF-8 JSON provenance
"""
import json
import logging
import pathlib
import struct

import numpy as np

from .exceptions import FileFormatError, GridError
from .extension import ThinFunction
from .grid import GridSpec, ScalarField, ThinMask, build_grid

# Module-level logger
log = logging.getLogger(__name__)

MAGIC = b"THINPH1"
FORMAT_VERSION = 1
KINDS = ("field", "mask", "thin")
_HEAD = struct.Struct("<HBddd")


def _payload_shape(spec, kind):
    if kind == "field":
        return spec.counts
    return (spec.thin_count,) * spec.n


def encode(spec, kind, values, provenance=None):
    """Serialise ``values`` for ``spec`` as a ``kind`` payload."""
    if kind not in KINDS:
        raise ValueError("Unknown payload kind {!r}".format(kind))
    values = np.asarray(values)
    if values.shape != _payload_shape(spec, kind):
        raise ValueError("Payload shape {} does not match {}".format(values.shape, _payload_shape(spec, kind)))
    parts = [
        MAGIC,
        _HEAD.pack(FORMAT_VERSION, spec.n, spec.alpha, spec.half_extent, spec.spacing),
        struct.pack("<{}I".format(spec.n + 1), *spec.counts),
    ]
    if kind == "mask":
        parts.append(np.ascontiguousarray(values, dtype=np.uint8).tobytes())
    else:
        parts.append(np.ascontiguousarray(values, dtype="<f8").tobytes())
    if provenance is not None:
        blob = json.dumps(provenance, sort_keys=True).encode("utf-8")
        parts.append(struct.pack("<I", len(blob)))
        parts.append(blob)
    return b"".join(parts)


def decode(data, kind):
    """
    Parse a ``THINPH1`` byte string.

    Returns:
        tuple: ``(GridSpec, ndarray, provenance or None)``.

    Raises:
        FileFormatError: bad magic, unsupported version, inconsistent
            header, truncated payload or malformed trailer.
    """
    if kind not in KINDS:
        raise ValueError("Unknown payload kind {!r}".format(kind))
    if data[:len(MAGIC)] != MAGIC:
        raise FileFormatError("Not a THINPH1 file (bad magic)")
    offset = len(MAGIC)
    if len(data) < offset + _HEAD.size:
        raise FileFormatError("Truncated THINPH1 header")
    version, n, alpha, half_extent, spacing = _HEAD.unpack_from(data, offset)
    offset += _HEAD.size
    if version != FORMAT_VERSION:
        raise FileFormatError("Unsupported THINPH1 version {}".format(version))
    if not 1 <= n <= 3:
        raise FileFormatError("Invalid thin dimension {} in header".format(n))
    counts_format = "<{}I".format(n + 1)
    if len(data) < offset + struct.calcsize(counts_format):
        raise FileFormatError("Truncated THINPH1 header")
    counts = struct.unpack_from(counts_format, data, offset)
    offset += struct.calcsize(counts_format)
    try:
        spec = GridSpec(n, alpha, half_extent, spacing)
    except GridError as exc:
        raise FileFormatError("Inconsistent grid header: {}".format(exc.message), root_exception=exc)
    if tuple(counts) != spec.counts:
        raise FileFormatError("Header counts {} disagree with spacing and extent".format(list(counts)))

    shape = _payload_shape(spec, kind)
    itemsize = 1 if kind == "mask" else 8
    size = int(np.prod(shape)) * itemsize
    if len(data) < offset + size:
        raise FileFormatError("Truncated THINPH1 payload: expected {} bytes".format(size))
    dtype = np.uint8 if kind == "mask" else "<f8"
    values = np.frombuffer(data, dtype=dtype, count=int(np.prod(shape)), offset=offset).reshape(shape)
    offset += size

    provenance = None
    rest = len(data) - offset
    if rest:
        if rest < 4:
            raise FileFormatError("Trailing bytes after THINPH1 payload")
        (length,) = struct.unpack_from("<I", data, offset)
        if rest != 4 + length:
            raise FileFormatError("Provenance trailer length mismatch")
        try:
            provenance = json.loads(data[offset + 4:].decode("utf-8"))
        except (UnicodeDecodeError, ValueError) as exc:
            raise FileFormatError("Malformed provenance trailer", root_exception=exc)

    if kind == "mask":
        if np.any(values > 1):
            raise FileFormatError("Mask bytes must be 0 or 1")
        values = values.astype(bool)
    elif not np.all(np.isfinite(values)):
        raise FileFormatError("Non-finite values in THINPH1 payload")
    return spec, np.array(values), provenance


def _read(path, kind):
    path = pathlib.Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise FileFormatError("Cannot read {}".format(path), root_exception=exc)
    log.debug("Read %d bytes from %s", len(data), path)
    return decode(data, kind)


def _write(path, data):
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(data)
    log.debug("Wrote %d bytes to %s", len(data), path)


def write_field(path, field, provenance=None):
    _write(path, encode(field.spec, "field", field.values, provenance))


def read_field(path):
    """Read a field file; returns ``(ScalarField, provenance)``."""
    spec, values, provenance = _read(path, "field")
    return ScalarField(build_grid(spec), values), provenance


def write_mask(path, mask, provenance=None):
    _write(path, encode(mask.grid.spec, "mask", mask.states, provenance))


def read_mask(path):
    spec, values, provenance = _read(path, "mask")
    return ThinMask(build_grid(spec), values), provenance


def write_thin(path, f, provenance=None):
    _write(path, encode(f.grid.spec, "thin", f.values, provenance))


def read_thin(path):
    spec, values, provenance = _read(path, "thin")
    return ThinFunction(build_grid(spec), values), provenance
