"""Minimal NIfTI-1 single-file reader/writer.

Read-focused: dim[1..3], datatype, pixdim[1..3], vox_offset and
scl_slope/scl_inter are honored; no orientation handling or resampling
(only voxel spacing is needed downstream). Payload is x-fastest on disk
and is transposed to the library's (nx, ny, nz) C-order convention.
"""

from __future__ import annotations

import gzip
import struct
from pathlib import Path

import numpy as np

from .volume import LabelVolume, ProbVolume, BinaryMask, Spacing, VolumeFormatError, PAPER_LABELS

HEADER_SIZE = 348

# NIfTI-1 datatype codes
_DT_UINT8 = 2
_DT_INT16 = 4
_DT_INT32 = 8
_DT_FLOAT32 = 16
_DT_FLOAT64 = 64

_DTYPES = {
    _DT_UINT8: "u1",
    _DT_INT16: "i2",
    _DT_INT32: "i4",
    _DT_FLOAT32: "f4",
    _DT_FLOAT64: "f8",
}
_CODES = {np.dtype(v): k for k, v in _DTYPES.items()}
_BITPIX = {_DT_UINT8: 8, _DT_INT16: 16, _DT_INT32: 32, _DT_FLOAT32: 32, _DT_FLOAT64: 64}


def _read_bytes(path: Path) -> bytes:
    if path.name.lower().endswith(".gz"):
        with gzip.open(path, "rb") as fh:
            return fh.read()
    return path.read_bytes()


def load_nifti(path: str | Path, labels: tuple[int, ...] = PAPER_LABELS) -> LabelVolume | ProbVolume:
    path = Path(path)
    blob = _read_bytes(path)
    if len(blob) < HEADER_SIZE:
        raise VolumeFormatError(f"malformed NIfTI header in {path}: file shorter than {HEADER_SIZE} bytes")

    sizeof_hdr = struct.unpack("<i", blob[0:4])[0]
    if sizeof_hdr == HEADER_SIZE:
        end = "<"
    elif struct.unpack(">i", blob[0:4])[0] == HEADER_SIZE:
        end = ">"
    else:
        raise VolumeFormatError(f"malformed NIfTI header in {path}: sizeof_hdr != 348")

    magic = blob[344:348]
    if magic not in (b"n+1\x00", b"ni1\x00"):
        raise VolumeFormatError(f"malformed NIfTI header in {path}: bad magic {magic!r}")
    if magic == b"ni1\x00":
        raise VolumeFormatError(f"unsupported NIfTI in {path}: two-file (.hdr/.img) layout")

    dim = struct.unpack(end + "8h", blob[40:56])
    datatype = struct.unpack(end + "h", blob[70:72])[0]
    pixdim = struct.unpack(end + "8f", blob[76:108])
    vox_offset = struct.unpack(end + "f", blob[108:112])[0]
    scl_slope = struct.unpack(end + "f", blob[112:116])[0]
    scl_inter = struct.unpack(end + "f", blob[116:120])[0]

    ndim = dim[0]
    if ndim < 3 or ndim > 7:
        raise VolumeFormatError(f"unsupported NIfTI dimensionality {ndim} in {path}")
    if any(d > 1 for d in dim[4 : 1 + ndim]):
        raise VolumeFormatError(f"unsupported NIfTI in {path}: non-trivial dims beyond 3 ({dim[1:1+ndim]})")
    nx, ny, nz = dim[1], dim[2], dim[3]
    if nx <= 0 or ny <= 0 or nz <= 0:
        raise VolumeFormatError(f"malformed NIfTI header in {path}: dims {dim[1:4]}")

    if datatype not in _DTYPES:
        raise VolumeFormatError(f"unsupported NIfTI datatype code {datatype} in {path}")
    dtype = np.dtype(end + _DTYPES[datatype])

    spacing_vals = tuple(abs(float(p)) for p in pixdim[1:4])
    if any(v <= 0 for v in spacing_vals):
        raise VolumeFormatError(f"malformed NIfTI header in {path}: non-positive pixdim {pixdim[1:4]}")
    spacing = Spacing(*spacing_vals)

    offset = int(vox_offset)
    if offset < HEADER_SIZE:
        raise VolumeFormatError(f"malformed NIfTI header in {path}: vox_offset {vox_offset}")
    count = nx * ny * nz
    expected = count * dtype.itemsize
    if len(blob) - offset < expected:
        raise VolumeFormatError(
            f"dimension mismatch in {path}: header implies {expected} payload bytes, file has {len(blob) - offset}"
        )
    flat = np.frombuffer(blob, dtype=dtype, count=count, offset=offset)
    # disk order is x-fastest; bring to (nx, ny, nz) C-order
    data = np.ascontiguousarray(flat.reshape((nz, ny, nx)).transpose(2, 1, 0))

    scaled = scl_slope not in (0.0, 1.0) or (scl_slope != 0.0 and scl_inter != 0.0)
    if scaled:
        data = data.astype(np.float64) * float(scl_slope) + float(scl_inter)

    if np.issubdtype(data.dtype, np.integer):
        return LabelVolume(data=data.astype(np.int32), spacing=spacing, labels=labels)
    return ProbVolume(data=data.astype(np.float64), spacing=spacing)


def save_nifti(vol: LabelVolume | ProbVolume | BinaryMask, path: str | Path) -> Path:
    path = Path(path)
    data = vol.data
    if data.dtype == bool:
        data = data.astype(np.uint8)
    elif np.issubdtype(data.dtype, np.integer):
        data = data.astype(np.uint8 if int(data.max(initial=0)) < 256 else np.int32)
    else:
        data = data.astype(np.float64)
    code = _CODES[np.dtype(data.dtype.str[1:])]

    nx, ny, nz = vol.dims
    header = bytearray(HEADER_SIZE)
    struct.pack_into("<i", header, 0, HEADER_SIZE)
    struct.pack_into("<8h", header, 40, 3, nx, ny, nz, 1, 1, 1, 1)
    struct.pack_into("<h", header, 70, code)
    struct.pack_into("<h", header, 72, _BITPIX[code])
    struct.pack_into("<8f", header, 76, 1.0, vol.spacing.dx, vol.spacing.dy, vol.spacing.dz, 0, 0, 0, 0)
    struct.pack_into("<f", header, 108, 352.0)  # vox_offset (header + 4 pad bytes)
    struct.pack_into("<f", header, 112, 0.0)  # scl_slope: no scaling
    struct.pack_into("<f", header, 116, 0.0)
    header[344:348] = b"n+1\x00"

    payload = np.ascontiguousarray(data.transpose(2, 1, 0)).tobytes()  # x-fastest on disk
    blob = bytes(header) + b"\x00\x00\x00\x00" + payload
    if path.name.lower().endswith(".gz"):
        # fixed mtime and no embedded filename: identical volumes, identical bytes
        with path.open("wb") as raw:
            with gzip.GzipFile(filename="", fileobj=raw, mode="wb", mtime=0) as fh:
                fh.write(blob)
    else:
        path.write_bytes(blob)
    return path
