"""NIfTI-1 reader/writer producing VoxelGrid/LabelMask values.

Implements the published 348-byte header layout directly (no third-party
imaging dependency), for `.nii` and `.nii.gz` single files plus read-only
support for `.hdr`/`.img` pairs. Byte order is auto-detected from the
``sizeof_hdr`` field; gzip compression from the ``0x1f 0x8b`` prefix.

Affine precedence on read: sform (sform_code > 0), then qform
(qform_code > 0), then a diagonal built from pixdim. Values are
materialized as float64 after scl_slope/scl_inter scaling; masks
binarize as value > 0.5.
"""

from __future__ import annotations

import gzip
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BadHeader, BadMagic, TruncatedData, UnsupportedDatatype
from .volcore import LabelMask, VoxelGrid

HEADER_SIZE = 348
SINGLE_FILE_VOX_OFFSET = 352

# field name, dtype, offset — exactly the nifti1.h struct
_HEADER_FIELDS = [
    ("sizeof_hdr", "i4"),
    ("data_type", "S10"),
    ("db_name", "S18"),
    ("extents", "i4"),
    ("session_error", "i2"),
    ("regular", "S1"),
    ("dim_info", "u1"),
    ("dim", "i2", (8,)),
    ("intent_p1", "f4"),
    ("intent_p2", "f4"),
    ("intent_p3", "f4"),
    ("intent_code", "i2"),
    ("datatype", "i2"),
    ("bitpix", "i2"),
    ("slice_start", "i2"),
    ("pixdim", "f4", (8,)),
    ("vox_offset", "f4"),
    ("scl_slope", "f4"),
    ("scl_inter", "f4"),
    ("slice_end", "i2"),
    ("slice_code", "u1"),
    ("xyzt_units", "u1"),
    ("cal_max", "f4"),
    ("cal_min", "f4"),
    ("slice_duration", "f4"),
    ("toffset", "f4"),
    ("glmax", "i4"),
    ("glmin", "i4"),
    ("descrip", "S80"),
    ("aux_file", "S24"),
    ("qform_code", "i2"),
    ("sform_code", "i2"),
    ("quatern_b", "f4"),
    ("quatern_c", "f4"),
    ("quatern_d", "f4"),
    ("qoffset_x", "f4"),
    ("qoffset_y", "f4"),
    ("qoffset_z", "f4"),
    ("srow_x", "f4", (4,)),
    ("srow_y", "f4", (4,)),
    ("srow_z", "f4", (4,)),
    ("intent_name", "S16"),
    ("magic", "S4"),
]

DTYPE_CODES = {2: np.uint8, 4: np.int16, 8: np.int32, 16: np.float32, 64: np.float64}
_CODE_FOR_DTYPE = {np.dtype(v): k for k, v in DTYPE_CODES.items()}
_BITPIX = {2: 8, 4: 16, 8: 32, 16: 32, 64: 64}

_MAGIC_SINGLE = b"n+1"
_MAGIC_PAIR = b"ni1"


def _header_dtype(byteorder: str) -> np.dtype:
    return np.dtype([(f[0], byteorder + f[1], *f[2:]) for f in _HEADER_FIELDS])


@dataclass(frozen=True)
class NiftiHeader:
    """Decoded header fields, plus the raw record for audits."""

    sizeof_hdr: int
    dim: tuple[int, ...]
    datatype: int
    pixdim: tuple[float, ...]
    vox_offset: float
    scl_slope: float
    scl_inter: float
    qform_code: int
    sform_code: int
    quatern: tuple[float, float, float]
    qoffset: tuple[float, float, float]
    srow_x: tuple[float, float, float, float]
    srow_y: tuple[float, float, float, float]
    srow_z: tuple[float, float, float, float]
    magic: bytes
    byteorder: str  # '<' or '>'

    @classmethod
    def from_record(cls, rec: np.void, byteorder: str) -> "NiftiHeader":
        return cls(
            sizeof_hdr=int(rec["sizeof_hdr"]),
            dim=tuple(int(v) for v in rec["dim"]),
            datatype=int(rec["datatype"]),
            pixdim=tuple(float(v) for v in rec["pixdim"]),
            vox_offset=float(rec["vox_offset"]),
            scl_slope=float(rec["scl_slope"]),
            scl_inter=float(rec["scl_inter"]),
            qform_code=int(rec["qform_code"]),
            sform_code=int(rec["sform_code"]),
            quatern=(float(rec["quatern_b"]), float(rec["quatern_c"]), float(rec["quatern_d"])),
            qoffset=(float(rec["qoffset_x"]), float(rec["qoffset_y"]), float(rec["qoffset_z"])),
            srow_x=tuple(float(v) for v in rec["srow_x"]),
            srow_y=tuple(float(v) for v in rec["srow_y"]),
            srow_z=tuple(float(v) for v in rec["srow_z"]),
            magic=bytes(rec["magic"]),
            byteorder=byteorder,
        )


def _maybe_decompress(buf: bytes) -> bytes:
    if buf[:2] == b"\x1f\x8b":
        return gzip.decompress(buf)
    return buf


def _parse_header(buf: bytes) -> tuple[np.void, str]:
    if len(buf) < HEADER_SIZE:
        raise BadHeader(f"stream has {len(buf)} bytes, header needs {HEADER_SIZE}")
    for byteorder in ("<", ">"):
        size = int(np.frombuffer(buf, dtype=byteorder + "i4", count=1)[0])
        if size == HEADER_SIZE:
            rec = np.frombuffer(buf, dtype=_header_dtype(byteorder), count=1)[0]
            return rec, byteorder
    raise BadHeader("sizeof_hdr is not 348 under either byte order")


def _qform_affine(rec: np.void) -> np.ndarray:
    b, c, d = (float(rec["quatern_b"]), float(rec["quatern_c"]), float(rec["quatern_d"]))
    a = np.sqrt(max(0.0, 1.0 - (b * b + c * c + d * d)))
    rot = np.array(
        [
            [a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)],
            [2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b)],
            [2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - b * b - c * c],
        ],
        dtype=np.float64,
    )
    pix = np.array(rec["pixdim"], dtype=np.float64)
    qfac = -1.0 if pix[0] < 0 else 1.0
    scale = np.array([_positive(pix[1]), _positive(pix[2]), qfac * _positive(pix[3])])
    affine = np.eye(4)
    affine[:3, :3] = rot * scale  # scale columns
    affine[:3, 3] = [float(rec["qoffset_x"]), float(rec["qoffset_y"]), float(rec["qoffset_z"])]
    return affine


def _positive(v: float) -> float:
    # sloppy files carry 0 pixdims; treat as unit spacing
    return float(v) if v > 0 else 1.0


def _affine_from_record(rec: np.void) -> np.ndarray:
    if int(rec["sform_code"]) > 0:
        affine = np.eye(4)
        affine[0, :] = np.asarray(rec["srow_x"], dtype=np.float64)
        affine[1, :] = np.asarray(rec["srow_y"], dtype=np.float64)
        affine[2, :] = np.asarray(rec["srow_z"], dtype=np.float64)
        norms = np.linalg.norm(affine[:3, :3], axis=0)
        if np.any(norms <= 0):
            raise BadHeader("sform affine has a zero-length column")
        return affine
    if int(rec["qform_code"]) > 0:
        return _qform_affine(rec)
    pix = np.asarray(rec["pixdim"], dtype=np.float64)
    return np.diag([_positive(pix[1]), _positive(pix[2]), _positive(pix[3]), 1.0])


def read_nifti(source: bytes | str | Path) -> tuple[VoxelGrid, NiftiHeader]:
    """Decode a NIfTI-1 stream or file into a VoxelGrid plus its header.

    Accepts raw bytes, `.nii`, `.nii.gz`, or a `.hdr` of a header/image
    pair (the matching `.img` is read from the same directory).

    Raises:
        BadHeader, BadMagic, UnsupportedDatatype, TruncatedData
    """
    path: Path | None = None
    if isinstance(source, (str, Path)):
        path = Path(source)
        buf = _maybe_decompress(path.read_bytes())
    else:
        buf = _maybe_decompress(bytes(source))

    rec, byteorder = _parse_header(buf)
    header = NiftiHeader.from_record(rec, byteorder)

    magic = bytes(rec["magic"])
    if magic not in (_MAGIC_SINGLE, _MAGIC_PAIR):
        raise BadMagic(f"magic {magic!r} is neither 'n+1' nor 'ni1'")

    code = int(rec["datatype"])
    if code not in DTYPE_CODES:
        raise UnsupportedDatatype(f"datatype code {code} not in {sorted(DTYPE_CODES)}")
    dtype = np.dtype(DTYPE_CODES[code]).newbyteorder(byteorder)

    dim = rec["dim"]
    ndim = int(dim[0])
    if ndim not in (3, 4):
        raise BadHeader(f"dim[0] must be 3 or 4, got {ndim}")
    dims = tuple(int(dim[i]) for i in (1, 2, 3))
    if any(d < 1 for d in dims):
        raise BadHeader(f"spatial dims must be >= 1, got {dims}")
    if ndim == 4 and int(dim[4]) != 1:
        raise BadHeader(f"4D input must have a singleton 4th axis, got dim[4]={int(dim[4])}")

    nvox = dims[0] * dims[1] * dims[2]
    if magic == _MAGIC_SINGLE:
        offset = int(rec["vox_offset"])
        if offset < HEADER_SIZE:
            raise BadHeader(f"single-file vox_offset {offset} < {HEADER_SIZE}")
        payload = buf
    else:
        if path is None:
            raise TruncatedData("header/image pair given as bytes; read via path so the .img can be found")
        img_path = path.with_suffix(".img")
        if not img_path.exists() and path.suffix == ".gz":
            img_path = path.with_name(path.name[: -len(".hdr.gz")] + ".img")
        if not img_path.exists():
            raise TruncatedData(f"image file {img_path} not found for header pair")
        payload = _maybe_decompress(img_path.read_bytes())
        offset = int(rec["vox_offset"])

    if len(payload) - offset < nvox * dtype.itemsize:
        raise TruncatedData(
            f"need {nvox * dtype.itemsize} data bytes at offset {offset}, "
            f"stream has {max(0, len(payload) - offset)}"
        )
    raw = np.frombuffer(payload, dtype=dtype, count=nvox, offset=offset)

    values = raw.astype(np.float64)
    slope, inter = float(rec["scl_slope"]), float(rec["scl_inter"])
    if slope != 0.0 and (slope, inter) != (1.0, 0.0):
        values = values * slope + inter

    affine = _affine_from_record(rec)
    spacing = tuple(float(s) for s in np.linalg.norm(affine[:3, :3], axis=0))
    grid = VoxelGrid.from_flat(dims, spacing, values, affine=affine)
    return grid, header


def read_mask(source: bytes | str | Path) -> LabelMask:
    """Read a NIfTI file as a binary mask (foreground where value > 0.5)."""
    grid, _ = read_nifti(source)
    vox = (grid.data > 0.5).astype(np.uint8)
    return LabelMask(grid, vox)


def _resolve_datatype(datatype) -> int:
    if isinstance(datatype, (int, np.integer)):
        if int(datatype) not in DTYPE_CODES:
            raise UnsupportedDatatype(f"datatype code {datatype} not in {sorted(DTYPE_CODES)}")
        return int(datatype)
    try:
        dt = np.dtype(datatype)
    except TypeError as exc:
        raise UnsupportedDatatype(f"cannot interpret {datatype!r} as a dtype") from exc
    if dt not in _CODE_FOR_DTYPE:
        raise UnsupportedDatatype(f"dtype {dt} has no supported NIfTI code")
    return _CODE_FOR_DTYPE[dt]


def write_nifti(grid: VoxelGrid, datatype=16, compressed: bool = False) -> bytes:
    """Encode a grid as a single-file NIfTI-1 byte stream.

    Little-endian, magic 'n+1', vox_offset 352, sform_code 1 carrying the
    grid affine, pixdim carrying the spacing. ``datatype`` is a NIfTI
    code or anything ``np.dtype`` accepts.
    """
    code = _resolve_datatype(datatype)
    dtype = np.dtype(DTYPE_CODES[code]).newbyteorder("<")

    rec = np.zeros((), dtype=_header_dtype("<"))
    rec["sizeof_hdr"] = HEADER_SIZE
    rec["regular"] = b"r"
    rec["dim"] = [3, *grid.dims, 1, 1, 1, 1]
    rec["datatype"] = code
    rec["bitpix"] = _BITPIX[code]
    rec["pixdim"] = [1.0, *grid.spacing, 0, 0, 0, 0]
    rec["vox_offset"] = SINGLE_FILE_VOX_OFFSET
    rec["scl_slope"] = 1.0
    rec["scl_inter"] = 0.0
    rec["sform_code"] = 1
    rec["qform_code"] = 0
    rec["srow_x"] = grid.affine[0, :]
    rec["srow_y"] = grid.affine[1, :]
    rec["srow_z"] = grid.affine[2, :]
    rec["magic"] = _MAGIC_SINGLE + b"\x00"

    payload = np.ascontiguousarray(grid.flat().astype(dtype)).tobytes()
    # 4 zero bytes after the header: "no extensions" indicator
    out = rec.tobytes() + b"\x00\x00\x00\x00" + payload
    if compressed:
        out = gzip.compress(out, mtime=0)
    return out


def write_mask(mask: LabelMask, compressed: bool = False) -> bytes:
    """Encode a mask as uint8 NIfTI-1 bytes."""
    grid = mask.grid.with_data(mask.voxels.astype(np.float64))
    return write_nifti(grid, datatype=2, compressed=compressed)


def save_nifti(grid: VoxelGrid, path: str | Path, datatype=16) -> None:
    """Write a grid to disk; compression follows the .gz extension."""
    path = Path(path)
    path.write_bytes(write_nifti(grid, datatype, compressed=path.suffix == ".gz"))


def save_mask(mask: LabelMask, path: str | Path) -> None:
    path = Path(path)
    path.write_bytes(write_mask(mask, compressed=path.suffix == ".gz"))
