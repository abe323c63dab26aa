"""Shared fixtures-building helpers and independent brute-force oracles.

The oracles here deliberately re-derive everything from first
principles (explicit loops, full distance matrices, hand-rolled order
statistics) so they share no code path with the implementations they
check.
"""

from __future__ import annotations

import struct

import numpy as np

from volseg.volcore import LabelMask, SegmentationPair, VoxelGrid


def make_grid(dims, spacing=(1.0, 1.0, 1.0), data=None) -> VoxelGrid:
    if data is None:
        data = np.zeros(dims)
    return VoxelGrid(tuple(dims), tuple(spacing), np.diag([*spacing, 1.0]), np.asarray(data, float))


def make_mask(vox: np.ndarray, spacing=(1.0, 1.0, 1.0)) -> LabelMask:
    vox = np.asarray(vox)
    grid = make_grid(vox.shape, spacing)
    return LabelMask(grid, vox.astype(np.uint8))


def mask_from_flat_indices(dims, indices, spacing=(1.0, 1.0, 1.0)) -> LabelMask:
    """Foreground at the given flat x-fastest indices."""
    flat = np.zeros(int(np.prod(dims)), dtype=np.uint8)
    flat[list(indices)] = 1
    return make_mask(flat.reshape(dims, order="F"), spacing)


def random_blob_mask(rng: np.random.Generator, dims, spacing=(1.0, 1.0, 1.0),
                     n_blobs=2, max_radius=4.0) -> LabelMask:
    """Union of a few random balls; may be empty for small dims."""
    vox = np.zeros(dims, dtype=np.uint8)
    coords = np.indices(dims).astype(float)
    for _ in range(n_blobs):
        center = [rng.uniform(0, d - 1) for d in dims]
        radius = rng.uniform(1.0, max_radius)
        dist2 = sum((coords[i] - center[i]) ** 2 for i in range(3))
        vox |= (dist2 <= radius * radius).astype(np.uint8)
    return make_mask(vox, spacing)


def random_pair(rng: np.random.Generator, max_dim=20) -> SegmentationPair:
    dims = tuple(int(rng.integers(4, max_dim + 1)) for _ in range(3))
    spacing = tuple(float(rng.uniform(0.5, 4.0)) for _ in range(3))
    pred = random_blob_mask(rng, dims, spacing)
    ref = random_blob_mask(rng, dims, spacing)
    return SegmentationPair(prediction=pred, reference=ref)


# --- hand-assembled NIfTI-1 bytes ---------------------------------------------

def build_nifti_header(
    order="<",
    dim=(3, 2, 2, 2, 1, 1, 1, 1),
    datatype=16,
    bitpix=32,
    pixdim=(1, 1, 1, 1, 0, 0, 0, 0),
    vox_offset=352.0,
    scl_slope=0.0,
    scl_inter=0.0,
    qform_code=0,
    sform_code=0,
    quatern=(0.0, 0.0, 0.0),
    qoffset=(0.0, 0.0, 0.0),
    srows=None,
    magic=b"n+1\x00",
    sizeof_hdr=348,
):
    """348 header bytes assembled field-by-field from the published offsets,
    independently of the package's writer."""
    buf = bytearray(348)

    def put(fmt, offset, *values):
        struct.pack_into(order + fmt, buf, offset, *values)

    put("i", 0, sizeof_hdr)
    put("8h", 40, *dim)
    put("h", 70, datatype)
    put("h", 72, bitpix)
    put("8f", 76, *pixdim)
    put("f", 108, vox_offset)
    put("f", 112, scl_slope)
    put("f", 116, scl_inter)
    put("h", 252, qform_code)
    put("h", 254, sform_code)
    put("3f", 256, *quatern)
    put("3f", 268, *qoffset)
    if srows is not None:
        put("4f", 280, *srows[0])
        put("4f", 296, *srows[1])
        put("4f", 312, *srows[2])
    struct.pack_into("4s", buf, 344, magic)
    return bytes(buf)


def build_nifti_file(order="<", values=range(8), value_fmt="f", pad=b"\x00" * 4, **kwargs):
    header = build_nifti_header(order=order, **kwargs)
    payload = b"".join(struct.pack(order + value_fmt, v) for v in values)
    return header + pad + payload


# --- independent oracles ------------------------------------------------------

def confusion_oracle(pred: LabelMask, ref: LabelMask) -> tuple[int, int, int, int]:
    """Voxel-by-voxel counting with a plain Python loop."""
    tp = fp = fn = tn = 0
    for p, r in zip(pred.flat().tolist(), ref.flat().tolist()):
        if p and r:
            tp += 1
        elif p:
            fp += 1
        elif r:
            fn += 1
        else:
            tn += 1
    return tp, fp, fn, tn


def surface_oracle(mask: LabelMask) -> set[tuple[int, int, int]]:
    """Per-voxel 6-neighbor check, out of bounds = background."""
    vox = mask.voxels
    nx, ny, nz = vox.shape
    out = set()
    for x in range(nx):
        for y in range(ny):
            for z in range(nz):
                if not vox[x, y, z]:
                    continue
                for dx, dy, dz in ((1, 0, 0), (-1, 0, 0), (0, 1, 0),
                                   (0, -1, 0), (0, 0, 1), (0, 0, -1)):
                    ax, ay, az = x + dx, y + dy, z + dz
                    if not (0 <= ax < nx and 0 <= ay < ny and 0 <= az < nz):
                        out.add((x, y, z))
                        break
                    if not vox[ax, ay, az]:
                        out.add((x, y, z))
                        break
    return out


def _percentile_oracle(values: np.ndarray, q: float) -> float:
    v = sorted(float(x) for x in values)
    n = len(v)
    if n == 1:
        return v[0]
    rank = (q / 100.0) * (n - 1)
    lower = int(rank)
    upper = min(lower + 1, n - 1)
    weight = rank - lower
    return v[lower] * (1.0 - weight) + v[upper] * weight


def hd95_oracle(pair: SegmentationPair) -> float:
    """All-pairs surface distances, directed 95th percentiles, max."""
    a = np.array(sorted(surface_oracle(pair.prediction)), dtype=float)
    b = np.array(sorted(surface_oracle(pair.reference)), dtype=float)
    sp = np.asarray(pair.prediction.spacing)
    a_mm = a * sp
    b_mm = b * sp
    dmat = np.sqrt(((a_mm[:, None, :] - b_mm[None, :, :]) ** 2).sum(axis=2))
    d_ab = _percentile_oracle(dmat.min(axis=1), 95.0)
    d_ba = _percentile_oracle(dmat.min(axis=0), 95.0)
    return max(d_ab, d_ba)
