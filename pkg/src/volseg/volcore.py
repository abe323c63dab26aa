"""Volumetric data model: scalar grids, binary masks, physical geometry.

Conventions used throughout the package:

* A volume is indexed ``[x, y, z]``; the flat serialization order is
  x-fastest (NumPy Fortran order), which is also the NIfTI voxel order,
  so file I/O never reshuffles memory.
* ``spacing`` is millimetres per voxel along each axis and must agree
  with the Euclidean norms of the affine's first three columns.
* Surface adjacency is 6-connected and out-of-bounds counts as
  background, so organs touching the image edge still have a surface.

All types are immutable after construction (arrays are frozen with
``writeable = False``) and every operation is pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyMask, GeometryMismatch

_SPACING_RTOL = 1e-6


def _frozen(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr)
    if out is arr and arr.flags.writeable:
        out = arr.copy()
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class VoxelGrid:
    """A 3D scalar volume with physical spacing and a voxel->mm affine.

    ``data`` has shape ``dims`` and is indexed ``[x, y, z]``.
    """

    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]
    affine: np.ndarray
    data: np.ndarray

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        spacing = tuple(float(s) for s in self.spacing)
        if len(dims) != 3 or any(d < 1 for d in dims):
            raise ValueError(f"dims must be 3 positive integers, got {self.dims}")
        if len(spacing) != 3 or any(s <= 0 for s in spacing):
            raise ValueError(f"spacing must be 3 positive reals, got {self.spacing}")
        affine = np.asarray(self.affine, dtype=np.float64)
        if affine.shape != (4, 4):
            raise ValueError(f"affine must be 4x4, got shape {affine.shape}")
        data = np.asarray(self.data, dtype=np.float64)
        if data.size != dims[0] * dims[1] * dims[2]:
            raise ValueError(
                f"data has {data.size} values, dims {dims} require "
                f"{dims[0] * dims[1] * dims[2]}"
            )
        if data.ndim == 1:
            data = data.reshape(dims, order="F")
        elif data.shape != dims:
            raise ValueError(f"data shape {data.shape} does not match dims {dims}")
        col_norms = np.linalg.norm(affine[:3, :3], axis=0)
        if not np.allclose(col_norms, spacing, rtol=_SPACING_RTOL, atol=0.0):
            raise ValueError(
                f"spacing {spacing} inconsistent with affine column norms {col_norms}"
            )
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "affine", _frozen(affine))
        object.__setattr__(self, "data", _frozen(np.ascontiguousarray(data)))

    @classmethod
    def from_flat(cls, dims, spacing, data, affine=None) -> "VoxelGrid":
        """Build a grid from a flat x-fastest value stream.

        Without an explicit affine, a diagonal one is derived from spacing.
        """
        if affine is None:
            affine = np.diag([*spacing, 1.0])
        data = np.asarray(data, dtype=np.float64).reshape(tuple(dims), order="F")
        return cls(tuple(dims), tuple(spacing), affine, data)

    def flat(self) -> np.ndarray:
        """Values in the canonical x-fastest order."""
        return self.data.ravel(order="F")

    def with_data(self, data: np.ndarray) -> "VoxelGrid":
        """Same geometry, new values."""
        return VoxelGrid(self.dims, self.spacing, self.affine, data)


@dataclass(frozen=True)
class LabelMask:
    """Binary foreground mask sharing a VoxelGrid's lattice."""

    grid: VoxelGrid
    voxels: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        vox = np.asarray(self.voxels)
        if vox.ndim == 1:
            vox = vox.reshape(self.grid.dims, order="F")
        if vox.shape != self.grid.dims:
            raise GeometryMismatch(
                f"mask shape {vox.shape} does not match grid dims {self.grid.dims}"
            )
        vox = np.ascontiguousarray(vox)
        if not np.isin(vox, (0, 1)).all():
            bad = np.unique(vox[~np.isin(vox, (0, 1))])
            raise ValueError(f"mask values must be 0 or 1, found {bad[:5]}")
        object.__setattr__(self, "voxels", _frozen(vox.astype(np.uint8)))

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.grid.dims

    @property
    def spacing(self) -> tuple[float, float, float]:
        return self.grid.spacing

    def flat(self) -> np.ndarray:
        return self.voxels.ravel(order="F")


@dataclass(frozen=True)
class SegmentationPair:
    """A prediction mask and its reference on the same lattice."""

    prediction: LabelMask
    reference: LabelMask

    def __post_init__(self):
        p, r = self.prediction, self.reference
        if p.dims != r.dims or not np.allclose(p.spacing, r.spacing, rtol=_SPACING_RTOL):
            raise GeometryMismatch(
                f"prediction {p.dims}/{p.spacing} vs reference {r.dims}/{r.spacing}"
            )


def require_same_geometry(a: LabelMask, b: LabelMask) -> None:
    if a.dims != b.dims or not np.allclose(a.spacing, b.spacing, rtol=_SPACING_RTOL):
        raise GeometryMismatch(f"{a.dims}/{a.spacing} vs {b.dims}/{b.spacing}")


def voxel_volume_ml(grid: VoxelGrid) -> float:
    """Physical volume of one voxel in millilitres (1 mm^3 = 0.001 mL)."""
    sx, sy, sz = grid.spacing
    return sx * sy * sz / 1000.0


def mask_count(mask: LabelMask) -> int:
    """Number of foreground voxels."""
    return int(mask.voxels.sum(dtype=np.int64))


def surface_voxels(mask: LabelMask) -> np.ndarray:
    """Indices of foreground voxels with a 6-connected background neighbor.

    Out-of-bounds neighbors count as background, so voxels on the image
    edge are surface. Returns an (n, 3) int array in lexicographic
    (x, y, z) order; the row set is the contract, the order a convenience.

    Raises:
        EmptyMask: if the mask has no foreground voxels.
    """
    from ._kernels import get_backend

    if not mask.voxels.any():
        raise EmptyMask("cannot extract the surface of an empty mask")
    surf = get_backend().surface_mask(mask.voxels)
    return np.argwhere(surf)
