"""Volumetric segmentation toolkit.

Data model (volcore), NIfTI-1 I/O (niftio), per-case metrics
(segmetrics), observer agreement and volume regression (agreement), a
toy 3D segmentation network (segnet), cohort evaluation and reporting
(cohort), plus a CLI (cli) and HTTP service (service).
"""

from . import agreement, cohort, niftio, segmetrics, segnet, volcore
from ._kernels import available_backends, get_backend, set_backend
from .volcore import LabelMask, SegmentationPair, VoxelGrid

__version__ = "0.1.0"

__all__ = [
    "LabelMask",
    "SegmentationPair",
    "VoxelGrid",
    "agreement",
    "available_backends",
    "cohort",
    "get_backend",
    "niftio",
    "segmetrics",
    "segnet",
    "set_backend",
    "volcore",
    "__version__",
]
