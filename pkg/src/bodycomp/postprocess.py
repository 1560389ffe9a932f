"""Slice-wise mask post-processing.

``dilate_sat_to_skin`` grows the SAT label into the skin rim: one pass of
a 5x5 square dilation per axial slice, adding only pixels that are still
background and brighter than -800 HU (the body/air boundary). Existing
labels are never overwritten.

``muscular_fat_candidates`` marks fat inside a region of interest: pixels
with HU in [-220, -50], kept only when their 8-connected in-plane
component has at least 7 pixels (more than six).
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np
from scipy import ndimage

from .model import (
    BACKGROUND,
    MUSCULAR_FAT,
    SAT,
    LabelVolume,
    VoxelVolume,
    require_hu,
    require_same_geometry,
)

SKIN_HU_THRESHOLD = -800.0
SAT_DILATION_SIZE = 5

MF_HU_RANGE = (-220.0, -50.0)
MF_MIN_PIXELS = 7

_SQUARE_5 = np.ones((SAT_DILATION_SIZE, SAT_DILATION_SIZE), dtype=bool)
_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


def dilate_sat_to_skin(mask: LabelVolume, hu: VoxelVolume) -> LabelVolume:
    """Grow SAT into adjacent unlabeled skin pixels, slice by slice.

    A pixel is added iff it lies in the 5x5 dilation of the slice's SAT
    mask, is currently background, and has HU above -800. The output SAT
    is a superset of the input SAT; no other label changes.
    """
    require_hu(hu)
    require_same_geometry(mask, hu)
    sat_code = min(mask.codes_for(SAT))
    sat_all = mask.binary(SAT)
    out = mask.codes.copy()
    for k in range(mask.nz):
        sat = sat_all[k]
        if not sat.any():
            continue
        grown = ndimage.binary_dilation(sat, structure=_SQUARE_5)
        add = grown & (mask.codes[k] == 0) & (hu.values[k] > SKIN_HU_THRESHOLD)
        if add.any():
            out[k][add] = sat_code
    return replace(mask, codes=out)


def muscular_fat_candidates(
    hu: VoxelVolume,
    roi_mask: LabelVolume,
    hu_range: tuple[float, float] = MF_HU_RANGE,
    min_pixels: int = MF_MIN_PIXELS,
) -> LabelVolume:
    """Binary mask of muscular-fat candidates inside the ROI.

    Per axial slice: threshold HU to ``hu_range`` (inclusive) within the
    nonzero voxels of ``roi_mask``, label 8-connected components, and
    retain components of at least ``min_pixels`` pixels.
    """
    require_hu(hu)
    require_same_geometry(hu, roi_mask)
    lo, hi = hu_range
    roi = roi_mask.codes != 0
    out = np.zeros(hu.values.shape, dtype=np.uint8)
    for k in range(hu.nz):
        candidates = roi[k] & (hu.values[k] >= lo) & (hu.values[k] <= hi)
        if not candidates.any():
            continue
        labeled, n = ndimage.label(candidates, structure=_EIGHT_CONNECTED)
        if n == 0:
            continue
        # count only foreground pixels; full-slice bincount is slow on
        # some numpy builds
        sizes = np.bincount(labeled[candidates], minlength=n + 1)
        keep = sizes >= min_pixels
        keep[0] = False
        out[k][keep[labeled]] = 1
    return LabelVolume(
        codes=out,
        label_map={0: BACKGROUND, 1: MUSCULAR_FAT},
        spacing_mm=hu.spacing_mm,
        z_positions_mm=hu.z_positions_mm,
        subject_id=roi_mask.subject_id,
    )
