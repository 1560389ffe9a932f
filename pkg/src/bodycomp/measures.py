"""The four body-composition metrics in 2D and 3D.

All measurements run on the merged mask: the muscular-fat policy is
applied before anything is counted. Areas are cm² (pixel area sx*sy/100),
volumes cm³ (voxel volume sx*sy*sz/1000), densities are mean HU.
"""

from __future__ import annotations

import numpy as np

from .errors import EmptyRegionError, UndefinedRatioError
from .model import (
    SAT,
    SKELETAL_MUSCLE,
    VAT,
    BodyCompResult,
    LabelVolume,
    MergePolicy,
    SubjectRecord,
    VoxelVolume,
    apply_merge_policy,
    require_hu,
    require_same_geometry,
    vertebra_label,
)
from .regions import (
    AllSlices,
    MeasurementRegion,
    SingleSlice,
    SliceRange,
    largest_label_slice,
    region_slice,
    region_t12_l4,
)


def _binary_in(mask: LabelVolume, label_name: str, sl: slice) -> np.ndarray:
    # binarize only the region slab; full-volume scans are wasteful on
    # CT-sized grids
    codes = mask.codes_for(label_name)
    region_codes = mask.codes[sl]
    if len(codes) == 1:
        return region_codes == codes[0]
    return np.isin(region_codes, codes)


def muscle_density(
    hu: VoxelVolume,
    mask: LabelVolume,
    region: MeasurementRegion,
    policy: MergePolicy = MergePolicy.MUSCLE,
) -> float:
    """Mean HU over skeletal-muscle voxels (post-policy) within the region."""
    require_hu(hu)
    require_same_geometry(hu, mask)
    merged = apply_merge_policy(mask, policy)
    sl = region_slice(region, mask.nz)
    selected = _binary_in(merged, SKELETAL_MUSCLE, sl)
    vals = hu.values[sl][selected]
    if vals.size == 0:
        raise EmptyRegionError("no skeletal-muscle voxels in the requested region")
    return float(vals.mean(dtype=np.float64))


def tissue_area_2d(mask: LabelVolume, label_name: str, slice_z: int) -> float:
    """Cross-sectional area of a label on one slice, in cm²."""
    sl = region_slice(SingleSlice(slice_z), mask.nz)
    count = np.count_nonzero(_binary_in(mask, label_name, sl))
    return count * mask.pixel_area_cm2


def slice_thickness_mm(geometry) -> np.ndarray:
    """Per-slice thickness in mm.

    Uniform spacing uses sz everywhere. With per-slice z positions the
    thickness is the midpoint-to-midpoint step; end slices use their
    single adjacent step.
    """
    nz = geometry.nz
    sz = geometry.spacing_mm[2]
    if geometry.z_positions_mm is None or nz == 1:
        return np.full(nz, sz, dtype=float)
    pos = np.asarray(geometry.z_positions_mm, dtype=float)
    steps = np.abs(np.diff(pos))
    thickness = np.empty(nz, dtype=float)
    thickness[0] = steps[0]
    thickness[-1] = steps[-1]
    thickness[1:-1] = (steps[:-1] + steps[1:]) / 2.0
    return thickness


def tissue_volume_3d(
    mask: LabelVolume, label_name: str, region: SliceRange | AllSlices
) -> float:
    """Volume of a label over a slice range, in cm³.

    Uniform spacing: voxel count times sx*sy*sz/1000. With per-slice z
    positions each slice contributes its local thickness instead.
    """
    sl = region_slice(region, mask.nz)
    binary = _binary_in(mask, label_name, sl)
    if mask.z_positions_mm is None:
        return int(np.count_nonzero(binary)) * mask.voxel_volume_cm3
    counts = np.count_nonzero(binary.reshape(binary.shape[0], -1), axis=1)
    sx, sy, _ = mask.spacing_mm
    thickness = slice_thickness_mm(mask)[sl]
    return float(np.sum(counts * thickness) * sx * sy / 1000.0)


def _tissue_measure(mask: LabelVolume, label_name: str, region: MeasurementRegion):
    if isinstance(region, SingleSlice):
        return tissue_area_2d(mask, label_name, region.z)
    return tissue_volume_3d(mask, label_name, region)


def vat_sat_ratio(
    mask: LabelVolume,
    region: MeasurementRegion,
    policy: MergePolicy = MergePolicy.MUSCLE,
) -> float:
    """VAT measure divided by SAT measure within the region (post-policy).

    Uses areas for a single-slice region and volumes otherwise. A zero
    SAT measure raises UndefinedRatioError; zero VAT yields 0.0.
    """
    merged = apply_merge_policy(mask, policy)
    sat = _tissue_measure(merged, SAT, region)
    if sat == 0:
        raise UndefinedRatioError("SAT measure is zero in the requested region")
    vat = _tissue_measure(merged, VAT, region)
    return vat / sat


def smi(area_cm2: float, height_m: float) -> float:
    """Skeletal muscle index: area normalized by height squared (cm²/m²)."""
    if not height_m > 0:
        raise ValueError(f"height_m must be > 0, got {height_m}")
    return area_cm2 / (height_m * height_m)


def measure_subject(
    hu: VoxelVolume,
    tissue_mask: LabelVolume,
    vertebra_mask: LabelVolume,
    subject: SubjectRecord,
    policy: MergePolicy = MergePolicy.MUSCLE,
) -> BodyCompResult:
    """Compute all metrics for one subject.

    2D metrics are measured on the largest-L3 slice, 3D metrics over the
    T12-L4 range. SMI is omitted when the subject's height is unknown;
    no 3D SMI is computed.
    """
    require_hu(hu)
    require_same_geometry(hu, tissue_mask)
    require_same_geometry(hu, vertebra_mask)

    l3 = largest_label_slice(vertebra_mask, vertebra_label("L3"))
    region_2d = SingleSlice(l3)
    region_3d = region_t12_l4(vertebra_mask)

    merged = apply_merge_policy(tissue_mask, policy)
    # pass SEPARATE below: the mask is already merged, avoid re-merging
    done = MergePolicy.SEPARATE
    area_2d = tissue_area_2d(merged, SKELETAL_MUSCLE, l3)
    result = BodyCompResult(
        subject_id=subject.subject_id,
        policy=policy,
        region_2d=l3,
        region_3d=(region_3d.z_lo, region_3d.z_hi),
        muscle_density_2d=muscle_density(hu, merged, region_2d, done),
        muscle_density_3d=muscle_density(hu, merged, region_3d, done),
        vat_sat_ratio_2d=vat_sat_ratio(merged, region_2d, done),
        vat_sat_ratio_3d=vat_sat_ratio(merged, region_3d, done),
        muscle_area_2d=area_2d,
        muscle_volume_3d=tissue_volume_3d(merged, SKELETAL_MUSCLE, region_3d),
        smi_2d=smi(area_2d, subject.height_m) if subject.height_m is not None else None,
    )
    return result
