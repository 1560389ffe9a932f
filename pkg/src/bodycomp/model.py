"""Domain types, unit conventions, HU conversion, and the muscular-fat merge.

Array convention: volumes are stored as C-contiguous numpy arrays indexed
``[z, y, x]`` so that x is the fastest-varying axis in memory and
``values[k]`` is the axial slice at index ``k``. ``dims`` is reported in
``(nx, ny, nz)`` order, matching the on-disk header convention.

All types are immutable after construction (arrays are frozen in place),
so instances can be shared read-only across parallel workers.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Mapping

import numpy as np

from .errors import (
    GeometryMismatchError,
    LabelVocabularyError,
    UnitStateError,
)

# Canonical tissue label names.
BACKGROUND = "background"
SKELETAL_MUSCLE = "skeletal_muscle"
SAT = "sat"
VAT = "vat"
MUSCULAR_FAT = "muscular_fat"
TISSUE_NAMES = (SKELETAL_MUSCLE, SAT, VAT, MUSCULAR_FAT)

VERTEBRA_PREFIX = "vertebrae_"


def default_tissue_label_map() -> dict[int, str]:
    """Label map used by tissue masks produced in this package."""
    return {0: BACKGROUND, 1: SKELETAL_MUSCLE, 2: SAT, 3: VAT, 4: MUSCULAR_FAT}


def vertebra_label(level: str) -> str:
    """Map a vertebra level like ``"L3"`` to its label name ``"vertebrae_L3"``."""
    if level.startswith(VERTEBRA_PREFIX):
        return level
    return VERTEBRA_PREFIX + level


class UnitState(Enum):
    RAW = "raw"
    HU = "hu"


class MergePolicy(Enum):
    """Where muscular-fat voxels are counted before any measurement.

    ``MUSCLE`` is the default: muscular fat is evaluated as part of the
    skeletal-muscle compartment. ``SAT``/``VAT`` fold it into the
    respective fat label, ``SEPARATE`` leaves it as its own label.
    """

    MUSCLE = "muscle"
    SAT = "sat"
    VAT = "vat"
    SEPARATE = "separate"


class Sex(Enum):
    FEMALE = "Female"
    MALE = "Male"
    UNKNOWN = "Unknown"


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


def _validate_grid(shape, spacing_mm, z_positions_mm):
    if len(shape) != 3:
        raise ValueError(f"volume must be 3-D, got shape {shape}")
    if any(n < 1 for n in shape):
        raise ValueError(f"all dims must be >= 1, got dims {shape[::-1]}")
    if len(spacing_mm) != 3 or any(not (s > 0) for s in spacing_mm):
        raise ValueError(f"spacing must be three positive values, got {spacing_mm}")
    if z_positions_mm is not None:
        nz = shape[0]
        if len(z_positions_mm) != nz:
            raise ValueError(
                f"z_positions_mm has {len(z_positions_mm)} entries, expected {nz}"
            )
        if nz > 1:
            steps = np.diff(z_positions_mm)
            if not (np.all(steps > 0) or np.all(steps < 0)):
                raise ValueError("z_positions_mm must be strictly monotonic")


@dataclass(frozen=True)
class VoxelVolume:
    """A 3-D scalar grid: raw CT counts or converted Hounsfield Units.

    ``values`` is ``int16`` while ``unit_state`` is RAW and ``float32``
    after HU conversion. ``rescale_slope``/``rescale_intercept`` carry the
    affine mapping from raw counts to HU.
    """

    values: np.ndarray
    spacing_mm: tuple[float, float, float]
    rescale_slope: float = 1.0
    rescale_intercept: float = 0.0
    unit_state: UnitState = UnitState.RAW
    z_positions_mm: tuple[float, ...] | None = None
    subject_id: str | None = None

    def __post_init__(self):
        values = np.asarray(self.values)
        _validate_grid(values.shape, self.spacing_mm, self.z_positions_mm)
        if self.unit_state is UnitState.RAW:
            if not np.issubdtype(values.dtype, np.integer):
                raise ValueError("raw volumes must hold integer values")
            if values.size and (values.min() < -32768 or values.max() > 32767):
                raise ValueError("raw values exceed the signed 16-bit range")
            values = values.astype(np.int16, copy=False)
        else:
            values = values.astype(np.float32, copy=False)
        object.__setattr__(self, "values", _freeze(values))
        object.__setattr__(self, "spacing_mm", tuple(float(s) for s in self.spacing_mm))
        if self.z_positions_mm is not None:
            object.__setattr__(
                self, "z_positions_mm", tuple(float(z) for z in self.z_positions_mm)
            )

    @property
    def dims(self) -> tuple[int, int, int]:
        """(nx, ny, nz)."""
        nz, ny, nx = self.values.shape
        return (nx, ny, nz)

    @property
    def nz(self) -> int:
        return self.values.shape[0]

    @property
    def pixel_area_cm2(self) -> float:
        sx, sy, _ = self.spacing_mm
        return sx * sy / 100.0

    @property
    def voxel_volume_cm3(self) -> float:
        sx, sy, sz = self.spacing_mm
        return sx * sy * sz / 1000.0


@dataclass(frozen=True)
class LabelVolume:
    """A 3-D unsigned 8-bit label grid plus its code-to-name map.

    Every nonzero code that occurs in ``codes`` must appear in
    ``label_map``; code 0 is background by convention.
    """

    codes: np.ndarray
    label_map: Mapping[int, str]
    spacing_mm: tuple[float, float, float]
    z_positions_mm: tuple[float, ...] | None = None
    subject_id: str | None = None

    def __post_init__(self):
        codes = np.asarray(self.codes)
        _validate_grid(codes.shape, self.spacing_mm, self.z_positions_mm)
        if not np.issubdtype(codes.dtype, np.integer):
            raise ValueError("label codes must be integers")
        if codes.size and (codes.min() < 0 or codes.max() > 255):
            raise ValueError("label codes exceed the unsigned 8-bit range")
        codes = codes.astype(np.uint8, copy=False)
        label_map = {int(k): str(v) for k, v in dict(self.label_map).items()}
        if any(not 0 <= k <= 255 for k in label_map):
            raise ValueError("label_map codes must fit in unsigned 8 bits")
        mapped = np.zeros(256, dtype=bool)
        mapped[0] = True
        mapped[list(label_map)] = True
        # fast path: when every code up to the observed maximum is mapped,
        # no per-voxel membership scan is needed
        if not mapped[: int(codes.max(initial=0)) + 1].all():
            ok = mapped[codes]
            if not ok.all():
                missing = sorted(int(c) for c in set(codes[~ok].ravel().tolist()))
                raise ValueError(
                    f"codes {missing} present in volume but not in label_map"
                )
        object.__setattr__(self, "codes", _freeze(codes))
        object.__setattr__(self, "label_map", label_map)
        object.__setattr__(self, "spacing_mm", tuple(float(s) for s in self.spacing_mm))
        if self.z_positions_mm is not None:
            object.__setattr__(
                self, "z_positions_mm", tuple(float(z) for z in self.z_positions_mm)
            )

    @property
    def dims(self) -> tuple[int, int, int]:
        nz, ny, nx = self.codes.shape
        return (nx, ny, nz)

    @property
    def nz(self) -> int:
        return self.codes.shape[0]

    @property
    def pixel_area_cm2(self) -> float:
        sx, sy, _ = self.spacing_mm
        return sx * sy / 100.0

    @property
    def voxel_volume_cm3(self) -> float:
        sx, sy, sz = self.spacing_mm
        return sx * sy * sz / 1000.0

    def codes_for(self, label_name: str) -> list[int]:
        """All codes mapping to ``label_name``; raises if the name is unknown."""
        found = sorted(c for c, n in self.label_map.items() if n == label_name)
        if not found:
            raise LabelVocabularyError(f"label {label_name!r} not in label map")
        return found

    def has_name(self, label_name: str) -> bool:
        return label_name in self.label_map.values()

    def binary(self, label_name: str) -> np.ndarray:
        """Boolean mask of voxels carrying ``label_name``."""
        codes = self.codes_for(label_name)
        if len(codes) == 1:
            return self.codes == codes[0]
        return np.isin(self.codes, codes)


@dataclass(frozen=True)
class SubjectRecord:
    """Demographics for one subject; height is optional."""

    subject_id: str
    age_years: float
    sex: Sex = Sex.UNKNOWN
    race: str = ""
    height_m: float | None = None

    def __post_init__(self):
        if self.age_years < 0:
            raise ValueError(f"age_years must be >= 0, got {self.age_years}")
        if self.height_m is not None and not (self.height_m > 0):
            raise ValueError(f"height_m must be > 0 when present, got {self.height_m}")


@dataclass(frozen=True)
class BodyCompResult:
    """The four body-composition metrics in 2D (L3) and 3D (T12-L4) form.

    ``region_2d`` is the measured L3 slice index; ``region_3d`` the
    inclusive slice range. ``smi_2d`` is None when the subject's height is
    unknown; no 3D SMI is defined.
    """

    subject_id: str
    policy: MergePolicy
    region_2d: int
    region_3d: tuple[int, int]
    muscle_density_2d: float
    muscle_density_3d: float
    vat_sat_ratio_2d: float
    vat_sat_ratio_3d: float
    muscle_area_2d: float
    muscle_volume_3d: float
    smi_2d: float | None = None

    def __post_init__(self):
        z_lo, z_hi = self.region_3d
        if z_lo > z_hi:
            raise ValueError(f"region_3d must have z_lo <= z_hi, got {self.region_3d}")
        if self.muscle_area_2d < 0 or self.muscle_volume_3d < 0:
            raise ValueError("areas and volumes must be >= 0")
        if self.vat_sat_ratio_2d < 0 or self.vat_sat_ratio_3d < 0:
            raise ValueError("VAT/SAT ratios must be >= 0")

    def to_dict(self) -> dict:
        return {
            "subject_id": self.subject_id,
            "policy": self.policy.value,
            "region_2d": self.region_2d,
            "region_3d": list(self.region_3d),
            "muscle_density_2d": self.muscle_density_2d,
            "muscle_density_3d": self.muscle_density_3d,
            "vat_sat_ratio_2d": self.vat_sat_ratio_2d,
            "vat_sat_ratio_3d": self.vat_sat_ratio_3d,
            "muscle_area_2d": self.muscle_area_2d,
            "muscle_volume_3d": self.muscle_volume_3d,
            "smi_2d": self.smi_2d,
        }


def same_geometry(a, b) -> bool:
    """True when two volumes share dims, spacing, and z positions."""
    return (
        a.dims == b.dims
        and a.spacing_mm == b.spacing_mm
        and a.z_positions_mm == b.z_positions_mm
    )


def require_same_geometry(a, b) -> None:
    if not same_geometry(a, b):
        raise GeometryMismatchError(
            f"geometry mismatch: dims {a.dims} spacing {a.spacing_mm} vs "
            f"dims {b.dims} spacing {b.spacing_mm}"
        )


def require_hu(vol: VoxelVolume) -> None:
    if vol.unit_state is not UnitState.HU:
        raise UnitStateError("operation requires an HU-converted volume")


def to_hu(vol: VoxelVolume) -> VoxelVolume:
    """Convert raw CT counts to Hounsfield Units.

    Applies ``hu = rescale_slope * raw + rescale_intercept`` voxelwise;
    geometry and rescale metadata are unchanged. Converting an already-HU
    volume raises (no double conversion).
    """
    if vol.unit_state is not UnitState.RAW:
        raise UnitStateError("volume is already in HU")
    # ufunc-mediated cast; plain astype is much slower on some builds
    hu = np.multiply(vol.values, np.float32(vol.rescale_slope), dtype=np.float32)
    hu += np.float32(vol.rescale_intercept)
    return replace(vol, values=hu, unit_state=UnitState.HU)


def require_tissue_vocabulary(mask: LabelVolume) -> None:
    """Raise unless the mask's label map covers all four tissue names."""
    missing = [n for n in TISSUE_NAMES if not mask.has_name(n)]
    if missing:
        raise LabelVocabularyError(
            f"mask lacks tissue labels {missing}; expected the tissue vocabulary"
        )


_POLICY_TARGET = {
    MergePolicy.MUSCLE: SKELETAL_MUSCLE,
    MergePolicy.SAT: SAT,
    MergePolicy.VAT: VAT,
}


def apply_merge_policy(mask: LabelVolume, policy: MergePolicy) -> LabelVolume:
    """Relabel muscular-fat voxels according to ``policy``.

    All other voxels are untouched and the total count of nonzero voxels
    is conserved. ``SEPARATE`` returns the input unchanged. The merge is
    idempotent: a second application finds no muscular-fat voxels.
    """
    require_tissue_vocabulary(mask)
    if policy is MergePolicy.SEPARATE:
        return mask
    mf_codes = mask.codes_for(MUSCULAR_FAT)
    target = min(mask.codes_for(_POLICY_TARGET[policy]))
    lut = np.arange(256, dtype=np.uint8)
    lut[mf_codes] = target
    return replace(mask, codes=lut[mask.codes])
