import numpy as np
import pytest

from bodycomp import (
    LabelVolume,
    SubjectRecord,
    UnitState,
    VoxelVolume,
    default_tissue_label_map,
)

VERT_MAP = {0: "background", 1: "vertebrae_T12", 2: "vertebrae_L3", 3: "vertebrae_L4"}


def make_ct(values, spacing=(1.0, 1.0, 5.0), slope=1.0, intercept=-1024.0, z=None, sid=None):
    return VoxelVolume(
        values=np.asarray(values, dtype=np.int16),
        spacing_mm=spacing,
        rescale_slope=slope,
        rescale_intercept=intercept,
        z_positions_mm=z,
        subject_id=sid,
    )


def make_hu(values, spacing=(1.0, 1.0, 5.0), z=None, sid=None):
    return VoxelVolume(
        values=np.asarray(values, dtype=np.float32),
        spacing_mm=spacing,
        unit_state=UnitState.HU,
        z_positions_mm=z,
        subject_id=sid,
    )


def make_tissue(codes, spacing=(1.0, 1.0, 5.0), z=None, sid=None, label_map=None):
    return LabelVolume(
        codes=np.asarray(codes, dtype=np.uint8),
        label_map=label_map or default_tissue_label_map(),
        spacing_mm=spacing,
        z_positions_mm=z,
        subject_id=sid,
    )


def make_vertebrae(codes, spacing=(1.0, 1.0, 5.0), z=None, sid=None):
    return LabelVolume(
        codes=np.asarray(codes, dtype=np.uint8),
        label_map=dict(VERT_MAP),
        spacing_mm=spacing,
        z_positions_mm=z,
        subject_id=sid,
    )


def random_tissue_codes(rng, shape, p_zero=0.4):
    codes = rng.integers(1, 5, size=shape, dtype=np.uint8)
    codes[rng.random(shape) < p_zero] = 0
    return codes


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)


@pytest.fixture
def subject():
    return SubjectRecord("p1", 60.0, height_m=1.70)
