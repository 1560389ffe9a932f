import json
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bodycomp import (
    BadMagicError,
    CohortError,
    HeaderError,
    Sex,
    TruncatedPayloadError,
    UnknownDtypeError,
    UnknownKindError,
    UnitState,
    VolumeFormatError,
    VoxelVolume,
    read_cohort_csv,
    read_volume,
    to_hu,
    write_volume,
)
from conftest import make_ct, make_tissue, make_vertebrae, random_tissue_codes


def volumes_equal(a, b):
    if type(a) is not type(b):
        return False
    if a.dims != b.dims or a.spacing_mm != b.spacing_mm:
        return False
    if a.z_positions_mm != b.z_positions_mm or a.subject_id != b.subject_id:
        return False
    if isinstance(a, VoxelVolume):
        return (
            a.unit_state is b.unit_state
            and a.rescale_slope == b.rescale_slope
            and a.rescale_intercept == b.rescale_intercept
            and np.array_equal(a.values, b.values)
        )
    return a.label_map == b.label_map and np.array_equal(a.codes, b.codes)


def test_ct_round_trip(tmp_path, rng):
    vals = rng.integers(-1024, 3000, size=(3, 4, 5), dtype=np.int16)
    ct = make_ct(vals, spacing=(0.7, 0.8, 2.5), slope=1.5, intercept=-1000.0,
                 z=(0.0, 2.5, 5.5), sid="case-7")
    path = tmp_path / "ct.bcv"
    write_volume(ct, path)
    again = read_volume(path)
    assert volumes_equal(ct, again)
    assert again.unit_state is UnitState.RAW


def test_label_round_trip_both_kinds(tmp_path, rng):
    tissue = make_tissue(random_tissue_codes(rng, (2, 3, 3)), sid="t")
    vert = make_vertebrae(np.array([[[0, 1], [2, 3]]]), sid="v")
    for vol, name in ((tissue, "t.bcv"), (vert, "v.bcv")):
        path = tmp_path / name
        write_volume(vol, path)
        assert volumes_equal(vol, read_volume(path))


def test_write_is_deterministic(tmp_path, rng):
    ct = make_ct(rng.integers(-5, 5, size=(2, 2, 2), dtype=np.int16))
    a, b = tmp_path / "a.bcv", tmp_path / "b.bcv"
    write_volume(ct, a)
    write_volume(ct, b)
    assert a.read_bytes() == b.read_bytes()


def test_payload_size_and_file_size(tmp_path):
    mask = make_tissue(np.zeros((1, 2, 2)))  # 2x2x1 u8 -> 4 payload bytes
    path = tmp_path / "m.bcv"
    write_volume(mask, path)
    data = path.read_bytes()
    (header_len,) = struct.unpack("<Q", data[4:12])
    assert len(data) == 12 + header_len + 4


def test_hu_volume_not_writable(tmp_path):
    hu = to_hu(make_ct(np.zeros((1, 1, 1))))
    with pytest.raises(VolumeFormatError):
        write_volume(hu, tmp_path / "x.bcv")


def _valid_file(tmp_path):
    path = tmp_path / "f.bcv"
    write_volume(make_tissue(np.ones((2, 2, 2))), path)
    return path


def _patch_header(path, **changes):
    data = path.read_bytes()
    (header_len,) = struct.unpack("<Q", data[4:12])
    header = json.loads(data[12 : 12 + header_len])
    header.update(changes)
    raw = json.dumps(header).encode()
    path.write_bytes(data[:4] + struct.pack("<Q", len(raw)) + raw + data[12 + header_len :])


def test_bad_magic(tmp_path):
    path = _valid_file(tmp_path)
    data = path.read_bytes()
    path.write_bytes(b"NOPE" + data[4:])
    with pytest.raises(BadMagicError):
        read_volume(path)


def test_truncated_payload(tmp_path):
    path = _valid_file(tmp_path)
    path.write_bytes(path.read_bytes()[:-3])
    with pytest.raises(TruncatedPayloadError):
        read_volume(path)


def test_truncated_header(tmp_path):
    path = _valid_file(tmp_path)
    path.write_bytes(path.read_bytes()[:10])
    with pytest.raises(TruncatedPayloadError):
        read_volume(path)


def test_oversized_payload_is_header_error(tmp_path):
    path = _valid_file(tmp_path)
    path.write_bytes(path.read_bytes() + b"\x00\x00")
    with pytest.raises(HeaderError):
        read_volume(path)


def test_unknown_dtype(tmp_path):
    path = _valid_file(tmp_path)
    _patch_header(path, dtype="f64")
    with pytest.raises(UnknownDtypeError):
        read_volume(path)


def test_unknown_kind(tmp_path):
    path = _valid_file(tmp_path)
    _patch_header(path, kind="mri")
    with pytest.raises(UnknownKindError):
        read_volume(path)


def test_kind_dtype_validity_table(tmp_path):
    # tissue_labels must be u8; i16 is a header error even though both
    # dtype and kind are individually known
    path = _valid_file(tmp_path)
    _patch_header(path, dtype="i16")
    with pytest.raises(HeaderError):
        read_volume(path)


def test_dims_mismatch(tmp_path):
    path = _valid_file(tmp_path)
    _patch_header(path, dims=[2, 2, 9])
    with pytest.raises(TruncatedPayloadError):
        read_volume(path)


def test_bad_dims_type(tmp_path):
    path = _valid_file(tmp_path)
    _patch_header(path, dims=[2, 2])
    with pytest.raises(HeaderError):
        read_volume(path)


def test_header_invariant_violation(tmp_path):
    path = _valid_file(tmp_path)
    _patch_header(path, z_positions_mm=[0.0])  # wrong length for nz=2
    with pytest.raises(HeaderError):
        read_volume(path)


def test_garbage_header_json(tmp_path):
    path = _valid_file(tmp_path)
    data = path.read_bytes()
    (header_len,) = struct.unpack("<Q", data[4:12])
    raw = b"{" * header_len
    path.write_bytes(data[:12] + raw + data[12 + header_len :])
    with pytest.raises(HeaderError):
        read_volume(path)


@settings(max_examples=60, deadline=None)
@given(
    nx=st.integers(1, 6),
    ny=st.integers(1, 6),
    nz=st.integers(1, 5),
    kind=st.sampled_from(["ct", "tissue", "vertebrae"]),
    with_z=st.booleans(),
    seed=st.integers(0, 2**31 - 1),
)
def test_round_trip_identity_property(tmp_path_factory, nx, ny, nz, kind, with_z, seed):
    rng = np.random.default_rng(seed)
    z = tuple(np.cumsum(rng.uniform(0.5, 4.0, size=nz))) if with_z else None
    spacing = tuple(rng.uniform(0.3, 3.0, size=3))
    if kind == "ct":
        vol = make_ct(
            rng.integers(-1024, 3000, size=(nz, ny, nx), dtype=np.int16),
            spacing=spacing,
            slope=float(rng.uniform(0.5, 2)),
            intercept=float(rng.uniform(-1100, 0)),
            z=z,
        )
    elif kind == "tissue":
        vol = make_tissue(random_tissue_codes(rng, (nz, ny, nx)), spacing=spacing, z=z)
    else:
        vol = make_vertebrae(
            rng.integers(0, 4, size=(nz, ny, nx), dtype=np.uint8), spacing=spacing, z=z
        )
    path = tmp_path_factory.mktemp("rt") / "v.bcv"
    write_volume(vol, path)
    assert volumes_equal(vol, read_volume(path))


def test_cohort_csv_basic(tmp_path):
    path = tmp_path / "cohort.csv"
    path.write_text(
        "subject_id,age_years,sex,race,height_m\n"
        "p1,60.1,Female,White,1.70\n"
        "p2,45,male,Black/African American,\n"
        "p3,70,other,,1.55\n",
        encoding="utf-8",
    )
    records = read_cohort_csv(path)
    assert [r.subject_id for r in records] == ["p1", "p2", "p3"]
    assert records[0].age_years == 60.1
    assert records[0].sex is Sex.FEMALE
    assert records[0].race == "White"
    assert records[0].height_m == 1.70
    assert records[1].sex is Sex.MALE
    assert records[1].height_m is None  # blank height parses as absent
    assert records[2].sex is Sex.UNKNOWN


def test_cohort_csv_duplicate_id(tmp_path):
    path = tmp_path / "cohort.csv"
    path.write_text(
        "subject_id,age_years,sex,race,height_m\np1,60,Female,W,1.7\np1,61,Male,W,1.8\n"
    )
    with pytest.raises(CohortError):
        read_cohort_csv(path)


def test_cohort_csv_missing_column(tmp_path):
    path = tmp_path / "cohort.csv"
    path.write_text("subject_id,age_years,sex,race\np1,60,Female,W\n")
    with pytest.raises(CohortError):
        read_cohort_csv(path)


@pytest.mark.parametrize("bad", ["p1,abc,Female,W,1.7", "p1,60,Female,W,tall", "p1,-2,Female,W,1.7"])
def test_cohort_csv_bad_values(tmp_path, bad):
    path = tmp_path / "cohort.csv"
    path.write_text(f"subject_id,age_years,sex,race,height_m\n{bad}\n")
    with pytest.raises(CohortError):
        read_cohort_csv(path)
