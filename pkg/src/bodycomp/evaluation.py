"""Segmentation and measurement evaluation.

Scalar metrics: Dice overlap, mean relative absolute error (MRAE),
coefficient of determination, and Pearson correlation (population form).
``evaluate_case``/``evaluate_masks`` compare a predicted label volume
against ground truth per label and per region (L3 slice, T12-L4 range,
all slices), and ``aggregate_cases`` rolls per-case results into an
EvalReport with both per-volume and per-slice Dice aggregations.

Muscle-density errors are normalized to the -29..+150 HU range of normal
muscle density, so 1.79 HU of error reads as 1.00%.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import (
    BodycompError,
    ConstantInputError,
    GeometryMismatchError,
    VertebraNotFoundError,
)
from .model import (
    MUSCULAR_FAT,
    SAT,
    SKELETAL_MUSCLE,
    VAT,
    LabelVolume,
    MergePolicy,
    VoxelVolume,
    apply_merge_policy,
    require_same_geometry,
    vertebra_label,
)
from .measures import (
    muscle_density,
    tissue_area_2d,
    tissue_volume_3d,
    vat_sat_ratio,
)
from .regions import (
    AllSlices,
    SingleSlice,
    largest_label_slice,
    region_slice,
    region_t12_l4,
)

# Normal muscle density spans -29 to +150 HU; errors are reported as a
# percentage of this 179-HU width.
MUSCLE_DENSITY_RANGE_HU = (-29.0, 150.0)
_DENSITY_RANGE_WIDTH = MUSCLE_DENSITY_RANGE_HU[1] - MUSCLE_DENSITY_RANGE_HU[0]

REGION_NAMES = ("l3", "t12_l4", "all")
EVAL_LABELS = (SKELETAL_MUSCLE, SAT, VAT, MUSCULAR_FAT)

METRIC_ERROR_NAMES = (
    "muscle_density_2d",
    "muscle_density_3d",
    "vat_sat_ratio_2d",
    "vat_sat_ratio_3d",
    "muscle_area_2d",
    "muscle_volume_3d",
    "smi_2d",
)


class DiceResult(NamedTuple):
    """Dice value plus a flag for the degenerate both-empty case."""

    value: float
    degenerate: bool


class MraeResult(NamedTuple):
    """MRAE value plus the count of excluded zero-ground-truth terms."""

    value: float
    skipped: int


def dice(a: np.ndarray, b: np.ndarray) -> DiceResult:
    """Dice overlap 2|A∩B| / (|A|+|B|) between two binary masks.

    Two empty masks agree perfectly: the result is 1.0 with the
    degenerate flag set so aggregate statistics can stay honest.
    """
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise GeometryMismatchError(f"mask shapes differ: {a.shape} vs {b.shape}")
    na = int(np.count_nonzero(a))
    nb = int(np.count_nonzero(b))
    if na + nb == 0:
        return DiceResult(1.0, True)
    inter = int(np.count_nonzero(a & b))
    return DiceResult(2.0 * inter / (na + nb), False)


def mrae(truth: Sequence[float], pred: Sequence[float], strict: bool = False) -> MraeResult:
    """Mean of |truth_i - pred_i| / |truth_i| over paired values.

    Terms where both values are zero contribute 0. Terms with zero ground
    truth but nonzero prediction are excluded and tallied in ``skipped``;
    with ``strict=True`` they raise instead. The value is NaN when every
    term was excluded.
    """
    t = np.asarray(truth, dtype=float)
    p = np.asarray(pred, dtype=float)
    if t.shape != p.shape:
        raise ValueError(f"length mismatch: {t.shape} vs {p.shape}")
    if t.size == 0:
        raise ValueError("mrae requires at least one pair")
    zero_truth = t == 0
    undefined = zero_truth & (p != 0)
    if strict and undefined.any():
        idx = int(np.flatnonzero(undefined)[0])
        raise ZeroDivisionError(f"ground truth is zero at index {idx}")
    include = ~undefined
    terms = np.zeros_like(t)
    ok = include & ~zero_truth
    terms[ok] = np.abs(t[ok] - p[ok]) / np.abs(t[ok])
    n_included = int(np.count_nonzero(include))
    skipped = int(t.size - n_included)
    if n_included == 0:
        return MraeResult(float("nan"), skipped)
    return MraeResult(float(terms[include].mean()), skipped)


def r_squared(obs: Sequence[float], pred: Sequence[float]) -> float:
    """Coefficient of determination 1 - SS_res / SS_tot; at most 1."""
    y = np.asarray(obs, dtype=float)
    yhat = np.asarray(pred, dtype=float)
    if y.shape != yhat.shape:
        raise ValueError(f"length mismatch: {y.shape} vs {yhat.shape}")
    if y.size < 2:
        raise ValueError("r_squared requires at least two observations")
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0:
        raise ConstantInputError("observations are constant; r_squared undefined")
    ss_res = float(np.sum((y - yhat) ** 2))
    return 1.0 - ss_res / ss_tot


def pearson_r(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson correlation Cov(X, Y) / (sigma_X sigma_Y), population form."""
    xv = np.asarray(x, dtype=float)
    yv = np.asarray(y, dtype=float)
    if xv.shape != yv.shape:
        raise ValueError(f"length mismatch: {xv.shape} vs {yv.shape}")
    if xv.size < 2:
        raise ValueError("pearson_r requires at least two observations")
    dx = xv - xv.mean()
    dy = yv - yv.mean()
    sx = float(np.sqrt(np.mean(dx * dx)))
    sy = float(np.sqrt(np.mean(dy * dy)))
    if sx == 0 or sy == 0:
        raise ConstantInputError("a series is constant; pearson_r undefined")
    cov = float(np.mean(dx * dy))
    return cov / (sx * sy)


def muscle_density_error_pct(err_hu: float) -> float:
    """Express a nonnegative HU error as a percent of the 179-HU range."""
    if err_hu < 0:
        raise ValueError(f"err_hu must be >= 0, got {err_hu}")
    return err_hu / _DENSITY_RANGE_WIDTH * 100.0


def metric_pct_difference(reference: float, other: float) -> float:
    """|other - reference| / |reference| * 100; reference is the gold value."""
    if reference == 0:
        raise ZeroDivisionError("reference value is zero")
    return abs(other - reference) / abs(reference) * 100.0


@dataclass(frozen=True)
class PairResult:
    """Comparison of one label in one region for a single case."""

    dice: float
    degenerate: bool
    slice_dices: tuple[float, ...]
    degenerate_slices: int
    truth_quantity: float  # cm² for l3, cm³ otherwise
    pred_quantity: float


@dataclass(frozen=True)
class CaseEvaluation:
    """Per-case evaluation: one ground-truth/prediction volume pair."""

    subject_id: str | None
    policy: MergePolicy
    pairs: dict[tuple[str, str], PairResult]  # (label, region) -> result
    metric_errors: dict[str, float | None]
    region_2d: int | None = None
    region_3d: tuple[int, int] | None = None


@dataclass(frozen=True)
class EvalRow:
    label: str
    region: str
    cases: int
    dice_mean: float
    dice_sd: float
    dice_slice_mean: float
    dice_slice_sd: float
    degenerate_cases: int
    degenerate_slices: int
    mrae: float | None
    mrae_sd: float | None
    mrae_skipped: int
    r_squared: float | None


@dataclass(frozen=True)
class MetricErrorRow:
    metric: str
    mean_pct: float
    sd_pct: float
    cases: int


@dataclass(frozen=True)
class EvalReport:
    """Aggregate Dice/MRAE/R² table plus the metric-error table."""

    case_count: int
    policy: MergePolicy
    rows: tuple[EvalRow, ...]
    metric_errors: tuple[MetricErrorRow, ...]
    region_2d: int | None = None
    region_3d: tuple[int, int] | None = None

    def row(self, label: str, region: str) -> EvalRow:
        for r in self.rows:
            if r.label == label and r.region == region:
                return r
        raise KeyError((label, region))

    def to_dict(self) -> dict:
        return {
            "case_count": self.case_count,
            "policy": self.policy.value,
            "region_2d": self.region_2d,
            "region_3d": list(self.region_3d) if self.region_3d else None,
            "rows": [vars(r) for r in self.rows],
            "metric_errors": [vars(m) for m in self.metric_errors],
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=indent)


EVAL_CSV_COLUMNS = (
    "label",
    "region",
    "cases",
    "dice_mean",
    "dice_sd",
    "dice_slice_mean",
    "dice_slice_sd",
    "degenerate_cases",
    "degenerate_slices",
    "mrae",
    "mrae_sd",
    "mrae_skipped",
    "r_squared",
)


def _normalize_regions(regions) -> tuple[str, ...]:
    if regions is None:
        return REGION_NAMES
    canon = []
    for name in regions:
        key = name.lower().replace("-", "").replace("_", "")
        if key == "l3":
            canon.append("l3")
        elif key in ("t12l4", "t12tol4"):
            canon.append("t12_l4")
        elif key in ("all", "allslices"):
            canon.append("all")
        else:
            raise ValueError(f"unknown region {name!r}; expected l3, t12l4, or all")
    return tuple(dict.fromkeys(canon))


def _per_slice_dices(a: np.ndarray, b: np.ndarray) -> tuple[tuple[float, ...], int]:
    values = []
    degenerate = 0
    for k in range(a.shape[0]):
        d = dice(a[k], b[k])
        values.append(d.value)
        degenerate += int(d.degenerate)
    return tuple(values), degenerate


def evaluate_case(
    gt: LabelVolume,
    pred: LabelVolume,
    hu: VoxelVolume | None = None,
    vertebrae: LabelVolume | None = None,
    policy: MergePolicy = MergePolicy.MUSCLE,
    regions: Iterable[str] | None = None,
) -> CaseEvaluation:
    """Compare one predicted mask against ground truth.

    Muscle, SAT, and VAT are compared after the merge policy is applied to
    both volumes; muscular fat is always compared in its separate form.
    Without a vertebrae volume only the all-slices region is evaluated and
    the metric-error table is skipped.
    """
    require_same_geometry(gt, pred)
    if hu is not None:
        require_same_geometry(gt, hu)
    if vertebrae is not None:
        require_same_geometry(gt, vertebrae)

    wanted = _normalize_regions(regions)
    if vertebrae is None:
        if regions is None:
            wanted = ("all",)
        elif any(r != "all" for r in wanted):
            needed = [r for r in wanted if r != "all"]
            raise VertebraNotFoundError(
                f"regions {needed} require a vertebrae volume"
            )

    region_2d = None
    region_3d = None
    region_objs: dict[str, object] = {}
    for name in wanted:
        if name == "l3":
            region_2d = largest_label_slice(vertebrae, vertebra_label("L3"))
            region_objs[name] = SingleSlice(region_2d)
        elif name == "t12_l4":
            rng = region_t12_l4(vertebrae)
            region_3d = (rng.z_lo, rng.z_hi)
            region_objs[name] = rng
        else:
            region_objs[name] = AllSlices()

    gt_merged = apply_merge_policy(gt, policy)
    pred_merged = apply_merge_policy(pred, policy)

    pairs: dict[tuple[str, str], PairResult] = {}
    for label in EVAL_LABELS:
        g_src = gt if label == MUSCULAR_FAT else gt_merged
        p_src = pred if label == MUSCULAR_FAT else pred_merged
        g_bin = g_src.binary(label)
        p_bin = p_src.binary(label)
        for name, region in region_objs.items():
            sl = region_slice(region, gt.nz)
            d = dice(g_bin[sl], p_bin[sl])
            slice_dices, degenerate_slices = _per_slice_dices(g_bin[sl], p_bin[sl])
            if name == "l3":
                tq = tissue_area_2d(g_src, label, region.z)
                pq = tissue_area_2d(p_src, label, region.z)
            else:
                tq = tissue_volume_3d(g_src, label, region)
                pq = tissue_volume_3d(p_src, label, region)
            pairs[(label, name)] = PairResult(
                dice=d.value,
                degenerate=d.degenerate,
                slice_dices=slice_dices,
                degenerate_slices=degenerate_slices,
                truth_quantity=tq,
                pred_quantity=pq,
            )

    metric_errors: dict[str, float | None] = {}
    if vertebrae is not None:
        metric_errors = _metric_errors(gt_merged, pred_merged, hu, vertebrae)

    return CaseEvaluation(
        subject_id=gt.subject_id or pred.subject_id,
        policy=policy,
        pairs=pairs,
        metric_errors=metric_errors,
        region_2d=region_2d,
        region_3d=region_3d,
    )


def _metric_errors(gt_merged, pred_merged, hu, vertebrae) -> dict[str, float | None]:
    """Percentage errors of predicted vs ground-truth measurements.

    Density errors are normalized to the 179-HU range; the others are
    relative differences against the ground-truth value. SMI error equals
    the 2D area error because height cancels in the ratio.
    """
    errors: dict[str, float | None] = {name: None for name in METRIC_ERROR_NAMES}
    try:
        l3 = largest_label_slice(vertebrae, vertebra_label("L3"))
        r3d = region_t12_l4(vertebrae)
    except VertebraNotFoundError:
        # vertebra volume lacks the required levels: the dice table for
        # the requested regions stands on its own, the metric table is
        # simply unavailable
        return errors
    r2d = SingleSlice(l3)
    sep = MergePolicy.SEPARATE  # inputs are already merged

    def attempt(name, fn):
        try:
            errors[name] = fn()
        except BodycompError:
            errors[name] = None
        except ZeroDivisionError:
            errors[name] = None

    if hu is not None:
        attempt(
            "muscle_density_2d",
            lambda: muscle_density_error_pct(
                abs(
                    muscle_density(hu, pred_merged, r2d, sep)
                    - muscle_density(hu, gt_merged, r2d, sep)
                )
            ),
        )
        attempt(
            "muscle_density_3d",
            lambda: muscle_density_error_pct(
                abs(
                    muscle_density(hu, pred_merged, r3d, sep)
                    - muscle_density(hu, gt_merged, r3d, sep)
                )
            ),
        )
    attempt(
        "vat_sat_ratio_2d",
        lambda: metric_pct_difference(
            vat_sat_ratio(gt_merged, r2d, sep), vat_sat_ratio(pred_merged, r2d, sep)
        ),
    )
    attempt(
        "vat_sat_ratio_3d",
        lambda: metric_pct_difference(
            vat_sat_ratio(gt_merged, r3d, sep), vat_sat_ratio(pred_merged, r3d, sep)
        ),
    )
    attempt(
        "muscle_area_2d",
        lambda: metric_pct_difference(
            tissue_area_2d(gt_merged, SKELETAL_MUSCLE, l3),
            tissue_area_2d(pred_merged, SKELETAL_MUSCLE, l3),
        ),
    )
    attempt(
        "muscle_volume_3d",
        lambda: metric_pct_difference(
            tissue_volume_3d(gt_merged, SKELETAL_MUSCLE, r3d),
            tissue_volume_3d(pred_merged, SKELETAL_MUSCLE, r3d),
        ),
    )
    # SMI = area / height²; height cancels in the relative error
    errors["smi_2d"] = errors["muscle_area_2d"]
    return errors


def _mean_sd(values: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    return float(arr.mean()), float(arr.std())


def aggregate_cases(cases: Sequence[CaseEvaluation]) -> EvalReport:
    """Combine per-case evaluations into an EvalReport.

    Dice is aggregated two ways (mean over cases and mean over all
    slices); MRAE and R² run over the per-case tissue quantities. R² is
    omitted below two cases or for constant ground truth.
    """
    if not cases:
        raise ValueError("aggregate_cases requires at least one case")
    policy = cases[0].policy
    keys: list[tuple[str, str]] = list(dict.fromkeys(k for c in cases for k in c.pairs))
    rows = []
    for key in keys:
        present = [c.pairs[key] for c in cases if key in c.pairs]
        dice_mean, dice_sd = _mean_sd([p.dice for p in present])
        all_slice_dices = [v for p in present for v in p.slice_dices]
        slice_mean, slice_sd = _mean_sd(all_slice_dices)
        truth_q = [p.truth_quantity for p in present]
        pred_q = [p.pred_quantity for p in present]
        m = mrae(truth_q, pred_q)
        # same inclusion rule as mrae: both-zero terms contribute 0,
        # zero-truth/nonzero-pred terms are excluded
        rel_errors = [
            0.0 if t == 0 else abs(t - q) / abs(t)
            for t, q in zip(truth_q, pred_q)
            if not (t == 0 and q != 0)
        ]
        r2 = None
        if len(present) >= 2:
            try:
                r2 = r_squared(truth_q, pred_q)
            except ConstantInputError:
                r2 = None
        rows.append(
            EvalRow(
                label=key[0],
                region=key[1],
                cases=len(present),
                dice_mean=dice_mean,
                dice_sd=dice_sd,
                dice_slice_mean=slice_mean,
                dice_slice_sd=slice_sd,
                degenerate_cases=sum(p.degenerate for p in present),
                degenerate_slices=sum(p.degenerate_slices for p in present),
                mrae=None if np.isnan(m.value) else m.value,
                mrae_sd=_mean_sd(rel_errors)[1] if not np.isnan(m.value) else None,
                mrae_skipped=m.skipped,
                r_squared=r2,
            )
        )

    metric_rows = []
    for name in METRIC_ERROR_NAMES:
        vals = [
            c.metric_errors[name]
            for c in cases
            if c.metric_errors.get(name) is not None
        ]
        if not vals:
            continue
        mean, sd = _mean_sd(vals)
        metric_rows.append(
            MetricErrorRow(metric=name, mean_pct=mean, sd_pct=sd, cases=len(vals))
        )

    return EvalReport(
        case_count=len(cases),
        policy=policy,
        rows=tuple(rows),
        metric_errors=tuple(metric_rows),
        region_2d=cases[0].region_2d if len(cases) == 1 else None,
        region_3d=cases[0].region_3d if len(cases) == 1 else None,
    )


def evaluate_masks(
    gt: LabelVolume,
    pred: LabelVolume,
    hu: VoxelVolume | None = None,
    vertebrae: LabelVolume | None = None,
    policy: MergePolicy = MergePolicy.MUSCLE,
    regions: Iterable[str] | None = None,
) -> EvalReport:
    """Evaluate one ground-truth/prediction pair and report it."""
    return aggregate_cases(
        [evaluate_case(gt, pred, hu, vertebrae, policy, regions)]
    )
