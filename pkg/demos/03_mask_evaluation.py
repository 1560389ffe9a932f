"""
Evaluating predicted masks against ground truth
===============================================

Perturbs a phantom's tissue mask to play the role of a model prediction,
then evaluates it: Dice per label and region, relative errors of the
derived quantities, and the metric-error table with muscle-density
errors normalized to the -29..+150 HU range.
"""

import numpy as np

from bodycomp import (
    LabelVolume,
    MergePolicy,
    aggregate_cases,
    build_phantom,
    dice,
    evaluate_case,
    evaluate_masks,
    mrae,
    r_squared,
    to_hu,
)

rng = np.random.default_rng(42)
phantom = build_phantom(nx=64, ny=64, nz=24)
hu = to_hu(phantom.ct)
gt = phantom.tissue

# Fake a prediction: drop 3% of muscle voxels and dilate nothing else.
pred_codes = np.asarray(gt.codes).copy()
muscle = pred_codes == 1
dropped = muscle & (rng.random(pred_codes.shape) < 0.03)
pred_codes[dropped] = 0
pred = LabelVolume(
    codes=pred_codes,
    label_map=gt.label_map,
    spacing_mm=gt.spacing_mm,
)

# Scalar metrics on their own.
print("muscle dice:", dice(gt.binary("skeletal_muscle"), pred.binary("skeletal_muscle")).value)
print("area MRAE over 3 fake cases:", mrae([100, 120, 80], [97, 126, 80]).value)
print("volume R^2:", r_squared([900, 1100, 1000, 950], [890, 1120, 1010, 940]))

# Full per-label, per-region report. Muscle/SAT/VAT are compared after
# the merge policy; muscular fat is always compared separately.
report = evaluate_masks(gt, pred, hu, phantom.vertebrae, MergePolicy.MUSCLE)
print()
print(f"{'label':16s} {'region':8s} {'dice':>7s} {'rel err':>8s}")
for row in report.rows:
    rel = "" if row.mrae is None else f"{row.mrae:8.4f}"
    print(f"{row.label:16s} {row.region:8s} {row.dice_mean:7.4f} {rel:>8s}")

print()
print("metric-error table (percent):")
for entry in report.metric_errors:
    print(f"  {entry.metric:20s} {entry.mean_pct:7.3f}")

# Across several cases the per-case reports aggregate into mean/SD dice
# (per volume and per slice), MRAE, and R^2 over the case quantities.
cases = []
for _ in range(5):
    noisy = np.asarray(gt.codes).copy()
    noisy[(noisy == 1) & (rng.random(noisy.shape) < 0.05)] = 0
    case_pred = LabelVolume(codes=noisy, label_map=gt.label_map, spacing_mm=gt.spacing_mm)
    cases.append(evaluate_case(gt, case_pred, hu, phantom.vertebrae))
multi = aggregate_cases(cases)
row = multi.row("skeletal_muscle", "t12_l4")
print()
print(f"5-case muscle @ T12-L4: dice {row.dice_mean:.4f} +/- {row.dice_sd:.4f} "
      f"(per-slice {row.dice_slice_mean:.4f}), MRAE {row.mrae:.4f}")
