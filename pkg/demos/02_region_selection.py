"""
Vertebra-driven region selection
================================

Shows how the L3 measurement slice and the T12-L4 range are derived from
a vertebra label volume, plus the slice-distance and fixed-interval
sampling utilities used when comparing slice selections.
"""

import numpy as np

from bodycomp import (
    build_phantom,
    label_area_per_slice,
    largest_label_slice,
    region_t12_l4,
    sample_slices_by_interval,
    slice_distance_cm,
)

phantom = build_phantom(nx=64, ny=64, nz=32, spacing_mm=(1.0, 1.0, 5.0))
vertebrae = phantom.vertebrae

# Per-slice label area is the raw signal behind slice selection.
areas = label_area_per_slice(vertebrae, "vertebrae_L3")
print("L3 area per slice (cm^2):")
for k, area in enumerate(areas):
    if area > 0:
        print(f"  slice {k:2d}: {area:.2f}")

# The measurement slice is the one with the largest L3 area; ties break
# to the lowest index.
l3 = largest_label_slice(vertebrae, "vertebrae_L3")
print("selected L3 slice:", l3)

# The 3D region runs between the largest-T12 and largest-L4 slices,
# endpoints inclusive, normalized so z_lo <= z_hi.
region = region_t12_l4(vertebrae)
print("T12-L4 range:", (region.z_lo, region.z_hi),
      "(degenerate)" if region.degenerate else "")

# Physical distance between two slice choices, e.g. a human-selected
# slice vs the automatic one.
human_choice = l3 + 3
print(f"distance between slice {l3} and slice {human_choice}:",
      slice_distance_cm(l3, human_choice, vertebrae), "cm")

# Fixed-interval sampling: one slice every 2.5 cm, scanning from the
# first slice. With 5 mm spacing that is every fifth slice.
picked = sample_slices_by_interval(vertebrae, 2.5)
print("slices sampled every 2.5 cm:", picked)

# The same utilities accept explicit per-slice z positions for scans
# with nonuniform spacing.
from bodycomp import LabelVolume

z = tuple(np.cumsum([0.8, 0.8, 0.8, 5.0, 5.0, 5.0, 0.8, 0.8]).tolist())
nonuniform = LabelVolume(
    codes=np.zeros((8, 4, 4), dtype=np.uint8),
    label_map={0: "background"},
    spacing_mm=(1.0, 1.0, 1.0),
    z_positions_mm=z,
)
print("nonuniform z positions (mm):", z)
print("slices sampled every 0.5 cm:", sample_slices_by_interval(nonuniform, 0.5))
