"""
Mask post-processing
====================

Two slice-wise cleanups: growing SAT into the skin rim (to match
annotation styles that include skin in SAT), and filtering muscular-fat
candidates by HU range and connected-component size.
"""

import numpy as np

from bodycomp import (
    LabelVolume,
    VoxelVolume,
    UnitState,
    dilate_sat_to_skin,
    muscular_fat_candidates,
)

# --- SAT-skin dilation -------------------------------------------------
# One SAT blob surrounded by skin-density pixels (HU -300) and air
# (HU -1000). Dilation adds only background pixels above -800 HU within
# a 5x5 window of existing SAT.
ny = nx = 16
hu_slice = np.full((ny, nx), -1000.0, dtype=np.float32)
hu_slice[4:12, 4:12] = -300.0
codes = np.zeros((1, ny, nx), dtype=np.uint8)
codes[0, 6:10, 6:10] = 2  # SAT
codes[0, 7:9, 7:9] = 1    # a bit of muscle inside

hu = VoxelVolume(
    values=hu_slice[None],
    spacing_mm=(1.0, 1.0, 5.0),
    unit_state=UnitState.HU,
)
mask = LabelVolume(
    codes=codes,
    label_map={0: "background", 1: "skeletal_muscle", 2: "sat", 3: "vat", 4: "muscular_fat"},
    spacing_mm=(1.0, 1.0, 5.0),
)

grown = dilate_sat_to_skin(mask, hu)
print("SAT pixels before dilation:", int((codes == 2).sum()))
print("SAT pixels after dilation :", int((grown.codes == 2).sum()))
print("muscle pixels untouched   :", int((grown.codes == 1).sum()), "==",
      int((codes == 1).sum()))

# Render the slice: '.' air, 's' SAT, 'M' muscle, '+' added by dilation
added = (grown.codes[0] == 2) & (codes[0] == 0)
art = np.full((ny, nx), ".", dtype="U1")
art[codes[0] == 2] = "s"
art[codes[0] == 1] = "M"
art[added] = "+"
print("\n".join("".join(row) for row in art))

# --- muscular-fat candidate filtering -----------------------------------
# Fat-range pixels (HU in [-220, -50]) inside the ROI are kept only when
# their 8-connected component has more than six pixels.
hu_slice2 = np.full((1, 10, 12), 40.0, dtype=np.float32)
hu_slice2[0, 2, 1:8] = -120.0   # 7-pixel streak: retained
hu_slice2[0, 5, 1:7] = -120.0   # 6-pixel streak: removed
hu_slice2[0, 8, 1:9] = -30.0    # 8 pixels but out of HU range: removed
roi = LabelVolume(
    codes=np.ones((1, 10, 12), dtype=np.uint8),
    label_map={0: "background", 1: "skeletal_muscle"},
    spacing_mm=(1.0, 1.0, 5.0),
)
hu2 = VoxelVolume(values=hu_slice2, spacing_mm=(1.0, 1.0, 5.0), unit_state=UnitState.HU)

candidates = muscular_fat_candidates(hu2, roi)
print()
print("muscular-fat candidates kept:", int(candidates.codes.sum()),
      "of", int(((hu_slice2 >= -220) & (hu_slice2 <= -50)).sum()), "fat-range pixels")
for y, x in np.argwhere(candidates.codes[0]):
    print(f"  kept pixel (y={y}, x={x})")
