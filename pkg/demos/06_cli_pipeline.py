"""
End-to-end CLI pipeline
=======================

Writes phantom volumes as .bcv files, then drives the command-line
interface: measure a batch via a manifest, evaluate a prediction, select
a slice, and build cohort reports. Everything lands in a temporary
directory that is printed at the end.
"""

import csv
import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np

from bodycomp import LabelVolume, build_phantom, write_volume

work = Path(tempfile.mkdtemp(prefix="bodycomp-demo-"))
print("working directory:", work)


def run(*args):
    cmd = [sys.executable, "-m", "bodycomp.cli", *args]
    print("\n$", "bodycomp", *args)
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.stdout:
        print(proc.stdout, end="")
    if proc.stderr:
        print(proc.stderr, end="", file=sys.stderr)
    print("exit code:", proc.returncode)
    return proc


# --- write three subjects and a manifest --------------------------------
rows = []
demo_lines = ["subject_id,age_years,sex,race,height_m"]
for i, sid in enumerate(("s01", "s02", "s03")):
    phantom = build_phantom(
        nx=64 + 8 * i, ny=64 + 8 * i, nz=24, subject_id=sid
    )
    for name, vol in (("ct", phantom.ct), ("tissue", phantom.tissue),
                      ("vert", phantom.vertebrae)):
        write_volume(vol, work / f"{sid}_{name}.bcv")
    rows.append(f"{sid}_ct.bcv,{sid}_tissue.bcv,{sid}_vert.bcv")
    demo_lines.append(f"{sid},{55 + 5 * i},{'Female' if i % 2 else 'Male'},White,1.7{i}")
(work / "manifest.csv").write_text("ct,tissue,vertebrae\n" + "\n".join(rows) + "\n")
(work / "cohort.csv").write_text("\n".join(demo_lines) + "\n")

# --- measure the batch ----------------------------------------------------
run("measure", "--manifest", str(work / "manifest.csv"),
    "--cohort", str(work / "cohort.csv"), "--out", str(work / "results"))
with open(work / "results" / "results.csv") as fh:
    for row in csv.DictReader(fh):
        print(f"  {row['subject_id']}: area {row['muscle_area_2d_cm2']} cm^2, "
              f"SMI {row['smi_2d_cm2_m2']} cm^2/m^2")

# --- evaluate a degraded prediction ----------------------------------------
phantom = build_phantom(nx=64, ny=64, nz=24, subject_id="s01")
rng = np.random.default_rng(6)
pred_codes = np.asarray(phantom.tissue.codes).copy()
pred_codes[(pred_codes == 1) & (rng.random(pred_codes.shape) < 0.04)] = 0
write_volume(
    LabelVolume(codes=pred_codes, label_map=phantom.tissue.label_map,
                spacing_mm=phantom.tissue.spacing_mm),
    work / "s01_pred.bcv",
)
run("evaluate", "--gt", str(work / "s01_tissue.bcv"),
    "--pred", str(work / "s01_pred.bcv"), "--ct", str(work / "s01_ct.bcv"),
    "--vertebrae", str(work / "s01_vert.bcv"), "--out", str(work / "eval"))
print((work / "eval" / "eval.csv").read_text().splitlines()[0])
for line in (work / "eval" / "eval.csv").read_text().splitlines()[1:4]:
    print(line)

# --- slice selection and post-processing -----------------------------------
run("select-slice", "--vertebrae", str(work / "s01_vert.bcv"), "--level", "L3")
run("postprocess", "sat-skin", "--ct", str(work / "s01_ct.bcv"),
    "--mask", str(work / "s01_tissue.bcv"), "--out", str(work / "s01_skin.bcv"))

# --- cohort reports from the measured results --------------------------------
run("cohort", "--results", str(work / "results"),
    "--demographics", str(work / "cohort.csv"),
    "--min-group", "1", "--out", str(work / "cohort_out"))
print("group_stats.csv rows:",
      len((work / "cohort_out" / "group_stats.csv").read_text().splitlines()) - 1)
print("correlations.csv rows:",
      len((work / "cohort_out" / "correlations.csv").read_text().splitlines()) - 1)

print("\nall outputs under:", work)
