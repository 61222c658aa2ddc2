"""Write a two-case synthetic review fixture for the frontend e2e test.

Usage: python3 make_fixture.py <output_dir>
Each case gets a CT-ish image and a label volume with spleen, liver, and
stomach_bowel present.
"""

import json
import sys
from pathlib import Path

import numpy as np

from oar_evalkit import Grid, ImageVolume, LabelVolume, default_schema, write_nifti

out = Path(sys.argv[1])
(out / "labels").mkdir(parents=True, exist_ok=True)

schema = default_schema()
shape, spacing = (24, 24, 16), (1.0, 1.0, 2.0)
grid = Grid(shape, spacing)

labels = np.zeros(shape, dtype=np.uint8)
labels[2:8, 2:8, 2:7] = schema.code_of("spleen")
labels[2:9, 10:17, 2:7] = schema.code_of("liver")
labels[14:19, 2:7, 6:11] = schema.code_of("stomach_bowel")

rng = np.random.default_rng(5)
hu = rng.normal(0.0, 30.0, shape).astype(np.float32)
hu[labels > 0] += 70.0

entries = []
for i, case_id in enumerate(("case_a", "case_b")):
    write_nifti(ImageVolume(grid, hu), out / f"{case_id}_ct.nii.gz")
    write_nifti(LabelVolume(grid, labels), out / "labels" / f"{case_id}.nii.gz")
    entries.append({
        "case_id": case_id,
        "patient_id": f"patient_{i}",
        "dataset": "synthetic",
        "age_years": 3.0 + i,
        "sex": "female" if i else "male",
        "tumor_type": "renal",
        "iv_contrast": "no",
        "nephrectomy_side": "none",
        "image_path": f"{case_id}_ct.nii.gz",
        "label_paths": {},
    })

(out / "manifest.json").write_text(
    json.dumps({"schema_ref": "default", "cases": entries}, indent=2))
print(str(out / "manifest.json"))
