"""Clinician review service, end to end on a synthetic fixture.

Starts the HTTP service on a free port, walks the API as the review UI
would (list cases, fetch a slice rendering, submit Likert scores), and
prints the live usability summary.
"""

import json
import tempfile
import threading
import urllib.request
from pathlib import Path

import numpy as np

from oar_evalkit import Grid, ImageVolume, LabelVolume, default_schema, write_nifti
from oar_evalkit.manifest import load_manifest
from oar_evalkit.review import ReviewService, make_server

schema = default_schema()
work = Path(tempfile.mkdtemp(prefix="oar_review_demo_"))
shape, spacing = (32, 32, 20), (1.0, 1.0, 2.0)
grid = Grid(shape, spacing)

# two synthetic cases: a CT-ish image plus a three-organ label volume
rng = np.random.default_rng(11)
labels = np.zeros(shape, dtype=np.uint8)
labels[4:14, 4:14, 4:10] = schema.code_of("liver")
labels[18:26, 6:12, 6:12] = schema.code_of("spleen")
labels[16:24, 18:26, 8:14] = schema.code_of("stomach_bowel")
hu = rng.normal(0, 40, shape).astype(np.float32)
hu[labels > 0] += 80.0

(work / "labels").mkdir()
entries = []
for i, case_id in enumerate(("demo_a", "demo_b")):
    write_nifti(ImageVolume(grid, hu), work / f"{case_id}_ct.nii.gz")
    write_nifti(LabelVolume(grid, labels), work / "labels" / f"{case_id}.nii.gz")
    entries.append({"case_id": case_id, "patient_id": f"pat{i}",
                    "age_years": 4.0 + i, "sex": "female",
                    "image_path": f"{case_id}_ct.nii.gz", "label_paths": {}})
(work / "manifest.json").write_text(json.dumps({"cases": entries}))

service = ReviewService(manifest=load_manifest(work / "manifest.json"),
                        schema=schema, labels_dir=work / "labels",
                        scores_path=work / "scores.jsonl", base_dir=work)
server = make_server(service, port=0)
threading.Thread(target=server.serve_forever, daemon=True).start()
base = f"http://127.0.0.1:{server.server_address[1]}"
print(f"service on {base}")

with urllib.request.urlopen(f"{base}/api/cases") as resp:
    cases = json.loads(resp.read())["cases"]
print(f"cases: {[c['case_id'] for c in cases]}")

with urllib.request.urlopen(f"{base}/api/cases/demo_a/slices/axial/6"
                            "?overlays=liver,spleen") as resp:
    png = resp.read()
print(f"axial slice PNG: {len(png)} bytes")

for organ, score in (("liver", 5), ("spleen", 4), ("stomach_bowel", 2)):
    body = json.dumps({"rater_id": "R1", "organ": organ, "score": score})
    req = urllib.request.Request(f"{base}/api/cases/demo_a/scores",
                                 data=body.encode(), method="POST")
    urllib.request.urlopen(req)

with urllib.request.urlopen(f"{base}/api/summary/likert") as resp:
    summary = json.loads(resp.read())["organs"]
for organ in summary:
    print(f"  {organ['organ']}: mean {organ['combined_mean']:.1f} "
          f"-> {organ['usability']}")

server.shutdown()
server.server_close()
