"""Label harmonization walkthrough.

Merge bowel parts into stomach_bowel, fill a missing heart from the
auxiliary source, resolve overlapping claims by priority tier, and clean up
satellite components.
"""

import numpy as np

from oar_evalkit import (complement_missing, default_schema,
                         keep_largest_component, merge_labels,
                         resolve_overlaps)
from oar_evalkit.volume import Grid

schema = default_schema()
shape = (20, 20, 12)
grid = Grid(shape, (1.0, 1.0, 2.0))


def box(lo, hi):
    m = np.zeros(shape, dtype=bool)
    m[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]] = True
    return m


# clinical exports often ship stomach / small / large intestine separately
clinical = merge_labels(
    [(box((2, 2, 2), (6, 6, 5)), "stomach"),
     (box((5, 2, 2), (10, 6, 5)), "small_intestine"),
     (box((8, 2, 2), (14, 6, 5)), "large_intestine"),
     (box((2, 10, 2), (8, 16, 6)), "spleen")],
    schema)
print(f"after merge: {sorted(clinical)} "
      f"(stomach_bowel = {int(clinical['stomach_bowel'].sum())} voxels)")

# the heart is missing clinically; the auxiliary source fills it in
auxiliary = {"heart": box((12, 12, 6), (18, 18, 10)),
             "spleen": box((0, 0, 0), (4, 4, 4))}   # ignored: clinical wins
masks, provenance = complement_missing(clinical, auxiliary, schema)
print("provenance:", {k: v for k, v in provenance.items() if v != "absent"})

# spleen and stomach_bowel claims overlap -> the earlier tier (spleen) wins
masks["stomach_bowel"] = masks["stomach_bowel"] | box((3, 11, 3), (5, 13, 5))
labels = resolve_overlaps(masks, schema, grid)
contested = box((3, 11, 3), (5, 13, 5)) & masks["spleen"]
winner = schema.name_of(int(labels.voxels[contested][0]))
print(f"contested voxels went to: {winner}")

# post-processing cleanup: keep only the largest connected component
noisy = masks["spleen"].copy()
noisy[19, 19, 11] = True                     # a one-voxel satellite
cleaned = keep_largest_component(noisy, connectivity=26)
print(f"largest-component cleanup: {int(noisy.sum())} -> {int(cleaned.sum())} voxels")
