"""NIfTI-1 subset i/o: canonical bytes, round trips, annotation ingestion.

The writer always produces the same bytes for the same volume (fixed
header defaults, sform-only affine, data at offset 352), so outputs can be
diffed and golden-tested; anything a standard viewer writes within the
subset (uncompressed little-endian 3D .nii, uint8/int16/uint16/float32)
reads back in.
"""

import tempfile
from pathlib import Path

import numpy as np

from voxprop import (
    LabelSet,
    Volume3D,
    read_annotation,
    read_header,
    read_volume,
    strip_conflicts,
    write_volume,
)

tmp = Path(tempfile.mkdtemp(prefix="voxprop_nifti_"))
rng = np.random.default_rng(1)

# --- canonical write -> read -> write -------------------------------------------

vol = Volume3D(
    rng.random((8, 6, 4)).astype(np.float32).astype(np.float64),
    "intensity",
    spacing=(0.8, 0.8, 1.2),
    origin=(-32.0, -48.0, 10.5),
)
p1, p2 = tmp / "a.nii", tmp / "b.nii"
write_volume(vol, p1)
write_volume(read_volume(p1, "intensity"), p2)
print(f"write->read->write byte-identical: {p1.read_bytes() == p2.read_bytes()}")

hdr = read_header(p1)
print(f"header: dims={hdr.dims} spacing={hdr.spacing} datatype={hdr.datatype} "
      f"vox_offset={hdr.vox_offset:g}")

# --- per-structure masks with overlaps -------------------------------------------

labels = LabelSet(((3, "MD"), (5, "CL")))
md = np.zeros((6, 6, 6), dtype=bool)
cl = np.zeros((6, 6, 6), dtype=bool)
md[1:4, 2:5, 2:4] = True
cl[3:6, 2:5, 2:4] = True  # x=3 slab overlaps MD: conflicting voxels
paths = [tmp / "md.nii", tmp / "cl.nii"]
write_volume(Volume3D(md, "mask"), paths[0])
write_volume(Volume3D(cl, "mask"), paths[1])

annotation = read_annotation(paths, labels)
counts = annotation.label_counts()
print(f"\nannotation from 2 mask files: "
      f"{int((counts == 1).sum())} single-labeled, "
      f"{int((counts >= 2).sum())} conflicting voxels")

seeds, conflicts = strip_conflicts(annotation)
print(f"after conflict stripping: {int((seeds.data > 0).sum())} seeds remain, "
      f"{int(conflicts.data.sum())} voxels flagged ambiguous")

print(f"\nscratch files in {tmp}")
