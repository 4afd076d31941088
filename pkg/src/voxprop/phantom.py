"""Synthetic multi-blob phantoms for exercising the propagation pipeline.

A phantom is a Voronoi partition of an ellipsoidal roi around k blob
centers. The guidance image is piecewise constant (one intensity per blob)
plus Gaussian noise; the truth labeling assigns every roi voxel to its
nearest center. The annotation is the truth degraded by clearing a fraction
of labeled voxels and double-labeling another fraction, which reproduces
the gap/overlap structure of hand-corrected per-structure delineations.

Everything is deterministic given the spec's RNG seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BadSpec
from .volume import BACKGROUND_ID, LabelSet, MultiLabelAnnotation, Volume3D


@dataclass(frozen=True)
class PhantomBlob:
    center: tuple[float, float, float]  # voxel coordinates
    label_id: int
    intensity: float


@dataclass(frozen=True)
class PhantomSpec:
    """Declarative phantom description.

    roi_semiaxes defaults to 0.45 * dims (an ellipsoid inside the grid).
    Fractions are measured against the labeled (roi) voxel count; their sum
    must not exceed 1. With keep_blob_centers, the voxel nearest each blob
    center is never corrupted, so every blob retains at least one seed.
    """

    dims: tuple[int, int, int]
    blobs: tuple[PhantomBlob, ...]
    roi_semiaxes: tuple[float, float, float] | None = None
    noise_sigma: float = 0.0
    unlabeled_fraction: float = 0.0
    conflict_fraction: float = 0.0
    keep_blob_centers: bool = True
    seed: int = 0
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    label_names: dict[int, str] | None = None

    def label_set(self) -> LabelSet:
        ids = sorted({b.label_id for b in self.blobs})
        names = self.label_names or {}
        return LabelSet(tuple((i, names.get(i, f"blob{i}")) for i in ids))

    @classmethod
    def from_dict(cls, d: dict) -> "PhantomSpec":
        try:
            blobs = tuple(
                PhantomBlob(tuple(b["center"]), int(b["label_id"]), float(b["intensity"]))
                for b in d["blobs"]
            )
            names = d.get("label_names")
            return cls(
                dims=tuple(int(v) for v in d["dims"]),
                blobs=blobs,
                roi_semiaxes=(
                    tuple(float(v) for v in d["roi_semiaxes"])
                    if d.get("roi_semiaxes") is not None
                    else None
                ),
                noise_sigma=float(d.get("noise_sigma", 0.0)),
                unlabeled_fraction=float(d.get("unlabeled_fraction", 0.0)),
                conflict_fraction=float(d.get("conflict_fraction", 0.0)),
                keep_blob_centers=bool(d.get("keep_blob_centers", True)),
                seed=int(d.get("seed", 0)),
                spacing=tuple(float(v) for v in d.get("spacing", (1.0, 1.0, 1.0))),
                label_names={int(k): str(v) for k, v in names.items()} if names else None,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise BadSpec(f"malformed phantom spec: {exc}") from exc

    @classmethod
    def from_json(cls, path) -> "PhantomSpec":
        try:
            d = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise BadSpec(f"cannot load phantom spec {path}: {exc}") from exc
        return cls.from_dict(d)


@dataclass(frozen=True)
class Phantom:
    """Generated phantom volumes; `labels` mirrors annotation.labels."""

    guidance: Volume3D
    roi: Volume3D
    annotation: MultiLabelAnnotation
    truth: Volume3D

    @property
    def labels(self) -> LabelSet:
        return self.annotation.labels


def _validate(spec: PhantomSpec) -> None:
    if len(spec.dims) != 3 or min(spec.dims) < 1:
        raise BadSpec(f"dims must be 3 positive ints, got {spec.dims}")
    if not spec.blobs:
        raise BadSpec("at least one blob is required")
    for b in spec.blobs:
        if len(b.center) != 3:
            raise BadSpec(f"blob center {b.center} is not 3D")
        if not all(0 <= c < d for c, d in zip(b.center, spec.dims)):
            raise BadSpec(f"blob center {b.center} outside dims {spec.dims}")
        if b.label_id <= BACKGROUND_ID:
            raise BadSpec(f"blob label id must be positive, got {b.label_id}")
    for name, frac in (
        ("unlabeled_fraction", spec.unlabeled_fraction),
        ("conflict_fraction", spec.conflict_fraction),
    ):
        if not 0.0 <= frac <= 1.0:
            raise BadSpec(f"{name} must be in [0, 1], got {frac}")
    if spec.unlabeled_fraction + spec.conflict_fraction > 1.0 + 1e-12:
        raise BadSpec("unlabeled_fraction + conflict_fraction exceeds 1")
    if spec.noise_sigma < 0:
        raise BadSpec(f"noise_sigma must be >= 0, got {spec.noise_sigma}")
    if spec.conflict_fraction > 0 and len({b.label_id for b in spec.blobs}) < 2:
        raise BadSpec("conflicts need at least two distinct labels")
    if spec.roi_semiaxes is not None and min(spec.roi_semiaxes) <= 0:
        raise BadSpec(f"roi semiaxes must be positive, got {spec.roi_semiaxes}")


def make_phantom(spec: PhantomSpec) -> Phantom:
    """Generate guidance, roi, corrupted annotation, and truth volumes.

    Raises
    ------
    BadSpec
        On inconsistent parameters (fractions outside [0, 1], centers
        outside the grid, conflicts requested with a single label, ...).
    """
    _validate(spec)
    rng = np.random.default_rng(spec.seed)
    nx, ny, nz = spec.dims
    labels = spec.label_set()

    xs = np.arange(nx, dtype=np.float64)
    ys = np.arange(ny, dtype=np.float64)
    zs = np.arange(nz, dtype=np.float64)
    X, Y, Z = np.meshgrid(xs, ys, zs, indexing="ij")

    # squared voxel distance to every blob center
    k = len(spec.blobs)
    d2 = np.empty((k,) + spec.dims)
    for i, b in enumerate(spec.blobs):
        cx, cy, cz = b.center
        d2[i] = (X - cx) ** 2 + (Y - cy) ** 2 + (Z - cz) ** 2
    nearest = np.argmin(d2, axis=0)

    semi = spec.roi_semiaxes or tuple(0.45 * d for d in spec.dims)
    cx, cy, cz = ((nx - 1) / 2, (ny - 1) / 2, (nz - 1) / 2)
    roi_data = (
        ((X - cx) / semi[0]) ** 2
        + ((Y - cy) / semi[1]) ** 2
        + ((Z - cz) / semi[2]) ** 2
    ) <= 1.0
    if not roi_data.any():
        raise BadSpec("roi semiaxes select no voxels")

    blob_intensity = np.array([b.intensity for b in spec.blobs])
    guidance_data = blob_intensity[nearest]
    if spec.noise_sigma > 0:
        guidance_data = guidance_data + rng.normal(0.0, spec.noise_sigma, spec.dims)

    blob_label = np.array([b.label_id for b in spec.blobs], dtype=np.uint16)
    truth_data = np.where(roi_data, blob_label[nearest], BACKGROUND_ID).astype(np.uint16)

    # corrupt: pick disjoint unlabeled/conflict subsets of the labeled voxels
    flat_truth = truth_data.ravel(order="F")
    labeled_idx = np.flatnonzero(flat_truth)
    n_labeled = labeled_idx.size

    protected = np.zeros(0, dtype=np.int64)
    if spec.keep_blob_centers:
        centers = []
        for b in spec.blobs:
            ci = tuple(int(round(c)) for c in b.center)
            if roi_data[ci]:
                centers.append(ci[0] + nx * ci[1] + nx * ny * ci[2])
        protected = np.asarray(sorted(set(centers)), dtype=np.int64)

    eligible = np.setdiff1d(labeled_idx, protected)
    n_unlab = min(int(round(spec.unlabeled_fraction * n_labeled)), eligible.size)
    n_conf = min(
        int(round(spec.conflict_fraction * n_labeled)), eligible.size - n_unlab
    )
    picked = rng.choice(eligible, size=n_unlab + n_conf, replace=False)
    unlab_idx = picked[:n_unlab]
    conf_idx = picked[n_unlab:]

    m = len(labels)
    masks_flat = np.zeros((m, flat_truth.size), dtype=bool)
    for j, lab in enumerate(labels.ids):
        masks_flat[j] = flat_truth == lab
    masks_flat[:, unlab_idx] = False

    if conf_idx.size:
        # second label: a random draw among the nearest few other blobs
        d2_flat = np.stack([d2[i].ravel(order="F") for i in range(k)])
        own = flat_truth[conf_idx]
        order = np.argsort(d2_flat[:, conf_idx], axis=0)  # (k, n_conf)
        col_of = {lab: j for j, lab in enumerate(labels.ids)}
        n_cand = min(3, k - 1)
        for t, vox in enumerate(conf_idx):
            cands = []
            for r in range(k):
                lab = int(blob_label[order[r, t]])
                if lab != own[t] and lab not in cands:
                    cands.append(lab)
                if len(cands) == n_cand:
                    break
            second = cands[int(rng.integers(len(cands)))]
            masks_flat[col_of[second], vox] = True

    masks = np.stack([masks_flat[j].reshape(spec.dims, order="F") for j in range(m)])

    guidance = Volume3D(guidance_data, "intensity", spec.spacing)
    roi = Volume3D(roi_data, "mask", spec.spacing)
    truth = Volume3D(truth_data, "label", spec.spacing)
    annotation = MultiLabelAnnotation(labels, masks, spec.spacing)
    return Phantom(guidance, roi, annotation, truth)
