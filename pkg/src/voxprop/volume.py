"""Dense 3D volumes, label sets, and annotation-preparation transforms.

A :class:`Volume3D` is a dense scalar grid indexed ``data[x, y, z]`` with
millimeter spacing and a world-space origin. The element kind decides the
stored dtype:

============  =========  =======================================
kind          dtype      meaning
============  =========  =======================================
intensity     float64    image gray values (guidance contrasts)
probability   float64    per-label membership in [0, 1]
label         uint16     label ids, 0 = background
mask          bool       region membership
============  =========  =======================================

Linear (file) order is x-fastest: voxel ``(x, y, z)`` sits at flat index
``x + nx*y + nx*ny*z``, i.e. ``data.ravel(order="F")``.

All containers are immutable after construction (their arrays are marked
read-only), so they are safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Literal, Sequence

import numpy as np

from .errors import ConstantVolume, DimMismatch, TargetTooLarge

ElementKind = Literal["intensity", "label", "mask", "probability"]

ELEMENT_KINDS = ("intensity", "label", "mask", "probability")

_KIND_DTYPE = {
    "intensity": np.float64,
    "probability": np.float64,
    "label": np.uint16,
    "mask": np.bool_,
}

#: Reserved background label id; never a member of a LabelSet.
BACKGROUND_ID = 0


def _as_triple(value, name: str, typ=float) -> tuple:
    out = tuple(typ(v) for v in value)
    if len(out) != 3:
        raise ValueError(f"{name} must have exactly 3 entries, got {len(out)}")
    return out


@dataclass(frozen=True)
class Volume3D:
    """Dense 3D scalar grid with geometry metadata.

    Parameters
    ----------
    data : array_like, shape (nx, ny, nz)
        Voxel values, indexed ``data[x, y, z]``. Cast to the dtype of
        `kind`; mask input must contain only {0, 1} and label input only
        non-negative integers below 2**16.
    kind : {"intensity", "label", "mask", "probability"}
    spacing : 3 floats, mm per voxel along x, y, z. All > 0.
    origin : 3 floats, world coordinates (mm) of voxel (0, 0, 0).
    """

    data: np.ndarray
    kind: ElementKind = "intensity"
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.kind not in ELEMENT_KINDS:
            raise ValueError(f"unknown element kind {self.kind!r}")
        arr = np.asarray(self.data)
        if arr.ndim != 3:
            raise ValueError(f"expected a 3D array, got shape {arr.shape}")
        if min(arr.shape) < 1:
            raise ValueError(f"all dims must be >= 1, got {arr.shape}")
        if self.kind == "mask" and arr.dtype != np.bool_:
            if not np.isin(arr, (0, 1)).all():
                raise ValueError("mask volumes may contain only 0 and 1")
        if self.kind == "label" and arr.dtype != np.uint16:
            if not np.issubdtype(arr.dtype, np.integer):
                raise ValueError("label volumes require integer data")
            if arr.size and (arr.min() < 0 or arr.max() > np.iinfo(np.uint16).max):
                raise ValueError("label ids must fit in uint16")
        arr = arr.astype(_KIND_DTYPE[self.kind], copy=True)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "spacing", _as_triple(self.spacing, "spacing"))
        object.__setattr__(self, "origin", _as_triple(self.origin, "origin"))
        if min(self.spacing) <= 0:
            raise ValueError(f"spacing must be positive, got {self.spacing}")

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(int(d) for d in self.data.shape)

    @property
    def n_voxels(self) -> int:
        return int(self.data.size)

    def with_data(self, data, kind: ElementKind | None = None) -> "Volume3D":
        """New volume on the same grid (spacing/origin preserved)."""
        return Volume3D(data, kind or self.kind, self.spacing, self.origin)

    def same_grid(self, other: "Volume3D") -> bool:
        return self.dims == other.dims


def require_same_dims(*volumes) -> tuple[int, int, int]:
    """Raise :class:`DimMismatch` unless all inputs share voxel dimensions."""
    dims = volumes[0].dims
    for v in volumes[1:]:
        if v.dims != dims:
            raise DimMismatch(f"volume dims differ: {dims} vs {v.dims}")
    return dims


@dataclass(frozen=True)
class LabelSet:
    """Ordered set of (label_id, name) pairs.

    Ids are unique, strictly positive, sorted ascending, and fit in uint16.
    Id 0 is reserved for background and is never a member.
    """

    entries: tuple[tuple[int, str], ...]

    background_id = BACKGROUND_ID

    def __post_init__(self):
        entries = tuple((int(i), str(n)) for i, n in self.entries)
        if not entries:
            raise ValueError("a LabelSet needs at least one label")
        ids = [i for i, _ in entries]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate label ids: {ids}")
        if ids != sorted(ids):
            raise ValueError(f"label ids must be sorted ascending: {ids}")
        if ids[0] <= BACKGROUND_ID:
            raise ValueError("label ids must be strictly positive")
        if ids[-1] > np.iinfo(np.uint16).max:
            raise ValueError("label ids must fit in uint16")
        object.__setattr__(self, "entries", entries)

    @classmethod
    def from_ids(cls, ids: Iterable[int]) -> "LabelSet":
        """Label set with autogenerated names, for tests and quick scripts."""
        return cls(tuple((int(i), f"label{int(i)}") for i in sorted(ids)))

    @property
    def ids(self) -> tuple[int, ...]:
        return tuple(i for i, _ in self.entries)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for _, n in self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, label_id) -> bool:
        return int(label_id) in self.ids

    def index(self, label_id: int) -> int:
        """Position of `label_id` in the ordered entries."""
        try:
            return self.ids.index(int(label_id))
        except ValueError:
            raise KeyError(f"label id {label_id} not in label set") from None

    def name(self, label_id: int) -> str:
        return self.entries[self.index(label_id)][1]


def read_labelset(path) -> LabelSet:
    """Parse a labelset file: one ``id<TAB>name`` per line, ``#`` comments."""
    entries = []
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            # tolerate runs of spaces when no tab is present
            parts = line.split(None, 1)
        if len(parts) != 2:
            raise ValueError(f"bad labelset line: {raw!r}")
        entries.append((int(parts[0]), parts[1].strip()))
    return LabelSet(tuple(entries))


def write_labelset(labels: LabelSet, path) -> None:
    lines = [f"{i}\t{n}" for i, n in labels.entries]
    Path(path).write_text("\n".join(lines) + "\n")


@dataclass(frozen=True)
class MultiLabelAnnotation:
    """Per-voxel sets of label ids, stored as one binary volume per label.

    ``masks[k]`` marks the voxels carrying ``labels.ids[k]``. A voxel's set
    may be empty (unlabeled), a singleton, or larger (conflicting labels
    from overlapping per-structure delineations).
    """

    labels: LabelSet
    masks: np.ndarray  # bool, shape (m, nx, ny, nz)
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        masks = np.asarray(self.masks)
        if masks.ndim != 4:
            raise ValueError(f"masks must be (m, nx, ny, nz), got {masks.shape}")
        if masks.shape[0] != len(self.labels):
            raise ValueError(
                f"{masks.shape[0]} mask volumes for {len(self.labels)} labels"
            )
        masks = masks.astype(bool, copy=True)
        masks.setflags(write=False)
        object.__setattr__(self, "masks", masks)
        object.__setattr__(self, "spacing", _as_triple(self.spacing, "spacing"))
        object.__setattr__(self, "origin", _as_triple(self.origin, "origin"))

    @classmethod
    def from_label_volume(cls, vol: Volume3D, labels: LabelSet) -> "MultiLabelAnnotation":
        """Singleton annotation from a hard label volume."""
        present = np.unique(vol.data)
        stray = [int(i) for i in present if i != BACKGROUND_ID and i not in labels]
        if stray:
            raise ValueError(f"label volume contains undeclared ids {stray}")
        masks = np.stack([vol.data == i for i in labels.ids])
        return cls(labels, masks, vol.spacing, vol.origin)

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(int(d) for d in self.masks.shape[1:])

    def label_counts(self) -> np.ndarray:
        """Per-voxel count of assigned labels, shape (nx, ny, nz)."""
        return self.masks.sum(axis=0, dtype=np.int64)


@dataclass(frozen=True)
class MembershipField:
    """Per-voxel fractional membership over a label set.

    ``values[k]`` is the membership volume for ``labels.ids[k]``; rows sum
    to 1 at labeled voxels and to 0 at unlabeled ones.
    """

    labels: LabelSet
    values: np.ndarray  # float64, shape (m, nx, ny, nz)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 4 or values.shape[0] != len(self.labels):
            raise ValueError(f"values shape {values.shape} does not match label set")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


# --- operations ---------------------------------------------------------------


def min_max_normalize(v: Volume3D, roi: Volume3D | None = None) -> Volume3D:
    """Affinely map intensities so the roi minimum is 0 and maximum is 1.

    Statistics are computed inside `roi` (default: the whole volume); the
    same affine map is applied everywhere, so voxels outside the roi may
    land outside [0, 1] -- they are deliberately not clamped.

    Raises
    ------
    ConstantVolume
        If the volume has a single value inside the roi.
    """
    if v.kind != "intensity":
        raise ValueError(f"expected an intensity volume, got {v.kind!r}")
    if roi is not None:
        if roi.kind != "mask":
            raise ValueError(f"roi must be a mask volume, got {roi.kind!r}")
        require_same_dims(v, roi)
        inside = v.data[roi.data]
        if inside.size == 0:
            raise ConstantVolume("roi selects no voxels")
    else:
        inside = v.data
    lo = float(inside.min())
    hi = float(inside.max())
    if hi == lo:
        raise ConstantVolume(f"volume is constant ({lo}) inside the roi")
    return v.with_data((v.data - lo) / (hi - lo))


def center_crop(v: Volume3D, target: Sequence[int]) -> Volume3D:
    """Crop to `target` dims, centered per axis.

    When ``dim - target`` is odd the extra voxel is trimmed from the
    high-index side. The origin shifts so retained voxels keep their world
    coordinates.

    Raises
    ------
    TargetTooLarge
        If any target dim exceeds the source dim.
    """
    target = tuple(int(t) for t in target)
    if len(target) != 3 or min(target) < 1:
        raise ValueError(f"target must be 3 positive ints, got {target}")
    dims = v.dims
    if any(t > d for t, d in zip(target, dims)):
        raise TargetTooLarge(f"target {target} exceeds volume dims {dims}")
    start = tuple((d - t) // 2 for d, t in zip(dims, target))
    sl = tuple(slice(s, s + t) for s, t in zip(start, target))
    origin = tuple(o + s * sp for o, s, sp in zip(v.origin, start, v.spacing))
    return Volume3D(v.data[sl], v.kind, v.spacing, origin)


def strip_conflicts(a: MultiLabelAnnotation) -> tuple[Volume3D, Volume3D]:
    """Split an annotation into single-label seeds and a conflict mask.

    Voxels with exactly one label keep it; voxels with several labels
    become background (they are recorded in the conflict mask instead);
    unlabeled voxels stay background.

    Returns
    -------
    seeds : Volume3D[label]
    conflict_mask : Volume3D[mask]
        1 exactly where two or more labels were assigned.
    """
    counts = a.label_counts()
    ids = np.asarray(a.labels.ids, dtype=np.int64)
    summed = (ids[:, None, None, None] * a.masks).sum(axis=0)
    seeds = np.where(counts == 1, summed, BACKGROUND_ID).astype(np.uint16)
    conflicts = counts >= 2
    return (
        Volume3D(seeds, "label", a.spacing, a.origin),
        Volume3D(conflicts, "mask", a.spacing, a.origin),
    )


def to_membership(a: MultiLabelAnnotation) -> MembershipField:
    """Spread each voxel's unit mass evenly over its n assigned labels.

    A voxel with n >= 1 labels receives 1/n on each of them; unlabeled
    voxels get the zero vector.
    """
    counts = a.label_counts().astype(np.float64)
    values = np.zeros(a.masks.shape, dtype=np.float64)
    np.divide(a.masks, counts, out=values, where=counts > 0)
    return MembershipField(a.labels, values)


def argmax_labels(
    probs: Sequence[Volume3D] | np.ndarray,
    labels: LabelSet,
    roi: Volume3D,
) -> Volume3D:
    """Hard labels from per-label probability volumes.

    Each roi voxel receives the label with the highest probability; exact
    ties go to the smallest label id. Voxels outside the roi are background.

    Parameters
    ----------
    probs : sequence of Volume3D[probability] or array (m, nx, ny, nz)
        One probability volume per label, ordered like `labels`.
    """
    if roi.kind != "mask":
        raise ValueError(f"roi must be a mask volume, got {roi.kind!r}")
    if isinstance(probs, np.ndarray):
        stack = np.asarray(probs, dtype=np.float64)
    else:
        for p in probs:
            require_same_dims(p, roi)
        stack = np.stack([p.data for p in probs])
    if stack.ndim != 4 or stack.shape[0] != len(labels):
        raise ValueError(
            f"need one probability volume per label ({len(labels)}), "
            f"got shape {stack.shape}"
        )
    if stack.shape[1:] != roi.dims:
        raise DimMismatch(f"probability dims {stack.shape[1:]} vs roi {roi.dims}")
    ids = np.asarray(labels.ids, dtype=np.uint16)
    best = ids[np.argmax(stack, axis=0)]  # argmax takes the first (smallest id) on ties
    hard = np.where(roi.data, best, BACKGROUND_ID).astype(np.uint16)
    return Volume3D(hard, "label", roi.spacing, roi.origin)
