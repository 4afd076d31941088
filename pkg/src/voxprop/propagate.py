"""End-to-end label propagation inside a region of interest.

Pipeline: multi-labeled voxels are cleared to unlabeled, the remaining
single-labeled voxels become fixed seeds, a 6-connected intensity-weighted
lattice is built over the roi, and the seeded Dirichlet problem is solved
per label. Outputs are soft per-label probability volumes plus the argmax
hard labeling, with a run report for auditing.

Connected roi pockets that end up with no seed at all cannot be solved
(singular block); the `seedless_policy` decides whether they abort the run,
stay background, or inherit the label of the spatially nearest seed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.ndimage import distance_transform_edt

from .dirichlet import SolverConfig, assemble, solve_all
from .errors import (
    DimMismatch,
    NoSeedsInRoi,
    OverlappingHemispheres,
    SeedlessComponent,
)
from .lattice import build_lattice, connected_components
from .volume import (
    BACKGROUND_ID,
    LabelSet,
    MultiLabelAnnotation,
    Volume3D,
    argmax_labels,
    require_same_dims,
    strip_conflicts,
)

log = logging.getLogger(__name__)

SEEDLESS_POLICIES = ("error", "nearest_seed", "background")


@dataclass(frozen=True)
class PropagationRequest:
    """Inputs for one propagation run.

    guidance supplies the edge-weight intensities (normalize to [0, 1]
    before building the request if beta is on its usual ~1e4 scale); roi
    bounds the solve; the annotation provides seeds after conflict
    stripping. `labels` defaults to the annotation's label set.
    """

    guidance: Volume3D
    roi: Volume3D
    annotation: MultiLabelAnnotation
    labels: LabelSet | None = None
    beta: float = 10_000.0
    solver: SolverConfig = field(default_factory=SolverConfig)
    seedless_policy: str = "nearest_seed"

    def __post_init__(self):
        if self.guidance.kind != "intensity":
            raise ValueError(f"guidance must be intensity, got {self.guidance.kind!r}")
        if self.roi.kind != "mask":
            raise ValueError(f"roi must be a mask, got {self.roi.kind!r}")
        if self.guidance.dims != self.roi.dims or self.guidance.dims != self.annotation.dims:
            raise DimMismatch(
                f"guidance {self.guidance.dims}, roi {self.roi.dims}, "
                f"annotation {self.annotation.dims} must share dims"
            )
        if self.labels is not None and self.labels != self.annotation.labels:
            raise ValueError("request labels differ from the annotation's label set")
        if not float(self.beta) >= 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if self.seedless_policy not in SEEDLESS_POLICIES:
            raise ValueError(
                f"seedless_policy {self.seedless_policy!r} not in {SEEDLESS_POLICIES}"
            )

    @property
    def label_set(self) -> LabelSet:
        return self.labels if self.labels is not None else self.annotation.labels


@dataclass(frozen=True)
class PropagationResult:
    """Soft and hard propagation outputs.

    `soft` holds one probability volume per label (ordered like `labels`),
    zero outside the labeled region; `hard` is their argmax over the region
    that received labels (equal to the roi under the nearest_seed policy)
    and background elsewhere. `report` collects run counts and per-label
    solver statistics.
    """

    labels: LabelSet
    soft: tuple[Volume3D, ...]
    hard: Volume3D
    report: dict


def _grid_volume(flat_values, dims, like: Volume3D, kind) -> Volume3D:
    data = np.asarray(flat_values).reshape(dims, order="F")
    return Volume3D(data, kind, like.spacing, like.origin)


def _nearest_seed_labels(
    fill_mask: np.ndarray,
    seeds_data: np.ndarray,
    labels: LabelSet,
    spacing,
) -> np.ndarray:
    """Label of the spacing-weighted nearest seed for each fill voxel.

    Ties go to the smaller label id. Returns the fill voxels' labels in
    x-fastest scan order of `fill_mask`.
    """
    fill_idx = np.flatnonzero(fill_mask.ravel(order="F"))
    dists = np.full((len(labels), fill_idx.size), np.inf)
    for k, lab in enumerate(labels.ids):
        seeded_here = seeds_data == lab
        if not seeded_here.any():
            continue
        d = distance_transform_edt(~seeded_here, sampling=spacing)
        dists[k] = d.ravel(order="F")[fill_idx]
    ids = np.asarray(labels.ids, dtype=np.uint16)
    return ids[np.argmin(dists, axis=0)]  # first minimum = smallest label id


def propagate(req: PropagationRequest, workers: int = 1) -> PropagationResult:
    """Run seeded random-walker propagation over the roi.

    Raises
    ------
    NoSeedsInRoi
        If, after conflict stripping, no single-labeled voxel lies in the roi.
    SeedlessComponent
        Under ``seedless_policy="error"`` when a roi component has no seed.
    """
    labels = req.label_set
    dims = require_same_dims(req.guidance, req.roi)
    roi_data = req.roi.data

    seeds_vol, conflict_vol = strip_conflicts(req.annotation)
    seeds_all = seeds_vol.data > 0
    seeds_in = seeds_all & roi_data
    n_outside = int((seeds_all & ~roi_data).sum())
    if n_outside:
        log.warning("dropping %d seeds outside the roi", n_outside)
    if not seeds_in.any():
        raise NoSeedsInRoi("no single-labeled voxel inside the roi")
    seeds_data = np.where(seeds_in, seeds_vol.data, BACKGROUND_ID).astype(np.uint16)

    graph = build_lattice(req.guidance, req.roi, req.beta)
    comp = connected_components(graph)
    n_components = int(comp.max()) + 1

    ids_flat = graph.node_ids.ravel(order="F")
    seed_flat = np.flatnonzero(seeds_in.ravel(order="F"))
    seed_nodes = ids_flat[seed_flat]
    seed_label_vals = seeds_data.ravel(order="F")[seed_flat]

    has_seed = np.zeros(n_components, dtype=bool)
    has_seed[comp[seed_nodes]] = True
    seedless_ids = np.flatnonzero(~has_seed)
    n_seedless_voxels = int((~has_seed[comp]).sum())

    if seedless_ids.size and req.seedless_policy == "error":
        raise SeedlessComponent(
            f"roi components {seedless_ids.tolist()} contain no seed "
            f"({n_seedless_voxels} voxels)",
            component_ids=seedless_ids,
        )

    fill_mask = np.zeros(dims, dtype=bool)
    if seedless_ids.size:
        # carve seedless pockets out and re-lattice the solvable part
        keep_nodes = has_seed[comp]
        dropped = graph.node_voxels[~keep_nodes]
        fill_flat = np.zeros(roi_data.size, dtype=bool)
        fill_flat[dropped] = True
        fill_mask = fill_flat.reshape(dims, order="F")
        solved_roi = req.roi.with_data(roi_data & ~fill_mask, "mask")
        graph = build_lattice(req.guidance, solved_roi, req.beta)
        ids_flat = graph.node_ids.ravel(order="F")
        seed_nodes = ids_flat[seed_flat]

    system = assemble(graph, (seed_nodes, seed_label_vals), labels)
    field_ = solve_all(system, req.solver, workers=workers)

    m = len(labels)
    soft_flat = np.zeros((m, roi_data.size))  # x-fastest linear order
    soft_flat[:, graph.node_voxels] = field_.values.T

    labeled_mask = roi_data & ~fill_mask
    if fill_mask.any() and req.seedless_policy == "nearest_seed":
        # fill voxels were carved out of the graph, so their soft rows are zero
        fill_labels = _nearest_seed_labels(fill_mask, seeds_data, labels, req.roi.spacing)
        fill_idx = np.flatnonzero(fill_mask.ravel(order="F"))
        col = {lab: k for k, lab in enumerate(labels.ids)}
        rows = np.array([col[int(l)] for l in fill_labels])
        soft_flat[rows, fill_idx] = 1.0
        labeled_mask = roi_data

    soft = tuple(
        _grid_volume(soft_flat[k], dims, req.roi, "probability") for k in range(m)
    )
    region = Volume3D(labeled_mask, "mask", req.roi.spacing, req.roi.origin)
    hard = argmax_labels(soft, labels, region)

    n_filled = int(fill_mask.sum()) if req.seedless_policy == "nearest_seed" else 0
    stats = [
        {
            "label_id": int(s.label_id),
            "name": labels.name(int(s.label_id)),
            "iterations": int(s.iterations),
            "residual": float(s.residual),
            "closure": bool(s.closure),
        }
        for s in field_.stats
    ]
    report = {
        "n_nodes": int(graph.n_nodes),
        "n_unseeded": int(system.n_unseeded),
        "n_seeds": int(seed_nodes.size),
        "n_seeds_outside_roi": n_outside,
        "n_conflicts_cleared": int((conflict_vol.data & roi_data).sum()),
        "n_components": n_components,
        "seedless_components": [int(c) for c in seedless_ids],
        "n_seedless_voxels": n_seedless_voxels,
        "n_policy_filled": n_filled,
        "policy": req.seedless_policy,
        "beta": float(req.beta),
        "rel_tol": float(req.solver.rel_tol),
        "labels": stats,
        "total_iterations": int(sum(s["iterations"] for s in stats)),
    }
    return PropagationResult(labels, soft, hard, report)


def propagate_bilateral(
    req: PropagationRequest,
    hemisphere_masks: tuple[Volume3D, Volume3D],
    workers: int = 1,
) -> PropagationResult:
    """Propagate each hemisphere independently and merge the results.

    The two masks must be disjoint and lie inside the request roi. Roi
    voxels outside both hemispheres follow the request's seedless policy.

    Raises
    ------
    OverlappingHemispheres
    NoSeedsInRoi
        If either hemisphere contains no seed.
    """
    left, right = hemisphere_masks
    for h in (left, right):
        if h.kind != "mask":
            raise ValueError(f"hemisphere masks must be masks, got {h.kind!r}")
    dims = require_same_dims(req.roi, left, right)
    if (left.data & right.data).any():
        raise OverlappingHemispheres("hemisphere masks intersect")
    union = left.data | right.data
    if (union & ~req.roi.data).any():
        raise ValueError("hemisphere masks extend outside the roi")

    results = [
        propagate(replace(req, roi=h), workers=workers) for h in (left, right)
    ]
    labels = req.label_set
    m = len(labels)

    gap = req.roi.data & ~union
    n_gap = int(gap.sum())
    if n_gap and req.seedless_policy == "error":
        raise SeedlessComponent(
            f"{n_gap} roi voxels lie outside both hemisphere masks"
        )

    soft_flat = np.stack(
        [
            (results[0].soft[k].data + results[1].soft[k].data).ravel(order="F")
            for k in range(m)
        ]
    )
    hard_data = np.where(
        left.data, results[0].hard.data, results[1].hard.data
    ).astype(np.uint16)
    hard_data[~union] = BACKGROUND_ID
    hard_flat = hard_data.ravel(order="F")
    labeled_mask = union

    n_gap_filled = 0
    if n_gap and req.seedless_policy == "nearest_seed":
        seeds_vol, _ = strip_conflicts(req.annotation)
        seeds_data = np.where(
            (seeds_vol.data > 0) & union, seeds_vol.data, BACKGROUND_ID
        ).astype(np.uint16)
        fill_labels = _nearest_seed_labels(gap, seeds_data, labels, req.roi.spacing)
        gap_idx = np.flatnonzero(gap.ravel(order="F"))
        hard_flat[gap_idx] = fill_labels
        col = {lab: k for k, lab in enumerate(labels.ids)}
        rows = np.array([col[int(l)] for l in fill_labels])
        soft_flat[rows, gap_idx] = 1.0
        labeled_mask = req.roi.data
        n_gap_filled = n_gap

    soft = tuple(
        _grid_volume(soft_flat[k], dims, req.roi, "probability") for k in range(m)
    )
    hard = _grid_volume(hard_flat, dims, req.roi, "label")

    report = {
        "mode": "bilateral",
        "hemispheres": [r.report for r in results],
        "n_gap_voxels": n_gap,
        "n_gap_filled": n_gap_filled,
        "policy": req.seedless_policy,
        "beta": float(req.beta),
        "n_labeled_voxels": int(labeled_mask.sum()),
    }
    return PropagationResult(labels, soft, hard, report)
