"""Independent test oracles.

Nothing in this module may call into voxprop's lattice or solver code:
adjacency is enumerated by brute force over voxel neighborhoods and the
Dirichlet systems are assembled and solved densely from scratch, so these
functions can serve as ground truth for the library's fast paths.
"""

from __future__ import annotations

import numpy as np


def brute_force_edges(roi: np.ndarray, intensity: np.ndarray, beta: float):
    """Enumerate 6-neighbor edges by looping voxels; x-fastest node ids.

    Returns (n_nodes, node_id_of_voxel dict, edges list of (i, j, w)).
    """
    nx, ny, nz = roi.shape
    node_of = {}
    nid = 0
    # x-fastest scan: x varies quickest
    for z in range(nz):
        for y in range(ny):
            for x in range(nx):
                if roi[x, y, z]:
                    node_of[(x, y, z)] = nid
                    nid += 1
    edges = []
    for (x, y, z), i in node_of.items():
        for dx, dy, dz in ((1, 0, 0), (0, 1, 0), (0, 0, 1)):
            q = (x + dx, y + dy, z + dz)
            if q in node_of:
                j = node_of[q]
                w = np.exp(-beta * (intensity[x, y, z] - intensity[q]) ** 2)
                edges.append((i, j, max(float(w), 1e-10)))
    return nid, node_of, edges


def dense_laplacian(n_nodes: int, edges) -> np.ndarray:
    L = np.zeros((n_nodes, n_nodes))
    for i, j, w in edges:
        L[i, i] += w
        L[j, j] += w
        L[i, j] -= w
        L[j, i] -= w
    return L


def dense_dirichlet(n_nodes: int, edges, seeds: dict, label_ids) -> np.ndarray:
    """Full (n_nodes, m) probability field by dense partitioned solve."""
    label_ids = list(label_ids)
    L = dense_laplacian(n_nodes, edges)
    seeded = sorted(seeds)
    unseeded = [v for v in range(n_nodes) if v not in seeds]
    field = np.zeros((n_nodes, len(label_ids)))
    for v in seeded:
        field[v, label_ids.index(seeds[v])] = 1.0
    if unseeded:
        L_U = L[np.ix_(unseeded, unseeded)]
        B = L[np.ix_(unseeded, seeded)]
        M = np.zeros((len(seeded), len(label_ids)))
        for r, v in enumerate(seeded):
            M[r, label_ids.index(seeds[v])] = 1.0
        field[unseeded] = np.linalg.solve(L_U, -B @ M)
    return field


def _walk_tables(n_nodes: int, edges):
    nbrs = [[] for _ in range(n_nodes)]
    ws = [[] for _ in range(n_nodes)]
    for i, j, w in edges:
        nbrs[i].append(j)
        ws[i].append(w)
        nbrs[j].append(i)
        ws[j].append(w)
    maxd = max(len(v) for v in nbrs)
    nbr = np.zeros((n_nodes, maxd), dtype=np.int64)
    cum = np.ones((n_nodes, maxd))
    for v in range(n_nodes):
        if ws[v]:
            nbr[v, : len(nbrs[v])] = nbrs[v]
            c = np.cumsum(ws[v]) / np.sum(ws[v])
            c[-1] = 1.0
            cum[v, : len(c)] = c
    return nbr, cum


def mc_absorption_frequencies(
    n_nodes: int,
    edges,
    seeds: dict,
    label_ids,
    start: int,
    n_walks: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Empirical per-label absorption frequencies of a discrete random walk.

    Walkers step to neighbor j with probability w_ij / sum_k w_ik and stop
    at the first seeded node; frequencies are counted over its label.
    """
    nbr, cum = _walk_tables(n_nodes, edges)
    is_seed = np.zeros(n_nodes, dtype=bool)
    label_of = np.zeros(n_nodes, dtype=np.int64)
    for v, lab in seeds.items():
        is_seed[v] = True
        label_of[v] = lab
    pos = np.full(n_walks, start, dtype=np.int64)
    absorbed_label = np.zeros(n_walks, dtype=np.int64)
    active = np.arange(n_walks)
    while active.size:
        r = rng.random(active.size)
        here = pos[active]
        choice = (cum[here] < r[:, None]).sum(axis=1)
        pos[active] = nbr[here, choice]
        hit = is_seed[pos[active]]
        if hit.any():
            done = active[hit]
            absorbed_label[done] = label_of[pos[done]]
            active = active[~hit]
    label_ids = list(label_ids)
    return np.array([(absorbed_label == lab).mean() for lab in label_ids])


def blobby_field(dims, n_blobs: int, rng: np.random.Generator, sigma: float = 0.005):
    """Piecewise-constant intensity field over Voronoi cells plus noise.

    Returns (intensity, blob_index) arrays; blob levels are spread over
    [0.1, 0.9] so neighboring cells contrast strongly.
    """
    centers = rng.uniform(0, np.asarray(dims, dtype=float) - 1, size=(n_blobs, 3))
    axes = [np.arange(d, dtype=float) for d in dims]
    X, Y, Z = np.meshgrid(*axes, indexing="ij")
    d2 = np.stack(
        [(X - c[0]) ** 2 + (Y - c[1]) ** 2 + (Z - c[2]) ** 2 for c in centers]
    )
    blob = np.argmin(d2, axis=0)
    levels = rng.permutation(np.linspace(0.1, 0.9, n_blobs))
    intensity = levels[blob]
    if sigma > 0:
        intensity = intensity + rng.normal(0.0, sigma, dims)
    return intensity, blob
