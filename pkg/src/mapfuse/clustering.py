"""Entropy feature extraction and investigator-map clustering.

Maps are grouped by how their per-pixel uncertainty is distributed: each
map is reduced to a flat vector of pixel-wise Shannon entropies (bits),
and those vectors are partitioned with hand-rolled k-Means (squared
Euclidean) or k-Medoids/PAM (Manhattan). Entropy rasters share one unit
and one range, so rows are deliberately left unstandardized.

Cluster numbering is canonical: clusters are ordered by their smallest
member index, so identical inputs yield identical models regardless of
internal restart bookkeeping.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from .grids import EntropyRaster, ProbabilityRaster, _freeze


def entropy_map(p: ProbabilityRaster) -> EntropyRaster:
    """Per-pixel Shannon entropy in bits, with 0*log2(0) = 0."""
    v = p.values
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(v > 0, v * np.log2(v), 0.0)
    h = -terms.sum(axis=2)
    # fp rounding can push a hair past the closed bounds
    return EntropyRaster(p.shape, np.clip(h, 0.0, np.log2(p.shape.n_classes)))


@dataclass(frozen=True)
class EntropyFeatureMatrix:
    """One flattened entropy raster per investigator map."""

    rows: np.ndarray          # (J, H*W) bits
    max_entropy: float        # log2(C), the feature-space ceiling

    def __post_init__(self):
        r = np.asarray(self.rows, dtype=np.float64)
        if r.ndim != 2 or r.shape[0] < 1:
            raise ValueError(f"expected (J, n_pixels) rows, got {r.shape}")
        if (r < 0).any() or (r > self.max_entropy + 1e-9).any():
            raise ValueError("entropy features outside [0, log2(C)]")
        object.__setattr__(self, "rows", _freeze(r))

    @property
    def n_maps(self) -> int:
        return self.rows.shape[0]

    @property
    def n_features(self) -> int:
        return self.rows.shape[1]


def entropy_features(maps) -> EntropyFeatureMatrix:
    if len(maps) == 0:
        raise ValueError("no maps")
    shape = maps[0].shape
    for m in maps[1:]:
        if m.shape != shape:
            raise ValueError(f"shape mismatch: {m.shape} != {shape}")
    rows = np.stack([entropy_map(m).values.ravel() for m in maps])
    return EntropyFeatureMatrix(rows=rows, max_entropy=float(np.log2(shape.n_classes)))


@dataclass(frozen=True)
class ClusterModel:
    method: str               # "kmeans" | "kmedoids"
    k: int
    assignment: np.ndarray    # (J,) cluster index per map
    centers: np.ndarray       # kmeans: (k, F) centroids; kmedoids: (k,) map indices
    inertia: float
    seed: int

    def __post_init__(self):
        if self.method not in ("kmeans", "kmedoids"):
            raise ValueError(f"unknown method {self.method!r}")
        a = np.asarray(self.assignment, dtype=np.int64)
        if set(np.unique(a)) != set(range(self.k)):
            raise ValueError("every cluster must be non-empty")
        object.__setattr__(self, "assignment", _freeze(a))
        object.__setattr__(self, "centers", _freeze(np.asarray(self.centers)))


def _canonical(assignment: np.ndarray, k: int) -> np.ndarray:
    """Relabel clusters in order of first appearance (smallest member index)."""
    order = {}
    for a in assignment:
        if a not in order:
            order[a] = len(order)
    if len(order) != k:
        raise ValueError("every cluster must be non-empty")
    return np.array([order[a] for a in assignment], dtype=np.int64)


def _check_k(k: int, n: int) -> None:
    if k < 2:
        raise ValueError(f"k must be at least 2, got {k}")
    if k > n:
        raise ValueError(f"k={k} exceeds the {n} available maps")


def _kmeanspp(x: np.ndarray, k: int, rng) -> np.ndarray:
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    d2 = ((x - centers[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total == 0:
            centers[c] = x[rng.integers(n)]
            continue
        centers[c] = x[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, ((x - centers[c]) ** 2).sum(axis=1))
    return centers


def _lloyd(x: np.ndarray, k: int, rng) -> tuple[np.ndarray, np.ndarray, float]:
    centers = _kmeanspp(x, k, rng)
    assign = np.full(x.shape[0], -1)
    prev_inertia = np.inf
    for _ in range(300):
        d2 = cdist(x, centers, "sqeuclidean")
        new_assign = d2.argmin(axis=1)
        for empty in range(k):
            if not (new_assign == empty).any():
                # donate the globally worst-fit point to the empty cluster
                far = d2[np.arange(len(new_assign)), new_assign].argmax()
                new_assign[far] = empty
                d2[far] = 0
        for c in range(k):
            centers[c] = x[new_assign == c].mean(axis=0)
        inertia = float(((x - centers[new_assign]) ** 2).sum())
        assert inertia <= prev_inertia + 1e-9 * max(1.0, prev_inertia), \
            "k-means inertia increased"
        prev_inertia = inertia
        if (new_assign == assign).all():
            break
        assign = new_assign
    return assign, centers, prev_inertia


def kmeans_cluster(features: EntropyFeatureMatrix, k: int, seed: int) -> ClusterModel:
    """Lloyd's algorithm, k-means++ start, best of 10 seeded restarts."""
    x = features.rows
    _check_k(k, features.n_maps)
    best = None
    for restart in range(10):
        rng = np.random.default_rng((seed, restart))
        assign, centers, inertia = _lloyd(x, k, rng)
        if best is None or inertia < best[2]:
            best = (assign, centers, inertia)
    assign, centers, inertia = best
    assign = _canonical(assign, k)
    # reorder centroid rows to match the canonical numbering
    centers = np.stack([x[assign == c].mean(axis=0) for c in range(k)])
    return ClusterModel("kmeans", k, assign, centers, inertia, seed)


def _pam_cost(dist: np.ndarray, medoids) -> float:
    return float(dist[:, medoids].min(axis=1).sum())


def kmedoids_cluster(features: EntropyFeatureMatrix, k: int, seed: int) -> ClusterModel:
    """PAM build + swap under Manhattan distance; seed breaks cost ties."""
    x = features.rows
    n = features.n_maps
    _check_k(k, n)
    rng = np.random.default_rng(seed)
    dist = cdist(x, x, "cityblock")

    def pick(cands, costs):
        lo = costs.min()
        tied = cands[costs <= lo]
        return int(tied[rng.integers(len(tied))])

    # BUILD: greedy seeding, first medoid minimizes total distance
    medoids = [pick(np.arange(n), dist.sum(axis=1))]
    while len(medoids) < k:
        nearest = dist[:, medoids].min(axis=1)
        cands = np.array([j for j in range(n) if j not in medoids])
        costs = np.array([np.minimum(nearest, dist[:, j]).sum() for j in cands])
        medoids.append(pick(cands, costs))

    # SWAP: steepest improving swap until local optimum
    cost = _pam_cost(dist, medoids)
    while True:
        swaps, costs = [], []
        for mi, m in enumerate(medoids):
            for h in range(n):
                if h in medoids:
                    continue
                trial = medoids.copy()
                trial[mi] = h
                swaps.append((mi, h))
                costs.append(_pam_cost(dist, trial))
        costs = np.array(costs)
        if len(costs) == 0 or costs.min() >= cost:
            break
        mi, h = swaps[pick(np.arange(len(swaps)), costs)]
        medoids[mi] = h
        new_cost = float(costs.min())
        assert new_cost <= cost, "PAM cost increased on swap"
        cost = new_cost

    medoids = np.array(sorted(medoids))
    assign = dist[:, medoids].argmin(axis=1)
    assign = _canonical(assign, k)
    # medoid order must follow the canonical cluster numbering
    reordered = np.empty(k, dtype=np.int64)
    for c in range(k):
        members = np.flatnonzero(assign == c)
        owner = [m for m in medoids if m in members]
        reordered[c] = owner[0]
    return ClusterModel("kmedoids", k, assign, reordered, cost, seed)


def cluster_subsets(maps, model: ClusterModel):
    """Split maps into per-cluster lists, preserving input order."""
    if len(maps) != len(model.assignment):
        raise ValueError(f"{len(maps)} maps but assignment of length "
                         f"{len(model.assignment)}")
    if model.assignment.max() >= model.k:
        raise ValueError("assignment references a cluster beyond k")
    return [[m for m, a in zip(maps, model.assignment) if a == c]
            for c in range(model.k)]


def adjusted_rand_index(a, b) -> float:
    """Chance-corrected partition agreement; 1.0 means identical partitions."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError("partitions must label the same items")
    n = len(a)
    ua, ia = np.unique(a, return_inverse=True)
    ub, ib = np.unique(b, return_inverse=True)
    table = np.zeros((len(ua), len(ub)), dtype=np.int64)
    np.add.at(table, (ia, ib), 1)
    comb = lambda x: x * (x - 1) / 2.0
    sum_ij = comb(table).sum()
    sum_a = comb(table.sum(axis=1)).sum()
    sum_b = comb(table.sum(axis=0)).sum()
    expected = sum_a * sum_b / comb(n)
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        return 1.0
    return float((sum_ij - expected) / (max_index - expected))


def save_cluster_model(model: ClusterModel, path) -> None:
    path = Path(path)
    doc = {
        "method": model.method,
        "k": model.k,
        "seed": model.seed,
        "assignment": model.assignment.tolist(),
        "inertia": model.inertia,
    }
    if model.method == "kmedoids":
        doc["medoid_indices"] = model.centers.tolist()
    else:
        centers_file = path.with_suffix(".centers")
        centers_file.write_bytes(model.centers.astype("<f8").tobytes())
        doc["centers_file"] = centers_file.name
        doc["centers_shape"] = list(model.centers.shape)
    path.write_text(json.dumps(doc, indent=2))


def load_cluster_model(path) -> ClusterModel:
    path = Path(path)
    doc = json.loads(path.read_text())
    if doc["method"] == "kmedoids":
        centers = np.asarray(doc["medoid_indices"], dtype=np.int64)
    else:
        raw = (path.parent / doc["centers_file"]).read_bytes()
        centers = np.frombuffer(raw, dtype="<f8").reshape(doc["centers_shape"])
    return ClusterModel(doc["method"], doc["k"], np.asarray(doc["assignment"]),
                        centers, doc["inertia"], doc["seed"])
