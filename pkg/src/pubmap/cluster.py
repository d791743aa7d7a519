"""K-means over the full-width embedding space.

Automatic k selection maximizes the silhouette score across a scan range;
manual post-hoc overrides (merge clusters, exclude clusters) reproduce the
curator's adjustments as explicit, auditable configuration.
"""

from __future__ import annotations

import base64
import json
import os
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial.distance import cdist

from .embedding import EmbeddingMatrix
from .errors import ConfigError
from .metrics import silhouette_score

DEFAULT_MAX_ITER = 300
DEFAULT_TOL = 1e-6  # max squared centroid shift


def _matrix_parts(matrix) -> tuple[tuple[str, ...], np.ndarray]:
    if isinstance(matrix, EmbeddingMatrix):
        return matrix.paper_ids, np.asarray(matrix.vectors, dtype=np.float64)
    X = np.asarray(matrix, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("matrix must be 2-d")
    return tuple(str(i) for i in range(X.shape[0])), X


@dataclass(frozen=True)
class ClusterModel:
    k: int
    centroids: np.ndarray
    paper_ids: tuple[str, ...]
    labels: np.ndarray
    inertia: float
    seed: int
    selection_trace: tuple[tuple[int, float], ...] = ()
    per_label_sse: tuple[float, ...] = ()
    excluded: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        c = np.asarray(self.centroids, dtype=np.float64)
        lab = np.asarray(self.labels, dtype=np.int32)
        c.setflags(write=False)
        lab.setflags(write=False)
        object.__setattr__(self, "centroids", c)
        object.__setattr__(self, "labels", lab)
        if c.shape[0] != self.k:
            raise ValueError(f"k={self.k} but {c.shape[0]} centroids")
        if lab.shape[0] != len(self.paper_ids):
            raise ValueError("one label per paper required")
        if lab.size:
            if lab.min() < 0 or lab.max() >= self.k:
                raise ValueError("labels out of range")
            if np.bincount(lab, minlength=self.k).min() == 0:
                raise ValueError("empty cluster in model")
        if self.per_label_sse and len(self.per_label_sse) != self.k:
            raise ValueError("per_label_sse must have one entry per cluster")
        dropped = {pid for pid, _ in self.excluded}
        if dropped & set(self.paper_ids):
            raise ValueError("excluded papers overlap assigned papers")

    @property
    def n(self) -> int:
        return len(self.paper_ids)

    @property
    def assignment(self) -> dict[str, int]:
        return {pid: int(l) for pid, l in zip(self.paper_ids, self.labels)}

    @property
    def counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)

    @property
    def excluded_map(self) -> dict[str, int]:
        return dict(self.excluded)

    def members(self, label: int) -> np.ndarray:
        return np.flatnonzero(self.labels == label)


@dataclass(frozen=True)
class OverridePlan:
    """Manual cluster adjustments: unions of labels to merge, labels to drop."""

    merges: tuple[frozenset[int], ...] = ()
    excludes: frozenset[int] = frozenset()

    def __post_init__(self):
        seen: set[int] = set()
        for group in self.merges:
            if len(group) < 2:
                raise ConfigError("overrides.merges", "merge sets need at least 2 labels")
            if seen & group:
                raise ConfigError("overrides.merges", "merge sets must be disjoint")
            seen |= group
        if seen & self.excludes:
            raise ConfigError("overrides", "labels cannot be both merged and excluded")

    @staticmethod
    def from_dict(raw: dict | None) -> "OverridePlan":
        if not raw:
            return OverridePlan()
        unknown = set(raw) - {"merges", "excludes"}
        if unknown:
            raise ConfigError("overrides", f"unknown keys: {sorted(unknown)}")
        merges = tuple(frozenset(int(x) for x in group) for group in raw.get("merges", []))
        excludes = frozenset(int(x) for x in raw.get("excludes", []))
        return OverridePlan(merges=merges, excludes=excludes)

    @property
    def is_empty(self) -> bool:
        return not self.merges and not self.excludes


def _sqdist_to_centroids(X: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    return cdist(X, centroids, metric="sqeuclidean")


def _assign(X: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    # argmin takes the first minimum, so ties resolve to the lowest label.
    return np.argmin(_sqdist_to_centroids(X, centroids), axis=1).astype(np.int32)


def _kmeanspp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = np.sum((X - X[chosen[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            # All remaining mass at distance 0 (duplicate points): any
            # unchosen index keeps the run deterministic and non-degenerate.
            pool = np.setdiff1d(np.arange(n), np.array(chosen))
            idx = int(rng.choice(pool)) if pool.size else int(rng.integers(n))
        chosen.append(idx)
        d2 = np.minimum(d2, np.sum((X - X[idx]) ** 2, axis=1))
    return X[np.array(chosen)].copy()


def _random_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    idx = rng.choice(X.shape[0], size=k, replace=False)
    return X[idx].copy()


def _repair_empty(X, labels, centroids, k):
    """Reseed each empty cluster at the point farthest from its own centroid."""
    counts = np.bincount(labels, minlength=k)
    for label in np.flatnonzero(counts == 0):
        d = np.sqrt(np.sum((X - centroids[labels]) ** 2, axis=1))
        farthest = int(np.argmax(d))
        centroids[label] = X[farthest]
        labels[farthest] = label
        counts = np.bincount(labels, minlength=k)
    return labels, centroids


def _sse_per_label(X, labels, centroids, k) -> np.ndarray:
    d2 = np.sum((X - centroids[labels]) ** 2, axis=1)
    return np.bincount(labels, weights=d2, minlength=k)


def kmeans(matrix, k: int, seed: int = 0, max_iter: int = DEFAULT_MAX_ITER,
           tol: float = DEFAULT_TOL, init: str = "kmeans++",
           inertia_history: list | None = None) -> ClusterModel:
    """Lloyd's algorithm with k-means++ seeding.

    Deterministic in (matrix, k, seed, max_iter, tol). Iterates until the
    largest squared centroid shift drops below tol or max_iter is reached;
    empty clusters are repaired by reseeding at the point currently
    farthest from its own centroid. Pass a list as inertia_history to
    capture the per-iteration objective.
    """
    paper_ids, X = _matrix_parts(matrix)
    n = X.shape[0]
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k > n:
        raise ValueError(f"k={k} exceeds point count n={n}")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")

    rng = np.random.default_rng(seed)
    if init == "kmeans++":
        centroids = _kmeanspp_init(X, k, rng)
    elif init == "random":
        centroids = _random_init(X, k, rng)
    else:
        raise ValueError(f"unknown init {init!r}")

    labels = np.zeros(n, dtype=np.int32)
    prev_inertia = np.inf
    for _ in range(max_iter):
        labels = _assign(X, centroids)
        labels, centroids = _repair_empty(X, labels, centroids, k)
        inertia = float(_sse_per_label(X, labels, centroids, k).sum())
        # Lloyd monotonicity; a violation means the update step is wrong.
        assert inertia <= prev_inertia * (1 + 1e-12) + 1e-9, (
            f"inertia increased: {prev_inertia} -> {inertia}"
        )
        prev_inertia = inertia
        if inertia_history is not None:
            inertia_history.append(inertia)
        new_centroids = np.empty_like(centroids)
        for j in range(k):
            new_centroids[j] = X[labels == j].mean(axis=0)
        shift = float(np.max(np.sum((new_centroids - centroids) ** 2, axis=1)))
        centroids = new_centroids
        if shift < tol:
            break

    sse = _sse_per_label(X, labels, centroids, k)
    return ClusterModel(
        k=k,
        centroids=centroids,
        paper_ids=paper_ids,
        labels=labels,
        inertia=float(sse.sum()),
        seed=seed,
        per_label_sse=tuple(float(v) for v in sse),
    )


def select_k(matrix, k_min: int, k_max: int, seed: int = 0,
             max_iter: int = DEFAULT_MAX_ITER, tol: float = DEFAULT_TOL) -> ClusterModel:
    """Scan k over [k_min, k_max] and keep the best-silhouette model.

    Ties break toward smaller k; the full (k, silhouette) scan is recorded
    in the returned model's selection_trace.
    """
    _, X = _matrix_parts(matrix)
    n = X.shape[0]
    if not (2 <= k_min <= k_max <= n - 1):
        raise ValueError(
            f"scan range must satisfy 2 <= k_min <= k_max <= n-1, "
            f"got [{k_min}, {k_max}] with n={n}"
        )
    best = None
    best_sil = -np.inf
    trace = []
    for k in range(k_min, k_max + 1):
        model = kmeans(matrix, k, seed=seed, max_iter=max_iter, tol=tol)
        sil = silhouette_score(X, model.labels)
        trace.append((k, float(sil)))
        if sil > best_sil:
            best, best_sil = model, sil
    return replace(best, selection_trace=tuple(trace))


def apply_overrides(model: ClusterModel, plan: OverridePlan) -> ClusterModel:
    """Merge and exclude clusters per plan, relabeling compactly.

    Merged centroids are the count-weighted means of the member centroids,
    which equals the exact mean of the union. Per-cluster dispersion is
    carried over with the parallel-axis identity, so inertia stays exact
    without re-touching the vectors. Excluded papers move to the excluded
    map under their pre-merge label.
    """
    if plan.is_empty:
        return model
    known = set(range(model.k))
    referenced = set(plan.excludes)
    for group in plan.merges:
        referenced |= group
    unknown = referenced - known
    if unknown:
        raise ConfigError("overrides", f"unknown labels: {sorted(unknown)}")

    counts = model.counts.astype(np.int64)
    sse = np.asarray(model.per_label_sse, dtype=np.float64)
    if sse.size != model.k:
        sse = np.zeros(model.k)

    # Union-find-lite: map every old label to its merge representative.
    rep = {l: l for l in range(model.k)}
    for group in plan.merges:
        target = min(group)
        for l in group:
            rep[l] = target

    kept_reps = sorted({rep[l] for l in range(model.k) if l not in plan.excludes})
    new_of_rep = {r: i for i, r in enumerate(kept_reps)}

    new_k = len(kept_reps)
    if new_k == 0:
        raise ConfigError("overrides", "plan excludes every cluster")
    dim = model.centroids.shape[1]
    new_centroids = np.zeros((new_k, dim))
    new_counts = np.zeros(new_k, dtype=np.int64)
    groups: dict[int, list[int]] = {}
    for l in range(model.k):
        if l in plan.excludes:
            continue
        groups.setdefault(rep[l], []).append(l)
    for r, members in groups.items():
        i = new_of_rep[r]
        w = counts[members]
        new_counts[i] = w.sum()
        new_centroids[i] = (model.centroids[members] * w[:, None]).sum(axis=0) / w.sum()

    new_sse = np.zeros(new_k)
    for r, members in groups.items():
        i = new_of_rep[r]
        for l in members:
            offset = float(np.sum((model.centroids[l] - new_centroids[i]) ** 2))
            new_sse[i] += sse[l] + counts[l] * offset

    keep_ids, keep_labels = [], []
    excluded = list(model.excluded)
    for pid, l in zip(model.paper_ids, model.labels):
        l = int(l)
        if l in plan.excludes:
            excluded.append((pid, l))
        else:
            keep_ids.append(pid)
            keep_labels.append(new_of_rep[rep[l]])

    return ClusterModel(
        k=new_k,
        centroids=new_centroids,
        paper_ids=tuple(keep_ids),
        labels=np.asarray(keep_labels, dtype=np.int32),
        inertia=float(new_sse.sum()),
        seed=model.seed,
        selection_trace=model.selection_trace,
        per_label_sse=tuple(float(v) for v in new_sse),
        excluded=tuple(sorted(excluded)),
    )


def save_cluster_model(model: ClusterModel, path, meta: dict | None = None) -> None:
    """Serialize to JSON; centroid rows travel as base64 float32."""
    rows = [
        base64.b64encode(np.ascontiguousarray(row, dtype="<f4").tobytes()).decode("ascii")
        for row in model.centroids
    ]
    payload = {
        "k": model.k,
        "seed": model.seed,
        "inertia": model.inertia,
        "paper_ids": list(model.paper_ids),
        "assignment": {pid: int(l) for pid, l in zip(model.paper_ids, model.labels)},
        "centroids_b64": rows,
        "selection_trace": [[k, s] for k, s in model.selection_trace],
        "per_label_sse": list(model.per_label_sse),
        "excluded": {pid: int(l) for pid, l in model.excluded},
    }
    if meta is not None:
        payload["_meta"] = meta
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def load_cluster_model(path) -> ClusterModel:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    centroids = np.stack([
        np.frombuffer(base64.b64decode(row), dtype="<f4").astype(np.float64)
        for row in payload["centroids_b64"]
    ]) if payload["centroids_b64"] else np.zeros((0, 0))
    paper_ids = tuple(payload["paper_ids"])
    assignment = payload["assignment"]
    labels = np.asarray([assignment[pid] for pid in paper_ids], dtype=np.int32)
    return ClusterModel(
        k=int(payload["k"]),
        centroids=centroids,
        paper_ids=paper_ids,
        labels=labels,
        inertia=float(payload["inertia"]),
        seed=int(payload["seed"]),
        selection_trace=tuple((int(k), float(s)) for k, s in payload["selection_trace"]),
        per_label_sse=tuple(float(v) for v in payload["per_label_sse"]),
        excluded=tuple(sorted((pid, int(l)) for pid, l in payload["excluded"].items())),
    )
