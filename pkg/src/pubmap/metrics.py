"""Clustering validity indices and per-cluster descriptive statistics.

All indices are exact (no sampling) with 64-bit accumulation; at n around
1500 the O(n^2) silhouette is still well under a second. Radius and std of
a cluster are defined over member-to-centroid Euclidean distances: radius
is the max, std the population standard deviation. Those definitions are
recorded in the report metadata since the column names alone do not pin
them down.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .embedding import EmbeddingMatrix

REPORT_COLUMNS = ("label", "768D-radius", "768D-std", "points-count", "keywords", "topic")

STAT_DEFINITIONS = {
    "radius": "max Euclidean distance from a member to its cluster centroid",
    "std": "population standard deviation of member-to-centroid distances",
    "indices": "computed on the post-override partition",
}


def _as_x(matrix) -> np.ndarray:
    if isinstance(matrix, EmbeddingMatrix):
        return np.asarray(matrix.vectors, dtype=np.float64)
    X = np.asarray(matrix, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("matrix must be 2-d")
    return X


def _groups(labels) -> tuple[np.ndarray, list[np.ndarray]]:
    labels = np.asarray(labels)
    uniq = np.unique(labels)
    return uniq, [np.flatnonzero(labels == u) for u in uniq]


def silhouette_score(matrix, labels) -> float:
    """Mean over points of (b-a)/max(a,b).

    a(i) is the mean distance to the point's own cluster excluding itself;
    b(i) the smallest mean distance to any other cluster. Singleton points
    score 0. Requires at least 2 non-empty clusters.
    """
    X = _as_x(matrix)
    labels = np.asarray(labels)
    if labels.shape[0] != X.shape[0]:
        raise ValueError("one label per row required")
    uniq, groups = _groups(labels)
    if len(uniq) < 2:
        raise ValueError(f"silhouette needs >= 2 clusters, got {len(uniq)}")

    D = cdist(X, X)
    n = X.shape[0]
    sums = np.empty((n, len(uniq)))
    counts = np.empty(len(uniq))
    for c, idx in enumerate(groups):
        sums[:, c] = D[:, idx].sum(axis=1)
        counts[c] = idx.size

    pos = {u: c for c, u in enumerate(uniq)}
    own = np.array([pos[l] for l in labels])
    own_count = counts[own]

    s = np.zeros(n)
    multi = own_count > 1
    a = np.zeros(n)
    a[multi] = sums[np.arange(n), own][multi] / (own_count[multi] - 1)

    mean_other = sums / counts
    mean_other[np.arange(n), own] = np.inf
    b = mean_other.min(axis=1)

    denom = np.maximum(a, b)
    ok = multi & (denom > 0)
    s[ok] = (b[ok] - a[ok]) / denom[ok]
    return float(s.mean())


def dispersion_decomposition(matrix, labels) -> tuple[float, float]:
    """(between, within) dispersion about the grand mean / own centroids."""
    X = _as_x(matrix)
    labels = np.asarray(labels)
    grand = X.mean(axis=0)
    between = 0.0
    within = 0.0
    _, groups = _groups(labels)
    for idx in groups:
        c = X[idx].mean(axis=0)
        between += idx.size * float(np.sum((c - grand) ** 2))
        within += float(np.sum((X[idx] - c) ** 2))
    return between, within


def calinski_harabasz(matrix, labels) -> float:
    """(B/(k-1)) / (W/(n-k)); zero within-dispersion yields +inf."""
    X = _as_x(matrix)
    labels = np.asarray(labels)
    n = X.shape[0]
    k = len(np.unique(labels))
    if not (2 <= k < n):
        raise ValueError(f"index needs 2 <= k < n, got k={k}, n={n}")
    between, within = dispersion_decomposition(X, labels)
    if within == 0.0:
        return math.inf
    return (between / (k - 1)) / (within / (n - k))


def davies_bouldin(matrix, labels) -> float:
    """Mean over clusters of the worst (s_i+s_j)/d_ij ratio.

    s_i is the mean member-to-centroid distance of cluster i, d_ij the
    distance between centroids. Coincident centroids yield +inf.
    """
    X = _as_x(matrix)
    labels = np.asarray(labels)
    uniq, groups = _groups(labels)
    k = len(uniq)
    if k < 2:
        raise ValueError(f"index needs >= 2 clusters, got {k}")
    centroids = np.stack([X[idx].mean(axis=0) for idx in groups])
    scatter = np.array([
        float(np.sqrt(np.sum((X[idx] - centroids[c]) ** 2, axis=1)).mean())
        for c, idx in enumerate(groups)
    ])
    sep = cdist(centroids, centroids)
    worst = np.empty(k)
    for i in range(k):
        ratios = []
        for j in range(k):
            if j == i:
                continue
            if sep[i, j] == 0.0:
                return math.inf
            ratios.append((scatter[i] + scatter[j]) / sep[i, j])
        worst[i] = max(ratios)
    return float(worst.mean())


def cluster_radius_std(matrix, labels, label) -> tuple[float, float]:
    """(max, population std) of member-to-centroid distances for one cluster."""
    X = _as_x(matrix)
    labels = np.asarray(labels)
    idx = np.flatnonzero(labels == label)
    if idx.size == 0:
        raise ValueError(f"label {label!r} has no members")
    centroid = X[idx].mean(axis=0)
    d = np.sqrt(np.sum((X[idx] - centroid) ** 2, axis=1))
    return float(d.max()), float(d.std())


@dataclass(frozen=True)
class ReportRow:
    label: int
    radius: float
    std: float
    count: int
    keywords: tuple[str, ...] = ()
    topic: str = ""
    ignored: bool = False


@dataclass(frozen=True)
class ClusterReport:
    rows: tuple[ReportRow, ...]
    silhouette: float | None = None
    calinski_harabasz: float | None = None
    davies_bouldin: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.silhouette is not None and not -1.0 <= self.silhouette <= 1.0 + 1e-12:
            raise ValueError(f"silhouette out of [-1,1]: {self.silhouette}")

    @property
    def live_rows(self) -> tuple[ReportRow, ...]:
        return tuple(r for r in self.rows if not r.ignored)

    @property
    def ignored_rows(self) -> tuple[ReportRow, ...]:
        return tuple(r for r in self.rows if r.ignored)


def build_report(embeddings: EmbeddingMatrix, model, fragment=None,
                 meta: dict | None = None) -> ClusterReport:
    """Assemble the per-cluster table plus global indices.

    `embeddings` must cover every paper the model has seen, assigned or
    excluded. `fragment` optionally maps live labels to (keywords, topic)
    pairs. Excluded papers are grouped under their original label and
    rendered as ignored rows after the live ones; validity indices are
    computed on the live partition only.
    """
    row_of = {pid: i for i, pid in enumerate(embeddings.paper_ids)}
    missing = [pid for pid in model.paper_ids if pid not in row_of]
    missing += [pid for pid, _ in model.excluded if pid not in row_of]
    if missing:
        raise ValueError(f"embeddings missing rows for {missing[:3]}...")

    live_idx = np.array([row_of[pid] for pid in model.paper_ids])
    X_live = np.asarray(embeddings.vectors, dtype=np.float64)[live_idx]
    labels = model.labels

    rows = []
    for label in range(model.k):
        radius, std = cluster_radius_std(X_live, labels, label)
        kw, topic = (), ""
        if fragment and label in fragment:
            kw, topic = fragment[label]
        rows.append(ReportRow(
            label=label, radius=radius, std=std,
            count=int(np.sum(labels == label)),
            keywords=tuple(kw), topic=topic,
        ))

    by_orig: dict[int, list[str]] = {}
    for pid, orig in model.excluded:
        by_orig.setdefault(orig, []).append(pid)
    for orig in sorted(by_orig):
        idx = np.array([row_of[pid] for pid in by_orig[orig]])
        Xg = np.asarray(embeddings.vectors, dtype=np.float64)[idx]
        centroid = Xg.mean(axis=0)
        d = np.sqrt(np.sum((Xg - centroid) ** 2, axis=1))
        rows.append(ReportRow(
            label=orig, radius=float(d.max()), std=float(d.std()),
            count=idx.size, keywords=(), topic="", ignored=True,
        ))

    sil = ch = db = None
    if model.k >= 2:
        sil = silhouette_score(X_live, labels)
        ch = calinski_harabasz(X_live, labels)
        db = davies_bouldin(X_live, labels)

    full_meta = dict(STAT_DEFINITIONS)
    if meta:
        full_meta.update(meta)
    return ClusterReport(
        rows=tuple(rows), silhouette=sil, calinski_harabasz=ch,
        davies_bouldin=db, meta=full_meta,
    )


def _json_num(value):
    if value is None:
        return None
    if math.isinf(value):
        return "inf"
    return value


def write_report_csv(report: ClusterReport, path, meta_line: str | None = None) -> None:
    """Emit the per-cluster table with the fixed column set.

    Ignored rows carry an "(ignored)" keywords cell so manual exclusions
    stay visible in the output.
    """
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        if meta_line is not None:
            fh.write(f"# {meta_line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for r in report.rows:
            kw = "(ignored)" if r.ignored else ", ".join(r.keywords)
            writer.writerow([
                r.label, f"{r.radius:.3f}", f"{r.std:.3f}", r.count, kw, r.topic,
            ])
    os.replace(tmp, path)


def write_report_json(report: ClusterReport, path, meta: dict | None = None) -> None:
    payload = {
        "global": {
            "silhouette": _json_num(report.silhouette),
            "calinski_harabasz": _json_num(report.calinski_harabasz),
            "davies_bouldin": _json_num(report.davies_bouldin),
        },
        "per_cluster": [
            {
                "label": r.label,
                "radius": r.radius,
                "std": r.std,
                "count": r.count,
                "keywords": list(r.keywords),
                "topic": r.topic,
                "ignored": r.ignored,
            }
            for r in report.rows
        ],
        "definitions": report.meta,
    }
    if meta is not None:
        payload["_meta"] = meta
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)
