"""Author distance metric and its distributions.

The distance between two authors is the mean of all pairwise Euclidean
distances between their paper embedding sets. An author's self-distance is
the same formula applied against their own set, diagonal zeros included
(|P|^2 denominator); it measures topical variety. The off-diagonal variant
(|P|(|P|-1) denominator) is available behind self_mode="offdiag".
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .corpus import AuthorKey, Corpus, Language
from .embedding import EmbeddingMatrix

DEFAULT_MIN_PAPERS = 10

SELF_MODES = ("inclusive", "offdiag")


def author_distance(P1, P2) -> float:
    """Mean pairwise Euclidean distance between two paper embedding sets.

    Shared papers contribute zero-distance terms; both sets must be
    non-empty. With singleton sets this reduces to a plain point distance.
    """
    P1 = np.atleast_2d(np.asarray(P1, dtype=np.float64))
    P2 = np.atleast_2d(np.asarray(P2, dtype=np.float64))
    if P1.shape[0] == 0 or P2.shape[0] == 0:
        raise ValueError("paper sets must be non-empty")
    if P1.shape[1] != P2.shape[1]:
        raise ValueError(f"width mismatch: {P1.shape[1]} vs {P2.shape[1]}")
    return float(cdist(P1, P2).mean())


def self_distance(P, mode: str = "inclusive") -> float:
    """Author distance of a paper set against itself.

    inclusive: full |P|^2 mean, diagonal zeros included.
    offdiag:   mean over the |P|(|P|-1) ordered off-diagonal pairs;
               defined as 0 for a single-paper set.
    """
    if mode not in SELF_MODES:
        raise ValueError(f"mode must be one of {SELF_MODES}")
    P = np.atleast_2d(np.asarray(P, dtype=np.float64))
    if P.shape[0] == 0:
        raise ValueError("paper set must be non-empty")
    if mode == "inclusive":
        return author_distance(P, P)
    m = P.shape[0]
    if m == 1:
        return 0.0
    return float(cdist(P, P).sum() / (m * (m - 1)))


@dataclass(frozen=True)
class AuthorDistanceMatrix:
    authors: tuple[AuthorKey, ...]
    dist: np.ndarray
    paper_counts: tuple[int, ...]

    def __post_init__(self):
        d = np.asarray(self.dist, dtype=np.float64)
        d.setflags(write=False)
        object.__setattr__(self, "dist", d)
        na = len(self.authors)
        if d.shape != (na, na):
            raise ValueError("matrix shape must match author count")
        if len(self.paper_counts) != na:
            raise ValueError("one paper count per author required")
        if d.size and not np.array_equal(d, d.T):
            raise ValueError("matrix must be exactly symmetric")

    @property
    def n(self) -> int:
        return len(self.authors)

    @property
    def diagonal(self) -> np.ndarray:
        return np.diag(self.dist)


@dataclass(frozen=True)
class DistanceDistributions:
    self_distances: tuple[float, ...]
    coauthor: tuple[float, ...]
    all_pairs: tuple[float, ...]

    def as_dict(self) -> dict[str, tuple[float, ...]]:
        return {
            "self": self.self_distances,
            "coauthor": self.coauthor,
            "all_pairs": self.all_pairs,
        }


def _author_paper_sets(corpus: Corpus, embeddings: EmbeddingMatrix,
                       min_papers: int, include_german: bool):
    """Qualifying authors (sorted) with their embedding row indices."""
    if min_papers < 1:
        raise ValueError("min_papers must be >= 1")
    row_of = {pid: i for i, pid in enumerate(embeddings.paper_ids)}
    retained = {
        p.id for p in corpus.papers
        if (include_german or p.language is not Language.GERMAN) and p.id in row_of
    }
    sets: dict[AuthorKey, frozenset[str]] = {}
    for author, pids in corpus.papers_by_author.items():
        kept = frozenset(pid for pid in pids if pid in retained)
        if len(kept) >= min_papers:
            sets[author] = kept
    authors = tuple(sorted(sets))
    return authors, sets, row_of


def distance_matrix(corpus: Corpus, embeddings: EmbeddingMatrix,
                    min_papers: int = DEFAULT_MIN_PAPERS,
                    include_german: bool = False,
                    self_mode: str = "inclusive") -> AuthorDistanceMatrix:
    """Pairwise author distances over all qualifying (active) authors.

    Authors qualify with at least min_papers retained papers; papers
    tagged German are dropped first unless include_german is set. Each
    unordered pair is computed once and mirrored, so the matrix is exactly
    symmetric.
    """
    authors, sets, row_of = _author_paper_sets(
        corpus, embeddings, min_papers, include_german
    )
    if not authors:
        raise ValueError(
            f"no author has >= {min_papers} qualifying papers"
        )
    X = np.asarray(embeddings.vectors, dtype=np.float64)
    blocks = []
    for a in authors:
        idx = np.array(sorted(row_of[pid] for pid in sets[a]))
        blocks.append(X[idx])

    na = len(authors)
    dist = np.zeros((na, na))
    for i in range(na):
        dist[i, i] = self_distance(blocks[i], mode=self_mode)
        for j in range(i + 1, na):
            d = author_distance(blocks[i], blocks[j])
            dist[i, j] = d
            dist[j, i] = d
    return AuthorDistanceMatrix(
        authors=authors,
        dist=dist,
        paper_counts=tuple(len(sets[a]) for a in authors),
    )


def distributions(corpus: Corpus, embeddings: EmbeddingMatrix,
                  min_papers: int = DEFAULT_MIN_PAPERS,
                  include_german: bool = False,
                  self_mode: str = "inclusive") -> DistanceDistributions:
    """Self, coauthor, and all-pairs distance populations.

    Coauthor pairs share at least one retained paper id. all_pairs covers
    every unordered author pair, coauthors included.
    """
    authors, sets, _ = _author_paper_sets(corpus, embeddings, min_papers, include_german)
    matrix = distance_matrix(corpus, embeddings, min_papers=min_papers,
                             include_german=include_german, self_mode=self_mode)
    selfs = tuple(float(v) for v in matrix.diagonal)
    co, allp = [], []
    for i in range(matrix.n):
        for j in range(i + 1, matrix.n):
            d = float(matrix.dist[i, j])
            allp.append(d)
            if sets[authors[i]] & sets[authors[j]]:
                co.append(d)
    return DistanceDistributions(
        self_distances=selfs, coauthor=tuple(co), all_pairs=tuple(allp)
    )


def extreme_self_distance(matrix: AuthorDistanceMatrix, mode: str) -> AuthorKey:
    """Author with the highest or lowest self-distance.

    Ties break toward the lexicographically first author key; the matrix
    rows are sorted by key, so the first arg-extreme is that author.
    """
    if mode not in ("highest", "lowest"):
        raise ValueError("mode must be 'highest' or 'lowest'")
    if matrix.n == 0:
        raise ValueError("empty matrix")
    diag = matrix.diagonal
    idx = int(np.argmax(diag) if mode == "highest" else np.argmin(diag))
    return matrix.authors[idx]


def papers_per_author_histogram(corpus: Corpus) -> list[tuple[int, int]]:
    """Exact (paper_count, author_count) pairs, ascending, no filtering."""
    counts: dict[int, int] = {}
    for pids in corpus.papers_by_author.values():
        c = len(pids)
        counts[c] = counts.get(c, 0) + 1
    return sorted(counts.items())


def write_matrix_csv(matrix: AuthorDistanceMatrix, path,
                     meta_line: str | None = None) -> None:
    """Square CSV with author keys as both header row and first column."""
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        if meta_line is not None:
            fh.write(f"# {meta_line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        keys = [str(a) for a in matrix.authors]
        writer.writerow(["author"] + keys)
        for i, key in enumerate(keys):
            writer.writerow([key] + [repr(float(v)) for v in matrix.dist[i]])
    os.replace(tmp, path)


def write_matrix_json(matrix: AuthorDistanceMatrix, path,
                      meta: dict | None = None) -> None:
    payload = {
        "authors": [str(a) for a in matrix.authors],
        "paper_counts": list(matrix.paper_counts),
        "dist": [[float(v) for v in row] for row in matrix.dist],
        "self_distances": [float(v) for v in matrix.diagonal],
    }
    if meta is not None:
        payload["_meta"] = meta
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def write_distributions_csv(dists: DistanceDistributions, path,
                            meta_line: str | None = None) -> None:
    """Long-form `case,value` rows for plotting."""
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        if meta_line is not None:
            fh.write(f"# {meta_line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["case", "value"])
        for case, values in dists.as_dict().items():
            for v in values:
                writer.writerow([case, repr(float(v))])
    os.replace(tmp, path)
