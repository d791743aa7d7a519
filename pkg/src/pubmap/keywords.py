"""Embedding-based keyword extraction per cluster.

Candidate phrases are word n-grams from the cluster's abstracts, scored by
cosine similarity between their embedding and the cluster centroid, then
selected greedily by Maximal Marginal Relevance so the final set balances
relevance against redundancy. Topic names are human judgments and only
ever come from configuration; they are never generated.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .corpus import english_stopwords

DEFAULT_MAX_NGRAM = 2
DEFAULT_TOP_K = 10
DEFAULT_DIVERSITY = 0.5

SCORE_MODES = ("centroid", "max-document")

_WORD_RE = re.compile(r"[^\W_]+", re.UNICODE)
_NUM_RE = re.compile(r"^\d+$")


def cosine_similarity(a, b) -> float:
    """Cosine of the angle between two vectors; zero-norm inputs score 0."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


@dataclass(frozen=True)
class KeywordSet:
    """Ranked keywords for one cluster, scores non-increasing."""

    label: int
    keywords: tuple[tuple[str, float], ...]

    def __post_init__(self):
        phrases = [p for p, _ in self.keywords]
        if len(set(phrases)) != len(phrases):
            raise ValueError("duplicate phrases in keyword set")
        scores = [s for _, s in self.keywords]
        if any(b > a + 1e-12 for a, b in zip(scores, scores[1:])):
            raise ValueError("scores must be non-increasing")

    @property
    def phrases(self) -> tuple[str, ...]:
        return tuple(p for p, _ in self.keywords)


def candidate_phrases(cluster_texts, max_ngram: int = DEFAULT_MAX_NGRAM,
                      stoplist: frozenset[str] | set[str] | None = None) -> set[str]:
    """Lower-cased word n-grams up to max_ngram, filtered.

    A candidate is dropped when its first or last token is a stopword,
    when any token is numerals-only, or when any token is shorter than 3
    characters. Pass stoplist=set() to disable stopword filtering; None
    selects the packaged English list.
    """
    if max_ngram not in (1, 2, 3):
        raise ValueError(f"max_ngram must be 1, 2, or 3, got {max_ngram}")
    stops = english_stopwords() if stoplist is None else stoplist
    out: set[str] = set()
    for text in cluster_texts:
        words = _WORD_RE.findall(text.casefold())
        for n in range(1, max_ngram + 1):
            for i in range(len(words) - n + 1):
                toks = words[i:i + n]
                if toks[0] in stops or toks[-1] in stops:
                    continue
                if any(_NUM_RE.match(t) or len(t) < 3 for t in toks):
                    continue
                out.add(" ".join(toks))
    return out


def mmr_select(relevance: np.ndarray, similarity: np.ndarray,
               top_k: int, diversity: float) -> list[int]:
    """Greedy Maximal Marginal Relevance over precomputed similarities.

    First pick is the most relevant item; each later pick maximizes
    (1-diversity)*relevance - diversity*max-similarity-to-selected.
    Ties resolve to the lowest index. diversity=0 degenerates to plain
    top-k by relevance.
    """
    if not 0.0 <= diversity <= 1.0:
        raise ValueError("diversity must be in [0, 1]")
    n = relevance.shape[0]
    if n == 0:
        raise ValueError("nothing to select from")
    selected = [int(np.argmax(relevance))]
    while len(selected) < min(top_k, n):
        remaining = [i for i in range(n) if i not in selected]
        redundancy = similarity[np.ix_(remaining, selected)].max(axis=1)
        mmr = (1.0 - diversity) * relevance[remaining] - diversity * redundancy
        selected.append(remaining[int(np.argmax(mmr))])
    return selected


def rank_keywords(candidates, cluster_centroid, provider,
                  top_k: int = DEFAULT_TOP_K,
                  diversity: float = DEFAULT_DIVERSITY,
                  document_vectors: np.ndarray | None = None,
                  score_mode: str = "centroid",
                  label: int = 0) -> KeywordSet:
    """Embed candidates, score them, and pick top_k by MMR.

    score_mode "centroid" uses cosine similarity to the cluster centroid;
    "max-document" uses the best cosine against any member document vector
    (document_vectors required). The returned set is ordered by score,
    highest first.
    """
    if score_mode not in SCORE_MODES:
        raise ValueError(f"score_mode must be one of {SCORE_MODES}")
    phrases = sorted(candidates)
    if not phrases:
        raise ValueError("candidate set is empty")
    vectors = np.asarray(provider.embed_texts(phrases), dtype=np.float64)

    centroid = np.asarray(cluster_centroid, dtype=np.float64)
    if score_mode == "centroid":
        relevance = np.array([cosine_similarity(v, centroid) for v in vectors])
    else:
        if document_vectors is None:
            raise ValueError("max-document scoring needs document_vectors")
        docs = np.asarray(document_vectors, dtype=np.float64)
        relevance = np.array([
            max(cosine_similarity(v, d) for d in docs) for v in vectors
        ])

    similarity = np.zeros((len(phrases), len(phrases)))
    for i in range(len(phrases)):
        for j in range(i + 1, len(phrases)):
            similarity[i, j] = similarity[j, i] = cosine_similarity(vectors[i], vectors[j])

    picks = mmr_select(relevance, similarity, top_k, diversity)
    chosen = sorted(
        ((phrases[i], float(relevance[i])) for i in picks),
        key=lambda item: (-item[1], item[0]),
    )
    return KeywordSet(label=label, keywords=tuple(chosen))


def extract_cluster_keywords(corpus, embeddings, model, provider,
                             max_ngram: int = DEFAULT_MAX_NGRAM,
                             top_k: int = DEFAULT_TOP_K,
                             diversity: float = DEFAULT_DIVERSITY,
                             stoplist=None,
                             score_mode: str = "centroid") -> dict[int, KeywordSet]:
    """One KeywordSet per live cluster label."""
    abstract_of = {p.id: p.abstract for p in corpus.papers}
    row_of = {pid: i for i, pid in enumerate(embeddings.paper_ids)}
    out: dict[int, KeywordSet] = {}
    for label in range(model.k):
        member_ids = [model.paper_ids[i] for i in model.members(label)]
        texts = [abstract_of[pid] for pid in member_ids if pid in abstract_of]
        candidates = candidate_phrases(texts, max_ngram=max_ngram, stoplist=stoplist)
        if not candidates:
            out[label] = KeywordSet(label=label, keywords=())
            continue
        docs = None
        if score_mode == "max-document":
            rows = [row_of[pid] for pid in member_ids]
            docs = np.asarray(embeddings.vectors, dtype=np.float64)[rows]
        out[label] = rank_keywords(
            candidates, model.centroids[label], provider,
            top_k=top_k, diversity=diversity,
            document_vectors=docs, score_mode=score_mode, label=label,
        )
    return out


def label_report(model, keyword_sets: dict[int, KeywordSet],
                 manual_topics: dict[int, str] | None = None,
                 display_k: int | None = None) -> dict[int, tuple[tuple[str, ...], str]]:
    """Merge keywords and optional human topic names into report cells.

    Every live cluster needs a KeywordSet; topics default to empty strings
    when no manual name is configured.
    """
    manual_topics = manual_topics or {}
    missing = [l for l in range(model.k) if l not in keyword_sets]
    if missing:
        raise ValueError(f"missing keywords for clusters {missing}")
    fragment: dict[int, tuple[tuple[str, ...], str]] = {}
    for label in range(model.k):
        phrases = keyword_sets[label].phrases
        if display_k is not None:
            phrases = phrases[:display_k]
        fragment[label] = (phrases, manual_topics.get(label, ""))
    return fragment
