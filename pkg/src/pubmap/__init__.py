"""pubmap: map a publication database into a topical landscape.

Abstracts are embedded into fixed-width vectors, clustered with automatic
model selection, reduced to 2D for plotting, labeled with extracted
keywords, and mined for author-level distance statistics.
"""

__version__ = "0.1.0"

from .authors import (
    AuthorDistanceMatrix,
    DistanceDistributions,
    author_distance,
    distance_matrix,
    distributions,
    extreme_self_distance,
    papers_per_author_histogram,
    self_distance,
)
from .cluster import ClusterModel, OverridePlan, apply_overrides, kmeans, select_k
from .corpus import (
    AuthorKey,
    AuthorKind,
    Corpus,
    FieldMapping,
    Language,
    PaperRecord,
    SourceType,
    load_corpus,
    save_corpus_json,
    tag_language,
)
from .embedding import (
    EmbeddingCache,
    EmbeddingMatrix,
    MockProvider,
    RemoteProvider,
    embed_corpus,
    euclidean_distance,
    mock_embed,
)
from .errors import (
    CacheCorruptionError,
    ConfigError,
    IngestError,
    LayoutError,
    ProviderError,
    PubmapError,
)
from .keywords import KeywordSet, candidate_phrases, rank_keywords
from .metrics import (
    ClusterReport,
    build_report,
    calinski_harabasz,
    cluster_radius_std,
    davies_bouldin,
    silhouette_score,
)
from .projection import NeighborGraph, Projection2D, fuzzy_weights, knn_graph, project

__all__ = [
    "AuthorDistanceMatrix",
    "AuthorKey",
    "AuthorKind",
    "CacheCorruptionError",
    "ClusterModel",
    "ClusterReport",
    "ConfigError",
    "Corpus",
    "DistanceDistributions",
    "EmbeddingCache",
    "EmbeddingMatrix",
    "FieldMapping",
    "IngestError",
    "KeywordSet",
    "Language",
    "LayoutError",
    "MockProvider",
    "NeighborGraph",
    "OverridePlan",
    "PaperRecord",
    "Projection2D",
    "ProviderError",
    "PubmapError",
    "RemoteProvider",
    "SourceType",
    "apply_overrides",
    "author_distance",
    "build_report",
    "calinski_harabasz",
    "candidate_phrases",
    "cluster_radius_std",
    "davies_bouldin",
    "distance_matrix",
    "distributions",
    "embed_corpus",
    "euclidean_distance",
    "extreme_self_distance",
    "fuzzy_weights",
    "kmeans",
    "knn_graph",
    "load_corpus",
    "mock_embed",
    "papers_per_author_histogram",
    "project",
    "rank_keywords",
    "save_corpus_json",
    "select_k",
    "self_distance",
    "silhouette_score",
    "tag_language",
]
