"""Embedding providers and the on-disk embedding cache.

One vector per abstract, fixed width D, behind a uniform provider
interface: a deterministic built-in hashing embedder for tests and demos,
and a client for the remote embedding service. Vectors are cached on disk
keyed by content hash, so repeated runs on an unchanged corpus never
re-embed.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import struct
import threading
from dataclasses import dataclass, field
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from .corpus import Corpus
from .errors import CacheCorruptionError, ProviderError

DEFAULT_DIM = 768

# Remote requests are chunked; the service rejects larger batches.
MAX_BATCH = 64

_MAGIC = b"PMEMB\x00"
_VERSION = 1
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


@runtime_checkable
class EmbeddingProvider(Protocol):
    provider_id: str
    model_id: str
    dim: int

    def embed_texts(self, texts: Sequence[str]) -> np.ndarray: ...


@dataclass(frozen=True)
class EmbeddingMatrix:
    """Row-per-paper embedding block, immutable after construction."""

    paper_ids: tuple[str, ...]
    vectors: np.ndarray
    provider_id: str
    model_id: str

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.float32)
        v.setflags(write=False)
        object.__setattr__(self, "vectors", v)
        if v.ndim != 2:
            raise ValueError("vectors must be a 2-d array")
        if v.shape[0] != len(self.paper_ids):
            raise ValueError(
                f"{len(self.paper_ids)} ids but {v.shape[0]} vector rows"
            )
        if len(set(self.paper_ids)) != len(self.paper_ids):
            raise ValueError("duplicate paper ids")
        if v.size and not np.all(np.isfinite(v)):
            raise ValueError("vectors contain non-finite components")

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def row(self, paper_id: str) -> np.ndarray:
        return self.vectors[self.paper_ids.index(paper_id)]


def mock_embed(text: str, seed: int, dim: int = DEFAULT_DIM) -> np.ndarray:
    """Deterministic hashing embedder.

    Lower-cases the text, takes word 1- and 2-grams, hashes each n-gram
    (keyed by the seed) into one of `dim` buckets with a sign bit,
    accumulates, and L2-normalizes. Texts sharing n-grams land close
    together, so cluster structure in the text survives into the vectors.
    Empty text maps to the first unit basis vector.
    """
    if dim < 2:
        raise ValueError("dim must be >= 2")
    words = _TOKEN_RE.findall(text.casefold())
    grams = list(words)
    grams.extend(f"{a} {b}" for a, b in zip(words, words[1:]))
    acc = np.zeros(dim, dtype=np.float64)
    key = (seed & (2**64 - 1)).to_bytes(8, "little")
    for g in grams:
        h = hashlib.blake2b(g.encode("utf-8"), digest_size=8, key=key).digest()
        v = int.from_bytes(h, "little")
        acc[(v >> 1) % dim] += 1.0 if v & 1 else -1.0
    norm = float(np.linalg.norm(acc))
    if norm == 0.0:
        # No tokens, or total sign cancellation: fall back to e0.
        acc[0] = 1.0
        norm = 1.0
    return (acc / norm).astype(np.float32)


@dataclass(frozen=True)
class MockProvider:
    """Provider wrapper around :func:`mock_embed`."""

    dim: int = DEFAULT_DIM
    seed: int = 0
    provider_id: str = "mock"
    model_id: str = field(init=False, default="")

    def __post_init__(self):
        object.__setattr__(self, "model_id", f"mock-d{self.dim}-s{self.seed}")

    def embed_texts(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            return np.zeros((0, self.dim), dtype=np.float32)
        return np.stack([mock_embed(t, self.seed, self.dim) for t in texts])


class RemoteProvider:
    """Client for the HTTP embedding service.

    POSTs `{"texts": [...], "model": ...}` to `{base_url}/embed` in batches
    of at most MAX_BATCH and expects `{"vectors": [[...]], "model": ...,
    "dim": ...}` back. Any transport failure, non-200 status, or width
    mismatch raises ProviderError.
    """

    provider_id = "remote"

    def __init__(self, base_url: str, model_id: str, dim: int = DEFAULT_DIM,
                 timeout: float = 120.0, session=None):
        import requests

        self.base_url = base_url.rstrip("/")
        self.model_id = model_id
        self.dim = dim
        self.timeout = timeout
        self._session = session or requests.Session()
        self._requests = requests

    def healthy(self) -> bool:
        try:
            resp = self._session.get(f"{self.base_url}/health", timeout=self.timeout)
        except self._requests.RequestException:
            return False
        return resp.status_code == 200

    def embed_texts(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            return np.zeros((0, self.dim), dtype=np.float32)
        rows = []
        for start in range(0, len(texts), MAX_BATCH):
            chunk = list(texts[start:start + MAX_BATCH])
            try:
                resp = self._session.post(
                    f"{self.base_url}/embed",
                    json={"texts": chunk, "model": self.model_id},
                    timeout=self.timeout,
                )
            except self._requests.RequestException as exc:
                raise ProviderError(f"embedding service unreachable: {exc}") from exc
            if resp.status_code != 200:
                detail = ""
                try:
                    detail = resp.json().get("error", "")
                except Exception:
                    pass
                raise ProviderError(
                    f"embedding service returned {resp.status_code}: {detail or resp.text[:200]}"
                )
            body = resp.json()
            vectors = np.asarray(body.get("vectors"), dtype=np.float32)
            if vectors.ndim != 2 or vectors.shape[0] != len(chunk):
                raise ProviderError(
                    f"expected {len(chunk)} vectors, got shape {vectors.shape}"
                )
            if vectors.shape[1] != self.dim:
                raise ProviderError(
                    f"width mismatch: configured D={self.dim}, service sent {vectors.shape[1]}"
                )
            if not np.all(np.isfinite(vectors)):
                raise ProviderError("service returned non-finite components")
            rows.append(vectors)
        return np.concatenate(rows, axis=0)


def content_hash(abstract: str, model_id: str) -> str:
    """Cache key: sha256 over the abstract and the model identity."""
    h = hashlib.sha256()
    h.update(abstract.encode("utf-8"))
    h.update(b"\x00")
    h.update(model_id.encode("utf-8"))
    return h.hexdigest()


def _write_bin(path, vectors: np.ndarray, model_id: str) -> str:
    """Write the binary vector block; returns sha256 of the payload."""
    vectors = np.ascontiguousarray(vectors, dtype="<f4")
    n, dim = vectors.shape
    mid = model_id.encode("utf-8")
    payload = vectors.tobytes()
    digest = hashlib.sha256(payload).hexdigest()
    header = _MAGIC + struct.pack("<HIIH", _VERSION, dim, n, len(mid)) + mid
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(payload)
    os.replace(tmp, path)
    return digest


def _read_bin(path) -> tuple[np.ndarray, str, str]:
    """Read the binary vector block; returns (vectors, model_id, payload sha)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < len(_MAGIC) + 12 or blob[: len(_MAGIC)] != _MAGIC:
        raise CacheCorruptionError(f"{path}: bad magic")
    off = len(_MAGIC)
    version, dim, n, mid_len = struct.unpack_from("<HIIH", blob, off)
    off += 12
    if version != _VERSION:
        raise CacheCorruptionError(f"{path}: unsupported version {version}")
    model_id = blob[off:off + mid_len].decode("utf-8")
    off += mid_len
    payload = blob[off:]
    if len(payload) != n * dim * 4:
        raise CacheCorruptionError(
            f"{path}: payload truncated ({len(payload)} bytes, expected {n * dim * 4})"
        )
    vectors = np.frombuffer(payload, dtype="<f4").reshape(n, dim).copy()
    return vectors, model_id, hashlib.sha256(payload).hexdigest()


def save_embeddings(matrix: EmbeddingMatrix, bin_path, manifest_path,
                    content_hashes: Sequence[str] | None = None,
                    meta: dict | None = None) -> None:
    """Write the binary matrix plus its JSON manifest.

    The manifest records one content hash per row (so staleness is
    detectable without the source texts) and a checksum over the vector
    payload; loading verifies both.
    """
    if content_hashes is None:
        content_hashes = [content_hash(pid, matrix.model_id) for pid in matrix.paper_ids]
    if len(content_hashes) != len(matrix.paper_ids):
        raise ValueError("one content hash per row required")
    payload_sha = _write_bin(bin_path, matrix.vectors, matrix.model_id)
    manifest = {
        "model_id": matrix.model_id,
        "provider_id": matrix.provider_id,
        "dim": matrix.dim,
        "count": len(matrix.paper_ids),
        "rows": [
            {"id": pid, "content_sha256": ch}
            for pid, ch in zip(matrix.paper_ids, content_hashes)
        ],
        "payload_sha256": payload_sha,
    }
    if meta is not None:
        manifest["_meta"] = meta
    tmp = f"{manifest_path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, manifest_path)


def load_embeddings(bin_path, manifest_path) -> tuple[EmbeddingMatrix, dict[str, str]]:
    """Read matrix + manifest back, verifying checksums and row alignment.

    Returns the matrix and a {row id: content hash} map. Any disagreement
    between the two files raises CacheCorruptionError.
    """
    vectors, model_id, payload_sha = _read_bin(bin_path)
    try:
        with open(manifest_path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except json.JSONDecodeError as exc:
        raise CacheCorruptionError(f"{manifest_path}: malformed manifest: {exc}") from exc
    if manifest.get("payload_sha256") != payload_sha:
        raise CacheCorruptionError(f"{bin_path}: payload checksum mismatch")
    if manifest.get("model_id") != model_id:
        raise CacheCorruptionError(f"{manifest_path}: model_id disagrees with binary header")
    rows = manifest.get("rows", [])
    if len(rows) != vectors.shape[0] or manifest.get("count") != vectors.shape[0]:
        raise CacheCorruptionError(f"{manifest_path}: row count disagrees with binary payload")
    if manifest.get("dim") != vectors.shape[1]:
        raise CacheCorruptionError(f"{manifest_path}: dim disagrees with binary payload")
    ids = tuple(r["id"] for r in rows)
    hashes = {r["id"]: r["content_sha256"] for r in rows}
    matrix = EmbeddingMatrix(
        paper_ids=ids,
        vectors=vectors,
        provider_id=manifest.get("provider_id", "unknown"),
        model_id=model_id,
    )
    return matrix, hashes


def _safe_name(model_id: str) -> str:
    stem = re.sub(r"[^A-Za-z0-9._-]", "_", model_id)[:80]
    suffix = hashlib.sha256(model_id.encode("utf-8")).hexdigest()[:8]
    return f"{stem}-{suffix}"


class EmbeddingCache:
    """Write-through vector cache: one binary file + manifest per model.

    Rows are keyed by content hash, so edits to any abstract fall out of
    the cache naturally. Writes are serialized through one lock and land
    atomically; concurrent readers are safe.
    """

    def __init__(self, directory):
        self.directory = str(directory)
        os.makedirs(self.directory, exist_ok=True)
        self._lock = threading.Lock()

    def _paths(self, model_id: str) -> tuple[str, str]:
        base = os.path.join(self.directory, _safe_name(model_id))
        return f"{base}.bin", f"{base}.json"

    def _load_all(self, model_id: str) -> dict[str, np.ndarray]:
        bin_path, manifest_path = self._paths(model_id)
        if not (os.path.exists(bin_path) and os.path.exists(manifest_path)):
            return {}
        matrix, _ = load_embeddings(bin_path, manifest_path)
        return {pid: matrix.vectors[i] for i, pid in enumerate(matrix.paper_ids)}

    def lookup(self, model_id: str, hashes: Sequence[str]) -> dict[str, np.ndarray]:
        with self._lock:
            stored = self._load_all(model_id)
        return {h: stored[h] for h in hashes if h in stored}

    def store(self, model_id: str, provider_id: str,
              entries: dict[str, np.ndarray]) -> None:
        if not entries:
            return
        with self._lock:
            stored = self._load_all(model_id)
            stored.update(entries)
            keys = sorted(stored)
            vectors = np.stack([stored[k] for k in keys]).astype(np.float32)
            matrix = EmbeddingMatrix(
                paper_ids=tuple(keys),
                vectors=vectors,
                provider_id=provider_id,
                model_id=model_id,
            )
            bin_path, manifest_path = self._paths(model_id)
            save_embeddings(matrix, bin_path, manifest_path, content_hashes=keys)


def embed_corpus(corpus: Corpus, provider: EmbeddingProvider,
                 cache: EmbeddingCache | None = None) -> EmbeddingMatrix:
    """Embed every paper in corpus order.

    Cache hits are served from disk; only misses reach the provider, and
    fresh vectors are written back through before returning.
    """
    if len(corpus) == 0:
        raise ValueError("corpus is empty")
    papers = corpus.papers
    hashes = [content_hash(p.abstract, provider.model_id) for p in papers]
    found: dict[str, np.ndarray] = {}
    if cache is not None:
        found = cache.lookup(provider.model_id, hashes)

    missing = [i for i, h in enumerate(hashes) if h not in found]
    fresh: dict[str, np.ndarray] = {}
    if missing:
        # Distinct texts only: duplicate abstracts share one vector.
        todo: dict[str, str] = {}
        for i in missing:
            todo.setdefault(hashes[i], papers[i].abstract)
        order = list(todo)
        vectors = provider.embed_texts([todo[h] for h in order])
        vectors = np.asarray(vectors, dtype=np.float32)
        if vectors.shape != (len(order), provider.dim):
            raise ProviderError(
                f"provider returned shape {vectors.shape}, "
                f"expected {(len(order), provider.dim)}"
            )
        if not np.all(np.isfinite(vectors)):
            raise ProviderError("provider returned non-finite components")
        fresh = {h: vectors[j] for j, h in enumerate(order)}
        if cache is not None:
            cache.store(provider.model_id, provider.provider_id, fresh)

    out = np.empty((len(papers), provider.dim), dtype=np.float32)
    for i, h in enumerate(hashes):
        out[i] = found.get(h) if h in found else fresh[h]
    return EmbeddingMatrix(
        paper_ids=tuple(p.id for p in papers),
        vectors=out,
        provider_id=provider.provider_id,
        model_id=provider.model_id,
    )


def euclidean_distance(a, b) -> float:
    """√Σ(aᵢ−bᵢ)² with 64-bit accumulation regardless of input dtype."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"width mismatch: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.sum((a - b) ** 2)))
