import json

import numpy as np
import pytest

import oracles
from pubmap.corpus import Corpus
from pubmap.embedding import (
    EmbeddingCache,
    EmbeddingMatrix,
    MockProvider,
    RemoteProvider,
    content_hash,
    embed_corpus,
    euclidean_distance,
    load_embeddings,
    mock_embed,
    save_embeddings,
)
from pubmap.errors import CacheCorruptionError, ProviderError
from synthdata import topic_corpus


class TestMockEmbed:
    def test_deterministic(self):
        a = mock_embed("solar power grid", seed=4, dim=32)
        b = mock_embed("solar power grid", seed=4, dim=32)
        np.testing.assert_array_equal(a, b)

    def test_seed_changes_vector(self):
        a = mock_embed("solar power grid", seed=4, dim=32)
        b = mock_embed("solar power grid", seed=5, dim=32)
        assert not np.array_equal(a, b)

    def test_unit_norm(self):
        for text in ["one", "two words", "a much longer piece of text here"]:
            v = mock_embed(text, seed=0, dim=768)
            assert abs(np.linalg.norm(v) - 1.0) < 1e-6

    def test_empty_text_is_first_basis_vector(self):
        v = mock_embed("", seed=9, dim=8)
        expected = np.zeros(8, dtype=np.float32)
        expected[0] = 1.0
        np.testing.assert_array_equal(v, expected)

    def test_dim_validated(self):
        with pytest.raises(ValueError):
            mock_embed("x", seed=0, dim=1)

    def test_ngram_overlap_tracks_distance(self):
        """Texts sharing most n-grams must land closer than unrelated texts.

        The overlap ordering is established first by a direct n-gram
        comparison, then the embedding distances must agree for at least
        99 of 100 seeds.
        """
        base = ("renewable energy systems rely on photovoltaic panels and "
                "wind turbines connected to the distribution grid today")
        near = ("renewable energy systems rely on photovoltaic panels and "
                "wind turbines connected to the distribution grid tomorrow")
        far = ("clinical trials examine patient outcomes after therapy "
               "protocols while hospitals track rehabilitation progress")
        assert oracles.ngram_overlap(base, near) > 0.8
        assert oracles.ngram_overlap(base, far) == 0.0
        wins = 0
        for seed in range(100):
            vb = mock_embed(base, seed, 128)
            vn = mock_embed(near, seed, 128)
            vf = mock_embed(far, seed, 128)
            if euclidean_distance(vb, vn) < euclidean_distance(vb, vf):
                wins += 1
        assert wins >= 99


class TestEuclideanDistance:
    def test_identity(self):
        v = np.arange(5.0)
        assert euclidean_distance(v, v) == 0.0

    def test_3_4_5_triangle(self):
        assert euclidean_distance([0.0, 0.0], [3.0, 4.0]) == 5.0

    def test_matches_scalar_loop_oracle(self):
        rng = np.random.default_rng(42)
        for _ in range(20):
            a = rng.normal(size=768)
            b = rng.normal(size=768)
            got = euclidean_distance(a, b)
            want = oracles.euclidean(a, b)
            assert abs(got - want) <= 1e-9 * max(1.0, abs(want))

    def test_triangle_inequality_sampled(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            a, b, c = rng.normal(size=(3, 24))
            assert euclidean_distance(a, c) <= (
                euclidean_distance(a, b) + euclidean_distance(b, c) + 1e-12
            )

    def test_width_mismatch_rejected(self):
        with pytest.raises(ValueError, match="width"):
            euclidean_distance([1.0, 2.0], [1.0, 2.0, 3.0])


class TestEmbeddingMatrix:
    def test_row_alignment_enforced(self):
        with pytest.raises(ValueError):
            EmbeddingMatrix(("a",), np.zeros((2, 4)), "mock", "m")

    def test_duplicate_ids_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            EmbeddingMatrix(("a", "a"), np.zeros((2, 4)), "mock", "m")

    def test_non_finite_rejected(self):
        bad = np.zeros((1, 4), dtype=np.float32)
        bad[0, 0] = np.nan
        with pytest.raises(ValueError, match="finite"):
            EmbeddingMatrix(("a",), bad, "mock", "m")

    def test_vectors_are_immutable(self):
        m = EmbeddingMatrix(("a",), np.zeros((1, 4)), "mock", "m")
        with pytest.raises(ValueError):
            m.vectors[0, 0] = 1.0


class _CountingProvider:
    """MockProvider wrapper that counts embed calls."""

    def __init__(self, dim=16, seed=0):
        self._inner = MockProvider(dim=dim, seed=seed)
        self.calls = 0
        self.provider_id = self._inner.provider_id
        self.model_id = self._inner.model_id
        self.dim = dim

    def embed_texts(self, texts):
        self.calls += 1
        return self._inner.embed_texts(texts)


class TestEmbedCorpus:
    def test_shape_and_norms(self):
        corpus = topic_corpus(0, n_authors=6, solo_papers=2)
        matrix = embed_corpus(corpus, MockProvider(dim=768, seed=0))
        assert matrix.vectors.shape == (len(corpus), 768)
        norms = np.linalg.norm(matrix.vectors, axis=1)
        np.testing.assert_allclose(norms, 1.0, atol=1e-6)

    def test_cache_hit_skips_provider(self, tmp_path):
        corpus = topic_corpus(1, n_authors=4, solo_papers=2)
        cache = EmbeddingCache(tmp_path / "cache")
        provider = _CountingProvider()
        first = embed_corpus(corpus, provider, cache)
        assert provider.calls == 1
        second = embed_corpus(corpus, provider, cache)
        assert provider.calls == 1  # no new provider traffic
        np.testing.assert_array_equal(first.vectors, second.vectors)

    def test_changed_abstract_misses_cache(self, tmp_path):
        corpus = topic_corpus(1, n_authors=4, solo_papers=2)
        cache = EmbeddingCache(tmp_path / "cache")
        provider = _CountingProvider()
        embed_corpus(corpus, provider, cache)
        edited = Corpus.from_papers([
            p if i else type(p)(
                id=p.id, title=p.title, authors=p.authors, date=p.date,
                abstract=p.abstract + " edited", language=p.language,
                source_type=p.source_type,
            )
            for i, p in enumerate(corpus.papers)
        ])
        embed_corpus(edited, provider, cache)
        assert provider.calls == 2

    def test_empty_corpus_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            embed_corpus(Corpus.from_papers([]), MockProvider(dim=8))


class TestCacheFiles:
    def _matrix(self, n=5, dim=12, seed=0):
        rng = np.random.default_rng(seed)
        return EmbeddingMatrix(
            tuple(f"p{i}" for i in range(n)),
            rng.normal(size=(n, dim)).astype(np.float32),
            "mock", "test-model",
        )

    def test_round_trip_bit_exact(self, tmp_path):
        m = self._matrix()
        save_embeddings(m, tmp_path / "e.bin", tmp_path / "m.json")
        loaded, hashes = load_embeddings(tmp_path / "e.bin", tmp_path / "m.json")
        np.testing.assert_array_equal(loaded.vectors, m.vectors)
        assert loaded.paper_ids == m.paper_ids
        assert loaded.model_id == m.model_id
        assert set(hashes) == set(m.paper_ids)

    def test_payload_tamper_detected(self, tmp_path):
        m = self._matrix()
        save_embeddings(m, tmp_path / "e.bin", tmp_path / "m.json")
        blob = bytearray((tmp_path / "e.bin").read_bytes())
        blob[-1] ^= 0xFF
        (tmp_path / "e.bin").write_bytes(bytes(blob))
        with pytest.raises(CacheCorruptionError, match="checksum"):
            load_embeddings(tmp_path / "e.bin", tmp_path / "m.json")

    def test_truncation_detected(self, tmp_path):
        m = self._matrix()
        save_embeddings(m, tmp_path / "e.bin", tmp_path / "m.json")
        blob = (tmp_path / "e.bin").read_bytes()
        (tmp_path / "e.bin").write_bytes(blob[:-8])
        with pytest.raises(CacheCorruptionError, match="truncated"):
            load_embeddings(tmp_path / "e.bin", tmp_path / "m.json")

    def test_bad_magic_detected(self, tmp_path):
        (tmp_path / "e.bin").write_bytes(b"NOTEMB??" + b"\x00" * 32)
        (tmp_path / "m.json").write_text("{}", encoding="utf-8")
        with pytest.raises(CacheCorruptionError, match="magic"):
            load_embeddings(tmp_path / "e.bin", tmp_path / "m.json")

    def test_manifest_disagreement_detected(self, tmp_path):
        m = self._matrix()
        save_embeddings(m, tmp_path / "e.bin", tmp_path / "m.json")
        manifest = json.loads((tmp_path / "m.json").read_text())
        manifest["count"] = 99
        (tmp_path / "m.json").write_text(json.dumps(manifest))
        with pytest.raises(CacheCorruptionError, match="count"):
            load_embeddings(tmp_path / "e.bin", tmp_path / "m.json")

    def test_content_hash_separates_models(self):
        assert content_hash("abc", "m1") != content_hash("abc", "m2")
        assert content_hash("abc", "m1") == content_hash("abc", "m1")


class _FakeResponse:
    def __init__(self, status_code, payload):
        self.status_code = status_code
        self._payload = payload
        self.text = json.dumps(payload)

    def json(self):
        return self._payload


class _FakeSession:
    def __init__(self, dim=8, fail_status=None):
        self.dim = dim
        self.fail_status = fail_status
        self.posts = []

    def post(self, url, json=None, timeout=None):
        self.posts.append(json)
        if self.fail_status:
            return _FakeResponse(self.fail_status, {"error": "boom"})
        texts = json["texts"]
        return _FakeResponse(200, {
            "vectors": [[0.5] * self.dim for _ in texts],
            "model": json["model"],
            "dim": self.dim,
        })

    def get(self, url, timeout=None):
        return _FakeResponse(200, {"status": "ok"})


class TestRemoteProvider:
    def test_batches_capped_at_64(self):
        session = _FakeSession(dim=8)
        provider = RemoteProvider("http://svc", "m", dim=8, session=session)
        out = provider.embed_texts([f"t{i}" for i in range(130)])
        assert out.shape == (130, 8)
        assert [len(p["texts"]) for p in session.posts] == [64, 64, 2]

    def test_error_status_surfaces_message(self):
        provider = RemoteProvider(
            "http://svc", "m", dim=8, session=_FakeSession(fail_status=503)
        )
        with pytest.raises(ProviderError, match="503.*boom"):
            provider.embed_texts(["x"])

    def test_width_mismatch_rejected(self):
        provider = RemoteProvider(
            "http://svc", "m", dim=16, session=_FakeSession(dim=8)
        )
        with pytest.raises(ProviderError, match="width mismatch"):
            provider.embed_texts(["x"])
