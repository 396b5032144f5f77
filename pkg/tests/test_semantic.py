import numpy as np
import pytest

from titlemap.errors import ConfigError, FormatError, MissingTitleError
from titlemap.semantic import (
    EmbeddingCache,
    HashedNgramProvider,
    PrecomputedProvider,
    embed_titles,
    hashed_ngram_embed,
    load_precomputed,
    write_embeddings,
)


def test_embedding_is_bit_deterministic():
    a = hashed_ngram_embed("software engineer", 64, seed=7)
    b = hashed_ngram_embed("software engineer", 64, seed=7)
    assert np.array_equal(a, b)


def test_embedding_is_unit_norm():
    for title in ("chef", "senior ml engineer", "x"):
        vec = hashed_ngram_embed(title, 32, seed=0)
        assert abs(np.linalg.norm(vec) - 1.0) <= 1e-9


def test_seed_changes_embedding():
    a = hashed_ngram_embed("chef", 64, seed=0)
    b = hashed_ngram_embed("chef", 64, seed=1)
    assert not np.array_equal(a, b)


def test_shared_tokens_raise_similarity():
    e = hashed_ngram_embed
    sim_related = float(e("software engineer", 128, 0) @ e("software developer", 128, 0))
    sim_unrelated = float(e("software engineer", 128, 0) @ e("pastry chef", 128, 0))
    assert sim_related > sim_unrelated


def test_similarity_monotone_in_shared_token_count():
    # words drawn from disjoint alphabets so token sets share nothing by accident
    shared = ["aaa", "bbb", "ccc"]
    fill_a = ["ddd", "eee", "fff"]
    fill_b = ["ggg", "hhh", "iii"]
    sims = []
    for k in range(4):
        left = " ".join(shared[:k] + fill_a[: 3 - k])
        right = " ".join(shared[:k] + fill_b[: 3 - k])
        vec_l = hashed_ngram_embed(left, 256, seed=5)
        vec_r = hashed_ngram_embed(right, 256, seed=5)
        sims.append(float(vec_l @ vec_r))
    assert all(b > a for a, b in zip(sims, sims[1:]))


def test_small_dimension_rejected():
    with pytest.raises(ConfigError):
        hashed_ngram_embed("chef", 4, seed=0)
    with pytest.raises(ConfigError):
        HashedNgramProvider(dimension=7)


def test_embed_titles_counts():
    provider = HashedNgramProvider(dimension=32, seed=0)
    assert len(embed_titles(provider, [])) == 0
    cache = embed_titles(provider, ["a b", "c", "d e f"])
    assert len(cache) == 3
    assert all(abs(np.linalg.norm(v) - 1) <= 1e-9 for v in cache.vectors.values())


def test_embeddings_tsv_round_trip(tmp_path):
    provider = HashedNgramProvider(dimension=16, seed=3)
    cache = embed_titles(provider, ["chef", "pilot"])
    path = tmp_path / "emb.tsv"
    write_embeddings(path, cache)
    loaded = load_precomputed(path)
    assert loaded.dimension == 16
    for title, vec in cache.vectors.items():
        assert np.max(np.abs(loaded.vectors[title] - vec)) <= 1e-12


def test_load_rejects_row_with_wrong_dimension(tmp_path):
    path = tmp_path / "emb.tsv"
    path.write_text("#embeddings d=4 normalize=false\nchef\t0.1,0.2,0.3\n")
    with pytest.raises(FormatError, match=":2"):
        load_precomputed(path)


def test_load_rejects_duplicate_title(tmp_path):
    path = tmp_path / "emb.tsv"
    path.write_text(
        "#embeddings d=2 normalize=false\nchef\t0.1,0.2\nchef\t0.3,0.4\n"
    )
    with pytest.raises(FormatError, match="duplicate"):
        load_precomputed(path)


def test_load_normalize_flag_renormalizes(tmp_path):
    path = tmp_path / "emb.tsv"
    path.write_text("#embeddings d=2 normalize=true\nchef\t3.0,4.0\n")
    cache = load_precomputed(path)
    assert np.allclose(cache.vectors["chef"], [0.6, 0.8])


def test_precomputed_provider_with_fallback_tracks_provenance(tmp_path):
    provider = HashedNgramProvider(dimension=16, seed=3)
    cache = embed_titles(provider, ["chef"])
    path = tmp_path / "emb.tsv"
    write_embeddings(path, cache)
    mixed = PrecomputedProvider(load_precomputed(path), fallback=provider)
    out = embed_titles(mixed, ["chef", "pilot"])
    assert out.provenance["chef"].startswith("file:")
    assert out.provenance["pilot"].startswith("hashed:")


def test_precomputed_provider_without_fallback_lists_missing():
    cache = EmbeddingCache(dimension=8)
    cache.vectors["chef"] = np.ones(8) / np.sqrt(8)
    provider = PrecomputedProvider(cache, fallback=None)
    with pytest.raises(MissingTitleError) as exc:
        embed_titles(provider, ["chef", "pilot", "nurse"])
    message = str(exc.value)
    assert "pilot" in message and "nurse" in message


def test_fallback_dimension_must_match():
    cache = EmbeddingCache(dimension=8)
    with pytest.raises(ConfigError):
        PrecomputedProvider(cache, fallback=HashedNgramProvider(dimension=16))
