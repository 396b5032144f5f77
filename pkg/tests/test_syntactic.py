import numpy as np
import pytest

from titlemap.errors import DataError, DegenerateInputError, FormatError
from titlemap.syntactic import (
    Taxonomy,
    build_syntactic_vector,
    gram_set,
    string_cosine,
    syntactic_matrix,
)

from helpers import brute_force_gram_cosine


def test_gram_set_matches_enumerated_example():
    assert gram_set("abcd") == {"^^a", "^ab", "abc", "bcd", "cd$", "d$$"}


def test_identical_strings_score_one():
    assert string_cosine("software engineer", "software engineer") == 1.0


def test_disjoint_strings_score_zero():
    assert string_cosine("aaa", "zzz") == 0.0


def test_worked_example_one_sixth():
    # A={^^a,^ab,abc,bcd,cd$,d$$}, B={^^b,^bc,bcd,cde,de$,e$$}, shared={bcd}
    assert string_cosine("abcd", "bcde") == pytest.approx(1 / 6, abs=1e-15)


def test_cosine_is_symmetric():
    rng = np.random.default_rng(0)
    words = ["data", "analyst", "chef", "pilot", "nurse", "clerk"]
    for _ in range(50):
        a = " ".join(rng.choice(words, size=rng.integers(1, 4)))
        b = " ".join(rng.choice(words, size=rng.integers(1, 4)))
        assert string_cosine(a, b) == string_cosine(b, a)


def test_cosine_bounded_and_one_iff_same_grams():
    rng = np.random.default_rng(1)
    words = ["red", "green", "blue", "cyan"]
    for _ in range(100):
        a = " ".join(rng.choice(words, size=rng.integers(1, 4)))
        b = " ".join(rng.choice(words, size=rng.integers(1, 4)))
        score = string_cosine(a, b)
        assert 0.0 <= score <= 1.0
        assert (score == 1.0) == (gram_set(a) == gram_set(b))


def test_cosine_matches_brute_force_oracle():
    rng = np.random.default_rng(2)
    words = ["account", "manager", "sales", "embedded", "nurse", "ops", "ai"]
    for _ in range(100):
        a = " ".join(rng.choice(words, size=rng.integers(1, 4)))
        b = " ".join(rng.choice(words, size=rng.integers(1, 4)))
        assert string_cosine(a, b) == brute_force_gram_cosine(a, b)


def test_cosine_rejects_empty_inputs():
    with pytest.raises(DegenerateInputError):
        string_cosine("", "abc")


def test_taxonomy_rejects_duplicates_after_canonicalization():
    with pytest.raises(DataError):
        Taxonomy(titles=["Chef", "  chef "])


def test_taxonomy_version_tracks_order():
    t1 = Taxonomy(titles=["a b", "c d"])
    t2 = Taxonomy(titles=["c d", "a b"])
    assert t1.version_id != t2.version_id
    assert t1.version_id == Taxonomy(titles=["a b", "c d"]).version_id


def test_vector_peaks_at_own_index():
    taxonomy = Taxonomy(titles=["data analyst", "chef", "pilot", "embedded engineer"])
    vec = build_syntactic_vector("Embedded   Engineer", taxonomy)
    assert vec.values[3] == 1.0
    assert len(vec.values) == 4
    assert vec.taxonomy_version == taxonomy.version_id


def test_vector_matches_elementwise_brute_force():
    taxonomy = Taxonomy(titles=["data analyst", "chef de partie", "airline pilot", "sales manager"])
    rng = np.random.default_rng(3)
    words = ["data", "sales", "chef", "pilot", "manager", "junior"]
    for _ in range(50):
        title = " ".join(rng.choice(words, size=rng.integers(1, 4)))
        vec = build_syntactic_vector(title, taxonomy).values
        oracle = [brute_force_gram_cosine(title, v) for v in taxonomy.titles]
        assert list(vec) == oracle


def test_vector_is_pure_function_of_inputs():
    taxonomy = Taxonomy(titles=["a b", "c d"])
    v1 = build_syntactic_vector("a c", taxonomy).values
    v2 = build_syntactic_vector("a c", taxonomy).values
    assert np.array_equal(v1, v2)


def test_matrix_stacks_rows():
    taxonomy = Taxonomy(titles=["data analyst", "chef"])
    mat = syntactic_matrix(["chef", "data analyst"], taxonomy)
    assert mat.shape == (2, 2)
    assert mat[0, 1] == 1.0 and mat[1, 0] == 1.0


def test_taxonomy_tsv_round_trip(tmp_path):
    taxonomy = Taxonomy(titles=["data analyst", "chef"], groups=["g0", "g1"])
    path = tmp_path / "tax.tsv"
    taxonomy.write_tsv(path)
    loaded = Taxonomy.load_tsv(path)
    assert loaded.titles == taxonomy.titles
    assert loaded.groups == taxonomy.groups
    assert loaded.version_id == taxonomy.version_id


def test_taxonomy_tsv_rejects_malformed_rows(tmp_path):
    path = tmp_path / "tax.tsv"
    path.write_text("only one field\n")
    with pytest.raises(FormatError):
        Taxonomy.load_tsv(path)
