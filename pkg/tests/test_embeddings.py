import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lexiforge import (
    EmbeddingStore,
    ParseError,
    embed_matrix,
    embed_term,
    load_embedding_store,
    parse_embedding_store,
    serialize_embedding_store,
)


def make_store(vocab: dict[str, list[float]]) -> EmbeddingStore:
    words = list(vocab)
    return EmbeddingStore(words, np.array([vocab[w] for w in words], dtype=float))


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------


def test_parse_minimal_file():
    store = parse_embedding_store(io.StringIO("2 3\na 1 0 0\nb 0 1 0\n"))
    assert store.dimension == 3
    assert len(store) == 2
    assert store.vector("a").tolist() == [1.0, 0.0, 0.0]
    assert store.words == ("a", "b")


def test_parse_max_vocab_truncates_in_file_order():
    store = parse_embedding_store(io.StringIO("2 3\na 1 0 0\nb 0 1 0\n"), max_vocab=1)
    assert len(store) == 1
    assert "a" in store and "b" not in store


def test_parse_errors():
    with pytest.raises(ParseError):
        parse_embedding_store(io.StringIO(""))
    with pytest.raises(ParseError):
        parse_embedding_store(io.StringIO("x y\n"))
    with pytest.raises(ParseError) as err:
        parse_embedding_store(io.StringIO("1 3\na 1 0\n"))
    assert err.value.line_no == 2
    with pytest.raises(ParseError):
        parse_embedding_store(io.StringIO("1 2\na 1 inf\n"))
    with pytest.raises(ParseError):
        parse_embedding_store(io.StringIO("1 2\na 1 x\n"))
    with pytest.raises(ParseError):
        parse_embedding_store(io.StringIO("3 2\na 1 2\nb 3 4\n"))


def test_parse_duplicate_words_first_wins():
    store = parse_embedding_store(io.StringIO("3 2\na 1 2\na 9 9\nb 3 4\n"))
    assert len(store) == 2
    assert store.vector("a").tolist() == [1.0, 2.0]
    assert store.n_duplicates == 1


def test_round_trip_numeric_equality():
    rng = np.random.default_rng(11)
    n, d = 1000, 8
    words = [f"w{i}" for i in range(n)]
    vectors = np.round(rng.standard_normal((n, d)), 4)
    original = EmbeddingStore(words, vectors)
    buf = io.StringIO()
    serialize_embedding_store(original, buf)
    buf.seek(0)
    reloaded = parse_embedding_store(buf)
    assert reloaded.words == original.words
    assert np.array_equal(reloaded.vectors, original.vectors)


def test_load_from_path(tmp_path):
    path = tmp_path / "vecs.txt"
    path.write_text("1 2\nhello 0.5 -0.25\n", encoding="utf-8")
    store = load_embedding_store(path)
    assert store.vector("hello").tolist() == [0.5, -0.25]


# ---------------------------------------------------------------------------
# term resolution
# ---------------------------------------------------------------------------

VOCAB = {
    "x": [1.0, 0.0, 2.0],
    "y": [0.0, 2.0, 4.0],
    "z": [3.0, 3.0, 3.0],
    "x-y": [9.0, 9.0, 9.0],
}


def test_direct_lookup_beats_splitting():
    store = make_store(VOCAB)
    vec, tag = embed_term(store, "x-y")
    assert tag == "direct"
    assert vec.tolist() == [9.0, 9.0, 9.0]


def test_averaged_lookup():
    store = make_store(VOCAB)
    vec, tag = embed_term(store, "x y")
    assert tag == "averaged"
    assert vec.tolist() == [0.5, 1.0, 3.0]


@pytest.mark.parametrize("separator", [" ", "'", "-", "’"])
def test_all_separators_recognized(separator):
    store = make_store({"u": [2.0, 0.0], "v": [0.0, 4.0]})
    vec, tag = embed_term(store, f"u{separator}v")
    assert tag == "averaged"
    assert vec.tolist() == [1.0, 2.0]


def test_unknown_term_yields_zero_vector():
    store = make_store(VOCAB)
    vec, tag = embed_term(store, "qqq")
    assert tag == "zero"
    assert np.linalg.norm(vec) == 0.0
    assert vec.shape == (3,)


def test_consecutive_separators_skip_empty_parts():
    store = make_store(VOCAB)
    vec, tag = embed_term(store, "x--''y")
    assert tag == "averaged"
    assert vec.tolist() == [0.5, 1.0, 3.0]


def test_partial_hits_average_found_parts_only():
    store = make_store(VOCAB)
    vec, tag = embed_term(store, "x-unknown-z")
    assert tag == "averaged"
    assert vec.tolist() == [2.0, 1.5, 2.5]


def test_sole_part_found_matches_direct_vector():
    store = make_store(VOCAB)
    vec, tag = embed_term(store, "x-")
    assert tag == "averaged"
    assert vec.tolist() == store.vector("x").tolist()


def test_empty_term_rejected():
    store = make_store(VOCAB)
    with pytest.raises(ValueError):
        embed_term(store, "")


@settings(max_examples=100, deadline=None)
@given(term=st.text(alphabet="xyzq -'’", min_size=1, max_size=12))
def test_embed_term_always_returns_dimension_vector(term):
    store = make_store(VOCAB)
    vec, tag = embed_term(store, term)
    assert vec.shape == (3,)
    assert tag in ("direct", "averaged", "zero")
    assert np.all(np.isfinite(vec))


# ---------------------------------------------------------------------------
# matrix
# ---------------------------------------------------------------------------


def test_embed_matrix_empty():
    store = make_store(VOCAB)
    matrix, tags = embed_matrix(store, [])
    assert matrix.shape == (0, 3)
    assert tags == []


def test_embed_matrix_in_vocab_rows():
    store = make_store(VOCAB)
    matrix, tags = embed_matrix(store, ["x", "y"])
    assert np.array_equal(matrix, np.array([VOCAB["x"], VOCAB["y"]]))
    assert tags == ["direct", "direct"]


def test_embed_matrix_matches_per_term_oracle():
    store = make_store(VOCAB)
    rng = np.random.default_rng(5)
    parts = ["x", "y", "z", "nope", "x-y", "x z", "q'q", "x--y", "zz"]
    words = [str(rng.choice(parts)) for _ in range(50)]
    matrix, tags = embed_matrix(store, words)
    for i, word in enumerate(words):
        vec, tag = embed_term(store, word)
        assert np.array_equal(matrix[i], vec)
        assert tags[i] == tag
