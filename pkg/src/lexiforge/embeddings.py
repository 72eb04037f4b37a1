"""Word vector store with multi-token and out-of-vocabulary fallback.

Vector files use the common text format: a ``<count> <dim>`` header
followed by one ``word v1 ... v_dim`` line per word, single-space
separated. Lookup never fails: terms missing from the vocabulary are
split on spaces, apostrophes, and hyphens, the found parts averaged,
and the zero vector used when nothing is recognized.
"""

from __future__ import annotations

import logging
import re
from typing import IO, Sequence

import numpy as np

from .errors import ParseError

log = logging.getLogger(__name__)

# space, ASCII apostrophe, typographic apostrophe, hyphen-minus
_SEPARATOR_RE = re.compile("[ '’-]")

#: Resolution tags returned by embed_term.
RESOLUTION_TAGS = ("direct", "averaged", "zero")


class EmbeddingStore:
    """Immutable vocabulary-to-vector mapping of fixed dimension."""

    def __init__(self, words: Sequence[str], vectors: np.ndarray, n_duplicates: int = 0):
        vectors = np.ascontiguousarray(vectors, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[0] != len(words):
            raise ValueError(f"vectors shape {vectors.shape} does not match {len(words)} words")
        if vectors.size and not np.all(np.isfinite(vectors)):
            raise ValueError("vectors must be finite")
        if vectors.shape[1] < 1:
            raise ValueError("dimension must be positive")
        vectors.setflags(write=False)
        self.words: tuple[str, ...] = tuple(words)
        self.vectors = vectors
        self.n_duplicates = n_duplicates
        self._index: dict[str, int] = {w: i for i, w in enumerate(self.words)}
        if len(self._index) != len(self.words):
            raise ValueError("vocabulary words must be unique")

    @property
    def dimension(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self._index

    def vector(self, word: str) -> np.ndarray:
        return self.vectors[self._index[word]]


def parse_embedding_store(
    stream: IO[str], max_vocab: int | None = None, *, path=None
) -> EmbeddingStore:
    """Parse a text vector file, keeping at most ``max_vocab`` entries.

    Entries are read in file order; with ``max_vocab`` set, reading
    stops once that many entries are stored, so the tail of a large file
    is never touched. A duplicate word keeps its first vector (the
    number of ignored lines is logged and recorded on the store).
    """
    header = stream.readline()
    if not header:
        raise ParseError("empty input, missing '<count> <dim>' header", line_no=1, path=path)
    parts = header.split()
    try:
        count, dim = int(parts[0]), int(parts[1])
        if len(parts) != 2 or count < 0 or dim < 1:
            raise ValueError
    except (ValueError, IndexError):
        raise ParseError(
            f"malformed header {header.strip()!r}, expected '<count> <dim>'",
            line_no=1, path=path,
        ) from None

    n_keep = count if max_vocab is None else min(count, max_vocab)
    vectors = np.empty((n_keep, dim), dtype=np.float64)
    words: list[str] = []
    index: dict[str, int] = {}
    duplicates = 0
    lines_read = 0
    for line_no, raw in enumerate(stream, start=2):
        if lines_read >= count or len(words) >= n_keep:
            break
        lines_read += 1
        parts = raw.rstrip("\n").split(" ")
        if len(parts) != dim + 1:
            raise ParseError(
                f"expected word plus {dim} values, found {len(parts) - 1}",
                line_no=line_no, path=path,
            )
        word = parts[0]
        if not word:
            raise ParseError("empty word", line_no=line_no, path=path)
        if word in index:
            duplicates += 1
            continue
        try:
            row = [float(tok) for tok in parts[1:]]
        except ValueError:
            raise ParseError("non-numeric vector component", line_no=line_no, path=path) from None
        if not all(np.isfinite(row)):
            raise ParseError("non-finite vector component", line_no=line_no, path=path)
        index[word] = len(words)
        vectors[len(words)] = row
        words.append(word)
    if lines_read < count and len(words) < n_keep:
        raise ParseError(
            f"header promised {count} vectors, file ends after {lines_read}",
            line_no=lines_read + 1, path=path,
        )
    if duplicates:
        log.warning("embedding file: ignored %d duplicate words", duplicates)
    return EmbeddingStore(words, vectors[: len(words)], n_duplicates=duplicates)


def load_embedding_store(path, max_vocab: int | None = None) -> EmbeddingStore:
    with open(path, encoding="utf-8") as fh:
        return parse_embedding_store(fh, max_vocab, path=path)


def serialize_embedding_store(store: EmbeddingStore, stream: IO[str]) -> None:
    stream.write(f"{len(store)} {store.dimension}\n")
    for i, word in enumerate(store.words):
        stream.write(" ".join([word, *(repr(float(v)) for v in store.vectors[i])]) + "\n")


def save_embedding_store(store: EmbeddingStore, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        serialize_embedding_store(store, fh)


def embed_term(store: EmbeddingStore, term: str) -> tuple[np.ndarray, str]:
    """Resolve a term to a vector; never fails.

    In-vocabulary terms return their stored vector (tag ``direct``).
    Otherwise the term is split on spaces, apostrophes, and hyphens,
    empty parts are dropped, and the found parts' vectors are averaged
    (tag ``averaged``). When no part is recognized the zero vector is
    returned (tag ``zero``).
    """
    if not term:
        raise ValueError("term must be non-empty")
    idx = store._index.get(term)
    if idx is not None:
        return store.vectors[idx].copy(), "direct"
    hits = [
        store._index[part]
        for part in _SEPARATOR_RE.split(term)
        if part and part in store._index
    ]
    if not hits:
        return np.zeros(store.dimension), "zero"
    return store.vectors[hits].mean(axis=0), "averaged"


def embed_matrix(
    store: EmbeddingStore, words: Sequence[str]
) -> tuple[np.ndarray, list[str]]:
    """Stack embed_term results for an ordered word list.

    Row i is exactly ``embed_term(store, words[i])``; the second return
    value carries the per-row resolution tags.
    """
    out = np.empty((len(words), store.dimension), dtype=np.float64)
    tags: list[str] = []
    for i, word in enumerate(words):
        vec, tag = embed_term(store, word)
        out[i] = vec
        tags.append(tag)
    return out, tags
