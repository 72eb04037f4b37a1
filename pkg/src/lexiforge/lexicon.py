"""Emotion lexicon data model, split construction, and duplicate handling.

A lexicon maps word types to numeric emotion ratings under a declared
variable set. Entries optionally carry a train/dev/test split tag and a
provenance (human annotated, translated, or model predicted). All types
are immutable after construction; every operation returns a new object.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, replace
from functools import cached_property
from typing import IO, Iterable, Iterator

import numpy as np

from .errors import IntegrityError, ParseError, SchemaError

SPLIT_TAGS = ("train", "dev", "test", "none")
PROVENANCES = ("human", "translated", "predicted")

VAD_NAMES = ("Val", "Aro", "Dom")
BE5_NAMES = ("Joy", "Ang", "Sad", "Fea", "Dis")
CANONICAL_VARIABLES = VAD_NAMES + BE5_NAMES

DEFAULT_DUPLICATE_TOL = 1e-6


@dataclass(frozen=True)
class ScaleSpec:
    """Numeric rating scale: bounds plus the neutral resting value."""

    min: float
    max: float
    neutral: float

    def __post_init__(self):
        if not self.min < self.max:
            raise ValueError(f"scale min {self.min} must be < max {self.max}")
        if not self.min <= self.neutral <= self.max:
            raise ValueError(f"neutral {self.neutral} outside [{self.min}, {self.max}]")


#: 1-to-9 scale with neutral 5, used by the dimensional variables.
VAD_SCALE = ScaleSpec(1.0, 9.0, 5.0)
#: 1-to-5 scale with neutral 1, used by the discrete basic emotions.
BE5_SCALE = ScaleSpec(1.0, 5.0, 1.0)

FAMILIES = ("dimensional", "discrete", "other")


@dataclass(frozen=True)
class VariableSet:
    """Ordered set of emotion variable names plus a family tag.

    Column order in files and matrices always follows ``names``.
    """

    names: tuple[str, ...]
    family: str = "other"

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        if not self.names:
            raise ValueError("variable set must not be empty")
        if len(set(self.names)) != len(self.names):
            raise ValueError(f"duplicate variable names: {self.names}")
        if any(not n for n in self.names):
            raise ValueError("variable names must be non-empty")
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")

    def __len__(self) -> int:
        return len(self.names)

    def __contains__(self, name: str) -> bool:
        return name in self.names

    def index(self, name: str) -> int:
        return self.names.index(name)


def infer_family(names: Iterable[str]) -> str:
    names = tuple(names)
    if names and all(n in VAD_NAMES for n in names):
        return "dimensional"
    if names and all(n in BE5_NAMES for n in names):
        return "discrete"
    return "other"


def make_variable_set(names: Iterable[str]) -> VariableSet:
    names = tuple(names)
    return VariableSet(names, infer_family(names))


def default_scale(family: str) -> ScaleSpec | None:
    """Built-in scale for a variable family, or None when mixed/unknown."""
    if family == "dimensional":
        return VAD_SCALE
    if family == "discrete":
        return BE5_SCALE
    return None


def canonical_variable_order(names: Iterable[str]) -> tuple[str, ...]:
    """Order variables as in the standard eight-column layout, extras last."""
    names = list(dict.fromkeys(names))
    known = [n for n in CANONICAL_VARIABLES if n in names]
    extra = sorted(n for n in names if n not in CANONICAL_VARIABLES)
    return tuple(known + extra)


@dataclass(frozen=True)
class LexiconEntry:
    """One word with its ratings; a read-only view into a Lexicon."""

    word: str
    values: np.ndarray
    split: str
    provenance: str


@dataclass(frozen=True, eq=False)
class Lexicon:
    """Immutable word-to-ratings table.

    ``values`` has one row per word in ``words`` and one column per
    variable. Word types need not be unique: a translated lexicon may
    contain partial duplicates (same word, different values). Use
    :attr:`unique_words` to test, :func:`collapse_duplicates` to merge.
    """

    variables: VariableSet
    words: tuple[str, ...]
    values: np.ndarray
    splits: tuple[str, ...]
    provenance: str
    language: str = "und"
    scale: ScaleSpec | None = None

    def __post_init__(self):
        object.__setattr__(self, "words", tuple(self.words))
        object.__setattr__(self, "splits", tuple(self.splits))
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape != (len(self.words), len(self.variables)):
            raise ValueError(
                f"values shape {values.shape} does not match "
                f"{len(self.words)} words x {len(self.variables)} variables"
            )
        if values.size and not np.all(np.isfinite(values)):
            raise ValueError("lexicon values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if len(self.splits) != len(self.words):
            raise ValueError("one split tag per word required")
        bad = {s for s in self.splits if s not in SPLIT_TAGS}
        if bad:
            raise ValueError(f"invalid split tags: {sorted(bad)}")
        if self.provenance not in PROVENANCES:
            raise ValueError(f"invalid provenance {self.provenance!r}")
        if any(not w for w in self.words):
            raise ValueError("words must be non-empty")

    def __len__(self) -> int:
        return len(self.words)

    def __iter__(self) -> Iterator[LexiconEntry]:
        for i in range(len(self.words)):
            yield self.entry(i)

    def entry(self, i: int) -> LexiconEntry:
        return LexiconEntry(self.words[i], self.values[i], self.splits[i], self.provenance)

    @cached_property
    def unique_words(self) -> bool:
        return len(set(self.words)) == len(self.words)

    @cached_property
    def row_index(self) -> dict[str, int]:
        """Word -> row of its first occurrence."""
        index: dict[str, int] = {}
        for i, w in enumerate(self.words):
            index.setdefault(w, i)
        return index

    @cached_property
    def word_types(self) -> frozenset[str]:
        return frozenset(self.words)

    def row(self, word: str) -> np.ndarray:
        """Values of a word's first occurrence."""
        return self.values[self.row_index[word]]

    def split_words(self, tag: str) -> set[str]:
        """Word types carrying the given split tag."""
        if tag not in SPLIT_TAGS:
            raise ValueError(f"invalid split tag {tag!r}")
        return {w for w, s in zip(self.words, self.splits) if s == tag}

    def split_sizes(self) -> dict[str, int]:
        sizes = {tag: 0 for tag in SPLIT_TAGS}
        for s in self.splits:
            sizes[s] += 1
        return sizes

    def require_unique(self, context: str) -> None:
        if not self.unique_words:
            n_dup = len(self.words) - len(self.word_types)
            raise IntegrityError(
                f"{context} requires unique word types; found {n_dup} duplicate entries"
            )

    def column(self, variable: str) -> np.ndarray:
        return self.values[:, self.variables.index(variable)]


@dataclass(frozen=True)
class SplitSets:
    """Word-type sets of the translated (MT) splits, the embedding
    vocabulary, and the prediction splits derived from them.

    The prediction splits are defined so that no word available at
    training time can reappear in the dev or test split:

    - pred_train = mt_train
    - pred_dev   = mt_dev minus mt_train
    - pred_test  = (mt_test union embedding_vocab) minus (mt_dev union mt_train)
    """

    mt_train: frozenset[str]
    mt_dev: frozenset[str]
    mt_test: frozenset[str]
    embedding_vocab: frozenset[str]
    pred_train: frozenset[str]
    pred_dev: frozenset[str]
    pred_test: frozenset[str]

    def __post_init__(self):
        for name in ("mt_train", "mt_dev", "mt_test", "embedding_vocab",
                     "pred_train", "pred_dev", "pred_test"):
            object.__setattr__(self, name, frozenset(getattr(self, name)))
        if self.pred_train != self.mt_train:
            raise IntegrityError("pred_train must equal mt_train")
        if self.pred_dev != self.mt_dev - self.mt_train:
            raise IntegrityError("pred_dev must equal mt_dev minus mt_train")
        expected_test = (self.mt_test | self.embedding_vocab) - (self.mt_dev | self.mt_train)
        if self.pred_test != expected_test:
            raise IntegrityError(
                "pred_test must equal (mt_test | embedding_vocab) - (mt_dev | mt_train)"
            )
        if (self.pred_train & self.pred_dev or self.pred_train & self.pred_test
                or self.pred_dev & self.pred_test):
            raise IntegrityError("prediction splits must be pairwise disjoint")

    @classmethod
    def from_lexicons(cls, mt: "Lexicon", pred: "Lexicon") -> "SplitSets":
        """Reconstruct split sets from the tags stored in the two lexicons.

        The embedding vocabulary is recovered only up to what the
        evaluation protocols need (membership of pred_test words).
        """
        mt_test = frozenset(mt.split_words("test"))
        pred_test = frozenset(pred.split_words("test"))
        return cls(
            mt_train=frozenset(mt.split_words("train")),
            mt_dev=frozenset(mt.split_words("dev")),
            mt_test=mt_test,
            embedding_vocab=pred_test | mt_test,
            pred_train=frozenset(pred.split_words("train")),
            pred_dev=frozenset(pred.split_words("dev")),
            pred_test=pred_test,
        )


def derive_prediction_splits(mt: Lexicon, embedding_vocab: Iterable[str]) -> SplitSets:
    """Derive the prediction splits from a split-tagged MT lexicon.

    ``embedding_vocab`` is the word set of the embedding model used for
    expansion; its words land in pred_test unless already seen in the MT
    train or dev split.
    """
    mt_train = frozenset(mt.split_words("train"))
    mt_dev = frozenset(mt.split_words("dev"))
    mt_test = frozenset(mt.split_words("test"))
    vocab = frozenset(embedding_vocab)
    return SplitSets(
        mt_train=mt_train,
        mt_dev=mt_dev,
        mt_test=mt_test,
        embedding_vocab=vocab,
        pred_train=mt_train,
        pred_dev=mt_dev - mt_train,
        pred_test=(mt_test | vocab) - (mt_dev | mt_train),
    )


# ---------------------------------------------------------------------------
# TSV ingestion and serialization
#
# Format: UTF-8, tab separated, '\n' line ends, header row
# ``word<TAB>var1...<TAB>[split]``, decimal point '.', no quoting.
# ---------------------------------------------------------------------------


def parse_lexicon(
    stream: IO[str],
    expected_variables: VariableSet | None = None,
    *,
    provenance: str = "human",
    language: str = "und",
    path=None,
) -> Lexicon:
    """Parse a lexicon TSV.

    Words are NFC-normalized on ingestion; no case folding is applied.
    Human-provenance values must lie within the variable family's scale
    when one is known (predicted lexicons are allowed to exceed it).
    Raises ParseError with a line number on malformed input and
    SchemaError when the header does not match ``expected_variables``.
    """
    header_line = stream.readline()
    if not header_line:
        raise ParseError("empty input, missing header row", line_no=1, path=path)
    header = header_line.rstrip("\r\n").split("\t")
    if header[0] != "word" or len(header) < 2:
        raise ParseError(
            "header must be 'word<TAB>var1...<TAB>[split]'", line_no=1, path=path
        )
    has_split = len(header) > 2 and header[-1] == "split"
    names = tuple(header[1:-1] if has_split else header[1:])
    try:
        variables = make_variable_set(names)
    except ValueError as exc:
        raise ParseError(f"bad header: {exc}", line_no=1, path=path) from exc
    if expected_variables is not None and names != tuple(expected_variables.names):
        raise SchemaError(
            f"variable columns {names} do not match expected {tuple(expected_variables.names)}"
        )
    scale = default_scale(variables.family)
    check_range = scale is not None and provenance == "human"

    k = len(names)
    arity = 1 + k + (1 if has_split else 0)
    words: list[str] = []
    splits: list[str] = []
    rows: list[list[float]] = []
    for line_no, raw in enumerate(stream, start=2):
        fields = raw.rstrip("\r\n").split("\t")
        if len(fields) != arity:
            raise ParseError(
                f"expected {arity} fields, found {len(fields)}", line_no=line_no, path=path
            )
        word = unicodedata.normalize("NFC", fields[0].strip())
        if not word:
            raise ParseError("empty word", line_no=line_no, path=path)
        row = []
        for name, tok in zip(names, fields[1 : 1 + k]):
            try:
                v = float(tok)
            except ValueError:
                raise ParseError(
                    f"non-numeric value {tok!r} for variable {name}",
                    line_no=line_no, path=path,
                ) from None
            if not np.isfinite(v):
                raise ParseError(
                    f"non-finite value for variable {name}", line_no=line_no, path=path
                )
            if check_range and not scale.min <= v <= scale.max:
                raise ParseError(
                    f"value {v} for {name} outside scale [{scale.min}, {scale.max}]",
                    line_no=line_no, path=path,
                )
            row.append(v)
        if has_split:
            tag = fields[-1]
            if tag not in SPLIT_TAGS:
                raise ParseError(f"invalid split tag {tag!r}", line_no=line_no, path=path)
        else:
            tag = "none"
        words.append(word)
        splits.append(tag)
        rows.append(row)

    values = np.asarray(rows, dtype=np.float64).reshape(len(words), k)
    return Lexicon(
        variables=variables,
        words=tuple(words),
        values=values,
        splits=tuple(splits),
        provenance=provenance,
        language=language,
        scale=scale,
    )


def serialize_lexicon(lex: Lexicon, stream: IO[str]) -> None:
    """Write a lexicon TSV; inverse of :func:`parse_lexicon`.

    Floats are written in shortest round-trip form, so
    parse(serialize(lex)) reproduces the values bit for bit. The split
    column is emitted only when at least one entry carries a tag.
    """
    has_split = any(s != "none" for s in lex.splits)
    header = ["word", *lex.variables.names] + (["split"] if has_split else [])
    stream.write("\t".join(header) + "\n")
    for i, word in enumerate(lex.words):
        fields = [word] + [repr(float(v)) for v in lex.values[i]]
        if has_split:
            fields.append(lex.splits[i])
        stream.write("\t".join(fields) + "\n")


def load_lexicon(path, expected_variables=None, *, provenance="human", language="und") -> Lexicon:
    with open(path, encoding="utf-8") as fh:
        return parse_lexicon(
            fh, expected_variables, provenance=provenance, language=language, path=path
        )


def save_lexicon(lex: Lexicon, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        serialize_lexicon(lex, fh)


def load_word_list(path) -> set[str]:
    """Read a reference word list (one word per line, NFC-normalized)."""
    words = set()
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            w = unicodedata.normalize("NFC", raw.strip())
            if w:
                words.add(w)
    return words


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def _take(lex: Lexicon, indices: list[int]) -> Lexicon:
    return replace(
        lex,
        words=tuple(lex.words[i] for i in indices),
        values=lex.values[indices] if indices else np.empty((0, len(lex.variables))),
        splits=tuple(lex.splits[i] for i in indices),
    )


def _keep_for_source(word: str) -> bool:
    return not any(ch.isspace() for ch in word) and not any(ch.isupper() for ch in word)


def filter_source_entries(lex: Lexicon) -> Lexicon:
    """Drop multi-token entries and entries with uppercase characters.

    Restricts a source lexicon to single-token, non-proper-noun entries,
    the material an embedding-based model can use. Idempotent.
    """
    keep = [i for i, w in enumerate(lex.words) if _keep_for_source(w)]
    return _take(lex, keep)


def split_by_reference(lex: Lexicon, test_ref: set[str], dev_ref: set[str]) -> Lexicon:
    """Tag each entry test/dev/train by intersection with reference lists.

    A word goes to test when present in ``test_ref``, otherwise to dev
    when present in ``dev_ref``, otherwise to train; ratings are always
    kept from ``lex``. Empty reference sets are allowed (all-train).
    """
    lex.require_unique("split_by_reference")
    tags = tuple(
        "test" if w in test_ref else "dev" if w in dev_ref else "train" for w in lex.words
    )
    return replace(lex, splits=tags)


def collapse_duplicates(lex: Lexicon, tol: float = DEFAULT_DUPLICATE_TOL) -> Lexicon:
    """Merge partial duplicates into one entry per word type.

    Keeps the first occurrence of each word. Any duplicate whose values
    differ from the first occurrence by more than ``tol`` raises
    IntegrityError: predictions for identical word types come from
    identical vectors and must agree to float round-off.
    """
    first: dict[str, int] = {}
    keep: list[int] = []
    for i, w in enumerate(lex.words):
        j = first.get(w)
        if j is None:
            first[w] = i
            keep.append(i)
        else:
            spread = float(np.max(np.abs(lex.values[i] - lex.values[j]))) if len(lex.variables) else 0.0
            if spread > tol:
                raise IntegrityError(
                    f"duplicate entries for {w!r} differ by {spread:.3g} (tol {tol:g})"
                )
    if len(keep) == len(lex.words):
        return lex
    return _take(lex, keep)


def restrict_to_words(lex: Lexicon, words: set[str] | frozenset[str]) -> Lexicon:
    """Keep only entries whose word type is in ``words``."""
    keep = [i for i, w in enumerate(lex.words) if w in words]
    return _take(lex, keep)


def restrict_to_split(lex: Lexicon, tag: str) -> Lexicon:
    """Keep only entries carrying the given split tag."""
    if tag not in SPLIT_TAGS:
        raise ValueError(f"invalid split tag {tag!r}")
    keep = [i for i, s in enumerate(lex.splits) if s == tag]
    return _take(lex, keep)
