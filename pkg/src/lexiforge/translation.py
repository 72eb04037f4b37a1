"""Word-to-word translation tables, label-copy projection, and fetching.

Projection builds the translated target-side lexicon: source words are
replaced by their single translation while the emotion values and split
tags are copied unchanged. An abstract client plus an append-only cache
file stand in for an external translation service.
"""

from __future__ import annotations

import json
import logging
import os
import unicodedata
import urllib.request
from dataclasses import dataclass, replace
from pathlib import Path
from types import MappingProxyType
from typing import IO, Iterable, Mapping, Protocol, Sequence

from .errors import FetchError, LexiforgeError, MissingTranslationError, ParseError
from .lexicon import Lexicon, _take

log = logging.getLogger(__name__)

#: Environment variable holding the external service credential.
TRANSLATE_KEY_ENV = "LEXIFORGE_TRANSLATE_KEY"

DEFAULT_BATCH_SIZE = 128


@dataclass(frozen=True, eq=False)
class TranslationTable:
    """One-to-one mapping from source word to a single target string.

    Target strings may contain spaces, hyphens, or apostrophes (the
    embedding lookup handles multi-token terms); they must be non-empty.
    """

    mapping: Mapping[str, str]
    source_lang: str = "und"
    target_lang: str = "und"

    def __post_init__(self):
        mapping = dict(self.mapping)
        for src, tgt in mapping.items():
            if not src or not tgt:
                raise ValueError(f"empty source or target in pair {src!r} -> {tgt!r}")
        object.__setattr__(self, "mapping", MappingProxyType(mapping))

    def __len__(self) -> int:
        return len(self.mapping)

    def __contains__(self, word: str) -> bool:
        return word in self.mapping

    def get(self, word: str) -> str | None:
        return self.mapping.get(word)

    @classmethod
    def identity(cls, words: Iterable[str], language: str = "und") -> "TranslationTable":
        """Table mapping every word to itself (same-language runs)."""
        return cls({w: w for w in words}, source_lang=language, target_lang=language)


def parse_translation_table(
    stream: IO[str], *, source_lang: str = "und", target_lang: str = "und", path=None
) -> TranslationTable:
    """Parse a two-column headerless TSV into a table.

    Later lines overwrite earlier ones for the same source word. A line
    without exactly one tab, or with an empty column, is an error.
    """
    mapping: dict[str, str] = {}
    for line_no, raw in enumerate(stream, start=1):
        line = raw.rstrip("\r\n")
        if line.count("\t") != 1:
            raise ParseError(
                f"expected exactly one tab, found {line.count(chr(9))}",
                line_no=line_no, path=path,
            )
        src, tgt = line.split("\t")
        src = unicodedata.normalize("NFC", src)
        tgt = unicodedata.normalize("NFC", tgt)
        if not src or not tgt:
            raise ParseError("empty source or target word", line_no=line_no, path=path)
        mapping[src] = tgt
    return TranslationTable(mapping, source_lang=source_lang, target_lang=target_lang)


def load_translation_table(path, *, source_lang="und", target_lang="und") -> TranslationTable:
    with open(path, encoding="utf-8") as fh:
        return parse_translation_table(
            fh, source_lang=source_lang, target_lang=target_lang, path=path
        )


def save_translation_table(table: TranslationTable, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for src, tgt in table.mapping.items():
            fh.write(f"{src}\t{tgt}\n")


def project_lexicon(
    source: Lexicon, table: TranslationTable, *, missing: str = "skip"
) -> Lexicon:
    """Build the translated (MT) lexicon by word projection.

    Each translatable source entry yields one output entry with the
    translated word, the unchanged emotion values, and the source
    entry's split tag. Distinct source words may translate to the same
    target word, so the result can contain partial duplicates.

    ``missing`` controls untranslatable words: ``skip`` drops them (the
    count is logged), ``strict`` raises MissingTranslationError.
    """
    if missing not in ("skip", "strict"):
        raise ValueError(f"unknown missing-translation policy {missing!r}")
    keep: list[int] = []
    words: list[str] = []
    for i, w in enumerate(source.words):
        tgt = table.get(w)
        if tgt is None:
            if missing == "strict":
                raise MissingTranslationError(f"no translation for {w!r}")
            continue
        keep.append(i)
        words.append(tgt)
    skipped = len(source.words) - len(keep)
    if skipped:
        log.warning("projection skipped %d source entries without translation", skipped)
    projected = _take(source, keep)
    return replace(
        projected,
        words=tuple(words),
        provenance="translated",
        language=table.target_lang,
    )


class TranslationClient(Protocol):
    """Behavioral contract for an external word translation service.

    Implementations return exactly one non-empty target string per input
    word, in input order, and behave deterministically within a run for
    identical inputs.
    """

    def translate(
        self, words: Sequence[str], source_lang: str, target_lang: str
    ) -> list[str]: ...


class HttpTranslationClient:
    """Minimal JSON-over-HTTP client for a configurable endpoint.

    Credentials are read from the LEXIFORGE_TRANSLATE_KEY environment
    variable unless passed explicitly.
    """

    def __init__(self, endpoint: str, api_key: str | None = None, timeout: float = 30.0):
        self.endpoint = endpoint
        self.timeout = timeout
        key = api_key if api_key is not None else os.environ.get(TRANSLATE_KEY_ENV)
        if not key:
            raise LexiforgeError(
                f"no translation credential; set {TRANSLATE_KEY_ENV} or pass api_key"
            )
        self._key = key

    def translate(self, words, source_lang, target_lang):
        payload = json.dumps(
            {"words": list(words), "source": source_lang, "target": target_lang}
        ).encode("utf-8")
        request = urllib.request.Request(
            self.endpoint,
            data=payload,
            headers={
                "Content-Type": "application/json",
                "Authorization": f"Bearer {self._key}",
            },
        )
        with urllib.request.urlopen(request, timeout=self.timeout) as response:
            data = json.load(response)
        return [str(t) for t in data["translations"]]


def fetch_missing(
    words: Iterable[str],
    client: TranslationClient,
    cache_path,
    *,
    source_lang: str = "und",
    target_lang: str = "und",
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> TranslationTable:
    """Ensure every word has a cached translation, fetching the rest.

    Already-cached words are never re-fetched. New pairs are appended to
    the cache file batch by batch, so a failure persists all progress
    made so far; the raised FetchError carries the unfetched remainder.
    Returns the union of the cache and the newly fetched entries.
    """
    cache_path = Path(cache_path)
    if cache_path.exists():
        table = load_translation_table(
            cache_path, source_lang=source_lang, target_lang=target_lang
        )
    else:
        table = TranslationTable({}, source_lang=source_lang, target_lang=target_lang)
    normalized = {unicodedata.normalize("NFC", w) for w in words if w}
    missing = sorted(w for w in normalized if w not in table)
    if not missing:
        return table

    mapping = dict(table.mapping)
    with open(cache_path, "a", encoding="utf-8", newline="") as fh:
        for start in range(0, len(missing), batch_size):
            batch = missing[start : start + batch_size]
            try:
                targets = client.translate(batch, source_lang, target_lang)
            except Exception as exc:
                raise FetchError(
                    f"translation fetch failed: {exc}", tuple(missing[start:])
                ) from exc
            if len(targets) != len(batch) or any(not t for t in targets):
                raise FetchError(
                    "client returned a malformed batch", tuple(missing[start:])
                )
            for src, tgt in zip(batch, targets):
                tgt = unicodedata.normalize("NFC", tgt)
                fh.write(f"{src}\t{tgt}\n")
                mapping[src] = tgt
            fh.flush()
    log.info("fetched %d new translations into %s", len(missing), cache_path)
    return TranslationTable(mapping, source_lang=source_lang, target_lang=target_lang)
