"""Shared builders for test lexicons and synthetic data."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from lexiforge import (
    EmbeddingStore,
    Lexicon,
    make_variable_set,
    save_embedding_store,
    save_lexicon,
)


def build_lexicon(
    rows,
    variables=("Val", "Aro"),
    provenance="human",
    language="und",
    scale=None,
):
    """Build a lexicon from (word, values) or (word, values, split) rows."""
    words = []
    values = []
    splits = []
    for row in rows:
        if len(row) == 3:
            word, vals, split = row
        else:
            word, vals = row
            split = "none"
        words.append(word)
        values.append(list(np.atleast_1d(vals)))
        splits.append(split)
    k = len(tuple(variables))
    return Lexicon(
        variables=make_variable_set(tuple(variables)),
        words=tuple(words),
        values=np.asarray(values, dtype=np.float64).reshape(len(words), k),
        splits=tuple(splits),
        provenance=provenance,
        language=language,
        scale=scale,
    )


def lexicon_tsv(rows, variables=("Val", "Aro"), with_split=False) -> str:
    """Render rows as the TSV text format."""
    header = ["word", *variables] + (["split"] if with_split else [])
    lines = ["\t".join(header)]
    for row in rows:
        word, vals = row[0], row[1]
        fields = [word] + [str(v) for v in np.atleast_1d(vals)]
        if with_split:
            fields.append(row[2])
        lines.append("\t".join(fields))
    return "\n".join(lines) + "\n"


def write_pipeline_bundle(
    root: Path,
    *,
    n_source: int = 600,
    n_vocab: int = 2000,
    dim: int = 16,
    k: int = 3,
    noise_scale: float = 0.05,
    quadratic: float = 0.0,
    seed: int = 1234,
    split_sizes: tuple[int, int, int] = (500, 50, 50),
) -> dict:
    """Synthetic pipeline inputs: linear (plus optional quadratic) targets.

    Writes an embedding file of ``n_vocab`` words, a split-tagged source
    lexicon over the first ``n_source`` of them whose ratings are the
    true targets plus Gaussian noise (sigma = ``noise_scale`` times each
    column's sd), an identity translation table, and a gold lexicon
    holding the noiseless targets for every vocabulary word.
    """
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    variables = tuple(f"y{i + 1}" for i in range(k))

    words = [f"w{i:05d}" for i in range(n_vocab)]
    vectors = rng.standard_normal((n_vocab, dim))
    store = EmbeddingStore(words, vectors)
    embeddings_path = root / "embeddings.vec"
    save_embedding_store(store, embeddings_path)

    linear_map = rng.standard_normal((dim, k))
    clean = vectors @ linear_map
    if quadratic:
        quad_map = rng.standard_normal((dim, k))
        clean = clean + quadratic * (vectors @ quad_map) ** 2
    noisy = clean + noise_scale * clean.std(axis=0) * rng.standard_normal((n_vocab, k))

    n_train, n_dev, n_test = split_sizes
    assert n_train + n_dev + n_test == n_source
    tags = ["train"] * n_train + ["dev"] * n_dev + ["test"] * n_test
    source = build_lexicon(
        [(words[i], noisy[i].tolist(), tags[i]) for i in range(n_source)],
        variables=variables,
    )
    source_path = root / "source.tsv"
    save_lexicon(source, source_path)

    table_path = root / "table.tsv"
    with open(table_path, "w", encoding="utf-8", newline="") as fh:
        for w in words[:n_source]:
            fh.write(f"{w}\t{w}\n")

    gold = build_lexicon(
        [(words[i], clean[i].tolist()) for i in range(n_vocab)], variables=variables
    )
    gold_path = root / "gold.tsv"
    save_lexicon(gold, gold_path)

    return {
        "embeddings": embeddings_path,
        "source": source_path,
        "table": table_path,
        "gold": gold_path,
        "variables": variables,
        "clean": clean,
        "noisy": noisy,
        "words": words,
    }
