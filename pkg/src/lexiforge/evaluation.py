"""Correlation engine and the lexicon evaluation protocols.

All protocols reduce to per-variable Pearson correlation over aligned
word intersections. Silver evaluation compares the translated and
predicted lexicons on their test splits (no human data needed); gold
evaluation compares predictions against a human-annotated lexicon;
inter-study reliability pits two human lexicons against each other and
the predictions; translation-vs-prediction quantifies what the model
adds over label copying; meta agreement correlates gold and silver
results across languages.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .errors import (
    DegenerateVarianceError,
    InsufficientOverlapError,
    SchemaError,
)
from .lexicon import Lexicon, SplitSets, canonical_variable_order, restrict_to_words

PROTOCOLS = ("pairwise", "silver", "gold", "isr", "mt_vs_pred", "meta")


def restrict_to_test_predictions(pred: Lexicon, splits: SplitSets) -> Lexicon:
    """Predicted entries in the prediction test split, the slice every
    gold-data protocol evaluates on."""
    return restrict_to_words(pred, splits.pred_test)


@dataclass(frozen=True)
class EvalReport:
    """Per-variable Pearson r for one lexicon comparison.

    ``n_shared`` is the number of shared word types (languages, for the
    meta protocol). Variables whose correlation is undefined are absent
    from ``r`` and explained in ``notes``.
    """

    protocol: str
    lexicons: tuple[str, ...]
    language: str
    n_shared: int
    r: dict[str, float]
    coverage: float | None = None
    per_variable_n: dict[str, int] | None = None
    notes: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "lexicons", tuple(self.lexicons))
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"unknown protocol {self.protocol!r}")
        for name, value in self.r.items():
            if not (-1.0 <= value <= 1.0):
                raise ValueError(f"r for {name} outside [-1, 1]: {value}")
        if self.r and self.n_shared < 2:
            raise ValueError("reported correlations require n_shared >= 2")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "EvalReport":
        data = dict(data)
        data["lexicons"] = tuple(data["lexicons"])
        return cls(**data)


def save_reports(reports: Sequence[EvalReport], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump([r.to_dict() for r in reports], fh, indent=2, ensure_ascii=False)
        fh.write("\n")


def load_reports(path) -> list[EvalReport]:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if isinstance(data, dict):
        data = [data]
    return [EvalReport.from_dict(item) for item in data]


def pearson(x, y) -> float:
    """Sample Pearson correlation coefficient of two equal-length series.

    Raises DegenerateVarianceError when either series has zero variance
    (the coefficient is undefined there, never silently zero).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or y.ndim != 1 or x.shape != y.shape:
        raise ValueError(f"series must be 1-d and equal length, got {x.shape} and {y.shape}")
    if len(x) < 2:
        raise ValueError("need at least 2 observations")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("series must be finite")
    xc = x - x.mean()
    yc = y - y.mean()
    sxx = float(xc @ xc)
    syy = float(yc @ yc)
    if sxx == 0.0 or syy == 0.0:
        raise DegenerateVarianceError(
            "zero variance in " + ("first" if sxx == 0.0 else "second") + " series"
        )
    r = float(xc @ yc) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


def _correlate_columns(
    a_values: np.ndarray,
    b_values: np.ndarray,
    variables: Sequence[str],
    a_index: Mapping[str, int],
    b_index: Mapping[str, int],
) -> tuple[dict[str, float], dict[str, str]]:
    r: dict[str, float] = {}
    notes: dict[str, str] = {}
    for name in variables:
        try:
            r[name] = pearson(a_values[:, a_index[name]], b_values[:, b_index[name]])
        except DegenerateVarianceError as exc:
            notes[name] = f"undefined: {exc}"
    return r, notes


def _column_index(lex: Lexicon) -> dict[str, int]:
    return {name: i for i, name in enumerate(lex.variables.names)}


def correlate_lexicons(
    a: Lexicon,
    b: Lexicon,
    variables: Sequence[str] | None = None,
    *,
    protocol: str = "pairwise",
    ids: tuple[str, str] | None = None,
    language: str | None = None,
    coverage: float | None = None,
) -> EvalReport:
    """Correlate two word-unique lexicons on their word intersection.

    The intersection is aligned in ``a``'s entry order; each variable is
    correlated independently. Fewer than two shared words raises
    InsufficientOverlapError; per-variable degenerate variance is
    annotated in the report notes rather than failing the whole report.
    """
    a.require_unique("correlate_lexicons")
    b.require_unique("correlate_lexicons")
    if variables is None:
        names: Sequence[str] = [n for n in a.variables.names if n in b.variables]
    else:
        names = list(variables)
        missing = [n for n in names if n not in a.variables or n not in b.variables]
        if missing:
            raise SchemaError(f"variables absent from one lexicon: {missing}")
    if not names:
        raise SchemaError("the lexicons share no variables")

    b_rows = b.row_index
    shared = [(a.row_index[w], b_rows[w]) for w in a.words if w in b_rows]
    if len(shared) < 2:
        raise InsufficientOverlapError(
            f"only {len(shared)} shared word(s); need at least 2"
        )
    a_idx = [i for i, _ in shared]
    b_idx = [j for _, j in shared]
    r, notes = _correlate_columns(
        a.values[a_idx], b.values[b_idx], names, _column_index(a), _column_index(b)
    )
    return EvalReport(
        protocol=protocol,
        lexicons=ids if ids is not None else (_lexicon_id(a), _lexicon_id(b)),
        language=language if language is not None else b.language,
        n_shared=len(shared),
        r=r,
        coverage=coverage,
        notes=notes,
    )


def _lexicon_id(lex: Lexicon) -> str:
    return f"{lex.language}-{lex.provenance}"


def silver_eval(
    mt: Lexicon, pred: Lexicon, splits: SplitSets, *, ids: tuple[str, str] | None = None
) -> EvalReport:
    """Correlate the MT and predicted lexicons on their shared test words.

    Restricts MT to its test word types and the predictions to the
    prediction test split, then intersects. MT words with partial
    duplicates contribute one aligned pair per duplicate, all against
    the single predicted value. By construction, no word available at
    training time can enter this comparison.
    """
    pred.require_unique("silver_eval")
    common = splits.mt_test & splits.pred_test
    pred_rows = pred.row_index
    mt_idx: list[int] = []
    pred_idx: list[int] = []
    for i, w in enumerate(mt.words):
        if w in common and w in pred_rows:
            mt_idx.append(i)
            pred_idx.append(pred_rows[w])
    n = len({mt.words[i] for i in mt_idx})
    if n < 2:
        raise InsufficientOverlapError(f"only {n} shared test word(s); need at least 2")
    names = [v for v in mt.variables.names if v in pred.variables]
    if not names:
        raise SchemaError("the lexicons share no variables")
    r, notes = _correlate_columns(
        mt.values[mt_idx], pred.values[pred_idx], names,
        _column_index(mt), _column_index(pred),
    )
    return EvalReport(
        protocol="silver",
        lexicons=ids if ids is not None else (_lexicon_id(mt), _lexicon_id(pred)),
        language=pred.language,
        n_shared=n,
        r=r,
        notes=notes,
    )


def gold_eval(
    gold: Lexicon,
    pred: Lexicon,
    splits: SplitSets,
    *,
    gold_id: str | None = None,
) -> EvalReport:
    """Correlate a human-annotated lexicon against the prediction test split.

    Only predicted entries in the prediction test split participate, so
    the model is never evaluated on translational equivalents it saw
    during training. Variables absent from the gold lexicon are
    skipped. ``coverage`` reports shared words relative to gold size.
    """
    gold.require_unique("gold_eval")
    pred.require_unique("gold_eval")
    names = [v for v in gold.variables.names if v in pred.variables]
    if not names:
        raise SchemaError("gold lexicon shares no variables with the predictions")
    pred_rows = pred.row_index
    test_words = splits.pred_test
    gold_idx: list[int] = []
    pred_idx: list[int] = []
    for i, w in enumerate(gold.words):
        if w in test_words and w in pred_rows:
            gold_idx.append(i)
            pred_idx.append(pred_rows[w])
    n = len(gold_idx)
    if n < 2:
        raise InsufficientOverlapError(
            f"only {n} gold word(s) inside the prediction test split; need at least 2"
        )
    r, notes = _correlate_columns(
        gold.values[gold_idx], pred.values[pred_idx], names,
        _column_index(gold), _column_index(pred),
    )
    return EvalReport(
        protocol="gold",
        lexicons=(gold_id if gold_id is not None else _lexicon_id(gold), _lexicon_id(pred)),
        language=gold.language,
        n_shared=n,
        r=r,
        coverage=n / len(gold),
        notes=notes,
    )


class IsrResult(NamedTuple):
    """The three pairwise reports of an inter-study reliability check."""

    gold1_vs_gold2: EvalReport
    gold1_vs_pred: EvalReport
    gold2_vs_pred: EvalReport

    @property
    def reports(self) -> tuple[EvalReport, EvalReport, EvalReport]:
        return tuple(self)


def isr_compare(
    gold1: Lexicon,
    gold2: Lexicon,
    pred: Lexicon,
    *,
    ids: tuple[str, str, str] | None = None,
) -> IsrResult:
    """Compare two human studies and the predictions on common support.

    ``pred`` should already be restricted to the prediction test split.
    All three pairwise correlations are computed on the three-way word
    intersection, per variable shared by all three lexicons.
    """
    for lex in (gold1, gold2, pred):
        lex.require_unique("isr_compare")
    id1, id2, idp = ids if ids is not None else (
        _lexicon_id(gold1), _lexicon_id(gold2), _lexicon_id(pred)
    )
    rows2, rowsp = gold2.row_index, pred.row_index
    triples = [
        (gold1.row_index[w], rows2[w], rowsp[w])
        for w in gold1.words
        if w in rows2 and w in rowsp
    ]
    if len(triples) < 2:
        raise InsufficientOverlapError(
            f"only {len(triples)} words shared by all three lexicons; need at least 2"
        )
    names = [
        v for v in gold1.variables.names if v in gold2.variables and v in pred.variables
    ]
    if not names:
        raise SchemaError("no variable is shared by all three lexicons")
    i1 = [t[0] for t in triples]
    i2 = [t[1] for t in triples]
    ip = [t[2] for t in triples]
    n = len(triples)

    def pair(av, ai, bv, bi, pair_ids) -> EvalReport:
        r, notes = _correlate_columns(av, bv, names, ai, bi)
        return EvalReport(
            protocol="isr", lexicons=pair_ids, language=pred.language,
            n_shared=n, r=r, notes=notes,
        )

    c1, c2, cp = _column_index(gold1), _column_index(gold2), _column_index(pred)
    return IsrResult(
        gold1_vs_gold2=pair(gold1.values[i1], c1, gold2.values[i2], c2, (id1, id2)),
        gold1_vs_pred=pair(gold1.values[i1], c1, pred.values[ip], cp, (id1, idp)),
        gold2_vs_pred=pair(gold2.values[i2], c2, pred.values[ip], cp, (id2, idp)),
    )


@dataclass(frozen=True)
class MtVsPredResult:
    """Gold correlation of predictions vs. plain label copying."""

    pred_report: EvalReport
    mt_report: EvalReport
    diff: dict[str, float]


def mt_vs_pred(
    gold: Lexicon,
    mt: Lexicon,
    pred: Lexicon,
    splits: SplitSets,
    *,
    gold_id: str | None = None,
) -> MtVsPredResult:
    """Correlate both MT and predicted values with gold on the train words.

    Using MT values instead of predictions is only an option for words
    known at training time, so the comparison is restricted to the
    train split. MT partial duplicates each contribute one pair against
    the gold value. ``diff`` is r(pred) - r(mt) per variable.
    """
    gold.require_unique("mt_vs_pred")
    pred.require_unique("mt_vs_pred")
    names = [
        v for v in gold.variables.names if v in mt.variables and v in pred.variables
    ]
    if not names:
        raise SchemaError("no variable is shared by gold, MT, and predictions")
    gold_rows = gold.row_index
    pred_rows = pred.row_index
    common = {
        w for w in gold.words
        if w in splits.pred_train and w in pred_rows and w in mt.word_types
    }
    if len(common) < 2:
        raise InsufficientOverlapError(
            f"only {len(common)} gold words inside the train split; need at least 2"
        )
    gid = gold_id if gold_id is not None else _lexicon_id(gold)

    # predictions: one pair per shared word type
    g_idx = [gold_rows[w] for w in gold.words if w in common]
    p_idx = [pred_rows[w] for w in gold.words if w in common]
    r_pred, notes_pred = _correlate_columns(
        gold.values[g_idx], pred.values[p_idx], names,
        _column_index(gold), _column_index(pred),
    )
    pred_report = EvalReport(
        protocol="mt_vs_pred", lexicons=(gid, "pred-train"), language=pred.language,
        n_shared=len(common), r=r_pred, notes=notes_pred,
    )

    # MT: one pair per train-tagged entry of a shared word
    mt_idx = [
        i for i, (w, s) in enumerate(zip(mt.words, mt.splits))
        if s == "train" and w in common
    ]
    g_for_mt = [gold_rows[mt.words[i]] for i in mt_idx]
    r_mt, notes_mt = _correlate_columns(
        gold.values[g_for_mt], mt.values[mt_idx], names,
        _column_index(gold), _column_index(mt),
    )
    mt_report = EvalReport(
        protocol="mt_vs_pred", lexicons=(gid, "mt-train"), language=mt.language,
        n_shared=len(common), r=r_mt, notes=notes_mt,
    )
    diff = {v: r_pred[v] - r_mt[v] for v in names if v in r_pred and v in r_mt}
    return MtVsPredResult(pred_report=pred_report, mt_report=mt_report, diff=diff)


def meta_agreement(
    gold_results: Mapping[str, Sequence[Mapping[str, float]]],
    silver_results: Mapping[str, Mapping[str, float]],
) -> EvalReport:
    """Correlate gold and silver evaluation results across languages.

    ``gold_results`` maps language to the per-variable r of each gold
    dataset evaluated for it; multiple datasets are averaged per
    variable before correlating. ``silver_results`` maps language to
    its silver per-variable r. Variables applicable in fewer than two
    languages are annotated and skipped; if no variable is applicable,
    InsufficientOverlapError is raised.
    """
    all_names: set[str] = set()
    for per_lang in gold_results.values():
        for res in per_lang:
            all_names.update(res)
    names = [
        v for v in canonical_variable_order(all_names)
        if any(v in s for s in silver_results.values())
    ]
    r: dict[str, float] = {}
    notes: dict[str, str] = {}
    per_variable_n: dict[str, int] = {}
    contributing: set[str] = set()
    for name in names:
        langs = sorted(
            lang
            for lang, silver in silver_results.items()
            if name in silver
            and any(name in res for res in gold_results.get(lang, ()))
        )
        per_variable_n[name] = len(langs)
        if len(langs) < 2:
            notes[name] = f"only {len(langs)} language(s) with gold and silver results"
            continue
        gold_series = [
            float(np.mean([res[name] for res in gold_results[lang] if name in res]))
            for lang in langs
        ]
        silver_series = [silver_results[lang][name] for lang in langs]
        try:
            r[name] = pearson(gold_series, silver_series)
            contributing.update(langs)
        except DegenerateVarianceError as exc:
            notes[name] = f"undefined: {exc}"
            contributing.update(langs)
    if not r and not contributing:
        raise InsufficientOverlapError(
            "no variable has gold and silver results for at least 2 languages"
        )
    return EvalReport(
        protocol="meta",
        lexicons=("gold-results", "silver-results"),
        language="multi",
        n_shared=len(contributing),
        r=r,
        per_variable_n=per_variable_n,
        notes=notes,
    )
