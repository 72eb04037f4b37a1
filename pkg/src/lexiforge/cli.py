"""Command-line interface: one subcommand per pipeline stage.

prepare-source    filter a raw source lexicon and tag its splits
fetch-translations  fill a translation-table cache from a remote service
run               full generation-and-evaluation pipeline
evaluate          re-run the evaluation protocols on existing lexicons
report            render stored evaluation reports as tables
gradcheck         verify the network gradients against finite differences

Options may also come from a flat ``key = value`` config file
(``--config``); command-line flags take precedence over the file, the
file over built-in defaults.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import LexiforgeError, SchemaError
from .evaluation import (
    gold_eval,
    isr_compare,
    load_reports,
    meta_agreement,
    mt_vs_pred,
    restrict_to_test_predictions,
    save_reports,
    silver_eval,
)
from .lexicon import SplitSets, load_lexicon
from .models import TrainConfig, grad_check
from .pipeline import RunSettings, prepare_source, run_pipeline
from .reporting import (
    render_isr_table,
    render_meta_table,
    render_mt_vs_pred_table,
    render_pair_table,
    write_reports_tsv,
)
from .translation import HttpTranslationClient, fetch_missing

log = logging.getLogger(__name__)

_CONFIG_KEYS = {
    "seed": int,
    "epochs": int,
    "batch_size": int,
    "learning_rate": float,
    "input_dropout": float,
    "hidden_dropout": float,
    "leaky_slope": float,
    "hidden": str,
    "model": str,
    "alpha": float,
    "max_vocab": int,
    "duplicate_tol": float,
    "source_lang": str,
    "target_lang": str,
    "endpoint": str,
}


def parse_config_file(path) -> dict:
    """Parse the flat ``key = value`` config format ('#' starts a comment)."""
    values: dict = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise LexiforgeError(f"{path}:{line_no}: expected 'key = value'")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in _CONFIG_KEYS:
                raise LexiforgeError(f"{path}:{line_no}: unknown config key {key!r}")
            try:
                values[key] = _CONFIG_KEYS[key](value)
            except ValueError:
                raise LexiforgeError(
                    f"{path}:{line_no}: bad value {value!r} for {key}"
                ) from None
    return values


def _setting(args, config: dict, key: str, default):
    cli_value = getattr(args, key, None)
    if cli_value is not None:
        return cli_value
    if key in config:
        return config[key]
    return default


def _parse_gold_args(pairs: list[str]) -> dict[str, Path]:
    gold: dict[str, Path] = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise LexiforgeError(f"--gold expects <id>=<path>, got {pair!r}")
        gold_id, _, path = pair.partition("=")
        if not gold_id or not path:
            raise LexiforgeError(f"--gold expects <id>=<path>, got {pair!r}")
        gold[gold_id] = Path(path)
    return gold


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lexiforge",
        description="Generate and evaluate emotion lexicons across languages.",
    )
    parser.add_argument("--version", action="version", version=f"lexiforge {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare-source", help="filter the source lexicon and tag splits")
    p.add_argument("--source", required=True, help="raw source lexicon TSV")
    p.add_argument("--test-ref", help="word list defining the test split")
    p.add_argument("--dev-ref", help="word list defining the dev split")
    p.add_argument("--out", required=True, help="output TSV path")
    p.add_argument("--source-lang", default="und")

    p = sub.add_parser("fetch-translations", help="fill the translation cache")
    p.add_argument("--source", help="lexicon TSV whose words need translations")
    p.add_argument("--words", help="plain word list needing translations")
    p.add_argument("--cache", required=True, help="translation-table cache TSV")
    p.add_argument("--endpoint", help="translation service URL")
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--source-lang")
    p.add_argument("--target-lang")
    p.add_argument("--batch-size", type=int)

    p = sub.add_parser("run", help="run the full pipeline")
    p.add_argument("--source", required=True, help="prepared source lexicon TSV (with splits)")
    p.add_argument("--table", help="translation table TSV")
    p.add_argument("--skip-translation", action="store_true", default=None,
                   help="source and target language coincide; copy words verbatim")
    p.add_argument("--embeddings", required=True, help="target-language word vectors")
    p.add_argument("--gold", action="append", metavar="ID=PATH",
                   help="gold lexicon TSV (repeatable)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--model", choices=("mtlffn", "ridge"))
    p.add_argument("--alpha", type=float, help="ridge regularization strength")
    p.add_argument("--max-vocab", type=int, help="cap on embedding vocabulary size")
    p.add_argument("--joint-mtl", action="store_true", default=None,
                   help="train one model across all variables instead of one per family")
    p.add_argument("--duplicate-tol", type=float)
    p.add_argument("--strict-missing", action="store_true", default=None,
                   help="abort on source words without translation instead of skipping")
    p.add_argument("--source-lang")
    p.add_argument("--target-lang")

    p = sub.add_parser("evaluate", help="evaluate existing lexicon files")
    p.add_argument("--mt", required=True, help="translated lexicon TSV (with splits)")
    p.add_argument("--pred", required=True, help="predicted lexicon TSV (with splits)")
    p.add_argument("--gold", action="append", metavar="ID=PATH")
    p.add_argument("--out", help="directory for report JSON files")
    p.add_argument("--target-lang", default="und")

    p = sub.add_parser("report", help="render stored reports as tables")
    p.add_argument("paths", nargs="+", help="report JSON files or directories")
    p.add_argument("--tsv", help="also write a machine-readable TSV table")

    p = sub.add_parser("gradcheck", help="finite-difference check of the network gradients")
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--samples", type=int, default=8)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--outputs", type=int, default=3)
    p.add_argument("--hidden", default="16,8", help="hidden layer sizes, e.g. 16,8")
    p.add_argument("--threshold", type=float, default=1e-4)
    return parser


def _cmd_prepare_source(args) -> int:
    tagged = prepare_source(
        args.source, args.test_ref, args.dev_ref, args.out, language=args.source_lang
    )
    sizes = tagged.split_sizes()
    print(
        f"retained {len(tagged)} entries "
        f"(train: {sizes['train']}, dev: {sizes['dev']}, test: {sizes['test']})"
    )
    print(f"wrote {args.out}")
    return 0


def _cmd_fetch_translations(args) -> int:
    config = parse_config_file(args.config) if args.config else {}
    endpoint = _setting(args, config, "endpoint", None)
    if not endpoint:
        raise LexiforgeError("an --endpoint (or config endpoint) is required")
    source_lang = _setting(args, config, "source_lang", "und")
    target_lang = _setting(args, config, "target_lang", "und")
    batch_size = _setting(args, config, "batch_size", 128)
    if args.words:
        from .lexicon import load_word_list

        words = load_word_list(args.words)
    elif args.source:
        words = set(load_lexicon(args.source).words)
    else:
        raise LexiforgeError("either --words or --source is required")
    client = HttpTranslationClient(endpoint)
    before = len(words)
    table = fetch_missing(
        words, client, args.cache,
        source_lang=source_lang, target_lang=target_lang, batch_size=batch_size,
    )
    print(f"cache {args.cache} now covers {len(table)} words ({before} requested)")
    return 0


def _cmd_run(args) -> int:
    config = parse_config_file(args.config) if args.config else {}
    train = TrainConfig(
        hidden=tuple(
            int(h) for h in str(_setting(args, config, "hidden", "256,128")).split(",")
        ),
        input_dropout=_setting(args, config, "input_dropout", 0.2),
        hidden_dropout=_setting(args, config, "hidden_dropout", 0.5),
        leaky_slope=_setting(args, config, "leaky_slope", 0.01),
        learning_rate=_setting(args, config, "learning_rate", 1e-3),
        batch_size=_setting(args, config, "batch_size", 128),
        epochs=_setting(args, config, "epochs", 168),
        seed=_setting(args, config, "seed", 0),
    )
    settings = RunSettings(
        source=Path(args.source),
        embeddings=Path(args.embeddings),
        out=Path(args.out),
        table=Path(args.table) if args.table else None,
        skip_translation=bool(args.skip_translation),
        gold=_parse_gold_args(args.gold),
        source_lang=_setting(args, config, "source_lang", "und"),
        target_lang=_setting(args, config, "target_lang", "und"),
        model=_setting(args, config, "model", "mtlffn"),
        alpha=_setting(args, config, "alpha", 1.0),
        train=train,
        max_vocab=_setting(args, config, "max_vocab", None),
        joint_mtl=bool(args.joint_mtl),
        duplicate_tol=_setting(args, config, "duplicate_tol", 1e-6),
        missing_policy="strict" if args.strict_missing else "skip",
    )
    result = run_pipeline(settings)
    print(f"run complete: {result.out}")
    print(render_pair_table([result.silver], title="silver evaluation"))
    if result.gold:
        print(render_pair_table(list(result.gold.values()), title="gold evaluation"))
    if result.isr:
        print(render_isr_table(result.isr))
    if result.mt_vs_pred:
        print(render_mt_vs_pred_table(result.mt_vs_pred.values()))
    return 0


def _cmd_evaluate(args) -> int:
    mt = load_lexicon(args.mt, provenance="translated", language=args.target_lang)
    pred = load_lexicon(args.pred, provenance="predicted", language=args.target_lang)
    splits = SplitSets.from_lexicons(mt, pred)
    out_dir = Path(args.out) if args.out else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)

    silver = silver_eval(mt, pred, splits)
    print(render_pair_table([silver], title="silver evaluation"))
    if out_dir:
        save_reports([silver], out_dir / "silver.json")

    golds = {gid: load_lexicon(path, language=args.target_lang)
             for gid, path in _parse_gold_args(args.gold).items()}
    gold_reports = []
    for gid, gold in golds.items():
        report = gold_eval(gold, pred, splits, gold_id=gid)
        gold_reports.append(report)
        if out_dir:
            save_reports([report], out_dir / f"gold_{gid}.json")
    if gold_reports:
        print(render_pair_table(gold_reports, title="gold evaluation"))

    gold_ids = list(golds)
    isr_results = []
    for i in range(len(gold_ids)):
        for j in range(i + 1, len(gold_ids)):
            id_a, id_b = gold_ids[i], gold_ids[j]
            if not any(n in golds[id_b].variables for n in golds[id_a].variables.names):
                continue
            result = isr_compare(
                golds[id_a], golds[id_b], restrict_to_test_predictions(pred, splits),
                ids=(id_a, id_b, f"{pred.language}-pred"),
            )
            isr_results.append(result)
            if out_dir:
                save_reports(list(result.reports), out_dir / f"isr_{id_a}_{id_b}.json")
    if isr_results:
        print(render_isr_table(isr_results))

    comparisons = []
    for gid, gold in golds.items():
        result = mt_vs_pred(gold, mt, pred, splits, gold_id=gid)
        comparisons.append(result)
        if out_dir:
            save_reports(
                [result.pred_report, result.mt_report], out_dir / f"mt_vs_pred_{gid}.json"
            )
    if comparisons:
        print(render_mt_vs_pred_table(comparisons))
    return 0


def _collect_report_paths(paths: list[str]) -> list[Path]:
    collected: list[Path] = []
    for raw in paths:
        path = Path(raw)
        if path.is_dir():
            collected.extend(sorted(path.glob("*.json")))
        else:
            collected.append(path)
    return collected


def _cmd_report(args) -> int:
    from lexiforge.evaluation import IsrResult, MtVsPredResult

    silver_by_lang: dict[str, dict[str, float]] = {}
    gold_by_lang: dict[str, list[dict[str, float]]] = {}
    silver_reports = []
    gold_reports = []
    isr_results = []
    comparisons = []
    other_reports = []
    for path in _collect_report_paths(args.paths):
        file_reports = load_reports(path)
        isr_group = [r for r in file_reports if r.protocol == "isr"]
        if len(isr_group) == 3:
            isr_results.append(IsrResult(*isr_group))
            file_reports = [r for r in file_reports if r.protocol != "isr"]
        duo = [r for r in file_reports if r.protocol == "mt_vs_pred"]
        if len(duo) == 2:
            pred_report, mt_report = duo
            diff = {
                v: pred_report.r[v] - mt_report.r[v]
                for v in pred_report.r
                if v in mt_report.r
            }
            comparisons.append(MtVsPredResult(pred_report, mt_report, diff))
            file_reports = [r for r in file_reports if r.protocol != "mt_vs_pred"]
        for report in file_reports:
            if report.protocol == "silver":
                if report.language in silver_by_lang and silver_by_lang[report.language] != report.r:
                    raise SchemaError(
                        f"conflicting silver reports for language {report.language!r}"
                    )
                silver_by_lang[report.language] = report.r
                silver_reports.append(report)
            elif report.protocol == "gold":
                gold_by_lang.setdefault(report.language, []).append(report.r)
                gold_reports.append(report)
            else:
                other_reports.append(report)

    if silver_reports:
        print(render_pair_table(silver_reports, title="silver evaluation"))
    if gold_reports:
        print(render_pair_table(gold_reports, title="gold evaluation"))
    if isr_results:
        print(render_isr_table(isr_results))
    if comparisons:
        print(render_mt_vs_pred_table(comparisons))
    if other_reports:
        print(render_pair_table(other_reports, title="other reports"))

    langs_with_both = [
        lang for lang in silver_by_lang if gold_by_lang.get(lang)
    ]
    if len(langs_with_both) >= 2:
        meta = meta_agreement(gold_by_lang, silver_by_lang)
        print(render_meta_table(meta))

    if args.tsv:
        everything = silver_reports + gold_reports + other_reports
        for result in isr_results:
            everything.extend(result.reports)
        for result in comparisons:
            everything.extend([result.pred_report, result.mt_report])
        with open(args.tsv, "w", encoding="utf-8", newline="") as fh:
            write_reports_tsv(everything, fh)
        print(f"wrote {args.tsv}")
    return 0


def _cmd_gradcheck(args) -> int:
    hidden = tuple(int(h) for h in args.hidden.split(","))
    worst = 0.0
    rng = np.random.default_rng(12345)
    for seed in range(args.seeds):
        cfg = TrainConfig(
            hidden=hidden, input_dropout=0.0, hidden_dropout=0.0, seed=seed
        )
        X = rng.standard_normal((args.samples, args.dim))
        Y = rng.standard_normal((args.samples, args.outputs))
        err = grad_check(cfg, X, Y)
        worst = max(worst, err)
        print(f"seed {seed}: max relative error {err:.3e}")
    print(f"worst over {args.seeds} seeds: {worst:.3e} (threshold {args.threshold:g})")
    return 0 if worst < args.threshold else 1


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = _build_parser().parse_args(argv)
    handlers = {
        "prepare-source": _cmd_prepare_source,
        "fetch-translations": _cmd_fetch_translations,
        "run": _cmd_run,
        "evaluate": _cmd_evaluate,
        "report": _cmd_report,
        "gradcheck": _cmd_gradcheck,
    }
    try:
        return handlers[args.command](args)
    except LexiforgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
