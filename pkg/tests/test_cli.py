import json

import pytest

from lexiforge import EvalReport, save_reports
from lexiforge.cli import main, parse_config_file
from helpers import write_pipeline_bundle


RAW_SOURCE = (
    "word\ty1\ty2\n"
    "sunshine\t0.5\t0.1\n"
    "boa constrictor\t0.2\t0.3\n"
    "Budweiser\t0.1\t0.9\n"
    "anchor\t0.4\t0.2\n"
    "tree\t0.3\t0.7\n"
)


@pytest.fixture()
def small_bundle(tmp_path):
    return write_pipeline_bundle(
        tmp_path / "data", n_source=60, n_vocab=200, dim=8, k=2,
        split_sizes=(40, 10, 10), seed=7,
    )


def _write_fast_config(tmp_path):
    config = tmp_path / "fast.cfg"
    config.write_text(
        "# small network for quick test runs\n"
        "hidden = 16,8\n"
        "epochs = 40\n"
        "batch_size = 16\n",
        encoding="utf-8",
    )
    return config


def _run_args(bundle, out, config, extra=()):
    return [
        "run",
        "--source", str(bundle["source"]),
        "--table", str(bundle["table"]),
        "--embeddings", str(bundle["embeddings"]),
        "--out", str(out),
        "--config", str(config),
        "--seed", "11",
        *extra,
    ]


# ---------------------------------------------------------------------------
# prepare-source
# ---------------------------------------------------------------------------


def test_prepare_source(tmp_path, capsys):
    source = tmp_path / "raw.tsv"
    source.write_text(RAW_SOURCE, encoding="utf-8")
    (tmp_path / "test_ref.txt").write_text("anchor\n", encoding="utf-8")
    (tmp_path / "dev_ref.txt").write_text("anchor\ntree\n", encoding="utf-8")
    out = tmp_path / "prepared.tsv"
    code = main([
        "prepare-source", "--source", str(source),
        "--test-ref", str(tmp_path / "test_ref.txt"),
        "--dev-ref", str(tmp_path / "dev_ref.txt"),
        "--out", str(out),
    ])
    assert code == 0
    printed = capsys.readouterr().out
    assert "retained 3 entries" in printed
    assert "train: 1, dev: 1, test: 1" in printed
    text = out.read_text(encoding="utf-8")
    assert "boa constrictor" not in text
    assert "Budweiser" not in text
    assert "anchor\t0.4\t0.2\ttest" in text

    # rerun on unchanged inputs is byte-identical
    first = out.read_bytes()
    main([
        "prepare-source", "--source", str(source),
        "--test-ref", str(tmp_path / "test_ref.txt"),
        "--dev-ref", str(tmp_path / "dev_ref.txt"),
        "--out", str(out),
    ])
    assert out.read_bytes() == first


def test_prepare_source_empty_refs_all_train(tmp_path, capsys):
    source = tmp_path / "raw.tsv"
    source.write_text(RAW_SOURCE, encoding="utf-8")
    out = tmp_path / "prepared.tsv"
    assert main(["prepare-source", "--source", str(source), "--out", str(out)]) == 0
    assert "train: 3, dev: 0, test: 0" in capsys.readouterr().out


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------


def test_run_produces_artifacts_and_reports(tmp_path, small_bundle, capsys):
    out = tmp_path / "run_out"
    config = _write_fast_config(tmp_path)
    code = main(_run_args(small_bundle, out, config,
                          extra=["--gold", f"g1={small_bundle['gold']}"]))
    assert code == 0
    assert (out / "target_mt.tsv").exists()
    assert (out / "target_pred.tsv").exists()
    assert (out / "reports" / "silver.json").exists()
    assert (out / "reports" / "gold_g1.json").exists()
    assert (out / "reports" / "mt_vs_pred_g1.json").exists()
    assert (out / "checkpoints" / "mtlffn_y1_y2.ckpt").exists()
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["status"] == "complete"
    assert manifest["train_config"]["epochs"] == 40  # from the config file
    assert manifest["train_config"]["seed"] == 11  # from the CLI flag
    assert all(s["status"] == "ok" for s in manifest["stages"])
    assert "silver evaluation" in capsys.readouterr().out
    assert not (out / ".lexiforge.lock").exists()


def test_manifest_attributes_outputs_by_hash(tmp_path, small_bundle):
    from lexiforge.pipeline import file_sha256

    config = _write_fast_config(tmp_path)
    out = tmp_path / "out"
    assert main(_run_args(small_bundle, out, config)) == 0
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    for name, entry in {**manifest["inputs"], **manifest["outputs"]}.items():
        assert file_sha256(entry["path"]) == entry["sha256"], name


def test_run_is_deterministic_across_directories(tmp_path, small_bundle):
    config = _write_fast_config(tmp_path)
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    assert main(_run_args(small_bundle, out1, config)) == 0
    assert main(_run_args(small_bundle, out2, config)) == 0
    assert (out1 / "target_pred.tsv").read_bytes() == (out2 / "target_pred.tsv").read_bytes()
    assert (out1 / "reports" / "silver.json").read_bytes() == \
        (out2 / "reports" / "silver.json").read_bytes()
    assert (out1 / "checkpoints" / "mtlffn_y1_y2.ckpt").read_bytes() == \
        (out2 / "checkpoints" / "mtlffn_y1_y2.ckpt").read_bytes()


def test_run_skip_translation_copies_source(tmp_path, small_bundle):
    config = _write_fast_config(tmp_path)
    out = tmp_path / "out"
    args = [
        "run", "--source", str(small_bundle["source"]),
        "--skip-translation",
        "--embeddings", str(small_bundle["embeddings"]),
        "--out", str(out), "--config", str(config),
    ]
    assert main(args) == 0
    source_bytes = small_bundle["source"].read_bytes()
    assert (out / "target_mt.tsv").read_bytes() == source_bytes


def test_run_ridge_model(tmp_path, small_bundle):
    config = _write_fast_config(tmp_path)
    out = tmp_path / "out"
    assert main(_run_args(small_bundle, out, config, extra=["--model", "ridge"])) == 0
    assert (out / "checkpoints" / "ridge_y1_y2.ckpt").exists()


def test_run_requires_table_or_skip(tmp_path, small_bundle, capsys):
    out = tmp_path / "out"
    code = main([
        "run", "--source", str(small_bundle["source"]),
        "--embeddings", str(small_bundle["embeddings"]), "--out", str(out),
    ])
    assert code == 1
    assert "translation table" in capsys.readouterr().err


def test_run_respects_output_lock(tmp_path, small_bundle, capsys):
    config = _write_fast_config(tmp_path)
    out = tmp_path / "out"
    out.mkdir()
    (out / ".lexiforge.lock").write_text("12345\n", encoding="utf-8")
    code = main(_run_args(small_bundle, out, config))
    assert code == 1
    assert "locked" in capsys.readouterr().err


def test_run_stage_failure_marks_manifest(tmp_path, small_bundle, capsys):
    config = _write_fast_config(tmp_path)
    out = tmp_path / "out"
    bad_gold = tmp_path / "bad_gold.tsv"
    bad_gold.write_text("word\ty1\ty2\nonlyone\t0.0\t0.0\n", encoding="utf-8")
    code = main(_run_args(small_bundle, out, config,
                          extra=["--gold", f"bad={bad_gold}"]))
    assert code == 1
    assert "gold-eval-bad" in capsys.readouterr().err
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["status"] == "incomplete"
    assert manifest["stages"][-1]["status"] == "failed"
    # artifacts from completed stages are retained
    assert (out / "target_pred.tsv").exists()


# ---------------------------------------------------------------------------
# evaluate / report
# ---------------------------------------------------------------------------


def test_evaluate_recomputes_from_files(tmp_path, small_bundle, capsys):
    config = _write_fast_config(tmp_path)
    out = tmp_path / "out"
    assert main(_run_args(small_bundle, out, config)) == 0
    run_silver = json.loads((out / "reports" / "silver.json").read_text(encoding="utf-8"))

    eval_out = tmp_path / "eval_reports"
    code = main([
        "evaluate", "--mt", str(out / "target_mt.tsv"),
        "--pred", str(out / "target_pred.tsv"),
        "--gold", f"g1={small_bundle['gold']}",
        "--out", str(eval_out),
    ])
    assert code == 0
    redone = json.loads((eval_out / "silver.json").read_text(encoding="utf-8"))
    assert redone[0]["r"] == run_silver[0]["r"]
    assert (eval_out / "gold_g1.json").exists()
    assert (eval_out / "mt_vs_pred_g1.json").exists()
    printed = capsys.readouterr().out
    assert "silver evaluation" in printed and "gold evaluation" in printed


def test_report_renders_and_meta(tmp_path, capsys):
    reports_dir = tmp_path / "reports"
    reports_dir.mkdir()
    langs = ["de", "pl", "tr", "id"]
    for i, lang in enumerate(langs):
        silver = EvalReport("silver", (f"{lang}-mt", f"{lang}-pred"), lang, 100,
                            {"Val": 0.8 - 0.05 * i, "Aro": 0.6 - 0.05 * i})
        gold = EvalReport("gold", (f"{lang}1", f"{lang}-pred"), lang, 80,
                          {"Val": 0.75 - 0.04 * i, "Aro": 0.55 - 0.06 * i}, coverage=0.5)
        save_reports([silver], reports_dir / f"silver_{lang}.json")
        save_reports([gold], reports_dir / f"gold_{lang}1.json")
    tsv_path = tmp_path / "tables.tsv"
    code = main(["report", str(reports_dir), "--tsv", str(tsv_path)])
    assert code == 0
    printed = capsys.readouterr().out
    assert "#Lg" in printed  # meta table rendered for >= 2 languages
    assert "4" in printed
    assert tsv_path.exists()
    header = tsv_path.read_text(encoding="utf-8").splitlines()[0]
    assert header.split("\t") == [
        "protocol", "lexicons", "language", "shared", "coverage", "variable", "r"
    ]


def test_report_conflicting_silver_reports_error(tmp_path, capsys):
    reports_dir = tmp_path / "reports"
    reports_dir.mkdir()
    save_reports(
        [EvalReport("silver", ("de-mt", "de-pred"), "de", 10, {"Val": 0.5})],
        reports_dir / "a.json",
    )
    save_reports(
        [EvalReport("silver", ("de-mt", "de-pred"), "de", 10, {"Val": 0.6})],
        reports_dir / "b.json",
    )
    assert main(["report", str(reports_dir)]) == 1
    assert "conflicting" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# gradcheck and config parsing
# ---------------------------------------------------------------------------


def test_gradcheck_command(capsys):
    code = main(["gradcheck", "--seeds", "3", "--dim", "6", "--outputs", "2",
                 "--samples", "5", "--hidden", "8,4"])
    assert code == 0
    printed = capsys.readouterr().out
    assert "worst over 3 seeds" in printed


def test_parse_config_file(tmp_path):
    path = tmp_path / "cfg"
    path.write_text(
        "seed = 5\nepochs=2  # quick\n\n# comment line\nmodel = ridge\n",
        encoding="utf-8",
    )
    assert parse_config_file(path) == {"seed": 5, "epochs": 2, "model": "ridge"}
    bad = tmp_path / "bad"
    bad.write_text("unknown_key = 3\n", encoding="utf-8")
    from lexiforge import LexiforgeError

    with pytest.raises(LexiforgeError):
        parse_config_file(bad)
    bad2 = tmp_path / "bad2"
    bad2.write_text("seed five\n", encoding="utf-8")
    with pytest.raises(LexiforgeError):
        parse_config_file(bad2)


def test_config_precedence_defaults_file_cli(tmp_path, small_bundle):
    config = tmp_path / "cfg"
    config.write_text("epochs = 2\nhidden = 8,4\nbatch_size = 16\n", encoding="utf-8")
    out = tmp_path / "out"
    assert main(_run_args(small_bundle, out, config, extra=["--epochs", "1"])) == 0
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["train_config"]["epochs"] == 1  # CLI beats config file
    assert manifest["train_config"]["hidden"] == [8, 4]  # config beats default
    assert manifest["train_config"]["learning_rate"] == 1e-3  # default
