import json

import pytest

from weaknesslab import cli

TINY = ["--widths", "16,8", "--n-train", "40", "--n-probe", "5", "--n-test", "50", "--max-epochs", "300",
        "--batch-size", "8", "--lr-min", "0.02", "--lr-max", "0.08", "--hessian-probes", "5"]


def run(*argv):
    return cli.main([str(a) for a in argv])


def test_pool_commands_then_report(tiny_root, tmp_path, capsys):
    out = tmp_path / "run"
    common = [*TINY, "--n-networks", "10", "--data-dir", tiny_root, "--output-dir", out]
    assert run("train-pool", *common) == 0
    assert run("measure", *common) == 0
    assert run("pairproxy", *common, "--no-measure-pair-proxy") == 2  # config differs from the run's
    assert run("pairproxy", *common) == 0
    capsys.readouterr()
    assert run("correlate", *common, "--measure", "pair_proxy") == 0
    assert capsys.readouterr().out.startswith("measure,rho,p_value,n,method,invariant\npair_proxy,")
    assert run("report", *common, "--out", tmp_path / "rep") == 0
    summary = json.loads((tmp_path / "rep" / "summary.json").read_text())
    assert summary["n_used"] == 10


def test_config_file_and_flag_precedence(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"schema_version": 1, "n_train": 77, "dataset": "fashion"}))
    ns = cli.build_parser().parse_args(["train-pool", "--config", str(path), "--n-train", "12"])
    cfg = cli.build_config(ns)
    assert cfg.n_train == 12 and cfg.dataset == "fashion"


def test_exit_codes(tmp_path, monkeypatch):
    monkeypatch.delenv("WEAKNESSLAB_DATA_DIR", raising=False)
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"schema_version": 1, "colour": "red"}))
    assert run("train-pool", "--config", bad) == 2
    assert run("train-pool", "--n-networks", "0") == 2
    assert run("train-pool", "--output-dir", tmp_path / "r") == 3  # no data directory
    assert run("report", "--run-dir", tmp_path / "missing") == 3
    (tmp_path / "empty" / "records").mkdir(parents=True)
    assert run("report", "--run-dir", tmp_path / "empty") == 3
    with pytest.raises(SystemExit) as info:
        run("train-pool", "--n-train", "many")
    assert info.value.code == 2


def test_numeric_failure_exit_code(tiny_root, tmp_path, monkeypatch):
    from weaknesslab import mlp

    def boom(*a, **k):
        raise mlp.TrainingError(1, "loss is not finite")

    monkeypatch.setattr(mlp, "train", boom)
    assert run("reparam-test", *TINY, "--data-dir", tiny_root, "--output-dir", tmp_path) == 4


def test_reparam_command(tiny_root, tmp_path, capsys):
    assert run("reparam-test", *TINY, "--data-dir", tiny_root, "--output-dir", tmp_path, "--n-eval", 50) == 0
    rows = (tmp_path / "reparam.csv").read_text().splitlines()
    assert len(rows) == 1 + len(cli.BETAS) + len(cli.GAMMAS)
    assert "agree=1.0000" in capsys.readouterr().out


def test_cross_regime_command(tiny_root, tmp_path, capsys):
    argv = [*TINY, "--data-dir", tiny_root, "--output-dir", tmp_path, "--scales", "40",
            "--networks-per-regime", "2", "--max-epochs", "50", "--hessian-probes", "2"]
    assert run("cross-regime", *argv) == 0
    lines = (tmp_path / "cross_regime.csv").read_text().splitlines()
    assert lines[0].startswith("n_train,") and lines[1].startswith("40,2,2,")
