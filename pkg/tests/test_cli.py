"""CLI surface: subcommands, stdout wiring, exit codes 0/1/2/3."""

import subprocess
import sys
from pathlib import Path

import pytest

from seedcast import cli


@pytest.fixture
def config_file(tiny_dataset, tmp_path):
    p = tmp_path / "exp.conf"
    p.write_text(tiny_dataset.to_text(), encoding="utf-8")
    return p


def test_synth_writes_csv(tmp_path, capsys):
    out = tmp_path / "s.csv"
    code = cli.main(["synth", "--out", str(out), "--rows", "50", "--vars", "2",
                     "--seed", "1"])
    assert code == 0
    assert "50 rows x 2 variables" in capsys.readouterr().out
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "date,v1,v2"
    assert len(lines) == 51


def test_train_evaluate_forecast_chain(config_file, tiny_dataset, tmp_path, capsys):
    assert cli.main(["train", "--config", str(config_file)]) == 0
    out = capsys.readouterr().out
    assert "epoch   1" in out and "epoch   2" in out
    assert "best val mse" in out and "checkpoint:" in out
    ckpt = tiny_dataset.checkpoint_path
    assert Path(ckpt).exists()
    assert (Path(tiny_dataset.report_dir) / "train_curve.png").exists()

    assert cli.main(["evaluate", "--checkpoint", ckpt, "--split", "val"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("split=val mse=")

    fc = tmp_path / "fc.csv"
    assert cli.main(["forecast", "--checkpoint", ckpt,
                     "--input", tiny_dataset.dataset_path, "--out", str(fc)]) == 0
    assert "wrote 8 steps x 2 variables" in capsys.readouterr().out
    assert fc.exists()


def test_ablate_emits_table_and_report(config_file, tiny_dataset, capsys):
    assert cli.main(["ablate", "--config", str(config_file)]) == 0
    out = capsys.readouterr().out
    for variant in ("full", "no_reprogram", "no_encoder", "single_shot"):
        assert variant in out
    report_dir = Path(tiny_dataset.report_dir)
    for suffix in (".csv", ".txt", ".png"):
        assert (report_dir / f"ablation{suffix}").exists(), suffix


def test_gradcheck_single_module(capsys):
    assert cli.main(["gradcheck", "--module", "value_embed"]) == 0
    out = capsys.readouterr().out
    assert "value_embed" in out and "ok" in out and "FAIL" not in out


# ---------------------------------------------------------------------------
# exit codes


def test_no_arguments_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        cli.main([])
    assert exc.value.code == 1


def test_unknown_subcommand_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        cli.main(["explode"])
    assert exc.value.code == 1


def test_missing_required_flag_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        cli.main(["train"])
    assert exc.value.code == 1


def test_bad_split_choice_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        cli.main(["evaluate", "--checkpoint", "x.ckpt", "--split", "train"])
    assert exc.value.code == 1


def test_config_error_exits_1(tmp_path, capsys):
    bad = tmp_path / "bad.conf"
    bad.write_text("windw.length = 48\n")
    assert cli.main(["train", "--config", str(bad)]) == 1
    assert "config error" in capsys.readouterr().err


def test_data_error_exits_2(config_file, tiny_dataset, tmp_path, capsys):
    # poison one cell; the default nan policy rejects the file
    csv = Path(tiny_dataset.dataset_path)
    lines = csv.read_text().splitlines()
    cells = lines[5].split(",")
    cells[1] = "nan"
    lines[5] = ",".join(cells)
    csv.write_text("\n".join(lines) + "\n")
    assert cli.main(["train", "--config", str(config_file)]) == 2
    assert "data error" in capsys.readouterr().err


def test_missing_checkpoint_exits_2(tmp_path, capsys):
    assert cli.main(["evaluate", "--checkpoint", str(tmp_path / "no.ckpt")]) == 2
    assert "data error" in capsys.readouterr().err


def test_gradcheck_failure_exits_3(monkeypatch, capsys):
    monkeypatch.setattr(cli, "run_gradcheck", lambda module: {"encoder": 0.5})
    assert cli.main(["gradcheck"]) == 3
    out = capsys.readouterr()
    assert "FAIL" in out.out
    assert "numeric error" in out.err


def test_module_entrypoint_runs_in_subprocess(tmp_path):
    out = tmp_path / "sub.csv"
    proc = subprocess.run(
        [sys.executable, "-m", "seedcast.cli", "synth", "--out", str(out),
         "--rows", "20", "--vars", "1", "--seed", "2"],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert out.exists()
