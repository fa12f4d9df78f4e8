import json
import subprocess
import sys

import numpy as np
import pytest

from heg.cli import main
from heg.graph import load_graph


def run_cli(*argv):
    return main(list(argv))


@pytest.fixture(scope="module")
def dataset_dir(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "ds"
    code = run_cli("synth", "--out", str(path), "--num-videos", "20",
                   "--frames", "11", "--feature-dim", "5",
                   "--task", "mean_coded", "--seed", "5")
    assert code == 0
    return path


def test_synth_writes_dataset(dataset_dir):
    assert (dataset_dir / "annotations.jsonl").exists()
    assert (dataset_dir / "splits.json").exists()
    assert (dataset_dir / "config.json").exists()
    features = sorted((dataset_dir / "features").glob("*.hegf"))
    assert len(features) == 20
    config = json.loads((dataset_dir / "config.json").read_text())
    assert config["task"] == "mean_coded"
    assert config["num_videos"] == 20


def test_build_graph_emits_loadable_files(dataset_dir, tmp_path, capsys):
    out = tmp_path / "gb"
    assert run_cli("build-graph", "--data", str(dataset_dir),
                   "--out", str(out)) == 0
    stdout = capsys.readouterr().out
    assert "total: 20 graphs" in stdout
    files = sorted((out / "graphs").glob("*.hegg"))
    assert len(files) == 20
    g = load_graph(files[0])
    assert g.feature_dim == 5


def test_train_eval_cycle(dataset_dir, tmp_path, capsys):
    run = tmp_path / "run"
    code = run_cli("train", "--data", str(dataset_dir), "--out", str(run),
                   "--epochs", "3", "--batch-size", "8",
                   "--learning-rate", "0.003", "--weight-decay", "0",
                   "--seed", "2")
    assert code == 0
    assert (run / "model.hegc").exists()
    losses = (run / "loss.txt").read_text().splitlines()
    assert len(losses) == 3
    assert all(np.isfinite(float(v)) for v in losses)
    capsys.readouterr()
    code = run_cli("eval", "--data", str(dataset_dir),
                   "--checkpoint", str(run / "model.hegc"),
                   "--split", "test", "--out", str(tmp_path / "ev"))
    assert code == 0
    stdout = capsys.readouterr().out
    assert "accuracy" in stdout
    report = json.loads((tmp_path / "ev" / "report.json").read_text())
    assert report["num_examples"] == 3


def test_config_file_precedence(dataset_dir, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"epochs": 2, "seed": 7, "weight_decay": 0.0}))
    run = tmp_path / "run"
    code = run_cli("train", "--data", str(dataset_dir), "--out", str(run),
                   "--config", str(cfg), "--seed", "9", "--batch-size", "8")
    assert code == 0
    resolved = json.loads((run / "config.json").read_text())
    assert resolved["epochs"] == 2       # from the file
    assert resolved["seed"] == 9         # flag beats file
    assert resolved["batch_size"] == 8   # flag beats default
    assert resolved["pooling"] == "feature_gated_attention"  # default


def test_config_file_rejects_unknown_keys(dataset_dir, tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"epoch": 2}))
    code = run_cli("train", "--data", str(dataset_dir),
                   "--out", str(tmp_path / "x"), "--config", str(cfg))
    assert code == 2
    assert "unknown keys" in capsys.readouterr().err


def test_out_root_env_var(dataset_dir, tmp_path, monkeypatch):
    monkeypatch.setenv("HEG_OUT_ROOT", str(tmp_path / "root"))
    code = run_cli("train", "--data", str(dataset_dir), "--out", "nested/run",
                   "--epochs", "1", "--batch-size", "8")
    assert code == 0
    assert (tmp_path / "root" / "nested" / "run" / "model.hegc").exists()


def test_usage_errors_exit_1(capsys):
    with pytest.raises(SystemExit) as exc:
        run_cli("train", "--no-such-flag")
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        run_cli("not-a-command")
    assert exc.value.code == 1


def test_data_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad"
    bad.mkdir()
    (bad / "annotations.jsonl").write_text("garbage\n")
    code = run_cli("train", "--data", str(bad), "--out", str(tmp_path / "o"))
    assert code == 2
    assert "heg:" in capsys.readouterr().err
    code = run_cli("eval", "--data", str(tmp_path / "missing"),
                   "--checkpoint", str(tmp_path / "nope.hegc"))
    assert code == 2


def test_gradcheck_passes_and_tight_tolerance_exits_3(capsys):
    code = run_cli("gradcheck", "--feature-dim", "4", "--seed", "3")
    out = capsys.readouterr().out
    assert code == 0
    assert "max relative error" in out
    assert "passed" in out
    code = run_cli("gradcheck", "--feature-dim", "4", "--seed", "3",
                   "--tolerance", "1e-18")
    assert code == 3
    assert "FAILED" in capsys.readouterr().out


def test_ablate_thread_counts_agree(dataset_dir, tmp_path, capsys):
    args = ("ablate", "--data", str(dataset_dir), "--grid", "compression",
            "--epochs", "1", "--batch-size", "8", "--seed", "1",
            "--learning-rate", "0.003")
    one = tmp_path / "t1"
    two = tmp_path / "t2"
    assert run_cli(*args, "--threads", "1", "--out", str(one)) == 0
    assert run_cli(*args, "--threads", "2", "--out", str(two)) == 0
    assert (one / "table.txt").read_text() == (two / "table.txt").read_text()
    results = json.loads((one / "results.json").read_text())
    assert [r["name"] for r in results] == ["compression_on", "compression_off"]
    assert all(r["error"] is None for r in results)


def test_console_script_entry_point(dataset_dir, tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "heg.cli", "synth", "--out",
         str(tmp_path / "ds2"), "--num-videos", "4", "--frames", "6",
         "--feature-dim", "3"],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "ds2" / "annotations.jsonl").exists()
