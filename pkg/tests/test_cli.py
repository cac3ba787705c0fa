import json

import pytest

from prdlab.cli import main


def outputs(d):
    man = json.loads((d / "manifest.json").read_text())
    return {k: (d / k).read_bytes() for k in man["outputs"]}


def test_help_and_usage_errors(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("PRDLAB_OUTPUT_DIR", raising=False)
    assert main(["--help"]) == 0
    assert main(["simulate", "--help"]) == 0
    assert main(["bogus"]) == 1
    assert main(["simulate", "--no-such-flag", "1"]) == 1
    assert main(["featviz"]) == 1  # missing --net


def test_simulate_turing_paper(tmp_path):
    out = tmp_path / "t"
    assert main(["simulate", "--model", "turing", "--preset", "paper", "--size", "12", "--steps", "20",
                 "--snapshot-every", "10", "--out", str(out)]) == 0
    files = outputs(out)
    assert "stats.csv" in files and "frames/u_00.pgm" in files and "frames/v_20.pgm" in files


def test_env_sets_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("PRDLAB_OUTPUT_DIR", str(tmp_path / "env"))
    assert main(["simulate", "--model", "gs", "--preset", "gs1", "--size", "10", "--patch", "2", "--steps", "3"]) == 0
    assert (tmp_path / "env" / "manifest.json").exists()


def test_bad_manifest_command(tmp_path):
    out = tmp_path / "a"
    assert main(["simulate", "--model", "gs", "--size", "10", "--patch", "2", "--steps", "2", "--out", str(out)]) == 0
    assert main(["featviz", "--config", str(out / "manifest.json"), "--out", str(tmp_path / "b")]) == 1


@pytest.mark.parametrize("flags", [
    ["--model", "turing", "--size", "10", "--steps", "10", "--snapshot-every", "5", "--amplitude", "0.03"],
    ["--model", "gs", "--preset", "gs3", "--size", "12", "--patch", "3", "--steps", "10", "--snapshot-every", "5"],
])
def test_simulate_replay_identical(tmp_path, flags):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", *flags, "--out", str(a)]) == 0
    assert main(["simulate", "--config", str(a / "manifest.json"), "--out", str(b)]) == 0
    assert outputs(a) == outputs(b)


def test_pipeline_replay_identical(tmp_path):
    data = tmp_path / "data"
    assert main(["gen-data", "--n-total", "24", "--n-train", "16", "--d-in", "9", "--seed", "1",
                 "--out", str(data)]) == 0
    tr = tmp_path / "train"
    assert main(["train", "--data", str(data), "--mode", "adv", "--m", "32", "--max-epochs", "5",
                 "--batch-size", "4", "--gp-coeff", "10", "--gram-every", "2", "--out", str(tr)]) == 0
    runs = {
        "gram": ["--data", str(data), "--net", str(tr / "generator.bin"), "--mc-samples", "1000000"],
        "verify-bounds": ["--data", str(data), "--log", str(tr / "trajectory.csv"), "--m", "32",
                          "--mc-samples", "1000000"],
        "featviz": ["--net", str(tr / "generator.bin"), "--top-k", "3", "--iterations", "5"],
    }
    for cmd, flags in runs.items():
        assert main([cmd, *flags, "--out", str(tmp_path / cmd)]) == 0, cmd
    for cmd in ["gen-data", "train", *runs]:
        first = {"gen-data": data, "train": tr}.get(cmd, tmp_path / cmd)
        again = tmp_path / (cmd + "-replay")
        assert main([cmd, "--config", str(first / "manifest.json"), "--out", str(again)]) == 0, cmd
        assert outputs(first) == outputs(again), cmd
