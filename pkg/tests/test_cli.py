import json

import pytest

from hetmerge.cli import run
from hetmerge.data import load_dataset
from hetmerge.model import load_model


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """gen-data + two trained models + captures, shared across CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    data = root / "data"
    assert run([
        "gen-data", "--out-dir", str(data), "--seed", "0",
        "--classes-per-task", "3", "--input-dim", "8",
        "--samples-per-class", "120", "--mean-scale", "4.0",
    ]) == 0
    deep = root / "deep.hmm1"
    shallow = root / "shallow.hmm1"
    assert run([
        "train", "--data", str(data / "task_a_train.hmm1"), "--out", str(deep),
        "--task", "a", "--depth", "4", "--width", "16", "--seed", "1", "--epochs", "8",
    ]) == 0
    assert run([
        "train", "--data", str(data / "task_b_train.hmm1"), "--out", str(shallow),
        "--task", "b", "--depth", "2", "--width", "8", "--seed", "2", "--epochs", "8",
    ]) == 0
    return root


def test_gen_data_writes_six_datasets(workspace):
    names = [
        "task_a_train", "task_a_test", "task_b_train",
        "task_b_test", "joint_train", "joint_test",
    ]
    for name in names:
        ds = load_dataset(workspace / "data" / f"{name}.hmm1")
        assert len(ds) > 0


def test_gen_data_is_byte_deterministic(tmp_path):
    args = ["--seed", "3", "--classes-per-task", "2", "--input-dim", "6",
            "--samples-per-class", "30"]
    assert run(["gen-data", "--out-dir", str(tmp_path / "d1"), *args]) == 0
    assert run(["gen-data", "--out-dir", str(tmp_path / "d2"), *args]) == 0
    b1 = (tmp_path / "d1" / "joint_train.hmm1").read_bytes()
    b2 = (tmp_path / "d2" / "joint_train.hmm1").read_bytes()
    assert b1 == b2


def test_train_echoes_config_into_metadata(workspace):
    bundle = load_model(workspace / "deep.hmm1")
    cfg = bundle.metadata["config"]
    assert cfg["depth"] == 4 and cfg["width"] == 16 and cfg["seed"] == 1


def test_capture_and_align_depth(workspace, capsys):
    data = workspace / "data"
    for model, out in (("deep", "ca.hmm1"), ("shallow", "cb.hmm1")):
        assert run([
            "capture", "--model", str(workspace / f"{model}.hmm1"),
            "--data", str(data / "joint_train.hmm1"),
            "--out", str(workspace / out), "--batch-size", "64", "--seed", "5",
        ]) == 0
    capsys.readouterr()
    assert run([
        "align-depth", "--cache-a", str(workspace / "ca.hmm1"),
        "--cache-b", str(workspace / "cb.hmm1"), "--method", "lma", "--json",
    ]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["method"] == "LMA"
    assert doc["g"][-1] == 4 and len(doc["g"]) == 2


def test_align_width_writes_plan(workspace, capsys):
    out = workspace / "plan.json"
    assert run([
        "align-width", "--cache-a", str(workspace / "ca.hmm1"),
        "--cache-b", str(workspace / "ca.hmm1"),
        "--strategy", "permute", "--out", str(out),
    ]) == 0
    doc = json.loads(out.read_text())
    assert len(doc["boundaries"]) == 5


def test_merge_eval_barrier_pipeline(workspace, capsys):
    data = workspace / "data"
    merged = workspace / "merged.hmm1"
    assert run([
        "merge", "--a", str(workspace / "deep.hmm1"), "--b", str(workspace / "shallow.hmm1"),
        "--calib", str(data / "joint_train.hmm1"), "--out", str(merged),
        "--depth-method", "lma", "--strategy", "zip", "--r", "16",
        "--batch-size", "128", "--seed", "7",
    ]) == 0
    recipe = json.loads((workspace / "merged.hmm1.recipe.json").read_text())
    assert recipe["depth_method"] == "lma"
    assert recipe["depth_plan"]["g"][-1] == 4

    bundle = load_model(merged)
    assert bundle.depth == 4
    assert {h.task for h in bundle.heads} == {"a", "b"}

    capsys.readouterr()
    assert run([
        "eval", "--model", str(merged), "--data", str(data / "joint_test.hmm1"), "--json",
    ]) == 0
    report = json.loads(capsys.readouterr().out)
    assert set(report["per_task_acc"]) == {"a", "b"}
    assert 0.0 <= report["joint_acc"] <= 1.0

    csv_path = workspace / "curve.csv"
    assert run([
        "barrier", "--a", str(merged), "--b", str(merged),
        "--data", str(data / "joint_test.hmm1"), "--csv", str(csv_path), "--json",
    ]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert abs(doc["barrier"]) < 1e-12
    assert len(csv_path.read_text().strip().splitlines()) == 22


def test_merge_outputs_are_byte_deterministic(workspace, tmp_path):
    data = workspace / "data"
    outs = []
    for name in ("m1.hmm1", "m2.hmm1"):
        out = tmp_path / name
        assert run([
            "merge", "--a", str(workspace / "deep.hmm1"), "--b", str(workspace / "shallow.hmm1"),
            "--calib", str(data / "joint_train.hmm1"), "--out", str(out),
            "--recipe-out", str(tmp_path / (name + ".recipe.json")),
            "--strategy", "zip", "--seed", "7",
        ]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_inspect_prints_header(workspace, capsys):
    assert run(["inspect", str(workspace / "deep.hmm1")]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert len(doc["layers"]) == 4
    assert doc["tensors"][0]["name"] == "layer0.weight"


def test_config_file_resolution(workspace, tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"method": "sma"}))
    capsys.readouterr()
    # config file sets sma; explicit flag overrides back to lma
    assert run([
        "align-depth", "--cache-a", str(workspace / "ca.hmm1"),
        "--cache-b", str(workspace / "cb.hmm1"),
        "--config", str(cfg), "--json",
    ]) == 0
    assert json.loads(capsys.readouterr().out)["method"] == "SMA"
    assert run([
        "align-depth", "--cache-a", str(workspace / "ca.hmm1"),
        "--cache-b", str(workspace / "cb.hmm1"),
        "--config", str(cfg), "--method", "lma", "--json",
    ]) == 0
    assert json.loads(capsys.readouterr().out)["method"] == "LMA"


def test_unknown_subcommand_exits_2(capsys):
    assert run(["frobnicate"]) == 2


def test_unknown_flag_exits_2(capsys):
    assert run(["inspect", "--bogus"]) == 2


def test_validation_error_exits_2(workspace, capsys):
    # shallow model passed as --a: validation error, not a crash
    code = run([
        "merge", "--a", str(workspace / "shallow.hmm1"), "--b", str(workspace / "deep.hmm1"),
        "--calib", str(workspace / "data" / "joint_train.hmm1"),
        "--out", str(workspace / "nope.hmm1"),
    ])
    assert code == 2
    assert "deeper" in capsys.readouterr().err


def test_missing_file_exits_2(capsys):
    assert run(["inspect", "/nonexistent/path.hmm1"]) == 2


def test_help_exits_0(capsys):
    for cmd in ("gen-data", "train", "capture", "align-depth", "align-width",
                "merge", "eval", "barrier", "inspect"):
        assert run([cmd, "--help"]) == 0
        out = capsys.readouterr().out
        assert "usage" in out
