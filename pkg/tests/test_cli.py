"""
Test suite for the command-line interface.

These tests check that:
- train writes one checkpoint per agent, the training curve and a manifest, reproducibly
- evaluate, importance and ablate write their tables with provenance columns
- Bad arguments and mismatched checkpoints end with exit status 1 and a single error line
"""
import json
import os
import numpy as np
import pandas as pd
import pytest
from .config import SMOKE_TRAIN, SMOKE_TRIALS
from task_allocator.agents.qnet import QNet
from task_allocator.agents.utils.checkpoint import save_checkpoint
from task_allocator.main import main
from task_allocator.scenario_config import load_scenario

FIRE2, IDLE1 = 2, 4


@pytest.fixture
def smoke_config(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"scenario": "heterogeneous", "train": SMOKE_TRAIN}))
    return str(path)


@pytest.fixture
def team_dir(tmp_path):
    """Checkpoints of a hand-built team that always heads for the fire at site2"""
    config = load_scenario("heterogeneous")
    directory = tmp_path / "team"
    for agent in config.agents:
        net = QNet.zeros((config.feature_width, 4, config.num_actions))
        net.biases[-1][FIRE2] = 1.0
        save_checkpoint(net, agent.id, config, str(directory), seed=0)
    return str(directory)


def _read_bytes(path):
    with open(path, "rb") as f:
        return f.read()


def test_train_writes_outputs(smoke_config, tmp_path, capsys):
    out = str(tmp_path / "run")
    assert main(["train", "--config", smoke_config, "--seed", "1", "--out", out]) == 0
    files = sorted(os.listdir(out))
    assert files == [f"agent_{i}.qnet" for i in range(1, 6)] + ["manifest.json", "training.csv"]

    training = pd.read_csv(os.path.join(out, "training.csv"), dtype={"config_hash": str})
    assert list(training.columns) == ["episode", "mean_loss", "mean_episode_reward", "epsilon", "config_hash", "seed"]
    assert training["episode"].tolist() == [0, 1, 2]
    assert (training["seed"] == 1).all()

    with open(os.path.join(out, "manifest.json")) as f:
        manifest = json.load(f)
    assert manifest["seed"] == 1
    assert manifest["config_hash"] == training["config_hash"][0]
    assert manifest["scenario_fingerprint"] == load_scenario("heterogeneous").fingerprint()
    assert manifest["train"]["episodes"] == 3
    assert "Trained 5 agents" in capsys.readouterr().out


def test_training_reruns_are_byte_identical(smoke_config, tmp_path):
    first, second = str(tmp_path / "a"), str(tmp_path / "b")
    assert main(["train", "--config", smoke_config, "--seed", "2", "--out", first]) == 0
    assert main(["train", "--config", smoke_config, "--seed", "2", "--out", second]) == 0
    for name in ["agent_1.qnet", "agent_5.qnet", "training.csv", "manifest.json"]:
        assert _read_bytes(os.path.join(first, name)) == _read_bytes(os.path.join(second, name)), name


def test_zero_episodes(smoke_config, tmp_path):
    out = str(tmp_path / "run")
    assert main(["train", "--config", smoke_config, "--episodes", "0", "--out", out]) == 0
    assert len(pd.read_csv(os.path.join(out, "training.csv"))) == 0
    assert len([f for f in os.listdir(out) if f.endswith(".qnet")]) == 5


def test_evaluate_writes_trials_and_timeline(team_dir, tmp_path, capsys):
    out = str(tmp_path / "eval")
    args = ["evaluate", "--checkpoints", team_dir, "--out", out, "--trials", str(SMOKE_TRIALS), "--timeline", "3"]
    assert main(args) == 0

    trials = pd.read_csv(os.path.join(out, "trials.csv"))
    assert list(trials.columns) == [
        "trial", "completion_step", "unused_capability_per_agent_per_step", "idle_count", "reassignment_count",
        "config_hash", "seed",
    ]
    assert len(trials) == SMOKE_TRIALS
    assert trials["completion_step"].isna().all(), "the rescue tasks are never attended"
    assert (trials["reassignment_count"] == 5).all()

    timeline = pd.read_csv(os.path.join(out, "timeline.csv"))
    assert len(timeline) == SMOKE_TRIALS * 3 * 5
    assert set(timeline["action_label"]) == {"fire@site2"}
    assert list(timeline.columns[5:9]) == ["level_1", "level_2", "level_3", "level_4"]

    with open(os.path.join(out, "summary.json")) as f:
        summary = json.load(f)
    assert summary["failure_rate"] == 1.0
    assert summary["scenario"] == "heterogeneous"
    assert "failure rate 100.0%" in capsys.readouterr().out


def test_evaluate_with_inactive_agent(team_dir, tmp_path):
    out = str(tmp_path / "eval")
    assert main(["evaluate", "--checkpoints", team_dir, "--out", out, "--trials", "2", "--inactive", "4"]) == 0
    trials = pd.read_csv(os.path.join(out, "trials_inactive_4.csv"))
    assert (trials["idle_count"] == 30).all()
    assert (trials["reassignment_count"] == 4).all()
    assert os.path.exists(os.path.join(out, "summary_inactive_4.json"))


def test_importance_table(team_dir, tmp_path, capsys):
    out = str(tmp_path / "importance")
    assert main(["importance", "--checkpoints", team_dir, "--out", out, "--trials", "2"]) == 0
    printed = capsys.readouterr().out
    assert "zeta" in printed
    assert "w_fire = 1.00" in printed

    table = pd.read_csv(os.path.join(out, "importance.csv"))
    assert table["agent"].tolist() == [1, 2, 3, 4, 5]
    np.testing.assert_allclose(table["U_fire"], [90.0, 90.0, 60.0, 0.0, 30.0])
    np.testing.assert_allclose(table["zeta"], table["U_fire"])
    with open(os.path.join(out, "importance.json")) as f:
        assert json.load(f)["urgency"] == [1.0, 0.0]


def test_importance_of_an_idle_team_fails(tmp_path, capsys):
    config = load_scenario("heterogeneous")
    directory = str(tmp_path / "idle_team")
    for agent in config.agents:
        net = QNet.zeros((config.feature_width, 4, config.num_actions))
        net.biases[-1][IDLE1] = 1.0
        save_checkpoint(net, agent.id, config, directory)
    assert main(["importance", "--checkpoints", directory, "--out", str(tmp_path / "out"), "--trials", "2"]) == 1
    assert "urgency is undefined" in capsys.readouterr().err


def test_ablate(team_dir, tmp_path):
    out = str(tmp_path / "ablate")
    assert main(["ablate", "--checkpoints", team_dir, "--out", out, "--trials", "3", "--agent", "1,3"]) == 0
    table = pd.read_csv(os.path.join(out, "ablation.csv"))
    assert list(table.columns) == ["trial", "baseline", "inactive_1", "inactive_3", "config_hash", "seed"]
    assert len(table) == 3
    with open(os.path.join(out, "ablation_summary.json")) as f:
        summary = json.load(f)
    assert sorted(summary["variants"]) == ["1", "3"]
    assert summary["trials"] == 3


def test_bad_preset(tmp_path, capsys):
    assert main(["train", "--preset", "lots_of_idle", "--out", str(tmp_path)]) == 1
    err = capsys.readouterr().err.strip()
    assert err.startswith("error: preset:")
    assert len(err.splitlines()) == 1


def test_checkpoints_from_another_scenario(team_dir, tmp_path, capsys):
    args = ["evaluate", "--scenario", "homogeneous", "--checkpoints", team_dir, "--out", str(tmp_path), "--trials", "2"]
    assert main(args) == 1
    assert "different scenario" in capsys.readouterr().err


def test_missing_config_document(tmp_path, capsys):
    assert main(["evaluate", "--config", str(tmp_path / "nope.json")]) == 1
    assert capsys.readouterr().err.startswith("error: config:")


def test_invalid_flag_values(tmp_path, capsys):
    assert main(["evaluate", "--trials", "0", "--out", str(tmp_path)]) == 1
    assert "trials" in capsys.readouterr().err
