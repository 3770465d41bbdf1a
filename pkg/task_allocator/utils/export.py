"""
CSV and JSON writers for run outputs. Every table carries ``config_hash`` and ``seed`` columns and every JSON
document carries the same two keys, so any output file can be traced back to the run that produced it.
"""

import json
import os
from typing import Any, Dict, List, Optional, Sequence
import pandas as pd
from pydantic import BaseModel
from ..scenario_config import ScenarioConfig

TRAINING_COLUMNS = ["episode", "mean_loss", "mean_episode_reward", "epsilon"]
TRIAL_COLUMNS = ["trial", "completion_step", "unused_capability_per_agent_per_step", "idle_count", "reassignment_count"]


def _write_table(
    rows: List[Dict[str, Any]],
    columns: List[str],
    path: str,
    config_hash: str,
    seed: int,
    nullable_int: Sequence[str] = (),
) -> str:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    df = pd.DataFrame(rows, columns=columns)
    for column in nullable_int:
        df[column] = df[column].astype("Int64")
    df["config_hash"] = config_hash
    df["seed"] = seed
    df.to_csv(path, index=False)
    return path


def write_training_csv(history, path: str, config_hash: str, seed: int) -> str:
    """One row per training episode; mean_loss is empty for warm-up episodes"""
    rows = [
        {
            "episode": log.episode,
            "mean_loss": log.mean_loss,
            "mean_episode_reward": log.mean_episode_reward,
            "epsilon": log.epsilon,
        }
        for log in history.episodes
    ]
    return _write_table(rows, TRAINING_COLUMNS, path, config_hash, seed)


def write_trials_csv(report, path: str, config_hash: str, seed: int) -> str:
    """One row per evaluation trial; completion_step is empty for trials that did not complete"""
    rows = [
        {
            "trial": k,
            "completion_step": report.completion_steps[k],
            "unused_capability_per_agent_per_step": report.unused_capability_per_agent_per_step[k],
            "idle_count": report.idle_count[k],
            "reassignment_count": report.reassignment_count[k],
        }
        for k in range(report.trials)
    ]
    return _write_table(rows, TRIAL_COLUMNS, path, config_hash, seed, nullable_int=["completion_step"])


def timeline_columns(config: ScenarioConfig) -> List[str]:
    return ["trial", "step", "agent", "action", "action_label"] + [f"level_{task.id}" for task in config.tasks]


def write_timeline_csv(report, config: ScenarioConfig, steps: int, path: str, config_hash: str, seed: int) -> str:
    """Decision of every agent at each of the first ``steps`` steps of every trial, next to the true task levels"""
    rows = []
    for k, (timeline, levels) in enumerate(zip(report.timelines, report.level_histories)):
        for t, (assignment, level_row) in enumerate(zip(timeline[:steps], levels[:steps])):
            for agent, action in zip(config.agents, assignment):
                row = {
                    "trial": k,
                    "step": t + 1,
                    "agent": agent.id,
                    "action": action,
                    "action_label": config.action_label(action),
                }
                row.update({f"level_{task.id}": level for task, level in zip(config.tasks, level_row)})
                rows.append(row)
    return _write_table(rows, timeline_columns(config), path, config_hash, seed)


def write_ablation_csv(study, path: str, config_hash: str, seed: int) -> str:
    """Per-trial completion step of the baseline and of every inactivation variant (empty = not completed)"""
    columns = ["trial", "baseline"] + [f"inactive_{agent_id}" for agent_id in study.variants]
    rows = []
    for k in range(study.trials):
        row = {"trial": k, "baseline": study.baseline.completion_steps[k]}
        row.update({f"inactive_{agent_id}": v.completion_steps[k] for agent_id, v in study.variants.items()})
        rows.append(row)
    return _write_table(rows, columns, path, config_hash, seed, nullable_int=columns)


def write_importance_csv(report, path: str, config_hash: str, seed: int) -> str:
    types = [t.value for t in report.task_types]
    columns = ["agent"] + [f"C_{t}" for t in types] + [f"U_{t}" for t in types] + ["zeta"]
    rows = []
    for a in report.agents:
        row = {"agent": a.agent, "zeta": a.zeta}
        row.update({f"C_{t}": c for t, c in zip(types, a.capability)})
        row.update({f"U_{t}": u for t, u in zip(types, a.usage)})
        rows.append(row)
    return _write_table(rows, columns, path, config_hash, seed)


def write_json(document: Any, path: str, config_hash: str, seed: int, extra: Optional[Dict[str, Any]] = None) -> str:
    """Write a pydantic model or plain dict as JSON with provenance keys first"""
    body = document.model_dump(mode="json") if isinstance(document, BaseModel) else dict(document)
    payload = {"config_hash": config_hash, "seed": seed, **(extra or {}), **body}
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=False)
        f.write("\n")
    return path
