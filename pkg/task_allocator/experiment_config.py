import hashlib
import json
import os
from typing import Any, Dict, List, Optional
from pydantic import BaseModel, Field, ValidationError
from .agents.qlearning import TrainConfig
from .reward import RewardConfig, reward_preset
from .scenario_config import ScenarioConfig, format_validation_error, load_scenario
from .utils.errors import ConfigError

DEFAULT_PRESET = "with_idle_medium_trp"


class ExperimentConfig(BaseModel):
    """Everything a CLI run needs: the scenario, the team's rewards, training and evaluation budgets, and outputs"""
    scenario: str = Field(description="Scenario file path or shipped scenario name", default="heterogeneous")
    preset: str = Field(description="Reward preset applied to every agent", default=DEFAULT_PRESET)
    reward: Optional[RewardConfig] = Field(description="Explicit team reward config; replaces the preset", default=None)
    reward_overrides: Dict[int, Dict[str, Any]] = Field(
        description="Per-agent partial RewardConfig fields, keyed by agent id", default_factory=dict
    )
    train: TrainConfig = Field(default_factory=TrainConfig)
    trials: int = Field(description="Evaluation trials E", default=500, ge=1)
    ablate_trials: int = Field(description="Trials per variant of an inactivation study", default=200, ge=1)
    output_dir: str = Field(description="Directory receiving CSV, JSON and checkpoint files", default="runs")
    checkpoint_dir: Optional[str] = Field(description="Where checkpoints are read from; output_dir when unset", default=None)
    seed: Optional[int] = Field(description="Run seed; overrides train.seed when set", default=None, ge=0)
    inactive: List[int] = Field(description="Agent ids forced to idle during evaluation", default_factory=list)
    timeline_steps: Optional[int] = Field(description="Export the first N steps of every trial's decisions", default=None, ge=1)
    ablate_agents: Optional[List[int]] = Field(description="Restrict the inactivation study to these agents", default=None)

    @property
    def run_seed(self) -> int:
        return self.seed if self.seed is not None else self.train.seed

    @property
    def checkpoints(self) -> str:
        return self.checkpoint_dir or self.output_dir

    def resolved_train(self) -> TrainConfig:
        return self.train.model_copy(update={"seed": self.run_seed})

    def load_scenario(self) -> ScenarioConfig:
        return load_scenario(self.scenario)

    def reward_configs(self, config: ScenarioConfig) -> List[RewardConfig]:
        """One reward config per agent: the team config with any per-agent override applied"""
        base = self.reward.model_copy(deep=True) if self.reward is not None else reward_preset(self.preset)
        agent_ids = {agent.id for agent in config.agents}
        for agent_id in self.reward_overrides:
            if agent_id not in agent_ids:
                raise ConfigError(f"reward_overrides.{agent_id}: no such agent in scenario '{config.name}'", agent_id)
        configs = []
        for agent in config.agents:
            override = self.reward_overrides.get(agent.id)
            if override:
                try:
                    cfg = RewardConfig.model_validate({**base.model_dump(), **override})
                except ValidationError as e:
                    raise ConfigError(f"reward_overrides.{agent.id}.{format_validation_error(e)}")
            else:
                cfg = base.model_copy(deep=True)
            cfg.check_compatible(config)
            configs.append(cfg)
        return configs

    def config_hash(self, config: ScenarioConfig) -> str:
        """Stable hash over the scenario, every agent's reward config and the training config"""
        document = {
            "scenario": config.fingerprint(),
            "rewards": [cfg.model_dump(mode="json") for cfg in self.reward_configs(config)],
            "train": self.resolved_train().model_dump(mode="json"),
        }
        return hashlib.sha256(json.dumps(document, sort_keys=True).encode("utf-8")).hexdigest()[:16]


def load_experiment(path: str) -> ExperimentConfig:
    if not os.path.exists(path):
        raise ConfigError("config: file not found", path)
    with open(path, "r", encoding="utf-8") as f:
        raw = f.read()
    try:
        return ExperimentConfig.model_validate_json(raw)
    except ValidationError as e:
        raise ConfigError(f"Invalid experiment config: {format_validation_error(e)}")
