"""
Belief-dependent reward shaping for load management.

An agent's per-step reward is the completion reward (how finished the operation looks under its belief) plus the
load-management reward: an idle incentive, a penalty for bringing far more capability than a task needs, and the
reassignment cost of changing location between consecutive decisions. Load management is a secondary objective,
so its terms should stay smaller than the gap between adjacent completion levels.
"""

from __future__ import annotations
from typing import Dict, List, Optional
import numpy as np
from pydantic import BaseModel, Field, model_validator
from .belief import BeliefState, believed_level
from .scenario_config import AgentSpec, ScenarioConfig, TaskSpec
from .utils.errors import ConfigError, ContractViolation

UNREACHABLE = -np.inf


class RewardConfig(BaseModel):
    """Reward constants of one agent"""
    level_rewards: List[float] = Field(
        description="Reward per believed severity level, index 0 = complete; strictly decreasing",
        default_factory=lambda: [100.0, 25.0, 10.0, 5.0, 0.0],
    )
    belief_threshold: float = Field(description="Probability needed to believe a level", default=0.8, gt=0.0, le=1.0)
    idle_reward: float = Field(description="Reward for idling during a step", default=0.5, ge=0.0)
    excess_penalty: float = Field(description="Penalty for excess capability on an easy task", default=0.5, ge=0.0)
    excess_margin: int = Field(description="Levels of capability above the believed level that count as excess", default=2, ge=0)
    traversing_cost: float = Field(description="Cost of being reassigned to another location", default=-2.0, le=0.0)

    @model_validator(mode="after")
    def _check_levels(self) -> "RewardConfig":
        if len(self.level_rewards) < 2:
            raise ValueError("level_rewards: at least two levels are required")
        if any(hi <= lo for hi, lo in zip(self.level_rewards, self.level_rewards[1:])):
            raise ValueError("level_rewards: must be strictly decreasing in severity level")
        return self

    def min_level_gap(self) -> float:
        return min(hi - lo for hi, lo in zip(self.level_rewards, self.level_rewards[1:]))

    def dominance_margin(self) -> float:
        """Positive when every load-management term is smaller than one level of completion reward"""
        return self.min_level_gap() - (self.idle_reward + self.excess_penalty + abs(self.traversing_cost))

    def check_compatible(self, config: ScenarioConfig) -> None:
        if len(self.level_rewards) != config.num_levels:
            raise ConfigError(
                f"level_rewards: expected {config.num_levels} entries for scenario '{config.name}', "
                f"got {len(self.level_rewards)}"
            )

    def cost_matrix(self, config: ScenarioConfig) -> np.ndarray:
        return build_cost_matrix(config.tasks, config.idle_locations, self.traversing_cost)


# ---- experiment presets: idle incentive on/off x reassignment penalty none/medium/high ----

IDLE_INCENTIVE_LEVELS: Dict[str, float] = {"no": 0.0, "with": 0.5}
TRAVERSING_COST_LEVELS: Dict[str, float] = {"no": 0.0, "medium": -2.0, "high": -10.0}

REWARD_PRESETS: Dict[str, RewardConfig] = {
    f"{idle}_idle_{trp}_trp": RewardConfig(
        idle_reward=incentive,
        excess_penalty=incentive,
        traversing_cost=cost,
    )
    for idle, incentive in IDLE_INCENTIVE_LEVELS.items()
    for trp, cost in TRAVERSING_COST_LEVELS.items()
}


def reward_preset(name: str) -> RewardConfig:
    """Look up a preset by name; ``idle_<x>_trp`` is accepted for ``with_idle_<x>_trp``"""
    canonical = f"with_{name}" if name.startswith("idle_") else name
    if canonical not in REWARD_PRESETS:
        raise ConfigError(f"preset: unknown reward preset '{name}' (choose from {', '.join(REWARD_PRESETS)})", name)
    return REWARD_PRESETS[canonical].model_copy(deep=True)


# ---- reward terms ----

def build_cost_matrix(tasks: List[TaskSpec], idle_locations: List[str], tc: float) -> np.ndarray:
    """
    Reassignment cost from previous assignment (row) to new assignment (column).

    Same-location moves are free, moving to a task elsewhere costs ``tc`` and idling at another location
    is unreachable.
    """
    if tc > 0:
        raise ConfigError("traversing_cost: must be non-positive", tc)
    locations = [task.location for task in tasks] + list(idle_locations)
    num_tasks = len(tasks)
    size = len(locations)
    matrix = np.zeros((size, size))
    for origin in range(size):
        for target in range(size):
            if locations[origin] == locations[target]:
                continue
            matrix[origin, target] = UNREACHABLE if target >= num_tasks else tc
    return matrix


def reduced_actions(a_o: int, config: ScenarioConfig) -> List[int]:
    """Every task plus the single idle action co-located with the previous assignment"""
    if not 0 <= a_o < config.num_actions:
        raise ContractViolation(f"Previous assignment {a_o} is not a task or idle location", a_o)
    return list(range(config.num_tasks)) + [config.idle_action(config.location_of(a_o))]


def completion_reward(b: BeliefState, reward_cfg: RewardConfig) -> float:
    """Average over tasks of the reward of each task's believed level; undecided tasks count as the worst level"""
    rewards = reward_cfg.level_rewards
    total = 0.0
    for tb in b.per_task:
        level = believed_level(tb, reward_cfg.belief_threshold)
        total += rewards[-1] if level is None else rewards[level]
    return total / len(b.probs)


def idle_incentive(
    agent: AgentSpec,
    a: int,
    b: BeliefState,
    reward_cfg: RewardConfig,
    config: ScenarioConfig,
) -> float:
    if config.is_idle(a):
        return reward_cfg.idle_reward
    level = believed_level(b[a], reward_cfg.belief_threshold)
    if level is None:
        return 0.0
    if agent.capability_for(config.tasks[a].task_type) >= level + reward_cfg.excess_margin:
        return -reward_cfg.excess_penalty
    return 0.0


def total_reward(
    a_o: int,
    b: BeliefState,
    a: int,
    agent: AgentSpec,
    reward_cfg: RewardConfig,
    config: ScenarioConfig,
    cost_matrix: Optional[np.ndarray] = None,
) -> float:
    """Completion reward plus load-management reward for deciding ``a`` after ``a_o``"""
    if a not in reduced_actions(a_o, config):
        raise ContractViolation(f"Action {config.action_label(a)} is not reachable from {config.action_label(a_o)}", a)
    if cost_matrix is None:
        cost_matrix = reward_cfg.cost_matrix(config)
    return completion_reward(b, reward_cfg) + idle_incentive(agent, a, b, reward_cfg, config) + float(cost_matrix[a_o, a])


class RewardFunction:
    """An agent's reward function with its cost matrix built once"""

    def __init__(self, agent: AgentSpec, reward_cfg: RewardConfig, config: ScenarioConfig):
        reward_cfg.check_compatible(config)
        self.agent = agent
        self.reward_cfg = reward_cfg
        self.config = config
        self.cost_matrix = reward_cfg.cost_matrix(config)

    def __call__(self, a_o: int, b: BeliefState, a: int) -> float:
        return total_reward(a_o, b, a, self.agent, self.reward_cfg, self.config, self.cost_matrix)

    def idle_in_place(self, b: BeliefState) -> float:
        """Per-step reward of idling where the agent already is while the belief stays at ``b``"""
        return completion_reward(b, self.reward_cfg) + self.reward_cfg.idle_reward
