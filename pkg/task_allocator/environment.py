"""
Ground-truth world dynamics for the fire-and-rescue operation.

The world state is the vector of true severity levels, one per task, hidden from the agents. Each step the team
commits to a joint assignment, every task's level moves according to ``transition_kernel`` given the capped joint
capability assigned to it, and agents working on a task observe its new level through a noisy sensor. Observations
are then broadcast to the whole team.

Conventions: agents are referred to by their 1-based ``AgentSpec.id``; tasks and idle locations by their 0-based
action index (see ``scenario_config``).
"""

from __future__ import annotations
from typing import Dict, List, Optional, Sequence, Tuple
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.stats import binom
from .scenario_config import AgentSpec, ScenarioConfig, TaskSpec, TaskType
from .utils.errors import ConfigError, ContractViolation

# One action index per agent, in agent order
JointAssignment = Tuple[int, ...]


class WorldState(BaseModel):
    """True severity level of every task"""
    model_config = ConfigDict(frozen=True)

    levels: Tuple[int, ...] = Field(description="Severity level per task, 0 = complete")
    step: int = Field(description="Number of transitions applied since reset", default=0, ge=0)

    @property
    def complete(self) -> bool:
        return all(level == 0 for level in self.levels)


class Observation(BaseModel):
    """What one agent perceived after a step. Idle agents perceive nothing."""
    model_config = ConfigDict(frozen=True)

    agent: int = Field(description="Observing agent id")
    task: Optional[int] = Field(description="Observed task index", default=None)
    observed_level: Optional[int] = Field(description="Perceived severity level", default=None)

    @model_validator(mode="after")
    def _task_and_level_together(self) -> "Observation":
        if (self.task is None) != (self.observed_level is None):
            raise ValueError("task and observed_level must be both set or both empty")
        return self

    @property
    def empty(self) -> bool:
        return self.task is None


class Message(BaseModel):
    """A broadcast observation"""
    model_config = ConfigDict(frozen=True)

    sender: int
    sender_communication: int
    task: int
    reported_level: int


def initial_world(config: ScenarioConfig) -> WorldState:
    return WorldState(levels=tuple(task.initial_level for task in config.tasks), step=0)


def validate_assignment(assignment: Sequence[int], config: ScenarioConfig) -> None:
    if len(assignment) != config.num_agents:
        raise ContractViolation(f"Joint assignment has {len(assignment)} entries for {config.num_agents} agents", assignment)
    for action in assignment:
        if not 0 <= action < config.num_actions:
            raise ContractViolation(f"Action {action} is not a task or idle location", assignment)


def joint_capability(assignment: Sequence[int], agents: List[AgentSpec], task: int, config: ScenarioConfig) -> int:
    """Capped sum of the task-relevant capabilities of every agent assigned to ``task``"""
    if not 0 <= task < config.num_tasks:
        raise ConfigError(f"Unknown task index {task}", task)
    task_type = config.tasks[task].task_type
    total = sum(agent.capability_for(task_type) for agent, action in zip(agents, assignment) if action == task)
    return min(config.max_joint_capability, total)


def joint_capabilities(assignment: Sequence[int], config: ScenarioConfig) -> np.ndarray:
    """Joint capability of every task under one joint assignment"""
    return np.array(
        [joint_capability(assignment, config.agents, j, config) for j in range(config.num_tasks)],
        dtype=int,
    )


def transition_kernel(
    task: TaskSpec,
    demand: int,
    joint_cap: int,
    coupled_fire_level: Optional[int],
    config: ScenarioConfig,
) -> np.ndarray:
    """
    Distribution over the next severity level of one task.

    Fire drops by exactly one level with probability joint_cap / max_joint_capability; an unattended fire in
    [1, L-2] may grow by one level with probability growth_prob. Rescue is blocked while the coupled fire is above
    fire_block_threshold; otherwise each capability unit independently rescues one level with probability
    rescue_success_prob. Level 0 is absorbing.
    """
    num_levels = config.num_levels
    if not 0 <= demand < num_levels:
        raise ContractViolation(f"Demand {demand} outside [0, {num_levels - 1}]", demand)
    if not 0 <= joint_cap <= config.max_joint_capability:
        raise ContractViolation(f"Joint capability {joint_cap} outside [0, {config.max_joint_capability}]", joint_cap)

    dist = np.zeros(num_levels)
    if task.task_type == TaskType.RESCUE:
        if coupled_fire_level is None:
            raise ContractViolation(f"Rescue task {task.id} needs the level of its coupled fire task")
        if not 0 <= coupled_fire_level < num_levels:
            raise ContractViolation(f"Fire level {coupled_fire_level} outside [0, {num_levels - 1}]", coupled_fire_level)

    if demand == 0:
        dist[0] = 1.0
        return dist

    if task.task_type == TaskType.FIRE:
        p_reduce = joint_cap / config.max_joint_capability
        dist[demand - 1] += p_reduce
        if joint_cap == 0 and 1 <= demand <= num_levels - 2 and config.growth_prob > 0:
            dist[demand + 1] += config.growth_prob
            dist[demand] += 1.0 - config.growth_prob
        else:
            dist[demand] += 1.0 - p_reduce
        return dist

    if coupled_fire_level > config.fire_block_threshold:
        dist[demand] = 1.0
        return dist

    rescued = np.arange(joint_cap + 1)
    masses = binom.pmf(rescued, joint_cap, config.rescue_success_prob)
    np.add.at(dist, np.maximum(demand - rescued, 0), masses)
    return dist


class TransitionModel:
    """
    Per-task transition matrices precomputed from ``transition_kernel``.

    Fire tasks get an array indexed [joint_cap, demand, next_demand]; rescue tasks get one indexed
    [joint_cap, fire_level, demand, next_demand].
    """

    def __init__(self, config: ScenarioConfig):
        self.config = config
        num_levels = config.num_levels
        caps = range(config.max_joint_capability + 1)
        self.tables: List[np.ndarray] = []
        for task in config.tasks:
            if task.task_type == TaskType.FIRE:
                table = np.array([
                    [transition_kernel(task, d, cap, None, config) for d in range(num_levels)]
                    for cap in caps
                ])
            else:
                table = np.array([
                    [[transition_kernel(task, d, cap, fire, config) for d in range(num_levels)]
                     for fire in range(num_levels)]
                    for cap in caps
                ])
            self.tables.append(table)

    def row(self, task: int, demand: int, joint_cap: int, coupled_fire_level: Optional[int] = None) -> np.ndarray:
        table = self.tables[task]
        if self.config.tasks[task].task_type == TaskType.FIRE:
            return table[joint_cap, demand]
        if coupled_fire_level is None:
            raise ContractViolation(f"Rescue task {task + 1} needs the level of its coupled fire task")
        return table[joint_cap, coupled_fire_level, demand]

    def matrix(self, task: int, joint_cap: int, fire_belief: Optional[np.ndarray] = None) -> np.ndarray:
        """
        Transition matrix [demand, next_demand] of one task. For rescue tasks the matrix is the expectation of the
        rescue kernel under ``fire_belief``, a distribution over the coupled fire level.
        """
        table = self.tables[task]
        if self.config.tasks[task].task_type == TaskType.FIRE:
            return table[joint_cap]
        if fire_belief is None:
            raise ContractViolation(f"Rescue task {task + 1} needs a belief over its coupled fire level")
        return np.tensordot(fire_belief, table[joint_cap], axes=1)


def step_world(
    state: WorldState,
    assignment: Sequence[int],
    config: ScenarioConfig,
    rng: np.random.Generator,
    model: Optional[TransitionModel] = None,
) -> WorldState:
    """Sample every task's next level independently, using the true coupled fire level before the step"""
    validate_assignment(assignment, config)
    if len(state.levels) != config.num_tasks:
        raise ContractViolation("World state does not match the scenario's task count", state.levels)

    caps = joint_capabilities(assignment, config)
    next_levels = []
    for j, task in enumerate(config.tasks):
        fire_index = config.coupled_fire_index(j)
        fire_level = None if fire_index is None else state.levels[fire_index]
        if model is not None:
            dist = model.row(j, state.levels[j], int(caps[j]), fire_level)
        else:
            dist = transition_kernel(task, state.levels[j], int(caps[j]), fire_level, config)
        next_levels.append(int(rng.choice(config.num_levels, p=dist)))
    return WorldState(levels=tuple(next_levels), step=state.step + 1)


def sensing_accuracy(sensing: int) -> float:
    """Probability that an agent perceives the true level of the task it works on"""
    return min(1.0, 0.5 + 0.1 * sensing)


def adjacent_levels(level: int, num_levels: int) -> List[int]:
    return [n for n in (level - 1, level + 1) if 0 <= n < num_levels]


def observation_matrix(sensing: int, num_levels: int) -> np.ndarray:
    """Observation model as a matrix [true_level, observed_level]"""
    q = sensing_accuracy(sensing)
    matrix = np.zeros((num_levels, num_levels))
    for level in range(num_levels):
        matrix[level, level] = q
        neighbors = adjacent_levels(level, num_levels)
        for n in neighbors:
            matrix[level, n] += (1.0 - q) / len(neighbors)
    return matrix


def observe(
    agent: AgentSpec,
    state: WorldState,
    own_action: int,
    config: ScenarioConfig,
    rng: np.random.Generator,
) -> Observation:
    """Noisy reading of the assigned task's level; idle agents observe nothing"""
    if not 0 <= own_action < config.num_actions:
        raise ContractViolation(f"Action {own_action} is not a task or idle location", own_action)
    if config.is_idle(own_action):
        return Observation(agent=agent.id)

    true_level = state.levels[own_action]
    if rng.random() < sensing_accuracy(agent.sensing):
        level = true_level
    else:
        neighbors = adjacent_levels(true_level, config.num_levels)
        level = neighbors[int(rng.integers(len(neighbors)))]
    return Observation(agent=agent.id, task=own_action, observed_level=level)


def broadcast(observations: List[Observation], agents: List[AgentSpec]) -> List[Message]:
    """One message per non-empty observation, delivered to every agent"""
    by_id: Dict[int, AgentSpec] = {agent.id: agent for agent in agents}
    return [
        Message(
            sender=obs.agent,
            sender_communication=by_id[obs.agent].communication,
            task=obs.task,
            reported_level=obs.observed_level,
        )
        for obs in observations
        if not obs.empty
    ]
