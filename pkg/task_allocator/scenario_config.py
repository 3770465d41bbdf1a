"""
Declarative description of an operation: task sites, tasks, idle locations, the team and the world dynamics knobs.

Scenario files (``*.scn``) are JSON documents that mirror ``ScenarioConfig`` field-for-field. Task and agent ids
are 1-based in documents. In code, actions are 0-based indices into the extended task set: tasks occupy
``0..p-1`` in document order and idle locations occupy ``p..p+q-1`` in ``idle_locations`` order.
"""

from __future__ import annotations
import hashlib
import os
from enum import Enum
from typing import Dict, List, Optional, Union
from pydantic import BaseModel, Field, PrivateAttr, ValidationError, model_validator
from .utils.errors import ConfigError

curdir = os.path.dirname(os.path.abspath(__file__))
SCENARIO_DIR = os.path.join(curdir, "scenarios")
SCENARIO_SUFFIX = ".scn"


class TaskType(str, Enum):
    FIRE = "fire"
    RESCUE = "rescue"


# Order of task types K in usage / urgency vectors
TASK_TYPES: List[TaskType] = [TaskType.FIRE, TaskType.RESCUE]


class TaskSpec(BaseModel):
    """A single task at one of the operation sites"""
    id: int = Field(description="1-based task id", ge=1)
    location: str = Field(description="Location id of the site hosting the task")
    task_type: TaskType = Field(description="Kind of work the task needs")
    initial_level: int = Field(description="Severity level at the start of every episode", ge=0)
    coupled_fire_task: Optional[int] = Field(description="For rescue tasks, the fire task at the same site", default=None)


class AgentSpec(BaseModel):
    """A team member and its attribute levels"""
    id: int = Field(description="1-based agent id", ge=1)
    capability: Dict[TaskType, int] = Field(description="Task-specific capability level per task type")
    sensing: int = Field(description="Perception accuracy level", default=3, ge=0, le=5)
    communication: int = Field(description="Trustworthiness of the agent's broadcasts", default=3, ge=0, le=5)
    start_location: Optional[str] = Field(description="Location where the agent idles at episode start", default=None)

    def capability_for(self, task_type: TaskType) -> int:
        return self.capability.get(task_type, 0)

    @property
    def total_capability(self) -> int:
        """Sum of all task-specific capabilities (what is left unused while idling)"""
        return sum(self.capability_for(t) for t in TASK_TYPES)


class ScenarioConfig(BaseModel):
    """The full world description consumed by the environment, the learners and the evaluators"""
    name: str = Field(description="Label used in reports", default="scenario")
    locations: List[str] = Field(description="Location ids of the operation sites")
    idle_locations: List[str] = Field(description="Locations where an idle pseudo-task exists, one per task location")
    tasks: List[TaskSpec]
    agents: List[AgentSpec]
    num_levels: int = Field(description="Number of severity levels L (levels 0..L-1)", default=5, ge=2)
    max_joint_capability: int = Field(description="Cap applied to the summed capability on one task", default=5, ge=1)
    horizon: int = Field(description="Steps per episode h", default=30, ge=1)
    fire_block_threshold: int = Field(description="Rescue cannot progress while the site's fire is above this level", default=2, ge=0)
    rescue_success_prob: float = Field(description="Per-capability-unit rescue success probability", default=0.5, ge=0.0, le=1.0)
    growth_prob: float = Field(description="Probability that an unattended fire grows by one level", default=0.0, ge=0.0, le=1.0)
    discount: float = Field(description="Discount factor gamma", default=0.95, gt=0.0, le=1.0)
    uniform_prior: bool = Field(description="Start beliefs uniform instead of on the announced initial levels", default=False)

    _action_locations: List[str] = PrivateAttr(default_factory=list)

    @model_validator(mode="after")
    def _check_structure(self) -> "ScenarioConfig":
        if not self.tasks:
            raise ValueError("tasks: at least one task is required")
        if not self.agents:
            raise ValueError("agents: at least one agent is required")
        if len(set(self.locations)) != len(self.locations):
            raise ValueError("locations: location ids must be unique")

        for i, task in enumerate(self.tasks):
            if task.id != i + 1:
                raise ValueError(f"tasks.{i}.id: expected id {i + 1}, got {task.id}")
            if task.location not in self.locations:
                raise ValueError(f"tasks.{i}.location: unknown location '{task.location}'")
            if task.initial_level > self.num_levels - 1:
                raise ValueError(f"tasks.{i}.initial_level: must be at most {self.num_levels - 1}")
            if task.task_type == TaskType.FIRE and task.coupled_fire_task is not None:
                raise ValueError(f"tasks.{i}.coupled_fire_task: fire tasks cannot reference another task")
            if task.task_type == TaskType.RESCUE:
                ref = task.coupled_fire_task
                if ref is None or not 1 <= ref <= len(self.tasks):
                    raise ValueError(f"tasks.{i}.coupled_fire_task: rescue tasks must reference a fire task")
                fire = self.tasks[ref - 1]
                if fire.task_type != TaskType.FIRE or fire.location != task.location:
                    raise ValueError(f"tasks.{i}.coupled_fire_task: task {ref} is not a fire task at '{task.location}'")

        task_locations = {task.location for task in self.tasks}
        if len(set(self.idle_locations)) != len(self.idle_locations):
            raise ValueError("idle_locations: location ids must be unique")
        if set(self.idle_locations) != task_locations:
            raise ValueError("idle_locations: must list exactly the locations that host tasks")

        for i, agent in enumerate(self.agents):
            if agent.id != i + 1:
                raise ValueError(f"agents.{i}.id: expected id {i + 1}, got {agent.id}")
            for task_type, level in agent.capability.items():
                if not 0 <= level <= self.max_joint_capability:
                    raise ValueError(
                        f"agents.{i}.capability.{task_type.value}: must be within [0, {self.max_joint_capability}]"
                    )
            if agent.start_location is not None and agent.start_location not in task_locations:
                raise ValueError(f"agents.{i}.start_location: no idle location at '{agent.start_location}'")
        return self

    def model_post_init(self, __context) -> None:
        self._action_locations = [task.location for task in self.tasks] + list(self.idle_locations)

    # ---- extended task set helpers ----

    @property
    def num_tasks(self) -> int:
        return len(self.tasks)

    @property
    def num_agents(self) -> int:
        return len(self.agents)

    @property
    def num_actions(self) -> int:
        """Size of the extended task set (tasks plus idle locations)"""
        return len(self.tasks) + len(self.idle_locations)

    @property
    def feature_width(self) -> int:
        """Width of an encoded knowledge state, pL + |G|"""
        return self.num_tasks * self.num_levels + self.num_actions

    def is_idle(self, action: int) -> bool:
        return action >= self.num_tasks

    def location_of(self, action: int) -> str:
        return self._action_locations[action]

    def idle_action(self, location: str) -> int:
        """Action index of the idle pseudo-task at a location"""
        try:
            return self.num_tasks + self.idle_locations.index(location)
        except ValueError:
            raise ConfigError(f"No idle location at '{location}'", location)

    def task(self, task: int) -> TaskSpec:
        """Task spec by 0-based task index"""
        if not 0 <= task < self.num_tasks:
            raise ConfigError(f"Unknown task index {task}", task)
        return self.tasks[task]

    def coupled_fire_index(self, task: int) -> Optional[int]:
        ref = self.task(task).coupled_fire_task
        return None if ref is None else ref - 1

    def initial_assignment(self, agent: AgentSpec) -> int:
        """Previous assignment every agent carries into the first step: idling at its start location"""
        return self.idle_action(agent.start_location or self.idle_locations[0])

    def action_label(self, action: int) -> str:
        if self.is_idle(action):
            return f"idle@{self.location_of(action)}"
        return f"{self.tasks[action].task_type.value}@{self.location_of(action)}"

    def mean_total_capability(self) -> float:
        return sum(agent.total_capability for agent in self.agents) / self.num_agents

    def fingerprint(self) -> str:
        return scenario_fingerprint(self)


def scenario_fingerprint(config: ScenarioConfig) -> str:
    """SHA-256 of the canonical JSON dump of a validated scenario"""
    return hashlib.sha256(config.model_dump_json().encode("utf-8")).hexdigest()


def format_validation_error(error: ValidationError) -> str:
    """Single-line description of the first validation problem, naming the offending field"""
    first = error.errors()[0]
    location = ".".join(str(part) for part in first.get("loc", ()))
    message = first.get("msg", "invalid value")
    message = message.removeprefix("Value error, ")
    return f"{location}: {message}" if location else message


def resolve_scenario_path(scenario: str) -> str:
    """Accept either a path to a scenario file or the bare name of a shipped scenario"""
    if os.path.exists(scenario):
        return scenario
    shipped = os.path.join(SCENARIO_DIR, scenario if scenario.endswith(SCENARIO_SUFFIX) else scenario + SCENARIO_SUFFIX)
    if os.path.exists(shipped):
        return shipped
    raise ConfigError(f"scenario: file not found and no shipped scenario named '{scenario}'", scenario)


def list_shipped_scenarios() -> List[str]:
    return sorted(f[: -len(SCENARIO_SUFFIX)] for f in os.listdir(SCENARIO_DIR) if f.endswith(SCENARIO_SUFFIX))


def parse_scenario(text: str) -> ScenarioConfig:
    try:
        return ScenarioConfig.model_validate_json(text)
    except ValidationError as e:
        raise ConfigError(f"Invalid scenario: {format_validation_error(e)}")


def load_scenario(scenario: Union[str, os.PathLike]) -> ScenarioConfig:
    """Load and validate a scenario document from a path or a shipped scenario name"""
    path = resolve_scenario_path(os.fspath(scenario))
    with open(path, "r", encoding="utf-8") as f:
        return parse_scenario(f.read())
