"""
Agent importance and summary statistics.

An agent's importance weights how much capability of each task type it actually used under the trained joint policy
by how urgent that task type was for the team, where urgency is the share of all task assignments that went to it.
Agents with low importance are the ones a team can lose without hurting the operation.
"""

from __future__ import annotations
from typing import List, Optional, Sequence
import numpy as np
from pydantic import BaseModel, Field
from scipy.stats import sem
from .evaluation import EvalReport
from .scenario_config import TASK_TYPES, ScenarioConfig, TaskType
from .utils.errors import ContractViolation, UrgencyUndefinedError

# [trial][step][agent] action indices, as recorded by ``evaluate``
Timelines = Sequence[Sequence[Sequence[int]]]


def _type_indicator(config: ScenarioConfig, task_types: Sequence[TaskType]) -> np.ndarray:
    """[action, type] one-hot of each action's task type; idle actions and unlisted types are all zero"""
    types = list(task_types)
    indicator = np.zeros((config.num_actions, len(types)))
    for j, task in enumerate(config.tasks):
        if task.task_type in types:
            indicator[j, types.index(task.task_type)] = 1.0
    return indicator


def _assignment_counts(timelines: Timelines, config: ScenarioConfig, task_types: Sequence[TaskType]) -> np.ndarray:
    """[agent, type] number of (trial, step) pairs each agent spent on each task type"""
    indicator = _type_indicator(config, task_types)
    counts = np.zeros((config.num_agents, len(task_types)))
    for timeline in timelines:
        if not len(timeline):
            continue
        actions = np.asarray(timeline, dtype=int)
        if actions.shape[1] != config.num_agents:
            raise ContractViolation(f"Timeline rows must hold {config.num_agents} actions", actions.shape)
        for i in range(config.num_agents):
            counts[i] += indicator[actions[:, i]].sum(axis=0)
    return counts


def capability_matrix(config: ScenarioConfig, task_types: Sequence[TaskType] = TASK_TYPES) -> np.ndarray:
    """[agent, type] available capability C"""
    return np.array([[agent.capability_for(t) for t in task_types] for agent in config.agents], dtype=float)


def capability_usage(
    timelines: Timelines,
    config: ScenarioConfig,
    task_types: Sequence[TaskType] = TASK_TYPES,
) -> np.ndarray:
    """
    Capability used per agent and task type, averaged over trials.

    u_k accumulates c_k for every step the agent works on a task of type k, so it ranges from 0 (always idle)
    to c_k * h (always on type k).

    Returns:
        Array of shape (n, K)
    """
    if not len(timelines):
        raise ContractViolation("capability_usage needs at least one trial")
    counts = _assignment_counts(timelines, config, task_types)
    return capability_matrix(config, task_types) * counts / len(timelines)


def task_urgency(
    timelines: Timelines,
    config: ScenarioConfig,
    task_types: Sequence[TaskType] = TASK_TYPES,
) -> np.ndarray:
    """Share of all (trial, step, agent) task assignments that went to each task type"""
    totals = _assignment_counts(timelines, config, task_types).sum(axis=0)
    if totals.sum() == 0:
        raise UrgencyUndefinedError("Task urgency is undefined: no agent was ever assigned to a task")
    return totals / totals.sum()


def importance(U: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Urgency-weighted capability usage, one value per agent"""
    U = np.atleast_2d(np.asarray(U, dtype=float))
    W = np.asarray(W, dtype=float)
    if U.shape[1] != W.shape[0]:
        raise ContractViolation(f"Usage has {U.shape[1]} task types, urgency has {W.shape[0]}", (U.shape, W.shape))
    return U @ W


class AgentImportance(BaseModel):
    agent: int = Field(description="Agent id")
    capability: List[float] = Field(description="Available capability C per task type")
    usage: List[float] = Field(description="Mean used capability U per task type")
    zeta: float = Field(description="Importance")


class ImportanceReport(BaseModel):
    """Per-agent importance of a trained team"""
    scenario: str
    trials: int
    horizon: int
    task_types: List[TaskType]
    urgency: List[float] = Field(description="Urgency weights W, one per task type, summing to 1")
    agents: List[AgentImportance]

    def least_important(self) -> int:
        return min(self.agents, key=lambda a: (a.zeta, a.agent)).agent

    def most_important(self) -> int:
        return max(self.agents, key=lambda a: (a.zeta, -a.agent)).agent

    def format_table(self) -> str:
        """Plain-text table with C, U and zeta columns and the urgency weights underneath"""
        types = [t.value for t in self.task_types]
        header = ["Agent"] + [f"C_{t}" for t in types] + [f"U_{t}" for t in types] + ["zeta"]
        rows = [
            [str(a.agent)]
            + [f"{c:g}" for c in a.capability]
            + [f"{u:.2f}" for u in a.usage]
            + [f"{a.zeta:.2f}"]
            for a in self.agents
        ]
        widths = [max(len(row[i]) for row in [header] + rows) for i in range(len(header))]
        lines = ["  ".join(cell.rjust(w) for cell, w in zip(row, widths)) for row in [header] + rows]
        weights = ", ".join(f"w_{t} = {w:.2f}" for t, w in zip(types, self.urgency))
        lines.append(f"{self.scenario}: {weights} ({self.trials} trials, h = {self.horizon})")
        return "\n".join(lines)


def importance_report(
    report: EvalReport,
    config: ScenarioConfig,
    task_types: Sequence[TaskType] = TASK_TYPES,
) -> ImportanceReport:
    U = capability_usage(report.timelines, config, task_types)
    W = task_urgency(report.timelines, config, task_types)
    zeta = importance(U, W)
    C = capability_matrix(config, task_types)
    return ImportanceReport(
        scenario=config.name,
        trials=report.trials,
        horizon=report.horizon,
        task_types=list(task_types),
        urgency=W.tolist(),
        agents=[
            AgentImportance(agent=spec.id, capability=C[i].tolist(), usage=U[i].tolist(), zeta=float(zeta[i]))
            for i, spec in enumerate(config.agents)
        ],
    )


class Statistic(BaseModel):
    mean: Optional[float] = None
    sem: Optional[float] = Field(description="Standard error of the mean; None with fewer than two samples", default=None)
    samples: int = 0


def describe(values: Sequence[float]) -> Statistic:
    values = np.asarray([v for v in values if v is not None], dtype=float)
    if values.size == 0:
        return Statistic()
    return Statistic(
        mean=float(values.mean()),
        sem=float(sem(values)) if values.size > 1 else None,
        samples=int(values.size),
    )


class EvalSummary(BaseModel):
    """Means and standard errors of an evaluation run"""
    trials: int
    inactive: List[int] = Field(default_factory=list)
    failure_rate: float
    completion_step: Statistic = Field(description="Over completed trials only")
    unused_capability_per_agent_per_step: Statistic
    unused_fraction: float
    idle_count: Statistic
    reassignment_count: Statistic
    team_reward: Optional[Statistic] = None
    belief_fallbacks: int = 0


def summarize(report: EvalReport) -> EvalSummary:
    return EvalSummary(
        trials=report.trials,
        inactive=report.inactive,
        failure_rate=report.failure_rate,
        completion_step=describe(report.completed_steps),
        unused_capability_per_agent_per_step=describe(report.unused_capability_per_agent_per_step),
        unused_fraction=report.unused_fraction,
        idle_count=describe(report.idle_count),
        reassignment_count=describe(report.reassignment_count),
        team_reward=describe(report.team_rewards) if report.team_rewards is not None else None,
        belief_fallbacks=report.belief_fallbacks,
    )
