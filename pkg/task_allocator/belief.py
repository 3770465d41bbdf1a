"""
Per-agent knowledge: a factored belief over every task's severity level plus the agent's previous assignment.

The belief is updated with a discrete Bayes filter: predict each task through its transition matrix under the
(common-knowledge) joint assignment, then weight by the likelihood of the agent's own observation and of every
teammate's broadcast, then renormalise. Rescue tasks are predicted with the rescue kernel averaged over the agent's
current belief about the coupled fire level, which keeps the belief factored per task.
"""

from __future__ import annotations
from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, Optional, Sequence
import numpy as np
from .environment import Message, Observation, TransitionModel, joint_capabilities, observation_matrix
from .scenario_config import AgentSpec, ScenarioConfig
from .utils.errors import ContractViolation

# Probability vector over the L severity levels of one task
TaskBelief = np.ndarray


@dataclass(frozen=True)
class BeliefState:
    probs: np.ndarray = field(repr=False)  # shape (p, L), one simplex row per task

    @property
    def per_task(self) -> List[TaskBelief]:
        return list(self.probs)

    def __getitem__(self, task: int) -> TaskBelief:
        return self.probs[task]


@dataclass(frozen=True)
class KnowledgeState:
    belief: BeliefState
    previous_assignment: int


@dataclass
class BeliefDiagnostics:
    """Counters surfaced by training and evaluation runs"""
    updates: int = 0
    zero_mass_fallbacks: int = 0


def initial_belief(config: ScenarioConfig) -> BeliefState:
    num_levels = config.num_levels
    if config.uniform_prior:
        return BeliefState(np.full((config.num_tasks, num_levels), 1.0 / num_levels))
    probs = np.zeros((config.num_tasks, num_levels))
    for j, task in enumerate(config.tasks):
        probs[j, task.initial_level] = 1.0
    return BeliefState(probs)


def initial_knowledge(agent: AgentSpec, config: ScenarioConfig) -> KnowledgeState:
    return KnowledgeState(belief=initial_belief(config), previous_assignment=config.initial_assignment(agent))


def message_accuracy(communication: int) -> float:
    """How much a broadcast from a sender with this communication level is trusted"""
    return min(1.0, 0.5 + 0.1 * communication)


@lru_cache(maxsize=None)
def _observation_likelihoods(sensing: int, num_levels: int) -> np.ndarray:
    # [true_level, observed_level]; column z is the likelihood of observing z
    return observation_matrix(sensing, num_levels)


@lru_cache(maxsize=None)
def _message_likelihoods(communication: int, num_levels: int) -> np.ndarray:
    r = message_accuracy(communication)
    matrix = np.full((num_levels, num_levels), (1.0 - r) / (num_levels - 1))
    np.fill_diagonal(matrix, r)
    return matrix


def observation_likelihood(observed_level: int, sensing: int, num_levels: int) -> np.ndarray:
    return _observation_likelihoods(sensing, num_levels)[:, observed_level]


def message_likelihood(reported_level: int, communication: int, num_levels: int) -> np.ndarray:
    return _message_likelihoods(communication, num_levels)[:, reported_level]


def update_belief(
    b: BeliefState,
    a: Sequence[int],
    own_obs: Optional[Observation],
    messages: List[Message],
    config: ScenarioConfig,
    model: Optional[TransitionModel] = None,
    diagnostics: Optional[BeliefDiagnostics] = None,
) -> BeliefState:
    """
    One Bayes-filter step for one agent.

    Args:
        b: The agent's belief before the step
        a: The joint assignment executed during the step (broadcast alongside observations)
        own_obs: The agent's own observation of the post-step world
        messages: Every broadcast of the step; the agent's own broadcast is skipped
        config: Scenario the belief lives in
        model: Precomputed transition matrices, built on demand when omitted
        diagnostics: Optional counters; records renormalisation fallbacks

    Returns:
        The posterior belief. If the likelihoods rule out every predicted level, the prediction alone is kept.
    """
    prior = b.probs
    if prior.shape != (config.num_tasks, config.num_levels):
        raise ContractViolation("Belief shape does not match the scenario", prior.shape)
    model = model or TransitionModel(config)
    num_levels = config.num_levels
    receiver = own_obs.agent if own_obs is not None else None
    sensing = config.agents[receiver - 1].sensing if receiver is not None else None
    caps = joint_capabilities(a, config)

    posterior = np.empty_like(prior)
    for j in range(config.num_tasks):
        fire = config.coupled_fire_index(j)
        transition = model.matrix(j, int(caps[j]), prior[fire] if fire is not None else None)
        prediction = prior[j] @ transition

        weighted = prediction.copy()
        if own_obs is not None and own_obs.task == j:
            weighted *= observation_likelihood(own_obs.observed_level, sensing, num_levels)
        for message in messages:
            if message.task == j and message.sender != receiver:
                weighted *= message_likelihood(message.reported_level, message.sender_communication, num_levels)

        mass = weighted.sum()
        if mass > 0.0:
            posterior[j] = weighted / mass
        else:
            posterior[j] = prediction / prediction.sum()
            if diagnostics is not None:
                diagnostics.zero_mass_fallbacks += 1

    if diagnostics is not None:
        diagnostics.updates += 1
    return BeliefState(posterior)


def believed_level(tb: TaskBelief, b_th: float) -> Optional[int]:
    """Lowest level believed with probability at least ``b_th``, or None when no level qualifies"""
    if not 0.0 < b_th <= 1.0:
        raise ContractViolation(f"Belief threshold {b_th} outside (0, 1]", b_th)
    qualifying = np.flatnonzero(np.asarray(tb) >= b_th)
    return int(qualifying[0]) if qualifying.size else None


def encode(k: KnowledgeState, config: ScenarioConfig) -> np.ndarray:
    """Q-network input: beliefs task-major / level-minor, then a one-hot of the previous assignment"""
    one_hot = np.zeros(config.num_actions)
    one_hot[k.previous_assignment] = 1.0
    return np.concatenate([k.belief.probs.ravel(), one_hot])
