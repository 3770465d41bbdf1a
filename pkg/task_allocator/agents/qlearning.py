"""
Deep Q-learning pieces used by every decentralized learner: the training configuration, transition records,
the replay memory, epsilon-greedy selection over the reduced action space, TD targets and the gradient update
(Adam by default, plain SGD on request).
"""

from __future__ import annotations
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Deque, Iterator, List, Literal, Optional, Sequence, Tuple
import numpy as np
from pydantic import BaseModel, Field, model_validator
from ..belief import KnowledgeState, encode
from ..reward import reduced_actions
from ..scenario_config import ScenarioConfig
from ..utils.errors import ContractViolation
from .qnet import QNet, backprop, forward, forward_batch


class TrainConfig(BaseModel):
    """Hyper-parameters of one training run"""
    episodes: int = Field(description="Training episodes", default=5000, ge=0)
    gamma: Optional[float] = Field(description="Discount factor; the scenario's discount when unset", default=None, gt=0.0, le=1.0)
    epsilon_start: float = Field(default=1.0, ge=0.0, le=1.0)
    epsilon_end: float = Field(default=0.05, ge=0.0, le=1.0)
    epsilon_decay_episodes: Optional[int] = Field(
        description="Episodes of linear epsilon decay; 80% of the episodes when unset", default=None, ge=1
    )
    optimizer: Literal["adam", "sgd"] = Field(description="Update rule applied to the clipped gradients", default="adam")
    learning_rate: float = Field(default=1e-3, gt=0.0)
    learning_rate_end: Optional[float] = Field(
        description="Learning rate reached together with epsilon_end; constant learning rate when unset", default=1e-4, gt=0.0
    )
    batch_size: int = Field(default=32, ge=1)
    replay_capacity: int = Field(description="Most recent transitions kept per agent", default=20_000, ge=1)
    target_sync_period: int = Field(description="Environment steps between target-network syncs", default=200, ge=1)
    hidden_layers: List[int] = Field(default_factory=lambda: [64, 64])
    grad_clip: float = Field(description="Global gradient-norm clip", default=10.0, gt=0.0)
    reward_scale: float = Field(description="Factor applied to rewards inside TD targets", default=0.05, gt=0.0)
    stop_at_completion: bool = Field(
        description="End training episodes once every task is complete; otherwise they always run the full horizon",
        default=True,
    )
    seed: int = Field(default=0, ge=0)
    log_every: int = Field(description="Episodes between progress log lines", default=100, ge=1)

    @model_validator(mode="after")
    def _check_layers(self) -> "TrainConfig":
        if any(width < 1 for width in self.hidden_layers):
            raise ValueError("hidden_layers: widths must be positive")
        return self

    def discount(self, config: ScenarioConfig) -> float:
        return self.gamma if self.gamma is not None else config.discount

    def _decay_progress(self, episode: int) -> float:
        horizon = self.epsilon_decay_episodes or max(1, int(0.8 * self.episodes))
        return min(1.0, episode / horizon)

    def epsilon(self, episode: int) -> float:
        """Linear decay from epsilon_start to epsilon_end, then flat"""
        return self.epsilon_start + (self.epsilon_end - self.epsilon_start) * self._decay_progress(episode)

    def learning_rate_at(self, episode: int) -> float:
        """Linear decay from learning_rate to learning_rate_end over the epsilon schedule"""
        if self.learning_rate_end is None:
            return self.learning_rate
        return self.learning_rate + (self.learning_rate_end - self.learning_rate) * self._decay_progress(episode)

    def layer_dims(self, config: ScenarioConfig) -> Tuple[int, ...]:
        return (config.feature_width, *self.hidden_layers, config.num_actions)


@dataclass(frozen=True)
class TransitionRecord:
    k: KnowledgeState
    a: int
    k_next: KnowledgeState
    r: float
    done: bool = False
    # closed-form value of what follows a terminal record; added to r in place of a bootstrap
    terminal_value: float = 0.0
    features: np.ndarray = field(default=None, repr=False)
    next_features: np.ndarray = field(default=None, repr=False)
    next_actions: Tuple[int, ...] = ()

    @classmethod
    def create(
        cls,
        k: KnowledgeState,
        a: int,
        k_next: KnowledgeState,
        r: float,
        done: bool,
        config: ScenarioConfig,
        terminal_value: float = 0.0,
    ) -> "TransitionRecord":
        """Build a record, checking action legality and caching the network inputs"""
        if a not in reduced_actions(k.previous_assignment, config):
            raise ContractViolation(f"Action {config.action_label(a)} is outside the reduced action space", a)
        if terminal_value and not done:
            raise ContractViolation("Only terminal records carry a terminal value", terminal_value)
        return cls(
            k=k,
            a=a,
            k_next=k_next,
            r=float(r),
            done=done,
            terminal_value=float(terminal_value),
            features=encode(k, config),
            next_features=encode(k_next, config),
            next_actions=tuple(reduced_actions(k_next.previous_assignment, config)),
        )


class ReplayBuffer:
    """Fixed-capacity replay memory; the oldest record is evicted first"""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ContractViolation("Replay capacity must be positive", capacity)
        self.capacity = capacity
        self.records: Deque[TransitionRecord] = deque(maxlen=capacity)

    def push(self, record: TransitionRecord) -> None:
        self.records.append(record)

    def sample(self, batch_size: int, rng: np.random.Generator) -> List[TransitionRecord]:
        size = min(batch_size, len(self.records))
        indices = rng.choice(len(self.records), size=size, replace=False)
        return [self.records[i] for i in indices]

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[TransitionRecord]:
        return iter(self.records)


def select_action(
    net: QNet,
    k: KnowledgeState,
    epsilon: float,
    config: ScenarioConfig,
    rng: Optional[np.random.Generator] = None,
) -> int:
    """Epsilon-greedy choice within the reduced action space; greedy ties go to the lowest action index"""
    if not 0.0 <= epsilon <= 1.0:
        raise ContractViolation(f"Epsilon {epsilon} outside [0, 1]", epsilon)
    actions = reduced_actions(k.previous_assignment, config)
    if epsilon > 0.0:
        if rng is None:
            raise ContractViolation("Exploration needs a random generator")
        if rng.random() < epsilon:
            return actions[int(rng.integers(len(actions)))]
    q_values = forward(net, encode(k, config))
    return actions[int(np.argmax(q_values[actions]))]


def greedy_policy(net: QNet, config: ScenarioConfig) -> Callable[[KnowledgeState], int]:
    def policy(k: KnowledgeState) -> int:
        return select_action(net, k, 0.0, config)
    return policy


def _max_legal(q_values: np.ndarray, legal: Sequence[Sequence[int]]) -> np.ndarray:
    mask = np.full(q_values.shape, -np.inf)
    for row, actions in enumerate(legal):
        mask[row, list(actions)] = 0.0
    return (q_values + mask).max(axis=1)


def td_target(rec: TransitionRecord, target_net: QNet, gamma: float, reward_scale: float = 1.0) -> float:
    """
    Bellman target r + gamma * max Q_target(k', a') over the reduced actions of k'.

    A terminal record drops the bootstrap and uses r plus its closed-form terminal value instead.
    """
    return float(td_targets([rec], target_net, gamma, reward_scale)[0])


def td_targets(batch: Sequence[TransitionRecord], target_net: QNet, gamma: float, reward_scale: float = 1.0) -> np.ndarray:
    rewards = np.array([rec.r + rec.terminal_value for rec in batch]) * reward_scale
    done = np.array([rec.done for rec in batch])
    if gamma == 0.0 or done.all():
        return rewards
    next_q, _ = forward_batch(target_net, np.stack([rec.next_features for rec in batch]))
    bootstrap = _max_legal(next_q, [rec.next_actions for rec in batch])
    return rewards + np.where(done, 0.0, gamma * bootstrap)


def absorbing_value(step_reward: float, gamma: float, steps_left: int) -> float:
    """
    Discounted value of receiving ``step_reward`` on every step after this one, as in a completed operation where
    nothing changes any more. Without discounting the sum runs over the ``steps_left`` steps of the horizon.
    """
    if steps_left < 0:
        raise ContractViolation("Steps left in the horizon cannot be negative", steps_left)
    if gamma < 1.0:
        return gamma * step_reward / (1.0 - gamma)
    return step_reward * steps_left


def loss_and_gradients(
    net: QNet,
    features: np.ndarray,
    actions: np.ndarray,
    targets: np.ndarray,
) -> Tuple[float, List[np.ndarray], List[np.ndarray]]:
    """Mean squared TD error over the taken actions, with its gradients"""
    out, cache = forward_batch(net, features)
    rows = np.arange(len(actions))
    errors = out[rows, actions] - targets
    loss = float(np.mean(errors ** 2))
    d_out = np.zeros_like(out)
    d_out[rows, actions] = 2.0 * errors / len(actions)
    grad_w, grad_b = backprop(net, cache, d_out)
    return loss, grad_w, grad_b


def clip_by_global_norm(grads: List[np.ndarray], max_norm: float) -> List[np.ndarray]:
    norm = np.sqrt(sum(float(np.sum(g * g)) for g in grads))
    if norm <= max_norm or norm == 0.0:
        return grads
    return [g * (max_norm / norm) for g in grads]


class AdamOptimizer:
    """Adam moment estimates for the parameters of one network"""

    def __init__(self, net: QNet, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.steps = 0
        self.first_moments = [np.zeros_like(param) for param in net.parameters()]
        self.second_moments = [np.zeros_like(param) for param in net.parameters()]

    def apply(self, net: QNet, grads: Sequence[np.ndarray], lr: float) -> None:
        self.steps += 1
        first_correction = 1.0 - self.beta1 ** self.steps
        second_correction = 1.0 - self.beta2 ** self.steps
        for param, grad, m, v in zip(net.parameters(), grads, self.first_moments, self.second_moments):
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad * grad
            param -= lr * (m / first_correction) / (np.sqrt(v / second_correction) + self.eps)


def build_optimizer(net: QNet, train_cfg: TrainConfig) -> Optional[AdamOptimizer]:
    """Moment state for Adam; None selects plain SGD"""
    return AdamOptimizer(net) if train_cfg.optimizer == "adam" else None


def train_step(
    net: QNet,
    target_net: QNet,
    batch: Sequence[TransitionRecord],
    lr: float,
    gamma: float,
    reward_scale: float = 1.0,
    grad_clip: float = 10.0,
    optimizer: Optional[AdamOptimizer] = None,
) -> float:
    """One gradient step on the mean squared TD error of ``batch``; returns the loss before the update"""
    if not batch:
        raise ContractViolation("train_step needs a non-empty batch")
    targets = td_targets(batch, target_net, gamma, reward_scale)
    features = np.stack([rec.features for rec in batch])
    actions = np.array([rec.a for rec in batch])
    loss, grad_w, grad_b = loss_and_gradients(net, features, actions, targets)
    grads = clip_by_global_norm(grad_w + grad_b, grad_clip)
    if optimizer is not None:
        optimizer.apply(net, grads, lr)
    else:
        for param, grad in zip(net.parameters(), grads):
            param -= lr * grad
    return loss


def build_qnet(config: ScenarioConfig, train_cfg: TrainConfig, rng: np.random.Generator) -> QNet:
    return QNet.initialize(train_cfg.layer_dims(config), rng)
