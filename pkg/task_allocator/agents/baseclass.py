from typing import List, Optional
import numpy as np
from ..belief import BeliefDiagnostics, KnowledgeState, initial_knowledge, update_belief
from ..environment import Message, Observation, TransitionModel
from ..reward import RewardConfig, RewardFunction
from ..scenario_config import AgentSpec, ScenarioConfig
from ..utils.errors import ContractViolation
from .qlearning import (
    ReplayBuffer,
    TrainConfig,
    TransitionRecord,
    absorbing_value,
    build_optimizer,
    select_action,
    train_step,
)
from .qnet import QNet


class LearningAgent:
    """
    One decentralized learner. It owns its Q-network and target copy, its replay memory, its reward function and
    its knowledge state, and learns only from its own observations and the team's broadcasts.

    The transition model is shared read-only between agents since it is derived from the common scenario.
    """

    def __init__(
        self,
        spec: AgentSpec,
        config: ScenarioConfig,
        reward_cfg: RewardConfig,
        train_cfg: TrainConfig,
        net: QNet,
        rng: np.random.Generator,
        model: Optional[TransitionModel] = None,
    ):
        if net.input_width != config.feature_width or net.output_width != config.num_actions:
            raise ContractViolation(f"Q-network of agent {spec.id} does not fit the scenario", net.layer_dims)
        self.spec = spec
        self.config = config
        self.train_cfg = train_cfg
        self.gamma = train_cfg.discount(config)
        self.net = net
        self.target_net = net.copy()
        self.optimizer = build_optimizer(net, train_cfg)
        self.replay = ReplayBuffer(train_cfg.replay_capacity)
        self.reward_fn = RewardFunction(spec, reward_cfg, config)
        self.rng = rng
        self.model = model or TransitionModel(config)
        self.diagnostics = BeliefDiagnostics()
        self.knowledge: KnowledgeState = initial_knowledge(spec, config)

    @property
    def id(self) -> int:
        return self.spec.id

    def reset(self) -> KnowledgeState:
        self.knowledge = initial_knowledge(self.spec, self.config)
        return self.knowledge

    def act(self, epsilon: float) -> int:
        return select_action(self.net, self.knowledge, epsilon, self.config, self.rng)

    def perceive(self, assignment: List[int], own_obs: Observation, messages: List[Message]) -> KnowledgeState:
        """Fold one step's evidence into the belief; the agent's own decision becomes its previous assignment"""
        belief = update_belief(
            self.knowledge.belief,
            assignment,
            own_obs,
            messages,
            self.config,
            self.model,
            self.diagnostics,
        )
        self.knowledge = KnowledgeState(belief=belief, previous_assignment=assignment[self.spec.id - 1])
        return self.knowledge

    def reward_for(self, k: KnowledgeState, k_next: KnowledgeState) -> float:
        """f_R on the updated belief, for the decision that moved ``k`` to ``k_next``"""
        return self.reward_fn(k.previous_assignment, k_next.belief, k_next.previous_assignment)

    def completion_value(self, k_next: KnowledgeState, steps_left: int) -> float:
        """Value of idling in place for the rest of a completed operation, as believed in ``k_next``"""
        return absorbing_value(self.reward_fn.idle_in_place(k_next.belief), self.gamma, steps_left)

    def remember(
        self,
        k: KnowledgeState,
        a: int,
        k_next: KnowledgeState,
        r: float,
        done: bool,
        terminal_value: float = 0.0,
    ) -> TransitionRecord:
        record = TransitionRecord.create(k, a, k_next, r, done, self.config, terminal_value)
        self.replay.push(record)
        return record

    def learn(self, lr: Optional[float] = None) -> Optional[float]:
        """One minibatch update once the replay memory holds a full batch; None during warm-up"""
        cfg = self.train_cfg
        if len(self.replay) < cfg.batch_size:
            return None
        batch = self.replay.sample(cfg.batch_size, self.rng)
        return train_step(
            self.net,
            self.target_net,
            batch,
            cfg.learning_rate if lr is None else lr,
            self.gamma,
            reward_scale=cfg.reward_scale,
            grad_clip=cfg.grad_clip,
            optimizer=self.optimizer,
        )

    def sync_target(self) -> None:
        self.target_net.load_parameters_from(self.net)
