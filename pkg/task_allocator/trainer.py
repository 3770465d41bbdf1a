"""
Decentralized deep Q-learning for load management.

Every episode the world and all knowledge states are reset. At each step every agent picks an assignment from its
reduced action space, the world moves once under the joint assignment, agents observe their own task and broadcast,
then each agent updates its knowledge state, scores the step with its own reward function, stores the transition and
trains on a minibatch from its own replay memory. Target networks are synced on a fixed step period.

An episode ends at the horizon or, by default, as soon as every task is complete. A completed operation never
changes again, so the transition that completes it is terminal and is valued as idling in place from then on. The
team then takes one more decision inside the completed operation, recorded the same way, which is where the
policies learn what to do once there is nothing left to work on.
"""

from __future__ import annotations
import time
from typing import List, Optional, Sequence, Union
import numpy as np
from pydantic import BaseModel, Field
from tqdm import tqdm
from .agents.baseclass import LearningAgent
from .agents.qlearning import TrainConfig, build_qnet
from .agents.qnet import QNet
from .environment import TransitionModel, WorldState, broadcast, initial_world, observe, step_world
from .reward import RewardConfig
from .scenario_config import ScenarioConfig
from .utils.errors import ConfigError
from .utils.seeding import named_stream


class EpisodeLog(BaseModel):
    """Training statistics of one episode"""
    episode: int = Field(description="0-based episode index")
    mean_loss: Optional[float] = Field(description="Mean minibatch loss over all agents and steps; None during warm-up", default=None)
    mean_episode_reward: float = Field(description="Episode return (undiscounted) averaged over agents")
    epsilon: float = Field(description="Exploration rate used during the episode")
    steps: int = Field(description="Operation steps until completion or the horizon")
    completed: bool = Field(description="Whether every task reached level 0 during the episode")


class TrainingHistory(BaseModel):
    """Learning curve of a training run"""
    episodes: List[EpisodeLog] = Field(default_factory=list)

    def add_episode(self, log: EpisodeLog):
        self.episodes.append(log)

    def recent(self, count: int) -> List[EpisodeLog]:
        return self.episodes[-count:]

    def completion_rate(self, count: Optional[int] = None) -> float:
        window = self.episodes if count is None else self.recent(count)
        if not window:
            return 0.0
        return sum(log.completed for log in window) / len(window)


class TrainingResult:
    def __init__(self, nets: List[QNet], history: TrainingHistory, target_syncs: int, belief_fallbacks: int, elapsed_seconds: float):
        self.nets = nets
        self.history = history
        self.target_syncs = target_syncs
        self.belief_fallbacks = belief_fallbacks
        self.elapsed_seconds = elapsed_seconds


def resolve_reward_configs(
    reward_cfgs: Union[RewardConfig, Sequence[RewardConfig]],
    config: ScenarioConfig,
) -> List[RewardConfig]:
    """Accept one config for the whole team or one per agent"""
    if isinstance(reward_cfgs, RewardConfig):
        reward_cfgs = [reward_cfgs] * config.num_agents
    reward_cfgs = list(reward_cfgs)
    if len(reward_cfgs) != config.num_agents:
        raise ConfigError(
            f"reward: expected {config.num_agents} reward configs for scenario '{config.name}', got {len(reward_cfgs)}"
        )
    for cfg in reward_cfgs:
        cfg.check_compatible(config)
    return reward_cfgs


class DecentralizedTrainer:
    """Runs the training loop for a team of independent learners."""

    def __init__(
        self,
        scenario: ScenarioConfig,
        reward_cfgs: Union[RewardConfig, Sequence[RewardConfig]],
        train_cfg: Optional[TrainConfig] = None,
        verbose: bool = False,
    ):
        self.scenario = scenario
        self.reward_cfgs = resolve_reward_configs(reward_cfgs, scenario)
        self.train_cfg = train_cfg or TrainConfig()
        self.verbose = verbose
        self.model = TransitionModel(scenario)
        self.history = TrainingHistory()
        self.total_steps: int = 0
        self.target_syncs: int = 0
        self.start_time: float = None

        seed = self.train_cfg.seed
        self.world_rng = named_stream(seed, "train/world")
        self.agents: List[LearningAgent] = [
            LearningAgent(
                spec,
                scenario,
                reward_cfg,
                self.train_cfg,
                build_qnet(scenario, self.train_cfg, named_stream(seed, f"init/agent{spec.id}")),
                named_stream(seed, f"train/agent{spec.id}"),
                self.model,
            )
            for spec, reward_cfg in zip(scenario.agents, self.reward_cfgs)
        ]

    def run(self) -> TrainingResult:
        cfg = self.train_cfg
        self.start_time = time.time()
        self._log_message(
            f"=== Training {len(self.agents)} agents on '{self.scenario.name}' "
            f"for {cfg.episodes} episodes (seed {cfg.seed}) ==="
        )
        self._check_reward_dominance()

        episodes = tqdm(range(cfg.episodes), desc="Training", disable=not self.verbose, leave=False)
        for episode in episodes:
            log = self._run_episode(episode)
            self.history.add_episode(log)
            if (episode + 1) % cfg.log_every == 0:
                window = self.history.recent(cfg.log_every)
                losses = [entry.mean_loss for entry in window if entry.mean_loss is not None]
                mean_loss = f"{np.mean(losses):.4f}" if losses else "n/a"
                self._log_message(
                    f"Episode {episode + 1}: mean loss {mean_loss}, "
                    f"mean reward {np.mean([entry.mean_episode_reward for entry in window]):.2f}, "
                    f"completion rate {self.history.completion_rate(cfg.log_every):.2f}, "
                    f"epsilon {log.epsilon:.3f}"
                )

        fallbacks = sum(agent.diagnostics.zero_mass_fallbacks for agent in self.agents)
        elapsed_time = time.time() - self.start_time
        self._log_message(f"Target networks synced {self.target_syncs} times over {self.total_steps} steps")
        if fallbacks:
            self._log_message(f"Belief updates fell back to the prediction {fallbacks} times")
        self._log_message(
            f"DecentralizedTrainer completed in {int(elapsed_time // 60)} minutes and {int(elapsed_time % 60)} seconds "
            f"after {cfg.episodes} episodes."
        )
        return TrainingResult(
            nets=[agent.net for agent in self.agents],
            history=self.history,
            target_syncs=self.target_syncs,
            belief_fallbacks=fallbacks,
            elapsed_seconds=elapsed_time,
        )

    def _run_episode(self, episode: int) -> EpisodeLog:
        cfg = self.train_cfg
        horizon = self.scenario.horizon
        epsilon = cfg.epsilon(episode)
        lr = cfg.learning_rate_at(episode)
        world = initial_world(self.scenario)
        for agent in self.agents:
            agent.reset()

        returns = np.zeros(len(self.agents))
        losses: List[float] = []
        completed = False
        steps = 0
        for t in range(horizon):
            world = self._step(world, epsilon, lr, returns, losses, last=t == horizon - 1, steps_left=horizon - t - 1)
            steps += 1
            completed = completed or world.complete
            if cfg.stop_at_completion and world.complete:
                if t < horizon - 1:
                    # one terminal decision inside the completed operation
                    self._step(world, epsilon, lr, returns, losses, last=True, steps_left=horizon - t - 2)
                break

        return EpisodeLog(
            episode=episode,
            mean_loss=float(np.mean(losses)) if losses else None,
            mean_episode_reward=float(returns.mean()),
            epsilon=epsilon,
            steps=steps,
            completed=completed,
        )

    def _step(
        self,
        world: WorldState,
        epsilon: float,
        lr: float,
        returns: np.ndarray,
        losses: List[float],
        last: bool,
        steps_left: int,
    ) -> WorldState:
        """
        One joint decision: act, move the world, observe and broadcast, then let every agent store and learn from
        its transition.

        The transition is terminal on the ``last`` step of the horizon, or when every task is complete and training
        stops at completion. A transition into a completed operation carries the value of idling in place for the
        rest of it.
        """
        scenario = self.scenario
        knowledge = [agent.knowledge for agent in self.agents]
        assignment = [agent.act(epsilon) for agent in self.agents]

        world = step_world(world, assignment, scenario, self.world_rng, self.model)
        observations = [
            observe(agent.spec, world, action, scenario, self.world_rng)
            for agent, action in zip(self.agents, assignment)
        ]
        messages = broadcast(observations, scenario.agents)
        finished = self.train_cfg.stop_at_completion and world.complete

        for i, agent in enumerate(self.agents):
            k_next = agent.perceive(assignment, observations[i], messages)
            r = agent.reward_for(knowledge[i], k_next)
            returns[i] += r
            tail = agent.completion_value(k_next, steps_left) if finished else 0.0
            agent.remember(knowledge[i], assignment[i], k_next, r, finished or last, tail)
            loss = agent.learn(lr)
            if loss is not None:
                losses.append(loss)

        self.total_steps += 1
        if self.total_steps % self.train_cfg.target_sync_period == 0:
            for agent in self.agents:
                agent.sync_target()
            self.target_syncs += 1
        return world

    def _check_reward_dominance(self):
        for agent, reward_cfg in zip(self.agents, self.reward_cfgs):
            margin = reward_cfg.dominance_margin()
            if margin <= 0:
                self._log_message(
                    f"WARNING: agent {agent.id}'s load-management terms can outweigh one completion level "
                    f"(margin {margin:.2f})",
                    force=True,
                )

    def _log_message(self, message: str, force: bool = False) -> None:
        """Log a message if verbose is True"""
        if self.verbose or force:
            tqdm.write(message)


def train(
    scenario: ScenarioConfig,
    reward_cfgs: Union[RewardConfig, Sequence[RewardConfig]],
    tc: Optional[TrainConfig] = None,
    verbose: bool = False,
) -> List[QNet]:
    """Train one Q-network per agent and return them in agent order"""
    return DecentralizedTrainer(scenario, reward_cfgs, tc, verbose=verbose).run().nets
