"""
Monte Carlo evaluation of trained teams.

Each trial runs one operation for the full ``horizon`` under the greedy policies of frozen networks, so the team
keeps deciding after the last task is finished. Idle and reassignment counts stop at the completion step, while
unused capability, timelines and rewards cover every step. Trials draw their randomness from their own named stream,
so trial k sees the same world evolution (for the same decisions) whichever agents are inactivated and however many
trials run.
"""

from __future__ import annotations
import time
from typing import Dict, Iterable, List, Optional, Sequence, Union
import numpy as np
from pydantic import BaseModel, Field
from .agents.qlearning import select_action
from .agents.qnet import QNet
from .belief import BeliefDiagnostics, KnowledgeState, initial_knowledge, update_belief
from .environment import TransitionModel, broadcast, initial_world, observe, step_world
from .reward import RewardConfig, RewardFunction
from .scenario_config import ScenarioConfig
from .trainer import resolve_reward_configs
from .utils.errors import ContractViolation
from .utils.seeding import named_stream


class TrialRecord(BaseModel):
    """Outcome of a single rollout"""
    completion_step: Optional[int] = Field(description="Step at which every task reached level 0; None if never within the horizon")
    unused_capability_per_agent_per_step: float
    idle_count: int = Field(description="Idle decisions of the whole team up to and including the completion step", ge=0)
    reassignment_count: int = Field(description="Location changes of the whole team up to and including the completion step", ge=0)
    timeline: List[List[int]] = Field(description="Joint assignment of every step of the horizon, agents in id order")
    levels: List[List[int]] = Field(description="True severity levels when each joint assignment was decided")
    team_reward: Optional[float] = Field(description="Sum of every agent's reward over the trial", default=None)
    belief_fallbacks: int = 0


class EvalReport(BaseModel):
    """Per-trial metrics of an evaluation run"""
    trials: int = Field(description="Number of rollouts E")
    horizon: int = Field(description="Step budget h of every rollout")
    inactive: List[int] = Field(description="Ids of agents forced to idle", default_factory=list)
    mean_total_capability: float = Field(description="Mean over agents of the summed task-specific capability")
    completion_steps: List[Optional[int]] = Field(description="Per trial; None when the operation was not completed")
    unused_capability_per_agent_per_step: List[float]
    idle_count: List[int]
    reassignment_count: List[int]
    timelines: List[List[List[int]]] = Field(description="[trial][step][agent] action indices")
    level_histories: List[List[List[int]]] = Field(description="[trial][step][task] true severity levels at decision time")
    team_rewards: Optional[List[float]] = Field(description="Per-trial team reward when reward configs were given", default=None)
    belief_fallbacks: int = Field(description="Belief updates that fell back to the prediction", default=0)

    @property
    def completed_steps(self) -> List[int]:
        return [s for s in self.completion_steps if s is not None]

    @property
    def failure_rate(self) -> float:
        return 1.0 - len(self.completed_steps) / self.trials

    @property
    def mean_completion_step(self) -> Optional[float]:
        steps = self.completed_steps
        return float(np.mean(steps)) if steps else None

    @property
    def unused_fraction(self) -> float:
        """Mean unused capability per agent per step relative to the team's mean capability sum"""
        if self.mean_total_capability == 0:
            return 0.0
        return float(np.mean(self.unused_capability_per_agent_per_step)) / self.mean_total_capability

    def completion_histogram(self) -> List[int]:
        """Count of trials completed at each step 1..h"""
        counts = np.bincount(np.asarray(self.completed_steps, dtype=int), minlength=self.horizon + 1)
        return counts[1:self.horizon + 1].tolist()


class Evaluator:
    """Runs greedy rollouts of a frozen team."""

    def __init__(
        self,
        nets: Sequence[QNet],
        scenario: ScenarioConfig,
        reward_cfgs: Optional[Union[RewardConfig, Sequence[RewardConfig]]] = None,
        inactive: Iterable[int] = (),
        verbose: bool = False,
    ):
        if len(nets) != scenario.num_agents:
            raise ContractViolation(f"Expected {scenario.num_agents} networks, got {len(nets)}", len(nets))
        agent_ids = {agent.id for agent in scenario.agents}
        self.inactive = sorted(set(inactive))
        unknown = [i for i in self.inactive if i not in agent_ids]
        if unknown:
            raise ContractViolation(f"Unknown agent ids to inactivate: {unknown}", unknown)
        self.nets = list(nets)
        self.scenario = scenario
        self.verbose = verbose
        self.model = TransitionModel(scenario)
        self.reward_fns: Optional[List[RewardFunction]] = None
        if reward_cfgs is not None:
            self.reward_fns = [
                RewardFunction(spec, cfg, scenario)
                for spec, cfg in zip(scenario.agents, resolve_reward_configs(reward_cfgs, scenario))
            ]

    def run(self, trials: int, seed: int = 0, stream: str = "eval") -> EvalReport:
        if trials < 1:
            raise ContractViolation("Evaluation needs at least one trial", trials)
        start_time = time.time()
        label = f"agents {self.inactive} inactive" if self.inactive else "all agents active"
        self._log_message(f"=== Evaluating '{self.scenario.name}' over {trials} trials ({label}) ===")

        records = [self.run_trial(named_stream(seed, f"{stream}/trial{k}")) for k in range(trials)]
        report = EvalReport(
            trials=trials,
            horizon=self.scenario.horizon,
            inactive=self.inactive,
            mean_total_capability=self.scenario.mean_total_capability(),
            completion_steps=[r.completion_step for r in records],
            unused_capability_per_agent_per_step=[r.unused_capability_per_agent_per_step for r in records],
            idle_count=[r.idle_count for r in records],
            reassignment_count=[r.reassignment_count for r in records],
            timelines=[r.timeline for r in records],
            level_histories=[r.levels for r in records],
            team_rewards=[r.team_reward for r in records] if self.reward_fns is not None else None,
            belief_fallbacks=sum(r.belief_fallbacks for r in records),
        )

        elapsed_time = time.time() - start_time
        mean_step = report.mean_completion_step
        self._log_message(
            f"Failure rate {report.failure_rate:.2f}, mean completion step "
            f"{'n/a' if mean_step is None else f'{mean_step:.2f}'}, unused capability {report.unused_fraction:.1%}"
        )
        if report.belief_fallbacks:
            self._log_message(f"Belief updates fell back to the prediction {report.belief_fallbacks} times")
        self._log_message(f"Evaluator completed in {int(elapsed_time // 60)} minutes and {int(elapsed_time % 60)} seconds")
        return report

    def run_trial(self, rng: np.random.Generator) -> TrialRecord:
        scenario = self.scenario
        agents = scenario.agents
        diagnostics = BeliefDiagnostics()
        knowledge: List[KnowledgeState] = [initial_knowledge(spec, scenario) for spec in agents]
        world = initial_world(scenario)
        capability = np.array([spec.total_capability for spec in agents], dtype=float)

        timeline: List[List[int]] = []
        levels: List[List[int]] = []
        unused = 0.0
        idle_count = 0
        reassignments = 0
        team_reward = 0.0 if self.reward_fns is not None else None
        completion_step = None

        for t in range(scenario.horizon):
            assignment = [self._decide(spec.id, k) for spec, k in zip(agents, knowledge)]
            timeline.append(assignment)
            levels.append(list(world.levels))
            for k, action, cap in zip(knowledge, assignment, capability):
                if scenario.is_idle(action):
                    unused += cap
                if completion_step is not None:
                    continue
                if scenario.is_idle(action):
                    idle_count += 1
                if scenario.location_of(action) != scenario.location_of(k.previous_assignment):
                    reassignments += 1

            world = step_world(world, assignment, scenario, rng, self.model)
            observations = [observe(spec, world, action, scenario, rng) for spec, action in zip(agents, assignment)]
            messages = broadcast(observations, agents)
            next_knowledge = []
            for i, k in enumerate(knowledge):
                belief = update_belief(k.belief, assignment, observations[i], messages, scenario, self.model, diagnostics)
                k_next = KnowledgeState(belief=belief, previous_assignment=assignment[i])
                if self.reward_fns is not None:
                    team_reward += self.reward_fns[i](k.previous_assignment, k_next.belief, k_next.previous_assignment)
                next_knowledge.append(k_next)
            knowledge = next_knowledge

            if completion_step is None and world.complete:
                completion_step = t + 1

        return TrialRecord(
            completion_step=completion_step,
            unused_capability_per_agent_per_step=unused / (scenario.num_agents * scenario.horizon),
            idle_count=idle_count,
            reassignment_count=reassignments,
            timeline=timeline,
            levels=levels,
            team_reward=team_reward,
            belief_fallbacks=diagnostics.zero_mass_fallbacks,
        )

    def _decide(self, agent_id: int, k: KnowledgeState) -> int:
        if agent_id in self.inactive:
            return self.scenario.idle_action(self.scenario.location_of(k.previous_assignment))
        return select_action(self.nets[agent_id - 1], k, 0.0, self.scenario)

    def _log_message(self, message: str) -> None:
        """Log a message if verbose is True"""
        if self.verbose:
            print(message)


def evaluate(
    nets: Sequence[QNet],
    scenario: ScenarioConfig,
    reward_cfgs: Optional[Union[RewardConfig, Sequence[RewardConfig]]] = None,
    E: int = 500,
    seed: int = 0,
    inactive: Iterable[int] = (),
    stream: str = "eval",
    verbose: bool = False,
) -> EvalReport:
    """Run E greedy rollouts; agents in ``inactive`` idle in place every step without retraining"""
    return Evaluator(nets, scenario, reward_cfgs, inactive, verbose=verbose).run(E, seed, stream)


class VariantSummary(BaseModel):
    """Completion statistics of one team variant"""
    label: str
    inactive: List[int] = Field(default_factory=list)
    completion_steps: List[Optional[int]]
    histogram: List[int] = Field(description="Trials completed at each step 1..h")
    mean_completion_step: Optional[float]
    failure_rate: float

    @classmethod
    def from_report(cls, label: str, report: EvalReport) -> "VariantSummary":
        return cls(
            label=label,
            inactive=report.inactive,
            completion_steps=report.completion_steps,
            histogram=report.completion_histogram(),
            mean_completion_step=report.mean_completion_step,
            failure_rate=report.failure_rate,
        )


class InactivationReport(BaseModel):
    """Baseline team against every single-agent inactivation"""
    trials: int
    horizon: int
    baseline: VariantSummary
    variants: Dict[int, VariantSummary] = Field(description="Keyed by the id of the inactivated agent")

    def completion_shift(self, agent_id: int) -> Optional[float]:
        """Relative change of the mean completion step when ``agent_id`` is inactivated"""
        base = self.baseline.mean_completion_step
        variant = self.variants[agent_id].mean_completion_step
        if base is None or variant is None:
            return None
        return (variant - base) / base


def inactivation_study(
    nets: Sequence[QNet],
    scenario: ScenarioConfig,
    E: int = 200,
    seed: int = 0,
    agents: Optional[Iterable[int]] = None,
    verbose: bool = False,
) -> InactivationReport:
    """Evaluate the full team and each single-agent-inactivated variant on the same trial streams"""
    agent_ids = [spec.id for spec in scenario.agents] if agents is None else list(agents)
    baseline = evaluate(nets, scenario, E=E, seed=seed, stream="ablate", verbose=verbose)
    variants = {
        agent_id: VariantSummary.from_report(
            f"inactive_{agent_id}",
            evaluate(nets, scenario, E=E, seed=seed, inactive=[agent_id], stream="ablate", verbose=verbose),
        )
        for agent_id in agent_ids
    }
    return InactivationReport(
        trials=E,
        horizon=scenario.horizon,
        baseline=VariantSummary.from_report("baseline", baseline),
        variants=variants,
    )
