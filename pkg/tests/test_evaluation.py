"""
Test suite for Monte Carlo evaluation and the inactivation study.

These tests check that:
- Rollouts are reproducible and run the whole horizon, also after the operation is complete
- Idle and reassignment counts agree with the recorded timelines up to the completion step
- Inactive agents idle in place, and an all-inactive team leaves every capability unused
- The inactivation study shares trial streams with a plain evaluation
"""
import numpy as np
import pytest
from .config import TOY_SCENARIO
from task_allocator.agents.qnet import QNet
from task_allocator.evaluation import EvalReport, Evaluator, evaluate, inactivation_study
from task_allocator.reward import RewardConfig, reward_preset
from task_allocator.scenario_config import ScenarioConfig, load_scenario
from task_allocator.utils.errors import ConfigError, ContractViolation

FIRE1, RESCUE1, FIRE2, RESCUE2, IDLE1, IDLE2 = range(6)


@pytest.fixture(scope="module")
def config():
    return load_scenario("heterogeneous")


@pytest.fixture(scope="module")
def toy():
    return ScenarioConfig.model_validate(TOY_SCENARIO)


@pytest.fixture(scope="module")
def random_team(config):
    rng = np.random.default_rng(0)
    return [QNet.initialize((26, 8, 6), rng) for _ in config.agents]


def _preferring(config, action):
    net = QNet.zeros((config.feature_width, 4, config.num_actions))
    net.biases[-1][action] = 1.0
    return net


def test_all_inactive_team(config, random_team):
    report = evaluate(random_team, config, E=5, seed=0, inactive=[1, 2, 3, 4, 5])
    assert report.completion_steps == [None] * 5
    assert report.failure_rate == 1.0
    assert report.mean_completion_step is None
    assert report.unused_capability_per_agent_per_step == [pytest.approx(2.8)] * 5
    assert report.unused_fraction == pytest.approx(1.0)
    assert report.idle_count == [150] * 5
    assert report.reassignment_count == [0] * 5
    assert all(len(timeline) == config.horizon for timeline in report.timelines)


def test_evaluation_is_reproducible(config, random_team):
    first = evaluate(random_team, config, E=10, seed=3)
    second = evaluate(random_team, config, E=10, seed=3)
    assert first == second


def test_trial_streams_do_not_depend_on_trial_count(config, random_team):
    short = evaluate(random_team, config, E=3, seed=3)
    long = evaluate(random_team, config, E=6, seed=3)
    assert long.completion_steps[:3] == short.completion_steps
    assert long.timelines[:3] == short.timelines


def test_counts_match_timelines(config, random_team):
    report = evaluate(random_team, config, E=20, seed=1)
    start = config.initial_assignment(config.agents[0])
    for trial, timeline in enumerate(report.timelines):
        assert len(timeline) == config.horizon
        counted = timeline[:report.completion_steps[trial] or config.horizon]
        previous = [start] * config.num_agents
        idle = reassignments = 0
        for assignment in counted:
            idle += sum(config.is_idle(a) for a in assignment)
            reassignments += sum(config.location_of(a) != config.location_of(p) for a, p in zip(assignment, previous))
            previous = assignment
        assert report.idle_count[trial] == idle
        assert report.reassignment_count[trial] == reassignments
        if report.completion_steps[trial] is not None:
            last_open = report.completion_steps[trial] - 1
            assert report.level_histories[trial][last_open] != [0, 0, 0, 0], "levels are recorded before each step"
            assert all(levels == [0, 0, 0, 0] for levels in report.level_histories[trial][last_open + 1:])


def _stand_down_net(toy):
    # works while level 0 is unlikely, idles once the task is believed finished
    net = QNet.zeros((toy.feature_width, toy.num_actions))
    net.weights[0][0, 0] = -2.0
    net.biases[0][0] = 1.0
    return net


def test_rollout_continues_after_completion(toy):
    report = evaluate([_stand_down_net(toy)], toy, E=3, seed=0)
    assert report.completion_steps == [2, 2, 2]
    for timeline in report.timelines:
        assert timeline == [[0], [0]] + [[1]] * (toy.horizon - 2)
    # the post-completion idling counts as unused capability but not as idle decisions
    assert report.idle_count == [0, 0, 0]
    assert report.reassignment_count == [0, 0, 0]
    assert report.unused_capability_per_agent_per_step == [pytest.approx(5.0 * 18 / 20)] * 3
    assert report.unused_fraction == pytest.approx(0.9)


def test_inactive_agent_idles_in_place(config):
    nets = [_preferring(config, FIRE2) for _ in config.agents]
    report = evaluate(nets, config, E=2, seed=0, inactive=[4])
    for timeline in report.timelines:
        assert all(assignment[3] == IDLE1 for assignment in timeline)
        assert all(assignment[0] == FIRE2 for assignment in timeline)
    # agents 1, 2, 3 and 5 move to site2 once
    assert report.reassignment_count == [4, 4]


def test_team_rewards_only_with_reward_configs(config, random_team):
    assert evaluate(random_team, config, E=2).team_rewards is None
    scored = evaluate(random_team, config, reward_preset("with_idle_medium_trp"), E=2)
    assert len(scored.team_rewards) == 2


def test_evaluator_arguments_are_checked(config, random_team):
    with pytest.raises(ContractViolation):
        Evaluator(random_team[:4], config)
    with pytest.raises(ContractViolation):
        Evaluator(random_team, config, inactive=[6])
    with pytest.raises(ContractViolation):
        Evaluator(random_team, config).run(0)


def test_reward_configs_must_match_team(config, random_team):
    with pytest.raises(ConfigError):
        Evaluator(random_team, config, [RewardConfig()] * 4)
    with pytest.raises(ConfigError):
        Evaluator(random_team, config, [RewardConfig()] * 6)
    assert len(Evaluator(random_team, config, [RewardConfig()] * 5).reward_fns) == 5


def test_completion_histogram():
    report = EvalReport(
        trials=4,
        horizon=30,
        mean_total_capability=2.8,
        completion_steps=[3, None, 3, 30],
        unused_capability_per_agent_per_step=[0.0] * 4,
        idle_count=[0] * 4,
        reassignment_count=[0] * 4,
        timelines=[[]] * 4,
        level_histories=[[]] * 4,
    )
    histogram = report.completion_histogram()
    assert len(histogram) == 30
    assert histogram[2] == 2
    assert histogram[29] == 1
    assert sum(histogram) == 3
    assert report.failure_rate == 0.25
    assert report.mean_completion_step == pytest.approx(12.0)


def test_inactivation_study_shares_streams(config, random_team):
    study = inactivation_study(random_team, config, E=4, seed=2, agents=[2, 5])
    assert sorted(study.variants) == [2, 5]
    baseline = evaluate(random_team, config, E=4, seed=2, stream="ablate")
    assert study.baseline.completion_steps == baseline.completion_steps
    variant = evaluate(random_team, config, E=4, seed=2, inactive=[5], stream="ablate")
    assert study.variants[5].completion_steps == variant.completion_steps
    assert study.variants[5].label == "inactive_5"
    assert study.variants[5].inactive == [5]


def test_inactivation_with_nobody_removed_is_the_baseline(config, random_team):
    study = inactivation_study(random_team, config, E=3, seed=2, agents=[])
    assert study.variants == {}
    plain = evaluate(random_team, config, E=3, seed=2, inactive=[], stream="ablate")
    assert study.baseline.completion_steps == plain.completion_steps


def test_completion_shift():
    from task_allocator.evaluation import InactivationReport, VariantSummary

    def summary(label, mean):
        return VariantSummary(label=label, completion_steps=[], histogram=[], mean_completion_step=mean, failure_rate=0.0)

    study = InactivationReport(
        trials=1,
        horizon=30,
        baseline=summary("baseline", 10.0),
        variants={1: summary("inactive_1", 12.0), 2: summary("inactive_2", None)},
    )
    assert study.completion_shift(1) == pytest.approx(0.2)
    assert study.completion_shift(2) is None
