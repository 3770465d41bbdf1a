"""
Test suite for the decentralized training loop.

These tests check that:
- A single agent on a deterministic toy operation learns the optimal policy found by value iteration
- Episodes end once every task is complete, with the completing and closing transitions valued in closed form
- Training is reproducible from its seed and a zero-episode run returns the initial networks
- Reward configs whose load terms can outweigh completion are reported
"""
import numpy as np
import pytest
from .config import SMOKE_TRAIN, TOY_REWARD, TOY_SCENARIO, TOY_TRAIN
from task_allocator.agents.qlearning import TrainConfig, absorbing_value, select_action
from task_allocator.agents.qnet import QNet
from task_allocator.belief import BeliefState, KnowledgeState
from task_allocator.environment import transition_kernel
from task_allocator.reward import RewardConfig, reward_preset, total_reward
from task_allocator.scenario_config import ScenarioConfig, load_scenario
from task_allocator.trainer import DecentralizedTrainer, EpisodeLog, TrainingHistory, train
from task_allocator.utils.errors import ConfigError
from task_allocator.utils.seeding import named_stream

TASK, IDLE = 0, 1


@pytest.fixture(scope="module")
def toy():
    return ScenarioConfig.model_validate(TOY_SCENARIO)


def _point(level, num_levels):
    probs = np.zeros((1, num_levels))
    probs[0, level] = 1.0
    return BeliefState(probs)


def _value_iteration(config, reward_cfg, gamma, sweeps=500):
    """
    Q[level, previous assignment, action] of the toy operation, which is fully observed and deterministic.

    Reaching level 0 ends the episode with the value of idling in place from then on, and the decision taken at
    level 0 is terminal as well.
    """
    L = config.num_levels
    agent = config.agents[0]
    fire_cap = agent.capability_for(config.tasks[0].task_type)
    finished = absorbing_value(reward_cfg.level_rewards[0] + reward_cfg.idle_reward, gamma, config.horizon)
    q = np.zeros((L, 2, 2))
    for _ in range(sweeps):
        v = q.max(axis=2)
        for level in range(L):
            for previous in (TASK, IDLE):
                for action in (TASK, IDLE):
                    cap = fire_cap if action == TASK else 0
                    next_dist = transition_kernel(config.tasks[0], level, cap, None, config)
                    q[level, previous, action] = sum(
                        p * (
                            total_reward(previous, _point(nxt, L), action, agent, reward_cfg, config)
                            + (finished if nxt == 0 else gamma * v[nxt, action])
                        )
                        for nxt, p in enumerate(next_dist) if p > 0
                    )
    return q


def test_toy_value_iteration_policy(toy):
    assert toy.discount == 0.95
    q = _value_iteration(toy, RewardConfig(**TOY_REWARD), toy.discount)
    assert q[2, IDLE].argmax() == TASK
    assert q[1, TASK].argmax() == TASK
    assert q[1, IDLE].argmax() == TASK
    assert q[0, TASK].argmax() == IDLE
    # working on a finished task forgoes the idle reward and pays the excess penalty
    assert q[0, TASK, IDLE] - q[0, TASK, TASK] == pytest.approx(8.0)
    assert q[1, TASK, TASK] == pytest.approx(96.0 + 0.95 * 104.0 / 0.05)


def test_toy_team_learns_optimal_policy(toy):
    reward_cfg = RewardConfig(**TOY_REWARD)
    q = _value_iteration(toy, reward_cfg, toy.discount)
    net = train(toy, reward_cfg, TrainConfig(**TOY_TRAIN))[0]

    # every knowledge state training decides in; the episode is over once level 0 has been acted on
    for level, previous in [(2, IDLE), (1, TASK), (1, IDLE), (0, TASK)]:
        k = KnowledgeState(belief=_point(level, toy.num_levels), previous_assignment=previous)
        expected = int(q[level, previous].argmax())
        assert select_action(net, k, 0.0, toy) == expected, f"level {level}, previous {previous}"


def test_toy_episodes_end_at_completion(toy):
    trainer = DecentralizedTrainer(
        toy, RewardConfig(**TOY_REWARD), TrainConfig(episodes=20, batch_size=4, hidden_layers=[4], seed=1)
    )
    logs = trainer.run().history.episodes
    completed = [log for log in logs if log.completed]
    assert completed
    assert any(log.steps < toy.horizon for log in completed), "completed episodes stop before the horizon"
    assert all(log.steps >= 2 for log in completed)
    assert all(log.steps == toy.horizon for log in logs if not log.completed)
    closing_decisions = sum(log.steps < toy.horizon for log in completed)

    records = list(trainer.agents[0].replay)
    assert len(records) == sum(log.steps for log in logs) + closing_decisions
    assert trainer.total_steps == len(records)
    # only the closing decision is ever taken from a finished task
    assert sum(rec.k.belief[0][0] == 1.0 for rec in records) == closing_decisions
    # the completing transition and the closing decision are terminal and valued in closed form
    valued = [rec for rec in records if rec.done and rec.terminal_value]
    assert len(valued) == len(completed) + closing_decisions
    assert all(rec.terminal_value == pytest.approx(0.95 * 104.0 / 0.05) for rec in valued)
    assert all(rec.k_next.belief[0][0] == 1.0 for rec in valued)


def _smoke_trainer(seed=0, **overrides):
    config = load_scenario("heterogeneous")
    train_cfg = TrainConfig(**{**SMOKE_TRAIN, "seed": seed, **overrides})
    return DecentralizedTrainer(config, reward_preset("with_idle_medium_trp"), train_cfg)


def test_training_is_reproducible():
    first = _smoke_trainer(seed=4).run()
    second = _smoke_trainer(seed=4).run()
    for a, b in zip(first.nets, second.nets):
        for pa, pb in zip(a.parameters(), b.parameters()):
            np.testing.assert_array_equal(pa, pb)
    assert first.history == second.history
    assert len(first.history.episodes) == SMOKE_TRAIN["episodes"]


def test_seeds_give_different_runs():
    first = _smoke_trainer(seed=4).run()
    other = _smoke_trainer(seed=5).run()
    assert not np.array_equal(first.nets[0].weights[0], other.nets[0].weights[0])


def test_zero_episodes_returns_initial_networks():
    trainer = _smoke_trainer(seed=2, episodes=0)
    result = trainer.run()
    assert result.history.episodes == []
    assert result.target_syncs == 0
    dims = trainer.train_cfg.layer_dims(trainer.scenario)
    for spec, net in zip(trainer.scenario.agents, result.nets):
        expected = QNet.initialize(dims, named_stream(2, f"init/agent{spec.id}"))
        for pa, pb in zip(net.parameters(), expected.parameters()):
            np.testing.assert_array_equal(pa, pb)


def test_episode_logs():
    trainer = _smoke_trainer(seed=1)
    result = trainer.run()
    closing_decisions = 0
    for index, log in enumerate(result.history.episodes):
        assert log.episode == index
        assert log.epsilon == pytest.approx(TrainConfig(**SMOKE_TRAIN).epsilon(index))
        assert log.steps <= 30
        if not log.completed:
            assert log.steps == 30
        elif log.steps < 30:
            closing_decisions += 1
    assert result.history.episodes[-1].mean_loss is not None
    assert trainer.total_steps == sum(log.steps for log in result.history.episodes) + closing_decisions
    assert result.target_syncs == trainer.total_steps // SMOKE_TRAIN["target_sync_period"]


def test_full_horizon_episodes_on_request():
    trainer = _smoke_trainer(seed=1, stop_at_completion=False)
    result = trainer.run()
    assert all(log.steps == 30 for log in result.history.episodes)
    assert trainer.total_steps == 90
    assert result.target_syncs == 90 // SMOKE_TRAIN["target_sync_period"]
    assert not any(rec.terminal_value for agent in trainer.agents for rec in agent.replay)


def test_completion_rate():
    history = TrainingHistory()
    for index, completed in enumerate([False, True, True, False]):
        history.add_episode(EpisodeLog(episode=index, mean_episode_reward=0.0, epsilon=1.0, steps=30, completed=completed))
    assert history.completion_rate() == 0.5
    assert history.completion_rate(2) == 0.5
    assert history.completion_rate(3) == pytest.approx(2 / 3)
    assert TrainingHistory().completion_rate() == 0.0


def test_dominance_warning_is_printed(capsys):
    config = load_scenario("heterogeneous")
    DecentralizedTrainer(config, reward_preset("with_idle_high_trp"), TrainConfig(**{**SMOKE_TRAIN, "episodes": 0})).run()
    out = capsys.readouterr().out
    assert "WARNING" in out
    assert "agent 1" in out


def test_quiet_run_prints_nothing(capsys):
    _smoke_trainer(episodes=1).run()
    assert capsys.readouterr().out == ""


def test_reward_configs_must_match_team():
    config = load_scenario("heterogeneous")
    with pytest.raises(ConfigError):
        DecentralizedTrainer(config, [RewardConfig()] * 4, TrainConfig(**SMOKE_TRAIN))
    with pytest.raises(ConfigError):
        DecentralizedTrainer(config, RewardConfig(level_rewards=[10.0, 0.0]), TrainConfig(**SMOKE_TRAIN))
