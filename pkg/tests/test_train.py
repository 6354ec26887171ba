import json
from importlib import resources

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tidyup import gamegen, kg, train
from tidyup import tensor as T
from tidyup.agents import AgentConfig, NeuralAgent, OracleAgent, PolicyOutput, RandomAgent
from tidyup.train import (
    EmptyEpisode,
    EpisodeLog,
    StepRecord,
    TrainConfig,
    a2c_loss,
    discounted_returns,
    evaluate,
    run_episode,
    train_agent,
)

from test_agents import EMB, SMALL, make_agent


class LookAgent:
    """Deterministic no-op policy; never finishes a game."""

    def start_episode(self, game, seed):
        pass

    def act(self, observation, admissible, inventory_names, mode="greedy"):
        index = next(i for i, (_, s) in enumerate(admissible) if s == "look")
        zero = T.Tensor(np.zeros(()))
        probs = np.zeros(len(admissible))
        probs[index] = 1.0
        return PolicyOutput(probs=probs, chosen=index, value=zero, log_prob=zero,
                            entropy=zero, attention_nodes=[], attention={})


class TestDiscountedReturns:
    def test_single_step(self):
        assert discounted_returns([1.0], 0.9) == [1.0]

    def test_three_step_geometric(self):
        assert np.allclose(discounted_returns([0.0, 0.0, 1.0], 0.9), [0.81, 0.9, 1.0])

    @given(st.lists(st.floats(-2, 2), min_size=1, max_size=30),
           st.floats(0.05, 1.0))
    def test_recursion_holds_exactly(self, rewards, gamma):
        returns = discounted_returns(rewards, gamma)
        for t in range(len(rewards) - 1):
            assert returns[t] == rewards[t] + gamma * returns[t + 1]
        assert returns[-1] == rewards[-1]


def fake_log(rewards, values, log_probs, entropies):
    steps = []
    for t, (r, v, lp, h) in enumerate(zip(rewards, values, log_probs, entropies)):
        steps.append(StepRecord(
            t=t + 1, observation="", admissible=["look"], action_index=0, action="look",
            reward=r, score=0, done=False,
            value=T.Tensor(np.asarray(v)),
            log_prob=T.Tensor(np.asarray(lp)),
            entropy=T.Tensor(np.asarray(h)),
        ))
    return EpisodeLog(steps=steps, total_reward=sum(rewards),
                      normalized_score=0.0, game_seed=0)


class TestA2CLoss:
    def test_zero_rewards_zero_values_leaves_entropy_only(self):
        log = fake_log([0.0, 0.0], [0.0, 0.0], [-1.0, -2.0], [0.5, 0.7])
        config = TrainConfig(episodes=1, runs=1, entropy_coef=0.01)
        loss, parts = a2c_loss(log, config)
        assert parts["policy_loss"] == 0.0
        assert parts["value_loss"] == 0.0
        assert float(loss.data) == pytest.approx(-0.01 * 1.2)

    def test_single_step_return(self):
        log = fake_log([1.0], [0.0], [-1.0], [0.0])
        _, parts = a2c_loss(log, TrainConfig(episodes=1, runs=1, gamma=0.9))
        assert parts["returns"] == [1.0]

    def test_empty_episode_raises(self):
        log = EpisodeLog(steps=[], total_reward=0.0, normalized_score=0.0, game_seed=0)
        with pytest.raises(EmptyEpisode):
            a2c_loss(log, TrainConfig(episodes=1, runs=1))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(episodes=1, runs=1, gamma=0.0)
        with pytest.raises(ValueError):
            TrainConfig(episodes=0, runs=1)


class TestRunEpisode:
    def test_oracle_log_matches_optimal(self, dataset, pools):
        for seed in (1, 5, 9):
            spec = gamegen.sample_game(dataset, pools[0],
                                       gamegen.DifficultyConfig.for_tier("medium"),
                                       "train", seed=seed)
            log = run_episode(spec, OracleAgent(), mode="greedy", seed=0)
            assert len(log) == gamegen.optimal_steps(spec)
            assert log.total_reward == len(spec.goals)

    def test_max_steps_exhaustion_logs_fifty(self, easy_spec):
        log = run_episode(easy_spec, LookAgent(), mode="greedy", seed=0, max_steps=50)
        assert len(log) == 50
        assert log.steps[-1].done

    def test_same_seed_greedy_identical(self, easy_spec):
        agent, _ = make_agent()
        first = run_episode(easy_spec, agent, mode="greedy", seed=42, max_steps=10)
        agent2, _ = make_agent()
        second = run_episode(easy_spec, agent2, mode="greedy", seed=42, max_steps=10)
        assert [s.action for s in first.steps] == [s.action for s in second.steps]

    def test_entropy_bounded_by_log_action_count(self, easy_spec):
        agent, _ = make_agent()
        log = run_episode(easy_spec, agent, mode="sample", seed=1, max_steps=10)
        for step in log.steps:
            entropy = float(step.entropy.data)
            assert -1e-12 <= entropy <= np.log(len(step.admissible)) + 1e-12

    def test_transcript_schema(self, easy_spec):
        log = run_episode(easy_spec, OracleAgent(), mode="greedy", seed=0)
        for record in log.transcript():
            assert set(record) == {"t", "obs", "admissible", "action", "reward",
                                   "score", "done"}


class TestEvaluate:
    def test_oracle_is_perfect(self, dataset, pools):
        games = [gamegen.sample_game(dataset, pools[0],
                                     gamegen.DifficultyConfig.for_tier("easy"),
                                     "train", seed=s) for s in range(4)]
        metrics = evaluate(OracleAgent(), games, runs=3, seed=0)
        assert metrics.mean_score == 1.0
        assert metrics.std_score == 0.0
        expected = np.mean([gamegen.optimal_steps(g) for g in games])
        assert metrics.mean_steps == expected

    def test_random_agent_below_oracle(self, dataset, pools):
        games = [gamegen.sample_game(dataset, pools[0],
                                     gamegen.DifficultyConfig.for_tier("easy"),
                                     "train", seed=s) for s in range(3)]
        metrics = evaluate(RandomAgent(), games, runs=2, seed=0)
        assert metrics.mean_steps > 2.0

    def test_deterministic_given_seed(self, dataset, pools):
        games = [gamegen.sample_game(dataset, pools[0],
                                     gamegen.DifficultyConfig.for_tier("easy"),
                                     "train", seed=s) for s in range(2)]
        a = evaluate(RandomAgent(), games, runs=2, seed=5)
        b = evaluate(RandomAgent(), games, runs=2, seed=5)
        assert a == b


def tiny_games(count=2):
    dataset = gamegen.bundled_dataset()
    pool, _ = gamegen.split_dataset(dataset.objects, 1234)
    config = gamegen.DifficultyConfig.for_tier("easy")
    return [gamegen.sample_game(dataset, pool, config, "train", seed=s)
            for s in range(count)]


class TestTraining:
    def test_bit_reproducible_across_runs(self):
        games = tiny_games()

        def one_training():
            agent, store = make_agent(seed=9)
            config = TrainConfig(episodes=4, runs=1, seed=77, max_steps=8)
            train_agent(games, agent, store, config)
            return {name: p.data.copy() for name, p in store.items()}

        first = one_training()
        second = one_training()
        assert first.keys() == second.keys()
        for name in first:
            assert np.array_equal(first[name], second[name]), name

    def test_loss_components_finite_and_logged(self):
        games = tiny_games(1)
        agent, store = make_agent(seed=2)
        config = TrainConfig(episodes=1, runs=1, seed=3, max_steps=6)
        log = run_episode(games[0], agent, mode="sample", seed=1, max_steps=6)
        optimizer = train.make_optimizer(store, config)
        parts = train.a2c_update(log, store, config, optimizer)
        assert set(parts) >= {"loss", "policy_loss", "value_loss", "entropy"}
        assert np.isfinite(parts["loss"])

    def test_gradient_clipping_bounds_norm(self):
        store = T.ParameterStore(seed=0)
        p = store.parameter("w", (4,))
        p.grad[...] = np.array([10.0, 10.0, 10.0, 10.0])
        total = train.clip_gradients(store, max_norm=5.0)
        assert total == pytest.approx(20.0)
        assert np.linalg.norm(p.grad) == pytest.approx(5.0)

    def test_adam_and_sgd_change_parameters(self):
        for optimizer_name in ("sgd", "adam"):
            games = tiny_games(1)
            agent, store = make_agent(seed=4)
            before = {n: p.data.copy() for n, p in store.items()}
            config = TrainConfig(episodes=2, runs=1, seed=5, max_steps=6,
                                 optimizer=optimizer_name)
            train_agent(games, agent, store, config)
            changed = any(not np.array_equal(before[n], p.data) for n, p in store.items())
            assert changed


class TestExperimentMatrix:
    def test_cells_curves_and_schema(self, tmp_path, graph):
        import jsonschema

        games = {"easy": tiny_games(2)}
        config = TrainConfig(episodes=4, runs=1, seed=13, max_steps=8)

        def build_policy(strategy, mode, seed):
            agent_config = AgentConfig(strategy=strategy, mode=mode, **SMALL)
            store = T.ParameterStore(seed=seed)
            return NeuralAgent(store, agent_config, EMB, graph), store

        report = train.experiment_matrix(games, ["dc", "cdc"], ["evolve"],
                                         config, tmp_path, build_policy)
        assert len(report["cells"]) == 2
        schema = json.loads(
            resources.files("tidyup.data").joinpath("report.schema.json").read_text())
        jsonschema.validate(report, schema)
        by_strategy = {cell["strategy"]: cell for cell in report["cells"]}
        assert (by_strategy["cdc"]["subgraph"]["mean_edges"]
                <= by_strategy["dc"]["subgraph"]["mean_edges"])
        for cell in report["cells"]:
            curve = (tmp_path / cell["curve_file"]).read_text().splitlines()
            assert curve[0] == "episode,mean_score,std_score,mean_steps,std_steps"
            assert len(curve) == 1 + config.episodes
        saved = json.loads((tmp_path / "report.json").read_text())
        assert saved == report
