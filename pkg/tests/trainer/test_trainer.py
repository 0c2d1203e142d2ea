"""Tests for the trainer module."""

# standard library imports:
import os
from unittest import TestCase, skipUnless

# library imports:
import numpy as np
from loguru import logger

# package imports:
from src.approximator.agent import AgentNet
from src.approximator.critic import CriticNet
from src.approximator.optimizers import make_optimizer
from src.dec_pomdp.gridworld import TeamGridworld
from src.dec_pomdp.matrix_game import MatrixGame
from src.exceptions import ConfigError
from src.trainer.core import (
    Episode,
    Hyperparams,
    ReplayBuffer,
    Trainer,
    agent_update,
    credit_regression,
    collate,
    critic_td_update,
    epsilon,
    evaluate,
    run_episode,
    sync_target,
    td_targets,
)

RUN_SLOW = bool(os.environ.get("RUN_SLOW"))
EPS = 1e-5


def constant_critic(groups, obs_dim, action_dim, value):
    critic = CriticNet(groups, obs_dim, action_dim, units=4)
    critic.params.view("head.b")[0] = value
    return critic


def make_episode(rewards, n=2, obs_dim=1, state_dim=1, hidden=4, actions=None):
    T = len(rewards)
    return Episode(
        observations=np.zeros((T, n, obs_dim)),
        state_observations=np.zeros((T, n, state_dim)),
        hidden=np.zeros((T, n, hidden)),
        actions=np.zeros((T, n), dtype=np.int64) if actions is None else np.asarray(actions),
        rewards=np.asarray(rewards, dtype=np.float64),
    )


class TestHyperparams(TestCase):
    """Tests for the hyperparameter table."""

    def test_defaults(self) -> None:
        hp = Hyperparams.defaults()
        self.assertEqual(hp.batch_size, 32)
        self.assertEqual(hp.buffer_capacity, 1000)
        self.assertEqual(hp.target_sync_interval, 200)
        self.assertEqual(hp.eval_interval, 100)
        self.assertEqual(hp.agent_lr, 0.005)
        self.assertEqual(hp.critic_lr, 0.01)
        self.assertEqual(hp.gamma, 0.99)
        self.assertAlmostEqual(hp.sigma, 0.001)

    def test_invalid_gamma(self) -> None:
        with self.assertRaises(ConfigError) as ctx:
            Hyperparams.defaults(gamma=1.5)
        self.assertEqual(ctx.exception.field, "gamma")

    def test_invalid_values(self) -> None:
        for overrides in (
            {"batch_size": 0},
            {"epsilon_end": 0.5, "epsilon_start": 0.2},
            {"credit_strategy": "random"},
            {"critic_optimizer": "sgd"},
            {"bootstrap": "sometimes"},
            {"mc_samples": 0},
        ):
            with self.assertRaises(ConfigError):
                Hyperparams.defaults(**overrides)

    def test_unknown_key(self) -> None:
        with self.assertRaises(ConfigError):
            Hyperparams.defaults(learning_rate=0.1)


class TestEpsilon(TestCase):
    """Tests for the exploration schedule."""

    def setUp(self) -> None:
        self.hp = Hyperparams.defaults()

    def test_schedule(self) -> None:
        self.assertEqual(epsilon(0, self.hp), 1.0)
        self.assertAlmostEqual(epsilon(500, self.hp), 0.5)
        self.assertEqual(epsilon(1000, self.hp), 0.0)
        self.assertEqual(epsilon(2000, self.hp), 0.0)

    def test_monotone(self) -> None:
        values = [epsilon(e, self.hp) for e in range(0, 1500, 7)]
        self.assertTrue(all(a >= b for a, b in zip(values, values[1:])))

    def test_negative_episode(self) -> None:
        with self.assertRaises(ValueError):
            epsilon(-1, self.hp)


class TestReplayBuffer(TestCase):
    """Tests for the episode buffer."""

    def test_fifo_eviction(self) -> None:
        buffer = ReplayBuffer(3)
        for r in range(5):
            buffer.add(make_episode([float(r)]))
        self.assertEqual(len(buffer), 3)
        self.assertEqual([e.rewards[0] for e in buffer], [2.0, 3.0, 4.0])

    def test_sample_without_replacement(self) -> None:
        buffer = ReplayBuffer(10)
        for r in range(10):
            buffer.add(make_episode([float(r)]))
        sample = buffer.sample(10, np.random.default_rng(0))
        self.assertEqual(sorted(e.rewards[0] for e in sample), list(map(float, range(10))))

    def test_empty(self) -> None:
        with self.assertRaises(ValueError):
            ReplayBuffer(2).sample(1, np.random.default_rng(0))


class TestCollate(TestCase):
    """Tests for padding episodes into a batch."""

    def test_mask_and_terminal(self) -> None:
        batch = collate([make_episode([1.0, 2.0, 3.0]), make_episode([4.0])])
        np.testing.assert_array_equal(batch.mask, [[1, 1, 1], [1, 0, 0]])
        np.testing.assert_array_equal(batch.terminated, [[False, False, True], [True, False, False]])
        np.testing.assert_array_equal(batch.rewards, [[1, 2, 3], [4, 0, 0]])
        self.assertEqual(batch.state_observations.shape, (2, 3, 2, 1))

    def test_empty(self) -> None:
        with self.assertRaises(ValueError):
            collate([])


class TestRunEpisode(TestCase):
    """Tests for epsilon-greedy rollouts."""

    def setUp(self) -> None:
        self.env = MatrixGame()
        rng = np.random.default_rng(0)
        self.agents = [AgentNet(1, 3, hidden=4, units=4, rng=rng) for _ in range(2)]

    def test_greedy_is_deterministic(self) -> None:
        env = TeamGridworld()
        rng = np.random.default_rng(1)
        agents = [AgentNet(env.spec.obs_dim, 5, hidden=4, units=4, rng=rng) for _ in range(3)]
        a = run_episode(agents, env, 0.0, np.random.default_rng(5))
        b = run_episode(agents, env, 0.0, np.random.default_rng(5))
        np.testing.assert_array_equal(a.actions, b.actions)
        np.testing.assert_array_equal(a.rewards, b.rewards)
        self.assertLessEqual(len(a), env.spec.episode_limit)

    def test_zero_agents_pick_lowest_action(self) -> None:
        agents = [AgentNet(1, 3, hidden=2, units=2) for _ in range(2)]
        episode = run_episode(agents, self.env, 0.0, np.random.default_rng(0))
        np.testing.assert_array_equal(episode.actions, [[0, 0]])
        self.assertEqual(episode.rewards[0], 0.0)

    def test_uniform_exploration(self) -> None:
        rng = np.random.default_rng(2)
        episodes = 20_000
        counts = np.zeros((3, 3))
        for _ in range(episodes):
            actions = run_episode(self.agents, self.env, 1.0, rng).actions[0]
            counts[actions[0], actions[1]] += 1
        np.testing.assert_allclose(counts / episodes, np.full((3, 3), 1 / 9), atol=0.02)

    def test_agent_count_mismatch(self) -> None:
        with self.assertRaises(ValueError):
            run_episode(self.agents[:1], self.env, 0.0, np.random.default_rng(0))

    def test_recorded_shapes(self) -> None:
        episode = run_episode(self.agents, self.env, 0.5, np.random.default_rng(3))
        self.assertEqual(episode.observations.shape, (1, 2, 1))
        self.assertEqual(episode.hidden.shape, (1, 2, 8))
        np.testing.assert_array_equal(episode.hidden[0], 0.0)
        np.testing.assert_array_equal(episode.terminated, [True])


class TestCriticUpdate(TestCase):
    """Tests for the TD stage."""

    def setUp(self) -> None:
        self.hp = Hyperparams.defaults(gamma=0.99)

    def test_targets(self) -> None:
        target = constant_critic((0, 0), 1, 3, 2.0)
        batch = collate([make_episode([1.0, 5.0]), make_episode([1.0])])
        y = td_targets(target, batch, 0.99)
        self.assertAlmostEqual(y[0, 0], 2.98)
        self.assertEqual(y[0, 1], 5.0)
        self.assertEqual(y[1, 0], 1.0)

    def test_fixed_point(self) -> None:
        critic = constant_critic((0, 0), 1, 3, 3.0)
        target = constant_critic((0, 0), 1, 3, 0.0)
        before = critic.params.data.copy()
        batch = collate([make_episode([3.0]), make_episode([3.0])])
        loss = critic_td_update(critic, target, batch, make_optimizer("adam", 0.01), self.hp)
        self.assertEqual(loss, 0.0)
        np.testing.assert_array_equal(critic.params.data, before)

    def test_loss_decreases(self) -> None:
        rng = np.random.default_rng(4)
        critic = CriticNet((0, 0), 1, 3, units=8, rng=rng)
        target = CriticNet((0, 0), 1, 3, units=8)
        batch = collate([make_episode([10.0], actions=[[2, 2]]), make_episode([-4.0], actions=[[0, 2]])])
        opt = make_optimizer("adam", 0.01)
        first = critic_td_update(critic, target, batch, opt, self.hp)
        for _ in range(200):
            last = critic_td_update(critic, target, batch, opt, self.hp)
        self.assertLess(last, first)

    def test_greedy_bootstrap_needs_agents(self) -> None:
        hp = Hyperparams.defaults(bootstrap="greedy")
        critic = constant_critic((0, 0), 1, 3, 0.0)
        batch = collate([make_episode([1.0, 0.0])])
        with self.assertRaises(ValueError):
            critic_td_update(critic, critic, batch, make_optimizer("adam", 0.01), hp)
        agents = [AgentNet(1, 3, hidden=2, units=2) for _ in range(2)]
        loss = critic_td_update(critic, constant_critic((0, 0), 1, 3, 0.0), batch, make_optimizer("adam", 0.01), hp, agents)
        self.assertAlmostEqual(loss, 0.5)

    def test_sync_target(self) -> None:
        critic = constant_critic((0,), 1, 3, 1.0)
        target = constant_critic((0,), 1, 3, 0.0)
        self.assertFalse(sync_target(critic, target, 201, self.hp))
        self.assertEqual(target.params.view("head.b")[0], 0.0)
        self.assertTrue(sync_target(critic, target, 200, self.hp))
        np.testing.assert_array_equal(target.params.data, critic.params.data)


class TestAgentUpdate(TestCase):
    """Tests for the credit-regression stage."""

    def setUp(self) -> None:
        rng = np.random.default_rng(5)
        self.critic = CriticNet((0, 0), 1, 3, units=8, rng=rng)
        self.agents = [AgentNet(1, 3, hidden=2, units=4, rng=rng) for _ in range(2)]
        self.opts = [make_optimizer("rmsprop", 0.005) for _ in self.agents]
        self.batch = collate(
            [make_episode([1.0], actions=[[a, b]]) for a in range(3) for b in range(3)]
        )

    def test_update_changes_agents_only(self) -> None:
        critic_before = self.critic.params.data.copy()
        agent_before = self.agents[0].params.data.copy()
        hp = Hyperparams.defaults(credit_strategy="shapley_exact")
        update = agent_update(self.agents, self.critic, self.batch, hp, np.random.default_rng(0), self.opts)
        self.assertEqual(update.credits.shape, (9, 2))
        self.assertGreaterEqual(update.loss, 0.0)
        np.testing.assert_array_equal(self.critic.params.data, critic_before)
        self.assertFalse(np.array_equal(self.agents[0].params.data, agent_before))

    def test_loss_is_mean_squared_credit_error(self) -> None:
        hp = Hyperparams.defaults(credit_strategy="uniform")
        agents = [AgentNet(1, 3, hidden=2, units=2) for _ in range(2)]
        opts = [make_optimizer("rmsprop", 0.005) for _ in agents]
        update = agent_update(agents, self.critic, self.batch, hp, np.random.default_rng(0), opts)
        self.assertAlmostEqual(update.loss, float(np.mean(update.credits**2)))

    def test_budget(self) -> None:
        hp = Hyperparams.defaults(credit_strategy="shapley_mc", mc_samples=2)
        update = agent_update(self.agents, self.critic, self.batch, hp, np.random.default_rng(0), self.opts)
        self.assertLessEqual(update.critic_evaluations, 9 * (2 * 2 * 2 + 1))

    def test_single_agent_single_step(self) -> None:
        rng = np.random.default_rng(11)
        critic = CriticNet((0,), 1, 3, units=8, rng=rng)
        agent = AgentNet(1, 3, hidden=2, units=4, rng=rng)
        batch = collate([make_episode([1.0], n=1, actions=[[2]])])
        q, _ = agent.unroll(batch.observations[:, :, 0], batch.initial_hidden[:, 0])
        hp = Hyperparams.defaults(credit_strategy="shapley_exact")
        update = agent_update(
            [agent], critic, batch, hp, rng, [make_optimizer("rmsprop", 0.005)]
        )
        obs = batch.state_observations[0, 0]
        expected_credit = critic.evaluate(obs, np.eye(3)[[2]]) - critic.evaluate(obs, np.zeros((1, 3)))
        self.assertAlmostEqual(update.credits[0, 0], expected_credit)
        self.assertAlmostEqual(update.loss, (q[0, 0, 2] - expected_credit) ** 2)

    def test_baseline_encoding(self) -> None:
        hp = Hyperparams.defaults(credit_strategy="shapley_exact")
        default = agent_update(self.agents, self.critic, self.batch, hp, np.random.default_rng(0), self.opts)
        zeros = agent_update(
            self.agents, self.critic, self.batch, hp, np.random.default_rng(0), self.opts, np.zeros(3)
        )
        np.testing.assert_array_equal(default.credits, zeros.credits)
        first_action = agent_update(
            self.agents, self.critic, self.batch, hp, np.random.default_rng(0), self.opts,
            np.array([1.0, 0.0, 0.0]),
        )
        # rows 0..2 are the episodes where agent 0 took action 0
        np.testing.assert_array_equal(first_action.credits[:3, 0], np.zeros(3))


class TestCreditRegression(TestCase):
    """Gradient check for the per-agent credit-regression loss."""

    def setUp(self) -> None:
        rng = np.random.default_rng(12)
        self.agent = AgentNet(2, 3, hidden=3, units=4, rng=rng)
        self.agent.params.data[:] = 0.5 * rng.normal(size=len(self.agent.params))
        episodes = []
        for steps in (3, 2):
            episodes.append(
                Episode(
                    observations=rng.normal(size=(steps, 2, 2)),
                    state_observations=np.zeros((steps, 2, 1)),
                    hidden=0.1 * rng.normal(size=(steps, 2, 6)),
                    actions=rng.integers(3, size=(steps, 2)),
                    rewards=np.zeros(steps),
                )
            )
        self.batch = collate(episodes)
        self.targets = rng.normal(size=self.batch.actions.shape)

    def loss(self) -> float:
        return credit_regression(self.agent, self.batch, 1, self.targets, 0.25)[0]

    def test_gradient_matches_finite_differences(self) -> None:
        _, grad = credit_regression(self.agent, self.batch, 1, self.targets, 0.25)
        data = self.agent.params.data
        numerical = np.zeros_like(data)
        for j in range(len(data)):
            saved = data[j]
            data[j] = saved + EPS
            plus = self.loss()
            data[j] = saved - EPS
            minus = self.loss()
            data[j] = saved
            numerical[j] = (plus - minus) / (2 * EPS)
        np.testing.assert_allclose(grad.data, numerical, rtol=1e-4, atol=1e-7)

    def test_padding_is_ignored(self) -> None:
        before = self.loss()
        self.targets[1, 2] += 100.0
        self.assertEqual(self.loss(), before)


class TestEvaluate(TestCase):
    """Tests for greedy evaluation."""

    def test_zero_agents(self) -> None:
        agents = [AgentNet(1, 3, hidden=2, units=2) for _ in range(2)]
        result = evaluate(agents, MatrixGame(), 5, np.random.default_rng(0))
        self.assertEqual(result.mean_return, 0.0)
        self.assertEqual(result.success_rate, 0.0)

    def test_no_episodes(self) -> None:
        agents = [AgentNet(1, 3, hidden=2, units=2) for _ in range(2)]
        with self.assertRaises(ValueError):
            evaluate(agents, MatrixGame(), 0, np.random.default_rng(0))


class TestTrainer(TestCase):
    """Tests for the training loop."""

    def setUp(self) -> None:
        self.hp = Hyperparams.defaults(
            training_episodes=40,
            batch_size=8,
            eval_interval=20,
            eval_episodes=3,
            exploration_episodes=20,
            target_sync_interval=10,
            dense_units=8,
            hidden_units=8,
            seed=3,
        )

    def test_records(self) -> None:
        records = list(Trainer(MatrixGame, self.hp).run())
        self.assertEqual([r.episode for r in records], [0, 20, 40])
        self.assertTrue(np.isnan(records[0].critic_loss))
        self.assertFalse(np.isnan(records[1].critic_loss))
        self.assertEqual(records[0].epsilon, 1.0)
        self.assertEqual(records[2].epsilon, 0.0)

    def test_stage_order(self) -> None:
        trainer = Trainer(MatrixGame, self.hp)
        stats = [trainer.iterate() for _ in range(12)]
        self.assertTrue(all(s is None for s in stats[:7]))
        for s in stats[7:]:
            self.assertEqual(s.critic_version_for_credits, s.critic_version_after_td)
        self.assertEqual(trainer.critic.params.version, 5)

    def test_deterministic(self) -> None:
        first = [r.as_row() for r in Trainer(MatrixGame, self.hp).run()]
        second = [r.as_row() for r in Trainer(MatrixGame, self.hp).run()]
        for a, b in zip(first, second):
            np.testing.assert_array_equal(list(a.values()), list(b.values()))

    def test_on_episode_callback(self) -> None:
        seen = []
        list(Trainer(MatrixGame, self.hp).run(on_episode=lambda t: seen.append(t.episode)))
        self.assertEqual(seen, list(range(1, 41)))

    def test_gridworld_runs(self) -> None:
        hp = Hyperparams.defaults(
            training_episodes=6, batch_size=4, eval_interval=3, eval_episodes=1,
            dense_units=8, hidden_units=8, credit_strategy="plain_cf",
        )
        records = list(Trainer(lambda: TeamGridworld(episode_limit=5), hp).run())
        self.assertEqual(len(records), 3)


@skipUnless(RUN_SLOW, "set RUN_SLOW=1 to run learning benchmarks")
class TestMatrixGameLearning(TestCase):
    """Shapley-MC learns the optimal joint action of the matrix game."""

    def test_reaches_optimum(self) -> None:
        solved = 0
        for seed in range(5):
            hp = Hyperparams.defaults(training_episodes=5000, seed=seed)
            records = list(Trainer(MatrixGame, hp).run())
            solved += records[-1].success_rate >= 0.95
        self.assertGreaterEqual(solved, 4)


@skipUnless(RUN_SLOW, "set RUN_SLOW=1 to run learning benchmarks")
class TestGridworldLearning(TestCase):
    """Shapley-MC approaches the optimal return of the switch gridworld; plain_cf runs alongside."""

    def test_reaches_optimal_return(self) -> None:
        def env():
            return TeamGridworld(starts=[(2, 2)] * 3)

        solved = 0
        for seed in range(5):
            curves = {}
            for strategy in ("shapley_mc", "plain_cf"):
                hp = Hyperparams.defaults(seed=seed, credit_strategy=strategy)
                curves[strategy] = [r.eval_return for r in Trainer(env, hp).run()]
                logger.info(f"seed {seed} {strategy}: {np.round(curves[strategy], 3).tolist()}")
            self.assertEqual(len(curves["plain_cf"]), len(curves["shapley_mc"]))
            solved += max(curves["shapley_mc"]) >= 0.9 * env().optimal_return()
        self.assertGreaterEqual(solved, 3)
