"""Tests for the dec_pomdp module."""

# standard library imports:
from unittest import TestCase

# library imports:
import numpy as np

# package imports:
from src.dec_pomdp.core import DecPomdpSpec, JointAction
from src.dec_pomdp.gridworld import DOWN, LEFT, NO_OP, RIGHT, UP, TeamGridworld
from src.dec_pomdp.matrix_game import DEFAULT_PAYOFF, MatrixGame
from src.dec_pomdp.null_agent import NullAgentWrapper
from src.exceptions import LifecycleError, ShapeError


class TestSpec(TestCase):
    """Tests for DecPomdpSpec and JointAction."""

    def test_default_groups(self) -> None:
        spec = DecPomdpSpec(n_agents=3, action_space_size=4, obs_dim=2, state_obs_dim=2, episode_limit=5)
        self.assertEqual(spec.groups, (0, 0, 0))
        np.testing.assert_array_equal(spec.default_action_encoding, np.zeros(4))

    def test_encode_actions(self) -> None:
        spec = DecPomdpSpec(n_agents=2, action_space_size=3, obs_dim=1, state_obs_dim=1, episode_limit=1)
        np.testing.assert_array_equal(spec.encode_actions([2, 0]), [[0, 0, 1], [1, 0, 0]])

    def test_invalid_spec(self) -> None:
        with self.assertRaises(ValueError):
            DecPomdpSpec(n_agents=2, action_space_size=3, obs_dim=1, state_obs_dim=1, episode_limit=1, gamma=1.5)
        with self.assertRaises(ValueError):
            DecPomdpSpec(n_agents=2, action_space_size=3, obs_dim=1, state_obs_dim=1, episode_limit=1, groups=(0,))

    def test_joint_action_validation(self) -> None:
        spec = MatrixGame().spec
        with self.assertRaises(ShapeError):
            JointAction((0,)).validate(spec)
        with self.assertRaises(ValueError):
            JointAction((0, 3)).validate(spec)


class TestMatrixGame(TestCase):
    """Tests for the one-step matrix game."""

    def setUp(self) -> None:
        self.env = MatrixGame()
        self.rng = np.random.default_rng(0)

    def test_reset(self) -> None:
        result = self.env.reset(self.rng)
        np.testing.assert_array_equal(result.observations, np.zeros((2, 1)))
        self.assertEqual(result.reward, 0.0)
        self.assertFalse(result.done)

    def test_step_pays_table_entry(self) -> None:
        for a1 in range(3):
            for a2 in range(3):
                self.env.reset(self.rng)
                result = self.env.step(JointAction((a1, a2)))
                self.assertEqual(result.reward, DEFAULT_PAYOFF[a1][a2])
                self.assertTrue(result.done)

    def test_unique_optimum(self) -> None:
        self.assertEqual(self.env.optimum, (2, 2))
        self.assertEqual(self.env.optimal_return(), 10.0)
        self.env.reset(self.rng)
        self.assertTrue(self.env.step(JointAction((2, 2))).info["success"])
        self.env.reset(self.rng)
        self.assertFalse(self.env.step(JointAction((0, 0))).info["success"])

    def test_step_after_done(self) -> None:
        self.env.reset(self.rng)
        self.env.step(JointAction((0, 0)))
        with self.assertRaises(LifecycleError):
            self.env.step(JointAction((0, 0)))

    def test_step_before_reset(self) -> None:
        with self.assertRaises(LifecycleError):
            MatrixGame().step(JointAction((0, 0)))

    def test_payoff_must_have_unique_optimum(self) -> None:
        with self.assertRaises(ValueError):
            MatrixGame(payoff=[[1, 1], [0, 0]])


class TestTeamGridworld(TestCase):
    """Tests for the switch gridworld."""

    def setUp(self) -> None:
        self.env = TeamGridworld(starts=[(2, 2), (2, 2), (2, 2)])

    def test_dimensions(self) -> None:
        result = self.env.reset(np.random.default_rng(0))
        self.assertEqual(result.observations.shape, (3, self.env.spec.obs_dim))
        self.assertEqual(self.env.spec.obs_dim, 3 * 9 + 2)
        self.assertEqual(
            result.state_observations(3).shape, (3, self.env.spec.state_obs_dim)
        )

    def test_seeded_reset_is_deterministic(self) -> None:
        env = TeamGridworld()
        a = env.reset(np.random.default_rng(7))
        b = env.reset(np.random.default_rng(7))
        np.testing.assert_array_equal(a.observations, b.observations)
        np.testing.assert_array_equal(a.global_state, b.global_state)

    def test_wall_blocks_move(self) -> None:
        env = TeamGridworld(starts=[(0, 0), (2, 2), (2, 2)], step_penalty=0.0, required=3)
        env.reset(np.random.default_rng(0))
        blocked = env.step(JointAction((UP, NO_OP, NO_OP)))
        self.assertEqual(env.positions[0], (0, 0))
        env.reset(np.random.default_rng(0))
        idle = env.step(JointAction((NO_OP, NO_OP, NO_OP)))
        self.assertEqual(blocked.reward, idle.reward)
        np.testing.assert_array_equal(blocked.observations, idle.observations)

    def test_reward_when_targets_held(self) -> None:
        env = TeamGridworld(starts=[(0, 1), (1, 4), (4, 3)])
        env.reset(np.random.default_rng(0))
        result = env.step(JointAction((LEFT, UP, RIGHT)))
        self.assertAlmostEqual(result.reward, 1.0 - 0.01)
        self.assertTrue(result.info["success"])

    def test_step_penalty_only(self) -> None:
        self.env.reset(np.random.default_rng(0))
        result = self.env.step(JointAction((DOWN, DOWN, DOWN)))
        self.assertAlmostEqual(result.reward, -0.01)
        self.assertFalse(self.env.success)

    def test_episode_limit(self) -> None:
        self.env.reset(np.random.default_rng(0))
        steps = 0
        done = False
        while not done:
            done = self.env.step(JointAction((NO_OP,) * 3)).done
            steps += 1
        self.assertEqual(steps, 30)

    def test_optimal_return(self) -> None:
        self.assertAlmostEqual(self.env.optimal_return(), 27 - 0.3)

    def test_optimal_return_needs_fixed_starts(self) -> None:
        with self.assertRaises(ValueError):
            TeamGridworld().optimal_return()

    def test_invalid_required(self) -> None:
        with self.assertRaises(ValueError):
            TeamGridworld(required=4)


class TestNullAgentWrapper(TestCase):
    """Tests for the null-agent wrapper."""

    def setUp(self) -> None:
        self.env = NullAgentWrapper(TeamGridworld(starts=[(2, 2), (2, 2), (2, 2)]))

    def test_spec(self) -> None:
        self.assertEqual(self.env.spec.n_agents, 4)
        self.assertEqual(self.env.spec.groups, (0, 0, 0, 1))
        self.assertEqual(self.env.null_agent, 3)

    def test_reset_appends_constant_observation(self) -> None:
        inner = TeamGridworld(starts=[(2, 2), (2, 2), (2, 2)]).reset(np.random.default_rng(0))
        result = self.env.reset(np.random.default_rng(0))
        np.testing.assert_array_equal(result.observations[:3], inner.observations)
        np.testing.assert_array_equal(result.observations[3], np.zeros(self.env.spec.obs_dim))

    def test_null_action_changes_nothing(self) -> None:
        outcomes = []
        for null_action in range(5):
            self.env.reset(np.random.default_rng(0))
            result = self.env.step(JointAction((UP, LEFT, RIGHT, null_action)))
            outcomes.append(result)
        for other in outcomes[1:]:
            self.assertEqual(other.reward, outcomes[0].reward)
            np.testing.assert_array_equal(other.observations, outcomes[0].observations)
            np.testing.assert_array_equal(other.global_state, outcomes[0].global_state)

    def test_matrix_game_success_delegates(self) -> None:
        env = NullAgentWrapper(MatrixGame())
        env.reset(np.random.default_rng(0))
        result = env.step(JointAction((2, 2, 0)))
        self.assertEqual(result.reward, 10.0)
        self.assertTrue(result.info["success"])
