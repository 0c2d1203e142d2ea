# stdlib imports
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, Sequence, Tuple

# external imports
import numpy as np

# internal imports
from src.exceptions import LifecycleError, ShapeError


def encode_actions(actions: Any, n_actions: int) -> np.ndarray:
    """One-hot encode action ids of any shape; a trailing axis of width ``n_actions`` is added."""
    return np.eye(n_actions)[np.asarray(actions, dtype=np.int64)]


def baseline_encoding(n_actions: int) -> np.ndarray:
    """Encoding of the default action ``u~``: the zero vector, outside the one-hot image."""
    return np.zeros(n_actions)


@dataclass(frozen=True)
class DecPomdpSpec:
    """
    Static description of a cooperative, shared-reward Dec-POMDP.

    Attributes:
        n_agents (int): number of agents.
        action_space_size (int): discrete actions per agent.
        obs_dim (int): length of each agent's local observation.
        state_obs_dim (int): length of each agent's unrestricted observation; the
            global state is the concatenation of the ``n_agents`` unrestricted
            observations and is what the central critic consumes.
        episode_limit (int): maximum number of steps in an episode.
        gamma (float): discount factor.
        groups (Tuple[int, ...]): group label per agent; equal labels share critic extractors.
        no_op_action (int): a legal action id that leaves the agent idle.
    """

    n_agents: int
    action_space_size: int
    obs_dim: int
    state_obs_dim: int
    episode_limit: int
    gamma: float = 0.99
    groups: Tuple[int, ...] = ()
    no_op_action: int = 0

    def __post_init__(self):
        if self.n_agents < 1:
            raise ValueError(f"n_agents must be at least 1, got {self.n_agents}.")
        if self.action_space_size < 2:
            raise ValueError(
                f"action_space_size must be at least 2, got {self.action_space_size}."
            )
        if self.episode_limit < 1:
            raise ValueError(f"episode_limit must be at least 1, got {self.episode_limit}.")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}.")
        if not self.groups:
            object.__setattr__(self, "groups", (0,) * self.n_agents)
        if len(self.groups) != self.n_agents:
            raise ValueError(
                f"groups has {len(self.groups)} labels for {self.n_agents} agents."
            )
        if not 0 <= self.no_op_action < self.action_space_size:
            raise ValueError(f"no_op_action {self.no_op_action} is not a valid action id.")

    @property
    def default_action_encoding(self) -> np.ndarray:
        """Encoding of the baseline action fed to the critic."""
        return baseline_encoding(self.action_space_size)

    def encode_actions(self, actions: Sequence[int]) -> np.ndarray:
        """One-hot encode a joint action, shape ``(n_agents, action_space_size)``."""
        return encode_actions(actions, self.action_space_size)


@dataclass(frozen=True)
class JointAction:
    """One action id per agent."""

    actions: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "actions", tuple(int(a) for a in self.actions))

    def validate(self, spec: DecPomdpSpec) -> None:
        if len(self.actions) != spec.n_agents:
            raise ShapeError(
                f"Joint action has {len(self.actions)} entries for {spec.n_agents} agents."
            )
        for agent, action in enumerate(self.actions):
            if not 0 <= action < spec.action_space_size:
                raise ValueError(
                    f"Agent {agent} chose action {action}, outside 0..{spec.action_space_size - 1}."
                )


@dataclass
class StepResult:
    """
    Output of ``reset``/``step``.

    Attributes:
        observations (np.ndarray): local observations, shape ``(n_agents, obs_dim)``.
        reward (float): shared team reward.
        done (bool): True once the episode has ended.
        global_state (np.ndarray): concatenated unrestricted observations,
            length ``n_agents * state_obs_dim``.
        info (Dict[str, Any]): environment-specific extras.
    """

    observations: np.ndarray
    reward: float
    done: bool
    global_state: np.ndarray
    info: Dict[str, Any] = field(default_factory=dict)

    def state_observations(self, n_agents: int) -> np.ndarray:
        """Global state split into one unrestricted observation per agent."""
        return self.global_state.reshape(n_agents, -1)


class DecPomdpEnv(ABC):
    """
    Generative environment contract.

    Subclasses implement ``_initial_state``, ``_transition`` and ``_observe``; this
    base class owns the lifecycle (step counting, episode limit, validation).

    Attributes:
        spec (DecPomdpSpec)
    """

    def __init__(self, spec: DecPomdpSpec) -> None:
        self.spec = spec
        self._t = 0
        self._done = True

    @property
    def t(self) -> int:
        return self._t

    @property
    def done(self) -> bool:
        return self._done

    def reset(self, rng: np.random.Generator) -> StepResult:
        self._t = 0
        self._done = False
        self._initial_state(rng)
        observations, global_state = self._observe()
        return StepResult(observations, 0.0, False, global_state)

    def step(self, joint_action: JointAction) -> StepResult:
        if self._done:
            raise LifecycleError("step() called on a finished episode; call reset() first.")
        joint_action.validate(self.spec)
        reward, terminal = self._transition(joint_action)
        self._t += 1
        self._done = terminal or self._t >= self.spec.episode_limit
        observations, global_state = self._observe()
        return StepResult(
            observations, float(reward), self._done, global_state, {"success": self.success}
        )

    @property
    @abstractmethod
    def success(self) -> bool:
        """Whether the current episode has met the environment's success predicate."""

    @abstractmethod
    def _initial_state(self, rng: np.random.Generator) -> None:
        pass

    @abstractmethod
    def _transition(self, joint_action: JointAction) -> Tuple[float, bool]:
        """Advance the state; return ``(reward, terminal)``."""

    @abstractmethod
    def _observe(self) -> Tuple[np.ndarray, np.ndarray]:
        """Return ``(observations, global_state)`` for the current state."""
