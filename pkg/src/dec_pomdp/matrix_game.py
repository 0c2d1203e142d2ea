# stdlib imports
from typing import Optional, Sequence, Tuple

# external imports
import numpy as np

# internal imports
from src.dec_pomdp.core import DecPomdpEnv, DecPomdpSpec, JointAction

# Two agents, three actions, unique optimum at (2, 2) with miscoordination penalties.
DEFAULT_PAYOFF = np.array(
    [
        [0.0, 1.0, -4.0],
        [1.0, 3.0, 0.0],
        [-4.0, 0.0, 10.0],
    ]
)


class MatrixGame(DecPomdpEnv):
    """
    One-step cooperative matrix game.

    Every agent observes the same constant (zero) vector; the reward is the payoff
    table entry of the joint action and the episode ends after that single step.

    Attributes:
        payoff (np.ndarray): ``n``-dimensional table with ``k`` entries per axis.
        optimum (Tuple[int, ...]): joint action with the largest payoff.
    """

    def __init__(
        self,
        payoff: Optional[Sequence] = None,
        gamma: float = 0.99,
        groups: Optional[Sequence[int]] = None,
    ) -> None:
        self.payoff = np.asarray(DEFAULT_PAYOFF if payoff is None else payoff, dtype=np.float64)
        if self.payoff.ndim < 1 or len(set(self.payoff.shape)) != 1:
            raise ValueError(f"Payoff table must be a hypercube, got shape {self.payoff.shape}.")
        n_agents, n_actions = self.payoff.ndim, self.payoff.shape[0]
        flat_best = np.flatnonzero(self.payoff == self.payoff.max())
        if len(flat_best) != 1:
            raise ValueError("Payoff table must have a unique optimal joint action.")
        self.optimum: Tuple[int, ...] = tuple(
            int(a) for a in np.unravel_index(flat_best[0], self.payoff.shape)
        )
        super().__init__(
            DecPomdpSpec(
                n_agents=n_agents,
                action_space_size=n_actions,
                obs_dim=1,
                state_obs_dim=1,
                episode_limit=1,
                gamma=gamma,
                groups=tuple(groups) if groups is not None else (),
            )
        )
        self._last_action: Optional[Tuple[int, ...]] = None

    def optimal_return(self) -> float:
        return float(self.payoff.max())

    @property
    def success(self) -> bool:
        return self._last_action == self.optimum

    def _initial_state(self, rng: np.random.Generator) -> None:
        self._last_action = None

    def _transition(self, joint_action: JointAction) -> Tuple[float, bool]:
        self._last_action = joint_action.actions
        return float(self.payoff[joint_action.actions]), True

    def _observe(self) -> Tuple[np.ndarray, np.ndarray]:
        n = self.spec.n_agents
        return np.zeros((n, self.spec.obs_dim)), np.zeros(n * self.spec.state_obs_dim)
