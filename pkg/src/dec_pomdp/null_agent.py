# stdlib imports
from typing import Tuple

# external imports
import numpy as np

# internal imports
from src.dec_pomdp.core import DecPomdpEnv, DecPomdpSpec, JointAction


class NullAgentWrapper(DecPomdpEnv):
    """
    Appends one agent whose actions never influence transitions or reward.

    The extra agent is the last index, sits in its own critic group and observes
    a constant zero vector (local and unrestricted).

    Attributes:
        inner (DecPomdpEnv): the wrapped environment.
    """

    def __init__(self, inner: DecPomdpEnv) -> None:
        self.inner = inner
        spec = inner.spec
        super().__init__(
            DecPomdpSpec(
                n_agents=spec.n_agents + 1,
                action_space_size=spec.action_space_size,
                obs_dim=spec.obs_dim,
                state_obs_dim=spec.state_obs_dim,
                episode_limit=spec.episode_limit,
                gamma=spec.gamma,
                groups=spec.groups + (max(spec.groups) + 1,),
                no_op_action=spec.no_op_action,
            )
        )
        self._observations = np.zeros((spec.n_agents, spec.obs_dim))
        self._state = np.zeros(spec.n_agents * spec.state_obs_dim)

    @property
    def null_agent(self) -> int:
        return self.spec.n_agents - 1

    @property
    def success(self) -> bool:
        return self.inner.success

    def _initial_state(self, rng: np.random.Generator) -> None:
        result = self.inner.reset(rng)
        self._observations, self._state = result.observations, result.global_state

    def _transition(self, joint_action: JointAction) -> Tuple[float, bool]:
        result = self.inner.step(JointAction(joint_action.actions[:-1]))
        self._observations, self._state = result.observations, result.global_state
        return result.reward, result.done

    def _observe(self) -> Tuple[np.ndarray, np.ndarray]:
        spec = self.spec
        observations = np.vstack([self._observations, np.zeros((1, spec.obs_dim))])
        state = np.concatenate([self._state, np.zeros(spec.state_obs_dim)])
        return observations, state
