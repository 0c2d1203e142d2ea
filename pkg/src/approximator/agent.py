# stdlib imports
from typing import Any, Dict, List, Optional, Tuple

# external imports
import numpy as np

# internal imports
from src.approximator.core import ParamVector, check_width, glorot_uniform, relu, sigmoid
from src.exceptions import LifecycleError, ShapeError


class AgentNet:
    """
    Recurrent local agent ``Q_i = g(o_i; h)``.

    An LSTM cell (gates ordered input, forget, cell, output) is followed by a
    ReLU dense layer and a linear layer with one output per action. The hidden
    state passed around is the concatenation ``[h, c]`` of length ``2 * hidden``.

    Attributes:
        obs_dim (int)
        n_actions (int)
        hidden (int): LSTM width.
        units (int): width of the dense layer.
        params (ParamVector)
    """

    def __init__(
        self,
        obs_dim: int,
        n_actions: int,
        hidden: int = 64,
        units: int = 64,
        rng: Optional[np.random.Generator] = None,
    ) -> None:
        self.obs_dim, self.n_actions, self.hidden, self.units = obs_dim, n_actions, hidden, units
        self.params = ParamVector(
            [
                ("lstm.w", (4 * hidden, obs_dim + hidden)),
                ("lstm.b", (4 * hidden,)),
                ("fc1.w", (units, hidden)),
                ("fc1.b", (units,)),
                ("fc2.w", (n_actions, units)),
                ("fc2.b", (n_actions,)),
            ]
        )
        self._record: Optional[List[Dict[str, Any]]] = None
        if rng is not None:
            self.initialize(rng)

    @property
    def state_dim(self) -> int:
        return 2 * self.hidden

    def initial_state(self, batch: Optional[int] = None) -> np.ndarray:
        return np.zeros(self.state_dim if batch is None else (batch, self.state_dim))

    def initialize(self, rng: np.random.Generator) -> None:
        self.params.data[:] = 0.0
        glorot_uniform(
            self.params.view("lstm.w"), rng, self.obs_dim + self.hidden, 4 * self.hidden
        )
        self.params.view("lstm.b")[self.hidden : 2 * self.hidden] = 1.0
        glorot_uniform(self.params.view("fc1.w"), rng, self.hidden, self.units)
        glorot_uniform(self.params.view("fc2.w"), rng, self.units, self.n_actions)

    def config(self) -> Dict[str, Any]:
        return {
            "obs_dim": self.obs_dim,
            "n_actions": self.n_actions,
            "hidden": self.hidden,
            "units": self.units,
        }

    def _cell(self, x: np.ndarray, state: np.ndarray) -> Tuple[np.ndarray, np.ndarray, Dict]:
        H = self.hidden
        h, c = state[:, :H], state[:, H:]
        xh = np.concatenate([x, h], axis=1)
        z = xh @ self.params.view("lstm.w").T + self.params.view("lstm.b")
        i, f = sigmoid(z[:, :H]), sigmoid(z[:, H : 2 * H])
        g, o = np.tanh(z[:, 2 * H : 3 * H]), sigmoid(z[:, 3 * H :])
        c_next = f * c + i * g
        tanh_c = np.tanh(c_next)
        h_next = o * tanh_c
        z1 = h_next @ self.params.view("fc1.w").T + self.params.view("fc1.b")
        a1 = relu(z1)
        q = a1 @ self.params.view("fc2.w").T + self.params.view("fc2.b")
        saved = {"xh": xh, "c": c, "i": i, "f": f, "g": g, "o": o, "tanh_c": tanh_c,
                 "h_next": h_next, "z1": z1, "a1": a1}
        return q, np.concatenate([h_next, c_next], axis=1), saved

    def _check_state(self, state: np.ndarray) -> None:
        if state.shape[-1] != self.state_dim:
            raise ShapeError(
                f"Hidden state has width {state.shape[-1]}, expected {self.state_dim}."
            )

    def act(self, observation: np.ndarray, state: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """One step without recording, for rollouts."""
        observation, state = np.asarray(observation, dtype=np.float64), np.asarray(state)
        check_width(observation, self.obs_dim, "Observation")
        self._check_state(state)
        q, next_state, _ = self._cell(observation[None], state[None])
        return q[0], next_state[0]

    def forward(
        self, observation: np.ndarray, state: np.ndarray
    ) -> Tuple[np.ndarray, np.ndarray]:
        """One recorded step: ``(q_values, next_state)``."""
        q, states = self.unroll(
            np.asarray(observation, dtype=np.float64)[None, None], np.asarray(state)[None]
        )
        return q[0, 0], states[0]

    def unroll(
        self, observations: np.ndarray, initial_state: np.ndarray
    ) -> Tuple[np.ndarray, np.ndarray]:
        """Recorded unroll over ``observations`` of shape ``(batch, steps, obs_dim)``.

        Returns:
            q-values ``(batch, steps, n_actions)`` and the final state ``(batch, 2 * hidden)``.
        """
        observations = np.asarray(observations, dtype=np.float64)
        if observations.ndim != 3:
            raise ShapeError("Unroll observations must be (batch, steps, obs_dim).")
        check_width(observations, self.obs_dim, "Observation")
        state = np.asarray(initial_state, dtype=np.float64)
        self._check_state(state)
        if state.shape != (observations.shape[0], self.state_dim):
            raise ShapeError(
                f"Initial state shape {state.shape} does not match batch {observations.shape[0]}."
            )
        record, qs = [], []
        for t in range(observations.shape[1]):
            q, state, saved = self._cell(observations[:, t], state)
            record.append(saved)
            qs.append(q)
        self._record = record
        return np.stack(qs, axis=1), state

    def backward(self, upstream: np.ndarray) -> ParamVector:
        """Back-propagation through time of ``sum(upstream * q)`` for the last unroll.

        Args:
            upstream (np.ndarray): gradient w.r.t. the q-values, shaped like the
                unroll output ``(batch, steps, n_actions)`` (or ``(n_actions,)`` after
                a single ``forward``).

        Raises:
            LifecycleError: no recorded forward pass.
        """
        if self._record is None:
            raise LifecycleError("backward() requires a preceding forward or unroll.")
        record, self._record = self._record, None
        upstream = np.asarray(upstream, dtype=np.float64)
        if upstream.ndim == 1:
            upstream = upstream[None, None]
        H = self.hidden
        w = self.params.view("lstm.w")
        fc1_w, fc2_w = self.params.view("fc1.w"), self.params.view("fc2.w")
        grad = self.params.zeros_like()
        d_lstm_w, d_lstm_b = grad.view("lstm.w"), grad.view("lstm.b")
        d_fc1_w, d_fc1_b = grad.view("fc1.w"), grad.view("fc1.b")
        d_fc2_w, d_fc2_b = grad.view("fc2.w"), grad.view("fc2.b")

        batch = upstream.shape[0]
        d_h_carry = np.zeros((batch, H))
        d_c_carry = np.zeros((batch, H))
        for t in reversed(range(len(record))):
            s = record[t]
            d_q = upstream[:, t]
            d_fc2_w += d_q.T @ s["a1"]
            d_fc2_b += d_q.sum(axis=0)
            d_z1 = (d_q @ fc2_w) * (s["z1"] > 0)
            d_fc1_w += d_z1.T @ s["h_next"]
            d_fc1_b += d_z1.sum(axis=0)
            d_h = d_z1 @ fc1_w + d_h_carry
            d_c = d_c_carry + d_h * s["o"] * (1.0 - s["tanh_c"] ** 2)
            i, f, g, o = s["i"], s["f"], s["g"], s["o"]
            d_z = np.concatenate(
                [
                    d_c * g * i * (1.0 - i),
                    d_c * s["c"] * f * (1.0 - f),
                    d_c * i * (1.0 - g**2),
                    d_h * s["tanh_c"] * o * (1.0 - o),
                ],
                axis=1,
            )
            d_lstm_w += d_z.T @ s["xh"]
            d_lstm_b += d_z.sum(axis=0)
            d_h_carry = (d_z @ w)[:, self.obs_dim :]
            d_c_carry = d_c * f
        return grad
