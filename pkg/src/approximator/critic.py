# stdlib imports
from typing import Any, Dict, Optional, Sequence, Tuple

# external imports
import numpy as np

# internal imports
from src.approximator.core import ParamVector, check_width, glorot_uniform, relu
from src.exceptions import LifecycleError, ShapeError


class CriticNet:
    """
    Central critic ``Q_tot = f(o_1, u_1, ..., o_n, u_n)``.

    Each agent's ``(observation, action encoding)`` pair goes through the two-layer
    ReLU extractor of its group (agents with equal group labels share one extractor),
    the per-agent features are concatenated and a linear head returns one scalar.

    Attributes:
        groups (Tuple[int, ...]): group label per agent.
        obs_dim (int): width of each agent's observation.
        action_dim (int): width of each agent's action encoding.
        units (int): width of the extractor layers.
        params (ParamVector)
        input_gradient (Optional[np.ndarray]): gradient w.r.t. the inputs of the last
            backward pass, laid out as the concatenated ``(observation, encoding)`` rows.
    """

    def __init__(
        self,
        groups: Sequence[int],
        obs_dim: int,
        action_dim: int,
        units: int = 64,
        rng: Optional[np.random.Generator] = None,
    ) -> None:
        self.groups = tuple(int(g) for g in groups)
        self.obs_dim, self.action_dim, self.units = obs_dim, action_dim, units
        self._members: Dict[int, np.ndarray] = {
            g: np.array([i for i, label in enumerate(self.groups) if label == g])
            for g in sorted(set(self.groups))
        }
        width = obs_dim + action_dim
        layout = []
        for g in self._members:
            layout += [
                (f"extractor{g}.w1", (units, width)),
                (f"extractor{g}.b1", (units,)),
                (f"extractor{g}.w2", (units, units)),
                (f"extractor{g}.b2", (units,)),
            ]
        layout += [("head.w", (self.n_agents * units,)), ("head.b", (1,))]
        self.params = ParamVector(layout)
        self._record: Optional[Dict[str, Any]] = None
        self.input_gradient: Optional[np.ndarray] = None
        if rng is not None:
            self.initialize(rng)

    @property
    def n_agents(self) -> int:
        return len(self.groups)

    def initialize(self, rng: np.random.Generator) -> None:
        self.params.data[:] = 0.0
        width = self.obs_dim + self.action_dim
        for g in self._members:
            glorot_uniform(self.params.view(f"extractor{g}.w1"), rng, width, self.units)
            glorot_uniform(self.params.view(f"extractor{g}.w2"), rng, self.units, self.units)
        glorot_uniform(self.params.view("head.w"), rng, self.n_agents * self.units, 1)

    def config(self) -> Dict[str, Any]:
        return {
            "groups": list(self.groups),
            "obs_dim": self.obs_dim,
            "action_dim": self.action_dim,
            "units": self.units,
        }

    def _inputs(self, observations: np.ndarray, encodings: np.ndarray) -> np.ndarray:
        observations = np.asarray(observations, dtype=np.float64)
        encodings = np.asarray(encodings, dtype=np.float64)
        if observations.ndim != 3 or encodings.ndim != 3:
            raise ShapeError("Batched critic inputs must be 3-dimensional (batch, agent, feature).")
        if observations.shape[:2] != encodings.shape[:2]:
            raise ShapeError(
                f"Observation and encoding batches disagree: {observations.shape[:2]} "
                f"!= {encodings.shape[:2]}."
            )
        if observations.shape[1] != self.n_agents:
            raise ShapeError(
                f"Critic expects {self.n_agents} agents, got {observations.shape[1]}."
            )
        check_width(observations, self.obs_dim, "Observation")
        check_width(encodings, self.action_dim, "Action encoding")
        return np.concatenate([observations, encodings], axis=-1)

    def _compute(self, x: np.ndarray) -> Tuple[np.ndarray, Dict[str, Any]]:
        batch = x.shape[0]
        features = np.zeros((batch, self.n_agents, self.units))
        layers = {}
        for g, members in self._members.items():
            w1, b1 = self.params.view(f"extractor{g}.w1"), self.params.view(f"extractor{g}.b1")
            w2, b2 = self.params.view(f"extractor{g}.w2"), self.params.view(f"extractor{g}.b2")
            z1 = x[:, members] @ w1.T + b1
            a1 = relu(z1)
            z2 = a1 @ w2.T + b2
            features[:, members] = relu(z2)
            layers[g] = (z1, a1, z2)
        fused = features.reshape(batch, -1)
        out = fused @ self.params.view("head.w") + self.params.view("head.b")[0]
        return out, {"x": x, "layers": layers, "fused": fused}

    def evaluate_batch(self, observations: np.ndarray, encodings: np.ndarray) -> np.ndarray:
        """Critic values for a batch, shape ``(batch,)``; nothing is recorded."""
        out, _ = self._compute(self._inputs(observations, encodings))
        return out

    def evaluate(self, observations: np.ndarray, encodings: np.ndarray) -> float:
        return float(self.evaluate_batch(observations[None], encodings[None])[0])

    def forward_batch(self, observations: np.ndarray, encodings: np.ndarray) -> np.ndarray:
        """Like ``evaluate_batch`` but records the pass for ``backward``."""
        out, record = self._compute(self._inputs(observations, encodings))
        record["single"] = False
        self._record = record
        return out

    def forward(self, observations: np.ndarray, encodings: np.ndarray) -> float:
        """Critic value of one joint input, recorded for ``backward``."""
        out = self.forward_batch(np.asarray(observations)[None], np.asarray(encodings)[None])
        self._record["single"] = True
        return float(out[0])

    def features(self, observations: np.ndarray, encodings: np.ndarray) -> np.ndarray:
        """Per-agent extracted features before fusion, shape ``(n_agents, units)``."""
        x = self._inputs(np.asarray(observations)[None], np.asarray(encodings)[None])
        _, record = self._compute(x)
        return record["fused"].reshape(self.n_agents, self.units)

    def backward(self, upstream=1.0) -> ParamVector:
        """Gradient of ``sum(upstream * output)`` with respect to every parameter.

        Shared extractor segments accumulate the contributions of all their agents.

        Raises:
            LifecycleError: no recorded forward pass.
        """
        if self._record is None:
            raise LifecycleError("backward() requires a preceding forward pass.")
        record, self._record = self._record, None
        x, fused = record["x"], record["fused"]
        batch = x.shape[0]
        upstream = np.broadcast_to(np.asarray(upstream, dtype=np.float64), (batch,))

        grad = self.params.zeros_like()
        grad.view("head.w")[:] = upstream @ fused
        grad.view("head.b")[0] = upstream.sum()
        d_features = np.outer(upstream, self.params.view("head.w")).reshape(
            batch, self.n_agents, self.units
        )
        d_x = np.zeros_like(x)
        for g, members in self._members.items():
            z1, a1, z2 = record["layers"][g]
            w1, w2 = self.params.view(f"extractor{g}.w1"), self.params.view(f"extractor{g}.w2")
            d_z2 = d_features[:, members] * (z2 > 0)
            grad.view(f"extractor{g}.w2")[:] = np.einsum("bah,baj->hj", d_z2, a1)
            grad.view(f"extractor{g}.b2")[:] = d_z2.sum(axis=(0, 1))
            d_z1 = (d_z2 @ w2) * (z1 > 0)
            grad.view(f"extractor{g}.w1")[:] = np.einsum("bah,baj->hj", d_z1, x[:, members])
            grad.view(f"extractor{g}.b1")[:] = d_z1.sum(axis=(0, 1))
            d_x[:, members] = d_z1 @ w1
        self.input_gradient = d_x[0] if record["single"] else d_x
        return grad
