# stdlib imports
import json
from collections import deque
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Deque, Dict, Iterator, List, Optional, Sequence, Tuple

# external imports
import numpy as np
from loguru import logger
from tqdm import tqdm

# internal imports
from src.approximator.agent import AgentNet
from src.approximator.core import ParamVector, clip_grad_norm, copy_params
from src.approximator.critic import CriticNet
from src.approximator.optimizers import Optimizer, make_optimizer
from src.credit.core import CreditStrategy, batch_credits
from src.dec_pomdp.core import DecPomdpEnv, JointAction, encode_actions
from src.exceptions import ConfigError
from src.models.records import EvaluationResult, MetricsRecord

HYPERPARAMETERS_TABLE = Path(__file__).parent / "hyperparameters.json"


def load_default_hyperparameters(table: Path = HYPERPARAMETERS_TABLE) -> Dict[str, Any]:
    with open(table) as f:
        return dict(json.load(f)["hyperparameters"])


@dataclass(frozen=True)
class Hyperparams:
    """
    Training hyperparameters; defaults come from ``hyperparameters.json``.

    Build with ``Hyperparams.defaults(**overrides)``. Invariants are checked on
    construction and reported as ``ConfigError`` naming the field.
    """

    batch_size: int
    buffer_capacity: int
    training_episodes: int
    exploration_episodes: int
    epsilon_start: float
    epsilon_end: float
    gamma: float
    target_sync_interval: int
    eval_interval: int
    eval_episodes: int
    agent_lr: float
    critic_lr: float
    agent_optimizer: str
    critic_optimizer: str
    mc_samples: int
    credit_strategy: str
    dense_units: int
    hidden_units: int
    grad_norm_clip: float
    bootstrap: str
    exact_cap: int
    seed: int

    @classmethod
    def defaults(cls, **overrides: Any) -> "Hyperparams":
        values = load_default_hyperparameters()
        unknown = set(overrides) - set(values)
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown hyperparameter")
        values.update(overrides)
        return cls(**values)

    def __post_init__(self):
        positive = (
            "batch_size", "buffer_capacity", "exploration_episodes", "target_sync_interval",
            "eval_interval", "eval_episodes", "mc_samples", "dense_units", "hidden_units",
            "exact_cap",
        )
        for name in positive:
            if getattr(self, name) < 1:
                raise ConfigError(name, f"must be a positive integer, got {getattr(self, name)}")
        if self.training_episodes < 0:
            raise ConfigError("training_episodes", "must be non-negative")
        if not 0.0 <= self.epsilon_start <= 1.0:
            raise ConfigError("epsilon_start", "must lie in [0, 1]")
        if not 0.0 <= self.epsilon_end <= self.epsilon_start:
            raise ConfigError("epsilon_end", "must lie in [0, epsilon_start]")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError("gamma", f"must lie in [0, 1], got {self.gamma}")
        for name in ("agent_lr", "critic_lr"):
            if getattr(self, name) <= 0:
                raise ConfigError(name, "must be positive")
        for name in ("agent_optimizer", "critic_optimizer"):
            if getattr(self, name) not in ("adam", "rmsprop"):
                raise ConfigError(name, "must be 'adam' or 'rmsprop'")
        if self.credit_strategy not in {s.value for s in CreditStrategy}:
            raise ConfigError(
                "credit_strategy", f"must be one of {[s.value for s in CreditStrategy]}"
            )
        if self.bootstrap not in ("recorded", "greedy"):
            raise ConfigError("bootstrap", "must be 'recorded' or 'greedy'")
        if self.grad_norm_clip < 0:
            raise ConfigError("grad_norm_clip", "must be non-negative (0 disables clipping)")

    @property
    def sigma(self) -> float:
        """Per-episode decrease of the exploration rate."""
        return (self.epsilon_start - self.epsilon_end) / self.exploration_episodes

    @property
    def strategy(self) -> CreditStrategy:
        return CreditStrategy(self.credit_strategy)

    def as_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class Episode:
    """
    One recorded trajectory of length ``T``.

    Attributes:
        observations (np.ndarray): local observations ``(T, n, obs_dim)``.
        state_observations (np.ndarray): critic inputs ``(T, n, state_obs_dim)``.
        hidden (np.ndarray): agent hidden state before each step ``(T, n, state_dim)``.
        actions (np.ndarray): ``(T, n)`` action ids.
        rewards (np.ndarray): ``(T,)`` shared rewards.
        success (bool): the environment's success predicate at episode end.
    """

    observations: np.ndarray
    state_observations: np.ndarray
    hidden: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    success: bool = False

    def __post_init__(self):
        if not np.all(np.isfinite(self.rewards)):
            raise ValueError("Episode rewards must be finite.")

    def __len__(self) -> int:
        return len(self.rewards)

    @property
    def terminated(self) -> np.ndarray:
        flags = np.zeros(len(self), dtype=bool)
        flags[-1] = True
        return flags

    @property
    def episode_return(self) -> float:
        return float(self.rewards.sum())


class ReplayBuffer:
    """FIFO store of the most recent ``capacity`` episodes."""

    def __init__(self, capacity: int) -> None:
        if capacity < 1:
            raise ValueError(f"Buffer capacity must be positive, got {capacity}.")
        self.capacity = capacity
        self._episodes: Deque[Episode] = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self._episodes)

    def __iter__(self) -> Iterator[Episode]:
        return iter(self._episodes)

    def add(self, episode: Episode) -> None:
        self._episodes.append(episode)

    def sample(self, batch_size: int, rng: np.random.Generator) -> List[Episode]:
        if not self._episodes:
            raise ValueError("Cannot sample from an empty replay buffer.")
        picks = rng.choice(len(self._episodes), size=min(batch_size, len(self)), replace=False)
        return [self._episodes[int(i)] for i in np.sort(picks)]


@dataclass
class Batch:
    """Episodes padded to a common length with a validity mask ``(B, T)``."""

    observations: np.ndarray
    state_observations: np.ndarray
    initial_hidden: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    mask: np.ndarray
    terminated: np.ndarray

    @property
    def size(self) -> int:
        return self.rewards.shape[0]


def collate(episodes: Sequence[Episode]) -> Batch:
    if not episodes:
        raise ValueError("Cannot collate an empty list of episodes.")
    B, T = len(episodes), max(len(e) for e in episodes)
    first = episodes[0]
    n = first.actions.shape[1]

    def padded(shape, dtype=np.float64):
        return np.zeros((B, T) + shape, dtype=dtype)

    batch = Batch(
        observations=padded(first.observations.shape[1:]),
        state_observations=padded(first.state_observations.shape[1:]),
        initial_hidden=np.stack([e.hidden[0] for e in episodes]),
        actions=padded((n,), np.int64),
        rewards=padded(()),
        mask=padded(()),
        terminated=padded((), bool),
    )
    for b, e in enumerate(episodes):
        steps = len(e)
        batch.observations[b, :steps] = e.observations
        batch.state_observations[b, :steps] = e.state_observations
        batch.actions[b, :steps] = e.actions
        batch.rewards[b, :steps] = e.rewards
        batch.mask[b, :steps] = 1.0
        batch.terminated[b, :steps] = e.terminated
    return batch


def epsilon(eps: int, hp: Hyperparams) -> float:
    """Exploration rate of episode ``eps``: ``max(epsilon_start - eps * sigma, 0)``."""
    if eps < 0:
        raise ValueError(f"Episode index must be non-negative, got {eps}.")
    decayed = hp.epsilon_start - eps * (hp.epsilon_start - hp.epsilon_end) / hp.exploration_episodes
    return max(decayed, 0.0)


def run_episode(
    agents: Sequence[AgentNet],
    env: DecPomdpEnv,
    eps_value: float,
    rng: np.random.Generator,
) -> Episode:
    """Roll out one episode with epsilon-greedy agents; greedy ties go to the lowest action id."""
    spec = env.spec
    if len(agents) != spec.n_agents:
        raise ValueError(f"{len(agents)} agents for a {spec.n_agents}-agent environment.")
    if any(a.n_actions != spec.action_space_size for a in agents):
        raise ValueError("Agent action counts do not match the environment.")
    result = env.reset(rng)
    states = [agent.initial_state() for agent in agents]
    record = {k: [] for k in ("observations", "state_observations", "hidden", "actions", "rewards")}
    while not result.done:
        record["observations"].append(result.observations)
        record["state_observations"].append(result.state_observations(spec.n_agents))
        record["hidden"].append(np.stack(states))
        actions = []
        for i, agent in enumerate(agents):
            q_values, states[i] = agent.act(result.observations[i], states[i])
            explore = rng.random() < eps_value
            actions.append(int(rng.integers(spec.action_space_size)) if explore else int(np.argmax(q_values)))
        result = env.step(JointAction(tuple(actions)))
        record["actions"].append(actions)
        record["rewards"].append(result.reward)
    return Episode(
        observations=np.stack(record["observations"]),
        state_observations=np.stack(record["state_observations"]),
        hidden=np.stack(record["hidden"]),
        actions=np.array(record["actions"], dtype=np.int64),
        rewards=np.array(record["rewards"]),
        success=env.success,
    )


def _greedy_actions(agents: Sequence[AgentNet], batch: Batch) -> np.ndarray:
    greedy = np.zeros_like(batch.actions)
    for i, agent in enumerate(agents):
        q, _ = agent.unroll(batch.observations[:, :, i], batch.initial_hidden[:, i])
        greedy[:, :, i] = np.argmax(q, axis=-1)
    return greedy


def td_targets(
    target_critic: CriticNet,
    batch: Batch,
    gamma: float,
    next_actions: Optional[np.ndarray] = None,
) -> np.ndarray:
    """``y = r + gamma * Q~_tot(next inputs)``, or ``y = r`` at terminal steps; shape ``(B, T)``."""
    B, T = batch.rewards.shape
    n_actions = target_critic.action_dim
    actions = batch.actions if next_actions is None else next_actions
    bootstrap = np.zeros((B, T))
    if T > 1:
        next_obs = batch.state_observations[:, 1:].reshape((B * (T - 1),) + batch.state_observations.shape[2:])
        next_enc = encode_actions(actions[:, 1:], n_actions).reshape(B * (T - 1), -1, n_actions)
        bootstrap[:, :-1] = target_critic.evaluate_batch(next_obs, next_enc).reshape(B, T - 1)
    live = batch.mask * (~batch.terminated)
    return batch.rewards + gamma * live * bootstrap


def critic_td_update(
    critic: CriticNet,
    target_critic: CriticNet,
    batch: Batch,
    opt: Optimizer,
    hp: Hyperparams,
    agents: Optional[Sequence[AgentNet]] = None,
) -> float:
    """One TD step on the critic; the targets carry no gradient."""
    if batch.size == 0 or batch.mask.sum() == 0:
        raise ValueError("critic_td_update needs a non-empty batch.")
    next_actions = None
    if hp.bootstrap == "greedy":
        if agents is None:
            raise ValueError("Greedy bootstrap needs the agents to pick next actions.")
        next_actions = _greedy_actions(agents, batch)
    y = td_targets(target_critic, batch, hp.gamma, next_actions)
    valid = batch.mask > 0
    q_tot = critic.forward_batch(
        batch.state_observations[valid], encode_actions(batch.actions[valid], critic.action_dim)
    )
    error = q_tot - y[valid]
    loss = float(np.mean(error**2))
    grad = critic.backward(2.0 * error / len(error))
    clip_grad_norm(grad, hp.grad_norm_clip)
    opt.step(critic.params, grad)
    return loss


def sync_target(critic: CriticNet, target_critic: CriticNet, episode: int, hp: Hyperparams) -> bool:
    """Copy the live critic into the target every ``target_sync_interval`` episodes."""
    if episode % hp.target_sync_interval == 0:
        copy_params(critic.params, target_critic.params)
        return True
    return False


@dataclass
class AgentUpdate:
    """
    Outcome of the agent stage.

    Attributes:
        loss (float): mean squared credit-regression error over agents and steps.
        credits (np.ndarray): credits of every valid step ``(steps, n)``.
        critic_evaluations (int): critic rows spent on credits.
        critic_version (int): critic parameter version the credits were computed with.
    """

    loss: float
    credits: np.ndarray
    critic_evaluations: int
    critic_version: int


def credit_regression(
    agent: AgentNet, batch: Batch, i: int, targets: np.ndarray, scale: float
) -> Tuple[float, ParamVector]:
    """``scale * sum((Q_i(taken) - target)^2)`` over the valid steps of agent ``i``, and its gradient.

    The agent is replayed from the recorded initial hidden state; ``targets`` are
    constants of shape ``(B, T, n)``.
    """
    q, _ = agent.unroll(batch.observations[:, :, i], batch.initial_hidden[:, i])
    taken = np.take_along_axis(q, batch.actions[:, :, i, None], axis=-1)[..., 0]
    error = (taken - targets[:, :, i]) * batch.mask
    upstream = np.zeros_like(q)
    np.put_along_axis(upstream, batch.actions[:, :, i, None], (2.0 * scale * error)[..., None], axis=-1)
    return scale * float(np.sum(error**2)), agent.backward(upstream)


def agent_update(
    agents: Sequence[AgentNet],
    critic: CriticNet,
    batch: Batch,
    hp: Hyperparams,
    rng: np.random.Generator,
    opts: Sequence[Optimizer],
    baseline: Optional[np.ndarray] = None,
) -> AgentUpdate:
    """Regress each agent's q-value of the taken action onto its credit.

    Credits are constants computed with the live critic, masking with ``baseline``
    (the zero encoding when omitted).
    """
    valid = batch.mask > 0
    n_valid = int(valid.sum())
    if n_valid == 0:
        raise ValueError("agent_update needs a non-empty batch.")
    critic_version = critic.params.version
    credits, evaluations = batch_credits(
        critic,
        batch.state_observations[valid],
        encode_actions(batch.actions[valid], critic.action_dim),
        hp.strategy,
        hp.mc_samples,
        rng,
        hp.exact_cap,
        baseline,
    )
    targets = np.zeros(batch.actions.shape)
    targets[valid] = credits
    scale = 1.0 / (n_valid * len(agents))
    loss = 0.0
    for i, (agent, opt) in enumerate(zip(agents, opts)):
        agent_loss, grad = credit_regression(agent, batch, i, targets, scale)
        loss += agent_loss
        clip_grad_norm(grad, hp.grad_norm_clip)
        opt.step(agent.params, grad)
    return AgentUpdate(loss, credits, evaluations, critic_version)


def evaluate(
    agents: Sequence[AgentNet],
    env: DecPomdpEnv,
    episodes: int,
    rng: np.random.Generator,
) -> EvaluationResult:
    """Greedy rollouts; each episode gets its own pre-drawn seed."""
    if episodes < 1:
        raise ValueError(f"Evaluation needs at least one episode, got {episodes}.")
    seeds = rng.integers(0, 2**32, size=episodes)
    returns, successes = [], []
    for seed in seeds:
        episode = run_episode(agents, env, 0.0, np.random.default_rng(int(seed)))
        returns.append(episode.episode_return)
        successes.append(episode.success)
    return EvaluationResult(float(np.mean(returns)), float(np.mean(successes)))


@dataclass
class IterationStats:
    critic_loss: float
    agent_loss: float
    credits: np.ndarray
    critic_version_after_td: int
    critic_version_for_credits: int


@dataclass
class _IntervalAccumulator:
    critic_losses: List[float] = field(default_factory=list)
    agent_losses: List[float] = field(default_factory=list)
    credits: List[np.ndarray] = field(default_factory=list)

    def add(self, stats: IterationStats) -> None:
        self.critic_losses.append(stats.critic_loss)
        self.agent_losses.append(stats.agent_loss)
        self.credits.append(stats.credits.ravel())

    def summary(self) -> Dict[str, float]:
        credits = np.concatenate(self.credits) if self.credits else np.zeros(0)
        return {
            "critic_loss": float(np.mean(self.critic_losses)) if self.critic_losses else float("nan"),
            "agent_loss": float(np.mean(self.agent_losses)) if self.agent_losses else float("nan"),
            "credit_mean": float(credits.mean()) if credits.size else float("nan"),
            "credit_std": float(credits.std()) if credits.size else float("nan"),
        }


class Trainer:
    """
    Two-stage training loop: rollout, TD update of the critic, target sync,
    credit computation and credit regression of the agents.

    Attributes:
        hp (Hyperparams)
        env (DecPomdpEnv): environment used for training rollouts.
        eval_env (DecPomdpEnv): separate instance used for greedy evaluation.
        critic, target_critic (CriticNet)
        agents (List[AgentNet])
        buffer (ReplayBuffer)
        episode (int): number of training episodes collected so far.
    """

    def __init__(self, env_factory: Callable[[], DecPomdpEnv], hp: Hyperparams) -> None:
        self.hp = hp
        self.env, self.eval_env = env_factory(), env_factory()
        init_rng, self.rollout_rng, self.update_rng, self.eval_rng = (
            np.random.default_rng(s) for s in np.random.SeedSequence(hp.seed).spawn(4)
        )
        spec = self.env.spec
        self.critic = CriticNet(
            spec.groups, spec.state_obs_dim, spec.action_space_size, hp.dense_units, init_rng
        )
        self.target_critic = CriticNet(
            spec.groups, spec.state_obs_dim, spec.action_space_size, hp.dense_units
        )
        copy_params(self.critic.params, self.target_critic.params)
        self.agents = [
            AgentNet(spec.obs_dim, spec.action_space_size, hp.hidden_units, hp.dense_units, init_rng)
            for _ in range(spec.n_agents)
        ]
        self.critic_opt = make_optimizer(hp.critic_optimizer, hp.critic_lr)
        self.agent_opts = [make_optimizer(hp.agent_optimizer, hp.agent_lr) for _ in self.agents]
        self.buffer = ReplayBuffer(hp.buffer_capacity)
        self.episode = 0

    def iterate(self) -> Optional[IterationStats]:
        """Collect one episode and, once the buffer holds a full batch, train on it."""
        eps_value = epsilon(self.episode, self.hp)
        self.buffer.add(run_episode(self.agents, self.env, eps_value, self.rollout_rng))
        self.episode += 1
        stats = None
        if len(self.buffer) >= self.hp.batch_size:
            batch = collate(self.buffer.sample(self.hp.batch_size, self.update_rng))
            critic_loss = critic_td_update(
                self.critic, self.target_critic, batch, self.critic_opt, self.hp, self.agents
            )
            version_after_td = self.critic.params.version
            sync_target(self.critic, self.target_critic, self.episode, self.hp)
            update = agent_update(
                self.agents, self.critic, batch, self.hp, self.update_rng, self.agent_opts,
                self.env.spec.default_action_encoding,
            )
            stats = IterationStats(
                critic_loss, update.loss, update.credits, version_after_td, update.critic_version
            )
        else:
            sync_target(self.critic, self.target_critic, self.episode, self.hp)
        return stats

    def evaluate(self) -> EvaluationResult:
        return evaluate(self.agents, self.eval_env, self.hp.eval_episodes, self.eval_rng)

    def _record(self, accumulator: _IntervalAccumulator) -> MetricsRecord:
        result = self.evaluate()
        record = MetricsRecord(
            episode=self.episode,
            eval_return=result.mean_return,
            success_rate=result.success_rate,
            epsilon=epsilon(self.episode, self.hp),
            **accumulator.summary(),
        )
        logger.info(
            f"episode {record.episode}: return {record.eval_return:.3f}, "
            f"success {record.success_rate:.2f}, epsilon {record.epsilon:.3f}"
        )
        return record

    def run(
        self,
        on_episode: Optional[Callable[["Trainer"], None]] = None,
        progress: bool = False,
    ) -> Iterator[MetricsRecord]:
        """Yield the initial evaluation record, then one record per ``eval_interval`` episodes."""
        accumulator = _IntervalAccumulator()
        yield self._record(accumulator)
        for _ in tqdm(range(self.hp.training_episodes), disable=not progress, desc="episodes"):
            stats = self.iterate()
            if stats is not None:
                accumulator.add(stats)
            if on_episode is not None:
                on_episode(self)
            if self.episode % self.hp.eval_interval == 0:
                yield self._record(accumulator)
                accumulator = _IntervalAccumulator()


def train(
    env_factory: Callable[[], DecPomdpEnv],
    hp: Hyperparams,
    on_episode: Optional[Callable[[Trainer], None]] = None,
    progress: bool = False,
) -> Iterator[MetricsRecord]:
    """Run the full training loop, yielding metrics records."""
    return Trainer(env_factory, hp).run(on_episode, progress)
