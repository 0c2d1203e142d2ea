# stdlib imports
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Protocol, Sequence, Tuple

# external imports
import numpy as np
from loguru import logger

# internal imports
from src.coalition_game.core import (
    EXACT_CAP,
    CharacteristicFn,
    Coalition,
    check_exact_cap,
    draw_samples,
    exact_shapley,
    mc_shapley_from_samples,
)
from src.dec_pomdp.core import baseline_encoding
from src.exceptions import PreconditionError, ShapeError


class CriticLike(Protocol):
    """Anything that values batches of joint ``(observation, action encoding)`` inputs."""

    n_agents: int

    def evaluate_batch(self, observations: np.ndarray, encodings: np.ndarray) -> np.ndarray:
        ...


class CreditStrategy(str, Enum):
    SHAPLEY_MC = "shapley_mc"
    SHAPLEY_EXACT = "shapley_exact"
    PLAIN_COUNTERFACTUAL = "plain_cf"
    UNIFORM = "uniform"


@dataclass
class CreditVector:
    """
    Per-agent credits for one time step, in units of the critic's Q_tot.

    Attributes:
        credits (np.ndarray)
        strategy (CreditStrategy)
        samples (Optional[int]): Monte Carlo subsets per agent, Shapley-MC only.
    """

    credits: np.ndarray
    strategy: CreditStrategy
    samples: Optional[int] = None

    def __post_init__(self):
        if not np.all(np.isfinite(self.credits)):
            raise ValueError(f"Non-finite credits: {self.credits}.")

    def __len__(self) -> int:
        return len(self.credits)


class CounterfactualGame(CharacteristicFn):
    """
    Coalition game over a frozen critic at one time step.

    ``w(S) = f(H_A) - f(H_{A\\S})`` where ``H_{A\\S}`` replaces the action encodings
    of the agents in ``S`` by the baseline encoding (the zero vector unless given).
    Critic values are cached by the effective mask (members whose encoding already
    equals the baseline are dropped), so ``w(S) = 0`` exactly whenever masking
    changes nothing.

    Attributes:
        critic (CriticLike)
        observations (np.ndarray): ``(n, obs_dim)``.
        encodings (np.ndarray): ``(n, action_dim)``, one-hot of the taken actions.
        baseline (np.ndarray): ``(action_dim,)`` encoding of the default action.
        critic_evaluations (int): critic rows evaluated so far, the grand value included.
    """

    def __init__(
        self,
        critic: CriticLike,
        observations: np.ndarray,
        encodings: np.ndarray,
        baseline: Optional[np.ndarray] = None,
    ) -> None:
        observations = np.asarray(observations, dtype=np.float64)
        encodings = np.asarray(encodings, dtype=np.float64)
        if baseline is None:
            baseline = baseline_encoding(encodings.shape[-1])
        baseline = np.asarray(baseline, dtype=np.float64)
        if baseline.shape != encodings.shape[1:]:
            raise ShapeError(
                f"Baseline encoding of shape {baseline.shape} does not fit encodings {encodings.shape}."
            )
        if observations.shape[0] != critic.n_agents or encodings.shape[0] != critic.n_agents:
            raise ShapeError(
                f"Critic expects {critic.n_agents} agents, got observations for "
                f"{observations.shape[0]} and encodings for {encodings.shape[0]}."
            )
        super().__init__(critic.n_agents)
        self.critic = critic
        self.observations, self.encodings, self.baseline = observations, encodings, baseline
        self._active = int(
            sum(1 << i for i in range(self.n) if np.any(encodings[i] != baseline))
        )
        self._masked: Dict[int, float] = {}
        self.critic_evaluations = 0

    def effective_mask(self, coalition: Coalition) -> int:
        return coalition.members & self._active

    def masked_encodings(self, mask: int) -> np.ndarray:
        encodings = self.encodings.copy()
        for i in range(self.n):
            if mask >> i & 1:
                encodings[i] = self.baseline
        return encodings

    def missing_masks(self, coalitions: Sequence[Coalition]) -> List[int]:
        """Effective masks (grand value included) whose critic value is not cached yet."""
        wanted = {0} | {self.effective_mask(c) for c in coalitions}
        return sorted(m for m in wanted if m not in self._masked)

    def store(self, masks: Sequence[int], values: Sequence[float]) -> None:
        for mask, value in zip(masks, values):
            self._masked[mask] = float(value)
        self.critic_evaluations += len(masks)

    def _fetch(self, masks: Sequence[int]) -> None:
        if not masks:
            return
        encodings = np.stack([self.masked_encodings(m) for m in masks])
        observations = np.broadcast_to(self.observations, (len(masks),) + self.observations.shape)
        self.store(masks, self.critic.evaluate_batch(observations, encodings))

    def masked_value(self, mask: int) -> float:
        """``f(H_{A\\S})`` for the coalition with effective bits ``mask``."""
        mask &= self._active
        if mask not in self._masked:
            self._fetch([mask])
        return self._masked[mask]

    @property
    def grand(self) -> float:
        """``f(H_A)``."""
        return self.masked_value(0)

    def evaluate(self, coalition: Coalition) -> float:
        mask = self.effective_mask(coalition)
        if mask == 0:
            return 0.0
        return self.grand - self.masked_value(mask)

    def evaluate_many(self, coalitions: Sequence[Coalition]) -> List[float]:
        self._fetch(self.missing_masks(coalitions))
        return [self.evaluate(c) for c in coalitions]


def coalition_contribution(game: CounterfactualGame, coalition: Coalition) -> float:
    """``f(H_A) - f(H_{A\\S})``."""
    if coalition.n != game.n:
        raise ShapeError(f"Coalition over {coalition.n} agents for a {game.n}-agent game.")
    return game.evaluate(coalition)


def marginal_credit(game: CounterfactualGame, i: int, coalition: Coalition) -> float:
    """Marginal contribution of agent ``i`` to ``S`` in the two-evaluation form
    ``f(H_{A\\(S\\{i})}) - f(H_{A\\S})``."""
    if coalition.n != game.n:
        raise ShapeError(f"Coalition over {coalition.n} agents for a {game.n}-agent game.")
    if i not in coalition:
        raise PreconditionError(f"Agent {i} is not in {coalition!r}.")
    return game.masked_value(coalition.without(i).members) - game.masked_value(coalition.members)


def shapley_credits_exact(game: CounterfactualGame, cap: int = EXACT_CAP) -> CreditVector:
    """Exact Shapley credits of the counterfactual game.

    Raises:
        GameSizeError: more agents than ``cap``.
    """
    result = exact_shapley(game, cap)
    return CreditVector(result.values, CreditStrategy.SHAPLEY_EXACT)


def shapley_credits_mc(
    game: CounterfactualGame,
    samples: int,
    rng: np.random.Generator,
    draws: Optional[List[List[Coalition]]] = None,
) -> CreditVector:
    """Monte Carlo Shapley credits; coalitions are drawn independently per agent
    on every call unless pre-drawn ``draws`` are supplied.

    Raises:
        ValueError: ``samples`` is not positive.
    """
    if draws is None:
        draws = draw_samples(game.n, samples, rng)
    result = mc_shapley_from_samples(game, draws)
    return CreditVector(result.values, CreditStrategy.SHAPLEY_MC, samples=result.samples)


def plain_counterfactual_credits(game: CounterfactualGame) -> CreditVector:
    """Credit of each agent when only its own action is replaced by the baseline."""
    singles = [Coalition.from_indices([i], game.n) for i in range(game.n)]
    return CreditVector(
        np.array(game.evaluate_many(singles)), CreditStrategy.PLAIN_COUNTERFACTUAL
    )


def uniform_credits(game: CounterfactualGame) -> CreditVector:
    """``f(H_A) / n`` for every agent."""
    if game.n == 1:
        return CreditVector(np.array([game.evaluate(Coalition.full(1))]), CreditStrategy.UNIFORM)
    return CreditVector(np.full(game.n, game.grand / game.n), CreditStrategy.UNIFORM)


def compute_credits(
    game: CounterfactualGame,
    strategy: CreditStrategy,
    samples: int = 5,
    rng: Optional[np.random.Generator] = None,
    cap: int = EXACT_CAP,
) -> CreditVector:
    strategy = CreditStrategy(strategy)
    if strategy is CreditStrategy.SHAPLEY_MC:
        if rng is None:
            raise ValueError("Shapley-MC credits need a random generator.")
        return shapley_credits_mc(game, samples, rng)
    if strategy is CreditStrategy.SHAPLEY_EXACT:
        return shapley_credits_exact(game, cap)
    if strategy is CreditStrategy.PLAIN_COUNTERFACTUAL:
        return plain_counterfactual_credits(game)
    return uniform_credits(game)


def _needed_coalitions(
    strategy: CreditStrategy, n: int, draws: Optional[List[List[Coalition]]]
) -> List[Coalition]:
    if strategy is CreditStrategy.SHAPLEY_MC:
        return [c for i, row in enumerate(draws) for s in row for c in (s, s.without(i))]
    if strategy is CreditStrategy.SHAPLEY_EXACT:
        return [Coalition(bits, n) for bits in range(1 << n)]
    if strategy is CreditStrategy.PLAIN_COUNTERFACTUAL:
        return [Coalition.from_indices([i], n) for i in range(n)]
    return []


def batch_credits(
    critic: CriticLike,
    observations: np.ndarray,
    encodings: np.ndarray,
    strategy: CreditStrategy,
    samples: int = 5,
    rng: Optional[np.random.Generator] = None,
    cap: int = EXACT_CAP,
    baseline: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, int]:
    """Credits for many time steps with a single bulk critic evaluation.

    Args:
        observations (np.ndarray): ``(steps, n, obs_dim)``.
        encodings (np.ndarray): ``(steps, n, action_dim)``.
        baseline (Optional[np.ndarray]): default-action encoding, zero when omitted.

    Returns:
        credits of shape ``(steps, n)`` and the number of critic rows evaluated.
    """
    strategy = CreditStrategy(strategy)
    n = critic.n_agents
    if strategy is CreditStrategy.SHAPLEY_MC and rng is None:
        raise ValueError("Shapley-MC credits need a random generator.")
    if strategy is CreditStrategy.SHAPLEY_EXACT:
        check_exact_cap(n, cap)

    games = [CounterfactualGame(critic, o, e, baseline) for o, e in zip(observations, encodings)]
    draws = [
        draw_samples(n, samples, rng) if strategy is CreditStrategy.SHAPLEY_MC else None
        for _ in games
    ]
    pending = [g.missing_masks(_needed_coalitions(strategy, n, d)) for g, d in zip(games, draws)]
    rows = [(s, m) for s, masks in enumerate(pending) for m in masks]
    if rows:
        stacked_obs = np.stack([games[s].observations for s, _ in rows])
        stacked_enc = np.stack([games[s].masked_encodings(m) for s, m in rows])
        values = critic.evaluate_batch(stacked_obs, stacked_enc)
        offset = 0
        for game, masks in zip(games, pending):
            game.store(masks, values[offset : offset + len(masks)])
            offset += len(masks)

    credits = np.zeros((len(games), n))
    for step, (game, step_draws) in enumerate(zip(games, draws)):
        if strategy is CreditStrategy.SHAPLEY_MC:
            credits[step] = shapley_credits_mc(game, samples, rng, draws=step_draws).credits
        else:
            credits[step] = compute_credits(game, strategy, samples, rng, cap).credits
    evaluations = len(rows)
    logger.trace(
        f"{strategy.value} credits for {len(games)} steps used {evaluations} critic rows"
    )
    return credits, evaluations
