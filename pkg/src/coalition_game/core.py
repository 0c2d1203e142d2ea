# stdlib imports
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from itertools import permutations
from math import factorial
from typing import Dict, Iterable, Iterator, List, Literal, Optional, Sequence, Tuple

# external imports
import numpy as np
from scipy.special import comb

# internal imports
from src.exceptions import GameSizeError, PreconditionError

EXACT_CAP = 12
ORDERING_CAP = 8
MAX_PLAYERS = 64


@dataclass(frozen=True)
class Coalition:
    """
    A subset of the players ``0..n-1`` stored as a bit set.

    Attributes:
        members (int): bit ``i`` is set when player ``i`` belongs to the coalition.
        n (int): number of players in the game (1..64).
    """

    members: int
    n: int

    def __post_init__(self):
        if not 1 <= self.n <= MAX_PLAYERS:
            raise ValueError(f"Player count must lie in 1..{MAX_PLAYERS}, got {self.n}.")
        if self.members < 0 or self.members >> self.n:
            raise ValueError(
                f"Coalition bits {self.members:#x} reference players outside 0..{self.n - 1}."
            )

    @classmethod
    def empty(cls, n: int) -> "Coalition":
        return cls(0, n)

    @classmethod
    def full(cls, n: int) -> "Coalition":
        return cls((1 << n) - 1, n)

    @classmethod
    def from_indices(cls, indices: Iterable[int], n: int) -> "Coalition":
        members = 0
        for i in map(int, indices):
            if not 0 <= i < n:
                raise IndexError(f"Player {i} is outside 0..{n - 1}.")
            members |= 1 << i
        return cls(members, n)

    def __contains__(self, i: int) -> bool:
        return 0 <= i < self.n and bool(self.members >> i & 1)

    def __len__(self) -> int:
        return self.members.bit_count()

    def __iter__(self) -> Iterator[int]:
        return (i for i in range(self.n) if self.members >> i & 1)

    def __or__(self, other: "Coalition") -> "Coalition":
        self._check_same_game(other)
        return Coalition(self.members | other.members, self.n)

    def __and__(self, other: "Coalition") -> "Coalition":
        self._check_same_game(other)
        return Coalition(self.members & other.members, self.n)

    def _check_same_game(self, other: "Coalition") -> None:
        if self.n != other.n:
            raise ValueError(f"Coalitions over {self.n} and {other.n} players cannot mix.")

    def without(self, i: int) -> "Coalition":
        if not 0 <= i < self.n:
            raise IndexError(f"Player {i} is outside 0..{self.n - 1}.")
        return Coalition(self.members & ~(1 << i), self.n)

    def with_player(self, i: int) -> "Coalition":
        if not 0 <= i < self.n:
            raise IndexError(f"Player {i} is outside 0..{self.n - 1}.")
        return Coalition(self.members | 1 << i, self.n)

    def __repr__(self) -> str:
        return f"Coalition({sorted(self)}, n={self.n})"


class CharacteristicFn(ABC):
    """
    Real-valued set function ``v(S)`` over the coalitions of ``n`` players.

    Implementations must be deterministic and define ``v`` on the empty coalition.
    ``evaluate_many`` may be overridden when several coalitions can be valued in
    one go (the counterfactual game batches its critic calls this way).

    Attributes:
        n (int): number of players.
    """

    def __init__(self, n: int) -> None:
        if not 1 <= n <= MAX_PLAYERS:
            raise ValueError(f"Player count must lie in 1..{MAX_PLAYERS}, got {n}.")
        self.n = n

    @abstractmethod
    def evaluate(self, coalition: Coalition) -> float:
        pass

    def evaluate_many(self, coalitions: Sequence[Coalition]) -> List[float]:
        return [self.evaluate(c) for c in coalitions]

    def __call__(self, coalition: Coalition) -> float:
        return self.evaluate(coalition)


class _MemoizedGame:
    """Per-call cache of characteristic values keyed by coalition bits."""

    def __init__(self, v: CharacteristicFn) -> None:
        self.v = v
        self.n = v.n
        self._cache: Dict[int, float] = {}

    @property
    def evaluations(self) -> int:
        return len(self._cache)

    def prefetch(self, coalitions: Iterable[Coalition]) -> None:
        missing = {}
        for c in coalitions:
            if c.members not in self._cache:
                missing.setdefault(c.members, c)
        if missing:
            values = self.v.evaluate_many(list(missing.values()))
            for bits, value in zip(missing.keys(), values):
                self._cache[bits] = float(value)

    def __call__(self, coalition: Coalition) -> float:
        if coalition.members not in self._cache:
            self._cache[coalition.members] = float(self.v.evaluate(coalition))
        return self._cache[coalition.members]


@dataclass
class ShapleyResult:
    """
    Per-player Shapley values of a game.

    Attributes:
        values (np.ndarray): one credit per player.
        method (Literal["exact", "monte_carlo"])
        samples (Optional[int]): subsets drawn per player for Monte Carlo, None for exact.
        evaluations (int): distinct characteristic-function evaluations performed.
    """

    values: np.ndarray
    method: Literal["exact", "monte_carlo"]
    samples: Optional[int] = None
    evaluations: int = 0

    def __repr__(self) -> str:
        label = self.method if self.samples is None else f"{self.method}(M={self.samples})"
        return f"ShapleyResult {label}: {np.array2string(self.values, precision=4)}"


def _check_player(v: CharacteristicFn, i: int) -> None:
    if not 0 <= i < v.n:
        raise IndexError(f"Player {i} is outside 0..{v.n - 1}.")


def check_exact_cap(n: int, cap: int) -> None:
    if n > cap:
        raise GameSizeError(
            f"Exact Shapley enumeration is capped at {cap} players, got {n}; "
            "use mc_shapley for larger games."
        )


def _shifted_mean(samples: np.ndarray, weights: Optional[np.ndarray] = None) -> float:
    # Shifting by the first sample keeps the mean exact when every sample is equal.
    reference = samples[0]
    deviations = samples - reference
    if weights is None:
        return float(reference + deviations.mean())
    return float(reference + np.dot(weights, deviations))


def marginal_contribution(v: CharacteristicFn, i: int, coalition: Coalition) -> float:
    """Return ``v(S) - v(S \\ {i})``.

    Raises:
        IndexError: ``i`` is not a player of ``v``.
        PreconditionError: ``i`` is not a member of ``coalition``.
    """
    _check_player(v, i)
    if i not in coalition:
        raise PreconditionError(f"Player {i} is not in {coalition!r}.")
    return v(coalition) - v(coalition.without(i))


def tabulate(v: CharacteristicFn, cap: int = EXACT_CAP) -> np.ndarray:
    """Evaluate ``v`` on every coalition; entry ``b`` holds ``v`` of the coalition with bits ``b``."""
    check_exact_cap(v.n, cap)
    coalitions = [Coalition(bits, v.n) for bits in range(1 << v.n)]
    return np.asarray(v.evaluate_many(coalitions), dtype=np.float64)


def _popcounts(n: int) -> np.ndarray:
    return np.array([bits.bit_count() for bits in range(1 << n)], dtype=np.int64)


def shapley_weights(n: int) -> np.ndarray:
    """Weight of a coalition of size ``k`` (index ``k``) containing the player: ``1 / (n C(n-1, k-1))``."""
    weights = np.zeros(n + 1)
    for k in range(1, n + 1):
        weights[k] = 1.0 / (n * comb(n - 1, k - 1, exact=True))
    return weights


def shapley_from_table(table: np.ndarray, n: int) -> np.ndarray:
    """Exact Shapley values from a full table of characteristic values."""
    sizes = _popcounts(n)
    weights = shapley_weights(n)
    all_bits = np.arange(1 << n)
    values = np.zeros(n)
    for i in range(n):
        bit = 1 << i
        containing = all_bits[(all_bits & bit) != 0]
        marginals = table[containing] - table[containing ^ bit]
        values[i] = _shifted_mean(marginals, weights[sizes[containing]])
    return values


def exact_shapley(v: CharacteristicFn, cap: int = EXACT_CAP) -> ShapleyResult:
    """Shapley values by exhaustive enumeration of every coalition.

    Args:
        v (CharacteristicFn): the game.
        cap (int): largest player count accepted (default 12).

    Raises:
        GameSizeError: ``v.n`` exceeds ``cap``.
    """
    table = tabulate(v, cap)
    return ShapleyResult(
        values=shapley_from_table(table, v.n), method="exact", evaluations=len(table)
    )


def ordering_shapley(v: CharacteristicFn, cap: int = ORDERING_CAP) -> np.ndarray:
    """Average positional marginal contribution over all ``n!`` player orderings."""
    check_exact_cap(v.n, cap)
    memo = _MemoizedGame(v)
    totals = np.zeros(v.n)
    for order in permutations(range(v.n)):
        coalition = Coalition.empty(v.n)
        previous = memo(coalition)
        for i in order:
            coalition = coalition.with_player(i)
            current = memo(coalition)
            totals[i] += current - previous
            previous = current
    return totals / factorial(v.n)


def sample_subset_containing(i: int, n: int, rng: np.random.Generator) -> Coalition:
    """Draw a coalition containing ``i``: size uniform on 1..n, then members uniform.

    Under this law every coalition of size ``k`` containing ``i`` carries total
    probability ``1/n`` per size class, which is the Shapley weighting, so the
    sampled marginal contribution is an unbiased estimate of the Shapley value.
    """
    if not 0 <= i < n:
        raise IndexError(f"Player {i} is outside 0..{n - 1}.")
    size = int(rng.integers(1, n + 1))
    others = np.array([j for j in range(n) if j != i], dtype=np.int64)
    chosen = rng.permutation(others)[: size - 1]
    return Coalition.from_indices([i, *chosen.tolist()], n)


def draw_samples(n: int, samples: int, rng: np.random.Generator) -> List[List[Coalition]]:
    """Draw ``samples`` coalitions for each player, player-major order."""
    if samples <= 0:
        raise ValueError(f"Monte Carlo sample count must be positive, got {samples}.")
    return [[sample_subset_containing(i, n, rng) for _ in range(samples)] for i in range(n)]


def mc_shapley_from_samples(
    v: CharacteristicFn, draws: Sequence[Sequence[Coalition]]
) -> ShapleyResult:
    """Monte Carlo Shapley estimate from pre-drawn coalitions (one list per player)."""
    if len(draws) != v.n:
        raise ValueError(f"Expected draws for {v.n} players, got {len(draws)}.")
    samples = len(draws[0])
    memo = _MemoizedGame(v)
    memo.prefetch(
        c for i, row in enumerate(draws) for s in row for c in (s, s.without(i))
    )
    values = np.zeros(v.n)
    for i, row in enumerate(draws):
        marginals = np.array([memo(s) - memo(s.without(i)) for s in row])
        values[i] = _shifted_mean(marginals)
    return ShapleyResult(
        values=values, method="monte_carlo", samples=samples, evaluations=memo.evaluations
    )


def mc_shapley(v: CharacteristicFn, samples: int, rng: np.random.Generator) -> ShapleyResult:
    """Monte Carlo Shapley estimate with ``samples`` coalitions drawn per player.

    Raises:
        ValueError: ``samples`` is not positive.
    """
    return mc_shapley_from_samples(v, draw_samples(v.n, samples, rng))


@dataclass
class AxiomReport:
    """
    Outcome of checking the Shapley axioms on a pair of games.

    Attributes:
        efficiency (bool): values of ``v`` and ``w`` each sum to ``game(full) - game(empty)``.
        symmetry (bool): interchangeable players receive equal values.
        nullity (bool): null players receive zero.
        linearity (bool): values of ``v + w`` equal the sum of the values.
        coherency (bool): a player whose marginals in ``v`` dominate those in ``w``
            receives at least as much under ``v``.
        symmetric_pairs (List[Tuple[int, int]]): interchangeable pairs found in ``v``.
        null_players (List[int]): null players found in ``v``.
        dominant_players (List[int]): players whose ``v`` marginals dominate ``w``'s.
    """

    efficiency: bool
    symmetry: bool
    nullity: bool
    linearity: bool
    coherency: bool
    symmetric_pairs: List[Tuple[int, int]] = field(default_factory=list)
    null_players: List[int] = field(default_factory=list)
    dominant_players: List[int] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(
            (self.efficiency, self.symmetry, self.nullity, self.linearity, self.coherency)
        )

    def as_dict(self) -> Dict[str, object]:
        return {
            "efficiency": self.efficiency,
            "symmetry": self.symmetry,
            "nullity": self.nullity,
            "linearity": self.linearity,
            "coherency": self.coherency,
            "symmetric_pairs": [list(p) for p in self.symmetric_pairs],
            "null_players": list(self.null_players),
            "dominant_players": list(self.dominant_players),
        }


def _marginal_table(table: np.ndarray, n: int, i: int) -> np.ndarray:
    bits = np.arange(1 << n)
    without_i = bits[(bits & (1 << i)) == 0]
    return table[without_i | (1 << i)] - table[without_i]


def _symmetric_pairs(table: np.ndarray, n: int, tol: float) -> List[Tuple[int, int]]:
    bits = np.arange(1 << n)
    pairs = []
    for i in range(n):
        for j in range(i + 1, n):
            rest = bits[(bits & ((1 << i) | (1 << j))) == 0]
            if np.all(np.abs(table[rest | (1 << i)] - table[rest | (1 << j)]) <= tol):
                pairs.append((i, j))
    return pairs


def _null_players(table: np.ndarray, n: int, tol: float) -> List[int]:
    return [i for i in range(n) if np.all(np.abs(_marginal_table(table, n, i)) <= tol)]


def verify_axioms(
    v: CharacteristicFn, w: CharacteristicFn, tol: float = 1e-9, cap: int = EXACT_CAP
) -> AxiomReport:
    """Check the five Shapley axioms for ``exact_shapley`` on ``v`` and ``w``.

    Interchangeable and null players are detected by comparing marginal tables
    within ``tol``.

    Raises:
        ValueError: the games have different player counts.
        GameSizeError: the player count exceeds ``cap``.
    """
    if v.n != w.n:
        raise ValueError(f"Games disagree on player count: {v.n} != {w.n}.")
    n = v.n
    v_table, w_table = tabulate(v, cap), tabulate(w, cap)
    phi_v = shapley_from_table(v_table, n)
    phi_w = shapley_from_table(w_table, n)
    phi_sum = shapley_from_table(v_table + w_table, n)

    efficiency = all(
        abs(phi.sum() - (table[-1] - table[0])) <= tol * (1 + abs(table[-1]))
        for phi, table in ((phi_v, v_table), (phi_w, w_table))
    )

    symmetry, nullity = True, True
    symmetric_pairs = _symmetric_pairs(v_table, n, tol)
    null_players = _null_players(v_table, n, tol)
    for phi, table in ((phi_v, v_table), (phi_w, w_table)):
        symmetry &= all(abs(phi[i] - phi[j]) <= tol for i, j in _symmetric_pairs(table, n, tol))
        nullity &= all(abs(phi[i]) <= tol for i in _null_players(table, n, tol))

    linearity = bool(np.all(np.abs(phi_sum - (phi_v + phi_w)) <= tol))

    dominant_players = [
        i
        for i in range(n)
        if np.all(_marginal_table(v_table, n, i) >= _marginal_table(w_table, n, i) - tol)
    ]
    coherency = all(phi_v[i] >= phi_w[i] - tol for i in dominant_players)

    return AxiomReport(
        efficiency=bool(efficiency),
        symmetry=bool(symmetry),
        nullity=bool(nullity),
        linearity=linearity,
        coherency=bool(coherency),
        symmetric_pairs=symmetric_pairs,
        null_players=null_players,
        dominant_players=dominant_players,
    )
