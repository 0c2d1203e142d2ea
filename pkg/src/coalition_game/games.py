"""Synthetic characteristic functions with known Shapley values."""

# stdlib imports
from typing import Iterable, Optional, Sequence

# external imports
import numpy as np

# internal imports
from src.coalition_game.core import CharacteristicFn, Coalition


class AdditiveGame(CharacteristicFn):
    """``v(S) = sum of weights[j] for j in S``; the Shapley value is the weight vector."""

    def __init__(self, weights: Sequence[float]) -> None:
        super().__init__(len(weights))
        self.weights = np.asarray(weights, dtype=np.float64)

    def evaluate(self, coalition: Coalition) -> float:
        return float(sum(self.weights[j] for j in coalition))


class GloveGame(CharacteristicFn):
    """
    Glove market: a coalition is worth the number of matched left/right pairs.

    Attributes:
        left (frozenset): players holding a left glove.
        right (frozenset): players holding a right glove.
    """

    def __init__(self, n: int, left: Iterable[int], right: Iterable[int]) -> None:
        super().__init__(n)
        self.left = frozenset(left)
        self.right = frozenset(right)
        if self.left & self.right:
            raise ValueError("A player cannot hold both a left and a right glove.")

    def evaluate(self, coalition: Coalition) -> float:
        members = set(coalition)
        return float(min(len(members & self.left), len(members & self.right)))


class ConstantGame(CharacteristicFn):
    def __init__(self, n: int, value: float = 1.0) -> None:
        super().__init__(n)
        self.value = float(value)

    def evaluate(self, coalition: Coalition) -> float:
        return self.value


class TableGame(CharacteristicFn):
    """Game given by an explicit table indexed by coalition bits."""

    def __init__(self, n: int, table: Sequence[float]) -> None:
        super().__init__(n)
        self.table = np.asarray(table, dtype=np.float64)
        if self.table.shape != (1 << n,):
            raise ValueError(f"Table must hold {1 << n} values, got shape {self.table.shape}.")

    @classmethod
    def random(
        cls,
        n: int,
        rng: np.random.Generator,
        low: float = -1.0,
        high: float = 1.0,
        null_players: Optional[Iterable[int]] = None,
    ) -> "TableGame":
        """Uniform random game; players in ``null_players`` are made null by copying values."""
        table = rng.uniform(low, high, size=1 << n)
        for i in sorted(null_players or ()):
            bit = 1 << i
            for bits in range(1 << n):
                if bits & bit:
                    table[bits] = table[bits ^ bit]
        return cls(n, table)

    def evaluate(self, coalition: Coalition) -> float:
        return float(self.table[coalition.members])


class SumGame(CharacteristicFn):
    def __init__(self, v: CharacteristicFn, w: CharacteristicFn) -> None:
        if v.n != w.n:
            raise ValueError(f"Games disagree on player count: {v.n} != {w.n}.")
        super().__init__(v.n)
        self.v, self.w = v, w

    def evaluate(self, coalition: Coalition) -> float:
        return self.v(coalition) + self.w(coalition)


class ScaledGame(CharacteristicFn):
    def __init__(self, v: CharacteristicFn, factor: float) -> None:
        super().__init__(v.n)
        self.v, self.factor = v, float(factor)

    def evaluate(self, coalition: Coalition) -> float:
        return self.factor * self.v(coalition)
