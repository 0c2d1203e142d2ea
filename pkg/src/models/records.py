from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional


@dataclass
class EvaluationResult:
    mean_return: float
    success_rate: float


@dataclass
class MetricsRecord:
    """
    One row of ``metrics.csv``, written every evaluation interval.

    Losses and credit statistics are means over the training iterations of the
    interval; they are NaN when no update ran (the initial row, or while the
    buffer is still filling).
    """

    episode: int
    eval_return: float
    success_rate: float
    epsilon: float
    critic_loss: float
    agent_loss: float
    credit_mean: float
    credit_std: float

    def as_row(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class AuditStep:
    """
    Credits of one greedy step under every strategy.

    Attributes:
        step (int)
        grand_value (float): ``f(H_A)``.
        exact (Optional[List[float]]): None when the agent count exceeds the exact cap.
        monte_carlo (Dict[int, List[float]]): sample count → credits.
        plain_cf (List[float])
        uniform (List[float])
        critic_evaluations (Dict[int, int]): sample count → critic rows spent by MC.
    """

    step: int
    grand_value: float
    exact: Optional[List[float]]
    monte_carlo: Dict[int, List[float]]
    plain_cf: List[float]
    uniform: List[float]
    critic_evaluations: Dict[int, int] = field(default_factory=dict)

    def __repr__(self) -> str:
        return f"AuditStep ({self.step}: f(H_A)={self.grand_value:.4f})"


@dataclass
class AuditSummaryRecord:
    samples: int
    mae: float
    rank_correlation: float

    def as_row(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class BenchRecord:
    """One row of ``bench.csv``; ``samples`` is 0 for the exact method."""

    n: int
    method: str
    samples: int
    coalitions: int
    marginal_evaluations: int
    critic_evaluations: int
    seconds: float

    def as_row(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class RunSummary:
    """
    Machine-readable summary written next to every artifact.

    Attributes:
        command (str): ``train``, ``audit`` or ``bench``.
        seed (int)
        config (Dict[str, Any]): echo of the parsed configuration.
        results (Dict[str, Any]): command-specific figures.
    """

    command: str
    seed: int
    config: Dict[str, Any]
    results: Dict[str, Any] = field(default_factory=dict)

    def as_dict(self) -> Dict[str, Any]:
        return asdict(self)
