# stdlib imports
from abc import ABC, abstractmethod
from typing import Literal, Optional

# external imports
import numpy as np

# internal imports
from src.approximator.core import ParamVector
from src.exceptions import ShapeError


class Optimizer(ABC):
    """
    Adaptive first-order optimizer over a ParamVector.

    Moment buffers are allocated lazily on the first step to the parameter length.

    Attributes:
        lr (float): learning rate.
        steps (int): number of updates applied.
    """

    def __init__(self, lr: float) -> None:
        if lr <= 0:
            raise ValueError(f"Learning rate must be positive, got {lr}.")
        self.lr = lr
        self.steps = 0
        self.size: Optional[int] = None

    def step(self, params: ParamVector, grad: ParamVector) -> ParamVector:
        params.check_compatible(grad)
        if self.size is None:
            self.size = len(params)
            self._allocate(self.size)
        elif self.size != len(params):
            raise ShapeError(f"Optimizer holds {self.size} moments, got {len(params)} parameters.")
        self.steps += 1
        params.data -= self._update(grad.data)
        params.version += 1
        return params

    @abstractmethod
    def _allocate(self, size: int) -> None:
        pass

    @abstractmethod
    def _update(self, grad: np.ndarray) -> np.ndarray:
        pass


class Adam(Optimizer):
    """First- and second-moment adaptive optimizer with bias correction."""

    def __init__(
        self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8
    ) -> None:
        super().__init__(lr)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m: Optional[np.ndarray] = None
        self.v: Optional[np.ndarray] = None

    def _allocate(self, size: int) -> None:
        self.m, self.v = np.zeros(size), np.zeros(size)

    def _update(self, grad: np.ndarray) -> np.ndarray:
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad**2
        m_hat = self.m / (1.0 - self.beta1**self.steps)
        v_hat = self.v / (1.0 - self.beta2**self.steps)
        return self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class RMSProp(Optimizer):
    """Second-moment adaptive optimizer."""

    def __init__(self, lr: float, alpha: float = 0.99, eps: float = 1e-5) -> None:
        super().__init__(lr)
        self.alpha, self.eps = alpha, eps
        self.square_avg: Optional[np.ndarray] = None

    def _allocate(self, size: int) -> None:
        self.square_avg = np.zeros(size)

    def _update(self, grad: np.ndarray) -> np.ndarray:
        self.square_avg = self.alpha * self.square_avg + (1.0 - self.alpha) * grad**2
        return self.lr * grad / (np.sqrt(self.square_avg) + self.eps)


def make_optimizer(kind: Literal["adam", "rmsprop"], lr: float) -> Optimizer:
    if kind == "adam":
        return Adam(lr)
    if kind == "rmsprop":
        return RMSProp(lr)
    raise ValueError(f"Unknown optimizer kind {kind!r}; expected 'adam' or 'rmsprop'.")


def optimizer_step(opt: Optimizer, params: ParamVector, grad: ParamVector) -> ParamVector:
    """Apply one adaptive update of ``params`` along ``-grad``."""
    return opt.step(params, grad)
