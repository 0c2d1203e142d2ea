# stdlib imports
from itertools import permutations
from typing import List, Optional, Sequence, Tuple

# external imports
import numpy as np

# internal imports
from src.dec_pomdp.core import DecPomdpEnv, DecPomdpSpec, JointAction

Cell = Tuple[int, int]

NO_OP, UP, DOWN, LEFT, RIGHT = range(5)
MOVES = {NO_OP: (0, 0), UP: (-1, 0), DOWN: (1, 0), LEFT: (0, -1), RIGHT: (0, 1)}


class TeamGridworld(DecPomdpEnv):
    """
    Cooperative target-occupation gridworld.

    Agents move on a ``height x width`` grid (cells are ``(row, col)``) with actions
    no-op/up/down/left/right; moves into the boundary leave the agent in place and
    agents may share cells. Each step in which at least ``required`` distinct target
    cells are occupied pays +1, and every step costs ``step_penalty``.

    Local observation of an agent (all features scaled by their maxima):
        - ``(2 * sight + 1)**2`` target flags around the agent,
        - ``(2 * sight + 1)**2`` counts of other agents (divided by ``n - 1``),
        - ``(2 * sight + 1)**2`` out-of-grid flags,
        - own row and column.
    Unrestricted observation (critic side): own position, offsets to every target
    and offsets to every other agent, with no sight restriction.

    Attributes:
        targets (List[Cell])
        required (int): number of distinct targets that must be occupied together.
        starts (Optional[List[Cell]]): fixed start cells, or None for seeded random starts.
    """

    def __init__(
        self,
        width: int = 5,
        height: int = 5,
        n_agents: int = 3,
        targets: Optional[Sequence[Cell]] = None,
        required: Optional[int] = None,
        sight: int = 1,
        episode_limit: int = 30,
        step_penalty: float = 0.01,
        starts: Optional[Sequence[Cell]] = None,
        gamma: float = 0.99,
        groups: Optional[Sequence[int]] = None,
    ) -> None:
        if width < 1 or height < 1:
            raise ValueError(f"Grid must be at least 1x1, got {height}x{width}.")
        if sight < 0:
            raise ValueError(f"sight must be non-negative, got {sight}.")
        self.width, self.height, self.sight = width, height, sight
        self.targets: List[Cell] = [
            tuple(t) for t in (targets or [(0, 0), (0, width - 1), (height - 1, width - 1)])
        ]
        for cell in self.targets:
            self._check_cell(cell)
        if len(set(self.targets)) != len(self.targets):
            raise ValueError("Target cells must be distinct.")
        self.required = len(self.targets) if required is None else required
        if not 1 <= self.required <= min(len(self.targets), n_agents):
            raise ValueError(
                f"required={self.required} must lie in 1..min(targets, agents)."
            )
        self.starts = None if starts is None else [tuple(s) for s in starts]
        if self.starts is not None:
            if len(self.starts) != n_agents:
                raise ValueError(f"Got {len(self.starts)} start cells for {n_agents} agents.")
            for cell in self.starts:
                self._check_cell(cell)
        self.step_penalty = step_penalty
        window = (2 * sight + 1) ** 2
        super().__init__(
            DecPomdpSpec(
                n_agents=n_agents,
                action_space_size=len(MOVES),
                obs_dim=3 * window + 2,
                state_obs_dim=2 + 2 * len(self.targets) + 2 * (n_agents - 1),
                episode_limit=episode_limit,
                gamma=gamma,
                groups=tuple(groups) if groups is not None else (),
                no_op_action=NO_OP,
            )
        )
        self.positions: List[Cell] = []
        self._achieved = False

    def _check_cell(self, cell: Cell) -> None:
        row, col = cell
        if not (0 <= row < self.height and 0 <= col < self.width):
            raise ValueError(f"Cell {cell} lies outside the {self.height}x{self.width} grid.")

    def _in_grid(self, row: int, col: int) -> bool:
        return 0 <= row < self.height and 0 <= col < self.width

    @property
    def success(self) -> bool:
        return self._achieved

    def occupied_targets(self) -> int:
        return len(set(self.positions) & set(self.targets))

    def optimal_return(self) -> float:
        """Best achievable undiscounted return from the fixed start cells.

        The earliest rewarding step is the bottleneck distance ``d`` of the best
        assignment of ``required`` agents to distinct targets; from then on every
        step pays +1.
        """
        if self.starts is None:
            raise ValueError("Optimal return is only defined for fixed start cells.")
        limit = self.spec.episode_limit
        best = min(
            max(
                abs(self.starts[a][0] - t[0]) + abs(self.starts[a][1] - t[1])
                for a, t in zip(agents, targets)
            )
            for agents in permutations(range(self.spec.n_agents), self.required)
            for targets in permutations(self.targets, self.required)
        )
        rewarding_steps = max(limit - max(best, 1) + 1, 0)
        return rewarding_steps - self.step_penalty * limit

    def _initial_state(self, rng: np.random.Generator) -> None:
        if self.starts is not None:
            self.positions = list(self.starts)
        else:
            cells = rng.integers(0, self.height * self.width, size=self.spec.n_agents)
            self.positions = [(int(c) // self.width, int(c) % self.width) for c in cells]
        self._achieved = False

    def _transition(self, joint_action: JointAction) -> Tuple[float, bool]:
        moved = []
        for (row, col), action in zip(self.positions, joint_action.actions):
            d_row, d_col = MOVES[action]
            if self._in_grid(row + d_row, col + d_col):
                row, col = row + d_row, col + d_col
            moved.append((row, col))
        self.positions = moved
        reward = -self.step_penalty
        if self.occupied_targets() >= self.required:
            reward += 1.0
            self._achieved = True
        return reward, False

    def _local_observation(self, agent: int) -> np.ndarray:
        row, col = self.positions[agent]
        side = 2 * self.sight + 1
        target_cells = set(self.targets)
        others = [p for j, p in enumerate(self.positions) if j != agent]
        max_others = max(self.spec.n_agents - 1, 1)
        targets = np.zeros((side, side))
        crowd = np.zeros((side, side))
        walls = np.zeros((side, side))
        for i, d_row in enumerate(range(-self.sight, self.sight + 1)):
            for j, d_col in enumerate(range(-self.sight, self.sight + 1)):
                cell = (row + d_row, col + d_col)
                if not self._in_grid(*cell):
                    walls[i, j] = 1.0
                    continue
                targets[i, j] = float(cell in target_cells)
                crowd[i, j] = others.count(cell) / max_others
        position = [row / max(self.height - 1, 1), col / max(self.width - 1, 1)]
        return np.concatenate([targets.ravel(), crowd.ravel(), walls.ravel(), position])

    def _unrestricted_observation(self, agent: int) -> np.ndarray:
        row, col = self.positions[agent]
        scale = np.array([max(self.height - 1, 1), max(self.width - 1, 1)], dtype=np.float64)
        own = np.array([row, col]) / scale
        to_targets = [(np.array(t) - (row, col)) / scale for t in self.targets]
        to_others = [
            (np.array(p) - (row, col)) / scale
            for j, p in enumerate(self.positions)
            if j != agent
        ]
        return np.concatenate([own, *to_targets, *to_others])

    def _observe(self) -> Tuple[np.ndarray, np.ndarray]:
        n = self.spec.n_agents
        observations = np.stack([self._local_observation(i) for i in range(n)])
        state = np.concatenate([self._unrestricted_observation(i) for i in range(n)])
        return observations, state
