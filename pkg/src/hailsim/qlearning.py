"""Tabular Q-learning: per-agent action values over (block, direction)."""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

from hailsim.gridworld import Block, ConfigurationError, GridWorld
from hailsim.rng import RandomStream


class Action(IntEnum):
    NORTH = 0
    EAST = 1
    SOUTH = 2
    WEST = 3

    @property
    def delta(self) -> tuple[int, int]:
        return _DELTAS[self]


# row 0 is the northern edge
_DELTAS = ((0, -1), (1, 0), (0, 1), (-1, 0))
_OFF_GRID = float("-inf")


@dataclass(frozen=True)
class LearningParams:
    mu: float = 0.1
    gamma: float = 0.9
    epsilon: float = 0.1

    def __post_init__(self):
        if not 0.0 <= self.mu <= 1.0:
            raise ConfigurationError(f"must lie in [0, 1], got {self.mu!r}", "learning.mu")
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigurationError(f"must lie in [0, 1), got {self.gamma!r}", "learning.gamma")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ConfigurationError(f"must lie in [0, 1], got {self.epsilon!r}", "learning.epsilon")


class Moves:
    """Valid actions and successor states of every block of a grid."""

    def __init__(self, width: int, height: int):
        self.width = width
        self.height = height
        self.valid: list[tuple[int, ...]] = []
        self.succ: list[list[int]] = []
        for y in range(height):
            for x in range(width):
                acts, nxt = [], [-1, -1, -1, -1]
                for a, (dx, dy) in enumerate(_DELTAS):
                    nx, ny = x + dx, y + dy
                    if 0 <= nx < width and 0 <= ny < height:
                        acts.append(a)
                        nxt[a] = ny * width + nx
                self.valid.append(tuple(acts))
                self.succ.append(nxt)


class QTable:
    """Action-value table of one agent, zero-initialised.

    Storage is a list of four-slot rows indexed by block index. Slots of
    actions that would leave the grid hold ``-inf`` so plain ``max`` over a
    row is the greedy value; they are never exposed or updated.
    """

    def __init__(self, moves: Moves, params: LearningParams):
        self.moves = moves
        self.params = params
        self.values = [[0.0 if a in acts else _OFF_GRID for a in range(4)]
                       for acts in moves.valid]

    def _index(self, s: Block) -> int:
        m = self.moves
        if not (0 <= s.x < m.width and 0 <= s.y < m.height):
            raise ValueError(f"state {tuple(s)} is outside the {m.width}x{m.height} grid")
        return s.y * m.width + s.x

    def _check(self, si: int, a: int) -> None:
        if a not in self.moves.valid[si]:
            raise ValueError(f"action {Action(a).name} is not valid at state {si}")

    def get(self, s: Block, a: Action) -> float:
        si = self._index(s)
        self._check(si, a)
        return self.values[si][a]

    def set(self, s: Block, a: Action, value: float) -> None:
        si = self._index(s)
        self._check(si, a)
        self.values[si][a] = value

    def valid_actions(self, s: Block) -> list[Action]:
        return [Action(a) for a in self.moves.valid[self._index(s)]]

    def items(self):
        """Yield ``(Block, Action, value)`` for every valid pair, row-major."""
        w = self.moves.width
        for si, acts in enumerate(self.moves.valid):
            row = self.values[si]
            for a in acts:
                yield Block(si % w, si // w), Action(a), row[a]

    def greedy_actions(self, s: Block) -> list[Action]:
        row = self.values[self._index(s)]
        best = max(row)
        return [Action(a) for a in range(4) if row[a] == best]

    def greedy_index(self, si: int) -> float:
        return max(self.values[si])

    def update_index(self, si: int, a: int, r: float, sn: int, terminal: bool) -> float:
        mu = self.params.mu
        row = self.values[si]
        target = r if terminal else r + self.params.gamma * max(self.values[sn])
        row[a] = (1.0 - mu) * row[a] + mu * target
        return row[a]

    def select_index(self, si: int, rng: RandomStream) -> int:
        if rng.random() < self.params.epsilon:
            acts = self.moves.valid[si]
            return acts[rng.randbelow(len(acts))]
        row = self.values[si]
        best = max(row)
        if row.count(best) == 1:
            return row.index(best)
        ties = [a for a in range(4) if row[a] == best]
        return ties[rng.randbelow(len(ties))]


def q_update(table: QTable, s: Block, a: Action, r: float, s_next: Block,
             terminal: bool = False) -> float:
    """Apply one Q-learning backup and return the new value of ``(s, a)``.

    Terminal transitions drop the bootstrap term.
    """
    si = table._index(s)
    table._check(si, a)
    sn = table._index(s_next)
    return table.update_index(si, int(a), r, sn, terminal)


def select_action(table: QTable, s: Block, rng: RandomStream) -> Action:
    """Epsilon-greedy choice over the valid actions at ``s``; argmax ties are
    broken uniformly at random."""
    return Action(table.select_index(table._index(s), rng))


def greedy_value(table: QTable, s: Block) -> float:
    return table.greedy_index(table._index(s))


def value_iteration(world: GridWorld, reward_blocks, gamma: float,
                    tol: float = 1e-12) -> dict[Block, float]:
    """Optimal state values of the deterministic grid walk that pays 1 and
    terminates on entering any block in ``reward_blocks``.

    Used as an oracle for learned policies; away from reward blocks the result
    equals ``gamma ** (d - 1)`` with ``d`` the Manhattan distance to the
    nearest reward block.
    """
    rewards = {Block(*b) for b in reward_blocks}
    if not rewards:
        raise ValueError("reward_blocks must be non-empty")
    if tol <= 0:
        raise ValueError("tol must be positive")
    moves = Moves(world.width, world.height)
    n = len(moves.valid)
    is_reward = [world.block(k) in rewards for k in range(n)]
    v = [0.0] * n
    while True:
        delta = 0.0
        new = [0.0] * n
        for s in range(n):
            best = 0.0
            for a in moves.valid[s]:
                sn = moves.succ[s][a]
                q = 1.0 if is_reward[sn] else gamma * v[sn]
                if q > best:
                    best = q
            new[s] = best
            delta = max(delta, abs(best - v[s]))
        v = new
        if delta < tol:
            break
    return {world.block(k): v[k] for k in range(n)}
