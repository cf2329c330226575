"""Taxi classes, agents, pickup eligibility and post-dropoff relocation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from hailsim.gridworld import Block, GridWorld, Passenger, WaitingPool, pickup_allowed
from hailsim.qlearning import QTable
from hailsim.rng import RandomStream

CHEBYSHEV = "chebyshev"
MANHATTAN = "manhattan"


@dataclass(frozen=True)
class TaxiClass:
    """A taxi service. Hailing cabs have ``pickup_radius`` 0, e-hailers 1.

    ``neighborhood`` selects how the radius is measured: ``chebyshev`` covers
    the full square around the taxi, ``manhattan`` only the orthogonal cross.
    """

    id: str
    pickup_radius: int = 0
    display_name: str = ""
    neighborhood: str = CHEBYSHEV

    def distance(self, a: Block, b: Block) -> int:
        dx, dy = abs(a.x - b.x), abs(a.y - b.y)
        return max(dx, dy) if self.neighborhood == CHEBYSHEV else dx + dy


@dataclass
class Agent:
    id: int
    taxi_class: TaxiClass
    position: Block
    qtable: QTable
    pending: tuple | None = None
    pickups: int = 0


class Catchment:
    """Per-position block indices an agent of one class may pick up from:
    within its radius and not prohibited for its class."""

    def __init__(self, world: GridWorld, taxi_class: TaxiClass):
        mask = world.pickup_mask[taxi_class.id]
        r = taxi_class.pickup_radius
        self.blocks: list[tuple[int, ...]] = []
        for here in world.blocks():
            near = []
            for y in range(max(0, here.y - r), min(world.height, here.y + r + 1)):
                for x in range(max(0, here.x - r), min(world.width, here.x + r + 1)):
                    k = y * world.width + x
                    if mask[k] and taxi_class.distance(here, Block(x, y)) <= r:
                        near.append(k)
            self.blocks.append(tuple(near))

    def _scan(self, position_index: int, pool: WaitingPool):
        # (single non-empty bucket, merged id-sorted list when several)
        buckets = pool.buckets
        found = None
        merged = None
        for k in self.blocks[position_index]:
            b = buckets[k]
            if b:
                if found is None:
                    found = b
                elif merged is None:
                    merged = found + b
                else:
                    merged += b
        if merged is not None:
            merged.sort(key=_by_id)
        return found, merged

    def eligible(self, position_index: int, pool: WaitingPool) -> list[Passenger]:
        found, merged = self._scan(position_index, pool)
        if merged is not None:
            return merged
        return list(found) if found is not None else []

    def take(self, position_index: int, pool: WaitingPool, rng: RandomStream,
             width: int) -> Passenger | None:
        """Remove and return one uniformly chosen eligible passenger, or None
        (consuming no draw) when nothing is in reach."""
        found, merged = self._scan(position_index, pool)
        if merged is not None:
            p = merged[rng.randbelow(len(merged))]
            pool.remove(p, width)
            return p
        if found is not None:
            p = found.pop(rng.randbelow(len(found)))
            pool.count -= 1
            return p
        return None


def _by_id(p: Passenger) -> int:
    return p.id


def eligible_pickups(agent: Agent, world: GridWorld,
                     waiting: Iterable[Passenger]) -> list[Passenger]:
    """Waiting passengers within the agent's pickup radius whose block permits
    pickup by the agent's class, in id order."""
    cls = agent.taxi_class
    return sorted(
        (p for p in waiting
         if cls.distance(agent.position, p.block) <= cls.pickup_radius
         and pickup_allowed(world, cls.id, p.block)),
        key=_by_id,
    )


def relocate_after_dropoff(agent: Agent, world: GridWorld, rng: RandomStream) -> Block:
    """Teleport the agent to a uniformly random block (x drawn before y).
    Pickup masks are ignored: drop-offs may land anywhere."""
    x = rng.randbelow(world.width)
    y = rng.randbelow(world.height)
    agent.position = Block(x, y)
    return agent.position
