"""Lockstep simulation loop: spawn, act/move/pickup, then learn."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from hailsim.agents import Agent, Catchment, relocate_after_dropoff
from hailsim.gridworld import Block, GridWorld, WaitingPool, build_world, spawn_passengers
from hailsim.metrics import PickupRecord, RunMetrics
from hailsim.qlearning import Moves, QTable
from hailsim.rng import RandomStream
from hailsim.scenarios import ScenarioConfig, validate


@dataclass
class TickReport:
    tick: int
    spawned: int
    pickups: list[tuple[int, int, Block, str]] = field(default_factory=list)
    order: tuple[int, ...] = ()


class Simulation:
    """One run of a scenario driven by a single seeded stream.

    ``pickup_reward`` scales every reward; it exists for the reward-scaling
    check and is 1.0 in all real runs.
    """

    def __init__(self, config: ScenarioConfig, seed: int, pickup_reward: float = 1.0,
                 world: GridWorld | None = None):
        validate(config)
        self.config = config
        self.world = world if world is not None else build_world(config.world_spec())
        self.rng = RandomStream(seed)
        self.seed = seed
        self.tick = 0
        self.reward = pickup_reward
        self.terminal_pickup = config.terminal_pickup
        self.ttl = config.passenger_ttl
        self.waiting = WaitingPool(self.world.n_blocks)
        self._spawn_log: deque = deque()
        self._next_pid = 0
        self.ledger = RunMetrics(config.name, seed, config.iterations, config.digest())

        w = self.world
        self.moves = Moves(w.width, w.height)
        catchments = {c.id: Catchment(w, c) for c in config.classes}
        self.agents: list[Agent] = []
        self._catch: list[Catchment] = []
        for entry in config.roster:
            for _ in range(entry.count):
                x = self.rng.randbelow(w.width)
                y = self.rng.randbelow(w.height)
                qt = QTable(self.moves, config.learning)
                self.agents.append(Agent(len(self.agents), entry.taxi_class, Block(x, y), qt))
                self._catch.append(catchments[entry.taxi_class.id])

    def _expire(self) -> None:
        cutoff = self.tick - self.ttl
        log = self._spawn_log
        w = self.world.width
        buckets = self.waiting.buckets
        while log and log[0].spawn_tick <= cutoff:
            p = log.popleft()
            bucket = buckets[p.block.y * w + p.block.x]
            # picked passengers are already gone from their bucket
            if bucket and p in bucket:
                bucket.remove(p)
                self.waiting.count -= 1
                self.ledger.expired += 1

    def step(self) -> TickReport:
        world, rng, tick = self.world, self.rng, self.tick
        width = world.width
        if self.ttl is not None:
            self._expire()

        new = spawn_passengers(world, tick, rng, self._next_pid)
        self._next_pid += len(new)
        self.waiting.add(new, width)
        if self.ttl is not None:
            self._spawn_log.extend(new)
        spawned = self.ledger.spawned
        for p in new:
            spawned[p.demand_class] += 1

        order = rng.shuffled(range(len(self.agents)))
        report = TickReport(tick, len(new), order=tuple(order))
        succ = self.moves.succ
        zones, zone_index = world.zones, world.zone_index
        transitions = []
        for i in order:
            agent = self.agents[i]
            pos = agent.position
            s = pos.y * width + pos.x
            a = agent.qtable.select_index(s, rng)
            sn = succ[s][a]
            agent.pending = (s, a)
            p = self._catch[i].take(sn, self.waiting, rng, width)
            if p is None:
                agent.position = Block(sn % width, sn // width)
                transitions.append((agent, s, a, 0.0, sn, False))
                continue
            agent.pickups += 1
            k = p.block.y * width + p.block.x
            self.ledger.append(PickupRecord(tick, agent.id, agent.taxi_class.id, p.id, p.block,
                                            zones[zone_index[k]], p.demand_class))
            report.pickups.append((agent.id, p.id, p.block, p.demand_class))
            relocate_after_dropoff(agent, world, rng)
            transitions.append((agent, s, a, self.reward, sn, self.terminal_pickup))

        for agent, s, a, r, sn, terminal in transitions:
            agent.pending = None
            agent.qtable.update_index(s, a, r, sn, terminal)

        self.tick += 1
        self.ledger.ticks = self.tick
        return report


def run(config: ScenarioConfig, seed: int, iterations: int | None = None,
        pickup_reward: float = 1.0) -> RunMetrics:
    """Build the world and agents for ``config`` and run it to completion.

    ``iterations`` overrides the configured tick count (0 is allowed and yields
    an empty ledger).
    """
    sim = simulate(config, seed, iterations, pickup_reward)
    return sim.ledger


def simulate(config: ScenarioConfig, seed: int, iterations: int | None = None,
             pickup_reward: float = 1.0) -> Simulation:
    """Like :func:`run` but returns the finished :class:`Simulation`, for
    access to agents and their Q-tables."""
    n = config.iterations if iterations is None else iterations
    if n < 0:
        raise ValueError("iterations must be non-negative")
    sim = Simulation(config, seed, pickup_reward)
    sim.ledger.iterations = n
    for _ in range(n):
        sim.step()
    return sim
