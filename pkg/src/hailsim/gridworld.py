"""The simulated city: a block lattice with density zones, pickup masks and
stochastic passenger generation (including temporary demand bursts)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np

from hailsim.rng import RandomStream

DENSITY_CLASSES = ("high", "low", "very_high", "none")
FIXED = "fixed"
TEMPORARY = "temporary"


class ConfigurationError(ValueError):
    """Raised for invalid world or scenario configuration.

    ``path`` names the offending configuration key when one is known.
    """

    def __init__(self, message: str, path: str | None = None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class Block(NamedTuple):
    x: int
    y: int


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle of blocks, origin at its top-left corner."""

    x: int
    y: int
    width: int
    height: int

    def blocks(self) -> Iterator[Block]:
        for y in range(self.y, self.y + self.height):
            for x in range(self.x, self.x + self.width):
                yield Block(x, y)

    def contains(self, block: Block) -> bool:
        return (self.x <= block.x < self.x + self.width
                and self.y <= block.y < self.y + self.height)

    def within(self, width: int, height: int) -> bool:
        return (self.width > 0 and self.height > 0 and self.x >= 0 and self.y >= 0
                and self.x + self.width <= width and self.y + self.height <= height)

    @property
    def area(self) -> int:
        return self.width * self.height


@dataclass(frozen=True)
class ZoneLabel:
    name: str
    density_class: str = "none"

    def __post_init__(self):
        if self.density_class not in DENSITY_CLASSES:
            raise ConfigurationError(
                f"density_class must be one of {DENSITY_CLASSES}, got {self.density_class!r}")


@dataclass(frozen=True)
class ZoneSpec:
    region: Rect
    label: ZoneLabel
    spawn_prob: float


@dataclass(frozen=True)
class DemandBurst:
    region: Rect
    start_tick: int
    duration: int
    spawn_prob: float

    def active(self, tick: int) -> bool:
        return self.start_tick <= tick < self.start_tick + self.duration


@dataclass(frozen=True)
class Prohibition:
    class_id: str
    region: Rect


@dataclass(frozen=True)
class WorldSpec:
    width: int
    height: int
    zones: tuple[ZoneSpec, ...]
    bursts: tuple[DemandBurst, ...] = ()
    classes: tuple[str, ...] = ()
    prohibitions: tuple[Prohibition, ...] = ()


@dataclass(frozen=True, slots=True)
class Passenger:
    id: int
    block: Block
    spawn_tick: int
    demand_class: str = FIXED


def _check_prob(p: float, what: str) -> None:
    if not 0.0 <= p <= 1.0:
        raise ConfigurationError(f"probability must lie in [0, 1], got {p!r}", what)


class GridWorld:
    """Immutable city lattice.

    Blocks are indexed row-major (``index = y * width + x``); the engine works
    on indices, the public API on :class:`Block` values.
    """

    def __init__(self, width: int, height: int, base_prob: Sequence[float],
                 zone_index: Sequence[int], zones: Sequence[ZoneLabel],
                 masks: dict[str, Sequence[bool]], bursts: Iterable[DemandBurst] = ()):
        self.width = width
        self.height = height
        self.n_blocks = width * height
        self.base_spawn_prob = np.asarray(base_prob, dtype=float)
        self.base_spawn_prob.setflags(write=False)
        self.zone_index = tuple(int(z) for z in zone_index)
        self.zones = tuple(zones)
        self.pickup_mask = {cid: tuple(bool(v) for v in m) for cid, m in masks.items()}
        self.bursts = tuple(bursts)
        self._burst_cache: dict[tuple[int, ...], tuple[np.ndarray, np.ndarray]] = {}

    # block <-> index helpers
    def index(self, block: Block) -> int:
        return block.y * self.width + block.x

    def block(self, index: int) -> Block:
        return Block(index % self.width, index // self.width)

    def in_bounds(self, block: Block) -> bool:
        return 0 <= block.x < self.width and 0 <= block.y < self.height

    def blocks(self) -> Iterator[Block]:
        for y in range(self.height):
            for x in range(self.width):
                yield Block(x, y)

    def zone_of(self, block: Block) -> ZoneLabel:
        return self.zones[self.zone_index[self.index(block)]]

    @property
    def classes(self) -> tuple[str, ...]:
        return tuple(self.pickup_mask)

    def active_bursts(self, tick: int) -> tuple[int, ...]:
        return tuple(i for i, b in enumerate(self.bursts) if b.active(tick))

    def spawn_field(self, tick: int) -> tuple[np.ndarray, np.ndarray | None]:
        """Per-block spawn probabilities at ``tick`` and the burst-coverage mask
        (``None`` when no burst is active)."""
        active = self.active_bursts(tick)
        if not active:
            return self.base_spawn_prob, None
        cached = self._burst_cache.get(active)
        if cached is None:
            prob = self.base_spawn_prob.copy()
            covered = np.zeros(self.n_blocks, dtype=bool)
            burst_prob = np.full(self.n_blocks, -1.0)
            for i in active:
                b = self.bursts[i]
                for blk in b.region.blocks():
                    k = self.index(blk)
                    covered[k] = True
                    burst_prob[k] = max(burst_prob[k], b.spawn_prob)
            prob[covered] = burst_prob[covered]
            prob.setflags(write=False)
            covered.setflags(write=False)
            cached = self._burst_cache[active] = (prob, covered)
        return cached


def build_world(spec: WorldSpec) -> GridWorld:
    """Validate a :class:`WorldSpec` and construct the corresponding world.

    Zones must cover every block; overlapping zones are tolerated only when
    they agree on label and probability. Classes listed in ``spec.classes``
    (or mentioned by a prohibition) get a pickup mask, allowed everywhere
    except their prohibited regions.
    """
    w, h = spec.width, spec.height
    if w < 1 or h < 1:
        raise ConfigurationError(f"grid dimensions must be positive, got {w}x{h}", "grid")
    if not spec.zones:
        raise ConfigurationError("at least one zone is required", "zones")

    n = w * h
    labels: list[ZoneLabel] = []
    zone_index = [-1] * n
    base = [0.0] * n
    for i, z in enumerate(spec.zones):
        where = f"zones[{i}]"
        if not z.region.within(w, h):
            raise ConfigurationError(f"region {z.region} lies outside the {w}x{h} grid", where)
        _check_prob(z.spawn_prob, f"{where}.spawn_prob")
        if z.label not in labels:
            labels.append(z.label)
        li = labels.index(z.label)
        for blk in z.region.blocks():
            k = blk.y * w + blk.x
            if zone_index[k] >= 0 and (zone_index[k] != li or base[k] != z.spawn_prob):
                raise ConfigurationError(
                    f"region overlaps another zone with a conflicting label or probability at {tuple(blk)}",
                    where)
            zone_index[k] = li
            base[k] = z.spawn_prob
    missing = [k for k in range(n) if zone_index[k] < 0]
    if missing:
        blk = Block(missing[0] % w, missing[0] // w)
        raise ConfigurationError(f"zones do not tile the grid; block {tuple(blk)} is uncovered", "zones")

    for i, b in enumerate(spec.bursts):
        where = f"bursts[{i}]"
        if not b.region.within(w, h):
            raise ConfigurationError(f"region {b.region} lies outside the {w}x{h} grid", where)
        if b.duration <= 0:
            raise ConfigurationError("duration must be positive", f"{where}.duration")
        if b.start_tick < 0:
            raise ConfigurationError("start_tick must be non-negative", f"{where}.start_tick")
        _check_prob(b.spawn_prob, f"{where}.spawn_prob")

    masks: dict[str, list[bool]] = {cid: [True] * n for cid in spec.classes}
    for i, p in enumerate(spec.prohibitions):
        where = f"prohibitions[{i}]"
        if not p.region.within(w, h):
            raise ConfigurationError(f"region {p.region} lies outside the {w}x{h} grid", where)
        mask = masks.setdefault(p.class_id, [True] * n)
        for blk in p.region.blocks():
            mask[blk.y * w + blk.x] = False

    return GridWorld(w, h, base, zone_index, labels, masks, spec.bursts)


def active_spawn_prob(world: GridWorld, block: Block, tick: int) -> float:
    """Spawn probability at ``block`` on ``tick``: the base value, overridden by
    the largest covering burst while any burst is live."""
    best = None
    for b in world.bursts:
        if b.active(tick) and b.region.contains(block):
            best = b.spawn_prob if best is None else max(best, b.spawn_prob)
    if best is not None:
        return best
    return float(world.base_spawn_prob[world.index(block)])


def spawn_passengers(world: GridWorld, tick: int, rng: RandomStream,
                     first_id: int = 0) -> list[Passenger]:
    """Draw one Bernoulli trial per block (row-major) and emit new passengers.

    Ids are assigned consecutively from ``first_id``.
    """
    prob, covered = world.spawn_field(tick)
    hits = np.flatnonzero(rng.uniforms(world.n_blocks) < prob).tolist()
    w = world.width
    out = []
    for offset, k in enumerate(hits):
        demand = TEMPORARY if covered is not None and covered[k] else FIXED
        out.append(Passenger(first_id + offset, Block(k % w, k // w), tick, demand))
    return out


def pickup_allowed(world: GridWorld, class_id: str, block: Block) -> bool:
    try:
        mask = world.pickup_mask[class_id]
    except KeyError:
        raise ConfigurationError(f"taxi class {class_id!r} is not registered with this world") from None
    return mask[world.index(block)]


@dataclass
class WaitingPool:
    """Waiting passengers bucketed by block index, each bucket in id order."""

    n_blocks: int
    buckets: list[list[Passenger]] = field(init=False)
    count: int = field(init=False, default=0)

    def __post_init__(self):
        self.buckets = [[] for _ in range(self.n_blocks)]

    def add(self, passengers: Iterable[Passenger], width: int) -> None:
        for p in passengers:
            self.buckets[p.block.y * width + p.block.x].append(p)
            self.count += 1

    def remove(self, p: Passenger, width: int) -> None:
        self.buckets[p.block.y * width + p.block.x].remove(p)
        self.count -= 1

    def __iter__(self) -> Iterator[Passenger]:
        return iter(sorted((p for b in self.buckets for p in b), key=lambda p: p.id))

    def __len__(self) -> int:
        return self.count

    def __contains__(self, p: Passenger) -> bool:
        return any(p in b for b in self.buckets)
