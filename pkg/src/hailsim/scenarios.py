"""Scenario configurations: the built-in hypothesis and policy worlds and the
YAML file format for custom ones.

Geometry and spawn rates below are modelling defaults, not calibrated values.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, replace

import yaml

from hailsim.agents import CHEBYSHEV, MANHATTAN, TaxiClass
from hailsim.gridworld import (
    DENSITY_CLASSES,
    ConfigurationError,
    DemandBurst,
    Prohibition,
    Rect,
    WorldSpec,
    ZoneLabel,
    ZoneSpec,
    build_world,
)
from hailsim.qlearning import LearningParams

GRID = 20
AGENTS_PER_CLASS = 5
ITERATIONS = 90_000
P_LOW = 0.001
P_HIGH = 0.005
P_VERY_HIGH = 0.05
PASSENGER_TTL: int | None = None

CAB = TaxiClass("cab", 0, "Cab")
YELLOW = TaxiClass("yellow", 0, "Yellow Cab")
GREEN = TaxiClass("green", 0, "Green Cab")
UBER = TaxiClass("uber", 1, "Uber")


ConfigError = ConfigurationError


@dataclass(frozen=True)
class RosterEntry:
    taxi_class: TaxiClass
    count: int


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    width: int
    height: int
    zones: tuple[ZoneSpec, ...]
    roster: tuple[RosterEntry, ...]
    bursts: tuple[DemandBurst, ...] = ()
    prohibitions: tuple[Prohibition, ...] = ()
    learning: LearningParams = LearningParams()
    iterations: int = ITERATIONS
    passenger_ttl: int | None = None
    terminal_pickup: bool = True

    @property
    def grid(self) -> tuple[int, int]:
        return (self.width, self.height)

    @property
    def classes(self) -> tuple[TaxiClass, ...]:
        return tuple(e.taxi_class for e in self.roster)

    def world_spec(self) -> WorldSpec:
        return WorldSpec(self.width, self.height, self.zones, self.bursts,
                         tuple(c.id for c in self.classes), self.prohibitions)

    def digest(self) -> str:
        return hashlib.sha256(serialize_config(self).encode()).hexdigest()[:16]


# --- validation ------------------------------------------------------------

def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def validate(config: ScenarioConfig) -> ScenarioConfig:
    """Check every ScenarioConfig invariant; raise :class:`ConfigError`
    naming the offending key path. Returns the config unchanged."""
    if not isinstance(config.name, str) or not config.name:
        raise ConfigError("must be a non-empty string", "name")
    for key in ("width", "height"):
        v = getattr(config, key)
        if not _is_int(v) or v < 1:
            raise ConfigError(f"must be a positive integer, got {v!r}", f"grid.{key}")
    if config.width * config.height < 2:
        raise ConfigError("grid needs at least two blocks for movement", "grid")
    if not _is_int(config.iterations) or config.iterations <= 0:
        raise ConfigError(f"must be a positive integer, got {config.iterations!r}", "iterations")
    ttl = config.passenger_ttl
    if ttl is not None and (not _is_int(ttl) or ttl <= 0):
        raise ConfigError(f"must be a positive integer or null, got {ttl!r}", "passenger_ttl")
    if not config.roster:
        raise ConfigError("at least one taxi class is required", "roster")
    seen = set()
    for i, e in enumerate(config.roster):
        c = e.taxi_class
        where = f"roster[{i}]"
        if not isinstance(c.id, str) or not c.id:
            raise ConfigError("must be a non-empty string", f"{where}.class")
        if c.id in seen:
            raise ConfigError(f"duplicate class {c.id!r}", f"{where}.class")
        seen.add(c.id)
        if not _is_int(e.count) or e.count <= 0:
            raise ConfigError(f"must be a positive integer, got {e.count!r}", f"{where}.count")
        if not _is_int(c.pickup_radius) or c.pickup_radius < 0:
            raise ConfigError(f"must be a non-negative integer, got {c.pickup_radius!r}",
                              f"{where}.pickup_radius")
        if c.neighborhood not in (CHEBYSHEV, MANHATTAN):
            raise ConfigError(f"must be {CHEBYSHEV!r} or {MANHATTAN!r}", f"{where}.neighborhood")
    for i, p in enumerate(config.prohibitions):
        if p.class_id not in seen:
            raise ConfigError(f"class {p.class_id!r} does not appear in the roster",
                              f"prohibitions[{i}].class")
    p = config.learning
    LearningParams(p.mu, p.gamma, p.epsilon)
    build_world(config.world_spec())
    return config


# --- serialisation ---------------------------------------------------------

def _rect_doc(r: Rect) -> dict:
    return {"x": r.x, "y": r.y, "width": r.width, "height": r.height}


def config_to_dict(config: ScenarioConfig) -> dict:
    return {
        "name": config.name,
        "grid": {"width": config.width, "height": config.height},
        "zones": [{"region": _rect_doc(z.region), "label": z.label.name,
                   "density": z.label.density_class, "spawn_prob": z.spawn_prob}
                  for z in config.zones],
        "bursts": [{"region": _rect_doc(b.region), "start_tick": b.start_tick,
                    "duration": b.duration, "spawn_prob": b.spawn_prob}
                   for b in config.bursts],
        "roster": [{"class": e.taxi_class.id, "display_name": e.taxi_class.display_name,
                    "pickup_radius": e.taxi_class.pickup_radius,
                    "neighborhood": e.taxi_class.neighborhood, "count": e.count}
                   for e in config.roster],
        "prohibitions": [{"class": p.class_id, "region": _rect_doc(p.region)}
                         for p in config.prohibitions],
        "learning": {"mu": config.learning.mu, "gamma": config.learning.gamma,
                     "epsilon": config.learning.epsilon,
                     "terminal_pickup": config.terminal_pickup},
        "iterations": config.iterations,
        "passenger_ttl": config.passenger_ttl,
    }


def serialize_config(config: ScenarioConfig) -> str:
    return yaml.safe_dump(config_to_dict(config), sort_keys=False, default_flow_style=None, width=100)


class _Reader:
    """Typed access to a nested mapping that reports errors by key path."""

    def __init__(self, doc, path: str = ""):
        self.doc = doc
        self.path = path

    def _sub(self, key) -> str:
        if isinstance(key, int):
            return f"{self.path}[{key}]"
        return f"{self.path}.{key}" if self.path else key

    def mapping(self, allowed: set[str], required: set[str]) -> None:
        if not isinstance(self.doc, dict):
            raise ConfigError("expected a mapping", self.path or "<document>")
        for k in self.doc:
            if k not in allowed:
                raise ConfigError("unknown key", self._sub(k))
        for k in sorted(required):
            if k not in self.doc:
                raise ConfigError("missing required key", self._sub(k))

    def child(self, key) -> "_Reader":
        return _Reader(self.doc[key], self._sub(key))

    def items(self, key) -> list["_Reader"]:
        if key not in self.doc or self.doc[key] is None:
            return []
        seq = self.doc[key]
        if not isinstance(seq, list):
            raise ConfigError("expected a list", self._sub(key))
        sub = self._sub(key)
        return [_Reader(v, f"{sub}[{i}]") for i, v in enumerate(seq)]

    def int(self, key, default=..., minimum: int | None = None):
        if key not in self.doc and default is not ...:
            return default
        v = self.doc[key]
        if v is None and default is None:
            return None
        if not _is_int(v):
            raise ConfigError(f"expected an integer, got {v!r}", self._sub(key))
        if minimum is not None and v < minimum:
            raise ConfigError(f"must be >= {minimum}, got {v}", self._sub(key))
        return v

    def prob(self, key, default=..., upper_open: bool = False) -> float:
        if key not in self.doc and default is not ...:
            return default
        v = self.doc[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"expected a number, got {v!r}", self._sub(key))
        v = float(v)
        if not (0.0 <= v < 1.0 if upper_open else 0.0 <= v <= 1.0):
            rng = "[0, 1)" if upper_open else "[0, 1]"
            raise ConfigError(f"must lie in {rng}, got {v!r}", self._sub(key))
        return v

    def str(self, key, default=..., choices=None) -> str:
        if key not in self.doc and default is not ...:
            return default
        v = self.doc[key]
        if not isinstance(v, str) or not v:
            raise ConfigError(f"expected a non-empty string, got {v!r}", self._sub(key))
        if choices is not None and v not in choices:
            raise ConfigError(f"must be one of {sorted(choices)}, got {v!r}", self._sub(key))
        return v

    def bool(self, key, default=...) -> bool:
        if key not in self.doc and default is not ...:
            return default
        v = self.doc[key]
        if not isinstance(v, bool):
            raise ConfigError(f"expected true or false, got {v!r}", self._sub(key))
        return v

    def rect(self, key) -> Rect:
        r = self.child(key)
        r.mapping({"x", "y", "width", "height"}, {"x", "y", "width", "height"})
        return Rect(r.int("x", minimum=0), r.int("y", minimum=0),
                    r.int("width", minimum=1), r.int("height", minimum=1))


def parse_config(text: str) -> ScenarioConfig:
    """Parse and validate a YAML scenario document."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"not valid YAML: {exc}") from None
    top = _Reader(doc)
    top.mapping({"name", "grid", "zones", "bursts", "roster", "prohibitions", "learning",
                 "iterations", "passenger_ttl"},
                {"name", "grid", "zones", "roster", "iterations"})
    grid = top.child("grid")
    grid.mapping({"width", "height"}, {"width", "height"})

    zones = []
    for z in top.items("zones"):
        z.mapping({"region", "label", "density", "spawn_prob"}, {"region", "label", "spawn_prob"})
        label = ZoneLabel(z.str("label"), z.str("density", "none", choices=set(DENSITY_CLASSES)))
        zones.append(ZoneSpec(z.rect("region"), label, z.prob("spawn_prob")))

    bursts = []
    for b in top.items("bursts"):
        b.mapping({"region", "start_tick", "duration", "spawn_prob"},
                  {"region", "start_tick", "duration", "spawn_prob"})
        bursts.append(DemandBurst(b.rect("region"), b.int("start_tick", minimum=0),
                                  b.int("duration", minimum=1), b.prob("spawn_prob")))

    roster = []
    for e in top.items("roster"):
        e.mapping({"class", "display_name", "pickup_radius", "neighborhood", "count"},
                  {"class", "pickup_radius", "count"})
        cid = e.str("class")
        cls = TaxiClass(cid, e.int("pickup_radius", minimum=0), e.doc.get("display_name") or "",
                        e.str("neighborhood", CHEBYSHEV, choices={CHEBYSHEV, MANHATTAN}))
        roster.append(RosterEntry(cls, e.int("count", minimum=1)))

    prohibitions = []
    for p in top.items("prohibitions"):
        p.mapping({"class", "region"}, {"class", "region"})
        prohibitions.append(Prohibition(p.str("class"), p.rect("region")))

    mu, gamma, eps, terminal = 0.1, 0.9, 0.1, True
    if doc.get("learning") is not None:
        lr = top.child("learning")
        lr.mapping({"mu", "gamma", "epsilon", "terminal_pickup"}, set())
        mu = lr.prob("mu", mu)
        gamma = lr.prob("gamma", gamma, upper_open=True)
        eps = lr.prob("epsilon", eps)
        terminal = lr.bool("terminal_pickup", terminal)

    config = ScenarioConfig(
        name=top.str("name"),
        width=grid.int("width", minimum=1),
        height=grid.int("height", minimum=1),
        zones=tuple(zones),
        roster=tuple(roster),
        bursts=tuple(bursts),
        prohibitions=tuple(prohibitions),
        learning=LearningParams(mu, gamma, eps),
        iterations=top.int("iterations", minimum=1),
        passenger_ttl=top.int("passenger_ttl", None, minimum=1),
        terminal_pickup=terminal,
    )
    return validate(config)


def load_config(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


# --- built-in scenarios ----------------------------------------------------

def carve(width: int, height: int, hole: Rect) -> list[Rect]:
    """Rectangles tiling a ``width`` x ``height`` grid minus ``hole``."""
    out = []
    if hole.y > 0:
        out.append(Rect(0, 0, width, hole.y))
    bottom = hole.y + hole.height
    if bottom < height:
        out.append(Rect(0, bottom, width, height - bottom))
    if hole.x > 0:
        out.append(Rect(0, hole.y, hole.x, hole.height))
    right = hole.x + hole.width
    if right < width:
        out.append(Rect(right, hole.y, width - right, hole.height))
    return out


def _roster(*classes: TaxiClass) -> tuple[RosterEntry, ...]:
    return tuple(RosterEntry(c, AGENTS_PER_CLASS) for c in classes)


HIGH_HALF = Rect(0, 0, GRID // 2, GRID)
LOW_HALF = Rect(GRID // 2, 0, GRID - GRID // 2, GRID)


def hypothesis_a() -> ScenarioConfig:
    """One high-density half (west) and one low-density half (east); a generic
    hailing cab against Uber, no regulation."""
    return validate(ScenarioConfig(
        name="hypothesis_a",
        width=GRID, height=GRID,
        zones=(ZoneSpec(HIGH_HALF, ZoneLabel("high", "high"), P_HIGH),
               ZoneSpec(LOW_HALF, ZoneLabel("low", "low"), P_LOW)),
        roster=_roster(CAB, UBER),
        passenger_ttl=PASSENGER_TTL,
    ))


def hypothesis_b(seed: int = 0, n_bursts: int = 6, duration: int = 3000,
                 size: int = 3) -> ScenarioConfig:
    """Hypothesis A plus temporary demand bursts.

    Each burst is a ``size`` x ``size`` patch at p_high placed at a seeded
    random spot of the low-density half; starts are evenly spaced through the
    run so every burst begins after the drivers have had time to learn the
    fixed demand.
    """
    base = hypothesis_a()
    rnd = random.Random(seed)
    bursts = []
    for i in range(n_bursts):
        x = rnd.randrange(LOW_HALF.x, LOW_HALF.x + LOW_HALF.width - size + 1)
        y = rnd.randrange(LOW_HALF.y, LOW_HALF.y + LOW_HALF.height - size + 1)
        start = (i + 1) * base.iterations // (n_bursts + 1)
        bursts.append(DemandBurst(Rect(x, y, size, size), start, duration, P_HIGH))
    return validate(replace(base, name="hypothesis_b", bursts=tuple(bursts)))


OPEN_HALF = Rect(0, 0, GRID, GRID // 2)
RESTRICTED_HALF = Rect(0, GRID // 2, GRID, GRID - GRID // 2)


def hypothesis_c() -> ScenarioConfig:
    """Uniform high density; Green may not pick up in the southern half."""
    return validate(ScenarioConfig(
        name="hypothesis_c",
        width=GRID, height=GRID,
        zones=(ZoneSpec(OPEN_HALF, ZoneLabel("open", "high"), P_HIGH),
               ZoneSpec(RESTRICTED_HALF, ZoneLabel("restricted", "high"), P_HIGH)),
        roster=_roster(YELLOW, GREEN, UBER),
        prohibitions=(Prohibition(GREEN.id, RESTRICTED_HALF),),
        passenger_ttl=PASSENGER_TTL,
    ))


def hypothesis_c_baseline() -> ScenarioConfig:
    """Hypothesis C without any Green Cabs, for the with/without comparison."""
    c = hypothesis_c()
    return validate(replace(c, name="hypothesis_c_baseline",
                            roster=tuple(e for e in c.roster if e.taxi_class.id != GREEN.id),
                            prohibitions=()))


AIRPORT = Rect(9, 9, 2, 2)


def hypothesis_d() -> ScenarioConfig:
    """A small very-high-density airport in a wide low-density field; Green
    may not pick up at the airport."""
    field_label = ZoneLabel("field", "low")
    zones = [ZoneSpec(AIRPORT, ZoneLabel("airport", "very_high"), P_VERY_HIGH)]
    zones += [ZoneSpec(r, field_label, P_LOW) for r in carve(GRID, GRID, AIRPORT)]
    return validate(ScenarioConfig(
        name="hypothesis_d",
        width=GRID, height=GRID,
        zones=tuple(zones),
        roster=_roster(YELLOW, GREEN, UBER),
        prohibitions=(Prohibition(GREEN.id, AIRPORT),),
        passenger_ttl=PASSENGER_TTL,
    ))


CORE = Rect(6, 6, 8, 8)


def nyc_baseline() -> ScenarioConfig:
    """Composite reference city: a high-density core closed to Green pickups
    inside a low-density outer field."""
    outer = ZoneLabel("outer", "low")
    zones = [ZoneSpec(CORE, ZoneLabel("core", "high"), P_HIGH)]
    zones += [ZoneSpec(r, outer, P_LOW) for r in carve(GRID, GRID, CORE)]
    return validate(ScenarioConfig(
        name="nyc_baseline",
        width=GRID, height=GRID,
        zones=tuple(zones),
        roster=_roster(YELLOW, GREEN, UBER),
        prohibitions=(Prohibition(GREEN.id, CORE),),
        passenger_ttl=PASSENGER_TTL,
    ))


def scenario_uber_ban() -> ScenarioConfig:
    base = nyc_baseline()
    return validate(replace(base, name="scenario_uber_ban",
                            prohibitions=base.prohibitions + (Prohibition(UBER.id, CORE),)))


def scenario_app_for_all() -> ScenarioConfig:
    base = nyc_baseline()
    roster = tuple(replace(e, taxi_class=replace(e.taxi_class, pickup_radius=1))
                   for e in base.roster)
    return validate(replace(base, name="scenario_app_for_all", roster=roster))


BUILTINS = {
    "hypothesis_a": hypothesis_a,
    "hypothesis_b": hypothesis_b,
    "hypothesis_c": hypothesis_c,
    "hypothesis_c_baseline": hypothesis_c_baseline,
    "hypothesis_d": hypothesis_d,
    "nyc_baseline": nyc_baseline,
    "scenario_uber_ban": scenario_uber_ban,
    "scenario_app_for_all": scenario_app_for_all,
}


def builtin(name: str) -> ScenarioConfig:
    try:
        return BUILTINS[name]()
    except KeyError:
        raise ConfigError(f"unknown built-in scenario {name!r}; choose from {sorted(BUILTINS)}",
                          "scenario") from None
