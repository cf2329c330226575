"""Acceptance gate. Each test checks one criterion at its stated tolerance and
records a PASS/FAIL line that is printed at the end of the session.

The directional criteria use 20 seeds at the default 90,000 ticks; expect the
whole module to take around half an hour on one core.
"""

import random
from collections import Counter
from fractions import Fraction
from functools import cache
from statistics import fmean

from hailsim import engine, metrics, scenarios as S
from hailsim.gridworld import Block, FIXED, TEMPORARY, ZoneLabel, build_world, pickup_allowed
from hailsim.metrics import PickupRecord, RunMetrics, compare_runs, share_table
from hailsim.qlearning import Action, LearningParams, QTable, Moves, q_update, value_iteration
from tests.conftest import ACCEPTANCE_LINES, single_reward_config

SEEDS = range(20)


def verdict(n: int, title: str, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {title}  [{detail}]"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


@cache
def counts(name: str, seed: int) -> Counter:
    """Pickups by (class, zone, demand class) of one default-length run."""
    m = engine.run(S.builtin(name), seed)
    return metrics.pickup_counts(m, metrics.DIMENSIONS)


def total(c: Counter, cls: str, zone: str | None = None, demand: str | None = None) -> int:
    return sum(n for (k, z, d), n in c.items()
               if k == cls and zone in (None, z) and demand in (None, d))


def pct(base: float, var: float) -> float:
    return (var - base) / base * 100.0


# 1 -----------------------------------------------------------------------

def test_criterion_1_q_update_arithmetic():
    rnd = random.Random(1)
    worst = 0.0
    for _ in range(25):
        mu, gamma = rnd.random(), rnd.random() * 0.999
        q, r, best = rnd.uniform(-5, 5), rnd.uniform(-1, 2), rnd.uniform(-5, 5)
        t = QTable(Moves(3, 3), LearningParams(mu, gamma, 0.1))
        t.set(Block(0, 1), Action.EAST, q)
        for a in t.valid_actions(Block(1, 1)):
            t.set(Block(1, 1), a, best if a == Action.NORTH else best - 1 - rnd.random())
        F = Fraction
        expected = (1 - F(mu)) * F(q) + F(mu) * (F(r) + F(gamma) * F(best))
        got = q_update(t, Block(0, 1), Action.EAST, r, Block(1, 1))
        worst = max(worst, abs(got - float(expected)))
    verdict(1, "Q-update arithmetic", worst <= 1e-12, f"25 tuples, max error {worst:.2e}")


# 2 -----------------------------------------------------------------------

def test_criterion_2_oracle_optimality():
    cfg = single_reward_config(iterations=50_000, learning=LearningParams(mu=0.2, gamma=0.9,
                                                                         epsilon=0.2))
    sim = engine.simulate(cfg, seed=0)
    table = sim.agents[0].qtable
    goal = Block(2, 2)
    v_star = value_iteration(sim.world, [goal], 0.9)

    optimal = 0
    starts = [b for b in sim.world.blocks() if b != goal]
    for start in starts:
        pos, steps = start, 0
        while pos != goal and steps < 25:
            a = table.greedy_actions(pos)[0]
            dx, dy = Action(a).delta
            pos, steps = Block(pos.x + dx, pos.y + dy), steps + 1
        optimal += pos == goal and steps == abs(start.x - 2) + abs(start.y - 2)
    gap = max(abs(max(table.get(b, a) for a in table.valid_actions(b)) - v_star[b])
              for b in sim.world.blocks())
    ok = optimal == len(starts) and gap <= 0.05
    verdict(2, "oracle optimality", ok,
            f"{optimal}/{len(starts)} start states optimal, max |V-V*| = {gap:.4f}")


# 3 -----------------------------------------------------------------------

def test_criterion_3_hypothesis_a():
    share_wins = ratio_wins = 0
    for seed in SEEDS:
        c = counts("hypothesis_a", seed)
        uber, cab = total(c, "uber"), total(c, "cab")
        share_wins += uber > cab
        ub_hi, ub_lo = total(c, "uber", "high"), total(c, "uber", "low")
        cab_hi, cab_lo = total(c, "cab", "high"), total(c, "cab", "low")
        ratio_wins += cab_hi > cab_lo and cab_lo > 0 and cab_hi > 0 and \
            ub_lo / cab_lo > ub_hi / cab_hi
    ok = share_wins >= 19 and ratio_wins >= 18
    verdict(3, "Hypothesis A direction", ok,
            f"Uber > Cab in {share_wins}/20, low-area relative dominance in {ratio_wins}/20")


# 4 -----------------------------------------------------------------------

def test_criterion_4_hypothesis_b():
    wins, gaps = 0, []
    for seed in SEEDS:
        c = counts("hypothesis_b", seed)
        temp = total(c, "uber", demand=TEMPORARY) / sum(
            total(c, k, demand=TEMPORARY) for k in ("uber", "cab"))
        fixed = total(c, "uber", demand=FIXED) / sum(
            total(c, k, demand=FIXED) for k in ("uber", "cab"))
        wins += temp > fixed
        gaps.append(100 * (temp - fixed))
    verdict(4, "Hypothesis B direction", wins >= 16,
            f"Uber temporary share > fixed share in {wins}/20, mean gap {fmean(gaps):+.1f} pts")


# 5 -----------------------------------------------------------------------

def test_criterion_5_hypothesis_c():
    both, yellow, uber = 0, [], []
    for seed in SEEDS:
        without, with_green = counts("hypothesis_c_baseline", seed), counts("hypothesis_c", seed)
        dy = pct(total(without, "yellow", "open"), total(with_green, "yellow", "open"))
        du = pct(total(without, "uber", "open"), total(with_green, "uber", "open"))
        both += dy < 0 and du < 0
        yellow.append(-dy)
        uber.append(-du)
    ok = both >= 18 and fmean(yellow) > fmean(uber)
    verdict(5, "Hypothesis C direction", ok,
            f"both decrease in {both}/20, mean decrease Yellow {fmean(yellow):.1f}% "
            f"vs Uber {fmean(uber):.1f}%")


# 6 -----------------------------------------------------------------------

def test_criterion_6_hypothesis_d():
    dominant, yellow_def, uber_def = 0, [], []
    for seed in SEEDS:
        c = counts("hypothesis_d", seed)
        g, y, u = (total(c, k, "field") for k in ("green", "yellow", "uber"))
        dominant += g > y and g > u
        yellow_def.append(pct(g, y) * -1)
        uber_def.append(pct(g, u) * -1)
    ok = dominant >= 18 and fmean(yellow_def) > fmean(uber_def)
    verdict(6, "Hypothesis D direction", ok,
            f"Green leads the field in {dominant}/20, mean deficit vs Green "
            f"Yellow {fmean(yellow_def):.1f}% Uber {fmean(uber_def):.1f}%")


# 7 -----------------------------------------------------------------------

def test_criterion_7_uber_ban():
    change = {k: [] for k in ("yellow", "green", "uber_outer")}
    for seed in SEEDS:
        base, ban = counts("nyc_baseline", seed), counts("scenario_uber_ban", seed)
        for k in ("yellow", "green"):
            change[k].append(pct(total(base, k), total(ban, k)))
        change["uber_outer"].append(pct(total(base, "uber", "outer"), total(ban, "uber", "outer")))
    y, g, u = (fmean(change[k]) for k in ("yellow", "green", "uber_outer"))
    ok = y > 50 and g < -20 and u >= 0
    verdict(7, "Scenario A (Uber ban) direction", ok,
            f"mean change Yellow {y:+.1f}%, Green {g:+.1f}%, Uber outside core {u:+.1f}%")


# 8 -----------------------------------------------------------------------

def shares_by_class(c: Counter) -> dict[str, float]:
    all_ = sum(c.values())
    return {k: 100 * total(c, k) / all_ for k in ("yellow", "green", "uber")}


def test_criterion_8_app_for_all():
    gap_base, gap_app, green_base, green_app = [], [], [], []
    for seed in SEEDS:
        b = shares_by_class(counts("nyc_baseline", seed))
        a = shares_by_class(counts("scenario_app_for_all", seed))
        gap_base.append(abs(b["yellow"] - b["uber"]))
        gap_app.append(abs(a["yellow"] - a["uber"]))
        green_base.append(b["green"])
        green_app.append(a["green"])
    ok = fmean(gap_app) <= 0.5 * fmean(gap_base) and fmean(green_app) > fmean(green_base)
    verdict(8, "Scenario B (app for all) direction", ok,
            f"Yellow-Uber gap {fmean(gap_base):.1f} -> {fmean(gap_app):.1f} pts, "
            f"Green share {fmean(green_base):.1f} -> {fmean(green_app):.1f}%")


# 9 -----------------------------------------------------------------------

def check_builtin(name: str) -> list[str]:
    problems = []
    cfg = S.builtin(name)
    world = build_world(cfg.world_spec())
    sim = engine.simulate(cfg, 11, iterations=10_000)
    m = sim.ledger
    ids = [r.passenger_id for r in m.records]
    if m.total_pickups > m.total_spawned:
        problems.append("more pickups than spawns")
    if m.total_pickups + len(sim.waiting) + m.expired != m.total_spawned:
        problems.append("passenger accounting does not balance")
    if len(ids) != len(set(ids)):
        problems.append("a passenger was picked twice")
    if any(not pickup_allowed(world, r.class_id, r.block) for r in m.records):
        problems.append("pickup inside a prohibited block")
    again = engine.run(cfg, 11, iterations=10_000)
    if metrics.run_csv(m) != metrics.run_csv(again) or m != again:
        problems.append("repeat run is not byte-identical")
    scaled = engine.simulate(cfg, 11, iterations=10_000, pickup_reward=3.0)
    if scaled.ledger.records != m.records:
        problems.append("reward scaling changed the trajectory")
    for a, b in zip(sim.agents, scaled.agents):
        for (_, _, v), (_, _, w) in zip(a.qtable.items(), b.qtable.items()):
            if abs(w - 3.0 * v) > 1e-9:
                problems.append("Q-tables are not scaled by exactly 3")
                break
    return problems


def test_criterion_9_conservation_and_determinism():
    failures = {name: check_builtin(name) for name in S.BUILTINS}
    bad = {k: v for k, v in failures.items() if v}
    verdict(9, "conservation and determinism", not bad,
            f"{len(S.BUILTINS) - len(bad)}/{len(S.BUILTINS)} built-ins clean"
            + (f"; {bad}" if bad else ""))


# 10 ----------------------------------------------------------------------

def fixture_ledger(rows, iterations=1000) -> RunMetrics:
    m = RunMetrics("fixture", 0, iterations)
    pid = 0
    for cls, zone, demand, n in rows:
        for _ in range(n):
            m.append(PickupRecord(pid, 0, cls, pid, Block(0, 0), ZoneLabel(zone), demand))
            pid += 1
    return m


def test_criterion_10_metrics_fixtures():
    a = fixture_ledger([("uber", "high", FIXED, 34), ("uber", "low", FIXED, 42),
                        ("cab", "high", FIXED, 14), ("cab", "low", FIXED, 10)])
    got_a = {r.key: r.share for r in share_table(a, ["class", "zone"])}
    ok_a = got_a == {("uber", "high"): 34.0, ("uber", "low"): 42.0,
                     ("cab", "high"): 14.0, ("cab", "low"): 10.0}
    b = fixture_ledger([("uber", "z", FIXED, 76), ("cab", "z", FIXED, 24),
                        ("uber", "z", TEMPORARY, 81), ("cab", "z", TEMPORARY, 19)])
    got_b = {r.key: r.share for r in share_table(b, ["class", "demand_class"],
                                                 within="demand_class")}
    ok_b = got_b == {("uber", FIXED): 76.0, ("cab", FIXED): 24.0,
                     ("uber", TEMPORARY): 81.0, ("cab", TEMPORARY): 19.0}

    def change(base, var, cls):
        (row,) = compare_runs(fixture_ledger([(cls, "z", FIXED, base)]),
                              fixture_ledger([(cls, "z", FIXED, var)]), ["class"])
        return row.pct_change

    up, down = change(100, 430, "yellow"), change(100, 41, "green")
    ok_c = abs(up - 330) <= 1e-9 and abs(down + 59) <= 1e-9
    verdict(10, "metrics fixtures", ok_a and ok_b and ok_c,
            f"34/42/14/10 {'ok' if ok_a else got_a}, 76/24 81/19 {'ok' if ok_b else got_b}, "
            f"changes {up:+.4f}% and {down:+.4f}%")
