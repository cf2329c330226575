import numpy as np
import pytest
from scipy import stats

from hailsim.agents import TaxiClass
from hailsim.gridworld import Rect, ZoneLabel, ZoneSpec
from hailsim.scenarios import RosterEntry, ScenarioConfig, carve, validate
from hailsim.qlearning import LearningParams


def uniform_chisquare_p(observed) -> float:
    """p-value of a chi-square test of ``observed`` counts against uniform."""
    observed = np.asarray(observed, dtype=float)
    return stats.chisquare(observed).pvalue


def single_reward_config(width=5, height=5, reward=(2, 2), iterations=1000,
                         learning=LearningParams(), cls=TaxiClass("cab", 0, "Cab"),
                         count=1, name="oracle") -> ScenarioConfig:
    """A world where only ``reward`` ever spawns passengers (p=1 each tick)."""
    hole = Rect(reward[0], reward[1], 1, 1)
    zones = [ZoneSpec(hole, ZoneLabel("reward", "very_high"), 1.0)]
    zones += [ZoneSpec(r, ZoneLabel("empty", "none"), 0.0) for r in carve(width, height, hole)]
    return validate(ScenarioConfig(name=name, width=width, height=height, zones=tuple(zones),
                                   roster=(RosterEntry(cls, count),), learning=learning,
                                   iterations=iterations))


def empty_config(width=4, height=3, classes=(TaxiClass("cab", 0),), count=1,
                 iterations=10, prob=0.0, name="empty") -> ScenarioConfig:
    return validate(ScenarioConfig(
        name=name, width=width, height=height,
        zones=(ZoneSpec(Rect(0, 0, width, height), ZoneLabel("all", "none"), prob),),
        roster=tuple(RosterEntry(c, count) for c in classes), iterations=iterations))


@pytest.fixture
def chi_p():
    return uniform_chisquare_p


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
