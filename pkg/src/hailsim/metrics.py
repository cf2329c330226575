"""Pickup ledger, market-share tables and baseline-vs-variant deltas."""

from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass, field
from statistics import fmean
from typing import Iterable, Sequence

from hailsim.gridworld import Block, ZoneLabel

DIMENSIONS = ("class", "zone", "demand_class")
ALL = "all"
NEW = "new"
SHARE_COLUMNS = ["scenario", "seed", "iterations", "class", "zone", "demand_class",
                 "pickups", "share_pct"]
COMPARE_COLUMNS = SHARE_COLUMNS + ["baseline_pickups", "variant_pickups", "pct_change"]


class NonComparableRuns(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class PickupRecord:
    tick: int
    agent_id: int
    class_id: str
    passenger_id: int
    block: Block
    zone: ZoneLabel
    demand_class: str

    def dim(self, name: str) -> str:
        if name == "class":
            return self.class_id
        if name == "zone":
            return self.zone.name
        return self.demand_class


@dataclass
class RunMetrics:
    """Append-only pickup ledger of one run plus its metadata."""

    scenario: str
    seed: int
    iterations: int
    config_digest: str = ""
    records: list[PickupRecord] = field(default_factory=list)
    spawned: Counter = field(default_factory=Counter)
    expired: int = 0
    ticks: int = 0

    def append(self, record: PickupRecord) -> None:
        self.records.append(record)

    @property
    def total_spawned(self) -> int:
        return sum(self.spawned.values())

    @property
    def total_pickups(self) -> int:
        return len(self.records)


@dataclass(frozen=True)
class ShareRow:
    key: tuple[str, ...]
    pickups: int
    share: float


@dataclass(frozen=True)
class CompareRow:
    key: tuple[str, ...]
    baseline: int
    variant: int
    pct_change: float | str


def _dims(group_by: Iterable[str]) -> tuple[str, ...]:
    wanted = set(group_by)
    unknown = wanted - set(DIMENSIONS)
    if unknown:
        raise ValueError(f"unknown grouping dimension(s): {sorted(unknown)}")
    if not wanted:
        raise ValueError("group_by must name at least one dimension")
    return tuple(d for d in DIMENSIONS if d in wanted)


def pickup_counts(m: RunMetrics, group_by: Iterable[str]) -> Counter:
    dims = _dims(group_by)
    return Counter(tuple(r.dim(d) for d in dims) for r in m.records)


def share_table(m: RunMetrics, group_by: Iterable[str],
                within: str | None = None) -> list[ShareRow]:
    """Pickups and percentage share per group, sorted by group key.

    Shares are of total pickups, or of the pickups in the same ``within`` cell
    when that dimension is given (it must be one of ``group_by``).
    """
    dims = _dims(group_by)
    counts = pickup_counts(m, dims)
    if within is None:
        total = sum(counts.values())
        denom = {k: total for k in counts}
    else:
        if within not in dims:
            raise ValueError(f"within={within!r} must be one of the grouping dimensions {dims}")
        pos = dims.index(within)
        cell_totals = Counter()
        for k, c in counts.items():
            cell_totals[k[pos]] += c
        denom = {k: cell_totals[k[pos]] for k in counts}
    return [ShareRow(k, counts[k], 100.0 * counts[k] / denom[k]) for k in sorted(counts)]


def within_group_share(m: RunMetrics, partition: str, class_id: str) -> dict[str, float]:
    """Share (percent) of ``class_id`` within each cell of ``partition``."""
    if partition not in ("zone", "demand_class"):
        raise ValueError("partition must be 'zone' or 'demand_class'")
    counts = pickup_counts(m, ("class", partition))
    totals: Counter = Counter()
    for (_, cell), c in counts.items():
        totals[cell] += c
    return {cell: 100.0 * counts[(class_id, cell)] / totals[cell] for cell in sorted(totals)}


def pct_change(baseline: float, variant: float) -> float | str:
    if baseline == 0:
        return NEW if variant > 0 else 0.0
    return (variant - baseline) / baseline * 100.0


def compare_cells(m: RunMetrics, partition: str, class_id: str, cell: str,
                  reference: str) -> float | str:
    """Percent difference of one class's pickups in ``cell`` relative to its
    pickups in the ``reference`` cell of the same run."""
    counts = pickup_counts(m, ("class", partition))
    return pct_change(counts[(class_id, reference)], counts[(class_id, cell)])


def compare_runs(baseline: RunMetrics, variant: RunMetrics,
                 group_by: Iterable[str]) -> list[CompareRow]:
    """Per-group pickups in both runs and the percent change baseline -> variant.

    Groups absent from the baseline but present in the variant are flagged
    ``"new"`` instead of getting a number.
    """
    if baseline.iterations != variant.iterations:
        raise NonComparableRuns(
            f"iteration counts differ ({baseline.iterations} vs {variant.iterations})")
    dims = _dims(group_by)
    b = pickup_counts(baseline, dims)
    v = pickup_counts(variant, dims)
    return [CompareRow(k, b[k], v[k], pct_change(b[k], v[k])) for k in sorted(set(b) | set(v))]


def mean_shares(runs: Sequence[RunMetrics], group_by: Iterable[str],
                within: str | None = None) -> list[ShareRow]:
    """Mean share per group across replicates (missing groups count as 0 %);
    ``pickups`` is the total over replicates."""
    dims = _dims(group_by)
    tables = [{r.key: r for r in share_table(m, dims, within)} for m in runs]
    keys = sorted(set().union(*tables)) if tables else []
    rows = []
    for k in keys:
        rows.append(ShareRow(
            k,
            sum(t[k].pickups for t in tables if k in t),
            fmean(t[k].share if k in t else 0.0 for t in tables),
        ))
    return rows


def expand_key(dims: tuple[str, ...], key: tuple[str, ...]) -> list[str]:
    lookup = dict(zip(dims, key))
    return [lookup.get(d, ALL) for d in DIMENSIONS]


def _fmt(x: float | str) -> str:
    return x if isinstance(x, str) else f"{x:.4f}"


def _writer(buf: io.StringIO):
    return csv.writer(buf, lineterminator="\n")


def shares_csv(scenario: str, seed: int | str, iterations: int,
               dims: Iterable[str], rows: Iterable[ShareRow]) -> str:
    """Render share rows in the fixed export layout. Dimensions that were
    aggregated out are written as ``all``."""
    dims = _dims(dims)
    buf = io.StringIO()
    w = _writer(buf)
    w.writerow(SHARE_COLUMNS)
    for r in rows:
        w.writerow([scenario, seed, iterations, *expand_key(dims, r.key), r.pickups, _fmt(r.share)])
    return buf.getvalue()


def run_csv(m: RunMetrics, group_by: Iterable[str] = ("class", "zone"),
            within: str | None = None) -> str:
    return shares_csv(m.scenario, m.seed, m.iterations, group_by,
                      share_table(m, group_by, within))


def compare_csv(pairs: Sequence[tuple[RunMetrics, RunMetrics]],
                group_by: Iterable[str] = ("class",)) -> str:
    """One block of rows per seed-paired (baseline, variant) run; the share
    columns describe the variant run."""
    dims = _dims(group_by)
    buf = io.StringIO()
    w = _writer(buf)
    w.writerow(COMPARE_COLUMNS)
    for base, var in pairs:
        shares = {r.key: r.share for r in share_table(var, dims)}
        for row in compare_runs(base, var, dims):
            w.writerow([var.scenario, var.seed, var.iterations, *expand_key(dims, row.key),
                        row.variant, _fmt(shares.get(row.key, 0.0)),
                        row.baseline, row.variant, _fmt(row.pct_change)])
    return buf.getvalue()


def format_table(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    """Plain fixed-width text table for terminal output."""
    cells = [[str(h) for h in header]] + [[_fmt(c) if isinstance(c, float) else str(c) for c in r]
                                          for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = ["  ".join(c.rjust(widths[i]) if i else c.ljust(widths[i]) for i, c in enumerate(r))
             for r in cells]
    lines.insert(1, "  ".join("-" * wd for wd in widths))
    return "\n".join(lines)
