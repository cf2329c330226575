"""Command-line front end: ``hailsim run | compare | dump-policy | list-scenarios``."""

from __future__ import annotations

import argparse
import json
import os
import sys
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from statistics import fmean

from hailsim import engine, metrics
from hailsim.gridworld import ConfigurationError
from hailsim.qlearning import Action
from hailsim.scenarios import BUILTINS, ScenarioConfig, builtin, load_config

OUTPUT_ENV = "HAILSIM_OUTPUT_DIR"
DEFAULT_OUTPUT = "hailsim-output"


class CliError(Exception):
    pass


def resolve(ref: str) -> ScenarioConfig:
    """A built-in scenario name or the path of a YAML config file."""
    if ref in BUILTINS:
        return builtin(ref)
    if Path(ref).is_file():
        return load_config(ref)
    raise ConfigurationError(
        f"{ref!r} is neither a built-in scenario ({', '.join(BUILTINS)}) nor a readable file",
        "scenario")


def _dims(text: str) -> tuple[str, ...]:
    dims = tuple(d.strip() for d in text.split(",") if d.strip())
    bad = [d for d in dims if d not in metrics.DIMENSIONS]
    if bad or not dims:
        raise argparse.ArgumentTypeError(
            f"expected a comma-separated subset of {','.join(metrics.DIMENSIONS)}")
    return dims


def _positive(text: str) -> int:
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return n


def _non_negative(text: str) -> int:
    n = int(text)
    if n < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return n


def _output_dir(args) -> Path:
    out = Path(args.output or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(f"cannot create output directory {out}: {exc.strerror}") from None
    if not os.access(out, os.W_OK):
        raise CliError(f"output directory {out} is not writable")
    return out


def _write_all(files: list[tuple[Path, str]]) -> None:
    for path, text in files:
        try:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise CliError(f"cannot write {path}: {exc.strerror}") from None


def _run_one(job: tuple[ScenarioConfig, int, int | None]) -> metrics.RunMetrics:
    config, seed, iterations = job
    return engine.run(config, seed, iterations)


def _run_seeds(config: ScenarioConfig, seeds: list[int], iterations: int | None,
               jobs: int) -> list[metrics.RunMetrics]:
    work = [(config, s, iterations) for s in seeds]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_one, work))
    return [_run_one(w) for w in work]


def _share_json(scenario: str, seed, iterations: int, dims, within, rows, digest=None) -> str:
    doc = {"scenario": scenario, "seed": seed, "iterations": iterations}
    if digest is not None:
        doc["config_digest"] = digest
    doc["group_by"] = list(dims)
    doc["within"] = within
    doc["rows"] = [dict(zip(metrics.DIMENSIONS, metrics.expand_key(dims, r.key)),
                        pickups=r.pickups, share_pct=round(r.share, 4)) for r in rows]
    return json.dumps(doc, indent=2) + "\n"


def _series_csv(m: metrics.RunMetrics, every: int, classes: list[str]) -> str:
    counts = Counter((r.tick // every, r.class_id) for r in m.records)
    lines = ["tick_end,class,pickups"]
    for w in range(-(-m.ticks // every)):
        end = min((w + 1) * every, m.ticks)
        lines += [f"{end},{c},{counts[(w, c)]}" for c in classes]
    return "\n".join(lines) + "\n"


def cmd_run(args) -> int:
    config = resolve(args.scenario) if args.scenario else load_config(args.config)
    if args.within and args.within not in args.group_by:
        raise CliError(f"--within {args.within} must be one of --group-by {','.join(args.group_by)}")
    out = _output_dir(args)
    seeds = list(range(args.seed, args.seed + args.replicates))
    runs = _run_seeds(config, seeds, args.iterations, args.jobs)

    dims = tuple(d for d in metrics.DIMENSIONS if d in args.group_by)
    name = config.name
    files = []
    for m in runs:
        rows = metrics.share_table(m, dims, args.within)
        if args.format == "csv":
            text = metrics.shares_csv(name, m.seed, m.iterations, dims, rows)
        else:
            text = _share_json(name, m.seed, m.iterations, dims, args.within, rows, m.config_digest)
        files.append((out / f"{name}_seed{m.seed}.{args.format}", text))
        if args.series_every:
            classes = [c.id for c in config.classes]
            files.append((out / f"{name}_seed{m.seed}_series.csv",
                          _series_csv(m, args.series_every, classes)))
    mean_rows = metrics.mean_shares(runs, dims, args.within)
    iterations = runs[0].iterations
    if args.format == "csv":
        agg = metrics.shares_csv(name, metrics.ALL, iterations, dims, mean_rows)
    else:
        agg = _share_json(name, metrics.ALL, iterations, dims, args.within, mean_rows)
    files.append((out / f"{name}_aggregate.{args.format}", agg))
    _write_all(files)

    print(f"{name}: seeds {seeds[0]}..{seeds[-1]}, {iterations} ticks, "
          f"{sum(m.total_pickups for m in runs)} pickups / {sum(m.total_spawned for m in runs)} spawned")
    label = "mean share % within " + args.within if args.within else "mean share %"
    print(metrics.format_table([*dims, "pickups", label],
                               [[*r.key, r.pickups, r.share] for r in mean_rows]))
    print(f"wrote {len(files)} file(s) to {out}")
    return 0


def _mean_change(values: list) -> float | str:
    if any(v == metrics.NEW for v in values):
        return metrics.NEW
    return fmean(values)


def _change_summary(pairs, dim: str) -> list[list]:
    per_seed = [{r.key[0]: r for r in metrics.compare_runs(b, v, (dim,))} for b, v in pairs]
    keys = sorted(set().union(*per_seed))
    rows = []
    for k in keys:
        base = sum(t[k].baseline for t in per_seed if k in t)
        var = sum(t[k].variant for t in per_seed if k in t)
        changes = [t[k].pct_change if k in t else 0.0 for t in per_seed]
        rows.append([k, base, var, _mean_change(changes)])
    return rows


def cmd_compare(args) -> int:
    base_cfg, var_cfg = resolve(args.baseline), resolve(args.variant)
    if args.iterations is None and base_cfg.iterations != var_cfg.iterations:
        raise metrics.NonComparableRuns(
            f"iteration counts differ ({base_cfg.iterations} vs {var_cfg.iterations}); "
            "pass --iterations to align them")
    out = _output_dir(args)
    seeds = list(range(args.seed, args.seed + args.replicates))
    base_runs = _run_seeds(base_cfg, seeds, args.iterations, args.jobs)
    var_runs = _run_seeds(var_cfg, seeds, args.iterations, args.jobs)
    pairs = list(zip(base_runs, var_runs))
    for b, v in pairs:
        metrics.compare_runs(b, v, args.group_by)  # rejects non-comparable runs up front

    stem = f"{base_cfg.name}_vs_{var_cfg.name}"
    dims = tuple(d for d in metrics.DIMENSIONS if d in args.group_by)
    if args.format == "csv":
        body = metrics.compare_csv(pairs, dims)
    else:
        body = json.dumps({"rows": [
            {"seed": v.seed, **dict(zip(metrics.DIMENSIONS, metrics.expand_key(dims, r.key))),
             "baseline_pickups": r.baseline, "variant_pickups": r.variant,
             "pct_change": r.pct_change if isinstance(r.pct_change, str) else round(r.pct_change, 4)}
            for b, v in pairs for r in metrics.compare_runs(b, v, dims)]}, indent=2) + "\n"
    meta = {
        "baseline": base_cfg.name, "variant": var_cfg.name,
        "baseline_digest": base_runs[0].config_digest, "variant_digest": var_runs[0].config_digest,
        "iterations": base_runs[0].iterations,
        "pairing": "seed-paired: variant seed i is compared with baseline seed i",
        "seeds": seeds,
    }
    files = [(out / f"{stem}.{args.format}", body),
             (out / f"{stem}_meta.json", json.dumps(meta, indent=2) + "\n")]
    _write_all(files)

    print(f"{base_cfg.name} -> {var_cfg.name}: {len(seeds)} seed-paired run(s), "
          f"{base_runs[0].iterations} ticks")
    for dim in ("class", "zone"):
        print()
        print(metrics.format_table([dim, "baseline", "variant", "mean pct_change"],
                                   _change_summary(pairs, dim)))
    print(f"wrote {len(files)} file(s) to {out}")
    return 0


def policy_csv(qtable) -> str:
    lines = ["x,y,direction,value"]
    for block, action, value in qtable.items():
        lines.append(f"{block.x},{block.y},{Action(action).name.lower()},{value!r}")
    return "\n".join(lines) + "\n"


def cmd_dump_policy(args) -> int:
    config = resolve(args.scenario) if args.scenario else load_config(args.config)
    out = _output_dir(args)
    sim = engine.simulate(config, args.seed, args.iterations)
    files = [(out / f"{config.name}_seed{args.seed}_agent{a.id}_{a.taxi_class.id}.csv",
              policy_csv(a.qtable)) for a in sim.agents]
    _write_all(files)
    print(f"{config.name}: seed {args.seed}, {sim.tick} ticks; "
          f"wrote {len(files)} policy file(s) to {out}")
    return 0


def cmd_list(args) -> int:
    rows = []
    for name in BUILTINS:
        cfg = builtin(name)
        roster = " ".join(f"{e.taxi_class.id}x{e.count}" for e in cfg.roster)
        zones = sorted({z.label.name for z in cfg.zones})
        rows.append([name, f"{cfg.width}x{cfg.height}", roster, ",".join(zones)])
    print(metrics.format_table(["scenario", "grid", "roster", "zones"], rows))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hailsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, replicates=True):
        p.add_argument("--seed", type=int, default=0)
        if replicates:
            p.add_argument("--replicates", type=_positive, default=1,
                           help="number of runs, with seeds seed, seed+1, ...")
        p.add_argument("--iterations", type=_non_negative, default=None,
                       help="override the configured tick count")
        p.add_argument("--output", default=None,
                       help=f"output directory (default: ${OUTPUT_ENV} or ./{DEFAULT_OUTPUT})")

    def source(p):
        g = p.add_mutually_exclusive_group(required=True)
        g.add_argument("--scenario", help="built-in scenario name")
        g.add_argument("--config", help="path of a YAML scenario file")

    run = sub.add_parser("run", help="run a scenario and write share tables")
    source(run)
    common(run)
    run.add_argument("--format", choices=("csv", "json"), default="csv")
    run.add_argument("--group-by", type=_dims, default=("class", "zone"))
    run.add_argument("--within", choices=metrics.DIMENSIONS, default=None,
                     help="compute shares within each cell of this dimension")
    run.add_argument("--series-every", type=_positive, default=None, metavar="TICKS",
                     help="also write per-class pickup counts per window of TICKS")
    run.add_argument("--jobs", type=_positive, default=1)
    run.set_defaults(func=cmd_run)

    cmp_ = sub.add_parser("compare", help="seed-paired baseline vs variant deltas")
    cmp_.add_argument("--baseline", required=True, help="built-in name or config path")
    cmp_.add_argument("--variant", required=True, help="built-in name or config path")
    common(cmp_)
    cmp_.add_argument("--format", choices=("csv", "json"), default="csv")
    cmp_.add_argument("--group-by", type=_dims, default=("class", "zone"))
    cmp_.add_argument("--jobs", type=_positive, default=1)
    cmp_.set_defaults(func=cmd_compare)

    dump = sub.add_parser("dump-policy", help="write each agent's Q-table as CSV")
    source(dump)
    common(dump, replicates=False)
    dump.set_defaults(func=cmd_dump_policy)

    ls = sub.add_parser("list-scenarios", help="list built-in scenarios")
    ls.set_defaults(func=cmd_list)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"hailsim: configuration error: {exc}", file=sys.stderr)
    except metrics.NonComparableRuns as exc:
        print(f"hailsim: runs are not comparable: {exc}", file=sys.stderr)
    except CliError as exc:
        print(f"hailsim: {exc}", file=sys.stderr)
    except OSError as exc:
        print(f"hailsim: {exc}", file=sys.stderr)
    return 2


if __name__ == "__main__":
    sys.exit(main())
