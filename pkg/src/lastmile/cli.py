"""Command-line front end: ``lastmile {solve,extract,batch,synth,oracle}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .candidates import MAX_CANDIDATES
from .extraction import build_driver_order_model, build_model, load_training, read_route
from .extraction.model import VARIANTS
from .harness import MERGE_FACTOR, MergePolicy, brute_force_optimum, default_workers, load_jobs, run_batch
from .penalty import PARTS
from .search import MAX_TRIALS_FACTOR, PENALTY_MULTIPLIER, SearchConfig, SearchContext, solve
from .synth import SynthConfig, generate_synthetic, write_corpus
from .tsplib import InstanceFormatError, format_instance, format_tour, read_instance

log = logging.getLogger("lastmile")


def _emit(text: str, output) -> None:
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_solve(args) -> int:
    instance, cs = read_instance(args.instance)
    config = SearchConfig(
        max_candidates=args.max_candidates,
        max_trials_factor=args.max_trials_factor,
        penalty_multiplier=args.penalty_multiplier,
        time_limit=args.time_limit,
        seed=args.seed,
        move_type=args.move_type,
        runs=args.runs,
    )
    ctx = SearchContext(instance, cs, config)
    if args.dump_candidates:
        Path(args.dump_candidates).write_text(ctx.candidates.dump(), encoding="utf-8")
    res = solve(instance, cs, config, context=ctx)
    comments = [f"NAME {instance.name}", f"LENGTH {res.length}", f"PENALTY {res.penalty}",
                "BREAKDOWN " + " ".join(f"{k}={res.breakdown.get(k, 0)}" for k in PARTS),
                f"RUNS {res.runs}"]
    _emit(format_tour(res.order, comments), args.output)
    print(f"{instance.name}: length {res.length} penalty {res.penalty} runs {res.runs} "
          f"({res.seconds:.2f}s)", file=sys.stderr)
    return 0


def cmd_extract(args) -> int:
    instance, _ = read_instance(args.target)
    if args.driver_order_oracle:
        # the corpus layout keeps the target's own driven route under the same name
        matches = [p for p in Path(args.training_dir).iterdir()
                   if p.stem == instance.name and p.suffix in (".route", ".json")]
        if not matches:
            print(f"no training route named {instance.name} for the driver-order oracle", file=sys.stderr)
            return 2
        route = read_route(matches[0]).filled()
        instance, cs = build_driver_order_model(instance, route.zone_sequence())
    else:
        training = load_training(args.training_dir)
        transitive = True if args.transitive else None
        instance, cs = build_model(instance, training, args.variant, transitive=transitive)
    _emit(format_instance(instance, cs), args.output)
    print(f"{instance.name}: {len(cs.singles)} constraints, {len(cs.disjunctions)} disjunctions, "
          f"{len(cs.transforms)} transforms", file=sys.stderr)
    return 0


def cmd_batch(args) -> int:
    defaults = {}
    if args.full_time is not None:
        defaults["full_seconds"] = args.full_time
    if args.alt_time is not None:
        defaults["alternate_seconds"] = args.alt_time if args.alt_time > 0 else None
    if args.training:
        defaults["training"] = args.training
    jobs = load_jobs(args.jobs_file, **defaults)
    report = args.report or str(Path(args.jobs_file).with_suffix(".report.json"))
    result = run_batch(jobs, args.workers, MergePolicy(args.merge_factor), report)
    print(json.dumps(result["summary"], indent=2))
    return 0 if result["summary"]["failed"] == 0 else 1


def cmd_synth(args) -> int:
    corpus = generate_synthetic(SynthConfig(routes=args.routes, seed=args.seed, split_rate=args.split_rate,
                                            stations=args.stations))
    root = write_corpus(corpus, args.out)
    print(f"wrote {len(corpus.routes)} routes to {root}", file=sys.stderr)
    return 0


def cmd_oracle(args) -> int:
    instance, cs = read_instance(args.instance)
    order, pen, length = brute_force_optimum(instance, cs)
    _emit(format_tour(order, [f"NAME {instance.name}", f"LENGTH {length}", f"PENALTY {pen}",
                              "OPTIMAL by enumeration"]), args.output)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lastmile", description="Constrained ATSP route solver and "
                                "zone-constraint extraction.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve one instance file")
    s.add_argument("instance")
    s.add_argument("--time-limit", type=float, default=1.0, help="seconds; gates the start of new runs")
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--max-candidates", type=int, default=MAX_CANDIDATES)
    s.add_argument("--penalty-multiplier", type=int, default=PENALTY_MULTIPLIER)
    s.add_argument("--move-type", choices=("3", "34"), default="34")
    s.add_argument("--max-trials-factor", type=int, default=MAX_TRIALS_FACTOR)
    s.add_argument("--runs", type=int, default=None, help="fixed number of runs (ignores the time limit)")
    s.add_argument("--dump-candidates", metavar="FILE")
    s.add_argument("-o", "--output", help="tour file (default: stdout)")
    s.set_defaults(func=cmd_solve)

    e = sub.add_parser("extract", help="learn zone constraints for a target instance")
    e.add_argument("training_dir")
    e.add_argument("target", help="instance file")
    e.add_argument("--variant", choices=VARIANTS, default="full")
    e.add_argument("--transitive", action="store_true", help="transitive zone precedence")
    e.add_argument("--driver-order-oracle", action="store_true",
                   help="pin the target's own driven zone order instead of learning constraints")
    e.add_argument("-o", "--output", help="instance file with constraints (default: stdout)")
    e.set_defaults(func=cmd_extract)

    b = sub.add_parser("batch", help="extract + solve + best-of-two for many instances")
    b.add_argument("jobs_file")
    b.add_argument("--workers", type=int, default=default_workers())
    b.add_argument("--merge-factor", type=float, default=MERGE_FACTOR)
    b.add_argument("--full-time", type=float, default=None)
    b.add_argument("--alt-time", type=float, default=None, help="0 skips the alternate model")
    b.add_argument("--training", help="training directory for jobs that do not name one")
    b.add_argument("--report", help="JSON report path (default: next to the jobs file)")
    b.set_defaults(func=cmd_batch)

    g = sub.add_parser("synth", help="write a synthetic corpus")
    g.add_argument("--routes", type=int, default=200)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--split-rate", type=float, default=0.05)
    g.add_argument("--stations", type=int, default=5)
    g.add_argument("--out", default="synth")
    g.set_defaults(func=cmd_synth)

    o = sub.add_parser("oracle", help="exact optimum by enumeration (n <= 10)")
    o.add_argument("instance")
    o.add_argument("-o", "--output")
    o.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InstanceFormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
