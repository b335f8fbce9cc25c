"""Command-line surface: sample, stats, eval, trace, train.

Every command writes CSV with a header row, preceded by '#' comment lines
recording the resolved configuration and root seed. Exit codes: 0 success,
1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import stats as stats_mod
from .core import split_stream
from .harness import evaluate, trace, write_eval_csv, write_trace_csv
from .meta import TrainingConfig, save_model, train, write_curve_csv
from .predictors import resolve_predictor
from .sources import (
    PriorSpec,
    sample_ptw_partition,
    sample_sequence,
    sample_source,
    write_sequences_csv,
)

__all__ = ["main", "build_parser"]


def _add_prior_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--prior", required=True, choices=("regular", "uniform", "ptw", "lin")
    )
    parser.add_argument("--length", type=int, required=True, help="sequence length n")
    parser.add_argument("--period", type=int, help="segment period (regular prior)")
    parser.add_argument("--max-len", type=int, help="max segment length (uniform prior)")
    parser.add_argument("--depth", type=int, help="tree depth (ptw prior)")


def _prior_from_args(args: argparse.Namespace) -> PriorSpec:
    return PriorSpec(
        kind=args.prior,
        n=args.length,
        period=args.period,
        max_len=getattr(args, "max_len", None),
        depth=args.depth,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="switchpred",
        description="Sequence prediction on piecewise-stationary Bernoulli sources",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sample = sub.add_parser("sample", help="sample sources and sequences to CSV")
    _add_prior_args(p_sample)
    p_sample.add_argument("--num", type=int, required=True, help="number of sequences")
    p_sample.add_argument("--seed", type=int, required=True)
    p_sample.add_argument("--out", required=True)

    p_stats = sub.add_parser(
        "stats", help="analytic vs empirical switching statistics of the ptw prior"
    )
    p_stats.add_argument("--depth", type=int, required=True)
    p_stats.add_argument("--samples", type=int, default=10_000)
    p_stats.add_argument("--seed", type=int, required=True)
    p_stats.add_argument("--out", required=True)

    p_eval = sub.add_parser("eval", help="paired mean cumulative regret comparison")
    _add_prior_args(p_eval)
    p_eval.add_argument("--num", type=int, required=True, help="number of sequences")
    p_eval.add_argument("--seed", type=int, required=True)
    p_eval.add_argument(
        "--predictors", required=True, help="comma-separated registry names"
    )
    p_eval.add_argument(
        "--realized",
        action="store_true",
        help="score realized excess log loss instead of its conditional expectation",
    )
    p_eval.add_argument("--out", required=True)

    p_trace = sub.add_parser("trace", help="per-step regret trace on one sequence")
    _add_prior_args(p_trace)
    p_trace.add_argument("--seed", type=int, required=True)
    p_trace.add_argument("--predictors", required=True)
    p_trace.add_argument("--realized", action="store_true")
    p_trace.add_argument("--out", required=True)

    p_train = sub.add_parser("train", help="train a recurrent predictor on prior draws")
    _add_prior_args(p_train)
    p_train.add_argument("--arch", choices=("rnn", "lstm"), default="lstm")
    p_train.add_argument("--steps", type=int, default=20_000)
    p_train.add_argument("--batch", type=int, default=32)
    p_train.add_argument("--lr", type=float, default=1e-3)
    p_train.add_argument("--hidden", type=int, default=32)
    p_train.add_argument("--seed", type=int, required=True)
    p_train.add_argument("--out", required=True, help="model JSON path")
    p_train.add_argument("--curve", help="optional training-curve CSV path")
    p_train.add_argument(
        "--progress-every", type=int, default=0, help="print a loss line every N steps"
    )
    return parser


def _cmd_sample(args) -> int:
    prior = _prior_from_args(args)
    if args.num < 1:
        raise UsageError("--num must be >= 1")
    rows = []
    for seq_id in range(args.num):
        stream = split_stream(args.seed, seq_id)
        source = sample_source(prior, stream)
        rows.append((seq_id, source, sample_sequence(source, stream)))
    comments = [
        "command=sample",
        f"prior={prior.describe()}",
        f"num={args.num}",
        f"root_seed={args.seed}",
    ]
    with open(args.out, "w") as fh:
        write_sequences_csv(fh, rows, comments)
    return 0


def _cmd_stats(args) -> int:
    if args.depth < 1:
        raise UsageError("--depth must be >= 1")
    if args.samples < 1:
        raise UsageError("--samples must be >= 1")
    n = 1 << args.depth
    analytic = stats_mod.ptw_switch_count_pmf(args.depth, n - 1)
    stream = split_stream(args.seed, 0)
    partitions = [
        __import__("switchpred.sources", fromlist=["sample_ptw_partition"]).sample_ptw_partition(
            args.depth, stream
        )
        for _ in range(args.samples)
    ]
    count_pmf, loc_freq = stats_mod.empirical_switch_stats(partitions)
    comments = [
        "command=stats",
        f"depth={args.depth}",
        f"samples={args.samples}",
        f"root_seed={args.seed}",
    ]
    with open(args.out, "w") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        fh.write("k,analytic_p,empirical_p,stderr\n")
        k_hi = max(analytic.probs.size, count_pmf.size)
        for k in range(k_hi):
            a = analytic[k] if k < analytic.probs.size else 0.0
            e = float(count_pmf[k]) if k < count_pmf.size else 0.0
            stderr = math.sqrt(e * (1.0 - e) / args.samples)
            fh.write(f"{k},{a!r},{e!r},{stderr!r}\n")
        fh.write("# switch location frequencies\n")
        fh.write("t,analytic_loc_p,empirical_loc_p\n")
        for t in range(1, n):
            a = stats_mod.switch_location_probability(args.depth, t)
            fh.write(f"{t},{a!r},{float(loc_freq[t - 1])!r}\n")
    return 0


def _parse_predictors(text: str) -> list:
    names = [p.strip() for p in text.split(",") if p.strip()]
    if not names:
        raise UsageError("--predictors needs at least one name")
    try:
        return [resolve_predictor(name) for name in names]
    except (ValueError, OSError) as exc:
        raise UsageError(str(exc)) from exc


def _cmd_eval(args) -> int:
    prior = _prior_from_args(args)
    if args.num < 1:
        raise UsageError("--num must be >= 1")
    specs = _parse_predictors(args.predictors)
    summaries = evaluate(
        specs, prior, args.num, args.length, args.seed, use_realized=args.realized
    )
    comments = [
        "command=eval",
        f"prior={prior.describe()}",
        f"num={args.num}",
        f"root_seed={args.seed}",
        f"regret={'realized' if args.realized else 'expected'}",
        f"predictors={','.join(s.name for s in specs)}",
    ]
    with open(args.out, "w") as fh:
        write_eval_csv(fh, summaries, comments)
    for s in summaries:
        print(
            f"{s.predictor}: {s.mean_cum_regret_bits:.4f} "
            f"± {s.stderr_bits:.4f} bits ({s.wall_ms:.0f} ms)"
        )
    return 0


def _cmd_trace(args) -> int:
    prior = _prior_from_args(args)
    specs = _parse_predictors(args.predictors)
    stream = split_stream(args.seed, 0)
    source = sample_source(prior, stream)
    x = sample_sequence(source, stream)
    traces = [
        trace(
            spec.build(source),
            source,
            x,
            seq_id=0,
            name=spec.name,
            use_realized=args.realized,
        )
        for spec in specs
    ]
    comments = [
        "command=trace",
        f"prior={prior.describe()}",
        f"root_seed={args.seed}",
        f"regret={'realized' if args.realized else 'expected'}",
        f"segment_ends={';'.join(str(s.b) for s in source.partition.segments)}",
    ]
    with open(args.out, "w") as fh:
        write_trace_csv(fh, traces, comments)
    return 0


def _cmd_train(args) -> int:
    prior = _prior_from_args(args)
    try:
        config = TrainingConfig(
            prior=prior,
            seq_len=args.length,
            batch_size=args.batch,
            steps=args.steps,
            learning_rate=args.lr,
            seed=args.seed,
            arch=args.arch,
            hidden_size=args.hidden,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    model, curve = train(config, progress_every=args.progress_every)
    save_model(model, args.out, training_config=config.to_dict(), root_seed=args.seed)
    if args.curve:
        comments = [
            "command=train",
            f"prior={prior.describe()}",
            f"arch={args.arch}",
            f"steps={args.steps}",
            f"root_seed={args.seed}",
        ]
        with open(args.curve, "w") as fh:
            write_curve_csv(fh, curve, comments)
    if curve:
        last = np.mean([l for _, l in curve[-100:]])
        print(f"trained {args.arch} for {args.steps} steps; recent loss {last:.4f} nats")
    else:
        print("wrote freshly initialized model (steps=0)")
    return 0


class UsageError(ValueError):
    """Bad flag values or unknown names: exit code 2."""


_COMMANDS = {
    "sample": _cmd_sample,
    "stats": _cmd_stats,
    "eval": _cmd_eval,
    "trace": _cmd_trace,
    "train": _cmd_train,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 2
    except ValueError as exc:
        # bad parameter combinations surface as usage problems
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - runtime failure boundary
        print(f"failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
