"""Regret evaluation: per-sequence traces and paired Monte Carlo comparisons.

Regret of a prediction p against the true segment bias theta is the
Bernoulli KL divergence in bits,

    theta log2(theta/p) + (1-theta) log2((1-theta)/(1-p)),

the conditional expectation of the excess log loss at that step given the
realized history (0 log 0 reads as 0). Summing over steps gives the
cumulative expected regret; an oracle knowing both the partition and the
biases scores zero. A realized-loss variant (log2 of true-probability over
predicted-probability of the observed symbol) is available for cross-checks;
it agrees in expectation but is noisier and can be negative per step.

``evaluate`` compares predictors on common random sequences: every predictor
of one run consumes byte-identical draws (verified by hashing), so
differences in mean regret are paired.
"""

from __future__ import annotations

import hashlib
import math
import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import BinarySequence, split_stream
from .predictors import PredictorSpec, SequentialPredictor, resolve_predictor
from .sources import PiecewiseSource, PriorSpec, sample_sequence, sample_source

__all__ = [
    "RegretTrace",
    "EvalSummary",
    "instantaneous_regret",
    "realized_regret",
    "trace",
    "evaluate",
    "write_trace_csv",
    "write_eval_csv",
]

_LOG2 = math.log(2.0)


def instantaneous_regret(theta: float, p: float) -> float:
    """Expected one-step excess log loss in bits of predicting p under bias theta."""
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"theta must lie in [0, 1], got {theta}")
    if not 0.0 < p < 1.0:
        raise ValueError(f"predicted probability must lie in (0, 1), got {p}")
    r = 0.0
    if theta > 0.0:
        r += theta * math.log(theta / p)
    if theta < 1.0:
        r += (1.0 - theta) * math.log((1.0 - theta) / (1.0 - p))
    return r / _LOG2


def realized_regret(theta: float, symbol: int, p: float) -> float:
    """Excess log loss in bits actually incurred on the observed symbol."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"predicted probability must lie in (0, 1), got {p}")
    mu = theta if symbol == 1 else 1.0 - theta
    pi = p if symbol == 1 else 1.0 - p
    if mu == 0.0:
        raise ValueError("observed a symbol the source gives zero probability")
    return math.log(mu / pi) / _LOG2


@dataclass
class RegretTrace:
    """Per-step record of one predictor on one sequence."""

    seq_id: int
    predictor: str
    theta: np.ndarray
    p1: np.ndarray
    regret_bits: np.ndarray
    cum_regret_bits: np.ndarray

    @property
    def final_cum_regret_bits(self) -> float:
        return float(self.cum_regret_bits[-1]) if self.cum_regret_bits.size else 0.0


@dataclass
class EvalSummary:
    """Mean cumulative regret of one predictor over a batch of sequences."""

    predictor: str
    prior: str
    length: int
    num_seqs: int
    mean_cum_regret_bits: float
    stderr_bits: float
    wall_ms: float


def trace(
    predictor: SequentialPredictor,
    source: PiecewiseSource,
    x: BinarySequence,
    seq_id: int = 0,
    name: str = "",
    use_realized: bool = False,
) -> RegretTrace:
    """Run a predictor over x, recording p before each update.

    Regret at step t uses the source's true bias for t; with
    ``use_realized`` the realized-loss variant replaces the expectation.
    """
    n = len(x)
    if source.n != n:
        raise ValueError(f"source covers {source.n} steps, sequence has {n}")
    theta = source.theta_path()
    p1 = np.empty(n)
    regret = np.empty(n)
    for i, symbol in enumerate(x):
        p = predictor.predict()
        p1[i] = p
        th = float(theta[i])
        regret[i] = (
            realized_regret(th, symbol, p) if use_realized else instantaneous_regret(th, p)
        )
        predictor.update(symbol)
    return RegretTrace(seq_id, name, theta, p1, regret, np.cumsum(regret))


def evaluate(
    predictors: Sequence[PredictorSpec | str],
    prior: PriorSpec,
    num_seqs: int,
    length: int,
    root_seed: int,
    use_realized: bool = False,
) -> list[EvalSummary]:
    """Paired Monte Carlo comparison of predictors on prior draws.

    Sequence k comes from the stream (root_seed, k), identical for every
    predictor; a per-predictor digest over the consumed symbols asserts the
    pairing. Summaries are sorted by mean cumulative regret.
    """
    if num_seqs < 1:
        raise ValueError("num_seqs must be >= 1")
    if prior.n != length:
        raise ValueError(f"prior covers n={prior.n} but length={length} requested")
    specs = [resolve_predictor(p) if isinstance(p, str) else p for p in predictors]
    if not specs:
        raise ValueError("need at least one predictor")
    finals = [np.empty(num_seqs) for _ in specs]
    wall = [0.0 for _ in specs]
    digests = [hashlib.sha256() for _ in specs]
    for seq_id in range(num_seqs):
        stream = split_stream(root_seed, seq_id)
        source = sample_source(prior, stream)
        x = sample_sequence(source, stream)
        theta = source.theta_path()
        symbols = x.as_array()
        payload = symbols.tobytes()
        for j, spec in enumerate(specs):
            tic = time.perf_counter()
            predictor = spec.build(source)
            cum = 0.0
            try:
                for i in range(symbols.size):
                    p = predictor.predict()
                    th = float(theta[i])
                    s = int(symbols[i])
                    cum += (
                        realized_regret(th, s, p)
                        if use_realized
                        else instantaneous_regret(th, p)
                    )
                    predictor.update(s)
            except Exception as exc:
                raise RuntimeError(
                    f"predictor {spec.name!r} failed on seq_id={seq_id}: {exc}"
                ) from exc
            wall[j] += time.perf_counter() - tic
            finals[j][seq_id] = cum
            digests[j].update(payload)
    fingerprints = {d.hexdigest() for d in digests}
    if len(fingerprints) != 1:
        raise RuntimeError("predictors consumed different sequences within one run")
    summaries = []
    for j, spec in enumerate(specs):
        vals = finals[j]
        stderr = float(vals.std(ddof=1) / math.sqrt(num_seqs)) if num_seqs > 1 else 0.0
        summaries.append(
            EvalSummary(
                predictor=spec.name,
                prior=prior.describe(),
                length=length,
                num_seqs=num_seqs,
                mean_cum_regret_bits=float(vals.mean()),
                stderr_bits=stderr,
                wall_ms=wall[j] * 1e3,
            )
        )
    summaries.sort(key=lambda s: s.mean_cum_regret_bits)
    return summaries


def write_trace_csv(fh, traces: Sequence[RegretTrace], header_comments=()) -> None:
    """Trace CSV: seq_id,t,theta,p1,regret_bits,cum_regret_bits (one block per predictor)."""
    for line in header_comments:
        fh.write(f"# {line}\n")
    fh.write("seq_id,t,theta,p1,regret_bits,cum_regret_bits\n")
    for tr in traces:
        fh.write(f"# predictor={tr.predictor}\n")
        for i in range(tr.p1.size):
            fh.write(
                f"{tr.seq_id},{i + 1},{tr.theta[i]!r},{tr.p1[i]!r},"
                f"{tr.regret_bits[i]!r},{tr.cum_regret_bits[i]!r}\n"
            )


def write_eval_csv(
    fh, summaries: Sequence[EvalSummary], header_comments=(), include_wall: bool = True
) -> None:
    """Eval CSV: predictor,prior,length,num_seqs,mean_cum_regret_bits,stderr_bits[,wall_ms]."""
    for line in header_comments:
        fh.write(f"# {line}\n")
    cols = "predictor,prior,length,num_seqs,mean_cum_regret_bits,stderr_bits"
    fh.write(cols + (",wall_ms\n" if include_wall else "\n"))
    for s in summaries:
        row = (
            f"{s.predictor},{s.prior},{s.length},{s.num_seqs},"
            f"{s.mean_cum_regret_bits!r},{s.stderr_bits!r}"
        )
        fh.write(row + (f",{s.wall_ms:.3f}\n" if include_wall else "\n"))
