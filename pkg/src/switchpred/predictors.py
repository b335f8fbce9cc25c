"""Sequential Bayesian predictors for piecewise-stationary binary sequences.

Implements the predict/update contract for:

* ``KtPredictor``       -- Beta(1/2,1/2) add-half estimator over counts,
* ``KtOraclePredictor`` -- KT with counters reset at known segment boundaries,
* ``PtwPredictor``      -- model averaging over dyadic partitions, O(d) per step,
* ``LinPredictor``      -- exact model averaging over all partitions, O(t) per step,
* ``MixturePredictor``  -- discrete Bayesian mixture of arbitrary predictors,
* ``ConstantPredictor`` -- fixed memoryless probability,
* ``TruthPredictor``    -- emits the generating bias (zero-regret reference).

Plus the slow enumeration oracles ``brute_force_ptw`` / ``brute_force_lin``
used to verify the incremental implementations, and the name registry that
backs the CLI (``kt``, ``kt_oracle``, ``ptw:<d>``, ``lin``, ``const:<p>``,
``mix:<spec>``, ``model:<path>``).

Every predictor tracks its own running log marginal; ``predict()`` is always
the one-step predictive probability of the marginal it reports, so the
chain rule ties the two together. Probabilities returned by ``predict()`` are
clamped to [1e-12, 1-1e-12] at that reporting boundary only; marginals are
never clamped.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Sequence

from .core import (
    LOG_HALF,
    NEG_INF,
    BinarySequence,
    LogProb,
    TemporalPartition,
    logspace_add,
    logspace_sum,
)
from .sources import PiecewiseSource

__all__ = [
    "SequentialPredictor",
    "KtPredictor",
    "KtOraclePredictor",
    "PtwPredictor",
    "LinPredictor",
    "MixturePredictor",
    "ConstantPredictor",
    "TruthPredictor",
    "kt_predict",
    "kt_log_marginal",
    "kt_oracle_log_marginal",
    "brute_force_ptw",
    "brute_force_lin",
    "PredictorSpec",
    "resolve_predictor",
]

_P_MIN = 1e-12
_P_MAX = 1.0 - 1e-12


def _clamp(p: float) -> float:
    return _P_MIN if p < _P_MIN else (_P_MAX if p > _P_MAX else p)


class SequentialPredictor(ABC):
    """Stateful predict-then-update contract over binary symbols.

    ``predict()`` returns Pr(next symbol = 1 | consumed history) in (0, 1);
    ``update(symbol)`` consumes the observed symbol; ``log_marginal()`` is the
    natural-log probability the predictor assigned to everything consumed so
    far, consistent with the chain rule over its own predictions.
    """

    @abstractmethod
    def predict(self) -> float:
        ...

    @abstractmethod
    def update(self, symbol: int) -> None:
        ...

    @abstractmethod
    def log_marginal(self) -> LogProb:
        ...

    @abstractmethod
    def reset(self) -> None:
        ...

    def prob_of(self, symbol: int) -> float:
        """Predictive probability of a specific next symbol."""
        p1 = self.predict()
        return p1 if symbol == 1 else 1.0 - p1

    def consume(self, x: BinarySequence) -> LogProb:
        """Feed a whole sequence; returns the final log marginal."""
        for s in x:
            self.update(s)
        return self.log_marginal()


def kt_predict(zeros: int, ones: int) -> float:
    """Add-half predictive probability of a one: (ones + 1/2) / (zeros + ones + 1)."""
    return (ones + 0.5) / (zeros + ones + 1.0)


def kt_log_marginal(x: BinarySequence) -> LogProb:
    """Chain-rule product of add-half predictive probabilities over x."""
    zeros = ones = 0
    lm = 0.0
    for s in x:
        p1 = kt_predict(zeros, ones)
        lm += math.log(p1 if s == 1 else 1.0 - p1)
        if s == 1:
            ones += 1
        else:
            zeros += 1
    return lm


def kt_oracle_log_marginal(x: BinarySequence, partition: TemporalPartition) -> LogProb:
    """Product of independent per-segment KT marginals for a known partition."""
    if partition.n != len(x):
        raise ValueError(f"partition covers {partition.n} steps, sequence has {len(x)}")
    arr = x.as_array()
    lm = 0.0
    for seg in partition.segments:
        lm += kt_log_marginal(BinarySequence(arr[seg.a - 1 : seg.b]))
    return lm


class KtPredictor(SequentialPredictor):
    """Bayesian predictor for a single unknown Bernoulli bias (two counters)."""

    def __init__(self):
        self.reset()

    def reset(self) -> None:
        self.zeros = 0
        self.ones = 0
        self._lm = 0.0

    def predict(self) -> float:
        return _clamp(kt_predict(self.zeros, self.ones))

    def update(self, symbol: int) -> None:
        p1 = kt_predict(self.zeros, self.ones)
        self._lm += math.log(p1 if symbol == 1 else 1.0 - p1)
        if symbol == 1:
            self.ones += 1
        else:
            self.zeros += 1

    def log_marginal(self) -> LogProb:
        return self._lm


class KtOraclePredictor(SequentialPredictor):
    """KT estimator that resets its counters at the true segment boundaries."""

    def __init__(self, partition: TemporalPartition):
        self._partition = partition
        self.reset()

    def reset(self) -> None:
        self._t = 0
        self._seg = 0
        self._zeros = 0
        self._ones = 0
        self._lm = 0.0

    def _counts_for_next(self) -> tuple[int, int]:
        # A fresh segment starting at t+1 begins with empty counters.
        if self._t + 1 > self._partition.segments[self._seg].b:
            return 0, 0
        return self._zeros, self._ones

    def predict(self) -> float:
        if self._t >= self._partition.n:
            raise ValueError("sequence exceeds the partition's coverage")
        z, o = self._counts_for_next()
        return _clamp(kt_predict(z, o))

    def update(self, symbol: int) -> None:
        if self._t >= self._partition.n:
            raise ValueError("sequence exceeds the partition's coverage")
        if self._t + 1 > self._partition.segments[self._seg].b:
            self._seg += 1
            self._zeros = 0
            self._ones = 0
        p1 = kt_predict(self._zeros, self._ones)
        self._lm += math.log(p1 if symbol == 1 else 1.0 - p1)
        if symbol == 1:
            self._ones += 1
        else:
            self._zeros += 1
        self._t += 1

    def log_marginal(self) -> LogProb:
        return self._lm


def _trailing_zeros(v: int) -> int:
    return (v & -v).bit_length() - 1


class PtwPredictor(SequentialPredictor):
    """Bayesian model averaging over dyadic temporal partitions of 1..2^d.

    Marginal satisfies the halving recursion
    ``W_h(x) = 1/2 KT(x) + 1/2 W_{h-1}(left) W_{h-1}(right)`` with depth-0
    intervals scored by a fresh KT estimator. Evaluated incrementally: the
    state holds, for each tree level on the root-to-leaf path of the current
    time index, a KT counter pair over the active node's symbols plus the
    finalized log value of the completed left sibling. Moving from time t-1 to
    t collapses exactly the levels below the most significant bit that changed
    between the two leaf indices, so one step costs O(d) time and space.
    """

    def __init__(self, depth: int):
        if depth < 0:
            raise ValueError("depth must be >= 0")
        self.depth = depth
        self.reset()

    def reset(self) -> None:
        d = self.depth
        self._t = 0
        self._zeros = [0] * (d + 1)  # counts of the active node per level (0 = leaf)
        self._ones = [0] * (d + 1)
        self._ktm = [0.0] * (d + 1)  # log KT marginal of each active node
        self._left = [0.0] * d  # log value of the finished left sibling per level

    @property
    def capacity(self) -> int:
        return 1 << self.depth

    def _fold(self, upto: int) -> float:
        """Finalized log value of the subtree of height `upto` on the active path."""
        v = self._ktm[0]
        for h in range(1, upto + 1):
            v = logspace_add(LOG_HALF + self._ktm[h], LOG_HALF + self._left[h - 1] + v)
        return v

    def log_marginal(self) -> LogProb:
        if self._t == 0:
            return 0.0
        return self._fold(self.depth)

    def _next_log_marginal(self, symbol: int) -> float:
        """Log marginal after hypothetically consuming `symbol`, without mutating."""
        d = self.depth
        t = self._t + 1
        if t > self.capacity:
            raise ValueError(f"predictor of depth {d} saw more than {self.capacity} symbols")
        if t == 1:
            j = d  # every level is fresh
            finalized = 0.0
        else:
            j = _trailing_zeros(t - 1)
            finalized = self._fold(j)
        v = LOG_HALF  # fresh leaf scores the new symbol at probability 1/2
        for h in range(1, d + 1):
            if h <= j:
                node = LOG_HALF
            else:
                z, o = self._zeros[h], self._ones[h]
                p1 = kt_predict(z, o)
                node = self._ktm[h] + math.log(p1 if symbol == 1 else 1.0 - p1)
            if h - 1 < j:
                left = 0.0
            elif h - 1 == j:
                left = finalized
            else:
                left = self._left[h - 1]
            v = logspace_add(LOG_HALF + node, LOG_HALF + left + v)
        return v

    def predict(self) -> float:
        return _clamp(math.exp(self._next_log_marginal(1) - self.log_marginal()))

    def update(self, symbol: int) -> None:
        t = self._t + 1
        if t > self.capacity:
            raise ValueError(
                f"predictor of depth {self.depth} saw more than {self.capacity} symbols"
            )
        if t >= 2:
            j = _trailing_zeros(t - 1)
            self._left[j] = self._fold(j)
            for h in range(j):
                self._left[h] = 0.0
            for h in range(j + 1):
                self._zeros[h] = 0
                self._ones[h] = 0
                self._ktm[h] = 0.0
        for h in range(self.depth + 1):
            p1 = kt_predict(self._zeros[h], self._ones[h])
            self._ktm[h] += math.log(p1 if symbol == 1 else 1.0 - p1)
            if symbol == 1:
                self._ones[h] += 1
            else:
                self._zeros[h] += 1
        self._t = t


class LinPredictor(SequentialPredictor):
    """Exact Bayesian mixture over all temporal partitions of the history.

    One hypothesis per possible start of the current segment; after t symbols
    there are exactly t of them (no pruning by default), each carrying its KT
    counters and a normalized log posterior weight. At each step, hypothesis
    mass (1/2)/m (m = current segment length) flows into a fresh segment and
    the remainder stays, then the observed symbol reweights every hypothesis
    by its KT predictive probability. O(t) work per step, O(n^2) per sequence.

    ``prune_threshold`` optionally drops hypotheses whose posterior weight
    falls below the threshold (weights renormalized); this makes the reported
    marginal approximate and is excluded from exactness guarantees.
    """

    def __init__(self, prune_threshold: float | None = None):
        if prune_threshold is not None and not 0.0 < prune_threshold < 1.0:
            raise ValueError("prune_threshold must lie in (0, 1)")
        self._prune_log = math.log(prune_threshold) if prune_threshold else None
        self.reset()

    def reset(self) -> None:
        self._t = 0
        self._starts: list[int] = []
        self._lw: list[float] = []  # normalized log posterior weights
        self._zeros: list[int] = []
        self._ones: list[int] = []
        self._lm = 0.0

    def hypotheses(self) -> list[tuple[int, float, tuple[int, int]]]:
        """(segment start, log posterior weight, (zeros, ones)) per hypothesis."""
        return [
            (c, lw, (z, o))
            for c, lw, z, o in zip(self._starts, self._lw, self._zeros, self._ones)
        ]

    def predict(self) -> float:
        if self._t == 0:
            return 0.5
        total = 0.0
        for lw, z, o in zip(self._lw, self._zeros, self._ones):
            m = z + o
            q = 0.5 / m
            p1_cont = kt_predict(z, o)
            total += math.exp(lw) * ((1.0 - q) * p1_cont + q * 0.5)
        return _clamp(total)

    def update(self, symbol: int) -> None:
        log_sym_half = LOG_HALF  # fresh segments score either symbol at 1/2
        if self._t == 0:
            self._starts = [1]
            self._lw = [0.0]
            self._zeros = [1 - symbol]
            self._ones = [symbol]
            self._lm += log_sym_half
            self._t = 1
            return
        t_new = self._t + 1
        # mass flowing out of every hypothesis into a segment starting at t_new
        fresh_terms = []
        for lw, z, o in zip(self._lw, self._zeros, self._ones):
            m = z + o
            fresh_terms.append(lw + math.log(0.5 / m))
        fresh_lw = logspace_sum(fresh_terms) + log_sym_half
        # survivors keep the remainder and score the symbol with their counts
        for i in range(len(self._lw)):
            z, o = self._zeros[i], self._ones[i]
            m = z + o
            p1 = kt_predict(z, o)
            self._lw[i] += math.log1p(-0.5 / m) + math.log(
                p1 if symbol == 1 else 1.0 - p1
            )
            if symbol == 1:
                self._ones[i] += 1
            else:
                self._zeros[i] += 1
        self._starts.append(t_new)
        self._lw.append(fresh_lw)
        self._zeros.append(1 - symbol)
        self._ones.append(symbol)
        # renormalize; the normalizer is this step's predictive log probability
        logz = logspace_sum(self._lw)
        self._lm += logz
        self._lw = [lw - logz for lw in self._lw]
        self._t = t_new
        if self._prune_log is not None and len(self._lw) > 1:
            keep = [i for i, lw in enumerate(self._lw) if lw >= self._prune_log]
            if not keep:
                keep = [max(range(len(self._lw)), key=self._lw.__getitem__)]
            if len(keep) < len(self._lw):
                self._starts = [self._starts[i] for i in keep]
                self._zeros = [self._zeros[i] for i in keep]
                self._ones = [self._ones[i] for i in keep]
                lw = [self._lw[i] for i in keep]
                logz = logspace_sum(lw)
                self._lw = [w - logz for w in lw]

    def log_marginal(self) -> LogProb:
        return self._lm


class MixturePredictor(SequentialPredictor):
    """Discrete Bayesian mixture of sequential predictors.

    The predictive probability is the posterior-weighted combination of the
    component predictions, with posterior weights proportional to prior weight
    times component marginal. The mixture marginal is the log-space sum of
    weighted component marginals, so its loss exceeds the best component's by
    at most -log of that component's prior weight.
    """

    def __init__(self, components: Sequence[tuple[float, SequentialPredictor]]):
        if not components:
            raise ValueError("mixture needs at least one component")
        weights = [w for w, _ in components]
        if any(w <= 0 for w in weights):
            raise ValueError("mixture weights must be positive")
        if abs(sum(weights) - 1.0) > 1e-9:
            raise ValueError(f"mixture weights sum to {sum(weights)}, expected 1")
        self._log_w0 = [math.log(w) for w in weights]
        self._components = [p for _, p in components]

    def reset(self) -> None:
        for p in self._components:
            p.reset()

    def posterior_log_weights(self) -> list[float]:
        joint = [
            lw0 + p.log_marginal() for lw0, p in zip(self._log_w0, self._components)
        ]
        logz = logspace_sum(joint)
        return [j - logz for j in joint]

    def predict(self) -> float:
        post = self.posterior_log_weights()
        p1 = sum(math.exp(lw) * p.predict() for lw, p in zip(post, self._components))
        return _clamp(p1)

    def update(self, symbol: int) -> None:
        for p in self._components:
            p.update(symbol)

    def log_marginal(self) -> LogProb:
        return logspace_sum(
            [lw0 + p.log_marginal() for lw0, p in zip(self._log_w0, self._components)]
        )


class ConstantPredictor(SequentialPredictor):
    """Memoryless predictor that always emits the same probability of a one."""

    def __init__(self, p: float):
        if not 0.0 < p < 1.0:
            raise ValueError(f"constant probability must lie in (0, 1), got {p}")
        self.p = p
        self.reset()

    def reset(self) -> None:
        self._lm = 0.0

    def predict(self) -> float:
        return _clamp(self.p)

    def update(self, symbol: int) -> None:
        self._lm += math.log(self.p if symbol == 1 else 1.0 - self.p)

    def log_marginal(self) -> LogProb:
        return self._lm


class TruthPredictor(SequentialPredictor):
    """Emits the generating source's true per-step bias (zero expected regret)."""

    def __init__(self, source: PiecewiseSource):
        self._theta = source.theta_path()
        self.reset()

    def reset(self) -> None:
        self._t = 0
        self._lm = 0.0

    def predict(self) -> float:
        if self._t >= self._theta.size:
            raise ValueError("sequence exceeds the source's coverage")
        return _clamp(float(self._theta[self._t]))

    def update(self, symbol: int) -> None:
        p1 = self.predict()
        self._lm += math.log(p1 if symbol == 1 else 1.0 - p1)
        self._t += 1

    def log_marginal(self) -> LogProb:
        return self._lm


# ---------------------------------------------------------------------------
# Enumeration oracles


def _kt_interval_table(x: BinarySequence) -> list[list[float]]:
    """lm[a][b] = KT log marginal of x_{a:b}, 1-based, computed in O(n^2)."""
    n = len(x)
    arr = x.as_array()
    table = [[0.0] * (n + 1) for _ in range(n + 2)]
    for a in range(1, n + 1):
        zeros = ones = 0
        lm = 0.0
        row = table[a]
        for b in range(a, n + 1):
            s = int(arr[b - 1])
            p1 = kt_predict(zeros, ones)
            lm += math.log(p1 if s == 1 else 1.0 - p1)
            if s == 1:
                ones += 1
            else:
                zeros += 1
            row[b] = lm
    return table


def brute_force_ptw(x: BinarySequence, d: int) -> LogProb:
    """Direct top-down evaluation of the dyadic-averaging recursion.

    Exponential-time reference for :class:`PtwPredictor`; requires |x| = 2^d
    and refuses d > 6.
    """
    if d < 0:
        raise ValueError("depth must be >= 0")
    if d > 6:
        raise ValueError("enumeration oracle is limited to depth <= 6")
    if len(x) != 1 << d:
        raise ValueError(f"need a sequence of length 2^{d} = {1 << d}, got {len(x)}")
    table = _kt_interval_table(x)

    def rec(a: int, b: int, h: int) -> float:
        if h == 0:
            return table[a][b]
        mid = (a + b) // 2
        return logspace_add(
            LOG_HALF + table[a][b],
            LOG_HALF + rec(a, mid, h - 1) + rec(mid + 1, b, h - 1),
        )

    return rec(1, len(x), d)


def brute_force_lin(x: BinarySequence) -> LogProb:
    """Exact sum over all 2^(n-1) temporal partitions, weighted by the chain prior.

    The weight of a partition is the product over steps t = 1..n-1 of the
    switch probability (1/2)/(t - t_c + 1) where a boundary follows t, and one
    minus it where none does. Reference for :class:`LinPredictor`; refuses
    n > 14.
    """
    n = len(x)
    if n == 0:
        return 0.0
    if n > 14:
        raise ValueError("enumeration oracle is limited to length <= 14")
    table = _kt_interval_table(x)
    total = NEG_INF
    for mask in range(1 << (n - 1)):
        log_w = 0.0
        lm = 0.0
        t_c = 1
        for t in range(1, n):
            q = 0.5 / (t - t_c + 1)
            if mask >> (t - 1) & 1:
                log_w += math.log(q)
                lm += table[t_c][t]
                t_c = t + 1
            else:
                log_w += math.log1p(-q)
        lm += table[t_c][n]
        total = logspace_add(total, log_w + lm)
    return total


# ---------------------------------------------------------------------------
# Name registry


@dataclass(frozen=True)
class PredictorSpec:
    """A named recipe that builds a fresh predictor for a given source.

    Most predictors ignore the source; the oracle variants read its partition
    or biases. One spec is reused across sequences, with ``build`` called once
    per sequence.
    """

    name: str
    build: Callable[[PiecewiseSource], SequentialPredictor]


def _parse_mixture(spec: str) -> PredictorSpec:
    parts = [p.strip() for p in spec.split("+") if p.strip()]
    if not parts:
        raise ValueError("mixture spec is empty")
    weights: list[float | None] = []
    inner: list[PredictorSpec] = []
    for part in parts:
        weight: float | None = None
        if "*" in part:
            w_text, part = part.split("*", 1)
            weight = float(w_text)
            if weight <= 0:
                raise ValueError(f"mixture weight {weight} must be positive")
        weights.append(weight)
        inner.append(resolve_predictor(part))
    given = [w for w in weights if w is not None]
    remaining = 1.0 - sum(given)
    n_free = len(weights) - len(given)
    if n_free:
        if remaining <= 0:
            raise ValueError("explicit mixture weights leave no mass for the rest")
        weights = [w if w is not None else remaining / n_free for w in weights]
    if abs(sum(weights) - 1.0) > 1e-9:
        raise ValueError(f"mixture weights sum to {sum(weights)}, expected 1")
    name = "mix:" + "+".join(s.name for s in inner)

    def build(source: PiecewiseSource) -> SequentialPredictor:
        return MixturePredictor([(w, s.build(source)) for w, s in zip(weights, inner)])

    return PredictorSpec(name, build)


def resolve_predictor(name: str) -> PredictorSpec:
    """Resolve a registry name into a predictor factory.

    Known names: ``kt``, ``kt_oracle``, ``ptw:<d>``, ``lin``, ``const:<p>``,
    ``mix:<spec>`` with '+'-separated, optionally 'w*'-weighted components,
    and ``model:<path>`` for a trained recurrent model file.
    """
    name = name.strip()
    if name == "kt":
        return PredictorSpec("kt", lambda source: KtPredictor())
    if name == "kt_oracle":
        return PredictorSpec("kt_oracle", lambda source: KtOraclePredictor(source.partition))
    if name == "lin":
        return PredictorSpec("lin", lambda source: LinPredictor())
    head, sep, rest = name.partition(":")
    if sep:
        if head == "ptw":
            depth = int(rest)
            return PredictorSpec(f"ptw:{depth}", lambda source: PtwPredictor(depth))
        if head == "const":
            p = float(rest)
            if not 0.0 < p < 1.0:
                raise ValueError(f"const probability must lie in (0, 1), got {p}")
            return PredictorSpec(f"const:{rest}", lambda source: ConstantPredictor(p))
        if head == "mix":
            return _parse_mixture(rest)
        if head == "model":
            from .meta import load_model, as_predictor  # lazy: meta depends on this module

            model = load_model(rest)
            return PredictorSpec(f"model:{rest}", lambda source: as_predictor(model))
    raise ValueError(f"unknown predictor name {name!r}")
