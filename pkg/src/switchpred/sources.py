"""Switching-point priors, Beta bias assignment, and piecewise Bernoulli sampling.

Four priors over temporal partitions are supported:

* ``regular``  -- deterministic segments of fixed period ``l`` (last truncated),
* ``uniform``  -- i.i.d. segment lengths uniform on {1..max_len}, last truncated,
* ``ptw``      -- recursive dyadic halving, each interval split with a fair coin,
* ``lin``      -- left-to-right chain where a segment of current length m closes
  with probability (1/2)/m at each step.

Each segment then receives an independent Bernoulli bias drawn from
Beta(alpha, beta) via the two-Gamma ratio construction, and symbols are drawn
per segment. Every sampler consumes an :class:`~switchpred.core.RngStream`
sequentially, so outputs are bit-reproducible from (root_seed, stream_id).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

import numpy as np

from .core import BinarySequence, RngStream, Segment, TemporalPartition

__all__ = [
    "PiecewiseSource",
    "PriorSpec",
    "sample_ptw_partition",
    "sample_lin_partition",
    "regular_partition",
    "sample_uniform_partition",
    "sample_partition",
    "attach_biases",
    "sample_source",
    "sample_sequence",
    "write_sequences_csv",
    "read_sequences_csv",
]


@dataclass(frozen=True)
class PiecewiseSource:
    """A temporal partition plus one Bernoulli bias per segment.

    Biases produced by :func:`attach_biases` are always interior points of
    (0, 1); endpoint biases are admitted here only so tests can build
    degenerate all-ones / all-zeros sources directly.
    """

    partition: TemporalPartition
    biases: tuple[float, ...]

    def __post_init__(self):
        biases = tuple(float(b) for b in self.biases)
        object.__setattr__(self, "biases", biases)
        if len(biases) != len(self.partition.segments):
            raise ValueError(
                f"{len(biases)} biases for {len(self.partition.segments)} segments"
            )
        for b in biases:
            if not 0.0 <= b <= 1.0 or not math.isfinite(b):
                raise ValueError(f"bias {b} outside [0, 1]")

    @property
    def n(self) -> int:
        return self.partition.n

    def theta_at(self, t: int) -> float:
        """True bias governing time step t (1-based)."""
        return self.biases[self.partition.segment_index_at(t)]

    def theta_path(self) -> np.ndarray:
        """Per-step bias array of length n, position i holding theta at t = i+1."""
        out = np.empty(self.n, dtype=float)
        for seg, b in zip(self.partition.segments, self.biases):
            out[seg.a - 1 : seg.b] = b
        return out


_PRIOR_KINDS = ("regular", "uniform", "ptw", "lin")


@dataclass(frozen=True)
class PriorSpec:
    """Which switching-point prior to use and its parameters for length n."""

    kind: str
    n: int
    period: int | None = None  # regular
    max_len: int | None = None  # uniform
    depth: int | None = None  # ptw

    def __post_init__(self):
        if self.kind not in _PRIOR_KINDS:
            raise ValueError(f"unknown prior kind {self.kind!r}, expected one of {_PRIOR_KINDS}")
        if self.n < 1:
            raise ValueError("sequence length must be >= 1")
        if self.kind == "regular":
            if self.period is None or not 1 <= self.period <= self.n:
                raise ValueError(f"regular prior needs 1 <= period <= n, got {self.period}")
        elif self.kind == "uniform":
            if self.max_len is None or self.max_len < 1:
                raise ValueError(f"uniform prior needs max_len >= 1, got {self.max_len}")
        elif self.kind == "ptw":
            if self.depth is None or self.depth < 0:
                raise ValueError(f"ptw prior needs depth >= 0, got {self.depth}")
            if self.n != 1 << self.depth:
                raise ValueError(
                    f"ptw prior needs n = 2^depth, got n={self.n} with depth={self.depth}"
                )

    def describe(self) -> str:
        if self.kind == "regular":
            return f"regular(l={self.period},n={self.n})"
        if self.kind == "uniform":
            return f"uniform(max={self.max_len},n={self.n})"
        if self.kind == "ptw":
            return f"ptw(d={self.depth},n={self.n})"
        return f"lin(n={self.n})"


def sample_ptw_partition(d: int, rng: RngStream) -> TemporalPartition:
    """Sample a dyadic partition of 1..2^d by recursive fair-coin halving.

    Each interval is kept whole with probability 1/2, otherwise split into two
    halves that recurse independently; depth-0 intervals are single points.
    Implemented with an explicit work stack (no recursion limit), expected
    work O(d).
    """
    if d < 0:
        raise ValueError("depth must be >= 0")
    n = 1 << d
    gen = rng.gen
    segments: list[Segment] = []
    stack: list[tuple[int, int]] = [(0, d)]  # (offset, remaining depth)
    while stack:
        offset, h = stack.pop()
        if h == 0:
            segments.append(Segment(offset + 1, offset + 1))
            continue
        if gen.random() < 0.5:  # keep the interval whole
            segments.append(Segment(offset + 1, offset + (1 << h)))
        else:
            half = 1 << (h - 1)
            stack.append((offset + half, h - 1))
            stack.append((offset, h - 1))
    return TemporalPartition(tuple(segments), n)


def sample_lin_partition(n: int, rng: RngStream) -> TemporalPartition:
    """Sample a partition of 1..n from the left-to-right chain prior.

    With the current segment started at t_c, a boundary is placed after step
    t < n with probability (1/2)/(t - t_c + 1). Worst-case O(n) time/space.
    """
    if n < 1:
        raise ValueError("length must be >= 1")
    gen = rng.gen
    segments: list[Segment] = []
    t_c = 1
    for t in range(1, n):
        if gen.random() < 0.5 / (t - t_c + 1):
            segments.append(Segment(t_c, t))
            t_c = t + 1
    segments.append(Segment(t_c, n))
    return TemporalPartition(tuple(segments), n)


def regular_partition(n: int, l: int) -> TemporalPartition:
    """Deterministic segments (1,l), (l+1,2l), ...; the final one truncated at n."""
    if l <= 0 or l > n:
        raise ValueError(f"period must satisfy 1 <= l <= n, got l={l}, n={n}")
    segments = []
    start = 1
    while start <= n:
        segments.append(Segment(start, min(start + l - 1, n)))
        start += l
    return TemporalPartition(tuple(segments), n)


def sample_uniform_partition(n: int, max_len: int, rng: RngStream) -> TemporalPartition:
    """Draw i.i.d. segment lengths uniform on {1..max_len}; truncate the overshoot.

    Lengths are drawn until they cover n; the final segment is cut so coverage
    ends exactly at n, keeping every sampled sequence the same shape.
    """
    if n < 1:
        raise ValueError("length must be >= 1")
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    gen = rng.gen
    segments = []
    start = 1
    while start <= n:
        length = int(gen.integers(1, max_len + 1))
        segments.append(Segment(start, min(start + length - 1, n)))
        start += length
    return TemporalPartition(tuple(segments), n)


def sample_partition(spec: PriorSpec, rng: RngStream) -> TemporalPartition:
    """Sample (or construct) a partition according to the prior spec."""
    if spec.kind == "regular":
        return regular_partition(spec.n, spec.period)
    if spec.kind == "uniform":
        return sample_uniform_partition(spec.n, spec.max_len, rng)
    if spec.kind == "ptw":
        return sample_ptw_partition(spec.depth, rng)
    return sample_lin_partition(spec.n, rng)


def attach_biases(
    partition: TemporalPartition, alpha: float, beta: float, rng: RngStream
) -> PiecewiseSource:
    """Attach one independent Beta(alpha, beta) bias to every segment.

    Beta draws use the Gamma-ratio construction theta = Ga/(Ga+Gb) with
    Ga ~ Gamma(alpha), Gb ~ Gamma(beta) (numpy standard_gamma under the
    stream's Philox generator, two draws per segment). Draws that land exactly
    on 0 or 1 through underflow are rejected and resampled.
    """
    if alpha <= 0 or beta <= 0:
        raise ValueError("alpha and beta must be positive")
    gen = rng.gen
    biases = []
    for _ in partition.segments:
        while True:
            ga = gen.standard_gamma(alpha)
            gb = gen.standard_gamma(beta)
            total = ga + gb
            if total > 0.0:
                theta = ga / total
                if 0.0 < theta < 1.0:
                    biases.append(theta)
                    break
    return PiecewiseSource(partition, tuple(biases))


def sample_source(
    spec: PriorSpec, rng: RngStream, alpha: float = 0.5, beta: float = 0.5
) -> PiecewiseSource:
    """Sample a full piecewise source: partition first, then per-segment biases."""
    partition = sample_partition(spec, rng)
    return attach_biases(partition, alpha, beta, rng)


def sample_sequence(source: PiecewiseSource, rng: RngStream) -> BinarySequence:
    """Draw x_t ~ Bernoulli(theta_i) for t in segment i, segments in time order."""
    gen = rng.gen
    out = np.empty(source.n, dtype=np.uint8)
    for seg, theta in zip(source.partition.segments, source.biases):
        draws = gen.random(seg.length) < theta
        out[seg.a - 1 : seg.b] = draws
    return BinarySequence(out)


_CSV_FIELDS = ("seq_id", "n", "symbols", "num_segments", "segment_ends", "biases")


def write_sequences_csv(
    fh: IO[str],
    rows: Iterable[tuple[int, PiecewiseSource, BinarySequence]],
    header_comments: Sequence[str] = (),
) -> None:
    """Dump (seq_id, source, sequence) triples in the interchange CSV layout.

    Columns: seq_id, n, symbols (contiguous 0/1 text), num_segments,
    segment_ends (semicolon list), biases (semicolon list).
    """
    for line in header_comments:
        fh.write(f"# {line}\n")
    writer = csv.writer(fh)
    writer.writerow(_CSV_FIELDS)
    for seq_id, source, seq in rows:
        ends = ";".join(str(s.b) for s in source.partition.segments)
        biases = ";".join(repr(b) for b in source.biases)
        writer.writerow(
            [seq_id, len(seq), seq.to01(), len(source.partition.segments), ends, biases]
        )


def read_sequences_csv(fh: IO[str]) -> list[tuple[int, PiecewiseSource, BinarySequence]]:
    """Inverse of :func:`write_sequences_csv`; skips '#' comment lines."""
    rows = []
    reader = csv.reader(line for line in fh if not line.startswith("#"))
    header = next(reader, None)
    if header is not None and tuple(header) != _CSV_FIELDS:
        raise ValueError(f"unexpected header {header!r}")
    for rec in reader:
        if not rec:
            continue
        seq_id, n, symbols, _, ends, biases = rec
        partition = TemporalPartition.from_ends([int(e) for e in ends.split(";")])
        source = PiecewiseSource(partition, tuple(float(b) for b in biases.split(";")))
        seq = BinarySequence.from_string(symbols)
        if len(seq) != int(n) or partition.n != int(n):
            raise ValueError(f"inconsistent lengths in row for seq_id={seq_id}")
        rows.append((int(seq_id), source, seq))
    return rows
