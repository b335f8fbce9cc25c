"""Shared domain types, log-domain numerics, and the deterministic RNG contract.

All probabilities inside this package live in natural-log space (marginals of
long sequences underflow doubles); reporting converts to bits. Time indices in
public APIs are 1-based; any 0-based storage is an implementation detail.

Randomness: every stream is a Philox-4x64 counter-based generator keyed by the
pair ``(root_seed, stream_id)``. Identical pairs reproduce byte-identical
streams on every platform; distinct stream ids are independent by construction,
so each unit of parallel work owns its own stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

__all__ = [
    "LogProb",
    "LOG_HALF",
    "NEG_INF",
    "logspace_add",
    "logspace_sum",
    "nats_to_bits",
    "BinarySequence",
    "Segment",
    "TemporalPartition",
    "RngStream",
    "split_stream",
]

# Natural-log probability in [-inf, 0]; -inf encodes probability zero.
LogProb = float

LOG_HALF = math.log(0.5)
NEG_INF = float("-inf")

_MASK64 = (1 << 64) - 1


def logspace_add(a: LogProb, b: LogProb) -> LogProb:
    """ln(e^a + e^b) without leaving log space.

    Commutative, handles -inf as the identity element, and never overflows
    for finite operands.
    """
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    if a < b:
        a, b = b, a
    return a + math.log1p(math.exp(b - a))


def logspace_sum(values: Sequence[float] | np.ndarray) -> LogProb:
    """ln(sum(exp(values))) for a 1-d collection, max-shifted for stability."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return NEG_INF
    m = float(arr.max())
    if m == NEG_INF:
        return NEG_INF
    return m + math.log(float(np.exp(arr - m).sum()))


def nats_to_bits(x: float) -> float:
    """Convert a log quantity from nats to bits."""
    return x / math.log(2.0)


class BinarySequence:
    """Immutable string of 0/1 symbols, indexed 1-based like x_1..x_n."""

    __slots__ = ("_symbols",)

    def __init__(self, symbols: Iterable[int]):
        arr = np.asarray(
            list(symbols) if not isinstance(symbols, np.ndarray) else symbols,
            dtype=np.int64,
        )
        if arr.ndim != 1:
            raise ValueError("symbols must form a 1-d sequence")
        if arr.size and not np.isin(arr, (0, 1)).all():
            raise ValueError("every symbol must be 0 or 1")
        out = arr.astype(np.uint8)
        out.setflags(write=False)
        self._symbols = out

    @classmethod
    def from_string(cls, text: str) -> "BinarySequence":
        """Parse a contiguous 0/1 string such as "0011"."""
        if any(ch not in "01" for ch in text):
            raise ValueError("text must contain only '0' and '1'")
        return cls([1 if ch == "1" else 0 for ch in text])

    def __len__(self) -> int:
        return int(self._symbols.size)

    def symbol(self, t: int) -> int:
        """Symbol x_t for 1 <= t <= n."""
        if not 1 <= t <= len(self):
            raise IndexError(f"time index {t} outside 1..{len(self)}")
        return int(self._symbols[t - 1])

    def __iter__(self) -> Iterator[int]:
        return iter(int(s) for s in self._symbols)

    def as_array(self) -> np.ndarray:
        """Read-only uint8 view of the symbols in time order (0-based storage)."""
        return self._symbols

    def to01(self) -> str:
        return "".join("1" if s else "0" for s in self._symbols)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BinarySequence):
            return NotImplemented
        return bool(np.array_equal(self._symbols, other._symbols))

    def __hash__(self) -> int:
        return hash(self._symbols.tobytes())

    def __repr__(self) -> str:
        body = self.to01() if len(self) <= 32 else self.to01()[:29] + "..."
        return f"BinarySequence({body!r})"


@dataclass(frozen=True, order=True)
class Segment:
    """Inclusive 1-based time interval [a, b]."""

    a: int
    b: int

    def __post_init__(self):
        if self.a < 1:
            raise ValueError(f"segment start must be >= 1, got {self.a}")
        if self.b < self.a:
            raise ValueError(f"segment end {self.b} precedes start {self.a}")

    @property
    def length(self) -> int:
        return self.b - self.a + 1

    def contains(self, t: int) -> bool:
        return self.a <= t <= self.b


@dataclass(frozen=True)
class TemporalPartition:
    """Ordered, gap-free, non-overlapping cover of 1..n by segments."""

    segments: tuple[Segment, ...]
    n: int

    def __post_init__(self):
        segments = tuple(self.segments)
        object.__setattr__(self, "segments", segments)
        if self.n < 1:
            raise ValueError("partition length must be >= 1")
        if not segments:
            raise ValueError("partition needs at least one segment")
        if segments[0].a != 1:
            raise ValueError("first segment must start at 1")
        for prev, cur in zip(segments, segments[1:]):
            if cur.a != prev.b + 1:
                raise ValueError(
                    f"segments must be contiguous: ({prev.a},{prev.b}) then ({cur.a},{cur.b})"
                )
        if segments[-1].b != self.n:
            raise ValueError(
                f"last segment ends at {segments[-1].b}, expected n = {self.n}"
            )

    @classmethod
    def from_ends(cls, ends: Sequence[int]) -> "TemporalPartition":
        """Build a partition from the sorted segment end indices (last one = n)."""
        if not ends:
            raise ValueError("need at least one segment end")
        segments = []
        start = 1
        for end in ends:
            segments.append(Segment(start, end))
            start = end + 1
        return cls(tuple(segments), ends[-1])

    @property
    def num_switches(self) -> int:
        return len(self.segments) - 1

    def boundaries(self) -> tuple[int, ...]:
        """Switch locations: t such that a segment ends at t and another starts at t+1."""
        return tuple(s.b for s in self.segments[:-1])

    def segment_index_at(self, t: int) -> int:
        """0-based index of the segment containing time t (bisection on starts)."""
        if not 1 <= t <= self.n:
            raise IndexError(f"time index {t} outside 1..{self.n}")
        lo, hi = 0, len(self.segments) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if self.segments[mid].a <= t:
                lo = mid
            else:
                hi = mid - 1
        return lo


@dataclass
class RngStream:
    """A consumable random stream, fully determined by (root_seed, stream_id).

    The underlying generator is Philox-4x64 with key ``[root_seed, stream_id]``
    (both reduced mod 2^64). The generator is created lazily and then consumed
    sequentially, so a fixed call sequence against a fresh stream is exactly
    reproducible.
    """

    root_seed: int
    stream_id: int
    _gen: np.random.Generator | None = field(default=None, repr=False, compare=False)

    @property
    def gen(self) -> np.random.Generator:
        if self._gen is None:
            key = np.array(
                [self.root_seed & _MASK64, self.stream_id & _MASK64], dtype=np.uint64
            )
            self._gen = np.random.Generator(np.random.Philox(key=key))
        return self._gen

    def bytes(self, nbytes: int) -> bytes:
        return self.gen.bytes(nbytes)


def split_stream(root_seed: int, stream_id: int) -> RngStream:
    """Derive the independent stream identified by (root_seed, stream_id)."""
    return RngStream(root_seed, stream_id)
