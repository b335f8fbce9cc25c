"""Switching-point statistics of the dyadic-halving prior, analytic and empirical.

The number of switches k under the depth-d halving prior follows the
recursion

    P_0[k] = delta(k, 0)
    P_d[k] = 1/2 delta(k, 0) + 1/2 sum_{l=1..k} P_{d-1}[k-l] P_{d-1}[l-1]

(a split contributes the switches of both halves plus one). For k < d the pmf
equals its depth limit C(k) 2^(-2k-1), where C(k) are the Catalan numbers, and
the expected switch count is exactly d/2 at split probability 1/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .core import TemporalPartition

__all__ = [
    "SwitchCountPmf",
    "ptw_switch_count_pmf",
    "ptw_switch_count_pmf_limit",
    "expected_switches",
    "switch_location_probability",
    "empirical_switch_stats",
]


@dataclass(frozen=True)
class SwitchCountPmf:
    """Probabilities of k = 0..k_max switching-points; depth None means the limit.

    The entries sum to at most 1, with any deficiency caused purely by the
    k_max truncation.
    """

    depth: int | None
    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def k_max(self) -> int:
        return self.probs.size - 1

    def __getitem__(self, k: int) -> float:
        return float(self.probs[k])

    def mean(self) -> float:
        return float(np.arange(self.probs.size) @ self.probs)


def ptw_switch_count_pmf(d: int, k_max: int) -> SwitchCountPmf:
    """Switch-count pmf of the depth-d halving prior, truncated at k_max.

    Runs the halving recursion d times via self-convolution; O(d * k_max^2).
    """
    if d < 0:
        raise ValueError("depth must be >= 0")
    if k_max < 0:
        raise ValueError("k_max must be >= 0")
    probs = np.zeros(k_max + 1)
    probs[0] = 1.0
    for _ in range(d):
        conv = np.convolve(probs, probs)[: k_max + 1]
        nxt = np.zeros(k_max + 1)
        nxt[0] = 0.5
        nxt[1:] = 0.5 * conv[:-1]  # (P*P)[k-1]: one switch joins the two halves
        probs = nxt
    return SwitchCountPmf(d, probs)


def ptw_switch_count_pmf_limit(k: int) -> float:
    """Depth limit of the switch-count pmf: Catalan(k) * 2^(-2k-1)."""
    if k < 0:
        raise ValueError("k must be >= 0")
    catalan = math.comb(2 * k, k) // (k + 1)
    return float(Fraction(catalan, 1 << (2 * k + 1)))


def expected_switches(d: int, p: float = 0.5) -> float:
    """Expected switch count at depth d when each interval splits with probability p.

    Exactly d/2 at p = 1/2, and p (1 - (2p)^d) / (1 - 2p) otherwise.
    """
    if d < 0:
        raise ValueError("depth must be >= 0")
    if not 0.0 < p < 1.0:
        raise ValueError("split probability must lie in (0, 1)")
    if p == 0.5:
        return d / 2.0
    return p * (1.0 - (2.0 * p) ** d) / (1.0 - 2.0 * p)


def switch_location_probability(d: int, t: int) -> float:
    """Probability that a boundary separates t and t+1 under the depth-d prior.

    Equal to 2^(-j) where j is the number of halvings needed to expose the
    boundary: 1/2 at the midpoint, 1/4 at the quarters, down to 2^(-d) at odd
    t. Requires 1 <= t < 2^d.
    """
    if d < 1:
        raise ValueError("depth must be >= 1 for any interior boundary")
    if not 1 <= t < (1 << d):
        raise ValueError(f"boundary index {t} outside 1..{(1 << d) - 1}")
    tz = (t & -t).bit_length() - 1
    return 2.0 ** -(d - tz)


def empirical_switch_stats(
    partitions: Sequence[TemporalPartition],
) -> tuple[np.ndarray, np.ndarray]:
    """Empirical switch statistics over partitions of a common length.

    Returns ``(count_pmf, location_freq)``: ``count_pmf[k]`` is the fraction
    of partitions with exactly k switches (length = max observed k + 1), and
    ``location_freq[t-1]`` the fraction having a boundary between t and t+1,
    for t = 1..n-1.
    """
    if not partitions:
        raise ValueError("need at least one partition")
    n = partitions[0].n
    counts: dict[int, int] = {}
    loc = np.zeros(max(n - 1, 0))
    for part in partitions:
        if part.n != n:
            raise ValueError("partitions must share a common length")
        k = part.num_switches
        counts[k] = counts.get(k, 0) + 1
        for b in part.boundaries():
            loc[b - 1] += 1
    count_pmf = np.zeros(max(counts) + 1)
    for k, c in counts.items():
        count_pmf[k] = c / len(partitions)
    return count_pmf, loc / len(partitions)
