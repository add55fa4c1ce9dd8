"""Running tallies and the estimates built from them.

A tally keeps (n, clicked, sum, sum of squares) so partial results from
independent substreams merge by addition.
"""

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np
from frozendict import frozendict
from toolz import merge_with

from framework.common import fold_ordered


@dataclass(frozen=True)
class CorrelationEstimate:
    mean: float
    std_error: float
    n_total: int
    n_clicked: int
    total: float = math.nan

    def __post_init__(self) -> None:
        assert 0 <= self.n_clicked <= self.n_total
        assert self.std_error >= 0.0

    @property
    def click_fraction(self) -> float:
        return self.n_clicked / self.n_total if self.n_total else 0.0

    @property
    def clicked_mean(self) -> float:
        """Plain mean over clicked samples only (the postselected average)."""
        return self.total / self.n_clicked if self.n_clicked else math.nan

    def within(self, expected: float, sigmas: float = 3.0, floor: float = 1e-12) -> bool:
        return abs(self.mean - expected) <= sigmas * self.std_error + floor


@dataclass(frozen=True)
class Tally:
    n: int = 0
    clicked: int = 0
    total: float = 0.0
    total_sq: float = 0.0

    @classmethod
    def of(cls, values: np.ndarray, clicked: np.ndarray | None = None) -> "Tally":
        # entries outside `clicked` are zero and add nothing to either sum
        kept = values if clicked is None else values[clicked]

        return cls(
            len(values),
            len(kept),
            float(np.sum(kept)),
            float(np.sum(kept * kept)),
        )

    def merge(self, other: "Tally") -> "Tally":
        return Tally(
            self.n + other.n,
            self.clicked + other.clicked,
            self.total + other.total,
            self.total_sq + other.total_sq,
        )

    @property
    def mean(self) -> float:
        return self.total / self.n if self.n else 0.0

    @property
    def variance(self) -> float:
        if self.n < 2:
            return 0.0

        mean = self.mean

        return max(self.total_sq / self.n - mean * mean, 0.0) * self.n / (self.n - 1)

    def to_estimate(self, scale: float = 1.0) -> CorrelationEstimate:
        total = self.total * scale

        # the same two quotients as click_fraction * clicked_mean, so that product is exact
        mean = (self.clicked / self.n) * (total / self.clicked) if self.clicked else 0.0

        return CorrelationEstimate(
            mean,
            math.sqrt(self.variance / self.n) * abs(scale) if self.n else 0.0,
            self.n,
            self.clicked,
            total,
        )


type Strata = frozendict[int, Tally]


def merge_strata(left: Strata, right: Strata) -> Strata:
    return frozendict(merge_with(lambda tallies: fold_ordered(Tally.merge, tallies), left, right))


def combine_strata(strata: Mapping[int, Tally], weights: Mapping[int, float]) -> CorrelationEstimate:
    """Weighted sum of stratum means, variance combined per stratum."""
    keys: Sequence[int] = sorted(strata)

    mean = math.fsum(weights[key] * strata[key].mean for key in keys)
    variance = math.fsum(
        weights[key] ** 2 * strata[key].variance / strata[key].n for key in keys if strata[key].n
    )

    return CorrelationEstimate(
        mean,
        math.sqrt(variance),
        sum(strata[key].n for key in keys),
        sum(strata[key].clicked for key in keys),
        math.fsum(strata[key].total for key in keys),
    )
