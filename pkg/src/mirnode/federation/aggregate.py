"""Sample-weighted federated averaging."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import DimensionMismatch, EmptyRound, ZeroTotalSamples


@dataclass(frozen=True)
class RoundResult:
    participant: str
    params: tuple[float, ...]
    sample_count: int
    metrics: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "params", tuple(float(v) for v in self.params))
        if self.sample_count < 0:
            raise ValueError("sample_count must be >= 0")


def aggregate_round(results: list[RoundResult]) -> list[float]:
    """w = sum_k n_k * w_k / sum_k n_k."""
    if not results:
        raise EmptyRound("no results to aggregate")
    dim = len(results[0].params)
    for r in results:
        if len(r.params) != dim:
            raise DimensionMismatch(
                f"{r.participant}: {len(r.params)} != {dim}")
    total = sum(r.sample_count for r in results)
    if total == 0:
        raise ZeroTotalSamples("all sample counts are zero")
    return [
        math.fsum(r.sample_count * r.params[j] for r in results) / total
        for j in range(dim)
    ]
