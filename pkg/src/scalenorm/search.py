"""Greedy coordinate-descent search for the best scale range.

The search starts from the widest configured range and alternates between the
two bounds: it sweeps candidate lower bounds at or above the current one
(keeping the AP argmax, ties to the smaller bound), then candidate upper
bounds at or below the current one (ties to the larger bound), until a full
alternation changes nothing. Bounds only move inward, so a candidate rejected
while narrowing is never re-probed against a tighter opposite bound, and
every (lower, upper) pair is evaluated at most once.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .evaluation import EvalResult
from .geometry import ScaleRange

DEFAULT_LOWER_CANDIDATES = (0.0, 16.0, 32.0)
DEFAULT_UPPER_CANDIDATES = (320.0, 496.0, 560.0, 640.0)


class SearchAborted(RuntimeError):
    """Oracle failed on a probed range; carries the trace gathered so far."""

    def __init__(self, message: str, trace: list[tuple[ScaleRange, float]]):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class SearchSpace:
    lower_candidates: tuple[float, ...] = DEFAULT_LOWER_CANDIDATES
    upper_candidates: tuple[float, ...] = DEFAULT_UPPER_CANDIDATES
    initial: ScaleRange = ScaleRange(0.0, 640.0)

    def __post_init__(self) -> None:
        lows, highs = self.lower_candidates, self.upper_candidates
        if list(lows) != sorted(lows) or list(highs) != sorted(highs):
            raise ValueError("candidate lists must be sorted ascending")
        if self.initial.lower not in lows or self.initial.upper not in highs:
            raise ValueError("initial bounds must appear in the candidate lists")


class ApOracle:
    """Memoizing range -> metrics oracle around a callback or lookup table."""

    def __init__(self, fn: Callable[[ScaleRange], EvalResult]):
        self._fn = fn
        self._cache: dict[tuple[float, float], EvalResult] = {}
        self.calls = 0

    @classmethod
    def from_table(cls, table: dict[tuple[float, float], EvalResult]) -> "ApOracle":
        entries = dict(table)

        def lookup(rng: ScaleRange) -> EvalResult:
            key = (rng.lower, rng.upper)
            if key not in entries:
                raise KeyError(f"no metrics for range [{key[0]}, {key[1]}]")
            return entries[key]

        return cls(lookup)

    def query(self, rng: ScaleRange) -> EvalResult:
        key = (rng.lower, rng.upper)
        if key not in self._cache:
            self.calls += 1
            self._cache[key] = self._fn(rng)
        return self._cache[key]


def greedy_range_search(
    space: SearchSpace, oracle: ApOracle
) -> tuple[ScaleRange, list[tuple[ScaleRange, float]]]:
    """Run the alternating descent; returns (best range, probe trace).

    The trace lists every distinct range probed, in first-probe order, with
    its AP. Oracle failures raise SearchAborted with the partial trace.
    """
    probed: dict[tuple[float, float], float] = {}
    trace: list[tuple[ScaleRange, float]] = []

    def probe(lower: float, upper: float) -> float:
        key = (lower, upper)
        if key not in probed:
            rng = ScaleRange(lower, upper)
            try:
                result = oracle.query(rng)
            except Exception as exc:
                raise SearchAborted(
                    f"oracle failed on range [{lower}, {upper}]: {exc}", trace
                ) from exc
            probed[key] = result.ap
            trace.append((rng, result.ap))
        return probed[key]

    lower, upper = space.initial.lower, space.initial.upper
    while True:
        start = (lower, upper)
        # Lower-bound sweep, ascending; strict improvement keeps the smaller bound on ties.
        best_ap = None
        for cand in space.lower_candidates:
            if cand < lower or cand >= upper:
                continue
            ap = probe(cand, upper)
            if best_ap is None or ap > best_ap:
                best_ap, lower = ap, cand
        # Upper-bound sweep, descending; strict improvement keeps the larger bound on ties.
        best_ap = None
        for cand in reversed(space.upper_candidates):
            if cand > upper or cand <= lower:
                continue
            ap = probe(lower, cand)
            if best_ap is None or ap > best_ap:
                best_ap, upper = ap, cand
        if (lower, upper) == start:
            return ScaleRange(lower, upper), trace
