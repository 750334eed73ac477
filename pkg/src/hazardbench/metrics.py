"""Concordance index, product-limit curves and boxplot summaries."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class UndefinedConcordanceError(ValueError):
    """Raised when no pair of subjects is comparable."""


@dataclass(frozen=True)
class ConcordanceResult:
    index: float
    n_pairs: int
    score_sum: float

    def __float__(self) -> float:
        return self.index


@dataclass(frozen=True, eq=False)
class StepFunction:
    """Right-continuous piecewise-constant function of time.

    ``f(t) = value_before_first_knot`` for ``t < knots[0]`` and
    ``f(t) = values[k]`` for ``knots[k] <= t < knots[k + 1]``.
    """

    knots: np.ndarray
    values: np.ndarray
    value_before_first_knot: float = 0.0

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=np.float64).ravel()
        values = np.asarray(self.values, dtype=np.float64).ravel()
        if knots.shape != values.shape:
            raise ValueError("knots and values must have the same length")
        if knots.size > 1 and not np.all(np.diff(knots) > 0):
            raise ValueError("knots must be strictly increasing")
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "value_before_first_knot", float(self.value_before_first_knot))

    def __call__(self, t):
        t = np.asarray(t, dtype=np.float64)
        pos = np.searchsorted(self.knots, t, side="right") - 1
        padded = np.concatenate(([self.value_before_first_knot], self.values))
        out = padded[pos + 1]
        return float(out) if out.ndim == 0 else out

    def __eq__(self, other):
        if not isinstance(other, StepFunction):
            return NotImplemented
        return (np.array_equal(self.knots, other.knots)
                and np.array_equal(self.values, other.values)
                and self.value_before_first_knot == other.value_before_first_knot)

    def area(self, upper: float, lower: float = 0.0) -> float:
        """Integral of the function over ``[lower, upper]``."""
        if upper <= lower:
            return 0.0
        edges = np.concatenate(([lower], self.knots[(self.knots > lower) & (self.knots < upper)], [upper]))
        return float(np.sum(self(edges[:-1]) * np.diff(edges)))

    def to_json(self) -> dict:
        return {"knots": self.knots.tolist(), "values": self.values.tolist(),
                "value_before_first_knot": self.value_before_first_knot}

    @classmethod
    def from_json(cls, d: dict) -> StepFunction:
        return cls(np.array(d["knots"], dtype=np.float64), np.array(d["values"], dtype=np.float64),
                   d["value_before_first_knot"])


def _check_inputs(times, events):
    times = np.asarray(times, dtype=np.float64).ravel()
    events = np.asarray(events, dtype=bool).ravel()
    if times.shape != events.shape:
        raise ValueError("times and events must have the same length")
    return times, events


def _pair_masks(times, events):
    n = times.shape[0]
    iu, ju = np.triu_indices(n, k=1)
    ti, tj = times[iu], times[ju]
    ei, ej = events[iu], events[ju]
    differ = ti != tj
    earlier_event = np.where(ti < tj, ei, ej)
    eligible = np.where(differ, earlier_event, ei | ej)
    return iu, ju, differ, eligible


def eligible_pairs(times, events) -> list[tuple[int, int]]:
    """Pairs ``(i, j)``, ``i < j``, that can be ordered.

    Pairs with distinct times need the earlier one to be an event; pairs
    with tied times need at least one event.
    """
    times, events = _check_inputs(times, events)
    if times.size == 0:
        raise ValueError("empty input")
    iu, ju, _, eligible = _pair_masks(times, events)
    return list(zip(iu[eligible].tolist(), ju[eligible].tolist()))


def concordance_index(times, events, risks) -> ConcordanceResult:
    """Harrell's concordance between observed times and predicted risks.

    Higher risk should mean earlier failure.  Scores per eligible pair:

    * distinct times: 1 if the earlier subject has the strictly higher risk,
      0.5 if risks are equal, else 0;
    * tied times, both events: 1 if risks are equal, else 0.5;
    * tied times, one event: 1 if the event subject has the strictly higher
      risk, else 0.5.

    Risks are compared with exact equality.  Pair scores are multiples of
    one half, so the sum is accumulated as integer counts and is exact.
    """
    times, events = _check_inputs(times, events)
    risks = np.asarray(risks, dtype=np.float64).ravel()
    if risks.shape != times.shape:
        raise ValueError("risks must have the same length as times")
    if not np.all(np.isfinite(risks)):
        raise ValueError("risks must be finite")
    iu, ju, differ, eligible = _pair_masks(times, events)
    iu, ju, differ = iu[eligible], ju[eligible], differ[eligible]
    n_pairs = int(iu.size)
    if n_pairs == 0:
        raise UndefinedConcordanceError("no eligible pairs; concordance is undefined")

    ti, tj = times[iu], times[ju]
    ri, rj = risks[iu], risks[ju]
    ei, ej = events[iu], events[ju]
    risk_tie = ri == rj

    # distinct times
    r_early = np.where(ti < tj, ri, rj)
    r_late = np.where(ti < tj, rj, ri)
    d_one = differ & (r_early > r_late)
    d_half = differ & risk_tie

    same = ~differ
    both = same & ei & ej
    b_one = both & risk_tie
    b_half = both & ~risk_tie

    single = same & (ei ^ ej)
    r_ev = np.where(ei, ri, rj)
    r_cens = np.where(ei, rj, ri)
    s_one = single & (r_ev > r_cens)
    s_half = single & ~(r_ev > r_cens)

    ones = int(d_one.sum() + b_one.sum() + s_one.sum())
    halves = int(d_half.sum() + b_half.sum() + s_half.sum())
    score_sum = ones + 0.5 * halves
    return ConcordanceResult(score_sum / n_pairs, n_pairs, score_sum)


def _event_table(times, events):
    order = np.argsort(times, kind="stable")
    t = times[order]
    e = events[order]
    uniq, first = np.unique(t, return_index=True)
    n = t.shape[0]
    at_risk = n - first
    deaths = np.add.reduceat(e.astype(np.int64), first) if n else np.zeros(0, np.int64)
    return uniq, at_risk, deaths


def kaplan_meier(times, events) -> StepFunction:
    """Product-limit estimate of the survival function."""
    times, events = _check_inputs(times, events)
    if times.size == 0:
        raise ValueError("empty input")
    uniq, at_risk, deaths = _event_table(times, events)
    has = deaths > 0
    surv = np.cumprod(1.0 - deaths[has] / at_risk[has])
    return StepFunction(uniq[has], surv, 1.0)


def nelson_aalen(times, events) -> StepFunction:
    """Nelson-Aalen estimate of the cumulative hazard."""
    times, events = _check_inputs(times, events)
    if times.size == 0:
        raise ValueError("empty input")
    uniq, at_risk, deaths = _event_table(times, events)
    has = deaths > 0
    return StepFunction(uniq[has], np.cumsum(deaths[has] / at_risk[has]), 0.0)


@dataclass(frozen=True)
class BoxplotStats:
    min: float
    q1: float
    median: float
    q3: float
    max: float
    mean: float

    def to_json(self) -> dict:
        return {"min": self.min, "q1": self.q1, "median": self.median,
                "q3": self.q3, "max": self.max, "mean": self.mean}


def boxplot_stats(values) -> BoxplotStats:
    """Five-number summary plus mean.

    Quartiles use linear interpolation between order statistics
    (Hyndman-Fan type 7, numpy's default ``"linear"`` method).
    """
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise ValueError("boxplot_stats needs at least one value")
    q1, med, q3 = np.quantile(v, [0.25, 0.5, 0.75], method="linear")
    return BoxplotStats(float(v.min()), float(q1), float(med), float(q3), float(v.max()),
                        float(np.mean(v)))
