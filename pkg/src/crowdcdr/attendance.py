"""Attendance estimation with censoring corrections.

Raw daily handset counts are turned into attendance estimates through
four multiplicative adjustments:

(i)   national phone prevalence,
(ii)  the operator's state-specific market share (applied per state,
      before summation: using an average share instead can put a state
      off by more than a factor of 2),
(iii) the probability that a present person uses their phone on a given
      day (daily estimates only), and
(iv)  the probability that a person never uses their phone during the
      entire stay, calibrated against external daily projections.

Two sensitivity conventions around (iv) are provided and both are
emitted, because they disagree: ``sensitivity_curve`` evaluates the
reciprocal form f(q) = c/q used by the reference sensitivity figure,
while ``nonuse_adjusted_totals`` applies the model-consistent
1/(1 - q) correction to a base cumulative count. Neither is silently
preferred.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import ConfigurationError, EstimationError
from .ingest import DailyObservation, StateProfile

log = logging.getLogger(__name__)

# Documented defaults: 71.3% wireless prevalence (India, 2013), 40.4%
# daily use, 40.6% non-use. See crowdcdr.reference for provenance notes.
DEFAULT_PREVALENCE = 0.713
DEFAULT_DAILY_USE = 0.404
DEFAULT_NON_USE = 0.406

#: Numerator of the reference reciprocal sensitivity curve f(q) = c/q.
SENSITIVITY_NUMERATOR = 24_467_257


@dataclass(frozen=True)
class AdjustmentFactors:
    prevalence: float = DEFAULT_PREVALENCE
    daily_use: float = DEFAULT_DAILY_USE
    non_use: float = DEFAULT_NON_USE

    def __post_init__(self):
        for name in ("prevalence", "daily_use", "non_use"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ConfigurationError(f"{name} must be in (0, 1), got {v}")


@dataclass
class AttendanceSeries:
    """Assembled attendance tables for one analysis run."""

    daily: dict[int, float]
    cumulative: dict[int, float]
    by_state_daily: dict[tuple[int, int], float]
    by_state_cumulative: dict[tuple[int, int], float]
    representation: dict[int, float]
    daily_use_estimate: float | None = None
    non_use_estimate: float | None = None
    factors: AdjustmentFactors = field(default_factory=AdjustmentFactors)


def estimate_daily_use(stays: Iterable[tuple[int, int]]) -> float:
    """Pooled daily-use probability from (days_active, stay_length) pairs.

    Total days the phone was used across all customers divided by the
    total length of stay across all customers, where a stay runs from the
    first to the last active day inclusive.
    """
    active_total = 0
    stay_total = 0
    for days_active, stay_length in stays:
        if not 1 <= days_active <= stay_length:
            raise EstimationError(
                f"invalid stay pair ({days_active}, {stay_length})"
            )
        active_total += days_active
        stay_total += stay_length
    if stay_total == 0:
        raise EstimationError("no stays to estimate daily use from")
    return active_total / stay_total


def stays_from_observations(
    observations: Iterable[DailyObservation],
) -> list[tuple[int, int]]:
    """Per-person (days_active, stay_length) pairs.

    Stay length is last minus first active day plus one; a person seen
    on multiple visits is treated as one stay.
    """
    per_person: dict[int, tuple[int, int, int]] = {}
    for obs in observations:
        prev = per_person.get(obs.person_id)
        if prev is None:
            per_person[obs.person_id] = (1, obs.day, obs.day)
        else:
            n, first, last = prev
            per_person[obs.person_id] = (
                n + 1, min(first, obs.day), max(last, obs.day)
            )
    return [
        (n, last - first + 1) for n, first, last in per_person.values()
    ]


def _share(profiles: Mapping[int, StateProfile], state: int) -> float:
    try:
        return profiles[state].market_share
    except KeyError:
        raise ConfigurationError(f"no market share for state {state}") from None


def daily_attendance_by_state(
    counts: Mapping[tuple[int, int], int],
    profiles: Mapping[int, StateProfile],
    factors: AdjustmentFactors,
) -> dict[tuple[int, int], float]:
    """Per (state, day) daily estimate: count / share / (i) / (iii) / (1 - (iv))."""
    divisor = factors.prevalence * factors.daily_use * (1.0 - factors.non_use)
    out: dict[tuple[int, int], float] = {}
    for (state, day) in sorted(counts):
        out[(state, day)] = counts[(state, day)] / _share(profiles, state) / divisor
    return out


def daily_attendance(
    counts: Mapping[tuple[int, int], int],
    profiles: Mapping[int, StateProfile],
    factors: AdjustmentFactors,
) -> dict[int, float]:
    """Daily attendance estimate per day, summed over states.

    State-specific market shares are applied before summation; the sum
    runs in (state, day) order so results are bit-stable.
    """
    by_state = daily_attendance_by_state(counts, profiles, factors)
    out: dict[int, float] = defaultdict(float)
    for (state, day) in sorted(by_state):
        out[day] += by_state[(state, day)]
    return dict(out)


def first_day_counts(
    observations: Iterable[DailyObservation],
) -> dict[tuple[int, int], int]:
    """Number of persons whose first observation falls on each (state, day)."""
    first: dict[int, tuple[int, int]] = {}
    for obs in observations:
        prev = first.get(obs.person_id)
        if prev is None or obs.day < prev[1]:
            first[obs.person_id] = (obs.state_code, obs.day)
    counts: dict[tuple[int, int], int] = defaultdict(int)
    for state, day in first.values():
        counts[(state, day)] += 1
    return dict(counts)


def cumulative_attendance_by_state(
    new_by_state_day: Mapping[tuple[int, int], int],
    profiles: Mapping[int, StateProfile],
    factors: AdjustmentFactors,
    *,
    total_days: int,
) -> dict[tuple[int, int], float]:
    """Cumulative estimate per (state, day), extrapolated by (i), (ii), (iv) only.

    Daily-use does not apply: a person is in the cumulative count from
    their first observed day onward regardless of how often they use the
    phone afterwards.
    """
    divisor = factors.prevalence * (1.0 - factors.non_use)
    states = sorted({s for s, _ in new_by_state_day})
    out: dict[tuple[int, int], float] = {}
    for state in states:
        share = _share(profiles, state)
        running = 0
        for day in range(1, total_days + 1):
            running += new_by_state_day.get((state, day), 0)
            out[(state, day)] = running / share / divisor
    return out


def cumulative_attendance(
    observations: Iterable[DailyObservation],
    profiles: Mapping[int, StateProfile],
    factors: AdjustmentFactors,
    *,
    total_days: int,
) -> dict[int, float]:
    """Cumulative attendance per day (nondecreasing), summed over states."""
    by_state = cumulative_attendance_by_state(
        first_day_counts(observations), profiles, factors, total_days=total_days
    )
    out: dict[int, float] = {day: 0.0 for day in range(1, total_days + 1)}
    for (state, day) in sorted(by_state):
        out[day] += by_state[(state, day)]
    return out


def uncorrected_daily(
    counts: Mapping[tuple[int, int], int],
    profiles: Mapping[int, StateProfile],
    *,
    prevalence: float,
    daily_use: float,
) -> dict[int, float]:
    """Daily estimates with non_use = 0, the input calibrate_non_use expects."""
    out: dict[int, float] = defaultdict(float)
    divisor = prevalence * daily_use
    for (state, day) in sorted(counts):
        out[day] += counts[(state, day)] / _share(profiles, state) / divisor
    return dict(out)


def calibrate_non_use(
    base_daily: Mapping[int, float],
    projections: Mapping[int, float],
    *,
    clamp: float = 0.95,
) -> float:
    """Non-use fraction most consistent with external daily projections.

    ``base_daily`` must be computed with non_use = 0. Least squares on
    levels has the closed form s = sum(base*proj) / sum(base^2) for the
    inflation s = 1/(1-q), hence q = 1 - 1/s, clamped to [0, clamp].
    Projections at or below the raw estimates give q <= 0; that returns 0
    with a warning rather than a negative non-use fraction.
    """
    days = sorted(set(base_daily) & set(projections))
    if not days:
        raise EstimationError("no projection day overlaps the base estimates")
    num = sum(base_daily[d] * projections[d] for d in days)
    den = sum(base_daily[d] ** 2 for d in days)
    if den == 0:
        raise EstimationError("base estimates are all zero on projection days")
    s = num / den
    if s <= 1.0:
        log.warning(
            "projections do not exceed uncorrected estimates (s=%.4f); "
            "calibrated non-use clamped to 0", s,
        )
        return 0.0
    return min(1.0 - 1.0 / s, clamp)


def sensitivity_curve(
    c: float, q_grid: Sequence[float]
) -> list[tuple[float, float]]:
    """Cumulative attendance versus assumed non-use, reciprocal convention.

    Evaluates f(q) = c/q over the grid. Note this is not the 1/(1-q)
    correction used elsewhere in the pipeline; see nonuse_adjusted_totals
    for that reading. q must be positive.
    """
    for q in q_grid:
        if not 0.0 < q < 1.0:
            raise ValueError(f"non-use fraction out of (0, 1): {q}")
    return [(float(q), c / q) for q in q_grid]


def nonuse_adjusted_totals(
    base_total: float, q_grid: Sequence[float]
) -> list[tuple[float, float]]:
    """Cumulative attendance versus assumed non-use, censoring-model convention.

    Applies base/(1-q): the base total counts only phone users, and a
    non-use fraction q means users are (1-q) of everyone present.
    """
    for q in q_grid:
        if not 0.0 <= q < 1.0:
            raise ValueError(f"non-use fraction out of [0, 1): {q}")
    return [(float(q), base_total / (1.0 - q)) for q in q_grid]


def state_representation(
    by_state_cumulative: Mapping[int, float],
) -> dict[int, float]:
    """Each state's share of the total cumulative estimate; sums to 1."""
    total = 0.0
    for state in sorted(by_state_cumulative):
        v = by_state_cumulative[state]
        if v < 0:
            raise EstimationError(f"negative estimate for state {state}")
        total += v
    if total <= 0:
        raise EstimationError("zero total attendance, representation undefined")
    return {s: by_state_cumulative[s] / total for s in sorted(by_state_cumulative)}


def final_cumulative_by_state(
    by_state_cumulative: Mapping[tuple[int, int], float],
    *,
    total_days: int,
) -> dict[int, float]:
    return {
        state: by_state_cumulative[(state, day)]
        for (state, day) in sorted(by_state_cumulative)
        if day == total_days
    }


def build_series(
    observations: Sequence[DailyObservation],
    counts: Mapping[tuple[int, int], int],
    profiles: Mapping[int, StateProfile],
    *,
    total_days: int,
    factors: AdjustmentFactors | None = None,
    projections: Mapping[int, float] | None = None,
) -> AttendanceSeries:
    """Full attendance assembly used by the CLI.

    Daily use is re-estimated from the observations; non-use is
    calibrated against projections when given. Either falls back to the
    documented defaults inside ``factors``.
    """
    base = factors or AdjustmentFactors()
    daily_use = estimate_daily_use(stays_from_observations(observations))

    non_use = base.non_use
    non_use_est = None
    if projections:
        base_daily = uncorrected_daily(
            counts, profiles, prevalence=base.prevalence, daily_use=daily_use
        )
        non_use_est = calibrate_non_use(base_daily, projections)
        if non_use_est > 0:
            non_use = non_use_est

    eff = AdjustmentFactors(base.prevalence, daily_use, non_use)
    by_state_daily = daily_attendance_by_state(counts, profiles, eff)
    daily = daily_attendance(counts, profiles, eff)
    new = first_day_counts(observations)
    by_state_cum = cumulative_attendance_by_state(
        new, profiles, eff, total_days=total_days
    )
    cumulative: dict[int, float] = {d: 0.0 for d in range(1, total_days + 1)}
    for (state, day), v in sorted(by_state_cum.items()):
        cumulative[day] += v
    representation = state_representation(
        final_cumulative_by_state(by_state_cum, total_days=total_days)
    )
    return AttendanceSeries(
        daily=daily,
        cumulative=cumulative,
        by_state_daily=by_state_daily,
        by_state_cumulative=by_state_cum,
        representation=representation,
        daily_use_estimate=daily_use,
        non_use_estimate=non_use_est,
        factors=eff,
    )
