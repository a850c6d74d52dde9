"""Spatial homophily through daily Voronoi-cell co-location.

For state r on day d, with n_crd persons observed in cell c and
N_rd = sum_c n_crd, the co-location probability

    p_rd = (1/N_rd) * sum_c n_crd * (n_crd - 1) / (N_rd - 1)

is the chance that two randomly chosen distinct persons from the state
share a cell that day. Holding the spread n_crd/N_rd fixed, p_rd barely
moves as the state's headcount scales, which is what makes it comparable
across states of very different representation.

Q_A averages p_rd over the whole window; Q_H and Q_L average over high-
and low-volume days (the three peak-attendance days plus two days on
each side form the high-volume set); Q_D = Q_H/Q_L is the crowding
response. Confidence intervals bootstrap over days, the exchangeable
units in Q's definition.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from math import log10
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import EstimationError
from .ingest import DailyObservation


def colocation_probability(
    counts: Mapping[int, int] | Sequence[int], n_total: int | None = None
) -> float | None:
    """Same-cell probability for a random pair; None when fewer than 2 persons."""
    values = list(counts.values()) if isinstance(counts, Mapping) else list(counts)
    total = sum(values)
    if n_total is not None and n_total != total:
        raise EstimationError(f"cell counts sum to {total}, expected {n_total}")
    if total < 2:
        return None
    return sum(n * (n - 1) for n in values) / (total * (total - 1))


@dataclass
class CoLocationSeries:
    """Per (state, day) cell occupancies, totals, and p values."""

    counts: dict[tuple[int, int], Counter] = field(default_factory=dict)
    totals: dict[tuple[int, int], int] = field(default_factory=dict)
    p: dict[tuple[int, int], float | None] = field(default_factory=dict)
    states: list[int] = field(default_factory=list)
    n_days: int = 0

    def defined_days(self, state: int, days: Iterable[int]) -> list[int]:
        return [d for d in days if self.p.get((state, d)) is not None]


def build_colocation_series(
    observations: Iterable[DailyObservation],
    *,
    n_days: int,
    cell_of_tower: Mapping[int, int] | None = None,
) -> CoLocationSeries:
    """Daily cell occupancies per state from first-tower observations.

    ``cell_of_tower`` maps towers onto their owning cell (identity when
    every observed tower is active and owns its own cell).
    """
    series = CoLocationSeries(n_days=n_days)
    for obs in observations:
        cell = (
            cell_of_tower[obs.first_tower]
            if cell_of_tower is not None
            else obs.first_tower
        )
        key = (obs.state_code, obs.day)
        if key not in series.counts:
            series.counts[key] = Counter()
        series.counts[key][cell] += 1
    for key in sorted(series.counts):
        series.totals[key] = sum(series.counts[key].values())
        series.p[key] = colocation_probability(series.counts[key])
    series.states = sorted({s for s, _ in series.counts})
    return series


def partition_days(
    daily_attendance: Mapping[int, float],
    *,
    n_days: int,
    n_peaks: int = 3,
    halfwidth: int = 2,
    peak_days: Sequence[int] | None = None,
) -> tuple[set[int], set[int]]:
    """(high, low) day sets around the peak-attendance days.

    The top ``n_peaks`` days (ties to the earlier day) are each expanded
    by ``halfwidth`` days on both sides, clipped to the window; the union
    is the high-volume set and everything else is low-volume. Pass
    ``peak_days`` to pin the peaks from the calendar instead of the data.
    """
    if peak_days is None:
        ranked = sorted(daily_attendance, key=lambda d: (-daily_attendance[d], d))
        peak_days = ranked[:n_peaks]
    high: set[int] = set()
    for peak in peak_days:
        lo = max(1, peak - halfwidth)
        hi = min(n_days, peak + halfwidth)
        high.update(range(lo, hi + 1))
    low = set(range(1, n_days + 1)) - high
    return high, low


def _mean_defined(series: CoLocationSeries, state: int, days: Iterable[int]) -> float | None:
    vals = [series.p[(state, d)] for d in series.defined_days(state, days)]
    if not vals:
        return None
    return float(np.mean(vals))


@dataclass
class StateSpatial:
    state: int
    q_a: float | None
    q_h: float | None
    q_l: float | None
    q_d: float | None
    ci_a: tuple[float, float] | None = None
    ci_d: tuple[float, float] | None = None
    n_days_defined: int = 0


def aggregate_q(
    series: CoLocationSeries,
    high: set[int],
    low: set[int],
) -> dict[int, StateSpatial]:
    """Q_A, Q_H, Q_L, Q_D per state.

    Days with undefined p (fewer than two observed persons) are excluded
    and the divisor reduced; imputing zero would conflate absence with
    dispersion. Q_D is missing when Q_L is zero or either side is empty.
    """
    all_days = range(1, series.n_days + 1)
    out: dict[int, StateSpatial] = {}
    for state in series.states:
        q_a = _mean_defined(series, state, all_days)
        q_h = _mean_defined(series, state, sorted(high))
        q_l = _mean_defined(series, state, sorted(low))
        q_d = None
        if q_h is not None and q_l is not None and q_l > 0:
            q_d = q_h / q_l
        out[state] = StateSpatial(
            state=state,
            q_a=q_a,
            q_h=q_h,
            q_l=q_l,
            q_d=q_d,
            n_days_defined=len(series.defined_days(state, all_days)),
        )
    return out


def bootstrap_mean_ci(
    values: Sequence[float],
    *,
    replicates: int = 1000,
    seed: int = 0,
    alpha: float = 0.05,
) -> tuple[float, float]:
    """Percentile bootstrap interval for a mean, resampling days."""
    vals = np.asarray(values, dtype=float)
    if vals.size < 2:
        raise EstimationError("need at least 2 defined days to bootstrap")
    if replicates < 200:
        raise EstimationError("need at least 200 bootstrap replicates")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, vals.size, size=(replicates, vals.size))
    stats = vals[idx].mean(axis=1)
    lo, hi = np.percentile(stats, [100 * alpha / 2, 100 * (1 - alpha / 2)])
    return float(lo), float(hi)


def bootstrap_ratio_ci(
    high_values: Sequence[float],
    low_values: Sequence[float],
    *,
    replicates: int = 1000,
    seed: int = 0,
    alpha: float = 0.05,
) -> tuple[float, float]:
    """Percentile bootstrap interval for mean(high)/mean(low).

    High and low days are resampled separately (stratified), keeping the
    two regimes' day counts fixed.
    """
    hv = np.asarray(high_values, dtype=float)
    lv = np.asarray(low_values, dtype=float)
    if hv.size < 2 or lv.size < 2:
        raise EstimationError("need at least 2 defined days in each stratum")
    if replicates < 200:
        raise EstimationError("need at least 200 bootstrap replicates")
    rng = np.random.default_rng(seed)
    hi_idx = rng.integers(0, hv.size, size=(replicates, hv.size))
    lo_idx = rng.integers(0, lv.size, size=(replicates, lv.size))
    num = hv[hi_idx].mean(axis=1)
    den = lv[lo_idx].mean(axis=1)
    ok = den > 0
    if not ok.any():
        raise EstimationError("all bootstrap denominators are zero")
    stats = num[ok] / den[ok]
    lo, hi = np.percentile(stats, [100 * alpha / 2, 100 * (1 - alpha / 2)])
    return float(lo), float(hi)


def attach_bootstrap_cis(
    report: dict[int, StateSpatial],
    series: CoLocationSeries,
    high: set[int],
    low: set[int],
    *,
    replicates: int = 1000,
    seed: int = 0,
) -> None:
    """Fill ci_a and ci_d in place, one seeded substream per state."""
    all_days = range(1, series.n_days + 1)
    for k, state in enumerate(sorted(report)):
        stat = report[state]
        days = series.defined_days(state, all_days)
        vals = [series.p[(state, d)] for d in days]
        if len(vals) >= 2:
            stat.ci_a = bootstrap_mean_ci(
                vals, replicates=replicates, seed=seed * 1_000_003 + 2 * k
            )
        hv = [series.p[(state, d)] for d in series.defined_days(state, sorted(high))]
        lv = [series.p[(state, d)] for d in series.defined_days(state, sorted(low))]
        if len(hv) >= 2 and len(lv) >= 2 and stat.q_d is not None:
            stat.ci_d = bootstrap_ratio_ci(
                hv, lv, replicates=replicates, seed=seed * 1_000_003 + 2 * k + 1
            )


def daily_representation(
    by_state_daily: Mapping[tuple[int, int], float],
) -> dict[tuple[int, int], float]:
    """Each state's share of the summed daily estimate, per day."""
    day_totals: dict[int, float] = defaultdict(float)
    for (state, day) in sorted(by_state_daily):
        day_totals[day] += by_state_daily[(state, day)]
    return {
        (state, day): v / day_totals[day]
        for (state, day), v in sorted(by_state_daily.items())
        if day_totals[day] > 0
    }


def mean_log_representation(
    representation_daily: Mapping[tuple[int, int], float],
) -> dict[int, float]:
    """Mean over days of log10 daily representation, per state.

    Only days where the state has a positive share contribute.
    """
    sums: dict[int, float] = defaultdict(float)
    counts: dict[int, int] = defaultdict(int)
    for (state, day), share in sorted(representation_daily.items()):
        if share > 0:
            sums[state] += log10(share)
            counts[state] += 1
    return {s: sums[s] / counts[s] for s in sorted(sums)}


def correlate(
    values: Mapping[int, float | None],
    mean_log_rep: Mapping[int, float],
) -> float | None:
    """Pearson correlation of a per-state statistic with log representation.

    States missing either quantity are dropped; needs at least 3 complete
    pairs and positive variance on both sides, otherwise None.
    """
    states = [
        s
        for s in sorted(values)
        if values[s] is not None and s in mean_log_rep
    ]
    if len(states) < 3:
        return None
    a = np.array([values[s] for s in states], dtype=float)
    b = np.array([mean_log_rep[s] for s in states], dtype=float)
    if a.std() == 0 or b.std() == 0:
        return None
    return float(np.corrcoef(a, b)[0, 1])


def correlation_p_value(
    values: Mapping[int, float | None],
    mean_log_rep: Mapping[int, float],
    *,
    n_permutations: int = 199,
    seed: int = 0,
) -> float | None:
    """Two-sided permutation p-value for the correlation in ``correlate``.

    The state pairing is shuffled ``n_permutations`` times; p is the
    add-one-smoothed share of shuffles whose |rho| reaches the observed
    |rho|, so the smallest attainable p is 1/(n_permutations + 1).
    None whenever the observed correlation is undefined.
    """
    observed = correlate(values, mean_log_rep)
    if observed is None:
        return None
    states = [
        s
        for s in sorted(values)
        if values[s] is not None and s in mean_log_rep
    ]
    a = np.array([values[s] for s in states], dtype=float)
    b = np.array([mean_log_rep[s] for s in states], dtype=float)
    rng = np.random.default_rng(seed)
    hits = 0
    for _ in range(n_permutations):
        rho = float(np.corrcoef(a, b[rng.permutation(b.size)])[0, 1])
        if abs(rho) >= abs(observed) - 1e-12:
            hits += 1
    return (1 + hits) / (n_permutations + 1)
