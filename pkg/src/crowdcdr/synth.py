"""Synthetic CDR scenarios with planted ground truth.

Every estimator in the package is validated against data from this
generator, so each planted quantity is wired to be recoverable exactly
in expectation:

- Attendance. Customer and never-user counts are deterministic quotas
  (``round(attendees * share * prevalence)`` etc.), not binomial draws,
  so cumulative recovery is limited only by rounding. Visible persons
  are always active on their arrival and departure days and use the
  phone on interior days at rate (u*s - 2)/(s - 2); summed over a stay
  of length s that gives u*s expected active days, which makes the
  active-days/span estimator of daily use unbiased for every person.
- Daily activity. Interior activity is allocated by per-cohort day
  quotas with rotating membership rather than independent coin flips.
  Totals still match the planted rate but day-level counts carry only
  rounding noise, which keeps the non-use calibration (a 4-day
  regression against projections) inside tight per-run tolerances at
  desk scale.
- Closure. Visible customers travel in groups of three sharing arrival
  and stay. Each group that forms ties at all (probability p_in) is
  wired as a triangle with probability expit(beta0 + beta1*log10 W_r)
  and as a 2-path otherwise, so the closure-vs-representation logistic
  model holds exactly and the planted triples are node-disjoint, which
  gives the downstream Wald intervals their nominal coverage.
- Co-location. Each active group member lands in the group's daily
  cell with probability theta and in a uniform cell otherwise; the
  expected co-location probability then has a closed form in the
  realized same-group active pair counts, recorded per (state, day).

Stays are geometric above a minimum, arrivals multinomial over the
window with extra short-stay cohorts on peak days (day trippers), so
attendance peaks on the configured days while off-peak days stay
locally stationary -- the property the calibration days rely on.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict, replace
from math import ceil, cos, exp, expm1, floor, log10, log1p, pi, radians
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigurationError
from .geo import EARTH_RADIUS_KM
from .ingest import (
    CdrEvent,
    DailyObservation,
    StudyWindow,
    DEFAULT_WINDOW,
    TowerSite,
    StateProfile,
    write_cdr,
    write_table,
)
from .social import Triple

#: person ids are state*stride + 1-based index; peers for filler traffic
#: live above PEER_BASE and are never customers.
PERSON_STRIDE = 10_000_000
PEER_BASE = 10 ** 9

KM_PER_DEGREE = pi * EARTH_RADIUS_KM / 180.0


@dataclass(frozen=True)
class StateSpec:
    """One origin state: planted attendance, market share, co-location."""

    code: int
    name: str
    attendees: int
    market_share: float
    is_local: bool = False
    theta: float = 0.6          # same-cell pull for traveling groups


@dataclass
class ScenarioConfig:
    seed: int = 1
    states: list[StateSpec] = field(default_factory=list)
    n_days: int = 90
    window_start: int = DEFAULT_WINDOW.start

    # stay / arrival model
    mean_stay: float = 12.0
    min_stay: int = 5
    peak_days: tuple[int, ...] = (41, 46, 69)
    peak_stay: int = 5              # day-tripper stay length
    peak_fraction: float = 0.25     # attendees arriving as peak cohorts

    # usage model
    prevalence: float = 0.713
    daily_use: float = 0.404
    non_use: float = 0.406

    # social model
    group_size: int = 3
    p_in: float = 1.0               # probability a travel group forms ties
    p_out: float = 0.0              # cross-group same-state tie probability
    beta0: float = 0.0
    beta1: float = -0.208

    # spatial model
    grid_rows: int = 21
    grid_cols: int = 20
    cell_km: float = 1.0
    n_inactive_towers: int = 20
    origin_lat: float = 25.45
    origin_lon: float = 81.85
    theta_peak_boost: float = 1.4   # crowding multiplier on high-volume days
    theta_cap: float = 0.95

    # projections
    projection_days: tuple[int, ...] = (25, 35, 55, 75)
    projection_noise: float = 0.0

    @property
    def window(self) -> StudyWindow:
        return StudyWindow(start=self.window_start, days=self.n_days)

    @property
    def n_active_cells(self) -> int:
        return self.grid_rows * self.grid_cols - self.n_inactive_towers

    @property
    def crowding_days(self) -> set[int]:
        """Peak days plus two on each side: where theta_peak_boost applies."""
        out: set[int] = set()
        for t in self.peak_days:
            out.update(range(max(1, t - 2), min(self.n_days, t + 2) + 1))
        return out

    def validate(self) -> None:
        if not self.states:
            raise ConfigurationError("scenario has no states")
        if len({s.code for s in self.states}) != len(self.states):
            raise ConfigurationError("duplicate state codes")
        if sum(s.is_local for s in self.states) != 1:
            raise ConfigurationError("exactly one state must be local")
        for s in self.states:
            if s.attendees <= 0:
                raise ConfigurationError(f"state {s.code}: attendees must be positive")
            if not 0 < s.market_share <= 1:
                raise ConfigurationError(f"state {s.code}: share outside (0, 1]")
            if not 0 <= s.theta <= 1:
                raise ConfigurationError(f"state {s.code}: theta outside [0, 1]")
        for name in ("prevalence", "daily_use", "p_in", "p_out",
                     "peak_fraction", "projection_noise"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ConfigurationError(f"{name} outside [0, 1]: {v}")
        if not 0 <= self.non_use <= 1:
            raise ConfigurationError(f"non_use outside [0, 1]: {self.non_use}")
        if self.n_days < self.min_stay + 1:
            raise ConfigurationError("window shorter than the minimum stay")
        if self.min_stay < 2 or self.peak_stay < 2:
            raise ConfigurationError("stays must span at least 2 days")
        if self.peak_stay < self.min_stay:
            raise ConfigurationError("peak_stay shorter than min_stay")
        if self.mean_stay < self.min_stay:
            raise ConfigurationError("mean_stay below min_stay")
        # Anchored activity needs u*s >= 2 for every possible stay, else
        # the interior rate (u*s-2)/(s-2) would be negative.
        if self.daily_use * self.min_stay < 2:
            raise ConfigurationError(
                f"daily_use {self.daily_use} too low for min_stay "
                f"{self.min_stay}: arrival/departure anchoring needs "
                f"daily_use >= {2 / self.min_stay:.3f}"
            )
        for t in self.peak_days:
            if not self.peak_stay <= t <= self.n_days - self.peak_stay + 1:
                raise ConfigurationError(
                    f"peak day {t} leaves no room for the stays that "
                    "converge on it and depart from it"
                )
        for d in self.projection_days:
            if not 1 <= d <= self.n_days:
                raise ConfigurationError(f"projection day {d} outside the window")
        if self.group_size < 2:
            raise ConfigurationError("group_size must be at least 2")
        if self.group_size != 3 and (self.p_in > 0 or self.p_out > 0):
            raise ConfigurationError(
                "closure planting wires triangles vs 2-paths and therefore "
                "requires travel groups of exactly 3"
            )
        if self.n_active_cells < 2:
            raise ConfigurationError("need at least 2 active towers")
        if self.n_inactive_towers < 0:
            raise ConfigurationError("n_inactive_towers must be >= 0")
        visible = [_quotas(s, self)[2] for s in self.states]
        if any(visible) and all(v < self.group_size for v in visible):
            raise ConfigurationError(
                "group size exceeds every state's visible customer count"
            )

    def to_json(self, path) -> None:
        blob = asdict(self)
        blob["states"] = [asdict(s) for s in self.states]
        Path(path).write_text(json.dumps(blob, indent=2) + "\n", encoding="utf-8")

    @classmethod
    def from_json(cls, path) -> "ScenarioConfig":
        blob = json.loads(Path(path).read_text(encoding="utf-8"))
        try:
            states = [StateSpec(**s) for s in blob.pop("states")]
            for key in ("peak_days", "projection_days"):
                if key in blob:
                    blob[key] = tuple(blob[key])
            cfg = cls(states=states, **blob)
        except TypeError as exc:
            raise ConfigurationError(f"bad scenario config: {exc}") from None
        cfg.validate()
        return cfg


def _quotas(spec: StateSpec, config: ScenarioConfig) -> tuple[int, int, int]:
    """(customers, never_users, visible) for one state, deterministic."""
    customers = round(spec.attendees * spec.market_share * config.prevalence)
    never = round(customers * config.non_use)
    return customers, never, customers - never


def _interior_rate(u: float, s: int) -> float:
    """Interior-day activity rate that makes expected active days u*s."""
    if s <= 2:
        return 0.0
    return (u * s - 2.0) / (s - 2.0)


GOLDEN = 0.6180339887498949


def _spread_counts(total: int, n_bins: int, offset: int = 0) -> np.ndarray:
    """Split ``total`` over bins as evenly as integers allow.

    Largest-remainder spacing, rotated by ``offset`` bins. The rotation
    matters when many states are spread over the same span: without it
    their rounding patterns align and the summed arrivals develop
    day-level spikes that are pure artifacts of the allocation.
    """
    out = np.zeros(n_bins, dtype=int)
    if total <= 0 or n_bins == 0:
        return out
    for i in range(n_bins):
        out[(i + offset) % n_bins] = (
            (i + 1) * total // n_bins - i * total // n_bins
        )
    return out


def _stratified_stays(
    k: int, config: ScenarioConfig, max_stay: int | None = None,
    phase: float = 0.5,
) -> list[int]:
    """k stays from the geometric model at stratified quantiles.

    The marginal is min_stay - 1 + Geometric(p) with mean ``mean_stay``,
    truncated to ``max_stay`` so a stay never outlives the window; naive
    clipping would instead pile every long stay's departure onto the
    last day. Drawing at quantiles (j+phase)/k keeps each arrival
    cohort's stay mix close to the distribution instead of leaving it
    to sampling noise; varying the phase across cohorts stops their
    departure days from landing on a common lattice.
    """
    p = 1.0 / (config.mean_stay - config.min_stay + 1.0)
    mass = 1.0
    if max_stay is not None:
        if max_stay < config.min_stay:
            raise ConfigurationError(
                f"max_stay {max_stay} below min_stay {config.min_stay}"
            )
        mass = -expm1(log1p(-p) * (max_stay - config.min_stay + 1))
    stays = []
    for j in range(k):
        q = (j + phase) / k * mass
        g = max(1, ceil(log1p(-q) / log1p(-p)))
        stays.append(config.min_stay - 1 + g)
    return stays


@dataclass
class GroundTruth:
    """Planted quantities plus the realized tables the estimators see."""

    config: ScenarioConfig
    n_days: int
    true_total: dict[int, int]
    true_w: dict[int, float]
    customers: dict[int, int]
    never_users: dict[int, int]
    visible: dict[int, int]
    true_daily: dict[tuple[int, int], int]
    observed_counts: dict[tuple[int, int], int]
    stay_pairs: list[tuple[int, int]]
    closed_prob: dict[int, float]
    edges: list[tuple[int, int]]
    triples: list[Triple]
    node_state: dict[int, int]
    towers: list[TowerSite]
    active_tower_ids: list[int]
    slot_person: np.ndarray | None = None
    slot_state: np.ndarray | None = None
    slot_day: np.ndarray | None = None
    slot_cell: np.ndarray | None = None
    planted_p: dict[tuple[int, int], float] = field(default_factory=dict)
    planted_qa: dict[int, float] = field(default_factory=dict)

    @property
    def seed(self) -> int:
        return self.config.seed

    def profiles(self) -> dict[int, StateProfile]:
        return {
            s.code: StateProfile(s.code, s.name, s.market_share, s.is_local)
            for s in self.config.states
        }

    def true_daily_total(self) -> dict[int, int]:
        out: dict[int, int] = {d: 0 for d in range(1, self.n_days + 1)}
        for (state, day), n in self.true_daily.items():
            out[day] += n
        return out

    def observations(self) -> list[DailyObservation]:
        """What ingest + dedupe should reconstruct from the emitted files."""
        if self.slot_cell is None:
            raise ConfigurationError("scenario was generated without placements")
        out = [
            DailyObservation(
                person_id=int(p),
                state_code=int(s),
                day=int(d),
                first_tower=self.active_tower_ids[int(c)],
            )
            for p, s, d, c in zip(
                self.slot_person, self.slot_state, self.slot_day, self.slot_cell
            )
        ]
        out.sort(key=lambda o: (o.person_id, o.day))
        return out

    def cell_counts(self) -> dict[tuple[int, int], dict[int, int]]:
        """(state, day) -> {cell index: active persons placed there}."""
        if self.slot_cell is None:
            raise ConfigurationError("scenario was generated without placements")
        out: dict[tuple[int, int], dict[int, int]] = {}
        for s, d, c in zip(self.slot_state, self.slot_day, self.slot_cell):
            cell = out.setdefault((int(s), int(d)), {})
            cell[int(c)] = cell.get(int(c), 0) + 1
        return out

    def summary(self) -> dict:
        return {
            "seed": self.config.seed,
            "n_days": self.n_days,
            "planted": {
                "prevalence": self.config.prevalence,
                "daily_use": self.config.daily_use,
                "non_use": self.config.non_use,
                "beta0": self.config.beta0,
                "beta1": self.config.beta1,
            },
            "states": {
                str(code): {
                    "attendees": self.true_total[code],
                    "w": self.true_w[code],
                    "customers": self.customers[code],
                    "visible": self.visible[code],
                    "closed_prob": self.closed_prob.get(code),
                    "planted_qa": self.planted_qa.get(code),
                }
                for code in sorted(self.true_total)
            },
            "n_edges": len(self.edges),
            "n_triples": len(self.triples),
        }


def tower_grid(config: ScenarioConfig) -> tuple[list[TowerSite], list[int]]:
    """Grid of towers around the venue; returns (all towers, active ids).

    Inactive towers (sites with no traffic over the window) are spread
    evenly through the scan order so their absorption into neighboring
    cells is exercised all over the map, not in one corner.
    """
    n = config.grid_rows * config.grid_cols
    dlat = config.cell_km / KM_PER_DEGREE
    dlon = config.cell_km / (KM_PER_DEGREE * cos(radians(config.origin_lat)))
    inactive: set[int] = set()
    if config.n_inactive_towers:
        stride = max(1, n // config.n_inactive_towers)
        pos = 0
        while len(inactive) < config.n_inactive_towers and pos < n:
            inactive.add(pos)
            pos += stride
    towers: list[TowerSite] = []
    active_ids: list[int] = []
    for i in range(config.grid_rows):
        for j in range(config.grid_cols):
            pos = i * config.grid_cols + j
            tid = 1001 + pos
            towers.append(TowerSite(
                tower_id=tid,
                latitude=config.origin_lat + (i - config.grid_rows / 2) * dlat,
                longitude=config.origin_lon + (j - config.grid_cols / 2) * dlon,
                active=pos not in inactive,
            ))
            if pos not in inactive:
                active_ids.append(tid)
    return towers, active_ids


def _roster(
    visible: int, spec: StateSpec, config: ScenarioConfig
) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    """Arrival, stay, group index per visible person; returns n_groups.

    Order: base travel groups, base singletons, then two half-cohorts
    per peak day (groups first, then singletons within each). One half
    departs on the peak day and the other arrives on it, so the peak day
    alone collects both anchor bumps and stands out as the unique
    activity maximum. Group members share arrival and stay; every
    person's last present day falls inside the window.
    """
    gs = config.group_size
    n_peak = round(visible * config.peak_fraction) if config.peak_days else 0
    n_base = visible - n_peak
    arrival_span = config.n_days - config.min_stay + 1

    arrivals: list[int] = []
    stays: list[int] = []
    groups: list[int] = []
    next_group = 0

    def add_unit(a: int, s: int, size: int, grouped: bool):
        nonlocal next_group
        s_eff = min(s, config.n_days + 1 - a)
        gid = next_group if grouped else -1
        if grouped:
            next_group += 1
        for _ in range(size):
            arrivals.append(a)
            stays.append(s_eff)
            groups.append(gid)

    n_groups_base, n_single_base = divmod(n_base, gs)
    per_day = _spread_counts(n_groups_base, arrival_span, spec.code * 17)
    for day_idx in range(arrival_span):
        a = day_idx + 1
        k = int(per_day[day_idx])
        phase = (GOLDEN * (spec.code * 131 + a)) % 1.0
        for s in _stratified_stays(k, config, config.n_days + 1 - a, phase):
            add_unit(a, s, gs, grouped=True)
    per_day = _spread_counts(n_single_base, arrival_span, spec.code * 17 + 7)
    for day_idx in range(arrival_span):
        a = day_idx + 1
        k = int(per_day[day_idx])
        phase = (GOLDEN * (spec.code * 131 + a) + 0.31) % 1.0
        for s in _stratified_stays(k, config, config.n_days + 1 - a, phase):
            add_unit(a, s, 1, grouped=False)

    per_peak = _spread_counts(n_peak, len(config.peak_days)) if n_peak else []
    for t, k in zip(config.peak_days, per_peak):
        early = int(k) // 2
        for part, a in ((early, t - config.peak_stay + 1), (int(k) - early, t)):
            n_g, n_s = divmod(part, gs)
            for _ in range(n_g):
                add_unit(a, config.peak_stay, gs, grouped=True)
            for _ in range(n_s):
                add_unit(a, config.peak_stay, 1, grouped=False)

    return (
        np.array(arrivals, dtype=np.int32),
        np.array(stays, dtype=np.int32),
        np.array(groups, dtype=np.int32),
        next_group,
    )


def _invisible_presence(
    count: int, spec: StateSpec, config: ScenarioConfig, delta: np.ndarray
) -> None:
    """Add presence of attendees who never appear in the CDRs."""
    n_peak = round(count * config.peak_fraction) if config.peak_days else 0
    n_base = count - n_peak
    arrival_span = config.n_days - config.min_stay + 1
    per_day = _spread_counts(n_base, arrival_span, spec.code * 17 + 13)
    for day_idx in range(arrival_span):
        a = day_idx + 1
        max_stay = config.n_days + 1 - a
        phase = (GOLDEN * (spec.code * 131 + a) + 0.62) % 1.0
        for s in _stratified_stays(int(per_day[day_idx]), config,
                                   max_stay, phase):
            delta[a] += 1
            delta[a + s] -= 1
    per_peak = _spread_counts(n_peak, len(config.peak_days)) if n_peak else []
    for t, k in zip(config.peak_days, per_peak):
        early = int(k) // 2
        for part, a in ((early, t - config.peak_stay + 1), (int(k) - early, t)):
            delta[a] += part
            delta[a + config.peak_stay] -= part


def _activity_slots(
    arrivals: np.ndarray, stays: np.ndarray, config: ScenarioConfig,
    rng: np.random.Generator,
) -> tuple[list[int], list[int], np.ndarray]:
    """(persons, days) of active person-days plus active-day counts.

    Everyone is active on arrival and departure. Interior activity is
    allocated per (arrival, stay) cohort: each interior day gets
    floor-with-carry of k * interior_rate slots, assigned to members in
    rotation from a shuffled order. Totals match the planted daily-use
    rate with only rounding error, at the day level and per person.
    """
    u = config.daily_use
    n = len(arrivals)
    n_active = np.full(n, 2, dtype=np.int64)
    persons: list[int] = []
    days: list[int] = []
    cohorts: dict[tuple[int, int], list[int]] = {}
    for i in range(n):
        cohorts.setdefault((int(arrivals[i]), int(stays[i])), []).append(i)
        persons.append(i)
        days.append(int(arrivals[i]))
        persons.append(i)
        days.append(int(arrivals[i]) + int(stays[i]) - 1)

    carry = 0.5     # persists across cohorts so rounding losses cancel
    for (a, s), members in sorted(cohorts.items()):
        if s <= 2:
            continue
        rate = _interior_rate(u, s)
        if rate <= 0:
            continue
        k = len(members)
        order = [members[j] for j in rng.permutation(k)]
        mu = k * rate
        rot = 0
        for d in range(a + 1, a + s - 1):
            x = mu + carry
            take = int(floor(x + 1e-9))
            take = min(take, k)
            carry = x - take
            for t in range(take):
                idx = order[(rot + t) % k]
                persons.append(idx)
                days.append(d)
                n_active[idx] += 1
            rot = (rot + take) % k
    return persons, days, n_active


def _expected_p(
    sg: float, n_act: int, theta: float, n_cells: int
) -> float | None:
    """Expected co-location probability given realized same-group pairs.

    Same-group active pairs share a cell with probability
    theta^2 + (1 - theta^2)/C; all other pairs collide uniformly at 1/C.
    """
    if n_act < 2:
        return None
    tp = n_act * (n_act - 1) / 2.0
    p_same = theta * theta + (1.0 - theta * theta) / n_cells
    return (sg * p_same + (tp - sg) / n_cells) / tp


def generate_tables(
    config: ScenarioConfig,
    *,
    with_social: bool = True,
    with_spatial: bool = True,
    with_presence: bool = True,
) -> GroundTruth:
    """Simulate a scenario and return ground truth plus observed tables.

    The flags skip work the caller does not need (e.g. representation
    recovery at large scale needs neither placements nor presence of
    invisible attendees); emitted quantities are unaffected.
    """
    config.validate()
    towers, active_ids = tower_grid(config)
    n_cells = len(active_ids)
    total_attendees = sum(s.attendees for s in config.states)
    truth = GroundTruth(
        config=config,
        n_days=config.n_days,
        true_total={s.code: s.attendees for s in config.states},
        true_w={s.code: s.attendees / total_attendees for s in config.states},
        customers={},
        never_users={},
        visible={},
        true_daily={},
        observed_counts={},
        stay_pairs=[],
        closed_prob={},
        edges=[],
        triples=[],
        node_state={},
        towers=towers,
        active_tower_ids=active_ids,
    )

    states = sorted(config.states, key=lambda s: s.code)
    streams = np.random.SeedSequence(config.seed).spawn(len(states))
    all_person: list[np.ndarray] = []
    all_state: list[np.ndarray] = []
    all_day: list[np.ndarray] = []
    all_cell: list[np.ndarray] = []
    crowded = config.crowding_days

    for spec, stream in zip(states, streams):
        rng = np.random.default_rng(stream)
        customers, never, visible = _quotas(spec, config)
        truth.customers[spec.code] = customers
        truth.never_users[spec.code] = never
        truth.visible[spec.code] = visible
        q_r = 1.0 / (1.0 + exp(-(config.beta0
                                 + config.beta1 * log10(truth.true_w[spec.code]))))
        truth.closed_prob[spec.code] = q_r

        arrivals, stays, groups, n_groups = _roster(visible, spec, config)

        # presence of every attendee, visible or not
        if with_presence:
            delta = np.zeros(config.n_days + config.peak_stay
                             + int(stays.max(initial=config.min_stay)) + 2,
                             dtype=np.int64)
            np.add.at(delta, arrivals, 1)
            np.add.at(delta, arrivals + stays, -1)
            _invisible_presence(spec.attendees - visible, spec, config, delta)
            present = np.cumsum(delta)[1:config.n_days + 1]
            for d in range(1, config.n_days + 1):
                if present[d - 1]:
                    truth.true_daily[(spec.code, d)] = int(present[d - 1])

        if visible == 0:
            continue

        persons, days, n_active = _activity_slots(arrivals, stays, config, rng)
        for i in range(visible):
            truth.stay_pairs.append((int(n_active[i]), int(stays[i])))
        p_arr = np.array(persons, dtype=np.int64)
        d_arr = np.array(days, dtype=np.int64)
        day_counts = np.bincount(d_arr, minlength=config.n_days + 1)
        for d in range(1, config.n_days + 1):
            if day_counts[d]:
                truth.observed_counts[(spec.code, d)] = int(day_counts[d])

        if with_spatial:
            theta_by_day = np.full(config.n_days + 1, min(spec.theta, config.theta_cap))
            for d in crowded:
                theta_by_day[d] = min(config.theta_cap,
                                      spec.theta * config.theta_peak_boost)
            g_arr = groups[p_arr]
            cells = rng.integers(0, n_cells, size=p_arr.size)
            grouped = g_arr >= 0
            if grouped.any():
                gd_key = g_arr[grouped].astype(np.int64) * (config.n_days + 1) \
                    + d_arr[grouped]
                uniq, inverse, counts = np.unique(
                    gd_key, return_inverse=True, return_counts=True
                )
                group_cell = rng.integers(0, n_cells, size=uniq.size)
                coin = rng.random(gd_key.size) < theta_by_day[d_arr[grouped]]
                member_cells = np.where(coin, group_cell[inverse], cells[grouped])
                cells[grouped] = member_cells
                # realized same-group simultaneously-active pairs per day
                sg_by_day = np.zeros(config.n_days + 1)
                np.add.at(sg_by_day, uniq % (config.n_days + 1),
                          counts * (counts - 1) / 2.0)
            else:
                sg_by_day = np.zeros(config.n_days + 1)
            p_vals = []
            for d in range(1, config.n_days + 1):
                n_act = int(day_counts[d])
                p = _expected_p(float(sg_by_day[d]), n_act,
                                float(theta_by_day[d]), n_cells)
                if p is not None:
                    truth.planted_p[(spec.code, d)] = p
                    p_vals.append(p)
            if p_vals:
                truth.planted_qa[spec.code] = float(np.mean(p_vals))
            all_person.append(spec.code * PERSON_STRIDE + 1 + p_arr)
            all_state.append(np.full(p_arr.size, spec.code, dtype=np.int64))
            all_day.append(d_arr)
            all_cell.append(cells)

        if with_social and n_groups:
            base = spec.code * PERSON_STRIDE + 1
            for i in range(visible):
                truth.node_state[base + i] = spec.code
            wired = rng.random(n_groups) < config.p_in
            closed = rng.random(n_groups) < q_r
            member_of: dict[int, list[int]] = {}
            for i in range(visible):
                g = int(groups[i])
                if g >= 0:
                    member_of.setdefault(g, []).append(base + i)
            for g in range(n_groups):
                if not wired[g]:
                    continue
                m = member_of[g]
                truth.edges.append((m[0], m[1]))
                truth.edges.append((m[1], m[2]))
                if closed[g]:
                    truth.edges.append((m[0], m[2]))
                truth.triples.append(
                    Triple(spec.code, (m[0], m[1], m[2]), bool(closed[g]))
                )
            if config.p_out > 0:
                members = np.array(sorted(k for k, g in (
                    (base + i, groups[i]) for i in range(visible)) if g >= 0))
                n_m = members.size
                n_pairs = n_m * (n_m - 1) // 2
                picks = rng.binomial(n_pairs, config.p_out)
                chosen = rng.choice(n_pairs, size=min(picks, n_pairs),
                                    replace=False)
                for flat in np.sort(chosen):
                    i = int((2 * n_m - 1 - np.sqrt((2 * n_m - 1) ** 2
                                                   - 8 * flat)) // 2)
                    j = int(flat - i * (2 * n_m - i - 1) // 2 + i + 1)
                    a, b = int(members[i]), int(members[j])
                    if groups[a - base] != groups[b - base]:
                        truth.edges.append((a, b))

    if with_spatial and all_person:
        truth.slot_person = np.concatenate(all_person)
        truth.slot_state = np.concatenate(all_state)
        truth.slot_day = np.concatenate(all_day)
        truth.slot_cell = np.concatenate(all_cell)
    return truth


def emit_projections(
    truth: GroundTruth,
    days: Sequence[int] | None = None,
    noise: float | None = None,
    *,
    seed_offset: int = 104729,
) -> dict[int, float]:
    """Externally projected attendance: truth times (1 + noise draw).

    With noise 0 the projections equal the true daily totals exactly.
    """
    cfg = truth.config
    days = tuple(days) if days is not None else cfg.projection_days
    noise = cfg.projection_noise if noise is None else noise
    totals = truth.true_daily_total()
    for d in days:
        if not 1 <= d <= truth.n_days:
            raise ConfigurationError(f"projection day {d} outside the window")
    rng = np.random.default_rng(
        np.random.SeedSequence((cfg.seed, seed_offset))
    )
    out: dict[int, float] = {}
    for d in days:
        factor = max(0.05, 1.0 + noise * rng.standard_normal()) if noise else 1.0
        out[int(d)] = totals[int(d)] * factor
    return out


# ---------------------------------------------------------------------------
# Event materialization and file output


def _anchor_ts(window: StudyWindow, day: int, person: int) -> int:
    return window.start + (day - 1) * 86400 + (13 * person + 104729 * day) % 86400


def build_events(truth: GroundTruth) -> list[CdrEvent]:
    """Materialize the CDR stream implied by the generated tables.

    One anchor event per active person-day (to a non-customer peer, so it
    creates no social tie) plus one event per social edge on the lower
    endpoint's arrival day. All events of a person-day share that day's
    placement, so the first-tower observation is unambiguous.
    """
    if truth.slot_cell is None:
        raise ConfigurationError("scenario was generated without placements")
    window = truth.config.window
    cell_of: dict[tuple[int, int], int] = {}
    first_day: dict[int, int] = {}
    events: list[CdrEvent] = []
    for p, s, d, c in zip(truth.slot_person, truth.slot_state,
                          truth.slot_day, truth.slot_cell):
        p, s, d, c = int(p), int(s), int(d), int(c)
        cell_of[(p, d)] = c
        if p not in first_day or d < first_day[p]:
            first_day[p] = d
        tower = truth.active_tower_ids[c]
        text = (p + d) % 2 == 0
        events.append(CdrEvent(
            timestamp=_anchor_ts(window, d, p),
            caller_id=p,
            callee_id=PEER_BASE + p % 977,
            event_kind="text" if text else "call",
            duration=0 if text else 30 + (31 * p + d) % 600,
            tower_id=tower,
            caller_state=s,
            callee_state=0,
            caller_is_customer=True,
            callee_is_customer=False,
        ))
    for u, v in truth.edges:
        caller, callee = (u, v) if u <= v else (v, u)
        d = first_day[caller]
        tower = truth.active_tower_ids[cell_of[(caller, d)]]
        events.append(CdrEvent(
            timestamp=window.start + (d - 1) * 86400
            + (13 * caller + 104729 * d + 7) % 86400,
            caller_id=caller,
            callee_id=callee,
            event_kind="call",
            duration=60 + (caller + callee) % 300,
            tower_id=tower,
            caller_state=truth.node_state[caller],
            callee_state=truth.node_state[callee],
            caller_is_customer=True,
            callee_is_customer=True,
        ))
    events.sort(key=lambda e: (e.timestamp, e.caller_id, e.callee_id))
    return events


def generate(
    config: ScenarioConfig, outdir, *, projections: bool = True
) -> tuple[dict[str, Path], GroundTruth]:
    """Run the full generator and write the pipeline's input files.

    Writes cdr.csv, towers.csv, states.csv, projections.csv and a
    ground-truth summary; returns the paths and the in-memory truth.
    Deterministic given the config, byte for byte.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    truth = generate_tables(config)
    events = build_events(truth) if truth.slot_cell is not None else []
    paths = {
        "cdr": outdir / "cdr.csv",
        "towers": outdir / "towers.csv",
        "states": outdir / "states.csv",
        "projections": outdir / "projections.csv",
        "truth": outdir / "ground_truth.json",
    }
    write_cdr(events, paths["cdr"])
    write_table(
        paths["towers"],
        ("tower_id", "latitude", "longitude"),
        [(t.tower_id, t.latitude, t.longitude) for t in truth.towers],
    )
    write_table(
        paths["states"],
        ("state_code", "name", "market_share", "is_local"),
        [
            (s.code, s.name, s.market_share, 1 if s.is_local else 0)
            for s in sorted(config.states, key=lambda s: s.code)
        ],
    )
    if projections:
        proj = emit_projections(truth)
        write_table(
            paths["projections"],
            ("day", "projected_attendance"),
            [(d, proj[d]) for d in sorted(proj)],
        )
    else:
        paths.pop("projections")
    paths["truth"].write_text(
        json.dumps(truth.summary(), indent=2) + "\n", encoding="utf-8"
    )
    return paths, truth


# ---------------------------------------------------------------------------
# Canned scenarios


def predicted_pair_rate(spec: StateSpec, config: ScenarioConfig) -> float:
    """Expected per-day SG/TP ratio for one state, via a dry run.

    Replays the deterministic roster and interior-day quota schedule
    without drawing placements. Anchor days activate whole cohorts; an
    interior day that activates t of a cohort's k members contains a
    given within-group pair with probability t(t-1)/(k(k-1)) once the
    member order is shuffled. The mean over days of expected same-group
    pairs divided by total active pairs is exactly the factor theta^2
    multiplies in the planted co-location level, so solving against it
    calibrates theta with no stationarity approximation.
    """
    _, _, vis = _quotas(spec, config)
    if vis < 2:
        return 0.0
    arrivals, stays, groups, _ = _roster(vis, spec, config)
    nd = config.n_days
    n_act = np.zeros(nd + 2)
    sg = np.zeros(nd + 2)

    cohorts: dict[tuple[int, int], list[int]] = {}
    gid_sizes: dict[int, int] = {}
    for a, s, g in zip(arrivals, stays, groups):
        cohorts.setdefault((int(a), int(s)), []).append(int(g))
        if g >= 0:
            gid_sizes[int(g)] = gid_sizes.get(int(g), 0) + 1

    u = config.daily_use
    carry = 0.5     # must mirror _activity_slots exactly
    for (a, s), gids in sorted(cohorts.items()):
        k = len(gids)
        wp = sum(
            n * (n - 1) / 2.0
            for n in (gid_sizes[g] for g in set(gids) if g >= 0)
        )
        for anchor in (a, a + s - 1):
            n_act[anchor] += k
            sg[anchor] += wp
        if s <= 2:
            continue
        rate = _interior_rate(u, s)
        if rate <= 0:
            continue
        mu = k * rate
        for d in range(a + 1, a + s - 1):
            x = mu + carry
            take = min(int(floor(x + 1e-9)), k)
            carry = x - take
            n_act[d] += take
            if k >= 2:
                sg[d] += wp * take * (take - 1) / (k * (k - 1))
    ratios = [
        sg[d] / (n_act[d] * (n_act[d] - 1) / 2.0)
        for d in range(1, nd + 1)
        if n_act[d] >= 2
    ]
    if not ratios:
        return 0.0
    return float(np.mean(ratios))


def theta_for_target(
    q_target: float, spec: StateSpec, config: ScenarioConfig
) -> float:
    """Theta that lands the expected all-days co-location at ``q_target``."""
    c = config.n_active_cells
    floor_p = 1.0 / c
    ratio = predicted_pair_rate(spec, config)
    if q_target <= floor_p or ratio <= 0:
        return 0.0
    theta2 = (q_target - floor_p) / (ratio * (1.0 - floor_p))
    theta = float(np.sqrt(theta2))
    if theta > config.theta_cap:
        raise ConfigurationError(
            f"target {q_target} needs theta {theta:.3f} beyond the cap "
            f"{config.theta_cap} for state {spec.code}"
        )
    return theta


def desk_scenario(seed: int = 1, *, scale: float = 1.0) -> ScenarioConfig:
    """~1e5 attendees, 1 host + 22 visiting states, every planting active.

    Visiting attendance is geometric across states (2 decades of spread)
    with a constant theta, so co-location decreases in representation
    automatically: smaller states have proportionally more same-group
    active pairs per pair of present members.
    """
    states = [StateSpec(1, "host", round(55000 * scale), 0.25,
                        is_local=True, theta=0.3)]
    top, bottom = 9000.0, 90.0
    ratio = (bottom / top) ** (1.0 / 21.0)
    shares = [0.18 + 0.02 * ((7 * i) % 13) for i in range(22)]
    for i in range(22):
        states.append(StateSpec(
            code=2 + i,
            name=f"state{2 + i:02d}",
            attendees=max(60, round(top * ratio ** i * scale)),
            market_share=round(shares[i], 2),
            theta=0.6,
        ))
    return ScenarioConfig(seed=seed, states=states, projection_noise=0.015)


BAND_TARGETS = (0.0172, 0.0163, 0.0155, 0.0148, 0.0141,
                0.0133, 0.0124, 0.0113, 0.0096, 0.0075)


def band_scenario(seed: int = 1) -> ScenarioConfig:
    """Plants per-state co-location levels across a target band.

    Ten visiting states with visible counts rising as targets fall;
    theta is solved per state against the dry-run pair rate, so the
    planted all-days co-location hits each target up to placement
    noise. Sizing follows the feasibility relation visible ~
    1/(target - floor), which keeps every solved theta near 0.85 and
    safely under the cap. No peak cohorts: the band is about levels,
    not day shape.
    """
    visibles = [13.5 / (t - 0.0025) for t in BAND_TARGETS]
    base = ScenarioConfig(
        seed=seed, peak_fraction=0.0, theta_peak_boost=1.0,
        projection_noise=0.0,
    )
    share = 0.5
    factor = share * base.prevalence * (1 - base.non_use)
    states = [StateSpec(1, "host", 1000, share, is_local=True, theta=0.0)]
    for i, (target, vis) in enumerate(zip(BAND_TARGETS, visibles)):
        plain = StateSpec(
            code=2 + i,
            name=f"state{2 + i:02d}",
            attendees=round(vis / factor),
            market_share=share,
            theta=0.0,
        )
        states.append(replace(plain, theta=theta_for_target(target, plain, base)))
    return replace(base, states=states)


def representation_range_scenario(seed: int = 1) -> ScenarioConfig:
    """~2e6 attendees; visiting shares span 0.018% to 7.45% of the total.

    Sized so the smallest state still has ~46 visible customers, keeping
    quota rounding below a 10% relative error on every recovered share.
    Meant for table-only generation (skip placements and presence).
    """
    total = 2_000_000
    w_low, w_high = 1.8e-4, 7.45e-2
    n_visit = 22
    ratio = (w_high / w_low) ** (1.0 / (n_visit - 1))
    w = [w_low * ratio ** i for i in range(n_visit)]
    host_w = 1.0 - sum(w)
    states = [StateSpec(1, "host", round(host_w * total), 0.25,
                        is_local=True, theta=0.0)]
    for i, wi in enumerate(w):
        states.append(StateSpec(
            code=2 + i,
            name=f"state{2 + i:02d}",
            attendees=round(wi * total),
            market_share=0.2 + 0.02 * (i % 11),
            theta=0.0,
        ))
    return ScenarioConfig(seed=seed, states=states)


def named_scenario(name: str, seed: int = 1) -> ScenarioConfig:
    factories = {
        "desk": lambda: desk_scenario(seed),
        "desk-small": lambda: desk_scenario(seed, scale=0.12),
        "band": lambda: band_scenario(seed),
        "representation-range": lambda: representation_range_scenario(seed),
    }
    try:
        return factories[name]()
    except KeyError:
        raise ConfigurationError(
            f"unknown scenario {name!r}; choose from {sorted(factories)}"
        ) from None
