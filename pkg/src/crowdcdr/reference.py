"""Headline reference values the toolkit is calibrated against.

The methods in this package were developed for a measurement campaign at a
multi-week mass gathering, using a mobile operator's call detail records.
That raw dataset is proprietary and is not distributed here, so the numbers
it produced cannot be recomputed from shipped data.  They are recorded in
this module for two purposes:

* **Documentation** — they state the scale of output the pipeline produces
  on real data (tens of millions of attendees, strongly negative
  minority-share effects), so users can sanity-check their own runs.
* **Calibration targets** — the synthetic scenarios in :mod:`crowdcdr.synth`
  plant these values as ground truth.  ``desk_scenario`` plants
  :data:`CLOSURE_SLOPE_PER_DECADE` as the social-closure slope and uses the
  same censoring factors as :class:`crowdcdr.attendance.AdjustmentFactors`;
  ``band_scenario`` plants per-state co-location probabilities spanning
  :data:`CO_LOCATION_RANGE`.  The test suite then verifies that every
  estimator recovers its planted value, which is the strongest check
  available without the original records.

None of these constants feed into the estimators themselves; the pipeline
computes everything from its input files.
"""

from __future__ import annotations

import math

#: Estimated cumulative attendance over the full study window, after all
#: censoring corrections (operator share, non-customers, silent days,
#: single-count across days).  Persons, rounded to the nearest million.
CUMULATIVE_ATTENDANCE = 61_000_000

#: Largest single-day attendance estimate within the window (persons,
#: rounded to the nearest million).
PEAK_DAILY_ATTENDANCE = 25_000_000

#: Unique visiting handsets observed over the window before any censoring
#: correction.  This is the numerator of the sensitivity analysis in
#: ``crowdcdr attendance`` (the ``sensitivity_numerator`` config key).
UNIQUE_VISITOR_HANDSETS = 24_467_257

#: Fitted slope of triadic-closure probability on log10 of a state's
#: representation share among visitors: closure odds fall as a group's
#: share of the crowd rises, the social-homophily headline.
CLOSURE_SLOPE_PER_DECADE = -0.208

#: ``exp(CLOSURE_SLOPE_PER_DECADE)``: multiplying a state's representation
#: share by 10 multiplies the odds that an open triple is closed by this
#: factor.
CLOSURE_ODDS_RATIO_PER_DECADE = math.exp(CLOSURE_SLOPE_PER_DECADE)

#: Pearson correlation between a state's all-days co-location probability
#: (Q_A) and its mean log10 daily representation share.  Negative: smaller
#: groups cluster more in space.
CO_LOCATION_RHO_ALL_DAYS = -0.54

#: Pearson correlation between a state's high/low-attendance co-location
#: ratio (Q_D = Q_H / Q_L) and its mean log10 daily representation share.
#: Negative: smaller groups hold together more strongly on crowded days.
CO_LOCATION_RHO_DENSITY_RATIO = -0.27

#: Range of per-state all-days co-location probabilities (Q_A) observed
#: across visiting states.
CO_LOCATION_RANGE = (0.0025, 0.018)

#: Typical (central) per-state co-location probability.
CO_LOCATION_TYPICAL = 0.013

__all__ = [
    "CUMULATIVE_ATTENDANCE",
    "PEAK_DAILY_ATTENDANCE",
    "UNIQUE_VISITOR_HANDSETS",
    "CLOSURE_SLOPE_PER_DECADE",
    "CLOSURE_ODDS_RATIO_PER_DECADE",
    "CO_LOCATION_RHO_ALL_DAYS",
    "CO_LOCATION_RHO_DENSITY_RATIO",
    "CO_LOCATION_RANGE",
    "CO_LOCATION_TYPICAL",
]
