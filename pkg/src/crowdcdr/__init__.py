"""Crowd analytics from call detail records.

Estimates daily and cumulative attendance at a large venue from operator
CDRs (with censoring corrections), measures social homophily through a
same-state triple census and logistic regression, and measures spatial
homophily through Voronoi-cell co-location probabilities. A synthetic CDR
generator with planted ground truth lets every estimator be validated
end to end.
"""

__version__ = "0.1.0"
