"""Shared numerical tolerances."""

# analytic identities (norms, overlaps, unitarity, closed-form probabilities)
TOL = 1e-12

# a branch whose probability is below this is treated as impossible
# (amplitude magnitude below TOL)
PROB_FLOOR = TOL * TOL
