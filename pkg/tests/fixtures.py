"""Frozen oracle values (recorded from the first computation; see the notes
next to each value for the independent check)."""

# tau plateau for m = 1/2, alpha = 1: quadrature evaluated at r = 2e4 m
# (doubling from 1e4 m changes it by 4.0e-5).  The w -> 1 limit of the exact
# polynomial form of tau is -alpha / (5 m^2) = -0.8.
TAU_O_QUADRATURE = -0.7999599989999501
TAU_O_LIMIT = -0.8

# closed-form tau at m = 1/2, alpha = 1, checked against the polynomial
# (alpha / (32 m^2)) (-2 - 6w + 2w^2 - 0.4w^3), w = 1 - 2m/r
TAU_AT_2 = -0.56875
TAU_AT_5 = -0.7156

# horizon slope d tau / dr at r = 2m for m = 1/2, alpha = 1 (second
# coefficient of the regular series; equals 3 tau(2m) / (2m))
TAU_SLOPE_AT_HORIZON = -0.75
