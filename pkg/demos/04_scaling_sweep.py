"""
Scaling exponents from a small sweep
====================================

Both the cut-set bound and the multi-hop throughput, once multiplied by
a(f) N(f), should grow like n^(1/2) when f grows like n^(1/4).
"""

from uwcap.channel import AbsorptionProfile, FrequencySchedule
from uwcap.scaling import SweepConfig, normalized_fit, run_sweep, sandwich_check, sv_fit

cfg = SweepConfig(
    n_list=(64, 256, 1024),
    schedule=FrequencySchedule.power_law(1.0, 0.25),
    profile=AbsorptionProfile(unit_km=500.0),
    trials=4,
    seed=3,
    modes=("cutset", "mh_regular"),
    mh_seeds=3,
)
table = run_sweep(cfg)

cut = table.select("cutset")
mh = table.select("mh_regular")
print("cut-set slope      ", round(normalized_fit(cut, "trace_bound_ln").slope, 4))
print("multi-hop slope    ", round(normalized_fit(mh, "total_ln").slope, 4))
print("||F||^2 slope      ", round(sv_fit(cut).slope, 4))

rep = sandwich_check(table)
print("sandwich holds     ", rep.passed)
print("gap exponent       ", round(rep.gap_fit.slope, 6))
