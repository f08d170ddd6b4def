"""
Nearest-neighbour multi-hop
===========================

Bursty transmission spends a fraction 1/(a N) of the time at power a N P.
Interference from the rings of other cells then stays a constant multiple
of the noise, and each hop runs at a constant SINR.
"""

import numpy as np

from uwcap.channel import AbsorptionProfile
from uwcap.mh import (interference_total, random_mh_simulation, regular_mh_analytic,
                      regular_mh_simulated)
from uwcap.topology import build_random, sample_matching

prof = AbsorptionProfile(unit_km=500.0)

for f in (1.0, 5.0, 10.0, 50.0):
    ch = prof.at(f)
    i_over_n = np.exp(interference_total(ch, 1.0, 50).total.ln_value - ch.ln_noise)
    print(f"f = {f:5.1f} kHz: interference / noise = {i_over_n:.5f}")

print("\n    n   analytic ln T   simulated ln T (3 seeds)")
for n in (64, 256, 1024):
    ch = prof.at(n ** 0.25)
    a = regular_mh_analytic(n, ch, 1.0)
    sims = [regular_mh_simulated(n, ch, 1.0, s).total_throughput_ln.ln_value for s in range(3)]
    print(f"{n:5d}   {a.total_throughput_ln.ln_value:12.4f}   " + "  ".join(f"{s:9.4f}" for s in sims))

# Random layouts need cells of area about 2 ln n to stay connected; hops get
# longer and absorption punishes every extra unit of distance.
n = 1024
ch = prof.at(n ** 0.25)
topo = build_random(n, 7).with_matching(sample_matching(n, 8))
sim = random_mh_simulation(topo, ch, 1.0)
rep = sim.report
print(f"\nrandom n={n}: ln T = {rep.total_throughput_ln.ln_value:.2f}, "
      f"longest hop {rep.max_hop_distance:.2f} units, busiest cell carries {sim.cell_load.max()} hops")
