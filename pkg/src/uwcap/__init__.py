"""Capacity scaling of underwater acoustic networks.

The package is organised bottom-up:

- ``channel``: absorption, noise and attenuation laws in log domain
- ``topology``: regular and random layouts, routing cells, the vertical cut
- ``cutset``: power transfer across the cut and Monte Carlo cut-set estimates
- ``mh``: nearest-neighbour multi-hop throughput, analytic and simulated
- ``scaling``: sweeps over n, log-log fits and the bound sandwich
- ``io`` and ``cli``: configuration, result files and the ``uwcap`` command
"""

from .channel import (AbsorptionProfile, ChannelState, FrequencySchedule, LogValue, Regime,
                      absorption_db_per_km, absorption_ln_per_unit, attenuation_ln,
                      log_sum_exp, noise_psd_ln, regime_classify)
from .cutset import (CutCapacityEstimate, ergodic_capacity_mc, largest_sv_mc,
                     cut_set_bound, power_transfer_envelope, power_transfer_exact,
                     theorem1_bound)
from .errors import (ConfigError, DomainError, NumericalError, RegimeError, ResourceError,
                     RoutingError, UsageError, UwcapError)
from .mh import (ThroughputReport, bursty_params, interference_total, per_hop_sinr,
                 random_mh_throughput, regular_mh_analytic, regular_mh_simulated,
                 regular_mh_throughput, route_mh)
from .scaling import SweepConfig, loglog_fit, run_sweep, sandwich_check
from .topology import (Topology, build_random, build_regular, displace_to_vertices,
                       routing_grid, sample_matching, vertical_cut)

__version__ = "0.1.0"
