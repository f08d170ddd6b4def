"""Sweeps over network size, log-log exponent fits and the bound sandwich."""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .channel import AbsorptionProfile, FrequencySchedule, LogValue
from .cutset import ergodic_capacity_mc
from .errors import ConfigError, UsageError, UwcapError
from .mh import random_mh_throughput, regular_mh_analytic, regular_mh_simulated
from .topology import build_random, build_regular, sample_matching, vertical_cut

log = logging.getLogger(__name__)

MODES = ("cutset", "mh_regular", "mh_random")

# one column order for every row kind; cells that do not apply are NaN
COLUMNS = (
    "n", "mode", "f_khz", "ln_a", "ln_N", "alpha",
    "sum_dL_ln", "mc_logdet_bits", "trace_bound_bits", "sv_estimate",
    "mc_logdet_ln", "trace_bound_ln",
    "duty_ln", "per_pair_rate_bits", "active_sources",
    "total_ln", "total_bits", "sim_total_ln", "unroutable_fraction",
    "trials", "seed", "status",
)


@dataclass(frozen=True)
class SweepConfig:
    n_list: tuple
    schedule: FrequencySchedule = field(default_factory=FrequencySchedule)
    profile: AbsorptionProfile = field(default_factory=AbsorptionProfile)
    P: float = 1.0
    trials: int = 8
    seed: int = 0
    modes: tuple = MODES
    mh_seeds: int = 10

    def __post_init__(self):
        n_list = tuple(int(n) for n in self.n_list)
        if not n_list:
            raise ConfigError("n_list must not be empty")
        if any(b <= a for a, b in zip(n_list, n_list[1:])):
            raise ConfigError(f"n_list must be strictly increasing, got {list(n_list)}")
        object.__setattr__(self, "n_list", n_list)
        modes = tuple(self.modes)
        bad = [m for m in modes if m not in MODES]
        if bad or not modes:
            raise ConfigError(f"modes must be a nonempty subset of {list(MODES)}, got {list(modes)}")
        object.__setattr__(self, "modes", modes)
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if self.mh_seeds < 1:
            raise ConfigError(f"mh_seeds must be >= 1, got {self.mh_seeds}")
        if not self.P > 0:
            raise ConfigError(f"P must be > 0, got {self.P}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}")


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    intercept: float
    r_squared: float
    points: tuple  # (log2 n, log2 metric)


def _log2_metric(m) -> float:
    if isinstance(m, LogValue):
        return m.log2_value
    m = float(m)
    return math.log2(m) if m > 0 else math.nan


def loglog_fit(points) -> ScalingFit:
    """OLS of ``log2 metric`` on ``log2 n``.

    Metrics may be plain positive numbers or LogValues; the latter avoid
    underflow for the very small rates of strongly absorbing channels.
    """
    pts = []
    for n, m in points:
        y = _log2_metric(m)
        if math.isnan(y) or y == -math.inf:
            warnings.warn(f"dropping nonpositive metric at n={n}", RuntimeWarning, stacklevel=2)
            continue
        pts.append((math.log2(n), y))
    if len(pts) < 2:
        raise UsageError("a log-log fit needs at least 2 positive points")
    x, y = np.array(pts).T
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid ** 2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return ScalingFit(float(slope), float(intercept), min(1.0, max(0.0, r2)), tuple(pts))


def row_seed(seed: int, n: int, mode: str) -> int:
    """Seed for one table row, derived from the master seed only."""
    ss = np.random.SeedSequence(seed, spawn_key=(n, MODES.index(mode)))
    return int(ss.generate_state(1, np.uint32)[0])


def _base_row(n, mode, ch, profile) -> dict:
    row = {c: math.nan for c in COLUMNS}
    row.update(n=n, mode=mode, f_khz=ch.f_khz, ln_a=ch.ln_a, ln_N=ch.ln_noise, alpha=profile.alpha,
               status="ok")
    return row


def _ln(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


def _mean_ln(ln_values) -> float:
    return float(np.logaddexp.reduce(ln_values) - math.log(len(ln_values)))


def _cutset_row(cfg: SweepConfig, n: int, threads: int) -> dict:
    ch = cfg.profile.at(cfg.schedule(n))
    seed = row_seed(cfg.seed, n, "cutset")
    est = ergodic_capacity_mc(vertical_cut(build_regular(n)), ch, cfg.P, cfg.trials, seed,
                              threads=threads)
    row = _base_row(n, "cutset", ch, cfg.profile)
    row.update(sum_dL_ln=est.sum_d_ln.ln_value, mc_logdet_bits=est.mc_logdet,
               trace_bound_bits=est.trace_bound, sv_estimate=est.sv_estimate,
               mc_logdet_ln=_ln(est.mc_logdet), trace_bound_ln=_ln(est.trace_bound),
               trials=cfg.trials, seed=seed)
    return row


def _mh_regular_row(cfg: SweepConfig, n: int) -> dict:
    ch = cfg.profile.at(cfg.schedule(n))
    seed = row_seed(cfg.seed, n, "mh_regular")
    rep = regular_mh_analytic(n, ch, cfg.P)
    sims = [regular_mh_simulated(n, ch, cfg.P, seed + s) for s in range(cfg.mh_seeds)]
    row = _base_row(n, "mh_regular", ch, cfg.profile)
    row.update(duty_ln=rep.duty_ln, per_pair_rate_bits=rep.per_pair_rate_bits,
               active_sources=rep.active_sources, total_ln=rep.total_throughput_ln.ln_value,
               total_bits=rep.total_bits,
               sim_total_ln=_mean_ln([s.total_throughput_ln.ln_value for s in sims]),
               unroutable_fraction=max(s.unroutable_fraction for s in sims),
               trials=cfg.mh_seeds, seed=seed)
    return row


def random_mh_seed_run(n: int, ch, P: float, seed: int):
    topo = build_random(n, seed)
    topo = topo.with_matching(sample_matching(n, np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1,)))))
    return random_mh_throughput(topo, ch, P)


def _mh_random_row(cfg: SweepConfig, n: int) -> dict:
    ch = cfg.profile.at(cfg.schedule(n))
    seed = row_seed(cfg.seed, n, "mh_random")
    reps = [random_mh_seed_run(n, ch, cfg.P, seed + s) for s in range(cfg.mh_seeds)]
    total_ln = _mean_ln([r.total_throughput_ln.ln_value for r in reps])
    row = _base_row(n, "mh_random", ch, cfg.profile)
    row.update(duty_ln=0.0,
               per_pair_rate_bits=math.exp(_mean_ln([r.per_pair_rate_ln.ln_value for r in reps])),
               active_sources=int(round(np.mean([r.active_sources for r in reps]))),
               total_ln=total_ln, total_bits=math.exp(total_ln),
               unroutable_fraction=max(r.unroutable_fraction for r in reps),
               trials=cfg.mh_seeds, seed=seed)
    return row


@dataclass
class ScalingTable:
    config: SweepConfig
    rows: list = field(default_factory=list)

    def select(self, mode: str) -> list:
        return sorted((r for r in self.rows if r["mode"] == mode and r["status"] == "ok"),
                      key=lambda r: r["n"])

    def failures(self) -> list:
        return [r for r in self.rows if r["status"] != "ok"]


def run_sweep(config: SweepConfig, threads: int = 1, on_row=None) -> ScalingTable:
    """One row per ``(n, mode)``, in n-major order.

    Rows are independent, so they run on a thread pool; results are
    collected in a fixed order and passed to ``on_row`` as they complete in
    that order. A failing row is recorded with its error and the sweep goes
    on, unless more than half the rows fail.
    """
    jobs = [(n, m) for n in config.n_list for m in MODES if m in config.modes]

    def one(job):
        n, mode = job
        try:
            if mode == "cutset":
                return _cutset_row(config, n, 1)
            if mode == "mh_regular":
                return _mh_regular_row(config, n)
            return _mh_random_row(config, n)
        except (UwcapError, ValueError, ArithmeticError) as exc:
            log.warning("row n=%d mode=%s failed: %s", n, mode, exc)
            ch = config.profile.at(config.schedule(n))
            row = _base_row(n, mode, ch, config.profile)
            row["status"] = f"error: {type(exc).__name__}: {exc}"
            return row

    table = ScalingTable(config)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        for row in pool.map(one, jobs):
            table.rows.append(row)
            if on_row is not None:
                on_row(row)
    if len(table.failures()) * 2 > len(table.rows):
        raise UwcapError(f"{len(table.failures())} of {len(table.rows)} sweep rows failed")
    return table


@dataclass(frozen=True)
class SandwichReport:
    passed: bool
    violations: tuple  # (n, description)
    gap_fit: ScalingFit | None


def sandwich_check(table: ScalingTable, analytic_tol: float = 1e-6, simulated_tol: float = 0.05) -> SandwichReport:
    """MH total <= MC log-det <= trace bound at every n, plus the gap exponent.

    The gap exponent is the fitted slope of ``trace_bound / mh_total``.
    """
    cut = {r["n"]: r for r in table.select("cutset")}
    mh = {r["n"]: r for r in table.select("mh_regular")}
    common = sorted(set(cut) & set(mh))
    if not common:
        raise UsageError("sandwich check needs cutset and mh_regular rows at the same n")
    la, ls = math.log1p(analytic_tol), math.log1p(simulated_tol)
    bad = []
    for n in common:
        c, m = cut[n], mh[n]
        if not m["total_ln"] <= c["mc_logdet_ln"] + la:
            bad.append((n, "analytic MH total exceeds MC log-det"))
        if not math.isnan(m["sim_total_ln"]) and not m["sim_total_ln"] <= c["mc_logdet_ln"] + ls:
            bad.append((n, "simulated MH total exceeds MC log-det"))
        if not c["mc_logdet_ln"] <= c["trace_bound_ln"] + la:
            bad.append((n, "MC log-det exceeds trace bound"))
    gap = None
    if len(common) >= 2:
        gap = loglog_fit([(n, LogValue(cut[n]["trace_bound_ln"] - mh[n]["total_ln"])) for n in common])
    return SandwichReport(not bad, tuple(bad), gap)


def metric_fit(rows, ln_metric) -> ScalingFit:
    """Fit ``ln_metric(row)`` (a natural log) against ``n``."""
    return loglog_fit([(r["n"], LogValue(ln_metric(r))) for r in rows])


def normalized_fit(rows, ln_column: str) -> ScalingFit:
    """Slope of ``metric * a(f) N(f)``, which removes the frequency dependence."""
    return metric_fit(rows, lambda r: r[ln_column] + r["ln_a"] + r["ln_N"])


def sv_fit(rows) -> ScalingFit:
    return loglog_fit([(r["n"], r["sv_estimate"]) for r in rows])


__all__ = [
    "COLUMNS", "MODES", "SandwichReport", "ScalingFit", "ScalingTable", "SweepConfig",
    "loglog_fit", "metric_fit", "normalized_fit", "random_mh_seed_run", "row_seed", "run_sweep",
    "sandwich_check", "sv_fit",
]
