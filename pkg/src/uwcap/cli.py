"""Command-line front end: ``uwcap {channel,cutset,mh,sweep,check}``.

Every flag can also come from an environment variable: ``UWCAP_CONFIG``,
``UWCAP_SEED``, ``UWCAP_OUT``, ``UWCAP_FORMAT`` and ``UWCAP_THREADS``.
Flags win over the environment, which wins over the config file.

Exit codes: 0 ok, 1 failed check, 2 usage, 3 configuration or domain error,
4 resource or I/O error, 5 numerical or routing failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import os
import sys
from pathlib import Path

from .acceptance import CHECK_COLUMNS, RANDOM_COLUMNS, Acceptance
from .channel import absorption_db_per_km
from .cutset import ergodic_capacity_mc
from .errors import UsageError, UwcapError
from .io import (LoadedConfig, RunManifest, build_config, default_config_path, emit_results,
                 format_float, parse_config)
from .mh import random_mh_throughput, regular_mh_analytic, regular_mh_simulated
from .scaling import COLUMNS, normalized_fit, run_sweep, sandwich_check, sv_fit
from .topology import build_random, build_regular, sample_matching, vertical_cut

log = logging.getLogger("uwcap")

ENV_PREFIX = "UWCAP_"
CUTSET_COLUMNS = ("n", "f_khz", "ln_a", "ln_N", "alpha", "sum_dL_ln", "mc_logdet_bits",
                  "trace_bound_bits", "sv_estimate", "trials", "seed")
MH_COLUMNS = ("n", "placement", "f_khz", "mode", "duty_ln", "per_pair_rate_bits",
              "active_sources", "total_bits", "total_ln", "unroutable_fraction", "seed")
DEFAULT_RADII = (1.0, 2.0, 5.0, 10.0)


def _env(name, cast=str):
    raw = os.environ.get(ENV_PREFIX + name)
    if raw is None or raw == "":
        return None
    try:
        return cast(raw)
    except ValueError:
        raise UsageError(f"{ENV_PREFIX}{name}={raw!r} is not a valid {cast.__name__}") from None


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise ValueError(text)
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="config file (default: shipped config)")
    common.add_argument("--seed", type=_u64, help="master seed, overrides the config")
    common.add_argument("--out", type=Path, help="output directory (default: uwcap-out)")
    common.add_argument("--format", choices=("csv", "json"), help="result format (default csv)")
    common.add_argument("--threads", type=int, help="worker threads, 0 = one per CPU")

    parser = argparse.ArgumentParser(prog="uwcap", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("channel", parents=[common], help="absorption, noise and attenuation tables")
    p.add_argument("--f", type=float, nargs="+", default=[1.0, 10.0, 100.0], metavar="KHZ")
    p.add_argument("--r", type=float, nargs="+", default=list(DEFAULT_RADII), metavar="UNITS")

    p = sub.add_parser("cutset", parents=[common], help="cut-set estimate for one regular network")
    p.add_argument("--n", type=int, help="network size (default: first n in the config)")
    p.add_argument("--trials", type=int, help="Monte Carlo trials (default: config)")

    p = sub.add_parser("mh", parents=[common], help="multi-hop throughput for one network")
    p.add_argument("--n", type=int, help="network size (default: first n in the config)")
    p.add_argument("--placement", choices=("regular", "random"), default="regular")

    sub.add_parser("sweep", parents=[common], help="scaling sweep with exponent fits")
    sub.add_parser("check", parents=[common], help="run every acceptance check")
    return parser


@dataclasses.dataclass
class Context:
    args: argparse.Namespace
    config: LoadedConfig
    seed: int
    out: Path
    fmt: str
    threads: int

    def path(self, stem: str) -> Path:
        return self.out / f"{stem}.{self.fmt}"

    def manifest(self, outputs: dict) -> RunManifest:
        m = RunManifest(self.args.command, self.config.values, self.seed,
                        outputs={k: str(v) for k, v in outputs.items()})
        m.write(self.out / f"manifest_{self.args.command}.json")
        return m


def _resolve(args) -> Context:
    config_path = args.config or _env("CONFIG", Path) or default_config_path()
    config = parse_config(config_path)
    seed = args.seed if args.seed is not None else _env("SEED", _u64)
    if seed is not None:
        values = dict(config.values)
        values["seed"] = seed
        config = build_config(values)
    threads = args.threads if args.threads is not None else _env("THREADS", int)
    if threads is None:
        threads = config.threads
    if threads < 0:
        raise UsageError("--threads must be >= 0")
    if threads == 0:
        threads = os.cpu_count() or 1
    fmt = args.format or _env("FORMAT") or "csv"
    if fmt not in ("csv", "json"):
        raise UsageError(f"format must be csv or json, got {fmt!r}")
    out = args.out or _env("OUT", Path) or Path("uwcap-out")
    return Context(args, config, config.sweep.seed, out, fmt, threads)


def _emit(ctx: Context, stem: str, rows, columns) -> Path:
    path = ctx.path(stem)
    emit_results(rows, ctx.fmt, path, columns)
    return path


def cmd_channel(ctx: Context) -> int:
    prof = ctx.config.profile
    radii = ctx.args.r
    if any(not r > 0 for r in radii):
        raise UsageError("distances must be > 0")
    cols = ["f_khz", "absorption_db_per_km", "ln_a", "noise_db", "ln_N"] + [f"ln_A_r{r:g}" for r in radii]
    rows = []
    for f in ctx.args.f:
        ch = prof.at(f)
        row = {"f_khz": f, "absorption_db_per_km": absorption_db_per_km(prof, f), "ln_a": ch.ln_a,
               "noise_db": ch.ln_noise * 10 / math.log(10), "ln_N": ch.ln_noise}
        row.update({c: float(ch.ln_attenuation(r)) for c, r in zip(cols[5:], radii)})
        rows.append(row)
    ctx.manifest({"channel": ctx.path("channel")})
    _emit(ctx, "channel", rows, cols)
    print(f"unit = {prof.unit_km:g} km, alpha = {prof.alpha:g}, c0 = {prof.c0:g}")
    print("  ".join(f"{c:>20}" for c in cols))
    for row in rows:
        print("  ".join(f"{row[c]:>20.10g}" for c in cols))
    return 0


def _single_n(ctx: Context) -> int:
    return ctx.args.n if ctx.args.n is not None else ctx.config.sweep.n_list[0]


def cmd_cutset(ctx: Context) -> int:
    cfg = ctx.config.sweep
    n = _single_n(ctx)
    trials = ctx.args.trials if ctx.args.trials is not None else cfg.trials
    ch = cfg.profile.at(cfg.schedule(n))
    est = ergodic_capacity_mc(vertical_cut(build_regular(n)), ch, cfg.P, trials, ctx.seed,
                              threads=ctx.threads)
    row = {"n": n, "f_khz": ch.f_khz, "ln_a": ch.ln_a, "ln_N": ch.ln_noise, "alpha": ch.alpha,
           "sum_dL_ln": est.sum_d_ln.ln_value, "mc_logdet_bits": est.mc_logdet,
           "trace_bound_bits": est.trace_bound, "sv_estimate": est.sv_estimate,
           "trials": trials, "seed": ctx.seed}
    ctx.manifest({"cutset": ctx.path("cutset")})
    _emit(ctx, "cutset", [row], CUTSET_COLUMNS)
    print(" ".join(f"{c}={format_float(v) if isinstance(v, float) else v}" for c, v in row.items()))
    if not est.chain_holds():
        print("bound chain violated", file=sys.stderr)
        return 1
    return 0


def _mh_row(rep, placement: str) -> dict:
    return {"n": rep.n, "placement": placement, "f_khz": rep.f_khz, "mode": rep.mode.value,
            "duty_ln": rep.duty_ln, "per_pair_rate_bits": rep.per_pair_rate_bits,
            "active_sources": rep.active_sources, "total_bits": rep.total_bits,
            "total_ln": rep.total_throughput_ln.ln_value,
            "unroutable_fraction": rep.unroutable_fraction,
            "seed": "" if rep.seed is None else rep.seed}


def cmd_mh(ctx: Context) -> int:
    cfg = ctx.config.sweep
    n = _single_n(ctx)
    ch = cfg.profile.at(cfg.schedule(n))
    if ctx.args.placement == "regular":
        reps = [regular_mh_analytic(n, ch, cfg.P), regular_mh_simulated(n, ch, cfg.P, ctx.seed)]
    else:
        topo = build_random(n, ctx.seed)
        topo = topo.with_matching(sample_matching(n, ctx.seed + 1))
        reps = [random_mh_throughput(topo, ch, cfg.P)]
    rows = [_mh_row(r, ctx.args.placement) for r in reps]
    ctx.manifest({"mh": ctx.path("mh")})
    _emit(ctx, "mh", rows, MH_COLUMNS)
    for row in rows:
        print(f"{row['mode']}: total = exp({row['total_ln']:.6f}) bits, "
              f"active sources = {row['active_sources']}")
    return 0


def _fit_dict(fit) -> dict:
    return {"slope": fit.slope, "intercept": fit.intercept, "r_squared": fit.r_squared}


def cmd_sweep(ctx: Context) -> int:
    cfg = ctx.config.sweep
    ctx.manifest({"table": ctx.path("sweep"), "summary": ctx.out / "sweep_summary.json"})
    table = run_sweep(cfg, ctx.threads, on_row=lambda r: log.info("row n=%s mode=%s %s",
                                                                  r["n"], r["mode"], r["status"]))
    _emit(ctx, "sweep", table.rows, COLUMNS)
    summary: dict = {"failures": len(table.failures())}
    cut, mh = table.select("cutset"), table.select("mh_regular")
    ok = True
    if len(cut) >= 2:
        summary["cutset_exponent"] = _fit_dict(normalized_fit(cut, "trace_bound_ln"))
        summary["sv_exponent"] = _fit_dict(sv_fit(cut))
    if len(mh) >= 2:
        summary["mh_exponent"] = _fit_dict(normalized_fit(mh, "total_ln"))
    if cut and mh:
        rep = sandwich_check(table)
        ok = rep.passed
        summary["sandwich"] = {"passed": rep.passed,
                               "violations": [list(v) for v in rep.violations],
                               "gap_exponent": _fit_dict(rep.gap_fit) if rep.gap_fit else None}
    (ctx.out / "sweep_summary.json").write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    print(json.dumps(summary, sort_keys=True, indent=2))
    return 0 if ok else 1


def cmd_check(ctx: Context) -> int:
    outputs = {"checks": ctx.path("check"), "sweep": ctx.path("sweep"),
               "random": ctx.path("random")}
    ctx.manifest(outputs)
    acc = Acceptance(ctx.config, ctx.threads)
    results = acc.run_all(ctx.out)
    _emit(ctx, "check", [r.row() for r in results], CHECK_COLUMNS)
    _emit(ctx, "sweep", acc.sweep_rows, COLUMNS)
    _emit(ctx, "random", acc.random_rows, RANDOM_COLUMNS)
    for r in results:
        print(r.line())
    for name, secs in acc.timings.items():
        log.info("runtime %s %.1fs", name, secs)
    failed = [r.key for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed"
          + (f"; failed: {', '.join(failed)}" if failed else ""))
    return 1 if failed else 0


COMMANDS = {"channel": cmd_channel, "cutset": cmd_cutset, "mh": cmd_mh,
            "sweep": cmd_sweep, "check": cmd_check}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)
    try:
        ctx = _resolve(args)
        return COMMANDS[args.command](ctx)
    except UwcapError as exc:
        print(f"uwcap {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except MemoryError as exc:
        print(f"uwcap {args.command}: out of memory: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"uwcap {args.command}: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
