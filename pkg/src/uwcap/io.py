"""Configuration files, run manifests and result serialisation.

Config files are flat ``key = value`` lines with dotted section names::

    n_list = [64, 256, 1024, 4096]
    schedule.kind = power_law
    profile.unit_km = 500.0

Values are Python literals; a bare word is read as a string. ``#`` starts a
comment.
"""

from __future__ import annotations

import ast
import csv
import dataclasses
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from importlib import metadata, resources
from pathlib import Path

from .channel import AbsorptionProfile, FrequencySchedule
from .errors import ConfigError, UwcapError
from .scaling import MODES, SweepConfig

PROFILE_KEYS = tuple(f.name for f in dataclasses.fields(AbsorptionProfile))

DEFAULTS = {
    "schedule.c_f": 1.0,
    "P": 1.0,
    "trials": 8,
    "seed": 0,
    "modes": list(MODES),
    "mh_seeds": 10,
    "threads": 1,
    **{f"profile.{k}": getattr(AbsorptionProfile(), k) for k in PROFILE_KEYS},
}
REQUIRED = ("n_list", "schedule.kind")
OPTIONAL = ("schedule.gamma_f",)
KNOWN = set(DEFAULTS) | set(REQUIRED) | set(OPTIONAL)

_TYPES = {
    "n_list": list, "modes": list, "schedule.kind": str,
    "trials": int, "seed": int, "mh_seeds": int, "threads": int,
}


class IOFailure(UwcapError, OSError):
    exit_code = 4


def default_config_path() -> Path:
    return Path(str(resources.files("uwcap") / "data" / "default.cfg"))


def _parse_value(raw: str):
    try:
        return ast.literal_eval(raw)
    except (ValueError, SyntaxError):
        if raw.replace("_", "").isalnum():
            return raw
        raise ConfigError(f"cannot parse value {raw!r}") from None


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Key/value pairs of a config file; unknown and repeated keys are errors."""
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if not sep or not key:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        if key not in KNOWN:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        values[key] = _parse_value(raw)
    return values


def _check_type(key, value):
    want = _TYPES.get(key, float)
    if want is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    elif want is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif want is list:
        ok = isinstance(value, (list, tuple))
    else:
        ok = isinstance(value, want)
    if not ok:
        raise ConfigError(f"key {key!r} expects {want.__name__}, got {value!r}")


@dataclass(frozen=True)
class LoadedConfig:
    sweep: SweepConfig
    threads: int
    values: dict  # every key after defaults, as echoed in the manifest

    @property
    def profile(self) -> AbsorptionProfile:
        return self.sweep.profile


def build_config(values: dict) -> LoadedConfig:
    for key in REQUIRED:
        if key not in values:
            raise ConfigError(f"missing required key {key!r}")
    merged = {**DEFAULTS, **values}
    for key, value in merged.items():
        if key != "schedule.gamma_f" or value is not None:
            _check_type(key, value)
    profile = AbsorptionProfile(**{k: merged[f"profile.{k}"] for k in PROFILE_KEYS})
    schedule = FrequencySchedule(merged["schedule.kind"], merged["schedule.c_f"],
                                 merged.get("schedule.gamma_f"))
    merged["schedule.gamma_f"] = schedule.gamma_f
    if merged["threads"] < 0:
        raise ConfigError(f"threads must be >= 0, got {merged['threads']}")
    sweep = SweepConfig(
        n_list=tuple(merged["n_list"]), schedule=schedule, profile=profile, P=float(merged["P"]),
        trials=merged["trials"], seed=merged["seed"], modes=tuple(merged["modes"]),
        mh_seeds=merged["mh_seeds"],
    )
    return LoadedConfig(sweep, merged["threads"], dict(sorted(merged.items())))


def parse_config(path) -> LoadedConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return build_config(parse_config_text(text, str(path)))


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int
    version: str = field(default_factory=tool_version)
    outputs: dict = field(default_factory=dict)

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(_canonical(self.config).encode()).hexdigest()

    def to_dict(self) -> dict:
        return {"command": self.command, "config_hash": self.config_hash, "seed": self.seed,
                "version": self.version, "config": self.config, "outputs": self.outputs}

    def write(self, path) -> None:
        _write_text(path, json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n")


def _write_text(path, text: str) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from exc


def format_float(x: float) -> str:
    return "%.17g" % x


def _cell(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return format_float(v)
    if hasattr(v, "value") and isinstance(getattr(v, "value"), str):  # enums
        return v.value
    return str(v)


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if hasattr(v, "value") and isinstance(getattr(v, "value"), str):
        return v.value
    return v


def emit_results(rows, fmt: str, path, columns=None) -> None:
    """Write rows (dicts) as CSV or JSON in a fixed column order.

    Floats use 17 significant digits so they round-trip exactly. With no rows
    and explicit ``columns`` the CSV is a header line alone.
    """
    rows = list(rows)
    if columns is None:
        if not rows:
            raise UwcapError("column order needed to write an empty result set")
        columns = list(rows[0])
    columns = list(columns)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        writer.writerows([_cell(r.get(c, math.nan)) for c in columns] for r in rows)
        _write_text(path, buf.getvalue())
    elif fmt == "json":
        data = [{c: _json_value(r.get(c, math.nan)) for c in columns} for r in rows]
        _write_text(path, json.dumps(data, indent=1) + "\n")
    else:
        raise ConfigError(f"format must be csv or json, got {fmt!r}")


def _parse_cell(s: str):
    for conv in (int, float):
        try:
            return conv(s)
        except ValueError:
            pass
    return s


def read_results(path) -> list[dict]:
    """Read a CSV or JSON file written by :func:`emit_results`."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise IOFailure(f"cannot read {path}: {exc}") from exc
    if path.suffix == ".json":
        rows = json.loads(text)
        special = {"inf": math.inf, "-inf": -math.inf}
        return [{k: math.nan if v is None else special.get(v, v) if isinstance(v, str) else v
                 for k, v in r.items()} for r in rows]
    reader = csv.DictReader(text.splitlines())
    return [{k: _parse_cell(v) for k, v in r.items()} for r in reader]
