"""Run configuration: a flat ``key = value`` file plus command-line overrides.

Keys may be written with ``_`` or ``-``.  Unknown keys and malformed
values raise :class:`ConfigError`.
"""

import math
from dataclasses import dataclass

ALGOS = ("joint-rwm", "single-rwm", "extra-fast", "random-grid", "ensemble-chol", "ensemble-eig")
MEASURES = ("independent", "exchangeable", "grid", "chain")
PATHS = ("auto", "chol", "eig", "direct")
EIGENSOLVERS = ("lapack", "jacobi")


class ConfigError(ValueError):
    pass


def _bool(s):
    if isinstance(s, bool):
        return s
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _opt_int(s):
    if s is None or str(s).strip().lower() in ("", "none"):
        return None
    return int(s)


@dataclass(frozen=True)
class KeySpec:
    name: str
    parse: object
    default: object
    help: str
    choices: tuple = None


KEYS = (
    KeySpec("data", str, None, "dataset CSV (columns z1..zp,y)"),
    KeySpec("seed", int, 1, "chain random seed"),
    KeySpec("stream", int, 0, "chain random stream id"),
    KeySpec("algo", str, "ensemble-eig", "sampler", ALGOS),
    KeySpec("measure", str, "grid", "ensemble base measure", MEASURES),
    KeySpec("K", int, 49, "ensemble size (grid: a perfect power of the number of fast variables)"),
    KeySpec("budget", int, 300000, "slow evaluations to spend"),
    KeySpec("thin", _opt_int, None, "record every THIN iterations (instead of thin_records)"),
    KeySpec("thin_records", _opt_int, 1000, "number of records at equal slow-evaluation spacing"),
    KeySpec("path", str, "auto", "likelihood computation: chol, eig, direct (all slow) or auto", PATHS),
    KeySpec("eigensolver", str, "lapack", "eigen path solver", EIGENSOLVERS),
    KeySpec("center", _bool, True, "center responses at load time"),
    KeySpec("s", float, 0.25, "joint random-walk proposal sd"),
    KeySpec("nu_sd", float, 2.0, "single-variable proposal sd for log nu"),
    KeySpec("psi_sd", float, 0.6, "single-variable proposal sd for log psi"),
    KeySpec("fast_sd", float, 0.6, "single-variable proposal sd for log eta and log sigma"),
    KeySpec("extra", int, 49, "extra fast updates per iteration (extra-fast)"),
    KeySpec("drag", int, 10, "Metropolis updates per random-grid step"),
    KeySpec("grid_slow_sd", float, 0.5, "random-grid slow displacement sd"),
    KeySpec("shift_sd", float, 0.0, "ensemble fast shift sd; 0 keeps fast members fixed"),
    KeySpec("hold", int, 1, "ensemble sweeps between regenerations"),
    KeySpec("exch_spread", float, 0.4, "exchangeable spread, as a multiple of the prior sd"),
    KeySpec("chain_step", float, 0.1, "chain step sd, as a multiple of the prior sd"),
    KeySpec("grid_extent", float, 1.0, "grid total extent, as a multiple of the prior sd"),
    KeySpec("grid_jitter", float, 1.1, "upper end of the uniform grid extent factor (lower end 1)"),
    KeySpec("init_log_nu", float, None, "initial log nu (all coordinates); default prior mean"),
    KeySpec("init_log_eta", float, None, "initial log eta; default prior mean"),
    KeySpec("init_log_sigma", float, None, "initial log sigma; default prior mean"),
    KeySpec("mode_threshold", float, math.log(0.25), "log sigma threshold separating the modes"),
)
KEY_INDEX = {k.name: k for k in KEYS}


def normalize_key(raw: str) -> str:
    k = raw.strip().replace("-", "_")
    if k == "k":
        k = "K"
    if k not in KEY_INDEX:
        raise ConfigError(f"unknown key {raw.strip()!r}")
    return k


def parse_value(key: str, raw):
    spec = KEY_INDEX[key]
    if raw is None:
        return None
    try:
        v = spec.parse(raw.strip() if isinstance(raw, str) else raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from None
    if spec.choices and v not in spec.choices:
        raise ConfigError(f"{key} must be one of {', '.join(spec.choices)}; got {v!r}")
    return v


def parse_config_text(text: str, origin: str = "<config>") -> dict:
    out = {}
    for num, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{num}: expected 'key = value'")
        k, v = line.split("=", 1)
        try:
            key = normalize_key(k)
        except ConfigError as exc:
            raise ConfigError(f"{origin}:{num}: {exc}") from None
        out[key] = parse_value(key, v)
    return out


def read_config(path) -> dict:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text, str(path))


def resolve(*layers) -> dict:
    """Defaults overlaid with each layer in turn; then cross-key validation."""
    cfg = {k.name: k.default for k in KEYS}
    for layer in layers:
        for k, v in layer.items():
            cfg[normalize_key(k)] = v
    validate(cfg)
    return cfg


def validate(cfg: dict):
    if cfg["budget"] < 1:
        raise ConfigError("budget must be at least 1")
    if cfg["K"] < 2:
        raise ConfigError("K must be at least 2")
    if cfg["thin"] is not None and cfg["thin"] < 1:
        raise ConfigError("thin must be positive")
    if cfg["thin_records"] is not None and cfg["thin_records"] < 1:
        raise ConfigError("thin_records must be positive")
    for k in ("s", "nu_sd", "psi_sd", "fast_sd", "grid_slow_sd", "exch_spread", "chain_step", "grid_extent"):
        if not cfg[k] > 0:
            raise ConfigError(f"{k} must be positive")
    if cfg["shift_sd"] < 0:
        raise ConfigError("shift_sd must be non-negative")
    if cfg["grid_jitter"] < 1:
        raise ConfigError("grid_jitter must be at least 1")
    if cfg["extra"] < 0 or cfg["drag"] < 0 or cfg["hold"] < 1:
        raise ConfigError("extra and drag must be non-negative and hold positive")
    algo, path = cfg["algo"], cfg["path"]
    if algo == "ensemble-chol" and path not in ("auto", "chol"):
        raise ConfigError("ensemble-chol uses the chol path")
    if algo == "ensemble-eig" and path not in ("auto", "eig"):
        raise ConfigError("ensemble-eig uses the eig path")
    if cfg["data"] is None:
        raise ConfigError("no dataset given (key 'data')")


def effective_path(cfg: dict) -> str:
    if cfg["path"] != "auto":
        return cfg["path"]
    return {"joint-rwm": "direct", "ensemble-chol": "chol"}.get(cfg["algo"], "eig")


def describe_keys() -> str:
    lines = []
    for k in KEYS:
        choice = f" [{'|'.join(k.choices)}]" if k.choices else ""
        lines.append(f"  {k.name:<15} {k.help}{choice} (default {k.default})")
    return "\n".join(lines)
