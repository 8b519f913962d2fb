"""Run configuration: an INI file with named sections and ``key = value`` pairs.

Every key has a default; :func:`resolve` returns a plain nested dict with all
defaults filled in, which is what gets echoed to ``run.json``.
"""

from __future__ import annotations

import configparser
import math
from pathlib import Path
from typing import Any

from .errors import RimError

COMMANDS = ("simulate-linear", "lyapunov", "dichotomy", "manifold", "validate", "spde-compare")


class ConfigError(RimError, ValueError):
    """Invalid configuration; the message starts with the offending field path."""


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(",", " ").split()]


def _rows(text: str) -> list[list[float]]:
    """``1, 2 | 3, 4`` or ``1, 2; 3, 4`` -> [[1, 2], [3, 4]]."""
    text = text.replace(";", "|")
    return [_floats(r) for r in text.split("|") if r.strip()]


def _opt_float(text: str):
    return None if text.strip().lower() in ("", "auto", "none") else float(text)


def _opt_floats(text: str):
    return None if text.strip().lower() in ("", "auto", "none") else _floats(text)


def _opt_rows(text: str):
    return None if text.strip().lower() in ("", "auto", "none") else _rows(text)


def _opt_int(text: str):
    return None if text.strip().lower() in ("", "auto", "none") else int(text)


# section -> key -> (parser, default)
SCHEMA: dict[str, dict[str, tuple[Any, Any]]] = {
    "run": {"seed": (int, 0)},
    "spectral": {"J": (int, 4), "a": (float, 2.0), "mu": (_opt_floats, None)},
    "noise": {
        "nus": (_floats, [1.0]),
        "d": (_opt_rows, None),
        "d_random_seed": (_opt_int, None),
        "dt": (float, 0.01),
        "t_min": (_opt_float, None),
        "t_max": (_opt_float, None),
        "burn_in": (_opt_float, None),
    },
    "splitting": {"lambda": (float, 0.0), "epsilon_hat": (_opt_float, None)},
    "field": {
        "kind": (str, "zero"),
        "c": (float, 0.0),
        "eps": (_opt_float, None),
        "rho": (float, 1.0),
        "mixing": (str, "none"),
        "B1_tilde": (_opt_float, None),
    },
    "lp": {"T_lp": (float, 20.0), "dt_lp": (float, 0.01), "tol": (float, 1e-10), "max_iter": (int, 200)},
    "simulate": {"t": (float, 10.0), "x0": (_opt_floats, None), "dt_out": (float, 0.1)},
    "lyapunov": {"horizon": (float, 1000.0)},
    "dichotomy": {
        "horizon": (float, 50.0),
        "dt_probe": (float, 0.1),
        "orbit_horizon": (float, 200.0),
        "orbit_step": (float, 1.0),
    },
    "manifold": {"side": (str, "unstable"), "anchors": (_opt_rows, None), "n_anchors": (int, 5)},
    "validate": {"tau": (float, 1.0), "dt": (_opt_float, None), "anchors": (_opt_rows, None), "n_anchors": (int, 3)},
    "spde": {
        "t": (float, 1.0),
        "dt_levels": (_floats, [1e-2, 5e-3, 2.5e-3, 1.25e-3]),
        "seeds": (int, 4),
        "x0": (_opt_floats, None),
    },
}


def load(path: str | Path) -> dict:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    parser.optionxform = str  # keep key case
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"config: {exc}") from exc
    raw = {s: dict(parser[s]) for s in parser.sections()}
    return resolve(raw)


def resolve(raw: dict) -> dict:
    """Parse raw string values (or already-typed values) and fill defaults."""
    out: dict[str, dict[str, Any]] = {}
    for section in raw:
        if section not in SCHEMA:
            raise ConfigError(f"{section}: unknown section")
    for section, keys in SCHEMA.items():
        given = raw.get(section, {})
        for key in given:
            if key not in keys:
                raise ConfigError(f"{section}.{key}: unknown key")
        out[section] = {}
        for key, (parse, default) in keys.items():
            if key in given:
                value = given[key]
                try:
                    out[section][key] = parse(value) if isinstance(value, str) else value
                except ValueError as exc:
                    raise ConfigError(f"{section}.{key}: cannot parse {value!r} ({exc})") from exc
            else:
                out[section][key] = default
    _validate(out)
    return out


def _validate(cfg: dict) -> None:
    sp, nz = cfg["spectral"], cfg["noise"]
    J = len(sp["mu"]) if sp["mu"] is not None else sp["J"]
    if J < 2:
        raise ConfigError("spectral.J: need at least two modes")
    if sp["mu"] is not None and any(b > a for a, b in zip(sp["mu"], sp["mu"][1:])):
        raise ConfigError("spectral.mu: eigenvalues must be non-increasing")
    N = len(nz["nus"])
    if N < 1 or any(not nu > 0 for nu in nz["nus"]):
        raise ConfigError("noise.nus: need one or more positive rates")
    if nz["d"] is not None:
        if len(nz["d"]) != N or any(len(r) != J for r in nz["d"]):
            raise ConfigError(f"noise.d: expected {N} rows of {J} coefficients")
        if nz["d_random_seed"] is not None:
            raise ConfigError("noise.d_random_seed: give either d or d_random_seed, not both")
    if not nz["dt"] > 0:
        raise ConfigError("noise.dt: must be positive")
    if cfg["field"]["kind"] not in ("zero", "lipschitz_componentwise", "hoelder_radial"):
        raise ConfigError(f"field.kind: unknown kind {cfg['field']['kind']!r}")
    if cfg["field"]["mixing"] not in ("none", "sine"):
        raise ConfigError(f"field.mixing: unknown mixing {cfg['field']['mixing']!r}")
    if not cfg["field"]["rho"] > 0:
        raise ConfigError("field.rho: must be positive")
    if cfg["manifold"]["side"] not in ("unstable", "stable"):
        raise ConfigError("manifold.side: must be 'unstable' or 'stable'")
    for name in ("x0",):
        for section in ("simulate", "spde"):
            v = cfg[section][name]
            if v is not None and len(v) != J:
                raise ConfigError(f"{section}.{name}: expected {J} coefficients")
    for section, key in (("lp", "tol"), ("lp", "T_lp"), ("lp", "dt_lp"), ("lyapunov", "horizon")):
        if not cfg[section][key] > 0:
            raise ConfigError(f"{section}.{key}: must be positive")
    step = nz["dt"]
    for section, key in (
        ("lp", "dt_lp"),
        ("simulate", "dt_out"),
        ("dichotomy", "dt_probe"),
        ("dichotomy", "orbit_step"),
        ("validate", "dt"),
        ("validate", "tau"),
    ):
        v = cfg[section][key]
        if v is not None and (not v > 0 or abs(v / step - round(v / step)) > 1e-6):
            raise ConfigError(f"{section}.{key}: must be a positive multiple of noise.dt = {step:g}")
    if cfg["spde"]["seeds"] < 1:
        raise ConfigError("spde.seeds: must be >= 1")
    if not all(math.isfinite(v) and v > 0 for v in cfg["spde"]["dt_levels"]):
        raise ConfigError("spde.dt_levels: need positive steps")
