"""Command-line entry point: ``rimkit <command> --config run.ini --out results/``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import COMMANDS, ConfigError, load, resolve
from .errors import RimError
from .linear import (
    default_epsilon,
    dichotomy_K_along_orbit,
    estimate_dichotomy,
    estimate_lyapunov,
    noisy_spec,
    propagate_linear,
)
from .lp import LPConfig, check_radius, solve_graph, verify_invariance
from .noise import paths_to_csv, temperedness_slope
from .nonlinear import NonlinearField, make_cutoff
from .spectral import SpectralModel, make_splitting, shifted_dirichlet_laplacian
from .transform import conjugation_check

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def fmt(x) -> str:
    return f"{float(x):.17g}"


def dump_json(obj, indent: int = 0) -> str:
    """JSON with floats at 17 significant digits and sorted keys."""
    pad = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dump_json(v, indent + 1)}" for k, v in sorted(obj.items())]
        return "{\n" + ",\n".join(items) + "\n" + "  " * indent + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(dump_json(v, indent + 1) for v in obj) + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt(obj) if math.isfinite(obj) else json.dumps(str(float(obj)))
    if obj is None:
        return "null"
    return json.dumps(str(obj))


def write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# building blocks from the resolved config


def build_model(cfg) -> SpectralModel:
    sp = cfg["spectral"]
    if sp["mu"] is not None:
        return SpectralModel(np.array(sp["mu"]))
    return shifted_dirichlet_laplacian(sp["J"], sp["a"])


def noise_ops(cfg, J: int) -> np.ndarray:
    nz = cfg["noise"]
    N = len(nz["nus"])
    if nz["d"] is not None:
        return np.array(nz["d"], dtype=float)
    if nz["d_random_seed"] is not None:
        return np.random.default_rng(nz["d_random_seed"]).uniform(-1.0, 1.0, (N, J))
    return np.zeros((N, J))


def window(cfg, command: str) -> tuple[float, float]:
    """Noise window needed by ``command`` unless set explicitly."""
    nz, lp = cfg["noise"], cfg["lp"]
    left, right = 0.0, 1.0
    if command == "simulate-linear":
        right = cfg["simulate"]["t"]
    elif command == "lyapunov":
        right = cfg["lyapunov"]["horizon"]
    elif command == "dichotomy":
        d = cfg["dichotomy"]
        right = d["horizon"] + d["orbit_horizon"]
    elif command == "manifold":
        right = max(lp["T_lp"], cfg["dichotomy"]["horizon"])
        left = lp["T_lp"]
    elif command == "validate":
        tau = cfg["validate"]["tau"]
        right = max(lp["T_lp"], cfg["dichotomy"]["horizon"]) + tau
        left = lp["T_lp"]
    elif command == "spde-compare":
        right = cfg["spde"]["t"]
    t_min = 0.0 - left if nz["t_min"] is None else nz["t_min"]
    t_max = right if nz["t_max"] is None else nz["t_max"]
    return t_min, t_max


def build_spec(cfg, command: str, seed: int):
    model = build_model(cfg)
    d = noise_ops(cfg, model.J)
    t_min, t_max = window(cfg, command)
    nz = cfg["noise"]
    return noisy_spec(model, d, nz["nus"], seed, t_min, t_max, nz["dt"], nz["burn_in"])


def build_field(cfg, J: int):
    f = cfg["field"]
    base = NonlinearField(f["kind"], f["c"], f["eps"], f["B1_tilde"], f["mixing"])
    return make_cutoff(base, f["rho"], dim=J)


def materialize(cfg, command: str, seed: int) -> dict:
    """Config with command-dependent defaults (window, d) written out."""
    out = json.loads(json.dumps(cfg))
    out["run"]["seed"] = seed
    t_min, t_max = window(cfg, command)
    out["noise"]["t_min"], out["noise"]["t_max"] = t_min, t_max
    model = build_model(cfg)
    out["noise"]["d"] = noise_ops(cfg, model.J).tolist()
    out["noise"]["d_random_seed"] = None
    if out["noise"]["burn_in"] is None:
        out["noise"]["burn_in"] = 5.0 / min(cfg["noise"]["nus"])
    if out["validate"]["dt"] is None:
        out["validate"]["dt"] = cfg["noise"]["dt"]
    if out["splitting"]["epsilon_hat"] is None:
        try:
            out["splitting"]["epsilon_hat"] = default_epsilon(make_splitting(model, cfg["splitting"]["lambda"]))
        except RimError as exc:
            raise ConfigError(f"splitting.lambda: {exc}") from exc
    return out


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(cfg, seed, out: Path) -> None:
    spec = build_spec(cfg, "simulate-linear", seed)
    s = cfg["simulate"]
    J = spec.model.J
    x0 = np.ones(J) if s["x0"] is None else np.array(s["x0"])
    n = round(s["t"] / s["dt_out"])
    t = np.arange(n + 1) * s["dt_out"]
    u = propagate_linear(spec, t, x0)
    (out / "paths.csv").write_text(paths_to_csv(spec.grid, spec.ou))
    write_csv(out / "trajectory.csv", ["t"] + [f"u_{m + 1}" for m in range(J)], np.column_stack([t, u]))


def cmd_lyapunov(cfg, seed, out: Path) -> None:
    spec = build_spec(cfg, "lyapunov", seed)
    lam = estimate_lyapunov(spec, cfg["lyapunov"]["horizon"])
    mu = spec.model.mu
    rows = [(str(m + 1), mu[m], lam[m], abs(lam[m] - mu[m])) for m in range(mu.size)]
    write_csv(out / "lyapunov.csv", ["mode", "mu", "lambda_hat", "abs_err"], rows)


def _dichotomy(cfg, spec):
    split = make_splitting(spec.model, cfg["splitting"]["lambda"])
    d = cfg["dichotomy"]
    dich = estimate_dichotomy(spec, split, cfg["splitting"]["epsilon_hat"], d["horizon"], d["dt_probe"])
    return split, dich


def cmd_dichotomy(cfg, seed, out: Path) -> None:
    spec = build_spec(cfg, "dichotomy", seed)
    split, dich = _dichotomy(cfg, spec)
    d = cfg["dichotomy"]
    shifts = np.arange(round(d["orbit_horizon"] / d["orbit_step"]) + 1) * d["orbit_step"]
    K = dichotomy_K_along_orbit(spec, split, shifts, dich.epsilon_hat, d["horizon"], d["dt_probe"])
    slope = temperedness_slope(shifts, K)
    summary = {
        "alpha": dich.alpha,
        "beta": dich.beta,
        "gamma": dich.gamma,
        "K": dich.K,
        "epsilon_hat": dich.epsilon_hat,
        "horizon": dich.horizon,
        "temperedness_slope": slope,
    }
    (out / "dichotomy.json").write_text(dump_json(summary) + "\n")
    write_csv(out / "K_orbit.csv", ["t", "K"], np.column_stack([shifts, K]))


def _anchors(section, split, side, dich, field) -> np.ndarray:
    block = split.unstable if side == "unstable" else split.stable
    k = int(block.sum())
    if k == 0:
        raise ConfigError(f"splitting.lambda: the {side} block is empty")
    if section["anchors"] is not None:
        coords = np.array(section["anchors"], dtype=float)
        if coords.ndim != 2 or coords.shape[1] != k:
            raise ConfigError(f"anchors: each anchor needs {k} coordinates")
    else:
        r = field.rho / (4 * dich.K)
        n = section["n_anchors"]
        coords = np.zeros((n, k))
        coords[:, 0] = np.linspace(-r, r, n)
    full = np.zeros((coords.shape[0], split.J))
    full[:, block] = coords
    return full


def _manifold_setup(cfg, command, seed):
    spec = build_spec(cfg, command, seed)
    split, dich = _dichotomy(cfg, spec)
    field = build_field(cfg, spec.model.J)
    radius = check_radius(dich, field.B1, field.eps, field.rho)
    if not radius:
        raise ConfigError(
            f"field.rho: radius condition fails (contraction budget {radius.budget:.6g} > 0.5)"
        )
    lp = cfg["lp"]
    lpc = LPConfig(lp["T_lp"], lp["dt_lp"], lp["tol"], lp["max_iter"])
    try:
        lpc.validate(dich)
    except RimError as exc:
        raise ConfigError(f"lp.T_lp: {exc}") from exc
    return spec, split, dich, field, lpc, radius


def cmd_manifold(cfg, seed, out: Path) -> None:
    side = cfg["manifold"]["side"]
    spec, split, dich, field, lpc, radius = _manifold_setup(cfg, "manifold", seed)
    anchors = _anchors(cfg["manifold"], split, side, dich, field)
    own = split.unstable if side == "unstable" else split.stable
    other = ~own
    prefix = "p" if side == "unstable" else "q"
    header = [f"{prefix}_{i + 1}" for i in range(own.sum())] + [f"h_{i + 1}" for i in range(other.sum())]
    header += ["iterations", "last_delta", "contraction_est", "tail_bound"]
    rows, results = [], []
    for a in anchors:
        r = solve_graph(spec, field, split, dich, lpc, a, side)
        results.append(r)
        rows.append(list(a[own]) + list(r.h[other]) + [str(r.iterations), r.last_delta, r.contraction_est, r.tail_bound])
    write_csv(out / "manifold.csv", header, rows)
    summary = {
        "side": side,
        "anchors": len(results),
        "alpha": dich.alpha,
        "beta": dich.beta,
        "gamma": dich.gamma,
        "K": dich.K,
        "rho": field.rho,
        "B1": field.B1,
        "B0": field.B0,
        "contraction_budget": radius.budget,
        "max_iterations": max(r.iterations for r in results),
        "max_contraction_est": max(r.contraction_est for r in results),
        "max_h_norm": max(float(np.linalg.norm(r.h)) for r in results),
        "tail_bound": results[0].tail_bound,
    }
    (out / "manifold.json").write_text(dump_json(summary) + "\n")


def cmd_validate(cfg, seed, out: Path) -> None:
    v = cfg["validate"]
    spec, split, dich, field, lpc, _ = _manifold_setup(cfg, "validate", seed)
    anchors = _anchors(v, split, "unstable", dich, field)
    k = int(split.unstable.sum())
    rows = []
    for a in anchors:
        dt = cfg["noise"]["dt"] if v["dt"] is None else v["dt"]
        defect = verify_invariance(spec, field, split, dich, lpc, a, v["tau"], dt)
        rows.append(list(a[split.unstable]) + [v["tau"], defect])
    write_csv(out / "validate.csv", [f"p_{i + 1}" for i in range(k)] + ["tau", "defect"], rows)


def cmd_spde_compare(cfg, seed, out: Path) -> None:
    s, nz = cfg["spde"], cfg["noise"]
    model = build_model(cfg)
    f = cfg["field"]
    base = NonlinearField(f["kind"], f["c"], f["eps"], f["B1_tilde"], f["mixing"])
    x0 = np.ones(model.J) if s["x0"] is None else np.array(s["x0"])
    rep = conjugation_check(model, base, noise_ops(cfg, model.J), nz["nus"], x0, s["t"], s["dt_levels"], s["seeds"], seed)
    summary = {
        "dt_levels": list(rep.dt_levels),
        "mean_errors": list(rep.mean_errors),
        "fitted_order": rep.fitted_order,
        "seeds": rep.seeds,
    }
    (out / "spde_compare.json").write_text(dump_json(summary) + "\n")
    rows = [
        (str(seed + i), dt, rep.per_seed[i, j]) for i in range(rep.seeds) for j, dt in enumerate(rep.dt_levels)
    ]
    write_csv(out / "spde_traces.csv", ["seed", "dt", "error"], rows)


HANDLERS = {
    "simulate-linear": cmd_simulate,
    "lyapunov": cmd_lyapunov,
    "dichotomy": cmd_dichotomy,
    "manifold": cmd_manifold,
    "validate": cmd_validate,
    "spde-compare": cmd_spde_compare,
}


def run(command: str, cfg: dict, out_dir: Path, seed: int | None = None) -> None:
    """Execute one command for one seed and write its artifacts plus ``run.json``."""
    seed = cfg["run"]["seed"] if seed is None else seed
    out_dir.mkdir(parents=True, exist_ok=True)
    echo = {"command": command, "version": __version__, "config": materialize(cfg, command, seed)}
    HANDLERS[command](cfg, seed, out_dir)
    (out_dir / "run.json").write_text(dump_json(echo) + "\n")


def _read_config(path: str) -> dict:
    if path.endswith(".json"):
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, ValueError) as exc:
            raise ConfigError(f"config: {exc}") from exc
        return resolve(data.get("config", data))
    return load(path)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="rimkit", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="INI config, or a run.json echo")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="override run.seed")
    parser.add_argument("--seeds", type=int, default=None, help="sweep this many consecutive seeds")
    args = parser.parse_args(argv)

    try:
        cfg = _read_config(args.config)
        seed = cfg["run"]["seed"] if args.seed is None else args.seed
        out = Path(args.out)
        if args.seeds is None:
            run(args.command, cfg, out, seed)
        else:
            if args.seeds < 1:
                raise ConfigError("--seeds: must be >= 1")
            for s in range(seed, seed + args.seeds):
                run(args.command, cfg, out / f"seed_{s}", s)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RimError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
