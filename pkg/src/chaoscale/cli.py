"""Config-driven experiment runner.

Each subcommand reads a YAML config, runs one workflow, writes a CSV of
grid rows plus a JSON summary, and prints a short table.  Identical
config and seed give byte-identical output files.

Exit codes: 0 success, 2 validation error, 3 numerical blowup.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np
import yaml

from . import expansion, functional, romberg
from .errors import ChaoscaleError, ConfigError, NumericalBlowupError
from .measure import DiscreteLaw
from .model import GaussianLaw, builtin_model
from .simulate import SimConfig

EXPERIMENTS = (
    "static-bias",
    "static-constants",
    "dynamic-grid",
    "fit",
    "romberg",
    "ensemble-mse",
    "cost-plan",
)


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def build_functional(spec: dict) -> functional.MeasureFunctional:
    if not isinstance(spec, dict) or "name" not in spec:
        raise ConfigError("functional", "expected a mapping with a 'name' key")
    name = spec["name"]
    if name == "mean":
        return functional.FirstMomentLinear()
    if name == "mean_power":
        return functional.mean_power(int(spec.get("power", 2)))
    if name == "moment":
        order = int(spec.get("order", 2))
        return functional.LinearFunctional(lambda x: x[0] ** order, name=f"moment_{order}")
    if name == "sin_mean":
        return functional.sin_mean()
    if name == "cos_mean":
        return functional.cos_mean()
    raise ConfigError("functional.name", f"unknown functional '{name}'")


def build_law(spec: dict):
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("law", "expected a mapping with a 'kind' key")
    kind = spec["kind"]
    if kind == "bernoulli":
        return DiscreteLaw.bernoulli(float(spec.get("p", 0.5)))
    if kind == "point":
        return DiscreteLaw.point_mass(float(spec.get("x", 0.0)))
    if kind == "discrete":
        return DiscreteLaw(np.asarray(spec["atoms"], dtype=float), np.asarray(spec["probs"], dtype=float))
    if kind == "gaussian":
        return GaussianLaw(float(spec.get("mean", 0.0)), float(spec.get("std", 1.0)))
    raise ConfigError("law.kind", f"unknown law kind '{kind}'")


def build_model(spec: dict):
    if not isinstance(spec, dict) or "name" not in spec:
        raise ConfigError("model", "expected a mapping with a 'name' key")
    params = dict(spec)
    name = params.pop("name")
    if "initial_law" in params:
        params["initial_law"] = build_law(params["initial_law"])
    try:
        return builtin_model(name, **params)
    except (ValueError, TypeError) as exc:
        raise ConfigError("model", str(exc)) from exc


def build_sim_config(cfg: dict, seed: int) -> SimConfig:
    try:
        return SimConfig(
            step_count=int(cfg.get("steps", 1)),
            scheme=cfg.get("scheme", "exact_linear"),
            master_seed=seed,
        )
    except ValueError as exc:
        raise ConfigError("scheme/steps", str(exc)) from exc


def _require(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(key, "missing required field")
    return cfg[key]


def _n_list(cfg: dict) -> list[int]:
    ns = [int(n) for n in _require(cfg, "n_list")]
    if not ns:
        raise ConfigError("n_list", "must be nonempty")
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ConfigError("n_list", "must be strictly increasing")
    return ns


GRID_HEADER = ["N", "bias", "stderr", "reps"]
FIT_HEADER = ["j", "C_j", "stderr"]


def _grid_rows(grid: expansion.BiasGrid) -> list[list]:
    return [
        [n, b, s, r]
        for n, b, s, r in zip(grid.ns, grid.biases, grid.stderrs, grid.reps)
    ]


def _fit_payload(fit: expansion.ExpansionFit) -> dict:
    return {
        "k": fit.k,
        "coefficients": list(fit.coefficients),
        "coefficient_stderrs": list(fit.coefficient_stderrs),
        "residual_norm": fit.residual_norm,
        "slope": fit.slope,
    }


def run_experiment(cfg: dict, out_dir: Path, seed: int, threads: int) -> dict:
    kind = cfg.get("experiment")
    if kind not in EXPERIMENTS:
        raise ConfigError("experiment", f"must be one of {EXPERIMENTS}")
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{kind}.csv"
    json_path = out_dir / f"{kind}.json"

    if kind == "cost-plan":
        plan = romberg.cost_plan(float(_require(cfg, "epsilon")), int(_require(cfg, "k")))
        rows = [[m, m * plan.n, (m * plan.n) ** 2] for m in range(1, plan.k + 1)]
        _write_csv(csv_path, ["m", "particles", "interactions"], rows)
        _write_json(json_path, plan.as_dict())
        print(f"cost plan eps={plan.epsilon} k={plan.k}: N={plan.n} M={plan.m} "
              f"C={plan.interactions} (single-system C={plan.interactions_single})")
        return plan.as_dict()

    if kind == "static-bias":
        u = build_functional(_require(cfg, "functional"))
        law = build_law(_require(cfg, "law"))
        ns = _n_list(cfg)
        mode = cfg.get("mode", "enumerate")
        if mode == "enumerate":
            if not isinstance(law, DiscreteLaw):
                raise ConfigError("mode", "enumeration requires a discrete law")
            grid = expansion.static_bias_grid_exact(u, law, ns)
        elif mode == "mc":
            reps = int(cfg.get("reps", 10000))
            biases, stderrs = [], []
            for n in ns:
                b, s = expansion.static_bias_mc(u, law, n, reps, seed=seed)
                biases.append(b)
                stderrs.append(s)
            grid = expansion.BiasGrid(
                ns=tuple(ns), biases=tuple(biases), stderrs=tuple(stderrs),
                reps=(reps,) * len(ns), source="static-mc",
                reference=expansion.static_reference(u, law),
            )
        else:
            raise ConfigError("mode", "must be 'enumerate' or 'mc'")
        _write_csv(csv_path, GRID_HEADER, _grid_rows(grid))
        payload = {"source": grid.source, "reference": grid.reference,
                   "ns": list(grid.ns), "biases": list(grid.biases),
                   "stderrs": list(grid.stderrs)}
        _write_json(json_path, payload)
        _print_grid(grid)
        return payload

    if kind == "static-constants":
        u = build_functional(_require(cfg, "functional"))
        law = build_law(_require(cfg, "law"))
        samples = int(cfg.get("samples", 100000))
        orders = [int(p) for p in cfg.get("orders", [2])]
        rows, payload = [], {"samples": samples, "constants": []}
        for p in orders:
            c = expansion.static_constant_cp(u, law, p, samples, seed=seed)
            rows.append([p, c.value, c.stderr])
            payload["constants"].append({"p": p, "value": c.value, "stderr": c.stderr})
        _write_csv(csv_path, ["p", "value", "stderr"], rows)
        _write_json(json_path, payload)
        for row in rows:
            print(f"C_{row[0]} = {row[1]:.6g} +/- {row[2]:.2g}")
        return payload

    if kind == "dynamic-grid":
        model = build_model(_require(cfg, "model"))
        u = build_functional(_require(cfg, "functional"))
        ns = _n_list(cfg)
        reps = int(cfg.get("reps", 10000))
        sim = build_sim_config(cfg, seed)
        grid = expansion.dynamic_bias_grid(model, u, ns, reps, sim, threads=threads)
        _write_csv(csv_path, GRID_HEADER, _grid_rows(grid))
        payload = {"source": grid.source, "reference": grid.reference,
                   "ns": list(grid.ns), "biases": list(grid.biases),
                   "stderrs": list(grid.stderrs), "warnings": list(grid.warnings)}
        _write_json(json_path, payload)
        _print_grid(grid)
        for w in grid.warnings:
            print(f"warning: {w}", file=sys.stderr)
        return payload

    if kind == "fit":
        k = int(_require(cfg, "k"))
        grid = _load_grid(cfg)
        fit = expansion.fit_expansion(grid, k)
        rows = [[j + 1, c, s] for j, (c, s) in
                enumerate(zip(fit.coefficients, fit.coefficient_stderrs))]
        _write_csv(csv_path, FIT_HEADER, rows)
        payload = _fit_payload(fit)
        _write_json(json_path, payload)
        print(f"fit k={k}: coefficients {[f'{c:.6g}' for c in fit.coefficients]} "
              f"slope {fit.slope:.3f} residual norm {fit.residual_norm:.3g}")
        return payload

    if kind == "romberg":
        k = int(_require(cfg, "k"))
        weights = romberg.romberg_weights(k)
        if "model" not in cfg:  # weights-only query
            _write_csv(csv_path, ["m", "alpha"], [[m + 1, w] for m, w in enumerate(weights)])
            payload = {"k": k, "weights": list(weights)}
            _write_json(json_path, payload)
            print(f"romberg weights k={k}: ({', '.join(f'{w:g}' for w in weights)})")
            return payload
        model = build_model(cfg["model"])
        u = build_functional(_require(cfg, "functional"))
        scheme = romberg.RombergScheme(k=k, base_n=int(_require(cfg, "n")))
        reps = int(cfg.get("reps", 10000))
        sim = build_sim_config(cfg, seed)
        value, stderr = romberg.romberg_estimate(model, u, scheme, reps, sim, threads=threads)
        payload = {"k": k, "N": scheme.base_n, "weights": list(weights),
                   "value": value, "stderr": stderr, "reps": reps}
        _write_csv(csv_path, ["k", "N", "value", "stderr", "reps"],
                   [[k, scheme.base_n, value, stderr, reps]])
        _write_json(json_path, payload)
        print(f"romberg k={k} N={scheme.base_n}: {value:.6g} +/- {stderr:.2g}")
        return payload

    if kind == "ensemble-mse":
        model = build_model(_require(cfg, "model"))
        u = build_functional(_require(cfg, "functional"))
        n = int(_require(cfg, "n"))
        m = int(_require(cfg, "m"))
        k = int(cfg.get("k", 1))
        outer = int(cfg.get("outer_reps", 100))
        sim = build_sim_config(cfg, seed)
        report = romberg.mse_report(model, u, n, m, k, sim, outer_reps=outer, threads=threads)
        payload = {
            "bias": report.bias, "bias_squared": report.bias_squared,
            "variance": report.variance, "mse": report.mse,
            "mse_stderr": report.mse_stderr, "outer_reps": outer,
            "N": n, "M": m, "k": k,
        }
        _write_csv(csv_path, ["N", "M", "k", "bias2", "variance", "mse"],
                   [[n, m, k, report.bias_squared, report.variance, report.mse]])
        _write_json(json_path, payload)
        print(f"ensemble N={n} M={m} k={k}: mse={report.mse:.4g} "
              f"(bias^2={report.bias_squared:.4g}, var={report.variance:.4g})")
        return payload

    raise ConfigError("experiment", f"unhandled experiment '{kind}'")


def _load_grid(cfg: dict) -> expansion.BiasGrid:
    if "grid_csv" in cfg:
        path = Path(cfg["grid_csv"])
        if not path.exists():
            raise ConfigError("grid_csv", f"file {path} does not exist")
        lines = path.read_text().strip().splitlines()
        if lines[0].split(",") != GRID_HEADER:
            raise ConfigError("grid_csv", f"expected header {','.join(GRID_HEADER)}")
        rows = [line.split(",") for line in lines[1:]]
        ns = tuple(int(r[0]) for r in rows)
        biases = tuple(float(r[1]) for r in rows)
        stderrs = tuple(float(r[2]) for r in rows)
        reps = tuple(int(r[3]) for r in rows)
        source = "static-enumeration" if all(s == 0 for s in stderrs) else "static-mc"
        return expansion.BiasGrid(ns=ns, biases=biases, stderrs=stderrs, reps=reps,
                                  source=source, reference=float(cfg.get("reference", 0.0)))
    if "grid" in cfg:
        g = cfg["grid"]
        ns = tuple(int(n) for n in g["ns"])
        biases = tuple(float(b) for b in g["biases"])
        stderrs = tuple(float(s) for s in g.get("stderrs", [0.0] * len(ns)))
        return expansion.BiasGrid(
            ns=ns, biases=biases, stderrs=stderrs, reps=tuple(g.get("reps", [0] * len(ns))),
            source=g.get("source", "static-enumeration"),
            reference=float(g.get("reference", 0.0)),
        )
    raise ConfigError("grid", "fit needs 'grid_csv' or an inline 'grid'")


def _print_grid(grid: expansion.BiasGrid) -> None:
    print(f"{'N':>8} {'bias':>15} {'stderr':>12}")
    for n, b, s in zip(grid.ns, grid.biases, grid.stderrs):
        print(f"{n:>8} {b:>15.6e} {s:>12.3e}")


def _resolve_threads(arg_threads) -> int:
    if arg_threads is not None:
        return max(1, int(arg_threads))
    env = os.environ.get("CHAOSCALE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError("CHAOSCALE_THREADS", f"not an integer: {env!r}") from exc
    return 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="chaoscale",
        description="Particle Monte Carlo experiments for 1/N weak-error expansions",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} workflow")
        p.add_argument("--config", required=True, help="YAML experiment config")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: CHAOSCALE_THREADS or 1)")
    args = parser.parse_args(argv)

    try:
        cfg_path = Path(args.config)
        if not cfg_path.exists():
            raise ConfigError("config", f"file {cfg_path} does not exist")
        cfg = yaml.safe_load(cfg_path.read_text())
        if not isinstance(cfg, dict):
            raise ConfigError("config", "top level must be a mapping")
        cfg.setdefault("experiment", args.command)
        if cfg["experiment"] != args.command:
            raise ConfigError("experiment", f"config says '{cfg['experiment']}' "
                              f"but subcommand is '{args.command}'")
        seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
        threads = _resolve_threads(args.threads)
        run_experiment(cfg, Path(args.out), seed, threads)
        return 0
    except NumericalBlowupError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, ChaoscaleError, ValueError, KeyError, yaml.YAMLError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
