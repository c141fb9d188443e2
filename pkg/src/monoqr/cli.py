"""Command-line interface: test a dataset, run the Monte Carlo, diagnose.

Configuration comes from an optional JSON file (one section per subcommand)
with command-line flags taking precedence; every output file carries a
metadata header (seed, configuration hash, package version) and contains no
timing data, so identical configurations always produce identical bytes.
Exit codes: 0 success, 1 statistical-procedure failure, 2 input or
configuration error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .bootstrap import BootstrapPlan, bootstrap_draws
from .diagnostics import model_bank, remainder_study
from .errors import ConfigError, MonoqrError, ParseError
from .estimator import FitConfig, Sample, fit_grid
from .grids import make_grid
from .monotonicity import Direction, TestSpec, Variant, decide, statistic
from .simulation import (
    McConfig,
    ModelId,
    report_json_dict,
    report_table_csv,
    run_mc,
    scatter_xy,
)

__all__ = ["main"]

_DIRECTIONS = {
    "non-positive": Direction.NON_POSITIVE,
    "non-negative": Direction.NON_NEGATIVE,
}

_TEST_KEYS = {
    "h",
    "degree",
    "taus",
    "p",
    "direction",
    "eta",
    "alpha",
    "bootstrap_b",
    "x_min",
    "x_max",
    "n_x",
    "seed",
}
_SIMULATE_KEYS = {
    "null_replications",
    "alt_replications",
    "bootstrap_b",
    "bandwidths",
    "alphas",
    "models",
    "n",
    "noise_sd",
    "degree",
    "eta",
    "taus",
    "p",
    "direction",
    "x_min",
    "x_max",
    "n_x",
    "seed",
    "scatter_n",
}
_DIAGNOSE_KEYS = {
    "model",
    "n_values",
    "replications",
    "variants",
    "degree",
    "x_min",
    "x_max",
    "n_x",
    "taus",
    "seed",
}


def _load_config_section(path: str | None, section: str, allowed: set) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            config = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(config, dict):
        raise ConfigError("config file must hold a JSON object")
    part = config.get(section, {})
    if not isinstance(part, dict):
        raise ConfigError(f"config section {section!r} must be a JSON object")
    unknown = set(part) - allowed
    if unknown:
        raise ConfigError(
            f"unknown config keys in section {section!r}: {sorted(unknown)}; "
            f"valid keys: {sorted(allowed)}"
        )
    return part


def _resolve(file_cfg: dict, flag_values: dict, defaults: dict) -> dict:
    out = dict(defaults)
    out.update(file_cfg)
    for key, value in flag_values.items():
        if value is not None:
            out[key] = value
    return out


def _direction(name) -> Direction:
    try:
        return _DIRECTIONS[str(name)]
    except KeyError:
        raise ConfigError(
            f"unknown direction {name!r}; valid: {sorted(_DIRECTIONS)}"
        ) from None


def _config_hash(resolved: dict) -> str:
    canonical = json.dumps(resolved, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _meta_lines(seed: int, config_hash: str) -> str:
    return (
        f"# seed: {seed}\n"
        f"# config: sha256:{config_hash}\n"
        f"# version: {__version__}\n"
    )


def _write(path: str, content: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(content)


def _read_sample_csv(path: str) -> Sample:
    """Sample from a CSV with header ``y,x`` or ``y1,...,yL,l,x1,...,xd``."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    rows = [(i, line) for i, line in enumerate(lines, start=1) if line.strip()]
    if not rows:
        raise ParseError(f"{path} is empty")
    header = [c.strip() for c in rows[0][1].split(",")]
    if header == ["y", "x"]:
        n_y, has_l, n_x = 1, False, 1
    else:
        n_y = sum(1 for c in header if c and c[0] == "y")
        n_x = sum(1 for c in header if c and c[0] == "x")
        has_l = "l" in header
        expected = [f"y{j}" for j in range(1, n_y + 1)] + ["l"] + [
            f"x{j}" for j in range(1, n_x + 1)
        ]
        if n_y < 1 or n_x < 1 or not has_l or header != expected:
            raise ParseError(
                f"{path} line 1: header must be 'y,x' or 'y1,...,yL,l,x1,...,xd', "
                f"got {rows[0][1]!r}"
            )
    width = n_y + int(has_l) + n_x
    data = np.empty((len(rows) - 1, width))
    for r, (lineno, line) in enumerate(rows[1:]):
        cells = line.split(",")
        if len(cells) != width:
            raise ParseError(
                f"{path} line {lineno}: expected {width} fields, got {len(cells)}"
            )
        for c, cell in enumerate(cells):
            try:
                value = float(cell)
            except ValueError:
                raise ParseError(
                    f"{path} line {lineno}: non-numeric value {cell.strip()!r}"
                ) from None
            data[r, c] = value
    if data.shape[0] == 0:
        raise ParseError(f"{path} has a header but no data rows")
    if has_l:
        counts = data[:, n_y]
        if np.any(counts != np.round(counts)) or np.any(counts < 1):
            raise ParseError(f"{path}: the l column must hold positive integers")
        if not np.all(np.isfinite(data[:, n_y + 1 :])):
            raise ParseError(f"{path}: covariates must be finite")
        return Sample(
            outcomes=data[:, :n_y],
            covariates=data[:, n_y + 1 :],
            counts=counts.astype(np.int64),
        )
    if not np.all(np.isfinite(data)):
        bad = int(np.argwhere(~np.isfinite(data))[0][0])
        raise ParseError(f"{path} line {rows[1 + bad][0]}: non-finite value")
    return Sample.from_xy(data[:, 0], data[:, 1:])


def _build_test_spec(taus, p, direction) -> TestSpec:
    taus = [float(t) for t in taus]
    if len(taus) == 1:
        return TestSpec(p=p, direction=direction, variant=Variant.SINGLE_DERIVATIVE)
    if len(taus) == 2:
        return TestSpec(
            p=p,
            direction=direction,
            variant=Variant.INTERQUARTILE_DELTA,
            tau_pair=(taus[0], taus[1]),
        )
    raise ConfigError(f"--tau takes one or two values, got {len(taus)}")


def cmd_test(args: argparse.Namespace) -> int:
    file_cfg = _load_config_section(args.config, "test", _TEST_KEYS)
    flags = {
        "h": args.h,
        "taus": args.tau,
        "p": args.p,
        "direction": args.direction,
        "eta": args.eta,
        "alpha": args.alpha,
        "bootstrap_b": args.bootstrap_b,
        "seed": args.seed,
    }
    defaults = {
        "h": 1.0,
        "degree": 1,
        "taus": [0.5],
        "p": 2.0,
        "direction": "non-positive",
        "eta": 1e-3,
        "alpha": 0.05,
        "bootstrap_b": 200,
        "x_min": 0.05,
        "x_max": 0.95,
        "n_x": 19,
        "seed": 0,
    }
    cfg = _resolve(file_cfg, flags, defaults)
    config_hash = _config_hash({"subcommand": "test", **cfg})
    seed = int(cfg["seed"])
    sample = _read_sample_csv(args.input)
    if sample.d != 1:
        raise ConfigError("the testing pipeline requires a single covariate column")
    spec = _build_test_spec(cfg["taus"], float(cfg["p"]), _direction(cfg["direction"]))
    taus = cfg["taus"] if len(cfg["taus"]) > 1 else (float(cfg["taus"][0]),)
    grid = make_grid(float(cfg["x_min"]), float(cfg["x_max"]), int(cfg["n_x"]), taus=taus)
    fit_cfg = FitConfig(degree=int(cfg["degree"]), bandwidth=float(cfg["h"]))
    fits = fit_grid(sample, grid, fit_cfg)
    stat = statistic(fits, spec)
    plan = BootstrapPlan(n_resamples=int(cfg["bootstrap_b"]), seed=seed, stream=0)
    draws = bootstrap_draws(sample, grid, fit_cfg, spec, plan)
    outcome = decide(
        stat, draws, alpha=float(cfg["alpha"]), eta=float(cfg["eta"]), h=float(cfg["h"])
    )

    os.makedirs(args.out, exist_ok=True)
    meta = {"seed": seed, "config_sha256": config_hash, "version": __version__}
    payload = {"meta": meta, "outcome": outcome.to_dict(), "verdict": outcome.verdict()}
    _write(
        os.path.join(args.out, "outcome.json"),
        json.dumps(payload, indent=2, sort_keys=True) + "\n",
    )
    head = _meta_lines(seed, config_hash)
    draw_lines = "\n".join(f"{b},{v:.10g}" for b, v in enumerate(draws))
    _write(os.path.join(args.out, "draws.csv"), head + "b,draw\n" + draw_lines + "\n")
    grid_lines = [
        f"{grid.x_nodes[ix]:.10g},{grid.tau_nodes[it]:.10g},"
        f"{fits.ghat[ix, it]:.10g},{fits.qhat[ix, it]:.10g}"
        for ix in range(grid.n_x)
        for it in range(grid.n_tau)
    ]
    _write(
        os.path.join(args.out, "ghat_grid.csv"),
        head + "x,tau,ghat,qhat\n" + "\n".join(grid_lines) + "\n",
    )
    print(outcome.verdict())
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    file_cfg = _load_config_section(args.config, "simulate", _SIMULATE_KEYS)
    flags = {
        "bandwidths": args.h,
        "alphas": args.alpha,
        "taus": args.tau,
        "p": args.p,
        "direction": args.direction,
        "eta": args.eta,
        "bootstrap_b": args.bootstrap_b,
        "seed": args.seed,
    }
    defaults = {
        "null_replications": 500,
        "alt_replications": 100,
        "bootstrap_b": 200,
        "bandwidths": [0.9, 1.0, 1.1],
        "alphas": [0.10, 0.05, 0.01],
        "models": [m.value for m in ModelId],
        "n": 200,
        "noise_sd": math.sqrt(0.1),
        "degree": 1,
        "eta": 1e-6,
        "taus": [0.5],
        "p": 2.0,
        "direction": "non-negative",
        "x_min": 0.05,
        "x_max": 0.95,
        "n_x": 19,
        "seed": 0,
        "scatter_n": 200,
    }
    cfg = _resolve(file_cfg, flags, defaults)
    if args.full_scale:
        cfg["null_replications"] = 1000
        cfg["alt_replications"] = 200
    config_hash = _config_hash({"subcommand": "simulate", **cfg})
    seed = int(cfg["seed"])
    try:
        models = tuple(ModelId(m) for m in cfg["models"])
    except ValueError:
        raise ConfigError(
            f"unknown model id in {cfg['models']}; valid: {[m.value for m in ModelId]}"
        ) from None
    spec = _build_test_spec(cfg["taus"], float(cfg["p"]), _direction(cfg["direction"]))
    taus = cfg["taus"] if len(cfg["taus"]) > 1 else (float(cfg["taus"][0]),)
    grid = make_grid(float(cfg["x_min"]), float(cfg["x_max"]), int(cfg["n_x"]), taus=taus)
    mc = McConfig(
        null_replications=int(cfg["null_replications"]),
        alt_replications=int(cfg["alt_replications"]),
        bootstrap_b=int(cfg["bootstrap_b"]),
        bandwidths=tuple(float(h) for h in cfg["bandwidths"]),
        alphas=tuple(float(a) for a in cfg["alphas"]),
        seed=seed,
        models=models,
        n=int(cfg["n"]),
        noise_sd=float(cfg["noise_sd"]),
        degree=int(cfg["degree"]),
        eta=float(cfg["eta"]),
        spec=spec,
        grid=grid,
        workers=args.workers,
    )
    report = run_mc(mc)

    os.makedirs(args.out, exist_ok=True)
    head = _meta_lines(seed, config_hash)
    table = report_table_csv(report)
    _write(os.path.join(args.out, "table1.csv"), head + table)
    meta = {"seed": seed, "config_sha256": config_hash, "version": __version__}
    payload = {"meta": meta, "report": report_json_dict(report)}
    _write(
        os.path.join(args.out, "report.json"),
        json.dumps(payload, indent=2, sort_keys=True) + "\n",
    )
    for model in models:
        xs, ys = scatter_xy(model, int(cfg["scatter_n"]), seed, float(cfg["noise_sd"]))
        body = "\n".join(f"{x:.10g},{y:.10g}" for x, y in zip(xs, ys))
        _write(
            os.path.join(args.out, f"scatter_{model.value}.csv"),
            head + "x,y\n" + body + "\n",
        )
    print(table, end="")
    print(f"runtime: {report.runtime:.1f}s", file=sys.stderr)
    for model_value, h, message in report.failures:
        print(f"cell failed: model={model_value} h={h}: {message}", file=sys.stderr)
    return 0 if not report.failures else 1


def cmd_diagnose(args: argparse.Namespace) -> int:
    file_cfg = _load_config_section(args.config, "diagnose", _DIAGNOSE_KEYS)
    flags = {"seed": args.seed}
    defaults = {
        "model": "linear_gaussian",
        "n_values": [500, 2000],
        "replications": 5,
        "variants": ["theorem1", "theorem2"],
        "degree": 1,
        "x_min": 0.2,
        "x_max": 0.8,
        "n_x": 9,
        "taus": [0.25, 0.5, 0.75],
        "seed": 0,
    }
    cfg = _resolve(file_cfg, flags, defaults)
    config_hash = _config_hash({"subcommand": "diagnose", **cfg})
    seed = int(cfg["seed"])
    bank = model_bank()
    name = str(cfg["model"])
    if name not in bank:
        raise ConfigError(f"unknown model {name!r}; valid: {sorted(bank)}")
    model, sampler = bank[name]()
    grid = make_grid(
        float(cfg["x_min"]),
        float(cfg["x_max"]),
        int(cfg["n_x"]),
        taus=[float(t) for t in cfg["taus"]],
    )
    variants = tuple(str(v) for v in cfg["variants"])
    if not set(variants) <= {"theorem1", "theorem2"}:
        raise ConfigError(
            f"unknown variants {sorted(set(variants) - {'theorem1', 'theorem2'})}; "
            "valid: ['theorem1', 'theorem2']"
        )
    report = remainder_study(
        model,
        sampler,
        [int(v) for v in cfg["n_values"]],
        FitConfig(degree=int(cfg["degree"]), bandwidth=1.0),
        grid,
        replications=int(cfg["replications"]),
        seed=seed,
        variants=variants,
    )
    os.makedirs(args.out, exist_ok=True)
    head = _meta_lines(seed, config_hash)
    _write(os.path.join(args.out, "remainder.csv"), head + report.to_csv())
    for variant in variants:
        meds = report.normalized_medians(variant)
        pretty = ", ".join(f"n={n}: {v:.4f}" for n, v in meds.items())
        print(f"{variant} envelope-normalized median remainder: {pretty}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="monoqr",
        description=(
            "Bootstrap tests of quantile-derivative sign restrictions with "
            "exact local polynomial quantile regression."
        ),
    )
    parser.add_argument("--version", action="version", version=f"monoqr {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    test = sub.add_parser("test", help="test a y,x dataset for monotonicity")
    test.add_argument("input", help="CSV file with header y,x")
    test.add_argument("--config", default=None, help="JSON config file")
    test.add_argument("--seed", type=int, default=None)
    test.add_argument("--out", default=".", help="output directory")
    test.add_argument("--h", type=float, default=None, help="bandwidth")
    test.add_argument("--alpha", type=float, default=None, help="nominal level")
    test.add_argument(
        "--tau",
        type=float,
        nargs="+",
        default=None,
        help="one quantile level, or two for the interquartile-spread test",
    )
    test.add_argument("--p", type=float, default=None, help="statistic exponent")
    test.add_argument("--eta", type=float, default=None)
    test.add_argument("--direction", choices=sorted(_DIRECTIONS), default=None)
    test.add_argument("--bootstrap-b", type=int, default=None, dest="bootstrap_b")

    sim = sub.add_parser("simulate", help="run the rejection-frequency table")
    sim.add_argument("--config", default=None, help="JSON config file")
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--workers", type=int, default=1)
    sim.add_argument("--out", default=".", help="output directory")
    sim.add_argument("--h", type=float, nargs="+", default=None, help="bandwidths")
    sim.add_argument("--alpha", type=float, nargs="+", default=None, help="levels")
    sim.add_argument("--tau", type=float, nargs="+", default=None)
    sim.add_argument("--p", type=float, default=None)
    sim.add_argument("--eta", type=float, default=None)
    sim.add_argument("--direction", choices=sorted(_DIRECTIONS), default=None)
    sim.add_argument("--bootstrap-b", type=int, default=None, dest="bootstrap_b")
    sim.add_argument(
        "--full-scale",
        action="store_true",
        help="1000 null / 200 alternative replications instead of 500 / 100",
    )

    diag = sub.add_parser("diagnose", help="linear-representation remainder study")
    diag.add_argument("--config", default=None, help="JSON config file")
    diag.add_argument("--seed", type=int, default=None)
    diag.add_argument("--out", default=".", help="output directory")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.subcommand == "simulate" and args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return 2
    handlers = {"test": cmd_test, "simulate": cmd_simulate, "diagnose": cmd_diagnose}
    try:
        return handlers[args.subcommand](args)
    except (ParseError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (MonoqrError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
