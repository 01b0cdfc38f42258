"""Command-line front end: ``hdben fit``, ``hdben simulate`` and ``hdben reproduce``.

Exit codes: 0 success, 2 usage or configuration error, 3 numerical failure in
the sampler, 4 every replicate of some method failed.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .diagnostics import SupportRule, summarize
from .model import ContractViolation, Dataset, Hyperparameters
from .samplers import ChainFailure, SamplerConfig, SingularMatrixError, fit_hdben
from .simulation import (
    METHODS,
    PROFILES,
    ScenarioSpec,
    run_grid,
    spec_to_dict,
    table2_specs,
    table3_specs,
)

log = logging.getLogger("hdben")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_ALL_FAILED = 0, 2, 3, 4


class ConfigError(ValueError):
    """Bad configuration or input; maps to exit code 2."""


@dataclass(frozen=True)
class RunConfig:
    """Flat mirror of Hyperparameters, SamplerConfig and ScenarioSpec plus output settings."""

    # hyperparameters: Gamma (shape, rate) for the four penalties
    a_beta1: float = 2.0
    b_beta1: float = 1.0
    a_gamma1: float = 2.0
    b_gamma1: float = 1.0
    a_beta2: float = 2.0
    b_beta2: float = 1.0
    a_gamma2: float = 2.0
    b_gamma2: float = 1.0
    # sampler
    iterations: int = 2500
    burn_in: int = 500
    thinning: int = 1
    chains: int = 2
    seed: int = 0
    mh_step_init: Optional[float] = None
    adapt_enabled: bool = True
    adapt_window: int = 25
    adapt_target: Optional[float] = None
    gamma_kernel: str = "hmc"
    leapfrog_steps: int = 10
    block_cycles: int = 3
    tau_update_mode: str = "direct"
    beta_floor: float = 1e-10
    freeze: tuple = ()
    workers: int = 1
    # scenario
    n: int = 200
    d: int = 100
    s_beta: int = 10
    s_gamma: int = 10
    beta_range: tuple = (1.0, 2.0)
    gamma_range: tuple = (0.5, 1.5)
    replicates: int = 5
    methods: tuple = METHODS
    support_level: float = 0.95
    # output
    output_dir: str = "out"
    format: str = "csv"

    def hyperparameters(self) -> Hyperparameters:
        return Hyperparameters(**{k: getattr(self, k) for k in HYPER_KEYS})

    def sampler_options(self) -> dict:
        # everything SamplerConfig takes beyond what ScenarioSpec already carries
        return {k: getattr(self, k) for k in SAMPLER_KEYS if k not in SCENARIO_SHARED}

    def sampler_config(self) -> SamplerConfig:
        return SamplerConfig(**{k: getattr(self, k) for k in SAMPLER_KEYS})

    def scenario(self) -> ScenarioSpec:
        opts = self.sampler_options()
        # grid-level parallelism replaces chain-level parallelism
        opts["workers"] = 1
        return ScenarioSpec(
            **{k: getattr(self, k) for k in SCENARIO_KEYS},
            sampler_options=opts,
            hyperparameters=asdict(self.hyperparameters()),
        )

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out


HYPER_KEYS = tuple(f.name for f in fields(Hyperparameters))
SAMPLER_KEYS = tuple(f.name for f in fields(SamplerConfig))
SCENARIO_SHARED = ("iterations", "burn_in", "chains", "seed", "tau_update_mode")
SCENARIO_KEYS = (
    "n", "d", "s_beta", "s_gamma", "beta_range", "gamma_range", "replicates", "methods",
    "seed", "iterations", "burn_in", "chains", "tau_update_mode", "support_level",
)
OUTPUT_FORMATS = ("csv", "json")
_DEFAULTS = RunConfig()


def _check_type(key: str, value):
    default = getattr(_DEFAULTS, key)
    if key in ("mh_step_init", "adapt_target"):
        ok = value is None or (isinstance(value, (int, float)) and not isinstance(value, bool))
    elif isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    elif isinstance(default, str):
        ok = isinstance(value, str)
    else:
        ok = isinstance(value, (list, tuple))
    if not ok:
        raise ConfigError(f"config key {key!r}: unexpected value {value!r}")
    if isinstance(value, float) and not math.isfinite(value):
        raise ConfigError(f"config key {key!r}: must be finite")
    if isinstance(value, (list, tuple)):
        if key in ("beta_range", "gamma_range"):
            if len(value) != 2 or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
            ):
                raise ConfigError(f"config key {key!r}: expected [low, high]")
            return tuple(float(v) for v in value)
        if not all(isinstance(v, str) for v in value):
            raise ConfigError(f"config key {key!r}: expected a list of strings")
        return tuple(value)
    if isinstance(default, float) and value is not None:
        return float(value)
    return value


def _build_all(cfg: RunConfig) -> None:
    cfg.hyperparameters()
    cfg.sampler_config()
    cfg.scenario()
    unknown = set(cfg.methods) - set(METHODS)
    if unknown:
        raise ContractViolation(f"unknown methods {sorted(unknown)}")
    if cfg.format not in OUTPUT_FORMATS:
        raise ContractViolation(f"format must be one of {OUTPUT_FORMATS}")


def config_from_dict(doc: dict) -> RunConfig:
    """Validate a flat key-value mapping; errors name the offending key."""
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    values = {k: _check_type(k, v) for k, v in doc.items()}
    cfg = replace(_DEFAULTS, **values)
    try:
        _build_all(cfg)
    except (ContractViolation, TypeError, ValueError) as joint:
        # blame the first key that is invalid on its own, else the whole set
        for key, value in values.items():
            try:
                _build_all(replace(_DEFAULTS, **{key: value}))
            except (ContractViolation, TypeError, ValueError) as err:
                raise ConfigError(f"config key {key!r}: {err}") from err
        raise ConfigError(f"config keys {sorted(values)} are inconsistent: {joint}") from joint
    return cfg


def parse_config(path) -> RunConfig:
    """Read a JSON object of scalars and arrays; missing keys take defaults."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as err:
        raise ConfigError(f"config file {path} is not valid JSON: {err}") from err
    return config_from_dict(doc)


def _overrides(cfg: RunConfig, args) -> RunConfig:
    changes = {}
    if getattr(args, "profile", None):
        changes.update(PROFILES[args.profile])
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "method", None):
        changes["methods"] = tuple(m.strip() for m in args.method.split(",") if m.strip())
    if getattr(args, "out", None):
        changes["output_dir"] = args.out
    if not changes:
        return cfg
    return config_from_dict({**cfg.to_dict(), **changes})


# -- output helpers ------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _jsonable(v):
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    return v


def _write_table(out_dir: Path, stem: str, header: list, rows: list, fmt: str) -> Path:
    if fmt == "json":
        path = out_dir / f"{stem}.json"
        records = [{h: _jsonable(v) for h, v in zip(header, row)} for row in rows]
        path.write_text(json.dumps(records, indent=1) + "\n", encoding="utf-8")
        return path
    path = out_dir / f"{stem}.csv"
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows([[_fmt(v) for v in row] for row in rows])
    return path


def _write_meta(out_dir: Path, meta: dict) -> None:
    text = json.dumps(meta, indent=2, sort_keys=True, default=_jsonable)
    (out_dir / "meta.json").write_text(text + "\n", encoding="utf-8")


def _make_out_dir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as err:
        raise ConfigError(f"cannot create output directory {out}: {err}") from err
    return out


def read_data_csv(path) -> tuple:
    """Header row then numeric rows; column 1 is y, the rest are covariates."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"data file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise ConfigError(f"{path}: empty file")
    header, body = [h.strip() for h in rows[0]], rows[1:]
    if len(header) < 2:
        raise ConfigError(f"{path}: need a y column and at least one covariate")
    if not body:
        raise ConfigError(f"{path}: no data rows")
    values = np.empty((len(body), len(header)))
    for i, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise ConfigError(f"{path}: line {i} has {len(row)} fields, header has {len(header)}")
        try:
            values[i - 2] = [float(v) for v in row]
        except ValueError as err:
            raise ConfigError(f"{path}: line {i}: {err}") from err
    if not np.all(np.isfinite(values)):
        raise ConfigError(f"{path}: non-finite values")
    return header, Dataset(values[:, 1:], values[:, 0])


def _quantile_labels(level: float) -> tuple:
    lo = 100 * (1 - level) / 2
    return f"q{lo:g}", f"q{100 - lo:g}"


# -- subcommands -----------------------------------------------------------------


def cmd_fit(cfg: RunConfig, data_path, save_draws: bool = False) -> int:
    header, data = read_data_csv(data_path)
    out_dir = _make_out_dir(cfg.output_dir)
    start = time.perf_counter()
    try:
        draws = fit_hdben(data, cfg.hyperparameters(), cfg.sampler_config())
    except ChainFailure as err:
        print(f"error: sampler failed in chain(s) {sorted(err.failed)}: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except SingularMatrixError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    wall = time.perf_counter() - start
    if draws.kept < 4:
        raise ConfigError("need at least 4 kept draws per chain to summarize")
    rule = SupportRule(level=cfg.support_level)
    summary = summarize(draws, rule)
    q_lo, q_hi = _quantile_labels(cfg.support_level)
    names = header[1:]
    rows = []
    for block_name, block, support in (
        ("beta", summary.beta, summary.support_beta),
        ("gamma", summary.gamma, summary.support_gamma),
    ):
        for j, name in enumerate(names):
            rows.append([
                name, block_name, block.mean[j], block.sd[j], block.q_low[j], block.q_high[j],
                block.rhat[j], block.ess[j], j in support,
            ])
    _write_table(
        out_dir, "summary",
        ["coordinate", "block", "mean", "sd", q_lo, q_hi, "rhat", "ess", "selected"],
        rows, cfg.format,
    )
    if save_draws:
        scalar_names = sorted(draws.scalar_draws)
        draw_header = (
            ["chain", "draw"]
            + [f"beta[{c}]" for c in names]
            + [f"gamma[{c}]" for c in names]
            + scalar_names
        )
        draw_rows = []
        for c in range(draws.chains):
            for t in range(draws.kept):
                draw_rows.append(
                    [c, t, *draws.beta_draws[c, t], *draws.gamma_draws[c, t]]
                    + [draws.scalar_draws[k][c, t] for k in scalar_names]
                )
        _write_table(out_dir, "draws", draw_header, draw_rows, cfg.format)
    _write_meta(out_dir, {
        "command": "fit",
        "version": __version__,
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "data": str(data_path),
        "n": data.n,
        "d": data.d,
        "mh_acceptance": summary.mh_acceptance,
        "mh_accepted": draws.mh_accepted.tolist(),
        "mh_proposed": draws.mh_proposed.tolist(),
        "final_step_sizes": draws.step_sizes.tolist(),
        "max_rhat_beta": float(np.max(summary.beta.rhat)),
        "min_ess_beta": float(np.min(summary.beta.ess)),
        "wall_seconds": wall,
    })
    log.info("fit done in %.1fs; summary written to %s", wall, out_dir)
    return EXIT_OK


RESULT_COLUMNS = [
    "n", "d", "s_beta", "s_gamma", "method", "replicate", "l2_error", "tpr", "fpr", "exact",
    "seconds",
]
SUMMARY_COLUMNS = [
    "n", "d", "s_beta", "s_gamma", "method", "mean_error", "sd_error", "mean_tpr", "mean_fpr",
    "exact_rate", "mean_seconds", "completed", "failures",
]


def _emit_grid(results: list, out_dir: Path, fmt: str) -> tuple:
    raw, agg, failures, dead = [], [], [], []
    for res in results:
        spec = res.spec
        key = [spec.n, spec.d, spec.s_beta, spec.s_gamma]
        for r in res.records:
            raw.append(key + [r.method, r.replicate, r.l2_error, r.tpr, r.fpr, r.exact, r.seconds])
            if not r.ok:
                failures.append({"cell": key, "method": r.method, "replicate": r.replicate,
                                 "error": r.error})
        for m, a in res.methods.items():
            agg.append(key + [m, a.mean_error, a.sd_error, a.mean_tpr, a.mean_fpr, a.exact_rate,
                              a.mean_seconds, a.completed, a.failures])
            if a.completed == 0:
                dead.append((key, m))
    _write_table(out_dir, "results", RESULT_COLUMNS, raw, fmt)
    _write_table(out_dir, "results_summary", SUMMARY_COLUMNS, agg, fmt)
    return failures, dead


def _finish_grid(dead: list) -> int:
    if dead:
        for key, m in dead:
            print(f"error: every replicate of {m} failed at (n, d, s_beta, s_gamma)={key}",
                  file=sys.stderr)
        return EXIT_ALL_FAILED
    return EXIT_OK


def cmd_simulate(cfg: RunConfig) -> int:
    spec = cfg.scenario()
    out_dir = _make_out_dir(cfg.output_dir)
    start = time.perf_counter()
    results = run_grid([spec], workers=cfg.workers)
    failures, dead = _emit_grid(results, out_dir, cfg.format)
    _write_meta(out_dir, {
        "command": "simulate",
        "version": __version__,
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "scenario": spec_to_dict(spec),
        "failures": failures,
        "wall_seconds": time.perf_counter() - start,
    })
    return _finish_grid(dead)


DISPLAY_NAMES = {
    "ols": "OLS", "lasso": "Lasso", "enet": "EN", "blasso": "BLasso", "ben": "BEN",
    "hdben": "HDBEN",
}
TABLES = ("table2", "table3")


def table_rows(table: str, results: list) -> tuple:
    """Table-shaped layout: one row per (method, row key), one column per column key."""
    if table == "table2":
        row_key, col_key = "s_beta", "d"
    else:
        row_key, col_key = "d", "n"
    cols = sorted({getattr(r.spec, col_key) for r in results})
    row_vals = sorted({getattr(r.spec, row_key) for r in results})
    cells = {}
    for r in results:
        for m, a in r.methods.items():
            text = "" if a.completed == 0 else f"{a.mean_error:.4f} ± {a.sd_error:.4f}"
            cells[(m, getattr(r.spec, row_key), getattr(r.spec, col_key))] = text
    methods = [m for m in METHODS if any(k[0] == m for k in cells)]
    header = ["model", "row"] + [f"{col_key}={c}" for c in cols]
    rows = [
        [DISPLAY_NAMES[m], f"{row_key}={v}"] + [cells.get((m, v, c), "") for c in cols]
        for m in methods
        for v in row_vals
    ]
    return header, rows


def cmd_reproduce(cfg: RunConfig, table: str, profile: str) -> int:
    if table not in TABLES:
        raise ConfigError(f"unknown table {table!r}; choose from {TABLES}")
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}; choose from {tuple(PROFILES)}")
    build = table2_specs if table == "table2" else table3_specs
    base = cfg.scenario()
    specs = [
        replace(
            s,
            tau_update_mode=base.tau_update_mode,
            support_level=base.support_level,
            beta_range=base.beta_range,
            gamma_range=base.gamma_range,
            sampler_options=base.sampler_options,
            hyperparameters=base.hyperparameters,
        )
        for s in build(profile, seed=cfg.seed, methods=cfg.methods)
    ]
    out_dir = _make_out_dir(cfg.output_dir)
    start = time.perf_counter()
    results = run_grid(specs, workers=cfg.workers)
    failures, dead = _emit_grid(results, out_dir, cfg.format)
    header, rows = table_rows(table, results)
    _write_table(out_dir, table, header, rows, cfg.format)
    _write_meta(out_dir, {
        "command": "reproduce",
        "version": __version__,
        "table": table,
        "profile": profile,
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "scenarios": [spec_to_dict(s) for s in specs],
        "failures": failures,
        "wall_seconds": time.perf_counter() - start,
    })
    return _finish_grid(dead)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hdben", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file (flat object)")
        p.add_argument("--out", help="output directory (overrides output_dir)")
        p.add_argument("--seed", type=int, help="master seed (overrides config)")
        p.add_argument("--profile", choices=tuple(PROFILES), help="desk or full settings")

    p_fit = sub.add_parser("fit", help="fit HDBEN to a CSV data file")
    common(p_fit)
    p_fit.add_argument("--data", required=True, help="CSV with header; y first, then covariates")
    p_fit.add_argument("--save-draws", action="store_true", help="also write draws.csv")

    p_sim = sub.add_parser("simulate", help="run one simulated scenario")
    common(p_sim)
    p_sim.add_argument("--method", help="comma-separated methods (overrides config)")

    p_rep = sub.add_parser("reproduce", help="rerun a simulation table")
    common(p_rep)
    p_rep.add_argument("--table", required=True, help="table2 or table3")
    p_rep.add_argument("--method", help="comma-separated methods (overrides config)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = parse_config(args.config) if args.config else RunConfig()
        cfg = _overrides(cfg, args)
        if args.command == "fit":
            return cmd_fit(cfg, args.data, args.save_draws)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        return cmd_reproduce(cfg, args.table, args.profile or "desk")
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except ContractViolation as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
