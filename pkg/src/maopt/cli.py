"""Command-line front end.

Subcommands: optimize (antenna positions for one drawn user set), evaluate
(scheme benchmark over realizations), sweep (evaluate along one scenario
axis), validate (oracle suites).  Exit codes: 0 success, 1 validation
failure, 2 usage/config error, 3 numeric failure.  All dBm values are
converted to watts here; the library itself is linear-unit only.  Every
output file carries the config hash so artifacts can be traced to inputs.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import asdict

from .channel import MovingRegion
from .errors import ConfigError, InvalidInputError, NumericError
from .optimizer import OptimizerConfig, optimize_positions, upa_sparse_layout
from .scenario import (SCHEMES, ScenarioSpec, draw_user_set, generate_candidates,
                       reports_to_csv, reports_to_json, run_experiment)
from .rng import child_rng
from .validate import run_suites

SWEEP_AXES = ("S0", "pt", "beta", "K", "tau")


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) / 1000.0


def config_hash(doc: dict) -> str:
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]


def _load_config(path: str) -> dict:
    if not path:
        raise ConfigError("a --config file is required for this subcommand")
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc


def _scenario_from_config(doc: dict, seed_override: int | None) -> ScenarioSpec:
    if "scenario" not in doc:
        raise ConfigError("config must contain a 'scenario' object")
    sc = dict(doc["scenario"])
    for linear, dbm in (("pt", "pt_dbm"), ("sigma2", "sigma2_dbm")):
        if dbm in sc:
            if linear in sc:
                raise ConfigError(f"give either {linear} or {dbm}, not both")
            sc[linear] = dbm_to_watts(float(sc.pop(dbm)))
    region = sc.get("region")
    if not isinstance(region, dict):
        raise ConfigError("scenario.region must be an object with sx, sy, min_spacing")
    try:
        sc["region"] = MovingRegion(**region)
        sc["hotspot_centers"] = [tuple(map(float, c)) for c in sc.get("hotspot_centers", [])]
        if seed_override is not None:
            sc["seed"] = seed_override
        spec = ScenarioSpec(**sc)
    except (TypeError, InvalidInputError) as exc:
        raise ConfigError(f"bad scenario config: {exc}") from exc
    return spec


def _optimizer_from_config(doc: dict, spec: ScenarioSpec,
                           engine_override: str | None) -> OptimizerConfig:
    overrides = dict(doc.get("optimizer", {}))
    if engine_override:
        overrides["engine"] = engine_override
    try:
        return OptimizerConfig.defaults(spec.wavelength, **overrides)
    except (TypeError, InvalidInputError) as exc:
        raise ConfigError(f"bad optimizer config: {exc}") from exc


def _outdir(args) -> str:
    out = args.output or "."
    os.makedirs(out, exist_ok=True)
    return out


def cmd_optimize(args) -> int:
    doc = _load_config(args.config)
    spec = _scenario_from_config(doc, args.seed)
    cfg = _optimizer_from_config(doc, spec, args.engine)
    chash = config_hash({"config": doc, "seed": spec.seed, "engine": cfg.engine})
    candidates = generate_candidates(spec, spec.seed)
    csi = draw_user_set(candidates, spec,
                        int(child_rng(spec.seed, "users", 0).integers(0, 2 ** 63 - 1)))
    init = upa_sparse_layout(spec.n_antennas, spec.region)
    cfg.seed = int(child_rng(spec.seed, "opt-mc", 0).integers(0, 2 ** 63 - 1))
    layout, trace = optimize_positions(init, spec.region, csi, spec.pt, spec.sigma2, cfg)
    out = _outdir(args)
    with open(os.path.join(out, "layout.json"), "w") as fh:
        json.dump({"x": [float(v) for v in layout.x],
                   "y": [float(v) for v in layout.y],
                   "config_hash": chash}, fh)
    trace.to_csv(os.path.join(out, "trace.csv"), config_hash=chash)
    print(f"optimized {spec.n_antennas} positions over {len(trace.stages)} stages; "
          f"surrogate rate {trace.rows[0].rate:.4f} -> {trace.rows[-1].rate:.4f}")
    return 0


def _schemes_from_config(doc: dict) -> list:
    schemes = doc.get("schemes", ["UPA-dense", "UPA-sparse", "MA-DE"])
    bad = [s for s in schemes if s not in SCHEMES]
    if bad:
        raise ConfigError(f"unknown schemes {bad}; valid: {list(SCHEMES)}")
    return schemes


def cmd_evaluate(args) -> int:
    doc = _load_config(args.config)
    spec = _scenario_from_config(doc, args.seed)
    cfg = _optimizer_from_config(doc, spec, args.engine)
    schemes = _schemes_from_config(doc)
    realizations = int(doc.get("realizations", 10))
    eval_samples = int(doc.get("eval_samples", 100))
    chash = config_hash({"config": doc, "seed": spec.seed})
    reports = run_experiment(spec, schemes, realizations, eval_samples=eval_samples,
                             opt_cfg=cfg, n_jobs=args.jobs)
    out = _outdir(args)
    reports_to_csv(reports, os.path.join(out, "report.csv"), config_hash=chash)
    with open(os.path.join(out, "summary.json"), "w") as fh:
        fh.write(reports_to_json(reports, config_hash=chash))
    for rep in reports:
        print(f"{rep.scheme:18s} mean rate {rep.mean_rate:8.4f}  se {rep.stderr:.4f}"
              f"  failures {len(rep.failures)}")
    return 0


def _apply_sweep(spec: ScenarioSpec, axis: str, value) -> ScenarioSpec:
    kw = {f.name: getattr(spec, f.name) for f in spec.__dataclass_fields__.values()}
    if axis == "S0":
        kw["region"] = MovingRegion(float(value), float(value), spec.region.min_spacing)
    elif axis == "pt":
        kw["pt"] = float(value)
    elif axis == "beta":
        kw["rician_beta"] = float(value)
    elif axis == "K":
        kw["n_users"] = int(value)
    elif axis == "tau":
        kw["cluster_rate"] = float(value)
    return ScenarioSpec(**kw)


def cmd_sweep(args) -> int:
    doc = _load_config(args.config)
    spec = _scenario_from_config(doc, args.seed)
    cfg = _optimizer_from_config(doc, spec, args.engine)
    schemes = _schemes_from_config(doc)
    sweep = doc.get("sweep")
    if not isinstance(sweep, dict) or "axis" not in sweep:
        raise ConfigError("sweep config must contain {'axis': ..., 'values': [...]}")
    axis = sweep["axis"]
    values = sweep.get("values", [])
    if axis not in SWEEP_AXES:
        raise ConfigError(f"sweep axis must be one of {SWEEP_AXES}")
    if not values:
        raise ConfigError("sweep values list is empty")
    realizations = int(doc.get("realizations", 10))
    eval_samples = int(doc.get("eval_samples", 100))
    chash = config_hash({"config": doc, "seed": spec.seed})
    out = _outdir(args)
    path = os.path.join(out, "sweep.csv")
    rows_written = 0
    summary = {"config_hash": chash, "axis": axis, "points": []}
    with open(path, "w", newline="\n") as fh:
        fh.write(f"# config_hash={chash}\n")
        fh.write(f"{axis},scheme,realization,mean_rate,stderr\n")
        for value in values:
            reports = run_experiment(_apply_sweep(spec, axis, value), schemes,
                                     realizations, eval_samples=eval_samples,
                                     opt_cfg=cfg, n_jobs=args.jobs)
            for rep in reports:
                for r, (rate, se) in enumerate(zip(rep.rates, rep.stderrs)):
                    fh.write(f"{value!r},{rep.scheme},{r},{rate!r},{se!r}\n")
                    rows_written += 1
            summary["points"].append({
                "value": value,
                "schemes": {rep.scheme: {"mean_rate": rep.mean_rate,
                                         "stderr": rep.stderr} for rep in reports},
            })
    with open(os.path.join(out, "sweep_summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
    print(f"wrote {rows_written} rows to {path}")
    return 0


def cmd_validate(args) -> int:
    results = run_suites(args.level)
    width = max(len(r.name) for r in results)
    all_pass = True
    for r in results:
        mark = "PASS" if r.passed else "FAIL"
        all_pass &= r.passed
        print(f"{r.name:<{width}s}  {mark}  [{r.runtime:6.2f}s]  {r.detail}")
    print("overall:", "PASS" if all_pass else "FAIL")
    return 0 if all_pass else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="maopt",
                                description="Movable-antenna position optimization toolkit")
    sub = p.add_subparsers(dest="subcommand", required=True)
    for name, fn in (("optimize", cmd_optimize), ("evaluate", cmd_evaluate),
                     ("sweep", cmd_sweep), ("validate", cmd_validate)):
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=str, default=None)
        sp.add_argument("--output", type=str, default=None)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--engine", type=str, choices=("mc", "de"), default=None)
        sp.add_argument("--jobs", type=int, default=max(os.cpu_count() or 1, 1))
        sp.add_argument("--level", type=str, choices=("quick", "full"), default="quick")
        sp.set_defaults(fn=fn)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, InvalidInputError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
