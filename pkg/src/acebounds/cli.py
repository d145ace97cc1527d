"""Command-line interface.

Subcommands: `bounds`, `estimate`, `simulate`, `compare`, `oracle`.
Configuration is a flat key=value text file; any key can be overridden on the
command line with --set key=value.  Output files are written atomically
(temp file + rename).  CSV output carries 6 significant digits; json carries
full precision.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile

import numpy as np

from . import compare as cmp_mod
from .bounds import MODELS, SimDgpParams, bound, simdgp_bound
from .dist import TreatmentPair, read_dist_csv
from .errors import AceboundsError, DomainError
from .estimators import ESTIMATOR_TAGS, EstimationResult, estimate_all
from .fitting import CrossFitPlan, ModelSpec, fit, read_data_csv
from .influence import brute_force_variance
from .simlab import McConfig, run_mc, setting_model_specs

__all__ = ["main"]


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".acebounds-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        _atomic_write(out, text)


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".6g")
    return str(value)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def read_config(path: str | None) -> dict:
    """Flat `key = value` lines; '#' starts a comment; later keys win."""
    cfg: dict = {}
    if path is None:
        return cfg
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DomainError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
            key, value = line.split("=", 1)
            cfg[key.strip()] = value.strip()
    return cfg


def _apply_overrides(cfg: dict, pairs) -> dict:
    for item in pairs or []:
        if "=" not in item:
            raise DomainError(f"override {item!r} is not key=value")
        key, value = item.split("=", 1)
        cfg[key.strip()] = value.strip()
    return cfg


def _parse_pair(cfg: dict) -> TreatmentPair:
    return TreatmentPair(float(cfg.get("a_star", 1.0)), float(cfg.get("a_ref", 0.0)))


def _parse_dgp(cfg: dict) -> SimDgpParams:
    kwargs = {}
    for key in ("alpha", "beta", "gamma1", "gamma2", "sigma_z", "sigma_y", "p_c"):
        if key in cfg:
            kwargs[key] = float(cfg[key])
    missing = {"alpha", "beta", "gamma1", "gamma2"} - set(kwargs)
    if missing:
        raise DomainError(f"dgp parameters missing: {sorted(missing)}")
    return SimDgpParams(**kwargs)


def _parse_models(cfg: dict):
    raw = cfg.get("models", "all")
    if raw == "all":
        return MODELS
    models = tuple(tok.strip().upper() for tok in raw.split(",") if tok.strip())
    unknown = set(models) - set(MODELS)
    if unknown:
        raise DomainError(f"unknown models {sorted(unknown)}")
    return models


def _parse_spec_value(slot: str, value: str) -> ModelSpec:
    tokens = value.split()
    if not tokens:
        raise DomainError(f"empty model spec for {slot}")
    family = tokens[0]
    predictors: tuple = ()
    omit: tuple = ()
    fix = None
    for tok in tokens[1:]:
        if "=" not in tok:
            raise DomainError(f"bad spec token {tok!r} for {slot}")
        key, val = tok.split("=", 1)
        if key == "predictors":
            predictors = tuple(p for p in val.split("+") if p)
        elif key == "omit":
            omit = tuple(p for p in val.split("+") if p)
        elif key == "fix":
            fix = float(val)
        else:
            raise DomainError(f"unknown spec option {key!r} for {slot}")
    return ModelSpec(slot, family, predictors=predictors, omit=omit, fix_value=fix)


def _parse_model_specs(cfg: dict):
    preset = cfg.get("preset")
    specs = {}
    if preset is not None:
        if preset.startswith("sim-setting-"):
            for spec in setting_model_specs(int(preset.rsplit("-", 1)[1])):
                specs[spec.component] = spec
        elif preset == "empirical":
            for slot in ("p_c", "p_a", "p_a_given_c", "p_z_given_a", "p_z_given_ac"):
                specs[slot] = ModelSpec(slot, "empirical", predictors=_slot_preds(slot))
            for slot in ("mean_y_ac", "mean_y_az", "mean_y_zc", "mean_y_azc"):
                specs[slot] = ModelSpec(slot, "empirical", predictors=_slot_preds(slot))
        else:
            raise DomainError(f"unknown preset {preset!r}")
    for key, value in cfg.items():
        if key.startswith("nuisance."):
            slot = key.split(".", 1)[1]
            specs[slot] = _parse_spec_value(slot, value)
    if not specs:
        raise DomainError("no nuisance model specs: give preset=... or nuisance.<slot>=... lines")
    return list(specs.values())


def _slot_preds(slot: str):
    from .fitting import SLOTS

    args, response, _ = SLOTS[slot]
    return tuple(v for v in args if v != response)


def _parse_tags(cfg: dict):
    raw = cfg.get("tags", "all")
    if raw == "all":
        return ESTIMATOR_TAGS
    tags = tuple(tok.strip().upper() for tok in raw.split(",") if tok.strip())
    unknown = set(tags) - set(ESTIMATOR_TAGS)
    if unknown:
        raise DomainError(f"unknown tags {sorted(unknown)}")
    return tags


# -- subcommands --------------------------------------------------------------


def cmd_bounds(args) -> int:
    cfg = _apply_overrides(read_config(args.config), args.set)
    if args.dgp:
        _apply_overrides(cfg, args.dgp.split(","))
    if args.dist:
        cfg["dist"] = args.dist
    pair = _parse_pair(cfg)
    models = _parse_models(cfg)
    nodes = int(cfg.get("gh_nodes", 64))
    if "dist" in cfg:
        dist = read_dist_csv(cfg["dist"])
        reports = [bound(dist, pair, model) for model in models]
    else:
        params = _parse_dgp(cfg)
        reports = [simdgp_bound(params, pair, model, n_nodes=nodes) for model in models]
    if args.format == "json":
        _emit(json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True), args.out)
    else:
        rows = [(r.model, r.value, r.method, r.pair.a_star, r.pair.a_ref) for r in reports]
        _emit(_csv_text(("model", "value", "method", "a_star", "a_ref"), rows), args.out)
    return 0


def cmd_estimate(args) -> int:
    cfg = _apply_overrides(read_config(args.config), args.set)
    if args.data:
        cfg["data"] = args.data
    if "data" not in cfg:
        raise DomainError("estimate needs a dataset (--data or data=... in the config)")
    pair = _parse_pair(cfg)
    data = read_data_csv(cfg["data"], pair)
    specs = _parse_model_specs(cfg)
    folds = int(cfg.get("crossfit_folds", 0))
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    plan = CrossFitPlan(folds=folds, seed=seed)
    eta = fit(data, specs, plan=plan, gh_nodes=int(cfg.get("gh_nodes", 64)))
    tags = _parse_tags(cfg)
    td_reduced = cfg.get("td_form", "general") == "reduced"
    results = estimate_all(data, eta, tags, td_reduced=td_reduced)
    if args.format == "json":
        _emit(json.dumps([r.to_dict() for r in results], indent=2, sort_keys=True), args.out)
    else:
        _emit(_csv_text(EstimationResult.CSV_HEADER, [r.csv_row() for r in results]), args.out)
    return 0


def cmd_simulate(args) -> int:
    cfg = _apply_overrides(read_config(args.config), args.set)
    params = _parse_dgp(cfg)
    sizes = tuple(int(x) for x in str(cfg.get("sizes", "5000")).split(",") if x)
    replicates = int(cfg.get("replicates", 200))
    if args.paper_scale:
        sizes, replicates = (50000,), 1000
    config = McConfig(
        params=params,
        sizes=sizes,
        replicates=replicates,
        tags=_parse_tags(cfg),
        setting=int(cfg.get("setting", 0)),
        seed=args.seed if args.seed is not None else int(cfg.get("seed", 0)),
        threads=args.threads if args.threads else int(cfg.get("threads", 1)),
        gh_nodes=int(cfg.get("gh_nodes", 64)),
    )
    summary = run_mc(config)
    if args.format == "json":
        payload = {
            "theta": summary.theta,
            "failed": summary.failed,
            "rows": [vars(r) for r in summary.rows],
        }
        _emit(json.dumps(payload, indent=2, sort_keys=True), args.out)
    else:
        _emit(summary.to_csv(), args.out)
    return 0


def cmd_compare(args) -> int:
    cfg = _apply_overrides(read_config(args.config), args.set)
    if args.interval is not None:
        low, high = cmp_mod.density_ratio_interval(args.interval)
        if args.format == "json":
            _emit(json.dumps({"p_star": args.interval, "low": low, "high": high}), args.out)
        else:
            _emit(_csv_text(("p_star", "low", "high"), [(args.interval, low, high)]), args.out)
        return 0
    if args.scan:
        grid = cmp_mod.default_scan_grid()
        for key in grid:
            if key in cfg:
                grid[key] = np.array([float(v) for v in cfg[key].split(",")])
        rows = cmp_mod.binary_family_scan(grid)
        buf = io.StringIO()
        cmp_mod.scan_to_csv(rows, buf)
        _emit(buf.getvalue(), args.out)
        violations = int(np.sum(rows["interval_member"] & (rows["diff"] > 1e-10)))
        if violations:
            sys.stderr.write(f"{violations} grid points violate the ratio-band ordering\n")
            return 1
        return 0
    if args.dist:
        dist = read_dist_csv(args.dist)
        pair = _parse_pair(cfg)
        gap = cmp_mod.td_minus_bd_gap(dist, pair)
        verdict = cmp_mod.td_vs_bd_verdict(dist, pair)
        payload = {
            "td_minus_bd": gap,
            "ordering": verdict.ordering,
            "holds_everywhere": verdict.holds_everywhere,
            "holds_nowhere": verdict.holds_nowhere,
            "cells": {f"z={z},c={c}": v for (z, c), v in verdict.cell_values.items()},
        }
        if "coef" in cfg:
            coef = [float(v) for v in cfg["coef"].split(",")]
            fd_verdict = cmp_mod.fd_vs_bd_verdict(dist, pair, coef)
            payload["fd_vs_bd"] = {
                "ordering": fd_verdict.ordering,
                "reciprocal_gaps": fd_verdict.extras["reciprocal_gaps"],
            }
        _emit(json.dumps(payload, indent=2, sort_keys=True), args.out)
        return 0
    raise DomainError("compare needs one of --interval, --scan or --dist")


def cmd_oracle(args) -> int:
    cfg = _apply_overrides(read_config(args.config), args.set)
    dist = read_dist_csv(args.dist)
    pair = _parse_pair(cfg)
    tol = float(cfg.get("tol", 1e-9))
    rows = []
    worst = 0.0
    for model in MODELS:
        closed = bound(dist, pair, model).value
        enum = brute_force_variance(dist, pair, model)
        diff = abs(closed - enum)
        worst = max(worst, diff)
        rows.append((model, closed, enum, diff))
    if args.format == "json":
        payload = [
            {"model": m, "formula": c, "enumeration": e, "abs_diff": d} for m, c, e, d in rows
        ]
        _emit(json.dumps(payload, indent=2, sort_keys=True), args.out)
    else:
        _emit(_csv_text(("model", "formula", "enumeration", "abs_diff"), rows), args.out)
    if worst > tol:
        sys.stderr.write(f"oracle discrepancy {worst:.3e} exceeds tolerance {tol:.1e}\n")
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="acebounds", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
        p.add_argument("--out", help="output path (atomic write); default stdout")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=0, help="worker threads where supported")

    p = sub.add_parser("bounds", help="efficiency bounds for a dist file or the Gaussian-mediator family")
    common(p)
    p.add_argument("--dist", help="distribution file with header c,a,z,y,p")
    p.add_argument("--dgp", help="comma list, e.g. alpha=1,beta=0.5,gamma1=0.5,gamma2=0.5")
    p.set_defaults(handler=cmd_bounds)

    p = sub.add_parser("estimate", help="plug-in estimates on an observation file")
    common(p)
    p.add_argument("--data", help="observations with header c,a,z,y")
    p.set_defaults(handler=cmd_estimate)

    p = sub.add_parser("simulate", help="Monte Carlo study of the estimators")
    common(p)
    p.add_argument("--paper-scale", action="store_true", help="n=50000, 1000 replicates")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("compare", help="bound comparisons: interval, grid scan or per-dist verdicts")
    common(p)
    p.add_argument("--interval", type=float, help="p(a*|c) for the density-ratio interval")
    p.add_argument("--scan", action="store_true", help="scan the all-binary example family grid")
    p.add_argument("--dist", help="distribution file for a per-dist verdict")
    p.set_defaults(handler=cmd_compare)

    p = sub.add_parser("oracle", help="check bound formulas against brute-force enumeration")
    common(p)
    p.add_argument("--dist", required=True, help="distribution file with header c,a,z,y,p")
    p.set_defaults(handler=cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except AceboundsError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
