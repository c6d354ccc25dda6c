"""Command-line interface.

Subcommands: ``detect``, ``approximate``, ``bench``, ``lattice``, ``bound``,
``eval``.  Every run writes a manifest JSON next to its outputs; reruns with
identical configuration and seed produce byte-identical artifacts apart from
the timing fields.

Exit codes: 0 success, 1 pipeline failure, 2 configuration/schema error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, _kernels
from .anova import sensitivity, term_family_ds
from .index_sets import GroupedIndexSet, TermFamily, grouped
from .lattice import cbc_construct, load_lattice, save_lattice
from .method import (ApproxModel, DetectionConfig, build_search_sets,
                     approximate, detect, gap_intervals, tiered_sets)
from .operator import NodeSet
from .weights import (WeightParams, bound_curve, parse_weight_sequence,
                      sobolev_trunc_bound_l2, sobolev_trunc_bound_linf,
                      wiener_trunc_bound)


class ConfigError(Exception):
    """Schema or value error in a run configuration (exit code 2)."""


def _load_config(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {path}:{exc.lineno}: {exc.msg}")


def _require(cfg, key, typ, where="config"):
    if key not in cfg:
        raise ConfigError(f"{where}: missing required field {key!r}")
    val = cfg[key]
    if typ is float and isinstance(val, int):
        val = float(val)
    if not isinstance(val, typ):
        raise ConfigError(f"{where}.{key}: expected {typ.__name__}, got {type(val).__name__}")
    return val


def _digest(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True,
                                     separators=(",", ":")).encode()).hexdigest()


def _write_manifest(outdir: Path, command: str, cfg, seeds, artifacts, t0):
    manifest = {"command": command,
                "config_digest": _digest(cfg),
                "seeds": seeds,
                "artifacts": sorted(str(a) for a in artifacts),
                "tool_version": __version__,
                "backend": _kernels.BACKEND,
                "wall_time_seconds": time.time() - t0}
    path = outdir / f"{command}-manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return path


def _target_from_config(cfg):
    target = cfg.get("target", {"builtin": "bench"})
    if "builtin" in target:
        if target["builtin"] != "bench":
            raise ConfigError(f"unknown builtin target {target['builtin']!r}")
        from .bench import testfun_value
        return testfun_value
    if "csv" in target:
        d = int(cfg["d"])
        data = np.loadtxt(target["csv"], delimiter=";", ndmin=2)
        if data.shape[1] != d + 1:
            raise ConfigError(f"target.csv: expected {d + 1} columns, got {data.shape[1]}")
        X = data[:, :d]
        wrapped = int(np.sum((X < 0) | (X >= 1)))
        if wrapped:
            print(f"warning: {wrapped} coordinates reduced mod 1", file=sys.stderr)
            X = X - np.floor(X)
        return (NodeSet(X, {"kind": "scattered", "source": target["csv"]}),
                data[:, d])
    raise ConfigError("target must specify 'builtin' or 'csv'")


def _detection_config(cfg, args) -> DetectionConfig:
    d = _require(cfg, "d", int)
    d_s = _require(cfg, "d_s", int)
    if not 1 <= d_s <= d:
        raise ConfigError(f"d_s must satisfy 1 <= d_s <= d, got d_s={d_s}, d={d}")
    search = _require(cfg, "search", dict)
    if search.get("type") not in ("full_grid", "hyperbolic_cross", "weighted"):
        raise ConfigError("search.type must be full_grid | hyperbolic_cross | weighted")
    N = _require(search, "N", list, "config.search")
    if len(N) != d_s:
        raise ConfigError(f"search.N must list one cutoff per order 1..{d_s}")
    thresholds = cfg.get("thresholds", [0.0] * d_s)
    sampling = dict(_require(cfg, "sampling", dict))
    sampling.setdefault("kind", args.scenario or cfg.get("scenario", "scattered"))
    if args.seed is not None:
        sampling["seed"] = args.seed
    try:
        return DetectionConfig(d=d, d_s=d_s, search=search, thresholds=thresholds,
                               sampling=sampling, solver=cfg.get("solver", {}))
    except ValueError as exc:
        raise ConfigError(str(exc))


def cmd_detect(args) -> int:
    t0 = time.time()
    cfg = _load_config(args.config)
    dc = _detection_config(cfg, args)
    target = _target_from_config(cfg)
    result = detect(dc, target)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    artifacts = []
    p = outdir / "sensitivity.json"
    p.write_text(json.dumps(result.report.to_json_dict(), indent=2, sort_keys=True))
    artifacts.append(p)
    p = outdir / "sensitivity.csv"
    p.write_text(result.report.to_csv())
    artifacts.append(p)
    p = outdir / "active_set.json"
    p.write_text(json.dumps({"d": dc.d,
                             "terms": [list(u) for u in result.active.sorted_terms()]},
                            indent=2))
    artifacts.append(p)
    if cfg.get("truth") == "bench-ustar":
        from .bench import u_star
        gaps = gap_intervals(result.report, u_star(), dc.d_s)
        p = outdir / "gaps.json"
        p.write_text(json.dumps({"gaps": [list(g) if g else None for g in gaps]},
                                indent=2))
        artifacts.append(p)
    p = outdir / "pilot-model.json"
    result.pilot.save(p)
    artifacts.append(p)
    if "lattice" in result.pilot.provenance:
        lp = outdir / "pilot-lattice.json"
        lp.write_text(json.dumps(result.pilot.provenance["lattice"],
                                 indent=2, sort_keys=True))
        artifacts.append(lp)
    manifest = _write_manifest(outdir, "detect", cfg,
                               dc.sampling.get("seed"), artifacts, t0)
    if "lattice" in result.pilot.provenance:
        doc = json.loads(manifest.read_text())
        doc["lattice_M"] = result.pilot.provenance["lattice"]["M"]
        manifest.write_text(json.dumps(doc, indent=2, sort_keys=True))
    return 0


def cmd_approximate(args) -> int:
    t0 = time.time()
    cfg = _load_config(args.config)
    d = _require(cfg, "d", int)
    d_s = _require(cfg, "d_s", int)
    search = _require(cfg, "search", dict)
    sampling = dict(_require(cfg, "sampling", dict))
    sampling.setdefault("kind", args.scenario or cfg.get("scenario", "scattered"))
    if args.seed is not None:
        sampling["seed"] = args.seed
    target = _target_from_config(cfg)
    if "active_set" in cfg:
        terms = [tuple(u) for u in _require(cfg, "active_set", list)]
        family = TermFamily.downward_closure(d, terms + [()])
    else:
        raise ConfigError("approximate requires an 'active_set' list of terms")
    tier_record = None
    if cfg.get("tiering"):
        dc = _detection_config({**cfg, "thresholds": [0.0] * d_s}, args)
        pilot = detect(dc, target)
        sets, tier_record = tiered_sets(family, pilot.report, search, d)
    else:
        try:
            sets = build_search_sets(d, d_s, search, family=family)
        except ValueError as exc:
            raise ConfigError(str(exc))
    model = approximate(family, sets, target, sampling, cfg.get("solver", {}))
    if tier_record:
        model.provenance["tiering"] = tier_record
    model.provenance["config"] = {k: v for k, v in cfg.items() if k != "target"}
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    p = outdir / "model.json"
    model.save(p)
    artifacts = [p]
    artifacts.append(_write_manifest(outdir, "approximate", cfg,
                                     sampling.get("seed"), artifacts, t0))
    return 0


def cmd_bench(args) -> int:
    from .bench import DESK_CONFIGS, TABLE_CONFIGS, ExperimentRow, run_experiment
    t0 = time.time()
    if args.config:
        cfg = _load_config(args.config)
    elif args.table is not None:
        key = (args.table, args.row or 1)
        if key not in TABLE_CONFIGS:
            raise ConfigError(f"no registered config for table {key[0]} row {key[1]}")
        cfg = dict(TABLE_CONFIGS[key])
        cfg["id"] = f"table{key[0]}-row{key[1]}"
    elif args.desk:
        if args.desk not in DESK_CONFIGS:
            raise ConfigError(f"unknown desk scenario {args.desk!r}; "
                              f"choose from {sorted(DESK_CONFIGS)}")
        cfg = dict(DESK_CONFIGS[args.desk])
        cfg["id"] = f"desk-{args.desk}"
    else:
        raise ConfigError("bench needs --config, --table or --desk")
    if args.seed is not None:
        cfg.setdefault("sampling", {})["seed"] = args.seed
    row = run_experiment(cfg)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    csv_path = outdir / "experiments.csv"
    new = not csv_path.exists()
    with open(csv_path, "a") as fh:
        if new:
            fh.write(ExperimentRow.csv_header() + "\n")
        fh.write(row.csv_line() + "\n")
    json_path = outdir / f"{row.id}.json"
    json_path.write_text(json.dumps({
        "id": row.id, "scenario": row.scenario, "d_s": row.d_s,
        "N": list(row.N), "set_size": row.set_size, "samples": row.samples,
        "eps_l2": row.eps_l2, "eps_L2": row.eps_L2,
        "gaps": [list(g) if g else None for g in row.gaps] if row.gaps else None,
        "seconds": row.seconds, "extra": row.extra,
        "scale": "desk" if args.desk else "full"}, indent=2))
    print(row.csv_line())
    _write_manifest(outdir, "bench", cfg, cfg.get("sampling", {}).get("seed"),
                    [csv_path, json_path], t0)
    return 0


def cmd_lattice(args) -> int:
    t0 = time.time()
    with open(args.index_set) as fh:
        idx = GroupedIndexSet.from_json_dict(json.load(fh))
    lat = cbc_construct(idx, seed=args.seed or 0)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    p = outdir / "lattice.json"
    save_lattice(p, lat, idx.digest())
    print(f"M = {lat.M}, z = {lat.z.tolist()}")
    _write_manifest(outdir, "lattice", {"index_set": args.index_set},
                    args.seed, [p], t0)
    return 0


def cmd_bound(args) -> int:
    t0 = time.time()
    d = args.d
    gamma = parse_weight_sequence(args.gammas, d)
    Gamma = parse_weight_sequence(args.Gammas, d)
    try:
        p = WeightParams(args.alpha, args.beta, gamma, Gamma)
    except ValueError as exc:
        raise ConfigError(str(exc))
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    lines = ["param;value;bound"]
    if args.sweep:
        lo, hi, num = args.sweep
        curve = bound_curve(p, args.ds, args.sweep_param,
                            np.linspace(lo, hi, int(num)), kind=args.kind)
        for t, v in zip(curve.grid, curve.values):
            lines.append(f"{args.sweep_param};{float(t)!r};{float(v)!r}")
        value = None
    else:
        if args.kind == "linf_zeta":
            value = sobolev_trunc_bound_linf(p, args.ds)
        else:
            value = sobolev_trunc_bound_l2(p, args.ds)
        lines.append(f"point;{args.ds};{float(value)!r}")
        print(f"bound = {value:.6e}")
    csv_path = outdir / "bound.csv"
    csv_path.write_text("\n".join(lines) + "\n")
    echo = outdir / "weight-params.json"
    echo.write_text(json.dumps({"alpha": args.alpha, "beta": args.beta,
                                "gamma": gamma.tolist(),
                                "Gamma": Gamma.tolist(), "d": d, "d_s": args.ds},
                               indent=2, sort_keys=True))
    _write_manifest(outdir, "bound", vars(args) | {"func": None}, None,
                    [csv_path, echo], t0)
    return 0


def cmd_eval(args) -> int:
    t0 = time.time()
    model = ApproxModel.load(args.model)
    if args.x:
        pts = np.asarray([[float(t) for t in args.x.split(",")]])
    else:
        pts = np.loadtxt(args.points, delimiter=";", ndmin=2)
    vals = model.evaluate(pts)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    p = outdir / "evaluations.csv"
    with open(p, "w") as fh:
        fh.write("index;re;im\n")
        for i, v in enumerate(vals):
            fh.write(f"{i};{float(v.real)!r};{float(v.imag)!r}\n")
        if args.x:
            print(f"value = {vals[0].real!r} + {vals[0].imag!r}i")
    _write_manifest(outdir, "eval", {"model": args.model}, None, [p], t0)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="anovafourier",
                                 description="Sparse ANOVA Fourier approximation")
    ap.add_argument("--threads", type=int, default=None,
                    help="cap worker threads for the numba backend")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, scenario=True):
        p.add_argument("--config", required=False)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=".")
        if scenario:
            p.add_argument("--scenario", choices=("scattered", "lattice"),
                           default=None)

    p = sub.add_parser("detect", help="pilot fit + sensitivity thresholding")
    common(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("approximate", help="refined fit on an active set")
    common(p)
    p.set_defaults(func=cmd_approximate)

    p = sub.add_parser("bench", help="benchmark-function experiment rows")
    common(p)
    p.add_argument("--table", type=int, default=None)
    p.add_argument("--row", type=int, default=None)
    p.add_argument("--desk", default=None,
                   help="named reduced-size scenario")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("lattice", help="build a reconstructing rank-1 lattice")
    p.add_argument("--index-set", required=True, dest="index_set")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_lattice)

    p = sub.add_parser("bound", help="truncation-bound evaluation/sweeps")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--ds", type=int, required=True)
    p.add_argument("--d", type=int, default=9)
    p.add_argument("--gammas", default="1/s")
    p.add_argument("--Gammas", default="1")
    p.add_argument("--kind", choices=("l2_linf_pod", "linf_zeta"),
                   default="l2_linf_pod")
    p.add_argument("--sweep", nargs=3, type=float, metavar=("LO", "HI", "NUM"))
    p.add_argument("--sweep-param", choices=("alpha", "beta"), default="alpha")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("eval", help="evaluate a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--x", default=None, help="comma-separated coordinates")
    p.add_argument("--points", default=None, help="CSV of points (';'-separated)")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_eval)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.threads:
        _kernels.set_threads(args.threads)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pipeline failure
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
