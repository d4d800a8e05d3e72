"""Command-line front end.

    lcfrisk predict   --mesh M.json --material MAT.json [--compare] ...
    lcfrisk calibrate --dataset D.csv --profiles P.json --material MAT.json ...
    lcfrisk encurve   --material FIT.json --profiles P.json --profile ID ...
    lcfrisk validate  [--mesh ...] [--material ...] [--dataset ...] [--profiles ...]

Exit codes: 0 ok, 2 invalid input, 3 numerical failure, 4 fit did not converge.
Every output embeds the tool version, the resolved configuration, SHA-256
hashes of the input files and the seed, and contains no timestamps, so
reruns on identical inputs are byte-identical.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import sys
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import calibration as cal
from . import reliability as rel
from .mesh_io import MeshError, build_quadrature, extract_surface, load_mesh
from .strain_life import N_CAP, load_material, material_to_dict

log = logging.getLogger("lcfrisk")

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL, EXIT_NOT_CONVERGED = 0, 2, 3, 4

SCHEMA_HELP = """\
input schemas
  mesh JSON      {"units": {"length": "mm", "stress": "MPa", "temperature": "C"},
                  "nodes": [[id, x, y, z], ...],
                  "elements": [{"type": "tet4"|"tet10", "conn": [ids]}, ...],
                  "fields": {"stress": [[xx, yy, zz, xy, yz, zx], ...], "temperature": [T, ...]},
                  "surface": [{"elem": index, "face": 0-3}, ...]   (optional)}
  material JSON  {"sigma_f", "b", "eps_f", "c", "E", "A", "k", "m"} as numbers, or curve
                 constants as arrays over "temperatures"; optional
                 "plasticity": {"rule": "elastic"|"neuber", "K_prime", "n_prime"}.
                 A is in mm^k (chi in 1/mm), eta refers to areas in mm^2.
  dataset CSV    profile_id,eps_a,temp_C,n_obs,censored
  profiles JSON  [{"id": ..., "kind": "uniform", "area": mm2} |
                  {"id": ..., "kind": "tabulated", "rows": [[dA, kappa, chi], ...]}, ...]
"""


class InputError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    mesh: str | None = None
    material: str | None = None
    dataset: str | None = None
    profiles: str | None = None
    profile: str | None = None
    out: str | None = None
    notch_support: bool = True
    compare: bool = False
    chi_mode: str = "normal"
    rule: int = 5
    n_cap: float = N_CAP
    seed: int = 0
    starts: int = 5
    bootstrap: int = 0
    ci_level: float = 0.925
    export: int = 200
    quantiles: tuple = (0.5,)
    eps_min: float | None = None
    eps_max: float | None = None
    points: int = 30
    temperature: float | None = None
    subsets: tuple = ()
    threads: int = 1
    inputs: dict = field(default_factory=dict)

    def resolved(self) -> dict:
        # output destinations and the worker count do not affect results;
        # leaving them out keeps reruns byte-identical
        d = asdict(self)
        for key in ("inputs", "out", "threads"):
            d.pop(key)
        return d


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def provenance(cfg: RunConfig) -> dict:
    return {
        "tool": "lcfrisk",
        "version": __version__,
        "config": cfg.resolved(),
        "inputs": {k: {"path": v, "sha256": _sha256(v)} for k, v in sorted(cfg.inputs.items())},
        "seed": cfg.seed,
    }


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False, default=_jsonable) + "\n"


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not JSON serializable: {type(o)}")


def _csv_with_header(prov: dict, body: str) -> str:
    return "# " + json.dumps(prov, sort_keys=True, separators=(",", ":"), default=_jsonable) + "\n" + body


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


# --------------------------------------------------------------------------
# subsets


def parse_subset(expr: str):
    """``name=box:x0,x1,y0,y1,z0,z1`` | ``name=sphere:x,y,z,r`` | ``name=elems:i,j,...``."""
    try:
        name, spec = expr.split("=", 1)
        kind, args = spec.split(":", 1)
        vals = [float(v) for v in args.split(",")]
    except ValueError as exc:
        raise InputError(f"bad subset expression {expr!r}") from exc
    if kind == "box" and len(vals) == 6:
        return name, kind, vals
    if kind == "sphere" and len(vals) == 4:
        return name, kind, vals
    if kind == "elems" and vals:
        return name, kind, vals
    raise InputError(f"bad subset expression {expr!r}")


def subset_mask(life: rel.LifeField, kind: str, vals) -> np.ndarray:
    p = life.position
    if kind == "box":
        x0, x1, y0, y1, z0, z1 = vals
        return ((p[:, 0] >= x0) & (p[:, 0] <= x1) & (p[:, 1] >= y0) & (p[:, 1] <= y1)
                & (p[:, 2] >= z0) & (p[:, 2] <= z1))
    if kind == "sphere":
        x, y, z, r = vals
        return np.sum((p - np.array([x, y, z])) ** 2, axis=1) <= r * r
    return np.isin(life.elem, np.array(vals, dtype=np.int64))


# --------------------------------------------------------------------------
# commands


def _subset_reports(life, m, subsets):
    out = {}
    union = np.zeros(len(life), dtype=bool)
    for name, kind, vals in subsets:
        mask = subset_mask(life, kind, vals)
        union |= mask
        out[name] = _subset_entry(life, mask, m, name)
    if subsets:
        out["rest"] = _subset_entry(life, ~union, m, "rest")
    return out


def _subset_entry(life, mask, m, name):
    n = int(np.count_nonzero(mask))
    if n == 0:
        return {"points": 0, "hazard_integral": 0.0, "eta": None, "median": None}
    sub = life.subset(mask)
    d = rel.distribution(sub, m, name)
    return {"points": n, "hazard_integral": rel.hazard_sum(sub, m), "eta": d.eta, "median": d.median}


def cmd_predict(cfg: RunConfig) -> int:
    mesh = load_mesh(cfg.mesh)
    material = load_material(cfg.material)
    cfg.inputs = {"mesh": cfg.mesh, "material": cfg.material}
    subsets = [parse_subset(s) for s in cfg.subsets]
    quad = build_quadrature(mesh, extract_surface(mesh), cfg.rule)
    fields = rel.surface_fields(mesh, quad, material, cfg.chi_mode)
    variants = [False, True] if cfg.compare else [cfg.notch_support]
    m = material.m
    out = Path(cfg.out)
    prov = provenance(cfg)
    report = {"provenance": prov, "distributions": {}, "sigma_floor_points": fields.floored_points}
    for ns in variants:
        life = rel.life_field(quad, fields, material, notch_support=ns, n_cap=cfg.n_cap)
        spec_N = rel.specimen_reference(life, material, cfg.n_cap)
        key = "notch_support" if ns else "plain"
        entry = rel.distribution_report(life, m, spec_N)
        entry["specimen_life"] = spec_N
        entry["subsets"] = _subset_reports(life, m, subsets)
        report["distributions"][key] = entry
        _write(out / f"hazard_{key}.csv", _csv_with_header(prov, rel.hazard_csv(life, m)))
    if cfg.compare:
        d = report["distributions"]
        report["median_ratio"] = d["notch_support"]["median"] / d["plain"]["median"]
    _write(out / "report.json", _dump_json(report))
    _write(out / "cdf.csv", _csv_with_header(prov, _cdf_table(report["distributions"])))
    for key, entry in report["distributions"].items():
        log.info("%s: eta=%.6g median=%.6g size-effect factor=%.4g", key, entry["eta"], entry["median"],
                 entry["size_effect_factor"])
    return EXIT_OK


def _cdf_table(dists: dict, n_points: int = 101) -> str:
    laws = {k: rel.WeibullLife(v["m"], v["eta"]) for k, v in dists.items()}
    lo = min(rel.quantile(1e-4, w) for w in laws.values())
    hi = max(rel.quantile(1 - 1e-4, w) for w in laws.values())
    grid = np.geomspace(lo, hi, n_points)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n"] + [f"F_{k}" for k in laws])
    for n in grid:
        w.writerow([repr(float(n))] + [repr(float(rel.weibull_cdf(n, law))) for law in laws.values()])
    return buf.getvalue()


def cmd_calibrate(cfg: RunConfig) -> int:
    dataset = cal.read_dataset(cfg.dataset)
    profiles = cal.read_profiles(cfg.profiles)
    material = load_material(cfg.material)
    cfg.inputs = {"dataset": cfg.dataset, "profiles": cfg.profiles, "material": cfg.material}
    try:
        dataset.check_profiles(profiles)
    except KeyError as exc:
        raise InputError(exc.args[0]) from exc
    out = Path(cfg.out)
    prov = provenance(cfg)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            res = cal.fit(dataset, profiles, material.theta, material, starts=cfg.starts, seed=cfg.seed)
            converged = True
        except cal.CalibrationError as exc:
            res, converged = exc.result, False
    notes = [str(w.message) for w in caught]
    for msg in notes:
        log.warning(msg)
    doc = {
        "provenance": prov,
        "theta": res.params,
        "converged": converged,
        "neg_log_likelihood": res.nll,
        "iterations": res.iterations,
        "evaluations": res.evaluations,
        "starts": res.starts,
        "free_parameters": [cal.THETA_NAMES[i] for i in res.free],
        "warnings": notes,
    }
    fitted = res.material(material)
    if cfg.bootstrap and converged:
        bands = cal.bootstrap(dataset, profiles, res, material, B=cfg.bootstrap, ci_level=cfg.ci_level,
                              seed=cfg.seed, export=cfg.export, n_jobs=cfg.threads)
        doc["bootstrap"] = {
            "replicates": bands.replicates, "failures": bands.failures, "ci_level": bands.ci_level,
            "parameter_percentiles": bands.parameter_percentiles(), "warnings": bands.warnings,
        }
        for pid in bands.grids:
            _write(out / f"bands_{pid}.csv", _csv_with_header(prov, bands.band_csv(pid)))
            _write(out / f"curves_{pid}.csv", _csv_with_header(prov, bands.curves_csv(pid)))
    _write(out / "fit.json", _dump_json(doc))
    _write(out / "material_fit.json", _dump_json(material_to_dict(fitted)))
    log.info("fit %s: %s", "converged" if converged else "did NOT converge", res.params)
    return EXIT_OK if converged else EXIT_NOT_CONVERGED


def cmd_encurve(cfg: RunConfig) -> int:
    material = load_material(cfg.material)
    profiles = cal.read_profiles(cfg.profiles)
    cfg.inputs = {"material": cfg.material, "profiles": cfg.profiles}
    if cfg.profile not in profiles:
        raise InputError(f"unknown profile id {cfg.profile!r}")
    if cfg.eps_min is None or cfg.eps_max is None or not 0 < cfg.eps_min < cfg.eps_max:
        raise InputError("--eps-min and --eps-max must satisfy 0 < eps-min < eps-max")
    prof = profiles[cfg.profile]
    grid = np.geomspace(cfg.eps_min, cfg.eps_max, cfg.points)
    curves = [cal.en_curve(material, prof, p, grid, cfg.temperature) for p in cfg.quantiles]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["eps_a"] + [f"N_p{p:g}" for p in cfg.quantiles])
    for i, e in enumerate(grid):
        w.writerow([repr(float(e))] + [repr(float(c[i])) for c in curves])
    _write(Path(cfg.out), _csv_with_header(provenance(cfg), buf.getvalue()))
    return EXIT_OK


def cmd_validate(cfg: RunConfig) -> int:
    checked = []
    if cfg.mesh:
        mesh = load_mesh(cfg.mesh)
        checked.append(f"mesh: {mesh.n_nodes} nodes, {mesh.n_elements} {mesh.elem_type} elements")
    if cfg.material:
        load_material(cfg.material)
        checked.append("material: ok")
    profiles = None
    if cfg.profiles:
        profiles = cal.read_profiles(cfg.profiles)
        checked.append(f"profiles: {len(profiles)}")
    if cfg.dataset:
        ds = cal.read_dataset(cfg.dataset)
        if profiles is not None:
            try:
                ds.check_profiles(profiles)
            except KeyError as exc:
                raise InputError(exc.args[0]) from exc
        checked.append(f"dataset: {len(ds)} records")
    if not checked:
        raise InputError("nothing to validate; pass at least one input file")
    for line in checked:
        print(line)
    return EXIT_OK


COMMANDS = {"predict": cmd_predict, "calibrate": cmd_calibrate, "encurve": cmd_encurve, "validate": cmd_validate}


# --------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lcfrisk", description="Probabilistic LCF crack-initiation engine.",
                                 epilog=SCHEMA_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("predict", help="component crack-initiation distribution from a mesh",
                       epilog=SCHEMA_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--mesh", required=True)
    p.add_argument("--material", required=True)
    p.add_argument("--out", required=True, help="output directory")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--no-notch-support", dest="notch_support", action="store_false")
    g.add_argument("--compare", action="store_true", help="run with and without notch support")
    p.add_argument("--chi-mode", choices=("normal", "magnitude"), default="normal")
    p.add_argument("--rule", type=int, choices=(3, 5), default=5, help="triangle quadrature degree")
    p.add_argument("--n-cap", type=float, default=N_CAP)
    p.add_argument("--subset", action="append", default=[], dest="subsets",
                   help="named point selection: name=box:x0,x1,y0,y1,z0,z1 | name=sphere:x,y,z,r | "
                        "name=elems:i,j,...")

    c = sub.add_parser("calibrate", help="maximum-likelihood fit (+ bootstrap) on specimen data",
                       epilog=SCHEMA_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    c.add_argument("--dataset", required=True)
    c.add_argument("--profiles", required=True)
    c.add_argument("--material", required=True, help="E, plasticity and the starting parameter set")
    c.add_argument("--out", required=True, help="output directory")
    c.add_argument("--starts", type=int, default=5)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--bootstrap", type=int, default=0, metavar="B")
    c.add_argument("--ci-level", type=float, default=0.925)
    c.add_argument("--export", type=int, default=200, help="bootstrap curves written per profile")
    c.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                   help="bootstrap worker processes (default: all cores)")

    e = sub.add_parser("encurve", help="quantile E-N curves of a specimen profile")
    e.add_argument("--material", required=True)
    e.add_argument("--profiles", required=True)
    e.add_argument("--profile", required=True)
    e.add_argument("--out", required=True, help="output CSV")
    e.add_argument("--quantiles", default="0.5")
    e.add_argument("--eps-min", type=float, required=True)
    e.add_argument("--eps-max", type=float, required=True)
    e.add_argument("--points", type=int, default=30)
    e.add_argument("--temperature", type=float)

    v = sub.add_parser("validate", help="schema-check input files only")
    v.add_argument("--mesh")
    v.add_argument("--material")
    v.add_argument("--dataset")
    v.add_argument("--profiles")
    return ap


def config_from_args(args) -> RunConfig:
    kw = {k: v for k, v in vars(args).items() if k in RunConfig.__dataclass_fields__}
    if "quantiles" in kw:
        try:
            kw["quantiles"] = tuple(float(q) for q in kw["quantiles"].split(","))
        except ValueError as exc:
            raise InputError(f"bad --quantiles {kw['quantiles']!r}") from exc
        if not all(0 < q < 1 for q in kw["quantiles"]):
            raise InputError("quantiles must lie in (0, 1)")
    if "subsets" in kw:
        kw["subsets"] = tuple(kw["subsets"])
    if kw.get("bootstrap") and kw["bootstrap"] < 100:
        raise InputError("--bootstrap needs at least 100 replicates")
    return RunConfig(**kw)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        return COMMANDS[cfg.command](cfg)
    except (InputError, MeshError, KeyError, ValueError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"lcfrisk: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ArithmeticError as exc:
        print(f"lcfrisk: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
