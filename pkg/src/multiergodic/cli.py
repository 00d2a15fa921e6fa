"""Command-line driver: JSON config in, CSV tables and a run manifest out.

Usage::

    multiergodic spectrum --config sym.json --out results/

Exit codes: 0 success, 1 invalid configuration, 2 transfer solver failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import statistics
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .oracle import OracleMemoryError, level_set_count
from .pressure import finite_difference_gradient, pressure_point
from .spectrum import alpha_star, estimate_support, solve_critical, spectrum_curve
from .system import SpecError, SystemSpec, validate_spec
from .telescopic import (
    chain_layout,
    cylinder_measure,
    expected_phi,
    multiple_average,
    predicted_local_dimension,
    sample_word,
)
from .transfer import TransferError, solve_transfer, solver_settings, transition_kernel

log = logging.getLogger("multiergodic")

COMMANDS = (
    "transfer",
    "pressure-grid",
    "spectrum",
    "support",
    "sample",
    "verify-lln",
    "verify-localdim",
    "verify-convexity",
    "verify-gradient",
    "oracle",
)

DEFAULTS = {
    "solver": {"tol": 1e-13, "max_iter": 10_000},
    "spectrum": {"alpha_min": None, "alpha_max": None, "steps": 41},
    "montecarlo": {"n": 100_000, "samples": 200, "seed": 1},
    "oracle": {"depth": 1024, "eps": 0.02, "mode": "dp"},
    "pressure_grid": {"s_min": -3.0, "s_max": 3.0, "r_min": -3.0, "r_max": 3.0, "steps": 9},
}
SYSTEM_KEYS = {"m", "q", "ell", "intervals", "lambdas", "phi"}

SAMPLE_COLUMNS = ["sample_id", "n", "avg_phi", "expected", "log_measure", "log_length", "ratio", "predicted"]
PRESSURE_COLUMNS = ["s", "r", "P", "Pn", "dPn_ds", "dPn_dr", "hess_ss", "hess_sr", "hess_rr"]
SPECTRUM_COLUMNS = ["alpha", "s", "r", "dim", "paper_dim", "converged", "newton_residual"]
ORACLE_COLUMNS = ["n", "alpha", "eps", "count", "moran_dim", "mode"]


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class RunConfig:
    system: SystemSpec
    solver: dict
    spectrum: dict
    montecarlo: dict
    oracle: dict
    pressure_grid: dict
    output: str = "out"
    raw_system: dict = field(default_factory=dict)

    def resolved(self) -> dict:
        """Config with every default filled in; this is what the manifest hashes."""
        return {
            "system": self.system.to_dict(),
            "solver": self.solver,
            "spectrum": self.spectrum,
            "montecarlo": self.montecarlo,
            "oracle": self.oracle,
            "pressure_grid": self.pressure_grid,
            "output": self.output,
        }


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def load_config(source) -> RunConfig:
    """Parse and validate a config given as a path or an already-loaded dict."""
    if isinstance(source, (str, Path)):
        try:
            raw = json.loads(Path(source).read_text())
        except OSError as exc:
            raise ConfigError([f"cannot read config: {exc}"])
        except json.JSONDecodeError as exc:
            raise ConfigError([f"config is not valid JSON: {exc}"])
    else:
        raw = dict(source)
    if not isinstance(raw, dict):
        raise ConfigError(["config must be a JSON object"])

    errors = []
    blocks = {}
    for name, defaults in DEFAULTS.items():
        given = raw.get(name, {}) or {}
        if not isinstance(given, dict):
            errors.append(f"{name} block must be an object")
            given = {}
        unknown = set(given) - set(defaults)
        if unknown:
            errors.append(f"unknown keys in {name} block: {sorted(unknown)}")
        blocks[name] = {**defaults, **{k: v for k, v in given.items() if k in defaults}}
    extra = set(raw) - SYSTEM_KEYS - set(DEFAULTS) - {"output"}
    if extra:
        errors.append(f"unknown top-level keys: {sorted(extra)}")

    sv = blocks["solver"]
    if not (_is_number(sv["tol"]) and sv["tol"] > 0):
        errors.append("solver.tol must be a positive number")
    if not (isinstance(sv["max_iter"], int) and sv["max_iter"] >= 1):
        errors.append("solver.max_iter must be a positive integer")
    sp = blocks["spectrum"]
    if not (isinstance(sp["steps"], int) and sp["steps"] >= 1):
        errors.append("spectrum.steps must be a positive integer")
    for key in ("alpha_min", "alpha_max"):
        if sp[key] is not None and not _is_number(sp[key]):
            errors.append(f"spectrum.{key} must be a number")
    mc = blocks["montecarlo"]
    for key in ("n", "samples", "seed"):
        if not (isinstance(mc[key], int) and not isinstance(mc[key], bool) and mc[key] >= 0):
            errors.append(f"montecarlo.{key} must be a nonnegative integer")
    oc = blocks["oracle"]
    if not (isinstance(oc["depth"], int) and oc["depth"] >= 1):
        errors.append("oracle.depth must be a positive integer")
    if not (_is_number(oc["eps"]) and oc["eps"] > 0):
        errors.append("oracle.eps must be a positive number")
    if oc["mode"] not in ("dp", "exhaustive"):
        errors.append("oracle.mode must be 'dp' or 'exhaustive'")
    pg = blocks["pressure_grid"]
    for key in ("s_min", "s_max", "r_min", "r_max"):
        if not _is_number(pg[key]):
            errors.append(f"pressure_grid.{key} must be a number")
    if not (isinstance(pg["steps"], int) and pg["steps"] >= 1):
        errors.append("pressure_grid.steps must be a positive integer")

    system_raw = {k: raw[k] for k in SYSTEM_KEYS if k in raw}
    system = None
    try:
        system = validate_spec(system_raw)
    except SpecError as exc:
        errors.extend(exc.errors)
    if errors:
        raise ConfigError(errors)
    if mc["samples"] < 1 or mc["n"] < system.q:
        raise ConfigError([f"montecarlo needs samples >= 1 and n >= q={system.q}"])
    if sp["alpha_min"] is None:
        sp["alpha_min"] = system.phi_range[0]
    if sp["alpha_max"] is None:
        sp["alpha_max"] = system.phi_range[1]
    if sp["alpha_min"] > sp["alpha_max"]:
        raise ConfigError(["spectrum.alpha_min exceeds alpha_max"])
    return RunConfig(
        system=system,
        output=str(raw.get("output", "out")),
        raw_system=system_raw,
        **blocks,
    )


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return format(float(x), ".12g")


def write_csv(path: Path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(row[c]) for c in columns])


def _grid(lo, hi, steps):
    return np.linspace(lo, hi, steps) if steps > 1 else np.array([lo])


def _target_kernel(cfg: RunConfig, args):
    """Kernel from ``--s/--r``, else the critical point of ``--alpha``, else the peak."""
    spec = cfg.system
    if args.s is not None or args.r is not None:
        s = args.s if args.s is not None else 0.0
        r = args.r if args.r is not None else 0.0
    elif args.alpha is not None:
        p = solve_critical(spec, args.alpha)
        if not p.converged:
            raise TransferError(f"critical system did not converge at alpha={args.alpha}")
        s, r = p.s, p.r
    else:
        _, r, _ = alpha_star(spec)
        s = 0.0
    sol = solve_transfer(spec, s, r)
    return transition_kernel(spec, sol), sol


def _sample_rows(cfg: RunConfig, args):
    spec = cfg.system
    kernel, sol = _target_kernel(cfg, args)
    n = args.n if args.n is not None else cfg.montecarlo["n"]
    samples = args.samples if args.samples is not None else cfg.montecarlo["samples"]
    seed = args.seed if args.seed is not None else cfg.montecarlo["seed"]
    Pn = (spec.q - 1) * sol.log_total
    expected = expected_phi(kernel, spec)
    predicted = predicted_local_dimension(spec, kernel, Pn)
    layout = chain_layout(n, spec.q)
    rows = []
    for i in range(samples):
        word = sample_word(kernel, layout, seed, i)
        log_measure = cylinder_measure(kernel, layout, word.symbols)
        log_length = -math.fsum(spec.lambdas[word.symbols])
        rows.append(
            {
                "sample_id": i,
                "n": n,
                "avg_phi": multiple_average(word, spec),
                "expected": expected,
                "log_measure": log_measure,
                "log_length": log_length,
                "ratio": log_measure / log_length,
                "predicted": predicted,
            }
        )
    return rows, {"s": kernel.s, "r": kernel.r, "seed": seed, "n": n, "samples": samples}


def cmd_transfer(cfg, args, out):
    s = args.s if args.s is not None else 0.0
    r = args.r if args.r is not None else 0.0
    sol = solve_transfer(cfg.system, s, r)
    kernel = transition_kernel(cfg.system, sol)
    m = cfg.system.m
    cols = ["s", "r", "i", "t", "initial"] + [f"p_{j}" for j in range(m)] + ["residual", "iterations"]
    rows = []
    for i in range(m):
        row = {"s": s, "r": r, "i": i, "t": sol.t[i], "initial": kernel.initial[i]}
        row.update({f"p_{j}": kernel.transitions[i, j] for j in range(m)})
        row.update(residual=sol.residual, iterations=sol.iterations)
        rows.append(row)
    write_csv(out / "transfer.csv", cols, rows)
    print("t=(" + ", ".join(fmt(x) for x in sol.t) + f") residual={sol.residual:.3e}")
    return {"files": ["transfer.csv"], "residual": sol.residual}


def _pressure_rows(cfg, hessian=True):
    pg = cfg.pressure_grid
    rows = []
    for s in _grid(pg["s_min"], pg["s_max"], pg["steps"]):
        for r in _grid(pg["r_min"], pg["r_max"], pg["steps"]):
            p = pressure_point(cfg.system, s, r, hessian=hessian)
            row = {"s": s, "r": r, "P": p.P, "Pn": p.Pn, "dPn_ds": p.dPn_ds, "dPn_dr": p.dPn_dr}
            if hessian:
                H = p.hessian
                row.update(hess_ss=H[0, 0], hess_sr=0.5 * (H[0, 1] + H[1, 0]), hess_rr=H[1, 1])
            rows.append(row)
    return rows


def cmd_pressure_grid(cfg, args, out):
    write_csv(out / "pressure.csv", PRESSURE_COLUMNS, _pressure_rows(cfg))
    return {"files": ["pressure.csv"]}


def cmd_spectrum(cfg, args, out):
    sp = cfg.spectrum
    grid = [args.alpha] if args.alpha is not None else _grid(sp["alpha_min"], sp["alpha_max"], sp["steps"])
    pts = spectrum_curve(cfg.system, grid)
    rows = [{c: getattr(p, c) for c in SPECTRUM_COLUMNS} for p in pts]
    write_csv(out / "spectrum.csv", SPECTRUM_COLUMNS, rows)
    conv = sum(p.converged for p in pts)
    print(f"{conv}/{len(pts)} levels converged")
    return {"files": ["spectrum.csv"], "converged": conv}


def cmd_support(cfg, args, out):
    est = estimate_support(cfg.system)
    cols = ["A", "B", "rA", "rB", "alpha_star", "alpha_left", "alpha_right", "approximate"]
    row = {
        "A": est.A,
        "B": est.B,
        "rA": est.rA,
        "rB": est.rB,
        "alpha_star": est.alpha_star,
        "alpha_left": est.achieved_alphas[0],
        "alpha_right": est.achieved_alphas[1],
        "approximate": est.approximate,
    }
    write_csv(out / "support.csv", cols, [row])
    print(f"support ~ [{fmt(est.A)}, {fmt(est.B)}], peak at {fmt(est.alpha_star)}")
    return {"files": ["support.csv"]}


def cmd_sample(cfg, args, out):
    rows, meta = _sample_rows(cfg, args)
    write_csv(out / "samples.csv", SAMPLE_COLUMNS, rows)
    return {"files": ["samples.csv"], **meta}


def cmd_verify_lln(cfg, args, out):
    rows, meta = _sample_rows(cfg, args)
    write_csv(out / "verify_lln.csv", SAMPLE_COLUMNS, rows)
    avgs = [row["avg_phi"] for row in rows]
    mean = statistics.fmean(avgs)
    se = statistics.stdev(avgs) / math.sqrt(len(avgs)) if len(avgs) > 1 else math.inf
    expected = rows[0]["expected"]
    ok = abs(mean - expected) <= 4 * se
    print(f"{'PASS' if ok else 'FAIL'} lln: mean={fmt(mean)} expected={fmt(expected)} se={fmt(se)}")
    return {"files": ["verify_lln.csv"], "pass": ok, "mean": mean, "se": se, **meta}


def cmd_verify_localdim(cfg, args, out):
    rows, meta = _sample_rows(cfg, args)
    write_csv(out / "verify_localdim.csv", SAMPLE_COLUMNS, rows)
    med = statistics.median(row["ratio"] for row in rows)
    predicted = rows[0]["predicted"]
    ok = abs(med - predicted) <= 0.05
    print(f"{'PASS' if ok else 'FAIL'} local dimension: median={fmt(med)} predicted={fmt(predicted)}")
    return {"files": ["verify_localdim.csv"], "pass": ok, "median": med, **meta}


def cmd_verify_convexity(cfg, args, out):
    rows = _pressure_rows(cfg)
    worst = math.inf
    for row in rows:
        H = np.array([[row["hess_ss"], row["hess_sr"]], [row["hess_sr"], row["hess_rr"]]])
        ev = np.linalg.eigvalsh(H)
        row["eig_min"], row["eig_max"] = ev[0], ev[1]
        worst = min(worst, ev[0])
    cols = ["s", "r", "hess_ss", "hess_sr", "hess_rr", "eig_min", "eig_max"]
    write_csv(out / "verify_convexity.csv", cols, rows)
    ok = worst >= -1e-8
    print(f"{'PASS' if ok else 'FAIL'} convexity: min eigenvalue {fmt(worst)}")
    return {"files": ["verify_convexity.csv"], "pass": ok, "min_eigenvalue": worst}


def cmd_verify_gradient(cfg, args, out):
    pg = cfg.pressure_grid
    rows = []
    worst = 0.0
    for s in _grid(pg["s_min"], pg["s_max"], pg["steps"]):
        for r in _grid(pg["r_min"], pg["r_max"], pg["steps"]):
            p = pressure_point(cfg.system, s, r)
            fs, fr = finite_difference_gradient(cfg.system, s, r)
            g = np.array([p.dPn_ds, p.dPn_dr])
            err = float(np.abs(g - [fs, fr]).max() / (1 + np.abs(g).max()))
            worst = max(worst, err)
            rows.append(
                {"s": s, "r": r, "dPn_ds": g[0], "dPn_dr": g[1], "fd_ds": fs, "fd_dr": fr, "rel_err": err}
            )
    cols = ["s", "r", "dPn_ds", "dPn_dr", "fd_ds", "fd_dr", "rel_err"]
    write_csv(out / "verify_gradient.csv", cols, rows)
    ok = worst < 1e-6
    print(f"{'PASS' if ok else 'FAIL'} gradient: max relative error {fmt(worst)}")
    return {"files": ["verify_gradient.csv"], "pass": ok, "max_rel_err": worst}


def cmd_oracle(cfg, args, out):
    oc, sp = cfg.oracle, cfg.spectrum
    n = args.depth if args.depth is not None else oc["depth"]
    eps = args.eps if args.eps is not None else oc["eps"]
    grid = [args.alpha] if args.alpha is not None else _grid(sp["alpha_min"], sp["alpha_max"], sp["steps"])
    rows = []
    for a in grid:
        count, d = level_set_count(cfg.system, n, float(a), eps, oc["mode"])
        rows.append({"n": n, "alpha": a, "eps": eps, "count": count, "moran_dim": d, "mode": oc["mode"]})
    write_csv(out / "oracle.csv", ORACLE_COLUMNS, rows)
    return {"files": ["oracle.csv"]}


HANDLERS = {
    "transfer": cmd_transfer,
    "pressure-grid": cmd_pressure_grid,
    "spectrum": cmd_spectrum,
    "support": cmd_support,
    "sample": cmd_sample,
    "verify-lln": cmd_verify_lln,
    "verify-localdim": cmd_verify_localdim,
    "verify-convexity": cmd_verify_convexity,
    "verify-gradient": cmd_verify_gradient,
    "oracle": cmd_oracle,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="multiergodic", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", help="output directory (overrides config 'output')")
        p.add_argument("--s", type=float)
        p.add_argument("--r", type=float)
        p.add_argument("--alpha", type=float)
        p.add_argument("--n", type=int)
        p.add_argument("--samples", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--depth", type=int)
        p.add_argument("--eps", type=float)
    return parser


def _manifest(cfg: RunConfig, args, result: dict) -> dict:
    resolved = cfg.resolved()
    canonical = json.dumps(resolved, sort_keys=True, separators=(",", ":"))
    overrides = {
        k: getattr(args, k)
        for k in ("s", "r", "alpha", "n", "samples", "seed", "depth", "eps")
        if getattr(args, k) is not None
    }
    seed = overrides.get("seed", cfg.montecarlo["seed"])
    return {
        "command": args.command,
        "tool_version": __version__,
        "config_sha256": hashlib.sha256(canonical.encode()).hexdigest(),
        "seed": seed,
        "overrides": overrides,
        "resolved_config": resolved,
        "result": result,
    }


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return 1
    for name in ("n", "samples", "depth"):
        v = getattr(args, name)
        if v is not None and v < 1:
            print(f"error: --{name} must be positive", file=sys.stderr)
            return 1
    if args.eps is not None and not args.eps > 0:
        print("error: --eps must be positive", file=sys.stderr)
        return 1
    out = Path(args.out or cfg.output)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create output directory: {exc}", file=sys.stderr)
        return 1
    try:
        with solver_settings(cfg.solver["tol"], cfg.solver["max_iter"]):
            result = HANDLERS[args.command](cfg, args, out)
    except TransferError as exc:
        print(f"error: solver did not converge: {exc}", file=sys.stderr)
        return 2
    except (OracleMemoryError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    manifest = _manifest(cfg, args, result)
    name = args.command.replace("-", "_") + ".manifest.json"
    (out / name).write_text(json.dumps(manifest, indent=2, sort_keys=True, default=_json_default) + "\n")
    return 0


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    raise TypeError(f"not serializable: {type(x)}")


if __name__ == "__main__":
    sys.exit(main())
