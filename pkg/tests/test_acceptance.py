"""Acceptance criteria 1-12.  Each test records one PASS/FAIL line, shown in
the terminal summary, and asserts both the numerical tolerance and the
runtime budget."""
import itertools
import json
import math
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np

from conftest import ALL_SPECS, GOLDEN, GOLDEN_Q3, SYM, TRI, record_criterion
from multiergodic import validate_spec
from multiergodic.cli import main
from multiergodic.oracle import count_table, level_set_count
from multiergodic.pressure import finite_difference_gradient, pressure_gradient, pressure_hessian
from multiergodic.spectrum import alpha_star, estimate_support, solve_critical, spectrum_curve
from multiergodic.system import bowen_dimension
from multiergodic.telescopic import (
    chain_layout,
    expected_phi,
    local_dimension_estimate,
    multiple_average,
    sample_words,
)
from multiergodic.transfer import solve_transfer, transition_kernel

GRID9 = np.linspace(-3, 3, 9)
GRID_SPECS = {"golden": GOLDEN, "golden_q3": GOLDEN_Q3, "tri": TRI}


class Budget:
    def __init__(self, seconds):
        self.seconds = seconds

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start

    @property
    def ok(self):
        return self.elapsed < self.seconds

    def __str__(self):
        return f"{self.elapsed:.2f}s of {self.seconds}s"


def check(number, title, ok, budget, detail):
    good = bool(ok) and budget.ok
    record_criterion(number, title, good, f"{detail}; {budget}")
    assert ok, detail
    assert budget.ok, f"runtime {budget}"


def test_criterion_01_transfer_correctness():
    rng = np.random.default_rng(20240601)
    worst_res = worst_spread = 0.0
    positive = True
    with Budget(5) as b:
        for raw in GRID_SPECS.values():
            spec = validate_spec(raw)
            for s, r in itertools.product(GRID9, GRID9):
                ref = solve_transfer(spec, s, r)
                worst_res = max(worst_res, ref.residual)
                positive &= bool(np.all(ref.t > 0))
                for _ in range(10):
                    t0 = np.exp(rng.uniform(-6, 6, spec.m))
                    sol = solve_transfer(spec, s, r, t0=t0)
                    worst_res = max(worst_res, sol.residual)
                    positive &= bool(np.all(sol.t > 0))
                    worst_spread = max(worst_spread, float(np.max(np.abs(sol.t - ref.t))))
    ok = worst_res <= 1e-13 and positive and worst_spread <= 1e-12
    check(1, "transfer correctness", ok, b, f"max residual {worst_res:.1e}, max start spread {worst_spread:.1e}")


def test_criterion_02_stochasticity():
    worst = 0.0
    with Budget(5) as b:
        for raw in GRID_SPECS.values():
            spec = validate_spec(raw)
            for s, r in itertools.product(GRID9, GRID9):
                k = transition_kernel(spec, solve_transfer(spec, s, r))
                worst = max(worst, float(np.max(np.abs(k.transitions.sum(axis=1) - 1))))
                worst = max(worst, abs(float(k.initial.sum()) - 1))
    check(2, "kernel stochasticity (q=2 and q=3)", worst <= 1e-12, b, f"max row-sum error {worst:.1e}")


def test_criterion_03_gradient_and_convexity():
    worst_grad = 0.0
    min_eig = {}
    with Budget(30) as b:
        for name in ("sym", "golden", "golden_q3", "tri"):
            spec = validate_spec(ALL_SPECS[name])
            eigs = []
            for s, r in itertools.product(GRID9, GRID9):
                g = np.array(pressure_gradient(spec, s, r))
                fd = np.array(finite_difference_gradient(spec, s, r))
                worst_grad = max(worst_grad, float(np.max(np.abs(g - fd) / np.maximum(np.abs(g), 1e-300))))
                h = pressure_hessian(spec, s, r)
                eigs.append(np.linalg.eigvalsh((h + h.T) / 2).min())
            min_eig[name] = float(min(eigs))
    strict = all(min_eig[n] > 0 for n in ("golden", "golden_q3", "tri"))
    ok = worst_grad < 1e-6 and min(min_eig.values()) >= -1e-8 and strict
    detail = f"max rel grad error {worst_grad:.1e}, min eig " + ", ".join(f"{k}={v:.1e}" for k, v in min_eig.items())
    check(3, "gradient and convexity", ok, b, detail)


def test_criterion_04_normalization_identity():
    worst = 0.0
    grid5 = np.linspace(-2, 2, 5)
    with Budget(10) as b:
        for name in ("sym", "golden", "golden_q3", "tri"):
            spec = validate_spec(ALL_SPECS[name])
            for s, r in itertools.product(grid5, grid5):
                k = transition_kernel(spec, solve_transfer(spec, s, r))
                worst = max(worst, abs(expected_phi(k, spec) - pressure_gradient(spec, s, r)[0]))
    check(4, "depth series equals dPn/ds", worst < 1e-10, b, f"max error {worst:.1e}")


def test_criterion_05_hand_critical_point():
    with Budget(1) as b:
        p = solve_critical(validate_spec(SYM), 0.25)
    ok = p.converged and abs(p.s) < 1e-8 and abs(p.r + 2) < 1e-8 and abs(p.dim - 1) < 1e-8
    check(5, "hand-derived critical point", ok, b, f"s={p.s:.1e}, r={p.r:.12f}, dim={p.dim:.12f}")


def test_criterion_06_bowen_calibration():
    worst = 0.0
    with Budget(1) as b:
        for raw in ALL_SPECS.values():
            spec = validate_spec(raw)
            a, _, _ = alpha_star(spec)
            p = solve_critical(spec, a)
            worst = max(worst, abs(p.dim - bowen_dimension(spec.lambdas)) if p.converged else math.inf)
        golden = bowen_dimension([math.log(2), math.log(4)])
    ok = worst < 1e-9 and abs(golden - 0.694242) < 1e-6
    check(6, "peak equals similarity dimension", ok, b, f"max error {worst:.1e}, golden {golden:.9f}")


def test_criterion_07_support():
    details = []
    ok = True
    with Budget(30) as b:
        for name, raw in ALL_SPECS.items():
            spec = validate_spec(raw)
            est = estimate_support(spec)
            lo, hi = spec.phi_range
            ok &= lo - 1e-9 <= est.A <= est.alpha_star <= est.B <= hi + 1e-9
            if name in ("sym", "golden"):
                ok &= abs(est.A) <= 0.02 and abs(est.B - 1) <= 0.02
                details.append(f"{name}=({est.A:.4f}, {est.B:.4f})")
    check(7, "support estimate", ok, b, ", ".join(details))


def _critical_kernel(spec, alpha):
    p = solve_critical(spec, alpha)
    assert p.converged
    return p, transition_kernel(spec, solve_transfer(spec, p.s, p.r))


def test_criterion_08_lln():
    n, count = 100_000, 200
    sym, golden, tri = (validate_spec(x) for x in (SYM, GOLDEN, TRI))
    kernels = {
        "sym@0.35": (sym, _critical_kernel(sym, 0.35)[1]),
        "golden@peak": (golden, _critical_kernel(golden, alpha_star(golden)[0])[1]),
        "tri@(0.5,-1)": (tri, transition_kernel(tri, solve_transfer(tri, 0.5, -1.0))),
    }
    zs = {}
    with Budget(60) as b:
        for label, (spec, k) in kernels.items():
            words = sample_words(k, chain_layout(n, spec.q), 8, count)
            avgs = np.array([multiple_average(w, spec) for w in words])
            se = avgs.std(ddof=1) / math.sqrt(count)
            zs[label] = (avgs.mean() - expected_phi(k, spec)) / se
    ok = all(abs(z) <= 4 for z in zs.values())
    check(8, "law of large numbers", ok, b, ", ".join(f"{k} z={v:+.2f}" for k, v in zs.items()))


def test_criterion_09_local_dimension():
    n, count = 100_000, 200
    errs = {}
    with Budget(120) as b:
        for name in ("sym", "golden"):
            spec = validate_spec(ALL_SPECS[name])
            a0 = alpha_star(spec)[0]
            for alpha in (a0 - 0.05, a0, a0 + 0.05):
                p, k = _critical_kernel(spec, alpha)
                words = sample_words(k, chain_layout(n, spec.q), 9, count)
                med = float(np.median([local_dimension_estimate(spec, k, w) for w in words]))
                errs[f"{name}@{alpha:.3f}"] = med - p.dim
    ok = all(abs(e) <= 0.05 for e in errs.values())
    check(9, "local dimension at critical points", ok, b, ", ".join(f"{k} {v:+.1e}" for k, v in errs.items()))


def test_criterion_10_oracle():
    spec = validate_spec(SYM)
    gaps = {}
    with Budget(600) as b:
        for alpha in (0.1, 0.2, 0.25, 0.35, 0.5):
            _, d = level_set_count(spec, 4096, alpha, 0.01, mode="dp")
            gaps[alpha] = d - solve_critical(spec, alpha).dim
        same = count_table(spec, 14, "dp").counts == count_table(spec, 14, "exhaustive").counts
        same &= all(
            level_set_count(spec, 14, a, 0.05, "dp") == level_set_count(spec, 14, a, 0.05, "exhaustive")
            for a in (0.1, 0.25, 0.4)
        )
    ok = same and all(abs(g) <= 0.1 for g in gaps.values())
    check(10, "oracle cross-validation", ok, b, "gaps " + ", ".join(f"{a}:{g:+.3f}" for a, g in gaps.items()) + f", exact n=14 {same}")


def test_criterion_11_unimodality():
    notes = []
    ok = True
    with Budget(30) as b:
        for name in ("sym", "golden", "golden_q3", "tri", "first"):
            spec = validate_spec(ALL_SPECS[name])
            est = estimate_support(spec)
            a0 = est.alpha_star
            width = est.B - est.A
            grid = np.union1d(np.linspace(est.A + 0.02 * width, est.B - 0.02 * width, 25), [a0])
            pts = [p for p in spectrum_curve(spec, grid) if p.converged]
            alphas = np.array([p.alpha for p in pts])
            # dim = -r/q, so the top of the spectrum is where r is smallest
            dim = np.array([p.dim for p in pts])
            s = np.array([p.s for p in pts])
            i = int(np.argmax(dim))
            ok &= len(pts) >= 20
            ok &= alphas[i] == a0 and abs(s[i]) < 1e-10
            ok &= bool(np.all(np.diff(dim[: i + 1]) >= -1e-12) and np.all(np.diff(dim[i:]) <= 1e-12))
            ok &= bool(np.all(s[:i] < 0) and np.all(s[i + 1 :] > 0))
            notes.append(f"{name}:{len(pts)} pts")
    check(11, "unimodal spectrum with s=0 at the peak", ok, b, ", ".join(notes))


def _run_cli(tmp, cfg, tag):
    out = Path(tmp) / tag
    assert main(["spectrum", "--config", cfg, "--out", str(out)]) == 0
    assert main(["sample", "--config", cfg, "--out", str(out), "--alpha", "0.3"]) == 0
    return out


def test_criterion_12_determinism(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({**SYM, "spectrum": {"steps": 21}, "montecarlo": {"n": 20_000, "samples": 40, "seed": 17}}))
    with Budget(10) as b:
        a = _run_cli(tmp_path, str(cfg), "a")
        c = _run_cli(tmp_path, str(cfg), "b")
        env = {**os.environ, "OMP_NUM_THREADS": "3", "OPENBLAS_NUM_THREADS": "3", "MKL_NUM_THREADS": "3"}
        d = tmp_path / "c"
        for cmd in (["spectrum"], ["sample", "--alpha", "0.3"]):
            subprocess.run(
                [sys.executable, "-m", "multiergodic", *cmd, "--config", str(cfg), "--out", str(d)],
                check=True,
                env=env,
            )
    files = ("spectrum.csv", "samples.csv")
    same = all((a / f).read_bytes() == (c / f).read_bytes() == (d / f).read_bytes() for f in files)
    check(12, "byte-identical reruns", same, b, "spectrum.csv and samples.csv across 3 runs")
