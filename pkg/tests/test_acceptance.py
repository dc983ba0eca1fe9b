"""Acceptance criteria 1 to 9, each at its stated tolerance.

Every test records a PASS/FAIL line that is printed in the terminal summary.
Criteria 5 to 9 are Monte Carlo studies and carry the ``slow`` marker.
"""
import json
import time

import numpy as np
import pytest

from chaindefect.inversion import (ObjectiveSpec, SigmaSmoothSpec, invert, landscape,
                                   landscape_argmin, mc_invert, run_seeds)
from chaindefect.measurement import SGrid, simulate
from chaindefect.model import ChainConfig, DefectHypothesis
from chaindefect.spectral import (analytic_x1, direct_solve_x1, green_kernel_array,
                                  spectral_lambda)
from chaindefect.timedomain import integrate_chain, numerical_laplace

from conftest import ACCEPTANCE_LINES

BASE = ChainConfig()
TRUTH = DefectHypothesis(40, 1.3)
GRID = SGrid()


def record(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} ({detail})"
    ACCEPTANCE_LINES[n] = line
    print(line)
    assert ok, line


def size_error(k_hat, k_true):
    return abs(k_hat - k_true) / k_true


def test_c1_oracle_equivalence():
    rng = np.random.default_rng(20240601)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        n = int(rng.choice([5, 20, 100]))
        chain = ChainConfig(n_masses=n)
        defect = DefectHypothesis(int(rng.integers(2, n + 1)), float(rng.uniform(0.1, 5.0)))
        s = float(10 ** rng.uniform(-3, 2))
        a = analytic_x1(defect.index, defect.stiffness, s, chain)
        d = direct_solve_x1(defect.index, defect.stiffness, s, chain)
        worst = max(worst, abs(a - d) / abs(d))
    elapsed = time.perf_counter() - t0
    record(1, worst <= 1e-10 and elapsed < 10, f"max rel {worst:.2e}, {elapsed:.2f} s")


def test_c2_overflow_safety():
    t0 = time.perf_counter()
    n = 1000
    lam = spectral_lambda(100.0, BASE)
    # first row, diagonal, middle and last column cover the extreme exponents
    R = [green_kernel_array(m, p, lam, n)
         for m in range(1, n + 1) for p in (1, m, n // 2, n)]
    finite = bool(np.all(np.isfinite(R)))
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(1000):
        m, p = rng.integers(1, n + 1, size=2)
        lam_s = spectral_lambda(float(rng.uniform(0.0, 100.0)), BASE)
        a = green_kernel_array(m, p, lam_s, n)
        b = green_kernel_array(p, m, lam_s, n)
        worst = max(worst, abs(a - b) / max(abs(a), np.finfo(float).tiny))
    elapsed = time.perf_counter() - t0
    record(2, finite and worst <= 1e-12 and elapsed < 5,
           f"finite={finite}, symmetry {worst:.1e}, {elapsed:.2f} s")


def test_c3_time_domain_cross_check():
    t0 = time.perf_counter()
    trace = integrate_chain(BASE, TRUTH, dt=1e-3, duration=400.0)
    worst = 0.0
    for s in (0.5, 1.0, 2.0, 5.0, 10.0):
        num = numerical_laplace(trace, s)
        ref = direct_solve_x1(40, 1.3, s, BASE)
        worst = max(worst, abs(num - ref) / abs(ref))
    elapsed = time.perf_counter() - t0
    record(3, worst <= 1e-3 and elapsed < 120, f"max rel {worst:.2e}, {elapsed:.1f} s")


def noise_free_inversion():
    meas = simulate(BASE, TRUTH, GRID, 0.0, seed=None)
    return invert(meas, ObjectiveSpec(GRID))


def test_c4_noise_free_case():
    res = noise_free_inversion()
    err = size_error(res.k_hat, 1.3)
    record(4, res.j_hat == 40 and err <= 1e-4 and res.wall_time < 300,
           f"j_hat={res.j_hat}, k_hat={res.k_hat:.10f}, size error {err:.2e}, "
           f"{res.wall_time:.2f} s")


@pytest.mark.slow
def test_c5_noise_threshold():
    t0 = time.perf_counter()
    deterministic = SigmaSmoothSpec(sigma_smooth=0.0, n_mc=20, base_seed=0)
    exact, size = {}, None
    for eta in (1e-8, 1e-7, 1e-6, 1e-5):
        mc = mc_invert(BASE, TRUTH, GRID, eta, deterministic)
        exact[eta] = sum(j == 40 for j in mc.j_runs) / len(mc.j_runs)
        if eta == 1e-5:
            size = float(np.median([size_error(k, 1.3) for k in mc.k_runs]))
    elapsed = time.perf_counter() - t0
    ok = all(exact[e] >= 0.95 for e in (1e-8, 1e-7, 1e-6)) and size >= 0.01 and elapsed < 1800
    fractions = ", ".join(f"{e:g}: {f:.0%}" for e, f in exact.items())
    record(5, ok, f"exact location {fractions}; median size error at 1e-5 {size:.2%}, "
                  f"{elapsed:.0f} s")


SMOOTH_C6 = SigmaSmoothSpec(sigma_smooth=1e-4, n_delta=50, n_mc=100, base_seed=0)
_C6_CACHE = {}


def sigma_smooth_study():
    return mc_invert(BASE, TRUTH, GRID, 5e-5, SMOOTH_C6)


@pytest.mark.slow
def test_c6_sigma_smooth_improvement():
    t0 = time.perf_counter()
    mc = sigma_smooth_study()
    _C6_CACHE["payload"] = mc.payload()
    elapsed = time.perf_counter() - t0
    smooth_err = size_error(mc.k_median, 1.3)
    # deterministic inversion of the first run's measurement
    noise_seed, _ = run_seeds(SMOOTH_C6, 0)
    meas = simulate(BASE, TRUTH, GRID, 5e-5, seed=noise_seed)
    det = invert(meas, ObjectiveSpec(GRID))
    det_err = size_error(det.k_hat, 1.3)
    ok = mc.j_median == 40 and smooth_err <= 1e-2 and smooth_err < det_err and elapsed < 7200
    record(6, ok, f"median j={mc.j_median}, sigma-smooth size error {smooth_err:.2e}, "
                  f"deterministic size error {det_err:.2e} (j={det.j_hat}), {elapsed:.0f} s")


@pytest.mark.slow
def test_c7_location_sweep():
    smooth = SigmaSmoothSpec(sigma_smooth=1e-4, n_delta=50, n_mc=100, base_seed=0)
    rows, ok = [], True
    for j in (10, 25, 40, 55, 70, 85, 95):
        mc = mc_invert(BASE, DefectHypothesis(j, 1.3), GRID, 5e-4, smooth)
        err = size_error(mc.k_median, 1.3)
        loc_ok = abs(mc.j_median - j) <= 2
        size_ok = err < 0.05 if j <= 70 else True
        ok &= loc_ok and size_ok
        rows.append(f"j={j}: j_hat={mc.j_median} size {err:.1%}")
    record(7, ok, "; ".join(rows))


@pytest.mark.slow
@pytest.mark.parametrize("j_true,k_true", [(85, 1.3), (90, 1.1)])
def test_c8_landscape(j_true, k_true):
    t0 = time.perf_counter()
    meas = simulate(BASE, DefectHypothesis(j_true, k_true), GRID, 5e-4, seed=0)
    J, K, M = landscape(meas, (2, 100), (0.1, 5.0), 491)
    j_min, k_min = landscape_argmin(J, K, M)
    step = K[1] - K[0]
    elapsed = time.perf_counter() - t0
    ok = j_min == j_true and abs(k_min - k_true) <= step + 1e-12 and elapsed < 1800
    line = (f"criterion 8 ({j_true}, {k_true}): {'PASS' if ok else 'FAIL'} "
            f"(minimum at j={j_min}, k={k_min:.3f}, k step {step:.3f}, {elapsed:.1f} s)")
    ACCEPTANCE_LINES[8 + j_true / 1000] = line
    print(line)
    assert ok, line


@pytest.mark.slow
def test_c9_determinism():
    a4 = json.dumps(noise_free_inversion().payload(), sort_keys=True)
    b4 = json.dumps(noise_free_inversion().payload(), sort_keys=True)
    first = _C6_CACHE.get("payload") or sigma_smooth_study().payload()
    a6 = json.dumps(first, sort_keys=True)
    b6 = json.dumps(sigma_smooth_study().payload(), sort_keys=True)
    record(9, a4 == b4 and a6 == b6,
           f"criterion 4 identical={a4 == b4}, criterion 6 identical={a6 == b6}")
