"""Residual objective, per-index inversion, sigma-smooth variant and landscapes."""
from __future__ import annotations

import logging
import math
import statistics
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from . import _backend
from .measurement import MeasurementSet, SGrid, simulate, synthesize
from .model import ChainConfig, DefectHypothesis
from .spectral import defect_coefficients, rational_coefficients, spectral_lambda

log = logging.getLogger(__name__)

TIE_TOL = 1e-12


@dataclass(frozen=True)
class ObjectiveSpec:
    grid: SGrid = SGrid()
    log_floor: float = 1e-300
    k_bounds: tuple = (0.1, 5.0)
    k_tol: float = 1e-8
    coarse_k_nodes: int = 41
    max_evals: int = 200

    def __post_init__(self):
        lo, hi = self.k_bounds
        if not 0 < lo < hi:
            raise ValueError(f"invalid k_bounds {self.k_bounds!r}")
        if not self.k_tol > 0 or not self.log_floor > 0:
            raise ValueError("k_tol and log_floor must be positive")
        if self.coarse_k_nodes < 3:
            raise ValueError("coarse_k_nodes must be >= 3")
        object.__setattr__(self, "k_bounds", (float(lo), float(hi)))


@dataclass(frozen=True)
class SigmaSmoothSpec:
    sigma_smooth: float = 1e-4
    n_delta: int = 50
    n_mc: int = 100
    base_seed: int = 0

    def __post_init__(self):
        if self.sigma_smooth < 0 or self.n_delta < 1 or self.n_mc < 1:
            raise ValueError("need sigma_smooth >= 0, n_delta >= 1 and n_mc >= 1")


@dataclass
class InversionResult:
    j_hat: int
    k_hat: float
    residual: float
    per_index_residuals: np.ndarray
    per_index_k: np.ndarray
    evaluations: int
    wall_time: float = 0.0
    tie: bool = False

    def payload(self) -> dict:
        """Deterministic content (no timing)."""
        return {
            "j_hat": self.j_hat,
            "k_hat": self.k_hat,
            "residual": self.residual,
            "tie": self.tie,
            "evaluations": self.evaluations,
            "per_index_residuals": [float(v) for v in self.per_index_residuals],
            "per_index_k": [float(v) for v in self.per_index_k],
        }


def derive_seed(*parts: int) -> int:
    """Deterministic 63-bit child seed from a tuple of integers."""
    ss = np.random.SeedSequence([int(p) for p in parts])
    return int(ss.generate_state(2, dtype=np.uint32) @ np.array([1 << 31, 1], dtype=np.uint64)
               % (1 << 63))


def draw_deltas(smooth: SigmaSmoothSpec, draw_seed) -> np.ndarray:
    return np.random.default_rng(draw_seed).normal(0.0, smooth.sigma_smooth, smooth.n_delta)


class ForwardModel:
    """Grid-bound forward map with per-index kernel coefficients cached.

    The coefficients depend on ``j`` and the grid only, so every ``k``
    evaluation reduces to one pass of the residual kernel.
    """

    def __init__(self, chain: ChainConfig, grid: SGrid):
        self.chain = chain
        self.grid = grid
        self.lam = spectral_lambda(grid.nodes, chain)
        self.weights = grid.weights()
        self.gamma = chain.impulse / chain.base_stiffness
        self._cache = {}

    def coefficients(self, j: int):
        """``(homogeneous response, rational rows)`` for defect index ``j``."""
        entry = self._cache.get(j)
        if entry is None:
            co = defect_coefficients(j, self.lam, self.chain.n_masses)
            entry = (-self.gamma * co.g11, rational_coefficients(co, self.gamma))
            self._cache[j] = entry
        return entry

    def squared_residual(self, j: int, ks, target) -> np.ndarray:
        ks = np.atleast_1d(np.asarray(ks, dtype=float))
        base, rational = self.coefficients(j)
        return _backend.residual_batch(ks / self.chain.base_stiffness, rational,
                                       base - target, self.weights)


class Objective:
    """``f(j, k) = log(max(floor, Q))`` with ``Q`` the quadrature of the squared residual.

    With a sigma-smooth spec and draws, evaluates the averaged objective
    ``F(j, k) = mean_i log(sqrt(max(floor, Q(k + delta_i))))`` instead, with
    ``k + delta_i`` clamped to the bounds.
    """

    def __init__(self, meas: MeasurementSet, spec: ObjectiveSpec, model: ForwardModel | None = None,
                 deltas=None):
        if meas.grid != spec.grid:
            raise ValueError("measurement grid differs from objective grid")
        self.meas = meas
        self.spec = spec
        self.model = model if model is not None else ForwardModel(meas.chain, spec.grid)
        if self.model.chain != meas.chain or self.model.grid != spec.grid:
            raise ValueError("forward model does not match the measurement")
        self.deltas = None if deltas is None else np.asarray(deltas, dtype=float)
        self.evaluations = 0

    def __call__(self, j: int, ks):
        """Objective values for an array of ``k`` at fixed ``j``."""
        ks = np.atleast_1d(np.asarray(ks, dtype=float))
        lo, hi = self.spec.k_bounds
        self.evaluations += ks.size
        if self.deltas is None:
            q = self.model.squared_residual(j, ks, self.meas.values)
            return np.log(np.maximum(self.spec.log_floor, q))
        shifted = np.clip(ks[:, None] + self.deltas[None, :], lo, hi)
        q = self.model.squared_residual(j, shifted.ravel(), self.meas.values)
        f = 0.5 * np.log(np.maximum(self.spec.log_floor, q))
        return f.reshape(shifted.shape).mean(axis=1)

    def scalar(self, j: int, k: float) -> float:
        return float(self(j, [k])[0])


def objective(j, k, meas, spec: ObjectiveSpec = ObjectiveSpec()) -> float:
    return Objective(meas, spec).scalar(j, k)


def sigma_smooth_objective(j, k, meas, spec: ObjectiveSpec, smooth: SigmaSmoothSpec,
                           draw_seed) -> float:
    deltas = draw_deltas(smooth, draw_seed)
    return Objective(meas, spec, deltas=deltas).scalar(j, k)


def _refine_index(obj: Objective, j: int):
    spec = obj.spec
    lo, hi = spec.k_bounds
    nodes = np.linspace(lo, hi, spec.coarse_k_nodes)
    coarse = obj(j, nodes)
    coarse = np.where(np.isnan(coarse), np.inf, coarse)
    i = int(np.argmin(coarse))
    best_k, best_f = float(nodes[i]), float(coarse[i])
    if not math.isfinite(best_f):
        return best_k, math.inf
    a = nodes[max(i - 1, 0)]
    b = nodes[min(i + 1, nodes.size - 1)]

    def fun(k):
        v = obj.scalar(j, k)
        return v if math.isfinite(v) else 1e300

    res = minimize_scalar(fun, bounds=(a, b), method="bounded",
                          options={"xatol": spec.k_tol, "maxiter": spec.max_evals})
    if res.fun < best_f:
        best_k, best_f = float(res.x), float(res.fun)
    return best_k, best_f


def _select(indices, residuals, ks):
    order = np.argsort(residuals, kind="stable")
    best = int(order[0])
    tie = bool(residuals.size > 1 and abs(residuals[order[1]] - residuals[best]) <= TIE_TOL)
    if tie:
        tied = [int(i) for i in order if abs(residuals[i] - residuals[best]) <= TIE_TOL]
        best = min(tied)
    return int(indices[best]), float(ks[best]), float(residuals[best]), tie


def invert(meas: MeasurementSet, spec: ObjectiveSpec = ObjectiveSpec(), *,
           model: ForwardModel | None = None, deltas=None, indices=None) -> InversionResult:
    """Per-index coarse scan plus bounded Brent refinement; best index wins.

    ``deltas`` switches to the sigma-smooth objective with frozen draws.
    ``indices`` restricts the candidate set (default ``2..N``).
    """
    t0 = time.perf_counter()
    obj = Objective(meas, spec, model, deltas)
    indices = np.array(list(indices if indices is not None else meas.chain.defect_indices))
    residuals = np.empty(indices.size)
    ks = np.empty(indices.size)
    for a, j in enumerate(indices):
        ks[a], residuals[a] = _refine_index(obj, int(j))
    j_hat, k_hat, res, tie = _select(indices, residuals, ks)
    if tie:
        log.warning("tie between defect indices at residual %.6g; reporting j=%d", res, j_hat)
    return InversionResult(j_hat, k_hat, res, residuals, ks, obj.evaluations,
                           time.perf_counter() - t0, tie)


# Monte Carlo --------------------------------------------------------------

@dataclass
class MCResult:
    j_median: int
    k_median: float
    j_runs: list
    k_runs: list
    noise_seeds: list
    failed_runs: list = field(default_factory=list)

    def payload(self) -> dict:
        return {
            "j_median": self.j_median,
            "k_median": self.k_median,
            "j_runs": list(self.j_runs),
            "k_runs": list(self.k_runs),
            "noise_seeds": list(self.noise_seeds),
            "failed_runs": list(self.failed_runs),
        }


def run_seeds(smooth: SigmaSmoothSpec, run: int):
    """``(noise_seed, delta_seed)`` for Monte Carlo run ``run``."""
    return smooth.base_seed + run, derive_seed(smooth.base_seed, run, 1)


def _mc_run(args):
    chain, truth, spec, noise_level, smooth, run, clean = args
    noise_seed, delta_seed = run_seeds(smooth, run)
    meas = simulate(chain, truth, spec.grid, noise_level, noise_seed, clean=clean)
    deltas = draw_deltas(smooth, delta_seed) if smooth.sigma_smooth > 0 else None
    model = _model_for(chain, spec.grid)
    try:
        res = invert(meas, spec, model=model, deltas=deltas)
    except Exception as exc:  # noqa: BLE001 -- a failed run is recorded, not fatal
        log.warning("Monte Carlo run %d failed: %s", run, exc)
        return run, noise_seed, None
    return run, noise_seed, res


_MODEL_CACHE = {}


def _model_for(chain, grid):
    key = (chain, grid)
    model = _MODEL_CACHE.get(key)
    if model is None:
        _MODEL_CACHE.clear()
        model = _MODEL_CACHE[key] = ForwardModel(chain, grid)
    return model


def mc_invert(chain: ChainConfig, truth: DefectHypothesis, grid: SGrid, noise_level: float,
              smooth: SigmaSmoothSpec = SigmaSmoothSpec(), spec: ObjectiveSpec | None = None,
              workers: int = 1) -> MCResult:
    """Independent noisy inversions aggregated by medians.

    Run ``r`` uses noise seed ``base_seed + r`` and its own frozen delta
    draws.  The location median is the lower median so it is always an index.
    """
    spec = spec if spec is not None else ObjectiveSpec(grid=grid)
    if spec.grid != grid:
        raise ValueError("objective grid differs from measurement grid")
    clean = synthesize(chain, truth, grid)
    jobs = [(chain, truth, spec, noise_level, smooth, r, clean) for r in range(smooth.n_mc)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            outcomes = list(pool.map(_mc_run, jobs))
    else:
        outcomes = [_mc_run(job) for job in jobs]
    outcomes.sort(key=lambda o: o[0])
    ok = [(r, seed, res) for r, seed, res in outcomes if res is not None]
    failed = [r for r, _, res in outcomes if res is None]
    if len(failed) > 0.1 * smooth.n_mc:
        warnings.warn(f"{len(failed)} of {smooth.n_mc} Monte Carlo runs failed", RuntimeWarning)
    if not ok:
        raise RuntimeError("every Monte Carlo run failed")
    j_runs = [res.j_hat for _, _, res in ok]
    k_runs = [res.k_hat for _, _, res in ok]
    j_med, k_med = aggregate(j_runs, k_runs)
    return MCResult(j_med, k_med, j_runs, k_runs, [seed for _, seed, _ in ok], failed)


def aggregate(j_runs, k_runs):
    """Lower median of the locations and median of the stiffnesses."""
    return int(statistics.median_low(j_runs)), float(np.median(np.sort(k_runs)))


# Landscape ----------------------------------------------------------------

def landscape(meas: MeasurementSet, j_range, k_range, k_steps: int,
              spec: ObjectiveSpec | None = None, model: ForwardModel | None = None):
    """Linear-scale residual ``10**f(j, k)`` on a dense ``(j, k)`` grid.

    Returns ``(j_values, k_values, M)`` with ``M[a, b]`` at ``(j_a, k_b)``.
    """
    spec = spec if spec is not None else ObjectiveSpec(grid=meas.grid)
    j_values = np.arange(j_range[0], j_range[1] + 1)
    k_values = np.linspace(k_range[0], k_range[1], k_steps)
    if j_values.size < 2 or k_steps < 2:
        raise ValueError("landscape needs at least two j and two k values")
    lo, hi = spec.k_bounds
    if k_values[0] < lo or k_values[-1] > hi:
        spec = ObjectiveSpec(spec.grid, spec.log_floor, (min(lo, k_values[0]), max(hi, k_values[-1])),
                             spec.k_tol, spec.coarse_k_nodes, spec.max_evals)
    obj = Objective(meas, spec, model)
    with np.errstate(over="ignore"):
        M = np.vstack([10.0 ** obj(int(j), k_values) for j in j_values])
    return j_values, k_values, M


def landscape_argmin(j_values, k_values, M):
    a, b = np.unravel_index(np.argmin(M), M.shape)
    return int(j_values[a]), float(k_values[b])
