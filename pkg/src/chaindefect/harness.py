"""Experiment drivers and the ``chaindefect`` command line."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import measurement as ms
from .inversion import (ObjectiveSpec, SigmaSmoothSpec, derive_seed, invert, landscape,
                        landscape_argmin, mc_invert)
from .model import (CONFIG_KEYS, ConfigError, DefectHypothesis, load_config,
                    parse_model_config)

log = logging.getLogger("chaindefect")

KINDS = ("simulate", "invert", "mc-invert", "sweep-noise", "sweep-location", "sweep-size",
         "landscape", "validate")

EXPERIMENT_KEYS = {
    "seed": "experiment seed; every run seed derives from it",
    "noise_level": "relative noise level eta",
    "measurement": "measurement file to invert (invert only)",
    "grid.s_min": "lower end of the Laplace grid",
    "grid.s_max": "upper end of the Laplace grid",
    "grid.n_nodes": "number of uniform grid nodes",
    "objective.k_lo": "lower bound for the defect stiffness",
    "objective.k_hi": "upper bound for the defect stiffness",
    "objective.k_tol": "absolute tolerance of the k refinement",
    "objective.coarse_k_nodes": "coarse k nodes scanned per index",
    "objective.log_floor": "floor applied before taking the log",
    "smooth.sigma_smooth": "std of the stiffness perturbations (0 = deterministic)",
    "smooth.n_delta": "perturbation draws per objective",
    "smooth.n_mc": "Monte Carlo runs",
    "sweep.levels": "noise levels for sweep-noise",
    "sweep.j_values": "defect indices for sweep-location",
    "sweep.k_values": "defect stiffnesses for sweep-size",
    "landscape.j_min": "first index of the landscape",
    "landscape.j_max": "last index of the landscape",
    "landscape.k_min": "smallest stiffness of the landscape",
    "landscape.k_max": "largest stiffness of the landscape",
    "landscape.k_steps": "stiffness samples of the landscape",
}

# nondimensional baseline used throughout the studies
BASELINE = {"n_masses": 100, "damping": 0.1, "impulse": 1.0, "base_stiffness": 1.0,
            "base_mass": 1.0, "defect.index": 40, "defect.stiffness": 1.3, "seed": 0,
            "noise_level": 0.0}

PRESETS = {
    "baseline": dict(BASELINE),
    "noise-sweep": dict(BASELINE, **{"sweep.levels": [1e-8, 1e-7, 1e-6, 1e-5, 1e-4],
                                     "smooth.sigma_smooth": 0.0, "smooth.n_mc": 20}),
    "sigma-smooth": dict(BASELINE, **{"noise_level": 5e-5, "smooth.sigma_smooth": 1e-4,
                                      "smooth.n_delta": 50, "smooth.n_mc": 100}),
    "sweep": dict(BASELINE, **{"noise_level": 5e-4, "smooth.sigma_smooth": 1e-4,
                               "smooth.n_delta": 50, "smooth.n_mc": 100}),
    "landscape-85": dict(BASELINE, **{"defect.index": 85, "defect.stiffness": 1.3,
                                      "noise_level": 5e-4}),
    "landscape-90": dict(BASELINE, **{"defect.index": 90, "defect.stiffness": 1.1,
                                      "noise_level": 5e-4}),
}


@dataclass
class ExperimentSpec:
    kind: str
    config: dict
    output_dir: Path
    workers: int = 1

    @property
    def seed(self) -> int:
        return int(self.config.get("seed", 0))

    def model(self):
        model_keys = {k: v for k, v in self.config.items() if k in CONFIG_KEYS}
        return parse_model_config(model_keys)

    def grid(self) -> ms.SGrid:
        c = self.config
        return ms.SGrid(float(c.get("grid.s_min", 0.0)), float(c.get("grid.s_max", 100.0)),
                        int(c.get("grid.n_nodes", 2001)))

    def objective(self) -> ObjectiveSpec:
        c = self.config
        return ObjectiveSpec(self.grid(), float(c.get("objective.log_floor", 1e-300)),
                             (float(c.get("objective.k_lo", 0.1)), float(c.get("objective.k_hi", 5.0))),
                             float(c.get("objective.k_tol", 1e-8)),
                             int(c.get("objective.coarse_k_nodes", 41)))

    def smooth(self, seed: int | None = None) -> SigmaSmoothSpec:
        c = self.config
        return SigmaSmoothSpec(float(c.get("smooth.sigma_smooth", 1e-4)),
                               int(c.get("smooth.n_delta", 50)), int(c.get("smooth.n_mc", 100)),
                               self.seed if seed is None else seed)


def resolve_config(kind: str, flat: dict) -> dict:
    """Validate keys and types for ``kind``; ConfigError names the bad key."""
    if kind not in KINDS:
        raise ConfigError(f"unknown experiment kind {kind!r}")
    unknown = sorted(set(flat) - set(CONFIG_KEYS) - set(EXPERIMENT_KEYS))
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
    config = dict(flat)
    parse_model_config({k: v for k, v in config.items() if k in CONFIG_KEYS})
    needs_defect = kind in ("simulate", "mc-invert", "sweep-noise", "sweep-location",
                            "sweep-size", "landscape")
    if needs_defect and not ("defect.index" in config and "defect.stiffness" in config):
        raise ConfigError(f"{kind}: defect.index and defect.stiffness are required")
    if kind == "invert" and "measurement" not in config:
        raise ConfigError("invert: 'measurement' (path to a measurement file) is required")
    if kind == "sweep-noise" and not config.get("sweep.levels"):
        raise ConfigError("sweep-noise: sweep.levels is required")
    if kind == "sweep-location" and not config.get("sweep.j_values"):
        raise ConfigError("sweep-location: sweep.j_values is required")
    if kind == "sweep-size" and not config.get("sweep.k_values"):
        raise ConfigError("sweep-size: sweep.k_values is required")
    levels = config.get("sweep.levels")
    if levels is not None and (any(v <= 0 for v in levels) or list(levels) != sorted(levels)):
        raise ConfigError("sweep.levels must be positive and sorted")
    try:
        spec = ExperimentSpec(kind, config, Path("."))
        spec.objective()
        spec.smooth()
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return config


# output helpers -----------------------------------------------------------

def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_json(path: Path, data) -> None:
    _atomic_write(path, json.dumps(data, indent=2, sort_keys=True) + "\n")


def write_csv(path: Path, header: str, rows) -> None:
    lines = [header] + [",".join(_cell(v) for v in row) for row in rows]
    _atomic_write(path, "\n".join(lines) + "\n")


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def report(spec: ExperimentSpec, result: dict) -> dict:
    return {"kind": spec.kind, "config": spec.config, "result": result}


def relative_errors(j_hat, k_hat, truth: DefectHypothesis):
    return abs(j_hat - truth.index) / truth.index, abs(k_hat - truth.stiffness) / truth.stiffness


# sweeps -------------------------------------------------------------------

@dataclass
class SweepReport:
    swept_parameter: str
    values: list
    rows: list = field(default_factory=list)

    def payload(self) -> dict:
        return asdict(self)

    def csv_rows(self):
        for r in self.rows:
            yield (r["value"], r["j_true"], r["k_true"], r["j_hat"], r["k_hat"],
                   r["location_error"], r["size_error"], r["exact_fraction"])


def _sweep_point(chain, truth, grid, eta, smooth, objective, workers, value):
    mc = mc_invert(chain, truth, grid, eta, smooth, objective, workers=workers)
    loc, size = relative_errors(mc.j_median, mc.k_median, truth)
    exact = sum(j == truth.index for j in mc.j_runs) / len(mc.j_runs)
    return {"value": value, "j_true": truth.index, "k_true": truth.stiffness,
            "j_hat": mc.j_median, "k_hat": mc.k_median, "location_error": loc,
            "size_error": size, "exact_fraction": exact, "runs": mc.payload()}


def sweep_noise(spec: ExperimentSpec, levels) -> SweepReport:
    mc_cfg = spec.model()
    out = SweepReport("noise_level", list(levels))
    for i, eta in enumerate(levels):
        smooth = spec.smooth(derive_seed(spec.seed, i))
        out.rows.append(_sweep_point(mc_cfg.chain, mc_cfg.defect, spec.grid(), float(eta),
                                     smooth, spec.objective(), spec.workers, float(eta)))
    return out


def sweep_location(spec: ExperimentSpec, j_values) -> SweepReport:
    mc_cfg = spec.model()
    eta = float(spec.config.get("noise_level", 0.0))
    out = SweepReport("defect.index", list(j_values))
    for i, j in enumerate(j_values):
        truth = DefectHypothesis(int(j), mc_cfg.defect.stiffness)
        truth.check(mc_cfg.chain)
        smooth = spec.smooth(derive_seed(spec.seed, i))
        out.rows.append(_sweep_point(mc_cfg.chain, truth, spec.grid(), eta, smooth,
                                     spec.objective(), spec.workers, int(j)))
    return out


def sweep_size(spec: ExperimentSpec, k_values) -> SweepReport:
    mc_cfg = spec.model()
    eta = float(spec.config.get("noise_level", 0.0))
    out = SweepReport("defect.stiffness", list(k_values))
    for i, k in enumerate(k_values):
        truth = DefectHypothesis(mc_cfg.defect.index, float(k))
        smooth = spec.smooth(derive_seed(spec.seed, i))
        out.rows.append(_sweep_point(mc_cfg.chain, truth, spec.grid(), eta, smooth,
                                     spec.objective(), spec.workers, float(k)))
    return out


# validation ---------------------------------------------------------------

def validation_checks(seed: int = 0):
    """Yield ``(name, passed, detail)`` for the oracle cross-checks."""
    from .model import ChainConfig
    from .spectral import analytic_x1, direct_solve_x1, green_kernel_array, spectral_lambda
    from .timedomain import integrate_chain, numerical_laplace

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(100):
        n = int(rng.choice([5, 20, 100]))
        chain = ChainConfig(n_masses=n)
        j, k, s = int(rng.integers(2, n + 1)), rng.uniform(0.1, 5.0), 10 ** rng.uniform(-3, 2)
        a, d = analytic_x1(j, k, s, chain), direct_solve_x1(j, k, s, chain)
        worst = max(worst, abs(a - d) / max(abs(d), 1e-30))
    yield "oracle-equivalence", worst <= 1e-10, f"max rel. err {worst:.3e}"

    chain = ChainConfig(n_masses=1000)
    lam = spectral_lambda(100.0, chain)
    finite = all(np.isfinite(green_kernel_array(m, p, lam, 1000)) for m, p in
                 [(1, 1), (1, 1000), (500, 500), (1000, 1000)])
    yield "kernel-overflow", finite, "N=1000, s=100"

    chain = ChainConfig()
    defect = DefectHypothesis(40, 1.3)
    trace = integrate_chain(chain, defect, 1e-3, 400.0)
    worst = 0.0
    for s in (0.5, 1.0, 2.0, 5.0, 10.0):
        d = direct_solve_x1(40, 1.3, s, chain)
        worst = max(worst, abs(numerical_laplace(trace, s) - d) / abs(d))
    yield "time-domain", worst <= 1e-3, f"max rel. err {worst:.3e}"

    grid = ms.SGrid()
    meas = ms.simulate(chain, defect, grid)
    res = invert(meas, ObjectiveSpec(grid=grid))
    ok = res.j_hat == 40 and abs(res.k_hat - 1.3) / 1.3 <= 1e-4
    yield "noise-free-inversion", ok, f"j={res.j_hat}, k={res.k_hat:.10f}"


# dispatcher ---------------------------------------------------------------

def run(spec: ExperimentSpec) -> int:
    out = spec.output_dir
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    status = 0
    cfg = spec.config
    if spec.kind == "simulate":
        mc = spec.model()
        meas = ms.simulate(mc.chain, mc.defect, spec.grid(), float(cfg.get("noise_level", 0.0)),
                           spec.seed)
        ms.save(meas, out / "measurement.txt")
        ms.export_csv(meas, out / "trace.csv")
        write_json(out / "report.json", report(spec, {"measurement": "measurement.txt"}))
    elif spec.kind == "invert":
        meas = ms.load(cfg["measurement"])
        objective = spec.objective()
        if objective.grid != meas.grid:
            objective = ObjectiveSpec(meas.grid, objective.log_floor, objective.k_bounds,
                                      objective.k_tol, objective.coarse_k_nodes)
        res = invert(meas, objective)
        payload = res.payload()
        if meas.truth is not None:
            payload["location_error"], payload["size_error"] = relative_errors(
                res.j_hat, res.k_hat, meas.truth)
        write_json(out / "report.json", report(spec, payload))
        j = list(meas.chain.defect_indices)
        write_csv(out / "residuals.csv", "j,k,f,residual",
                  [(jj, k, f, 10.0 ** f) for jj, k, f in
                   zip(j, res.per_index_k, res.per_index_residuals)])
        print(f"j_hat={res.j_hat} k_hat={res.k_hat!r} residual={res.residual!r}")
    elif spec.kind == "mc-invert":
        mc = spec.model()
        res = mc_invert(mc.chain, mc.defect, spec.grid(), float(cfg.get("noise_level", 0.0)),
                        spec.smooth(), spec.objective(), workers=spec.workers)
        payload = res.payload()
        payload["location_error"], payload["size_error"] = relative_errors(
            res.j_median, res.k_median, mc.defect)
        write_json(out / "report.json", report(spec, payload))
        write_csv(out / "runs.csv", "run,noise_seed,j_hat,k_hat",
                  [(r, sd, j, k) for r, (sd, j, k) in
                   enumerate(zip(res.noise_seeds, res.j_runs, res.k_runs))])
        print(f"median j={res.j_median} median k={res.k_median!r}")
    elif spec.kind in ("sweep-noise", "sweep-location", "sweep-size"):
        driver, key = {"sweep-noise": (sweep_noise, "sweep.levels"),
                       "sweep-location": (sweep_location, "sweep.j_values"),
                       "sweep-size": (sweep_size, "sweep.k_values")}[spec.kind]
        rep = driver(spec, cfg[key])
        write_json(out / "report.json", report(spec, rep.payload()))
        write_csv(out / "sweep.csv",
                  "value,j_true,k_true,j_hat,k_hat,location_error,size_error,exact_fraction",
                  rep.csv_rows())
    elif spec.kind == "landscape":
        mc = spec.model()
        grid = spec.grid()
        meas = ms.simulate(mc.chain, mc.defect, grid, float(cfg.get("noise_level", 0.0)), spec.seed)
        jr = (int(cfg.get("landscape.j_min", 2)), int(cfg.get("landscape.j_max", mc.chain.n_masses)))
        kr = (float(cfg.get("landscape.k_min", 0.1)), float(cfg.get("landscape.k_max", 5.0)))
        J, K, M = landscape(meas, jr, kr, int(cfg.get("landscape.k_steps", 491)), spec.objective())
        j_min, k_min = landscape_argmin(J, K, M)
        write_json(out / "report.json", report(spec, {"j_min": j_min, "k_min": k_min,
                                                      "residual_min": float(M.min())}))
        write_csv(out / "landscape.csv", "j," + ",".join(repr(float(k)) for k in K),
                  [(int(j), *row) for j, row in zip(J, M)])
        print(f"landscape minimum at j={j_min} k={k_min!r}")
    elif spec.kind == "validate":
        rows = []
        for name, passed, detail in validation_checks(spec.seed):
            print(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
            rows.append({"check": name, "passed": bool(passed), "detail": detail})
            if not passed:
                status = 1
        write_json(out / "report.json", report(spec, {"checks": rows}))
    write_json(out / "timing.json", {"wall_time": time.perf_counter() - t0})
    return status


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="chaindefect",
                                description="Single-defect imaging in a damped spring-mass chain.")
    p.add_argument("kind", choices=KINDS)
    p.add_argument("--config", type=Path, help="flat JSON configuration file")
    p.add_argument("--preset", choices=sorted(PRESETS), help="start from a built-in configuration")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path, default=Path("out"))
    p.add_argument("--workers", type=int,
                   default=int(os.environ.get("CHAINDEFECT_WORKERS", "1")))
    p.add_argument("--level", type=float, help="override noise_level")
    p.add_argument("--j", type=int, help="override defect.index")
    p.add_argument("--k", type=float, help="override defect.stiffness")
    p.add_argument("--measurement", type=Path, help="measurement file (invert)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        flat = dict(PRESETS[args.preset]) if args.preset else dict(BASELINE)
        if args.config is not None:
            flat.update(load_config(args.config))
        overrides = {"seed": args.seed, "noise_level": args.level, "defect.index": args.j,
                     "defect.stiffness": args.k,
                     "measurement": None if args.measurement is None else str(args.measurement)}
        flat.update({k: v for k, v in overrides.items() if v is not None})
        if args.kind == "invert":
            for key in [k for k in flat if k.startswith("defect.")]:
                del flat[key]
        config = resolve_config(args.kind, flat)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return run(ExperimentSpec(args.kind, config, args.out, max(1, args.workers)))


if __name__ == "__main__":
    sys.exit(main())
