"""Synthetic Laplace-domain measurements: generation, noise and file I/O."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import ChainConfig, DefectHypothesis
from .spectral import direct_solve_x1

FORMAT_VERSION = 1
MAGIC = "# chaindefect measurement"


class MeasurementFileError(ValueError):
    pass


@dataclass(frozen=True)
class SGrid:
    """Uniform grid on ``[s_min, s_max]`` for the residual quadrature."""

    s_min: float = 0.0
    s_max: float = 100.0
    n_nodes: int = 2001

    def __post_init__(self):
        if not 0 <= self.s_min < self.s_max:
            raise ValueError(f"need 0 <= s_min < s_max, got [{self.s_min}, {self.s_max}]")
        if int(self.n_nodes) != self.n_nodes or self.n_nodes < 11:
            raise ValueError(f"n_nodes must be an integer >= 11, got {self.n_nodes!r}")
        object.__setattr__(self, "n_nodes", int(self.n_nodes))

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.s_min, self.s_max, self.n_nodes)

    @property
    def spacing(self) -> float:
        return (self.s_max - self.s_min) / (self.n_nodes - 1)

    def weights(self) -> np.ndarray:
        """Composite Simpson weights (3/8 rule on the last panel if needed)."""
        n, h = self.n_nodes, self.spacing
        w = np.zeros(n)
        m = n if n % 2 == 1 else n - 3
        w[:m:2] = 2.0
        w[1:m:2] = 4.0
        w[0] = w[m - 1] = 1.0
        w[:m] *= h / 3.0
        if m < n:
            w[m - 1:] += 3.0 * h / 8.0 * np.array([1.0, 3.0, 3.0, 1.0])
        return w


@dataclass
class MeasurementSet:
    """Measured first-mass Laplace response on an :class:`SGrid`.

    ``truth`` is bookkeeping for experiments; inversion never reads it.
    """

    chain: ChainConfig
    grid: SGrid
    values: np.ndarray
    noise_level: float = 0.0
    seed: int | None = None
    truth: DefectHypothesis | None = field(default=None)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n_nodes,):
            raise ValueError(
                f"expected {self.grid.n_nodes} values, got shape {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("measurement values must be finite")
        if self.noise_level < 0:
            raise ValueError("noise_level must be nonnegative")

    def header(self) -> dict:
        c = self.chain
        head = {
            "version": FORMAT_VERSION,
            "n_masses": c.n_masses,
            "damping": c.damping,
            "impulse": c.impulse,
            "base_stiffness": c.base_stiffness,
            "base_mass": c.base_mass,
            "grid.s_min": self.grid.s_min,
            "grid.s_max": self.grid.s_max,
            "grid.n_nodes": self.grid.n_nodes,
            "noise_level": self.noise_level,
            "seed": self.seed,
        }
        if self.truth is not None:
            head["truth.index"] = self.truth.index
            head["truth.stiffness"] = self.truth.stiffness
        return head


def synthesize(chain: ChainConfig, defect: DefectHypothesis, grid: SGrid) -> np.ndarray:
    """Noise-free data from the assembled linear system, not the closed form."""
    defect.check(chain)
    return direct_solve_x1(defect.index, defect.stiffness, grid.nodes, chain)


def add_noise(values, noise_level: float, seed) -> np.ndarray:
    """Add i.i.d. Gaussian noise with std ``noise_level * max|values|``."""
    values = np.asarray(values, dtype=float)
    if noise_level < 0:
        raise ValueError("noise_level must be nonnegative")
    if noise_level == 0:
        return values.copy()
    rng = np.random.default_rng(seed)
    scale = noise_level * np.max(np.abs(values))
    return values + rng.normal(0.0, scale, size=values.shape)


def simulate(chain, defect, grid, noise_level=0.0, seed=None, clean=None) -> MeasurementSet:
    if clean is None:
        clean = synthesize(chain, defect, grid)
    return MeasurementSet(chain, grid, add_noise(clean, noise_level, seed),
                          noise_level, seed, defect)


def _fmt(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def save(meas: MeasurementSet, path) -> None:
    lines = [MAGIC]
    lines += [f"{key}: {_fmt(value)}" for key, value in meas.header().items()]
    lines.append("---")
    lines.append("s value")
    lines += [f"{s!r} {v!r}" for s, v in zip(meas.grid.nodes.tolist(), meas.values.tolist())]
    Path(path).write_text("\n".join(lines) + "\n")


def load(path) -> MeasurementSet:
    text = Path(path).read_text().splitlines()
    if not text or text[0] != MAGIC:
        raise MeasurementFileError(f"{path}: not a measurement file")
    try:
        sep = text.index("---")
    except ValueError:
        raise MeasurementFileError(f"{path}: missing data separator") from None
    head = {}
    for line in text[1:sep]:
        key, _, value = line.partition(":")
        if not _:
            raise MeasurementFileError(f"{path}: malformed header line {line!r}")
        head[key.strip()] = value.strip()
    try:
        version = int(head["version"])
        if version != FORMAT_VERSION:
            raise MeasurementFileError(f"{path}: unsupported version {version}")
        chain = ChainConfig(int(head["n_masses"]), float(head["damping"]),
                            float(head["impulse"]), float(head["base_stiffness"]),
                            float(head["base_mass"]))
        grid = SGrid(float(head["grid.s_min"]), float(head["grid.s_max"]),
                     int(head["grid.n_nodes"]))
        noise_level = float(head["noise_level"])
        seed = None if head["seed"] == "none" else int(head["seed"])
        truth = None
        if "truth.index" in head:
            truth = DefectHypothesis(int(head["truth.index"]), float(head["truth.stiffness"]))
        rows = [line.split() for line in text[sep + 2:] if line.strip()]
        values = np.array([float(r[1]) for r in rows])
    except (KeyError, ValueError, IndexError) as exc:
        if isinstance(exc, MeasurementFileError):
            raise
        raise MeasurementFileError(f"{path}: {exc}") from exc
    if values.shape[0] != grid.n_nodes:
        raise MeasurementFileError(
            f"{path}: {values.shape[0]} values for grid.n_nodes={grid.n_nodes}")
    return MeasurementSet(chain, grid, values, noise_level, seed, truth)


def export_csv(meas: MeasurementSet, path) -> None:
    data = np.column_stack([meas.grid.nodes, meas.values])
    np.savetxt(path, data, delimiter=",", header="s,value", comments="", fmt="%.17g")
