"""Chain configuration, defect hypotheses and unit conversions.

All inversion math runs on the nondimensional chain (unit masses, unit
baseline springs).  :class:`PhysicalUnits` only decorates results.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np


class ConfigError(ValueError):
    """Invalid configuration value or unknown configuration key."""


@dataclass(frozen=True)
class ChainConfig:
    """Homogeneous damped spring-mass chain with clamped ends.

    Mass 1 receives the impulse ``impulse * delta(t)``.  Spring ``j`` couples
    masses ``j-1`` and ``j``; springs 1 and N+1 attach to the walls.
    """

    n_masses: int = 100
    damping: float = 0.1
    impulse: float = 1.0
    base_stiffness: float = 1.0
    base_mass: float = 1.0

    def __post_init__(self):
        if int(self.n_masses) != self.n_masses or self.n_masses < 3:
            raise ConfigError(f"n_masses must be an integer >= 3, got {self.n_masses!r}")
        if not self.damping >= 0:
            raise ConfigError(f"damping must be >= 0, got {self.damping!r}")
        if not self.base_stiffness > 0:
            raise ConfigError(f"base_stiffness must be > 0, got {self.base_stiffness!r}")
        if not self.base_mass > 0:
            raise ConfigError(f"base_mass must be > 0, got {self.base_mass!r}")
        if not math.isfinite(self.impulse):
            raise ConfigError(f"impulse must be finite, got {self.impulse!r}")
        object.__setattr__(self, "n_masses", int(self.n_masses))

    @property
    def defect_indices(self) -> range:
        return range(2, self.n_masses + 1)


@dataclass(frozen=True)
class DefectHypothesis:
    index: int
    stiffness: float

    def __post_init__(self):
        if int(self.index) != self.index:
            raise ConfigError(f"defect index must be an integer, got {self.index!r}")
        object.__setattr__(self, "index", int(self.index))
        if not self.stiffness > 0:
            raise ConfigError(f"defect stiffness must be > 0, got {self.stiffness!r}")

    def check(self, chain: ChainConfig) -> None:
        if not 2 <= self.index <= chain.n_masses:
            raise ConfigError(
                f"defect index must lie in [2, {chain.n_masses}], got {self.index}")


@dataclass(frozen=True)
class PhysicalUnits:
    length: float
    density: float
    youngs_modulus: float
    cross_section: float

    def __post_init__(self):
        for name in ("length", "density", "youngs_modulus", "cross_section"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ConfigError(f"units.{name} must be positive, got {value!r}")

    @property
    def wave_speed(self) -> float:
        return math.sqrt(self.youngs_modulus / self.density)

    def cell_length(self, chain: ChainConfig) -> float:
        return self.length / chain.n_masses

    def reference_mass(self, chain: ChainConfig) -> float:
        return self.density * self.cross_section * self.cell_length(chain)

    def reference_stiffness(self, chain: ChainConfig) -> float:
        return self.youngs_modulus * self.cross_section / self.cell_length(chain)


def identify_from_bar(density, modulus, damping, dx):
    """Map sampled bar profiles to per-element chain parameters.

    Returns ``(masses, stiffnesses, dampings)`` with ``m_i = rho_i*dx``,
    ``k_i = E_i/dx`` and ``d_i = mu_i*dx``.
    """
    rho = np.asarray(density, dtype=float)
    E = np.asarray(modulus, dtype=float)
    mu = np.asarray(damping, dtype=float)
    if not (rho.shape == E.shape == mu.shape) or rho.ndim != 1:
        raise ValueError("density, modulus and damping profiles must be 1-D and of equal length")
    if not dx > 0:
        raise ValueError(f"dx must be positive, got {dx!r}")
    if np.any(rho <= 0) or np.any(E <= 0):
        raise ValueError("density and modulus samples must be positive")
    if np.any(mu < 0):
        raise ValueError("damping samples must be nonnegative")
    return rho * dx, E / dx, mu * dx


def bar_from_chain(masses, stiffnesses, dampings, dx):
    """Inverse of :func:`identify_from_bar`."""
    return (np.asarray(masses, dtype=float) / dx,
            np.asarray(stiffnesses, dtype=float) * dx,
            np.asarray(dampings, dtype=float) / dx)


def physical_time(t, units: PhysicalUnits, chain: ChainConfig):
    """Nondimensional time to seconds: ``t * sqrt(m_ref / k_ref)``."""
    return t * math.sqrt(units.reference_mass(chain) / units.reference_stiffness(chain))


def physical_frequency(omega, units: PhysicalUnits, chain: ChainConfig):
    """Nondimensional angular frequency to rad/s: ``omega * sqrt(k_ref / m_ref)``."""
    return omega * math.sqrt(units.reference_stiffness(chain) / units.reference_mass(chain))


def max_resolved_frequency(units: PhysicalUnits, chain: ChainConfig) -> float:
    """Cut-off frequency ``c N / (4 L)`` in Hz, with ``c = sqrt(E0/rho)``."""
    return units.wave_speed * chain.n_masses / (4.0 * units.length)


# Flat configuration files -------------------------------------------------

CONFIG_KEYS = {
    "n_masses": "number of masses N (integer >= 3)",
    "damping": "per-mass damping coefficient d >= 0",
    "impulse": "impulse amplitude gamma applied to mass 1",
    "base_stiffness": "baseline spring constant k > 0",
    "base_mass": "baseline mass m > 0",
    "defect.index": "defective spring index j in [2, N]",
    "defect.stiffness": "defective spring constant k* > 0",
    "units.length": "physical bar length L [m]",
    "units.density": "density rho [kg/m^3]",
    "units.youngs_modulus": "baseline Young's modulus E0 [Pa]",
    "units.cross_section": "cross-sectional area A [m^2]",
}


@dataclass(frozen=True)
class ModelConfig:
    chain: ChainConfig
    defect: DefectHypothesis | None = None
    units: PhysicalUnits | None = None

    def to_flat(self) -> dict:
        flat = dict(asdict(self.chain))
        if self.defect is not None:
            flat["defect.index"] = self.defect.index
            flat["defect.stiffness"] = self.defect.stiffness
        if self.units is not None:
            for key, value in asdict(self.units).items():
                flat[f"units.{key}"] = value
        return flat


def parse_model_config(flat: dict, extra_keys=()) -> ModelConfig:
    """Build a :class:`ModelConfig` from a flat ``{dotted.key: value}`` mapping.

    Keys outside :data:`CONFIG_KEYS` and ``extra_keys`` raise ConfigError.
    """
    unknown = sorted(set(flat) - set(CONFIG_KEYS) - set(extra_keys))
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
    chain_kwargs = {k: flat[k] for k in
                    ("n_masses", "damping", "impulse", "base_stiffness", "base_mass") if k in flat}
    chain = ChainConfig(**chain_kwargs)

    defect = None
    if "defect.index" in flat or "defect.stiffness" in flat:
        if not ("defect.index" in flat and "defect.stiffness" in flat):
            raise ConfigError("defect.index and defect.stiffness must be given together")
        defect = DefectHypothesis(flat["defect.index"], float(flat["defect.stiffness"]))
        defect.check(chain)

    units = None
    unit_keys = [k for k in flat if k.startswith("units.")]
    if unit_keys:
        missing = [k for k in CONFIG_KEYS if k.startswith("units.") and k not in flat]
        if missing:
            raise ConfigError(f"incomplete units block, missing: {', '.join(missing)}")
        units = PhysicalUnits(**{k.split(".", 1)[1]: float(flat[k]) for k in unit_keys})
    return ModelConfig(chain, defect, units)


def load_config(path) -> dict:
    """Read a flat JSON object of configuration keys."""
    with open(Path(path)) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return data
