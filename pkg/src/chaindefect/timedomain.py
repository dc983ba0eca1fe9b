"""Time-domain integration of the defective chain and numerical Laplace transforms.

This is an oracle for the Laplace-domain maps and is independent of them:
the impulse becomes the initial velocity ``x1'(0+) = gamma / m`` and the
linear system is advanced with classical RK4.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson

from .model import ChainConfig, DefectHypothesis

RK4_ORDER = 4


class UnstableStep(ArithmeticError):
    pass


class TailTooLarge(ValueError):
    """The trace is too short for the requested Laplace variable."""


@dataclass(frozen=True)
class TimeTrace:
    dt: float
    duration: float
    samples: np.ndarray
    damping: float = 0.0
    energy: np.ndarray | None = None

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.samples.size)

    def to_csv(self, path) -> None:
        np.savetxt(path, np.column_stack([self.times, self.samples]), delimiter=",",
                   header="t,x1", comments="", fmt="%.17g")


def stiffness_matrix(chain: ChainConfig, defect: DefectHypothesis) -> np.ndarray:
    """``K`` in ``m x'' + d x' + K x = 0`` for the defective chain."""
    defect.check(chain)
    n, k, j, ks = chain.n_masses, chain.base_stiffness, defect.index, defect.stiffness
    K = (np.diag(np.full(n, 2.0 * k)) - np.diag(np.full(n - 1, k), 1)
         - np.diag(np.full(n - 1, k), -1))
    K[j - 2, j - 2] = K[j - 1, j - 1] = k + ks
    K[j - 1, j - 2] = -ks
    return K


def energy_weights(chain: ChainConfig, defect: DefectHypothesis) -> np.ndarray:
    """Diagonal ``W`` making ``W K`` symmetric, so the weighted energy is a Lyapunov function."""
    w = np.ones(chain.n_masses)
    w[defect.index - 1:] = chain.base_stiffness / defect.stiffness
    return w


def max_stable_step(chain: ChainConfig, defect: DefectHypothesis) -> float:
    """``0.05 * 2 pi / omega_max`` with ``omega_max = 2 sqrt(k_max / m)``."""
    k_max = max(chain.base_stiffness, defect.stiffness)
    return 0.05 * 2.0 * math.pi / (2.0 * math.sqrt(k_max / chain.base_mass))


def integrate_chain(chain: ChainConfig, defect: DefectHypothesis, dt: float, duration: float,
                    record_energy: bool = False) -> TimeTrace:
    """Integrate the impulse response and sample ``x1`` at every step."""
    if not dt > 0 or not duration >= dt:
        raise ValueError(f"need dt > 0 and duration >= dt, got dt={dt}, T={duration}")
    if dt > max_stable_step(chain, defect) * (1 + 1e-12):
        raise ValueError(f"dt={dt} exceeds the step bound {max_stable_step(chain, defect):.4g}")
    n, m = chain.n_masses, chain.base_mass
    K = stiffness_matrix(chain, defect)
    A = np.zeros((2 * n, 2 * n))
    A[:n, n:] = np.eye(n)
    A[n:, :n] = -K / m
    A[n:, n:] = -chain.damping / m * np.eye(n)
    hA = dt * A
    # RK4 on a linear system is multiplication by the degree-4 Taylor polynomial
    P = np.eye(2 * n)
    term = np.eye(2 * n)
    for p in range(1, RK4_ORDER + 1):
        term = term @ hA / p
        P += term
    PT = np.ascontiguousarray(P.T)

    steps = int(round(duration / dt))
    y = np.zeros(2 * n)
    y[n] = chain.impulse / m
    x1 = np.empty(steps + 1)
    x1[0] = 0.0
    energy = None
    if record_energy:
        W = energy_weights(chain, defect)
        WK = W[:, None] * K
        energy = np.empty(steps + 1)
        energy[0] = 0.5 * m * (W * y[n:]) @ y[n:]
    limit = 1e6 * abs(chain.impulse)
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(1, steps + 1):
            y = y @ PT
            x1[i] = y[0]
            if record_energy:
                energy[i] = 0.5 * m * (W * y[n:]) @ y[n:] + 0.5 * y[:n] @ WK @ y[:n]
            if i % 256 == 0 and not np.all(np.abs(y) <= limit):
                raise UnstableStep(f"response exceeded {limit:g} at t={i * dt:g}")
    if not np.all(np.abs(x1) <= limit):
        raise UnstableStep(f"response exceeded {limit:g}")
    return TimeTrace(dt, steps * dt, x1, chain.damping, energy)


def tail_bound(trace: TimeTrace, s: float) -> float:
    return float(np.max(np.abs(trace.samples)) * math.exp(-(s + trace.damping / 2.0) * trace.duration))


def required_duration(s: float, tol: float, amplitude: float, damping: float = 0.0) -> float:
    """Shortest ``T`` whose tail bound ``amplitude * exp(-(s + d/2) T)`` is ``<= tol``."""
    return max(0.0, math.log(amplitude / tol) / (s + damping / 2.0))


def numerical_laplace(trace: TimeTrace, s: float, tol: float = 1e-8) -> float:
    """Simpson approximation of ``int_0^T exp(-s t) x1(t) dt``."""
    if not s > 0:
        raise ValueError(f"s must be positive, got {s!r}")
    bound = tail_bound(trace, s)
    if bound > tol:
        raise TailTooLarge(f"tail bound {bound:.3g} > {tol:g} at s={s}; increase the duration")
    t = trace.times
    return float(simpson(np.exp(-s * t) * trace.samples, dx=trace.dt))
