"""Laplace-domain forward maps for the single-defect chain.

Sign convention
---------------
The homogeneous Laplace matrix ``A_h`` has diagonal ``h = -(m s^2 + d s + 2k)``
and unit off-diagonals (after dividing by ``k``).  Writing ``h = -2 cosh(lam)``,
the hyperbolic kernel

    R[m, p] = sinh(min(m,p) lam) sinh((N+1-max(m,p)) lam) / (sinh(lam) sinh((N+1) lam))

is positive and equals ``-inv(A_h)[m, p]``.  The defect formulas (the 2x2
system for the two masses adjacent to the defect and the first-mass
response) are exact when written with ``inv(A_h)``, so every formula below
uses ``g = -R``.  With that single substitution the analytic response
coincides with a direct solve of ``A X = b`` to round-off.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded, LinAlgError

from .model import ChainConfig

LOG2 = math.log(2.0)
DET_GUARD = 1e-300


class NearSingularDeterminant(ArithmeticError):
    """The 2x2 system for the defect-adjacent masses is numerically singular."""


class SingularMatrix(ArithmeticError):
    """The assembled Laplace-domain matrix could not be factorised."""


@dataclass(frozen=True)
class SpectralPoint:
    s: float
    h: float
    lam: float


@dataclass(frozen=True)
class DefectAdjacentPair:
    x_jm1: float
    x_j: float
    f: float
    g: float
    u: float
    v: float

    @property
    def det(self) -> float:
        return self.g * self.u - self.f * self.v


def _spectral_u(s, chain: ChainConfig):
    # cosh(lam) = 1 + u; u stays accurate for small s where 1 + u would round
    s = np.asarray(s, dtype=float)
    return (chain.base_mass * s * s + chain.damping * s) / (2.0 * chain.base_stiffness)


def spectral_lambda(s, chain: ChainConfig):
    """Vectorised ``lam(s) = arccosh(1 + (m s^2 + d s) / 2k)``."""
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ValueError("the Laplace variable must be nonnegative")
    u = _spectral_u(s, chain)
    return np.log1p(u + np.sqrt(u * (u + 2.0)))


def lambda_of_s(s: float, chain: ChainConfig) -> SpectralPoint:
    if s < 0:
        raise ValueError(f"s must be nonnegative, got {s!r}")
    h = -(chain.base_mass * s * s + chain.damping * s + 2.0 * chain.base_stiffness)
    return SpectralPoint(float(s), h, float(spectral_lambda(s, chain)))


def log_sinh(x):
    """``log(sinh(x))`` for ``x >= 0`` without overflow; ``-inf`` at 0."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return x + np.log(-np.expm1(-2.0 * x)) - LOG2


def green_kernel_array(m: int, p: int, lam, n: int):
    """``R[m, p]`` for an array of ``lam`` values (1-based indices)."""
    lo, hi = (m, p) if m <= p else (p, m)
    if lo < 1 or hi > n:
        raise IndexError(f"kernel indices ({m}, {p}) outside 1..{n}")
    lam = np.asarray(lam, dtype=float)
    limit = lo * (n + 1 - hi) / (n + 1)
    with np.errstate(invalid="ignore"):
        log_r = (log_sinh(lo * lam) + log_sinh((n + 1 - hi) * lam)
                 - log_sinh(lam) - log_sinh((n + 1) * lam))
        out = np.exp(log_r)
    return np.where(lam > 0, out, limit)


def green_kernel(m: int, p: int, sp: SpectralPoint, n: int) -> float:
    return float(green_kernel_array(m, p, sp.lam, n))


@dataclass(frozen=True)
class DefectCoefficients:
    """Entries of ``inv(A_h)`` needed for a defect at spring ``j``.

    ``a`` stands for mass ``j-1`` and ``b`` for mass ``j``.  Arrays run over
    the Laplace grid.
    """

    j: int
    g11: np.ndarray
    g1a: np.ndarray
    g1b: np.ndarray
    gaa: np.ndarray
    gbb: np.ndarray
    gab: np.ndarray

    def stacked(self) -> np.ndarray:
        return np.ascontiguousarray(
            np.vstack([self.g11, self.g1a, self.g1b, self.gaa, self.gbb, self.gab]))


def defect_coefficients(j: int, lam, n: int) -> DefectCoefficients:
    if not 2 <= j <= n:
        raise IndexError(f"defect index {j} outside [2, {n}]")
    lam = np.atleast_1d(np.asarray(lam, dtype=float))

    def g(m, p):
        return -green_kernel_array(m, p, lam, n)

    return DefectCoefficients(j, g(1, 1), g(1, j - 1), g(1, j),
                              g(j - 1, j - 1), g(j, j), g(j - 1, j))


def rational_coefficients(co: DefectCoefficients, gamma) -> np.ndarray:
    """Per-node coefficients of the first-mass response as a rational function.

    With ``c = 1 - k_rel`` the response is
    ``x1 = -gamma*g11 + (e1 c + e2 c^2) / (1 + d1 c + d2 c^2)``.
    Returns the rows ``e1, e2, d1, d2`` (shape ``(4, n)``).
    """
    g1a, g1b, gaa, gbb, gab = co.g1a, co.g1b, co.gaa, co.gbb, co.gab
    alpha = g1b * gab - g1a * gbb
    beta = g1a * (gab - gbb) - g1b * (gaa - gab)
    e1 = gamma * (g1a * g1a - g1a * g1b + g1b * g1b)
    e2 = -gamma * ((g1a - g1b) * alpha + g1b * beta)
    d1 = gaa + gbb - gab
    d2 = gaa * gbb - gab * gab
    rows = np.vstack([e1, e2, d1, d2])
    # subnormal coefficients carry nothing measurable and stall the FPU
    rows[np.abs(rows) < np.finfo(float).tiny] = 0.0
    return np.ascontiguousarray(rows)


def pair_from_coefficients(co: DefectCoefficients, k_rel, gamma):
    """Solve the 2x2 system for ``(x_{j-1}, x_j)``.

    ``k_rel`` is the defect stiffness divided by the baseline stiffness and
    ``gamma`` the impulse divided by the baseline stiffness.  Returns
    ``(x_jm1, x_j, F, G, U, V)`` as arrays.
    """
    c = 1.0 - k_rel
    F = c * (co.gab - co.gbb)
    G = 1.0 + c * co.gbb
    U = 1.0 + c * (co.gaa - co.gab)
    V = c * co.gab
    det = G * U - F * V
    with np.errstate(divide="ignore", invalid="ignore"):
        x_a = -(-gamma * co.g1b * V + gamma * co.g1a * G) / det
        x_b = -(gamma * co.g1b * U - gamma * co.g1a * F) / det
    bad = np.abs(det) < DET_GUARD
    if np.any(bad):
        x_a = np.where(bad, np.nan, x_a)
        x_b = np.where(bad, np.nan, x_b)
    return x_a, x_b, F, G, U, V


def x1_from_coefficients(co: DefectCoefficients, k_rel, gamma):
    """First-mass response; NaN where the 2x2 determinant is degenerate."""
    c = 1.0 - k_rel
    x_a, x_b, *_ = pair_from_coefficients(co, k_rel, gamma)
    return -gamma * co.g11 - (co.g1a * c - co.g1b * c) * x_a - co.g1b * c * x_b


def defect_pair(j: int, k_star: float, sp: SpectralPoint, chain: ChainConfig) -> DefectAdjacentPair:
    co = defect_coefficients(j, sp.lam, chain.n_masses)
    k = chain.base_stiffness
    x_a, x_b, F, G, U, V = (float(v[0]) for v in
                            pair_from_coefficients(co, k_star / k, chain.impulse / k))
    if abs(G * U - F * V) < DET_GUARD:
        raise NearSingularDeterminant(
            f"GU - FV = {G * U - F * V:.3e} at s={sp.s}, j={j}, k*={k_star}")
    return DefectAdjacentPair(x_a, x_b, F, G, U, V)


def analytic_x1(j: int, k_star: float, s, chain: ChainConfig):
    """Closed-form Laplace response of mass 1 for a defect at spring ``j``.

    Accepts a scalar or an array of ``s``.
    """
    scalar = np.ndim(s) == 0
    lam = spectral_lambda(np.atleast_1d(s), chain)
    co = defect_coefficients(j, lam, chain.n_masses)
    k = chain.base_stiffness
    x1 = x1_from_coefficients(co, k_star / k, chain.impulse / k)
    if np.any(np.isnan(x1)):
        raise NearSingularDeterminant(f"degenerate defect system for j={j}, k*={k_star}")
    return float(x1[0]) if scalar else x1


def assemble_matrix(j: int, k_star: float, s: float, chain: ChainConfig) -> np.ndarray:
    """Dense Laplace-domain system matrix (entries as in the defect model)."""
    n, k = chain.n_masses, chain.base_stiffness
    if not 2 <= j <= n:
        raise IndexError(f"defect index {j} outside [2, {n}]")
    h = -(chain.base_mass * s * s + chain.damping * s + 2.0 * k)
    A = np.diag(np.full(n, h)) + np.diag(np.full(n - 1, k), 1) + np.diag(np.full(n - 1, k), -1)
    A[j - 2, j - 2] = h + k - k_star
    A[j - 1, j - 1] = h + k - k_star
    A[j - 1, j - 2] = k_star
    return A


def _banded(j, k_star, s, chain):
    n, k = chain.n_masses, chain.base_stiffness
    h = -(chain.base_mass * s * s + chain.damping * s + 2.0 * k)
    ab = np.empty((3, n))
    ab[0, :] = k          # superdiagonal, ab[0, i] = A[i-1, i]
    ab[1, :] = h
    ab[2, :] = k          # subdiagonal, ab[2, i] = A[i+1, i]
    ab[1, j - 2] = ab[1, j - 1] = h + k - k_star
    ab[2, j - 2] = k_star  # A[j, j-1] in 1-based indexing
    return ab


def direct_solve(j: int, k_star: float, s: float, chain: ChainConfig) -> np.ndarray:
    """All mass responses at one ``s`` by a banded LU solve."""
    if not 2 <= j <= chain.n_masses:
        raise IndexError(f"defect index {j} outside [2, {chain.n_masses}]")
    b = np.zeros(chain.n_masses)
    b[0] = -chain.impulse
    try:
        x = solve_banded((1, 1), _banded(j, k_star, s, chain), b, check_finite=False)
    except LinAlgError as exc:
        raise SingularMatrix(f"singular system at s={s}, j={j}, k*={k_star}") from exc
    if not np.all(np.isfinite(x)):
        raise SingularMatrix(f"non-finite solution at s={s}, j={j}, k*={k_star}")
    return x


def direct_solve_x1(j: int, k_star: float, s, chain: ChainConfig):
    """First-mass response from the assembled system; scalar or array ``s``."""
    if np.ndim(s) == 0:
        return float(direct_solve(j, k_star, float(s), chain)[0])
    return np.array([direct_solve(j, k_star, float(si), chain)[0] for si in np.asarray(s)])
