"""
Dirichlet sine basis on (0, l) and the operator A = -d^2/dx^2 in it.

Every scalar field is stored by its coefficients in the orthonormal basis

    e_n(x) = sqrt(2/l) * sin(n*pi*x/l),   n = 1..N,

in which A and all of its powers A^sigma are diagonal.  The only dense
operator needed by the beam systems is the Galerkin matrix of d/dx.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import SpectralError

__all__ = [
    "SpectralField",
    "eigenvalue",
    "eigenvalues",
    "fractional_power_diag",
    "derivative_matrix",
    "synthesize",
    "interpolation_ratio",
]


def _check_length(l: float) -> float:
    l = float(l)
    if not np.isfinite(l) or l <= 0.0:
        raise SpectralError(f"domain length must be positive and finite, got {l!r}")
    return l


def _check_modes(N: int) -> int:
    if int(N) != N or N < 1:
        raise SpectralError(f"mode count must be a positive integer, got {N!r}")
    return int(N)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Coefficients of one scalar field in the sine eigenbasis of A.

    Parameters
    ----------
    coefficients : array_like
        ``coefficients[n-1]`` multiplies ``e_n``.  Real or complex.
    length : float
        Beam length ``l``.
    """

    coefficients: NDArray
    length: float = np.pi

    def __post_init__(self):
        c = np.asarray(self.coefficients)
        if c.ndim != 1 or c.size < 1:
            raise SpectralError("coefficients must be a non-empty 1-d sequence")
        if not np.issubdtype(c.dtype, np.complexfloating):
            c = c.astype(float)
        if not np.all(np.isfinite(c)):
            raise SpectralError("coefficients must be finite")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)
        object.__setattr__(self, "length", _check_length(self.length))

    @property
    def modes(self) -> int:
        return self.coefficients.size

    def norm(self) -> float:
        """L^2 norm; Parseval in the orthonormal basis."""
        return float(np.linalg.norm(self.coefficients))

    def power_norm(self, sigma: float) -> float:
        """``||A^sigma f||``."""
        d = fractional_power_diag(self.modes, self.length, sigma)
        return float(np.linalg.norm(d * self.coefficients))


def eigenvalue(n: int, l: float) -> float:
    """n-th Dirichlet eigenvalue ``(n*pi/l)**2``."""
    if int(n) != n or n < 1:
        raise SpectralError(f"mode index must be >= 1, got {n!r}")
    l = _check_length(l)
    return (n * np.pi / l) ** 2


def eigenvalues(N: int, l: float) -> NDArray[np.float64]:
    N = _check_modes(N)
    l = _check_length(l)
    return (np.arange(1, N + 1) * np.pi / l) ** 2


def fractional_power_diag(N: int, l: float, sigma: float) -> NDArray[np.float64]:
    """Diagonal of ``A**sigma`` restricted to the first N modes.

    ``sigma`` may be negative (A^{-1/2}, A^{-1} are bounded).
    """
    sigma = float(sigma)
    if not np.isfinite(sigma):
        raise SpectralError(f"exponent must be finite, got {sigma!r}")
    mu = eigenvalues(N, l)
    if sigma == 0.0:
        return np.ones_like(mu)
    return mu**sigma


def derivative_matrix(N: int, l: float) -> NDArray[np.float64]:
    """Galerkin matrix of d/dx: ``D[m-1, n-1] = <e_n', e_m>``.

    For m + n odd the entry is ``4 m n / (l (m^2 - n^2))``, otherwise 0.
    The matrix is exactly antisymmetric.
    """
    N = _check_modes(N)
    l = _check_length(l)
    idx = np.arange(1, N + 1)
    m = idx[:, None]
    n = idx[None, :]
    odd = (m + n) % 2 == 1
    # m != n whenever m + n is odd, so the denominator never vanishes there
    denom = np.where(odd, m * m - n * n, 1)
    D = np.where(odd, 4.0 * m * n / (l * denom), 0.0)
    # exact antisymmetry, independent of rounding in the division
    upper = np.triu(D, 1)
    return upper - upper.T


def synthesize(field: SpectralField, points: ArrayLike) -> NDArray:
    """Evaluate ``sum_n c_n e_n(x)`` at ``points`` (all inside [0, l])."""
    x = np.atleast_1d(np.asarray(points, dtype=float))
    l = field.length
    if np.any(~np.isfinite(x)) or np.any(x < 0.0) or np.any(x > l):
        raise SpectralError(f"evaluation points must lie in [0, {l}]")
    n = np.arange(1, field.modes + 1)
    basis = np.sqrt(2.0 / l) * np.sin(np.outer(x, n) * np.pi / l)
    # sin(n*pi) is not exactly zero in floating point
    basis[(x == 0.0) | (x == l), :] = 0.0
    return basis @ field.coefficients


def interpolation_ratio(field: SpectralField, alpha: float, beta: float, gamma: float) -> float:
    """Ratio of the two sides of the Lions interpolation inequality.

    Returns ``||A^b u|| / (||A^a u||^((g-b)/(g-a)) * ||A^g u||^((b-a)/(g-a)))``,
    which never exceeds 1 for the spectral operator (Hoelder on the sums).
    """
    if not (alpha < beta < gamma):
        raise SpectralError(f"need alpha < beta < gamma, got ({alpha}, {beta}, {gamma})")
    mag = np.abs(field.coefficients)
    mask = mag > 0.0
    if not np.any(mask):
        raise SpectralError("interpolation ratio is undefined for the zero field")
    logc2 = 2.0 * np.log(mag[mask])  # log before squaring: tiny coefficients would underflow
    logmu = np.log(eigenvalues(field.modes, field.length))[mask]

    # squared norms in log space, so extreme exponents cannot overflow
    def log_sq_norm(s):
        return np.logaddexp.reduce(logc2 + 2.0 * s * logmu)

    wa = (gamma - beta) / (gamma - alpha)
    wg = (beta - alpha) / (gamma - alpha)
    log_ratio = 0.5 * (log_sq_norm(beta) - wa * log_sq_norm(alpha) - wg * log_sq_norm(gamma))
    return float(np.exp(log_ratio))
