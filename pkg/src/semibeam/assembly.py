"""
Truncated generators and energy Gram matrices of both systems.

The state ``U = (varphi, u, psi, v, y, s, z, w, theta)`` is flattened
block-contiguously: block ``b`` occupies rows ``b*N .. b*N + N - 1``.
With ``mu`` the Dirichlet eigenvalues and ``D`` the Galerkin matrix of
d/dx, the energy of a state is the quadratic form ``U^H G U`` where the
shear terms expand as

    ||varphi_x - psi||^2 = varphi^H diag(mu) varphi - 2 Re(psi^H D varphi) + ||psi||^2,

exactly, because ``<varphi_x, psi>`` only sees the sine projection of
``varphi_x``.  Since every block of the generator other than ``D`` is
diagonal, the Galerkin compression keeps the dissipation identity exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from types import MappingProxyType

import numpy as np
import scipy.linalg as sla
from numpy.typing import NDArray

from .errors import DimensionError, ParameterError, SingularSystemError
from .params import ModelParameters, Variant
from .spectral import SpectralField, derivative_matrix, eigenvalues, fractional_power_diag

__all__ = [
    "FIELDS",
    "StateVector",
    "GeneratorMatrix",
    "EnergyGram",
    "assemble_generator",
    "assemble_gram",
    "dissipation_rate",
    "stationary_solve",
    "whitened_generator",
    "smooth_probes",
]

FIELDS = ("varphi", "u", "psi", "v", "y", "s", "z", "w", "theta")
PHI, U, PSI, V, Y, S, Z, W, THETA = range(9)
DISPLACEMENTS = (PHI, PSI, Y, Z)
VELOCITIES = (U, V, S, W)


class StateVector:
    """Nine spectral fields of common size, stored as a ``(9, N)`` array."""

    __slots__ = ("_c", "length")

    def __init__(self, coefficients, length=np.pi):
        c = np.array(coefficients)
        if c.ndim != 2 or c.shape[0] != 9 or c.shape[1] < 1:
            raise DimensionError(f"state coefficients must have shape (9, N), got {c.shape}")
        if not np.issubdtype(c.dtype, np.complexfloating):
            c = c.astype(float)
        if not np.all(np.isfinite(c)):
            raise DimensionError("state coefficients must be finite")
        c.setflags(write=False)
        self._c = c
        self.length = float(length)

    @classmethod
    def zeros(cls, N, length=np.pi, dtype=float):
        return cls(np.zeros((9, N), dtype=dtype), length)

    @classmethod
    def from_flat(cls, vector, N, length=np.pi):
        vector = np.asarray(vector)
        if vector.shape != (9 * N,):
            raise DimensionError(f"flat state must have length {9 * N}, got {vector.shape}")
        return cls(vector.reshape(9, N), length)

    @classmethod
    def from_fields(cls, length=np.pi, N=None, **fields):
        """Build a state from named coefficient arrays; missing fields are zero."""
        unknown = set(fields) - set(FIELDS)
        if unknown:
            raise DimensionError(f"unknown field names {sorted(unknown)}")
        if N is None:
            sizes = {np.asarray(f).size for f in fields.values()}
            if len(sizes) != 1:
                raise DimensionError("fields must share one mode count")
            N = sizes.pop()
        dtype = complex if any(np.iscomplexobj(f) for f in fields.values()) else float
        c = np.zeros((9, N), dtype=dtype)
        for name, value in fields.items():
            value = np.asarray(value)
            if value.size != N:
                raise DimensionError(f"field {name} has {value.size} modes, expected {N}")
            c[FIELDS.index(name)] = value
        return cls(c, length)

    @classmethod
    def random_smooth(cls, rng, N, length=np.pi, decay=2.0, h1_theta=False, complex_=False):
        """Random state whose energy spectrum decays like ``n**(-2*decay)``.

        Draws are made mode by mode, so the first ``M`` modes of an ``N``-mode
        draw coincide with an ``M``-mode draw from the same generator state.
        Displacement fields (and theta when ``h1_theta``) get an extra ``1/n``
        so that every block contributes comparably to the energy norm.
        """
        shape = (N, 9, 2) if complex_ else (N, 9)
        xi = rng.standard_normal(shape)
        if complex_:
            xi = xi[..., 0] + 1j * xi[..., 1]
        n = np.arange(1, N + 1, dtype=float)
        scale = np.empty((9, N))
        for b in range(9):
            reg = b in DISPLACEMENTS or (b == THETA and h1_theta)
            scale[b] = n ** -(decay + (1.0 if reg else 0.0))
        return cls(xi.T * scale, length)

    @property
    def coefficients(self) -> NDArray:
        return self._c

    @property
    def modes(self) -> int:
        return self._c.shape[1]

    def flat(self) -> NDArray:
        return self._c.reshape(-1)

    def field(self, name) -> SpectralField:
        return SpectralField(self._c[FIELDS.index(name)], self.length)

    def __getattr__(self, name):
        if name in FIELDS:
            return self._c[FIELDS.index(name)]
        raise AttributeError(name)

    def __repr__(self):
        return f"StateVector(N={self.modes}, length={self.length:g}, dtype={self._c.dtype})"


def smooth_probes(seed, count, N, length=np.pi, decay=2.0, h1_theta=False, complex_=False):
    """``count`` smooth random states, probe ``k`` drawn from its own stream.

    Probe ``k`` depends only on ``(seed, k)``, and its first ``M`` modes do
    not depend on ``N``, so probe sets at different truncations are nested.
    """
    return [StateVector.random_smooth(np.random.default_rng((seed, k)), N, length, decay=decay,
                                      h1_theta=h1_theta, complex_=complex_)
            for k in range(count)]


def _block_map(N):
    return MappingProxyType({name: slice(b * N, (b + 1) * N) for b, name in enumerate(FIELDS)})


@dataclass(frozen=True, eq=False)
class GeneratorMatrix:
    """Dense ``9N x 9N`` Galerkin truncation of the semigroup generator."""

    variant: Variant
    modes: int
    params: ModelParameters
    entries: NDArray[np.float64]

    @property
    def block_map(self):
        return _block_map(self.modes)

    def block(self, row, col) -> NDArray:
        """Sub-block by field name or block index."""
        bm = self.block_map
        row = FIELDS[row] if isinstance(row, (int, np.integer)) else row
        col = FIELDS[col] if isinstance(col, (int, np.integer)) else col
        return self.entries[bm[row], bm[col]]

    def apply(self, state: StateVector) -> StateVector:
        _check_state(state, self.modes)
        return StateVector.from_flat(self.entries @ state.flat(), self.modes, state.length)

    @cached_property
    def eigenvalues(self) -> NDArray[np.complex128]:
        return sla.eigvals(self.entries)

    @property
    def spectral_abscissa(self) -> float:
        return float(np.max(self.eigenvalues.real))


@dataclass(frozen=True, eq=False)
class EnergyGram:
    """Symmetric positive-definite matrix of the energy inner product.

    ``factor`` is the lower Cholesky factor, ``entries = factor @ factor.T``.
    """

    variant: Variant
    modes: int
    entries: NDArray[np.float64]
    factor: NDArray[np.float64]

    def inner(self, a: StateVector, b: StateVector) -> complex:
        """``<a, b>`` in the energy metric (linear in ``a``)."""
        _check_state(a, self.modes)
        _check_state(b, self.modes)
        return complex(np.conj(b.flat()) @ (self.entries @ a.flat()))

    def norm_sq(self, state: StateVector) -> float:
        _check_state(state, self.modes)
        x = self.factor.T @ state.flat()
        return float(np.vdot(x, x).real)

    def norm(self, state: StateVector) -> float:
        return float(np.sqrt(self.norm_sq(state)))


def _check_state(state, N):
    if not isinstance(state, StateVector):
        raise DimensionError(f"expected a StateVector, got {type(state).__name__}")
    if state.modes != N:
        raise DimensionError(f"state has {state.modes} modes, operator has {N}")


def _check_N(N):
    if int(N) != N or N < 1:
        raise DimensionError(f"mode count must be a positive integer, got {N!r}")
    return int(N)


def assemble_generator(params: ModelParameters, N: int) -> GeneratorMatrix:
    """Assemble the truncated generator of ``params.variant`` on N modes per field."""
    N = _check_N(N)
    p = params
    mu = eigenvalues(N, p.l)
    A = np.diag(mu)
    I = np.eye(N)
    D = derivative_matrix(N, p.l)
    damp = [np.diag(fractional_power_diag(N, p.l, e)) for e in p.exponents]

    B = np.zeros((9 * N, 9 * N))

    def put(row, col, block):
        B[row * N:(row + 1) * N, col * N:(col + 1) * N] += block

    for disp, vel in zip(DISPLACEMENTS, VELOCITIES):
        put(disp, vel, I)

    # rho1 u' = -k1 A phi - k1 psi_x + j (y - phi) - g1 A^e1 u
    put(U, PHI, -(p.kappa1 * A + p.vdw * I) / p.rho1)
    put(U, PSI, -p.kappa1 / p.rho1 * D)
    put(U, Y, p.vdw / p.rho1 * I)
    put(U, U, -p.gamma1 / p.rho1 * damp[0])
    # rho2 v' = -b1 A psi + k1 (phi_x - psi) + delta A theta
    put(V, PSI, -(p.b1 * A + p.kappa1 * I) / p.rho2)
    put(V, PHI, p.kappa1 / p.rho2 * D)
    put(V, THETA, p.delta / p.rho2 * A)
    # rho3 s' = -k2 A y - k2 z_x - j (y - phi) - g2 A^e2 s
    put(S, Y, -(p.kappa2 * A + p.vdw * I) / p.rho3)
    put(S, Z, -p.kappa2 / p.rho3 * D)
    put(S, PHI, p.vdw / p.rho3 * I)
    put(S, S, -p.gamma2 / p.rho3 * damp[1])
    # rho4 w' = -b2 A z + k2 (y_x - z) - g3 A^e3 w
    put(W, Z, -(p.b2 * A + p.kappa2 * I) / p.rho4)
    put(W, Y, p.kappa2 / p.rho4 * D)
    put(W, W, -p.gamma3 / p.rho4 * damp[2])
    # rho5 theta' = -K A theta - (beta v | delta A v)
    put(THETA, THETA, -p.K / p.rho5 * A)
    if p.variant is Variant.SYSTEM01:
        put(THETA, V, -p.betaThermal / p.rho5 * I)
    else:
        put(THETA, V, -p.delta / p.rho5 * A)

    B.setflags(write=False)
    return GeneratorMatrix(p.variant, N, p, B)


def theta_weight(params: ModelParameters, N: int) -> NDArray[np.float64]:
    """Diagonal energy weight of the temperature block."""
    if params.variant is Variant.SYSTEM01:
        return params.rho5 * params.delta / params.betaThermal * eigenvalues(N, params.l)
    return np.full(N, params.rho5)


def assemble_gram(params: ModelParameters, N: int) -> EnergyGram:
    """Energy Gram matrix and its Cholesky factor."""
    N = _check_N(N)
    p = params
    mu = eigenvalues(N, p.l)
    I = np.eye(N)
    D = derivative_matrix(N, p.l)
    G = np.zeros((9 * N, 9 * N))

    def put(row, col, block):
        G[row * N:(row + 1) * N, col * N:(col + 1) * N] += block

    put(U, U, p.rho1 * I)
    put(V, V, p.rho2 * I)
    put(S, S, p.rho3 * I)
    put(W, W, p.rho4 * I)
    # kappa1 ||phi_x - psi||^2 + b1 ||A^1/2 psi||^2
    put(PHI, PHI, p.kappa1 * np.diag(mu))
    put(PSI, PSI, p.kappa1 * I + p.b1 * np.diag(mu))
    put(PSI, PHI, -p.kappa1 * D)
    put(PHI, PSI, -p.kappa1 * D.T)
    # kappa2 ||y_x - z||^2 + b2 ||A^1/2 z||^2
    put(Y, Y, p.kappa2 * np.diag(mu))
    put(Z, Z, p.kappa2 * I + p.b2 * np.diag(mu))
    put(Z, Y, -p.kappa2 * D)
    put(Y, Z, -p.kappa2 * D.T)
    # vdw ||y - phi||^2
    put(PHI, PHI, p.vdw * I)
    put(Y, Y, p.vdw * I)
    put(PHI, Y, -p.vdw * I)
    put(Y, PHI, -p.vdw * I)
    put(THETA, THETA, np.diag(theta_weight(p, N)))

    try:
        L = np.linalg.cholesky(G)
    except np.linalg.LinAlgError:
        raise ParameterError("gram", "energy Gram matrix is not positive definite; "
                                     "check that all coefficients are positive") from None
    if np.any(np.diag(L) <= 0.0):
        raise ParameterError("gram", "nonpositive pivot in the energy Gram factorization")
    G.setflags(write=False)
    L.setflags(write=False)
    return EnergyGram(p.variant, N, G, L)


def whitened_generator(gen: GeneratorMatrix, gram: EnergyGram) -> NDArray[np.float64]:
    """``L^T B L^{-T}``: the generator in coordinates where the energy norm is Euclidean."""
    if gen.modes != gram.modes:
        raise DimensionError("generator and Gram matrix sizes differ")
    L = gram.factor
    B_Linv_T = sla.solve_triangular(L, gen.entries.T, lower=True).T
    return L.T @ B_Linv_T


def dissipation_rate(params: ModelParameters, state: StateVector) -> float:
    """Right-hand side of the dissipation identity, evaluated spectrally."""
    N = state.modes
    l = params.l
    e1, e2, e3 = params.exponents
    rate = (
        params.gamma1 * np.sum(fractional_power_diag(N, l, e1) * np.abs(state.u) ** 2)
        + params.gamma2 * np.sum(fractional_power_diag(N, l, e2) * np.abs(state.s) ** 2)
        + params.gamma3 * np.sum(fractional_power_diag(N, l, e3) * np.abs(state.w) ** 2)
    )
    mu = eigenvalues(N, l)
    theta2 = np.abs(state.theta) ** 2
    if params.variant is Variant.SYSTEM01:
        rate += params.delta * params.K / params.betaThermal * np.sum(mu**2 * theta2)
    else:
        rate += params.K * np.sum(mu * theta2)
    return -float(rate)


def stationary_solve(params: ModelParameters, N: int, F: StateVector, gen=None) -> StateVector:
    """Solve ``-B U = F`` on the full real ``9N`` system."""
    if gen is None:
        gen = assemble_generator(params, N)
    _check_state(F, gen.modes)
    try:
        lu, piv = sla.lu_factor(gen.entries, check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SingularSystemError(f"stationary system is singular: {exc}") from None
    anorm = np.linalg.norm(gen.entries, 1)
    (gecon,) = sla.get_lapack_funcs(("gecon",), (lu,))
    rcond, _ = gecon(lu, anorm, norm="1")
    if rcond == 0.0 or 1.0 / rcond > 1e14:
        raise SingularSystemError("stationary system is numerically singular "
                                  "(indicates an assembly bug)", condition=np.inf if rcond == 0 else 1 / rcond)
    rhs = -F.flat()
    if np.iscomplexobj(rhs):
        sol = sla.lu_solve((lu, piv), rhs.real) + 1j * sla.lu_solve((lu, piv), rhs.imag)
    else:
        sol = sla.lu_solve((lu, piv), rhs)
    return StateVector.from_flat(sol, gen.modes, F.length)
