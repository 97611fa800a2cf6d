"""Time evolution, energy bookkeeping and exponential decay fits."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from numpy.typing import NDArray

from .assembly import (
    EnergyGram,
    GeneratorMatrix,
    StateVector,
    _check_state,
    assemble_generator,
    dissipation_rate,
    whitened_generator,
)
from .errors import FitError, SingularSystemError
from .params import ModelParameters

logger = logging.getLogger(__name__)

__all__ = [
    "TrajectoryRecord",
    "DecayFit",
    "energy",
    "propagate_exact",
    "step_implicit_midpoint",
    "fit_decay_rate",
    "default_initial_state",
]

EIGENBASIS_COND_LIMIT = 1e12
ENERGY_FLOOR = 1e-300


def energy(gram: EnergyGram, state: StateVector) -> float:
    """Total energy ``0.5 * ||U||_G^2``."""
    return 0.5 * gram.norm_sq(state)


@dataclass
class TrajectoryRecord:
    times: NDArray[np.float64]
    energies: NDArray[np.float64]
    dissipations: NDArray[np.float64]
    params: ModelParameters | None
    N: int
    snapshots: dict = field(default_factory=dict)  # index into times -> StateVector
    method: str = "eigen"

    @property
    def used_fallback(self) -> bool:
        return self.method != "eigen"

    def state_at(self, k) -> StateVector:
        return self.snapshots[k]


@dataclass(frozen=True)
class DecayFit:
    """Least-squares fit ``E(t) ~ E0 * exp(-2*omega*t)`` on a time window."""

    omega: float
    rSquared: float
    window: tuple
    spectralAbscissa: float
    samples: int

    @property
    def relative_gap(self) -> float:
        """``|omega + abscissa| / |abscissa|``."""
        return abs(self.omega + self.spectralAbscissa) / abs(self.spectralAbscissa)


def default_initial_state(N, length=np.pi) -> StateVector:
    """Coefficients ``1/n^2`` on varphi and y, zero elsewhere."""
    c = 1.0 / np.arange(1, N + 1, dtype=float) ** 2
    return StateVector.from_fields(length, varphi=c, y=c)


def _as_times(times):
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or t.size < 1:
        raise ValueError("times must be a non-empty 1-d sequence")
    if t[0] != 0.0:
        raise ValueError("times must start at 0")
    if np.any(np.diff(t) <= 0.0):
        raise ValueError("times must be strictly increasing")
    return t


def _record(gen, gram, times, states, keep, method):
    energies = np.array([energy(gram, s) for s in states])
    dissip = np.array([dissipation_rate(gen.params, s) for s in states])
    snaps = {k: states[k] for k in range(len(states))} if keep else {0: states[0], len(states) - 1: states[-1]}
    return TrajectoryRecord(times, energies, dissip, gen.params, gen.modes, snaps, method)


def propagate_exact(gen: GeneratorMatrix, gram: EnergyGram, U0: StateVector, times,
                    keep_states=False, fallback_dt=1e-3) -> TrajectoryRecord:
    """Propagate ``U0`` through ``exp(t B)`` by eigendecomposition.

    The decomposition is taken of the energy-whitened generator, which is
    close to normal for these dissipative systems.  If its eigenbasis is
    ill-conditioned (cond > 1e12), falls back to implicit midpoint steps of
    size at most ``fallback_dt``; ``record.method`` says which path ran.
    """
    _check_state(U0, gen.modes)
    t = _as_times(times)
    L = gram.factor
    M = whitened_generator(gen, gram)
    lam, V = sla.eig(M)
    cond = np.linalg.cond(V)
    if not np.isfinite(cond) or cond > EIGENBASIS_COND_LIMIT:
        logger.warning("eigenbasis condition %.3g exceeds %.0e; using implicit midpoint",
                       cond, EIGENBASIS_COND_LIMIT)
        return _propagate_midpoint(gen, gram, U0, t, keep_states, fallback_dt)

    z0 = L.T @ U0.flat()
    coeffs = sla.solve(V, z0.astype(complex))
    real_input = not np.iscomplexobj(U0.flat())
    states = []
    for k, tk in enumerate(t):
        if k == 0:
            flat = U0.flat()
        else:
            zk = V @ (np.exp(lam * tk) * coeffs)
            flat = sla.solve_triangular(L, zk, lower=True, trans="T")
            if real_input:
                flat = flat.real
        states.append(StateVector.from_flat(flat, gen.modes, U0.length))
    return _record(gen, gram, t, states, keep_states, "eigen")


class _MidpointStepper:
    def __init__(self, gen):
        self.gen = gen
        self._cache = {}

    def factors(self, dt):
        key = float(dt)
        if key not in self._cache:
            n = self.gen.entries.shape[0]
            half = 0.5 * dt * self.gen.entries
            lhs = np.eye(n) - half
            try:
                lu = sla.lu_factor(lhs, check_finite=False)
            except (np.linalg.LinAlgError, ValueError) as exc:
                raise SingularSystemError(f"implicit midpoint matrix singular for dt={dt}: {exc}") from None
            if np.any(np.diag(lu[0]) == 0.0):
                raise SingularSystemError(f"implicit midpoint matrix singular for dt={dt}")
            self._cache[key] = (lu, np.eye(n) + half)
        return self._cache[key]

    def step(self, flat, dt):
        lu, rhs_mat = self.factors(dt)
        rhs = rhs_mat @ flat
        if np.iscomplexobj(rhs):
            return sla.lu_solve(lu, rhs.real) + 1j * sla.lu_solve(lu, rhs.imag)
        return sla.lu_solve(lu, rhs)


def step_implicit_midpoint(gen: GeneratorMatrix, U: StateVector, dt: float) -> StateVector:
    """One step of ``(I - dt/2 B) U+ = (I + dt/2 B) U``."""
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    _check_state(U, gen.modes)
    out = _MidpointStepper(gen).step(U.flat(), dt)
    return StateVector.from_flat(out, gen.modes, U.length)


def _propagate_midpoint(gen, gram, U0, t, keep_states, dt_max):
    stepper = _MidpointStepper(gen)
    flat = U0.flat()
    states = [U0]
    for a, b in zip(t[:-1], t[1:]):
        nsteps = max(1, int(np.ceil((b - a) / dt_max - 1e-9)))
        dt = (b - a) / nsteps
        for _ in range(nsteps):
            flat = stepper.step(flat, dt)
        states.append(StateVector.from_flat(flat, gen.modes, U0.length))
    return _record(gen, gram, t, states, keep_states, "midpoint")


def fit_decay_rate(traj: TrajectoryRecord, window=None, gen: GeneratorMatrix | None = None) -> DecayFit:
    """Fit the exponential rate of the energy on ``window`` (default last 3/4).

    Energies below 1e-300 are dropped before taking logs.  The abscissa is
    taken from ``gen`` if given, else from ``traj.params``; records without
    parameters (synthetic data) report NaN.
    """
    t = np.asarray(traj.times)
    if window is None:
        window = (t[-1] / 4.0, t[-1])
    lo, hi = float(window[0]), float(window[1])
    if lo < t[0] or hi > t[-1] or lo >= hi:
        raise FitError(f"window {window} not inside trajectory range [{t[0]}, {t[-1]}]")
    E = np.asarray(traj.energies)
    mask = (t >= lo) & (t <= hi) & (E > ENERGY_FLOOR)
    if mask.sum() < 10:
        raise FitError(f"need at least 10 positive-energy samples in window, got {int(mask.sum())}")
    tt, logE = t[mask], np.log(E[mask])
    slope, intercept = np.polyfit(tt, logE, 1)
    pred = slope * tt + intercept
    ss_res = float(np.sum((logE - pred) ** 2))
    ss_tot = float(np.sum((logE - logE.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0.0 else 1.0
    r2 = min(1.0, max(0.0, r2))
    if gen is not None:
        abscissa = gen.spectral_abscissa
    elif traj.params is not None:
        abscissa = assemble_generator(traj.params, traj.N).spectral_abscissa
    else:
        abscissa = float("nan")  # synthetic record, no generator to ask
    return DecayFit(omega=-0.5 * float(slope), rSquared=r2, window=(lo, hi),
                    spectralAbscissa=abscissa, samples=int(mask.sum()))
