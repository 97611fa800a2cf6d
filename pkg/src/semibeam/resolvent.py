"""
Resolvent of the truncated generator along the imaginary axis.

Norms are taken in the energy metric: with ``G = L L^T`` and the whitened
generator ``M = L^T B L^{-T}``,

    ||(i lam - B)^{-1}||_G = 1 / sigma_min(i lam I - M).
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.sparse.csgraph import connected_components

from .assembly import (
    EnergyGram,
    GeneratorMatrix,
    StateVector,
    _check_state,
    assemble_generator,
    assemble_gram,
    smooth_probes,
    whitened_generator,
)
from .errors import FitError, SingularSystemError, SpectralError
from .params import ModelParameters, Variant
from .spectral import derivative_matrix, eigenvalue, eigenvalues, fractional_power_diag

logger = logging.getLogger(__name__)

__all__ = [
    "ResolventSample",
    "ExponentFit",
    "AuditEntry",
    "AuditReport",
    "resolvent_solve",
    "resolvent_residual",
    "resolvent_norm",
    "whitened_blocks",
    "sweep",
    "fit_exponent",
    "gevrey_target",
    "validity_window",
    "lambda_grid",
    "lemma_audit",
]

CONDITION_LIMIT = 1e14
RESIDUAL_LIMIT = 1e-9


@dataclass(frozen=True)
class ResolventSample:
    lam: float
    normEnergy: float
    residual: float
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None and math.isfinite(self.normEnergy) and self.residual <= RESIDUAL_LIMIT


@dataclass(frozen=True)
class ExponentFit:
    """Slope ``p`` in ``||R(i lam)|| ~ C lam^-p`` over ``window``."""

    window: tuple
    slope: float
    rSquared: float
    target: float
    tolerance: float
    samples: int

    @property
    def passed(self) -> bool:
        return self.slope >= self.target - self.tolerance


def _shifted(gen, lam):
    n = gen.entries.shape[0]
    mat = -gen.entries.astype(complex)
    mat[np.diag_indices(n)] += 1j * lam
    return mat


def resolvent_solve(gen: GeneratorMatrix, lam: float, F: StateVector) -> StateVector:
    """Solve ``(i lam I - B) U = F``.

    Raises SingularSystemError when the 1-norm condition number exceeds
    1e14, i.e. ``i lam`` is numerically an eigenvalue.
    """
    _check_state(F, gen.modes)
    lam = float(lam)
    mat = _shifted(gen, lam)
    lu, piv = sla.lu_factor(mat, check_finite=False)
    (gecon,) = sla.get_lapack_funcs(("gecon",), (lu,))
    rcond, _ = gecon(lu, np.linalg.norm(mat, 1), norm="1")
    if rcond == 0.0 or 1.0 / rcond > CONDITION_LIMIT:
        cond = np.inf if rcond == 0.0 else 1.0 / rcond
        raise SingularSystemError(f"resolvent near-singular at lambda={lam:.17g} (cond={cond:.3g})",
                                  lam=lam, condition=cond)
    sol = sla.lu_solve((lu, piv), F.flat().astype(complex))
    return StateVector.from_flat(sol, gen.modes, F.length)


def resolvent_residual(gen, gram, lam, U: StateVector, F: StateVector) -> float:
    """``||(i lam - B) U - F||_G / ||F||_G`` (0 when F = 0 and U = 0)."""
    r = 1j * lam * U.flat() - gen.entries @ U.flat() - F.flat()
    nr = np.linalg.norm(gram.factor.T @ r)
    nf = gram.norm(F)
    if nf == 0.0:
        return float(nr)
    return float(nr / nf)


def whitened_blocks(gen: GeneratorMatrix, gram: EnergyGram) -> list:
    """Diagonal blocks of the whitened generator over its uncoupled index classes.

    The derivative matrix only links modes of opposite parity, so the
    coupling graph of ``B`` and ``G`` splits into independent classes.  The
    Cholesky factor inherits the split, hence so does ``M``; its singular
    values are the union of those of the blocks, and each block is half the
    size (a quarter of the SVD cost).
    """
    pattern = (gen.entries != 0.0) | (gen.entries.T != 0.0) | (gram.entries != 0.0)
    count, labels = connected_components(pattern, directed=False)
    M = whitened_generator(gen, gram)
    blocks = []
    for k in range(count):
        idx = np.flatnonzero(labels == k)
        blocks.append(np.ascontiguousarray(M[np.ix_(idx, idx)]))
    return blocks


def resolvent_norm(gen: GeneratorMatrix, gram: EnergyGram, lam: float, whitened=None) -> float:
    """Energy-metric operator norm of ``(i lam I - B)^{-1}``.

    Computed as ``1 / sigma_min`` by dense SVD of each block returned by
    ``whitened_blocks`` (pass that list as ``whitened`` to reuse it).  A
    plain whitened matrix is accepted too.
    """
    if whitened is None:
        whitened = whitened_blocks(gen, gram)
    elif isinstance(whitened, np.ndarray):
        whitened = [whitened]
    smin = math.inf
    for M in whitened:
        mat = -M.astype(complex)
        mat[np.diag_indices(M.shape[0])] += 1j * float(lam)
        smin = min(smin, float(sla.svdvals(mat, check_finite=False)[-1]))
    if smin == 0.0:
        return math.inf
    return float(1.0 / smin)


def validity_window(N, l=math.pi, lam_min=1.0):
    """Default fitting band ``[lam_min, mu_{floor(N/2)}]``."""
    return (float(lam_min), eigenvalue(max(1, N // 2), l))


def lambda_grid(lo, hi, count, log=True):
    if count < 1:
        raise ValueError("grid needs at least one point")
    if count == 1:
        return np.array([float(lo)])
    if log:
        if lo <= 0.0:
            raise ValueError("log-spaced grid needs a positive lower bound")
        return np.geomspace(lo, hi, count)
    return np.linspace(lo, hi, count)


def sweep(gen, gram, lambdas, probes=2, seed=0, workers=1):
    """One ResolventSample per frequency, ordered by frequency.

    ``probes`` random right-hand sides per frequency measure the solve
    residual.  Failures are recorded on the sample; the sweep continues.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    M = whitened_blocks(gen, gram)
    probe_states = smooth_probes(seed, max(0, probes), gen.modes, gen.params.l, decay=0.0,
                                 h1_theta=gen.variant is Variant.SYSTEM01, complex_=True)

    def one(lam):
        try:
            nrm = resolvent_norm(gen, gram, lam, whitened=M)
            res = 0.0
            for F in probe_states:
                U = resolvent_solve(gen, lam, F)
                res = max(res, resolvent_residual(gen, gram, lam, U, F))
            return ResolventSample(float(lam), nrm, res)
        except (SingularSystemError, np.linalg.LinAlgError) as exc:
            logger.warning("sample lambda=%g failed: %s", lam, exc)
            return ResolventSample(float(lam), math.nan, math.nan, str(exc))

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            samples = list(pool.map(one, lambdas))
    else:
        samples = [one(x) for x in lambdas]
    return sorted(samples, key=lambda s: s.lam)


def fit_exponent(samples, window, target, tolerance=0.15) -> ExponentFit:
    """Least-squares slope of ``-log ||R||`` against ``log lam`` inside ``window``."""
    lo, hi = float(window[0]), float(window[1])
    pts = [(s.lam, s.normEnergy) for s in samples
           if lo <= s.lam <= hi and s.error is None and math.isfinite(s.normEnergy) and s.normEnergy > 0]
    if len(pts) < 8:
        raise FitError(f"need at least 8 samples inside window [{lo}, {hi}], got {len(pts)}")
    x = np.log([p[0] for p in pts])
    y = -np.log([p[1] for p in pts])
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum((y - pred) ** 2)) / ss_tot if ss_tot > 0.0 else 1.0
    return ExponentFit((lo, hi), float(slope), max(0.0, min(1.0, r2)), float(target),
                       float(tolerance), len(pts))


def gevrey_target(exponents) -> float:
    """Resolvent decay exponent ``2 phi / (1 + phi)`` with ``phi = min(exponents)``."""
    exps = [float(e) for e in exponents]
    if len(exps) != 3 or any(not (0.0 <= e <= 1.0) for e in exps):
        raise SpectralError(f"exponents must be a triple in [0, 1], got {exponents!r}")
    phi = min(exps)
    return 2.0 * phi / (1.0 + phi)


# --------------------------------------------------------------------------
# lemma audits

@dataclass
class AuditEntry:
    name: str
    description: str
    applicable: bool
    max_ratio: float = 0.0
    argmax_lambda: float = math.nan
    flagged: bool = False


@dataclass
class AuditReport:
    variant: Variant
    modes: int
    exponents: tuple
    ceiling: float
    entries: dict = field(default_factory=dict)
    max_residual: float = 0.0

    @property
    def flagged(self):
        return [e.name for e in self.entries.values() if e.applicable and e.flagged]

    @property
    def all_finite(self):
        return all(math.isfinite(e.max_ratio) for e in self.entries.values() if e.applicable)

    def ratios(self):
        return {k: e.max_ratio for k, e in self.entries.items() if e.applicable}


class _Norms:
    """Squared field norms of a (complex) state needed by the audits."""

    def __init__(self, params, U: StateVector):
        N = U.modes
        l = params.l
        self.mu = eigenvalues(N, l)
        self.D = derivative_matrix(N, l)
        self.U = U

    def sq(self, name, power=0.0):
        c = getattr(self.U, name)
        if power == 0.0:
            return float(np.sum(np.abs(c) ** 2))
        return float(np.sum(self.mu ** (2 * power) * np.abs(c) ** 2))

    def shear_sq(self, disp, rot):
        """``||disp_x - rot||^2`` exactly."""
        a = getattr(self.U, disp)
        b = getattr(self.U, rot)
        cross = np.vdot(b, self.D @ a).real
        return float(np.sum(self.mu * np.abs(a) ** 2) - 2.0 * cross + np.sum(np.abs(b) ** 2))

    def diff_sq(self, a, b):
        return float(np.sum(np.abs(getattr(self.U, a) - getattr(self.U, b)) ** 2))


def _audit_items(params):
    """(name, description, hypothesis, lhs(norms, lam, params)) tuples."""
    e1, e2, e3 = params.exponents
    p = params
    if p.variant is Variant.SYSTEM01:
        return [
            ("dissipation", "dissipation bound", True,
             lambda n, lam: -_diss(p, n)),
            ("rotation_velocity", "||v||^2", True, lambda n, lam: n.sq("v")),
            ("wall_gap", "|lam| ||y - varphi||^2", True,
             lambda n, lam: abs(lam) * n.diff_sq("y", "varphi")),
            ("inner_potential", "k1||varphi_x-psi||^2 + b1||A^1/2 psi||^2", True,
             lambda n, lam: p.kappa1 * n.shear_sq("varphi", "psi") + p.b1 * n.sq("psi", 0.5)),
            ("outer_potential", "k2||y_x-z||^2 + b2||A^1/2 z||^2", True,
             lambda n, lam: p.kappa2 * n.shear_sq("y", "z") + p.b2 * n.sq("z", 0.5)),
        ]
    analytic = min(e1, e2, e3) >= 0.5
    return [
        ("dissipation", "dissipation bound", True, lambda n, lam: -_diss(p, n)),
        ("rotation_velocity", "||v||^2", True, lambda n, lam: n.sq("v")),
        ("wall_gap", "|lam| ||y - varphi||^2", True,
         lambda n, lam: abs(lam) * n.diff_sq("y", "varphi")),
        ("inner_potential", "k1||varphi_x-psi||^2 + b1||A^1/2 psi||^2", True,
         lambda n, lam: p.kappa1 * n.shear_sq("varphi", "psi") + p.b1 * n.sq("psi", 0.5)),
        ("outer_potential", "k2||y_x-z||^2 + b2||A^1/2 z||^2", True,
         lambda n, lam: p.kappa2 * n.shear_sq("y", "z") + p.b2 * n.sq("z", 0.5)),
        ("rotation_velocity_h1", "||A^1/2 v||^2", True, lambda n, lam: n.sq("v", 0.5)),
        ("heat_scaled", "|lam| ||theta||^2", True, lambda n, lam: abs(lam) * n.sq("theta")),
        ("inner_velocity_scaled", "|lam| ||u||^2 (beta1 >= 1/2)", e1 >= 0.5,
         lambda n, lam: abs(lam) * n.sq("u")),
        ("outer_velocity_scaled", "|lam| ||s||^2 (beta2 >= 1/2)", e2 >= 0.5,
         lambda n, lam: abs(lam) * n.sq("s")),
        ("inner_shear_scaled", "|lam| ||varphi_x - psi||^2 (beta1 >= 1/2)", e1 >= 0.5,
         lambda n, lam: abs(lam) * n.shear_sq("varphi", "psi")),
        ("outer_shear_scaled", "|lam| ||y_x - z||^2 (beta2 >= 1/2)", e2 >= 0.5,
         lambda n, lam: abs(lam) * n.shear_sq("y", "z")),
        ("rotation_velocity_scaled", "|lam| ||v||^2", True, lambda n, lam: abs(lam) * n.sq("v")),
        ("rotation_scaled", "|lam| ||A^1/2 psi||^2", True, lambda n, lam: abs(lam) * n.sq("psi", 0.5)),
        ("outer_rotation_velocity_scaled", "|lam| ||w||^2 (beta2, beta3 >= 1/2)", e2 >= 0.5 and e3 >= 0.5,
         lambda n, lam: abs(lam) * n.sq("w")),
        ("outer_rotation_scaled", "|lam| ||A^1/2 z||^2 (beta2, beta3 >= 1/2)", e2 >= 0.5 and e3 >= 0.5,
         lambda n, lam: abs(lam) * n.sq("z", 0.5)),
        ("analyticity", "|lam| ||U||^2 (all beta >= 1/2)", analytic, None),
    ]


def _diss(p, n):
    e1, e2, e3 = p.exponents
    out = -(p.gamma1 * n.sq("u", e1 / 2) + p.gamma2 * n.sq("s", e2 / 2) + p.gamma3 * n.sq("w", e3 / 2))
    if p.variant is Variant.SYSTEM01:
        out -= p.delta * p.K / p.betaThermal * n.sq("theta", 1.0)
    else:
        out -= p.K * n.sq("theta", 0.5)
    return out


def lemma_audit(params: ModelParameters, N: int, lambdas, trials=20, seed=0,
                ceiling=math.inf, probes=None) -> AuditReport:
    """Largest ratio ``LHS / (||F||_G ||U||_G)`` of each resolvent estimate.

    Probes are smooth random right-hand sides drawn mode by mode (see
    ``StateVector.random_smooth``), so runs at different N share their low
    modes.  Items whose exponent hypotheses fail are reported as not
    applicable and are not evaluated.
    """
    gen = assemble_generator(params, N)
    gram = assemble_gram(params, N)
    if probes is None:
        probes = smooth_probes(seed, trials, N, params.l,
                               h1_theta=params.variant is Variant.SYSTEM01, complex_=True)
    items = _audit_items(params)
    report = AuditReport(params.variant, N, params.exponents, float(ceiling))
    for name, desc, ok, _ in items:
        report.entries[name] = AuditEntry(name, desc, bool(ok))

    for lam in np.asarray(lambdas, dtype=float):
        for F in probes:
            nF = gram.norm(F)
            if nF == 0.0:
                continue
            U = resolvent_solve(gen, lam, F)
            report.max_residual = max(report.max_residual, resolvent_residual(gen, gram, lam, U, F))
            nU = gram.norm(U)
            norms = _Norms(params, U)
            for name, _, ok, lhs in items:
                if not ok:
                    continue
                if lhs is None:
                    value = abs(lam) * nU**2
                else:
                    value = lhs(norms, lam)
                ratio = value / (nF * nU) if nU > 0.0 else 0.0
                entry = report.entries[name]
                if not math.isfinite(ratio) or ratio > entry.max_ratio:
                    entry.max_ratio = ratio
                    entry.argmax_lambda = float(lam)
    for e in report.entries.values():
        e.flagged = e.applicable and (not math.isfinite(e.max_ratio) or e.max_ratio > ceiling)
    return report
