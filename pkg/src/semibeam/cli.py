"""Command-line entry point.

    semibeam <command> --config <path> [--modes N] [--seed S] [--workers W] [--out PREFIX]

Commands: check, simulate, spectrum, resolvent, gevrey, audit, sweep.  Each
run writes ``PREFIX.<table>.csv`` files plus ``PREFIX.manifest.json``.  The
prefix defaults to ``$SEMIBEAM_OUTPUT_DIR/semibeam-<command>`` (current
directory when the variable is unset).

Exit status: 0 when every assertion holds, 2 when one fails (listed on
stderr), 1 for usage, configuration or I/O errors.
"""

from __future__ import annotations

import argparse
import itertools
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .assembly import StateVector, assemble_generator, assemble_gram, dissipation_rate
from .config import ExperimentConfig, parse_config
from .dynamics import default_initial_state, fit_decay_rate, propagate_exact
from .errors import ConfigError, FitError, ParameterError, SemibeamError
from .output import RunManifest, emit_csv
from .params import Variant
from .resolvent import RESIDUAL_LIMIT, fit_exponent, gevrey_target, lambda_grid, lemma_audit, sweep
from .spectral import derivative_matrix, eigenvalue

logger = logging.getLogger("semibeam")

COMMANDS = ("check", "simulate", "spectrum", "resolvent", "gevrey", "audit", "sweep")
OUTPUT_DIR_ENV = "SEMIBEAM_OUTPUT_DIR"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_ASSERTION = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for failed assertions here
    def error(self, message):
        raise UsageError(message)


@dataclass
class Outcome:
    tables: list = field(default_factory=list)  # (suffix, columns, records)
    results: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    def table(self, suffix, columns, records):
        self.tables.append((suffix, list(columns), records))

    def require(self, condition, message):
        if not condition:
            self.failures.append(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="semibeam",
                description="Spectral Galerkin experiments on two thermoelastic "
                            "double-wall nanotube Timoshenko systems.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, metavar="PATH",
                   help="TOML experiment file, or a run manifest to repeat")
    p.add_argument("--modes", type=int, metavar="N", help="override the mode count")
    p.add_argument("--seed", type=int, metavar="S", help="override the random seed")
    p.add_argument("--workers", type=int, default=1, metavar="W",
                   help="worker threads for frequency and parameter sweeps")
    p.add_argument("--out", metavar="PREFIX", help="output path prefix")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


# --------------------------------------------------------------------------
# commands

def _model(cfg):
    return cfg.model, cfg.modes


def run_check(cfg: ExperimentConfig, workers: int) -> Outcome:
    p, N = _model(cfg)
    out = Outcome()
    gen = assemble_generator(p, N)
    gram = assemble_gram(p, N)
    rng = np.random.default_rng(cfg.seed)
    tol = cfg.check.tolerance
    rows, worst = [], 0.0
    for k in range(cfg.check.states):
        U = StateVector.random_smooth(rng, N, p.l, decay=1.0)
        nsq = gram.norm_sq(U)
        lhs = gram.inner(gen.apply(U), U).real
        rate = dissipation_rate(p, U)
        resid = abs(lhs - rate)
        bound = tol * (1.0 + nsq)
        worst = max(worst, resid / bound)
        rows.append((k, nsq, lhs, rate, resid, bound))
    out.table("check", ("trial", "norm_sq", "re_inner", "dissipation", "residual", "bound"), rows)
    D = derivative_matrix(N, p.l)
    G = gram.entries
    out.results.update(
        states=cfg.check.states,
        worst_residual_over_bound=worst,
        derivative_antisymmetry=float(np.max(np.abs(D + D.T))),
        gram_asymmetry=float(np.max(np.abs(G - G.T))),
        gram_min_eigenvalue=float(np.linalg.eigvalsh(G)[0]),
    )
    out.require(worst <= 1.0, f"dissipativity residual exceeds {tol:g}*(1+|U|^2) "
                              f"(worst ratio {worst:.3g})")
    out.require(out.results["gram_min_eigenvalue"] > 0.0, "energy Gram matrix is not positive definite")
    return out


def run_simulate(cfg: ExperimentConfig, workers: int) -> Outcome:
    p, N = _model(cfg)
    sim = cfg.simulate
    out = Outcome()
    gen = assemble_generator(p, N)
    gram = assemble_gram(p, N)
    if sim.initial == "default":
        U0 = default_initial_state(N, p.l)
    else:
        U0 = StateVector.random_smooth(np.random.default_rng(cfg.seed), N, p.l, decay=sim.initial_decay)
    times = np.linspace(0.0, sim.t_end, sim.samples)
    traj = propagate_exact(gen, gram, U0, times, fallback_dt=sim.fallback_dt)
    out.table("simulate", ("t", "energy", "dissipation"),
              zip(traj.times, traj.energies, traj.dissipations))
    E = traj.energies
    increase = np.diff(E) - 1e-9 * E[:-1]
    out.results.update(method=traj.method, energy_initial=float(E[0]), energy_final=float(E[-1]),
                       max_energy_increase=float(max(0.0, np.max(np.diff(E), initial=0.0))))
    out.require(not np.any(increase > 0.0), "energy increases along the trajectory")
    if p.is_diagnostic:
        out.results["fit"] = "skipped (diagnostic parameters)"
        return out
    fit = fit_decay_rate(traj, sim.window, gen=gen)
    out.results.update(omega=fit.omega, r_squared=fit.rSquared, window=list(fit.window),
                       spectral_abscissa=fit.spectralAbscissa, relative_gap=fit.relative_gap,
                       gap_tolerance=sim.gap_tolerance)
    out.require(fit.spectralAbscissa < 0.0, f"spectral abscissa {fit.spectralAbscissa:.3g} is not negative")
    out.require(fit.relative_gap <= sim.gap_tolerance,
                f"fitted rate {fit.omega:.6g} differs from -abscissa {-fit.spectralAbscissa:.6g} "
                f"by {100 * fit.relative_gap:.1f}% (> {100 * sim.gap_tolerance:.0f}%)")
    return out


def run_spectrum(cfg: ExperimentConfig, workers: int) -> Outcome:
    p, N = _model(cfg)
    out = Outcome()
    gen = assemble_generator(p, N)
    ev = gen.eigenvalues
    order = np.lexsort((ev.imag, -ev.real))
    ev = ev[order]
    out.table("spectrum", ("re", "im"), zip(ev.real, ev.imag))
    a = gen.spectral_abscissa
    out.results.update(spectral_abscissa=a, eigenvalues=int(ev.size),
                       abscissa_limit=cfg.spectrum.abscissa_limit)
    if not p.is_diagnostic:
        out.require(a < cfg.spectrum.abscissa_limit,
                    f"spectral abscissa {a:.6g} not below {cfg.spectrum.abscissa_limit:g}")
    return out


def _samples_table(out, samples):
    out.table("resolvent", ("lambda", "norm", "residual"),
              [(s.lam, s.normEnergy, s.residual) for s in samples])
    bad = [s for s in samples if not s.ok]
    for s in bad[:5]:
        out.failures.append(f"resolvent sample at lambda={s.lam:g} failed: "
                            f"{s.error or f'residual {s.residual:.3g} > {RESIDUAL_LIMIT:g}'}")
    if len(bad) > 5:
        out.failures.append(f"... and {len(bad) - 5} more failed samples")


def run_resolvent(cfg: ExperimentConfig, workers: int) -> Outcome:
    p, N = _model(cfg)
    block = cfg.resolvent
    out = Outcome()
    lo, hi = block.lam.resolve(N, p.l, 0.1, eigenvalue(N // 2, p.l))
    gen, gram = assemble_generator(p, N), assemble_gram(p, N)
    samples = sweep(gen, gram, lambda_grid(lo, hi, block.lam.count, block.lam.log),
                    probes=block.probes, seed=cfg.seed, workers=workers)
    _samples_table(out, samples)
    norms = [s.normEnergy for s in samples if s.ok]
    if norms:
        k = int(np.argmax(norms))
        out.results.update(sup_norm=norms[k], argmax_lambda=[s.lam for s in samples if s.ok][k])
    out.results.update(window=[lo, hi], samples=len(samples),
                       max_residual=max((s.residual for s in samples), default=0.0))
    return out


def _required_slopes(params):
    """(label, target) pairs that must hold; empty for exploratory runs."""
    if params.variant is Variant.SYSTEM01:
        return []
    phi = params.phi
    checks = []
    if phi >= 0.5:
        checks.append(("analyticity", 1.0))
    if phi < 1.0:
        checks.append(("gevrey", gevrey_target(params.exponents)))
    return checks


def run_gevrey(cfg: ExperimentConfig, workers: int) -> Outcome:
    p, N = _model(cfg)
    block = cfg.gevrey
    out = Outcome()
    lo, hi = block.lam.resolve(N, p.l, 10.0, eigenvalue(max(1, N // 4), p.l))
    gen, gram = assemble_generator(p, N), assemble_gram(p, N)
    samples = sweep(gen, gram, lambda_grid(lo, hi, block.lam.count, block.lam.log),
                    probes=1, seed=cfg.seed, workers=workers)
    _samples_table(out, samples)
    target = gevrey_target(p.exponents)
    fit = fit_exponent(samples, (lo, hi), target, block.tolerance)
    out.results.update(window=[lo, hi], slope=fit.slope, r_squared=fit.rSquared,
                       gevrey_target=target, tolerance=block.tolerance, samples=fit.samples)
    checks = _required_slopes(p)
    if not checks:
        out.results["status"] = "exploratory (no pass/fail for this variant)"
    for label, t in checks:
        ok = fit.slope >= t - block.tolerance
        out.results[f"{label}_target"] = t
        out.results[f"{label}_pass"] = ok
        out.require(ok, f"{label}: slope {fit.slope:.4f} below target {t:.4f} - {block.tolerance:g}")
    return out


def run_audit(cfg: ExperimentConfig, workers: int) -> Outcome:
    p, N = _model(cfg)
    block = cfg.audit
    out = Outcome()
    lo, hi = block.lam.resolve(N, p.l, 1.0, eigenvalue(N // 2, p.l))
    lams = lambda_grid(lo, hi, block.lam.count, block.lam.log)
    rep = lemma_audit(p, N, lams, trials=block.trials, seed=cfg.seed, ceiling=block.ceiling)
    out.table("audit", ("item", "description", "applicable", "max_ratio", "argmax_lambda", "flagged"),
              [(e.name, e.description, e.applicable, e.max_ratio if e.applicable else math.nan,
                e.argmax_lambda, e.flagged) for e in rep.entries.values()])
    out.results.update(window=[lo, hi], trials=block.trials, ceiling=block.ceiling,
                       max_residual=rep.max_residual, ratios=rep.ratios())
    out.require(rep.all_finite, "non-finite audit ratio")
    out.require(not rep.flagged, f"ratios above ceiling {block.ceiling:g}: {', '.join(rep.flagged)}")
    out.require(rep.max_residual <= RESIDUAL_LIMIT,
                f"resolvent residual {rep.max_residual:.3g} exceeds {RESIDUAL_LIMIT:g}")
    return out


def _sweep_triples(block):
    if block.triples is not None:
        return list(block.triples)
    lo = 0.0 if block.region == "unit" else 0.5
    axis = np.linspace(lo, 1.0, block.points) if block.points > 1 else np.array([1.0])
    return [tuple(float(x) for x in t) for t in itertools.product(axis, repeat=3)]


def run_sweep(cfg: ExperimentConfig, workers: int) -> Outcome:
    base, N = _model(cfg)
    block = cfg.sweep
    out = Outcome()
    lo, hi = block.lam.resolve(N, base.l, 10.0, eigenvalue(max(1, N // 4), base.l))
    lams = lambda_grid(lo, hi, block.lam.count, block.lam.log)

    def one(trip):
        p = base.replace(exponents=trip)
        gen, gram = assemble_generator(p, N), assemble_gram(p, N)
        samples = sweep(gen, gram, lams, probes=0, seed=cfg.seed)
        fit = fit_exponent(samples, (lo, hi), gevrey_target(trip), block.tolerance)
        sup = max((s.normEnergy for s in samples if s.ok), default=math.nan)
        checks = _required_slopes(p)
        required = max((t for _, t in checks), default=math.nan)
        stable = gen.spectral_abscissa < 0.0
        if checks:
            status = "pass" if stable and fit.slope >= required - block.tolerance else "fail"
        else:
            status = "exploratory" if stable else "fail"
        return (*trip, gen.spectral_abscissa, sup, fit.slope, fit.rSquared,
                fit.target, required, status)

    triples = _sweep_triples(block)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one, triples))
    else:
        rows = [one(t) for t in triples]
    out.table("sweep", ("e1", "e2", "e3", "abscissa", "sup_norm", "slope", "r_squared",
                        "gevrey_target", "required_slope", "status"), rows)
    failed = [r for r in rows if r[-1] == "fail"]
    out.results.update(window=[lo, hi], triples=len(rows), failed=len(failed))
    for r in failed:
        out.failures.append(f"exponents ({r[0]:g}, {r[1]:g}, {r[2]:g}): abscissa {r[3]:.3g}, "
                            f"slope {r[5]:.3f} vs required {r[8]:.3f}")
    return out


RUNNERS = {
    "check": run_check,
    "simulate": run_simulate,
    "spectrum": run_spectrum,
    "resolvent": run_resolvent,
    "gevrey": run_gevrey,
    "audit": run_audit,
    "sweep": run_sweep,
}


# --------------------------------------------------------------------------

def derived_quantities(cfg: ExperimentConfig) -> dict:
    p, N = cfg.model, cfg.modes
    return {
        "mu1": eigenvalue(1, p.l),
        "validity_window": [1.0, eigenvalue(max(1, N // 2), p.l)],
        "phi": p.phi,
        "gevrey_target": gevrey_target(p.exponents),
        "diagnostic": p.is_diagnostic,
    }


def output_prefix(command, cli_out, cfg) -> Path:
    if cli_out:
        return Path(cli_out)
    if cfg.output:
        return Path(cfg.output)
    return Path(os.environ.get(OUTPUT_DIR_ENV) or ".") / f"semibeam-{command}"


def execute(command, cfg: ExperimentConfig, prefix, workers=1):
    """Run one command and write its outputs; returns ``(manifest, failures)``."""
    prefix = Path(prefix)
    manifest = RunManifest(command=command, config=cfg.to_dict(), version=__version__,
                           derived=derived_quantities(cfg), started=RunManifest.now())
    outcome = RUNNERS[command](cfg, workers)
    for suffix, columns, records in outcome.tables:
        path = emit_csv(records, prefix.parent / f"{prefix.name}.{suffix}.csv", columns)
        manifest.add_output(path)
    manifest.results = outcome.results
    manifest.status = "failed" if outcome.failures else "ok"
    if outcome.failures:
        manifest.results["failures"] = list(outcome.failures)
    manifest.finished = RunManifest.now()
    manifest.write(prefix.parent / f"{prefix.name}.manifest.json")
    return manifest, outcome.failures


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.workers < 1:
            raise UsageError("--workers must be at least 1")
        if args.modes is not None and args.modes < 1:
            raise UsageError("--modes must be at least 1")
        if args.seed is not None and args.seed < 0:
            raise UsageError("--seed must be nonnegative")
        cfg = parse_config(args.config)
        if args.modes is not None:
            cfg = cfg.replace(modes=args.modes)
        if args.seed is not None:
            cfg = cfg.replace(seed=args.seed)
        prefix = output_prefix(args.command, args.out, cfg)
        manifest, failures = execute(args.command, cfg, prefix, args.workers)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"semibeam: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, ParameterError, FitError) as exc:
        print(f"semibeam: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"semibeam: I/O error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SemibeamError as exc:
        print(f"semibeam: ASSERTION FAILED: {exc}", file=sys.stderr)
        return EXIT_ASSERTION

    for key, value in manifest.results.items():
        if key != "failures" and not isinstance(value, dict):
            print(f"{key}: {value}")
    print(f"manifest: {prefix.parent / (prefix.name + '.manifest.json')}")
    if failures:
        for msg in failures:
            print(f"ASSERTION FAILED: {msg}", file=sys.stderr)
        return EXIT_ASSERTION
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
