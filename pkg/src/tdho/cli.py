"""Scenario runner: ``tdho <command> --config PATH --out DIR``.

Exit codes: 0 all checks pass, 1 a residual exceeds its tolerance,
2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional

import numpy as np

from . import classical, ermakov, gaussian, schrodinger
from .config import COMMANDS, ConfigError, Scenario, load_config, parse_overrides
from .core import ClassicalState, DomainError, IntegrationError, TdhoError, Trajectory

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3

CSV_COLUMNS = {
    "classical": ["t", "q", "qdot", "W1", "W2", "I_eta"],
    "gaussian": ["t", "q", "p", "alpha", "beta", "gamma", "C", "I_alpha", "H_eff", "tau"],
    "pde": ["t", "x1", "p1", "x2", "p2", "d", "C", "norm", "excess_kurtosis"],
    "synchronize": ["t", "tau", "h", "Q", "dQ_dtau"],
}


def _fmt(x) -> str:
    return format(float(x), ".17g")


def write_csv(path: Path, header: list[str], columns: list) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([_fmt(v) for v in row])


def write_json(path: Path, data) -> None:
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


class Report:
    """Named residuals compared against configured tolerances."""

    def __init__(self, scenario: Scenario, command: str):
        self.scenario = scenario
        self.command = command
        self.checks: dict[str, dict] = {}
        self.info: dict[str, float] = {}

    def check(self, name: str, value: float, tol_key: str) -> None:
        tol = self.scenario.tolerances[tol_key]
        ok = bool(math.isfinite(value) and value < tol)
        self.checks[name] = {"value": float(value), "tolerance": tol, "pass": ok}

    @property
    def passed(self) -> bool:
        return all(c["pass"] for c in self.checks.values())

    def as_dict(self) -> dict:
        return {
            "scenario": self.scenario.name,
            "command": self.command,
            "checks": self.checks,
            "info": self.info,
            "passed": self.passed,
        }


# ---------------------------------------------------------------------------
# helpers turning config sections into domain objects
# ---------------------------------------------------------------------------

def _classical_init(sc: Scenario) -> ClassicalState:
    spec = sc.classical
    if spec is None:
        raise ConfigError(f"classical: section required for command {sc.command!r}")
    return ClassicalState(sc.time.t_start, spec.q, spec.qdot)


def _gaussian_init(sc: Scenario) -> gaussian.GaussianState:
    spec = sc.gaussian
    if spec is None:
        raise ConfigError(f"gaussian: section required for command {sc.command!r}")
    return gaussian.GaussianState(sc.time.t_start, spec.q, spec.p, spec.alpha, spec.beta,
                                  spec.gamma, sc.build_params())


def _eta(sc: Scenario, profile, grid, pair=None) -> ermakov.EtaSolution:
    spec = sc.eta
    if spec.a is not None:
        if pair is None:
            pair = classical.fundamental_pair(profile, grid.t_start, grid, sc.solver.rel_tol)
        return ermakov.eta_from_pair(pair, spec.a, spec.b, spec.c)
    return ermakov.solve_eta_ode(profile, spec.Omega, (spec.eta0, spec.etadot0), grid,
                                 sc.solver.rel_tol)


def _rel_drift(x: np.ndarray) -> float:
    scale = abs(x[0]) if x[0] != 0 else float(np.max(np.abs(x))) or 1.0
    return float(np.max(np.abs(x - x[0])) / scale)


def _spatial_grid(sc: Scenario, series) -> schrodinger.SpatialGrid:
    if sc.pde.x_min is not None:
        return schrodinger.SpatialGrid(sc.pde.x_min, sc.pde.dx, sc.pde.n)
    return schrodinger.auto_grid(series, sc.pde.n)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_classical(sc: Scenario, out: Path) -> Report:
    rep = Report(sc, "classical")
    profile, grid, tol = sc.build_profile(), sc.build_grid(), sc.solver.rel_tol
    traj = classical.integrate_oscillator(profile, _classical_init(sc), grid, tol)
    pair = classical.fundamental_pair(profile, grid.t_start, grid, tol)
    p1, p2 = pair.traj1, pair.traj2
    w1 = p1.q * traj.qdot - p1.qdot * traj.q
    w2 = p2.q * traj.qdot - p2.qdot * traj.q
    scale = max(abs(w1[0]) + abs(w2[0]), 1e-300)
    drift = max(np.max(np.abs(w1 - w1[0])), np.max(np.abs(w2 - w2[0]))) / scale
    rep.check("wronskian_charge_drift", drift, "wronskian_drift")
    rep.check("pair_wronskian_drift", float(np.max(np.abs(pair.wronskian_series() - 1))),
              "wronskian_drift")
    header = CSV_COLUMNS["classical"]
    cols = [traj.t, traj.q, traj.qdot, w1, w2]
    if sc.eta is not None:
        eta = _eta(sc, profile, grid, pair)
        inv = ermakov.ermakov_invariant_series(eta, traj)
        rep.check("ermakov_invariant_drift", _rel_drift(inv), "ermakov_drift")
        cols.append(inv)
    else:
        header = header[:-1]
    write_csv(out / "classical.csv", header, cols)
    return rep


def cmd_gaussian(sc: Scenario, out: Path) -> Report:
    rep = Report(sc, "gaussian")
    profile, grid = sc.build_profile(), sc.build_grid()
    series = gaussian.evolve_gaussian(profile, _gaussian_init(sc), grid, sc.solver.rel_tol)
    C = series.casimir()
    I = series.ermakov_invariant()
    m, hb = series.params.m, series.params.hbar
    ident = np.abs(C - (2 * m * m * I + hb * hb / 4)) / np.abs(C)
    tau = gaussian.alpha_clock(series).tau_nodes
    rep.check("casimir_drift", _rel_drift(C), "casimir_drift")
    rep.check("casimir_ermakov_identity", float(np.max(ident)), "casimir_identity")
    write_csv(out / "gaussian.csv", CSV_COLUMNS["gaussian"],
              [series.t, series.q, series.p, series.alpha, series.beta, series.gamma,
               C, I, series.hamiltonian(), tau])
    return rep


def cmd_pde(sc: Scenario, out: Path) -> Report:
    rep = Report(sc, "pde")
    profile, grid, params = sc.build_profile(), sc.build_grid(), sc.build_params()
    init = _gaussian_init(sc)
    series = gaussian.evolve_gaussian(profile, init, grid, sc.solver.rel_tol)
    spatial = _spatial_grid(sc, series)
    psi0 = schrodinger.init_gaussian_wavefunction(init, spatial)
    run = schrodinger.propagate_on_grid(psi0, profile, grid, sc.pde.dt, params,
                                        keep_snapshots=sc.pde.snapshots)
    n_steps = round(grid.span / sc.pde.dt)
    norm_drift = float(np.max(np.abs(run.norms - run.norms[0])))
    rep.check("norm_drift_per_1000_steps", norm_drift / max(1.0, n_steps / 1000),
              "norm_drift_per_1000_steps")
    rep.check("pde_casimir_drift", _rel_drift(run.casimir()), "pde_casimir_drift")
    rep.check("excess_kurtosis", float(np.max(np.abs(run.kurtosis))), "excess_kurtosis")
    rep.info.update({"x_min": spatial.x_min, "dx": spatial.dx, "n": spatial.n,
                     "n_steps": n_steps})
    mo = run.moments
    write_csv(out / "pde.csv", CSV_COLUMNS["pde"],
              [run.t, mo[:, 0], mo[:, 1], mo[:, 2], mo[:, 3], mo[:, 4], run.casimir(),
               run.norms, run.kurtosis])
    if sc.pde.snapshots:
        schrodinger.save_density_csv(out / "density.csv", run.snapshots)
    return rep


def cmd_synchronize(sc: Scenario, out: Path) -> Report:
    rep = Report(sc, "synchronize")
    profile, grid, tol = sc.build_profile(), sc.build_grid(), sc.solver.rel_tol
    if sc.eta is not None:
        eta = _eta(sc, profile, grid)
        traj = classical.integrate_oscillator(profile, _classical_init(sc), grid, tol)
        clock = ermakov.synchronizing_clock(eta)
    else:
        series = gaussian.evolve_gaussian(profile, _gaussian_init(sc), grid, tol)
        eta = series.as_eta()
        traj = Trajectory(series.t, series.q, series.p / series.params.m)
        clock = gaussian.alpha_clock(series)
    synced = ermakov.reparametrize_trajectory(traj, eta, clock)
    A, phi, resid = ermakov.fit_harmonic(synced.t, synced.q, eta.Omega)
    qnorm = float(np.max(np.abs(synced.q)))
    rep.check("harmonic_fit_residual", resid / qnorm, "fit_residual")
    # relative to the size of the transformed-frequency term, which grows like 1/η⁴
    target = lambda tau: np.full_like(tau, eta.Omega**2)  # noqa: E731
    scale = max(1.0, float(np.max(clock.h_nodes)) ** 2 * eta.Omega**2)
    rep.check("frequency_transform_residual",
              ermakov.frequency_transform_residual(profile, clock, target) / scale,
              "frequency_transform")
    rep.info.update({"Omega": eta.Omega, "amplitude": A, "phase": phi,
                     "oscillator_fd_residual": ermakov.oscillator_residual(synced, eta.Omega)})
    write_csv(out / "synchronize.csv", CSV_COLUMNS["synchronize"],
              [traj.t, synced.t, clock.h_nodes, synced.q, synced.qdot])
    return rep


def cmd_invariants(sc: Scenario, out: Path) -> Report:
    rep = Report(sc, "invariants")
    profile, grid, tol = sc.build_profile(), sc.build_grid(), sc.solver.rel_tol
    ran = False
    if sc.classical is not None:
        pair = classical.fundamental_pair(profile, grid.t_start, grid, tol)
        q1, q2 = pair.traj1.q, pair.traj2.q
        sym = max(ermakov.symmetry_residual(profile, grid.times, X)
                  for X in (q1 * q1, q2 * q2, q1 * q2))
        rep.check("symmetry_residual", sym, "symmetry")
        ran = True
    if sc.classical is not None and sc.eta is not None:
        traj = classical.integrate_oscillator(profile, _classical_init(sc), grid, tol)
        eta = _eta(sc, profile, grid)
        rep.check("ermakov_invariant_drift",
                  _rel_drift(ermakov.ermakov_invariant_series(eta, traj)), "ermakov_drift")
        ran = True
    if sc.gaussian is not None:
        init = _gaussian_init(sc)
        series = gaussian.evolve_gaussian(profile, init, grid, tol)
        eta = ermakov.solve_eta_ode(profile, init.params.omega_quantum,
                                    (init.alpha, init.beta / init.params.m), grid, tol)
        rep.check("alpha_equals_eta", float(np.max(np.abs(series.alpha / eta.eta - 1))),
                  "alpha_eta")
        C = series.casimir()
        rep.check("casimir_drift", _rel_drift(C), "casimir_drift")
        ident = max(r / c for c, _, r in map(gaussian.casimir_ermakov_identity, series))
        rep.check("casimir_ermakov_identity", ident, "casimir_identity")
        rep.info["I_alpha"] = float(series.ermakov_invariant()[0])
        ran = True
    if not ran:
        raise ConfigError("invariants needs a gaussian section or classical + eta sections")
    return rep


def cmd_compare(sc: Scenario, out: Path) -> Report:
    rep = Report(sc, "compare")
    profile, grid = sc.build_profile(), sc.build_grid()
    init = _gaussian_init(sc)
    spatial = None
    if sc.pde.x_min is not None:
        spatial = schrodinger.SpatialGrid(sc.pde.x_min, sc.pde.dx, sc.pde.n)
    else:
        dry = gaussian.evolve_gaussian(profile, init, grid, sc.solver.rel_tol)
        spatial = schrodinger.auto_grid(dry, sc.pde.n)
    r = schrodinger.compare_effective_vs_pde(profile, init, grid, spatial, sc.pde.dt,
                                             sc.solver.rel_tol)
    rep.check("max_moment_deviation", r.max_moment_deviation, "moment_deviation")
    rep.check("fidelity_loss", 1.0 - r.min_fidelity, "fidelity_loss")
    rep.check("pde_casimir_drift", r.pde_casimir_drift, "pde_casimir_drift")
    rep.check("gaussian_casimir_drift", r.gaussian_casimir_drift, "casimir_drift")
    rep.check("excess_kurtosis", r.max_excess_kurtosis, "excess_kurtosis")
    rep.info.update(r.to_dict())
    rep.info.update({"x_min": spatial.x_min, "dx": spatial.dx, "n": spatial.n})
    return rep


def cmd_brackets(sc: Scenario, out: Path) -> Report:
    rep = Report(sc, "brackets")
    profile, grid, params = sc.build_profile(), sc.build_grid(), sc.build_params()
    rng = np.random.default_rng(sc.brackets.seed)
    pair = classical.fundamental_pair(profile, grid.t_start, grid, sc.solver.rel_tol)
    m, W = params.m, pair.wronskian
    lam = 2 * W / m
    canon, sl2, alg = [], [], []
    for _ in range(sc.brackets.n_points):
        t = rng.uniform(grid.t_start, grid.t_end)
        x = rng.uniform(-1, 1, size=2)
        w1, w2 = classical.wronskian_functions(pair, t, m)
        canon.append(abs(classical.poisson_bracket_fd(w1, w2, x) - W / m))
        a, b = w1(x), w2(x)
        sl2.append(max(
            abs(classical.poisson_bracket_fd(lambda z: w1(z) * w2(z), lambda z: w1(z) ** 2, x)
                + lam * a * a),
            abs(classical.poisson_bracket_fd(lambda z: w1(z) * w2(z), lambda z: w2(z) ** 2, x)
                - lam * b * b),
            abs(classical.poisson_bracket_fd(lambda z: w1(z) ** 2, lambda z: w2(z) ** 2, x)
                - 2 * lam * a * b),
        ))
        q, p, beta = rng.uniform(-1, 1, size=3)
        alpha = rng.uniform(0.5, 2.0)
        st = gaussian.GaussianState(t, q, p, alpha, beta, 0.0, params)
        alg.append(gaussian.uncertainty_algebra_check(st))
    rep.check("wronskian_bracket", max(canon), "bracket")
    rep.check("sl2_squared_wronskians", max(sl2), "bracket")
    rep.check("uncertainty_algebra", max(alg), "bracket")
    return rep


COMMAND_FUNCS = {
    "classical": cmd_classical,
    "gaussian": cmd_gaussian,
    "pde": cmd_pde,
    "synchronize": cmd_synchronize,
    "invariants": cmd_invariants,
    "compare": cmd_compare,
    "brackets": cmd_brackets,
}


def run_scenario(sc: Scenario, out: Path) -> int:
    """Run one scenario, write its artifacts into ``out`` and return the exit code."""
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "resolved_config.json", sc.resolved())
    try:
        rep = COMMAND_FUNCS[sc.command](sc, out)
    except (ConfigError, DomainError) as exc:
        print(f"[{sc.name}] configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationError, schrodinger.BoundaryContaminationError, TdhoError) as exc:
        print(f"[{sc.name}] numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    write_json(out / "report.json", rep.as_dict())
    for name, c in rep.checks.items():
        status = "PASS" if c["pass"] else "FAIL"
        print(f"[{sc.name}] {status} {name} = {c['value']:.3e} (tol {c['tolerance']:.1e})",
              file=sys.stderr)
    return EXIT_OK if rep.passed else EXIT_CHECK_FAILED


def _run_job(args):
    sc, out = args
    return run_scenario(sc, Path(out))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tdho", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="scenario or batch JSON file")
    ap.add_argument("--out", required=True, help="output directory")
    ap.add_argument("--tolerance-override", action="append", default=[], metavar="KEY=VAL",
                    help="override a named tolerance; repeatable")
    ap.add_argument("--jobs", type=int, default=1, help="scenarios run concurrently in a batch")
    return ap


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        overrides = parse_overrides(args.tolerance_override)
        scenarios = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    # the subcommand fills in scenarios that do not name their own
    scenarios = [s if s.command else s.model_copy(update={"command": args.command})
                 for s in scenarios]
    out = Path(args.out)
    if len(scenarios) == 1:
        jobs = [(scenarios[0], out)]
    else:
        jobs = [(s, out / s.name) for s in scenarios]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            codes = list(pool.map(_run_job, jobs))
    else:
        codes = [_run_job(j) for j in jobs]
    return max(codes)


if __name__ == "__main__":
    sys.exit(main())
