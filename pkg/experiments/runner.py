"""
Command implementations behind ``coupleman``. Each takes a validated config
record and returns a RunReport; writing and archiving is left to main.py.
"""

import logging
import math
import time
from typing import Any, Dict, List

import numpy as np
from scipy.stats import norm

from caratheodory.estimator import caratheodory_ball, chn_poincare_distance, stochastic_caratheodory
from caratheodory.holomorphic import CoordinateSliceCHn, moebius_family
from comparison.bounds import (comparison_drift, coupling_failure_bound, eta_drift, exit_event_bound,
                               gradient_bound, schwarz_bound)
from comparison.functions import kahler_index_bound, laplacian_bound, quaternionic_index_bound, ricci_reduction_sweep
from comparison.radial import absorption_probability, constant_drift_diffusion, wang_bound
from coupling.estimators import (estimate_absorption_survival, estimate_exit_event, estimate_survival,
                                 wilson_interval)
from coupling.simulator import default_eps
from coupling.strategies import CouplingKind, CouplingStrategy
from geometry.complex_ball import real_to_complex
from geometry.model_spaces import CurvatureProfile
from sde.engine import StepPlan
from sde.specs import spec_for

from .config_schema import (BoundsConfig, CaratheodoryConfig, SimulateConfig, VerifyConfig, WilsonConfig,
                            as_dict)
from .reporting import BOUNDS_COLUMNS, SURVIVAL_COLUMNS, CheckRecord, RunReport, Verdict
from .suites import run_suite

logger = logging.getLogger("experiment_cli")

WILSON_COLUMNS = ("k", "n", "z", "p_hat", "wilson_lo", "wilson_hi")


def _profile(record) -> CurvatureProfile:
    return CurvatureProfile(record.family, record.n, record.k1, record.k2, record.m)


def _bound_row(quantity: str, profile: CurvatureProfile, r, value: float) -> Dict[str, Any]:
    return {"quantity": quantity, "n": profile.n, "k1": profile.k1, "k2": profile.k2, "m": profile.m,
            "r": r, "value": float(value)}


def cmd_bounds(cfg: BoundsConfig, seed: int, threads: int = 1) -> RunReport:
    """Every closed-form bound over the configured profiles and distances."""
    rows: List[Dict[str, Any]] = []
    checks: List[CheckRecord] = []
    for record in cfg.profiles:
        profile = _profile(record)
        # signs are checked before any row is produced
        profile.require_negative()
        family = profile.family.value
        b = comparison_drift(profile)
        rows.append(_bound_row(f"comparison_drift_{family}", profile, None, b))
        rows.append(_bound_row("gradient", profile, cfg.sup_norm, gradient_bound(profile, cfg.sup_norm)))
        index_bound = kahler_index_bound if profile.is_kahler else quaternionic_index_bound
        for rho in cfg.rhos:
            rows.append(_bound_row("coupling_failure", profile, rho, coupling_failure_bound(profile, rho).value))
            if profile.is_kahler and profile.m == 0:
                rows.append(_bound_row("schwarz", profile, rho, schwarz_bound(profile, rho).value))
            if cfg.exit_constant is not None:
                value = exit_event_bound(profile, rho, cfg.delta, cfg.exit_constant).value
                rows.append(_bound_row(f"exit_event(delta={cfg.delta:g})", profile, rho, value))
            rows.append(_bound_row(f"index_{family}", profile, rho, float(index_bound(profile, rho))))
            if rho > 0:
                rows.append(_bound_row(f"laplacian_{family}", profile, rho, float(laplacian_bound(profile, rho))))
                rows.append(_bound_row("eta_drift", profile, rho, float(eta_drift(profile, rho))))
            for t in cfg.wang_times:
                # the distance comparison process has a = sigma2 / 2 = 1
                rows.append(_bound_row(f"wang_survival(t={t:g})", profile, rho, wang_bound(1.0, b, rho, t)))
    if cfg.ricci_sweep:
        records = ricci_reduction_sweep()
        for rec in records:
            rows.append({"quantity": "ricci_reduction_slack", "n": rec.n, "k1": rec.k1, "k2": rec.k2, "m": None,
                         "r": rec.r, "value": rec.slack})
        held = sum(rec.holds for rec in records)
        checks.append(CheckRecord("Ricci reduction sweep", "concavity of k -> G(k, r)", float(held),
                                  bound=float(len(records)), verdict=Verdict.REPORT_ONLY,
                                  note=f"{held} of {len(records)} grid points hold"))
    logger.info(f"Evaluated {len(rows)} bound rows for {len(cfg.profiles)} profiles")
    return RunReport("bounds", as_dict(cfg), seed, checks, BOUNDS_COLUMNS, rows)


def _survival_rows(t_grid, estimates) -> List[Dict[str, Any]]:
    return [
        {"t": float(t), "n": e.n, "k": e.k, "p_hat": e.point, "wilson_lo": e.lo, "wilson_hi": e.hi}
        for t, e in zip(t_grid, estimates)
    ]


def _monotone_check(estimates) -> CheckRecord:
    points = np.array([e.point for e in estimates])
    increases = int(np.sum(np.diff(points) > 0))
    return CheckRecord.judged("survival curve nonincreasing", "survival of the coupling time", float(increases),
                              increases == 0, bound=0.0)


def cmd_simulate(cfg: SimulateConfig, seed: int, threads: int = 1) -> RunReport:
    checks: List[CheckRecord] = []
    plan = StepPlan(cfg.step, cfg.t_max)
    if cfg.estimate == "absorption":
        process = constant_drift_diffusion(cfg.b, cfg.sigma2, cfg.r0)
        curve = estimate_absorption_survival(process, plan, cfg.t_grid, cfg.n_paths, seed, threads)
        rows = _survival_rows(cfg.t_grid, curve.estimates)
        final = curve.estimates[-1]
        checks.append(CheckRecord("survival against the t = inf oracle", "absorption probability",
                                  final.point, final.interval,
                                  1.0 - absorption_probability(cfg.b, cfg.sigma2, cfg.r0)))
        checks.append(_monotone_check(curve.estimates))
        return RunReport("simulate", as_dict(cfg), seed, checks, SURVIVAL_COLUMNS, rows)

    spec = spec_for(cfg.space)
    strategy = CouplingStrategy.for_spec(cfg.strategy, spec)
    eps = cfg.eps_couple or default_eps(spec)
    if cfg.estimate == "exit_event":
        center = cfg.center if cfg.center is not None else cfg.x0
        estimate = estimate_exit_event(spec, strategy, cfg.x0, cfg.y0, center, cfg.delta, plan, eps,
                                       cfg.n_paths, seed, threads)
        rows = _survival_rows([cfg.t_max], [estimate])
        rho = float(spec.distance(np.atleast_2d(cfg.x0), np.atleast_2d(cfg.y0))[0])
        if rho > 0:
            fitted = estimate.point / ((1.0 / cfg.delta + 1.0) * rho)
            checks.append(CheckRecord("fitted exit-event constant", "exit-event bound", fitted,
                                      note=f"P = c (1/delta + 1) rho with rho = {rho:.6g}"))
        return RunReport("simulate", as_dict(cfg), seed, checks, SURVIVAL_COLUMNS, rows)

    curve = estimate_survival(spec, strategy, cfg.x0, cfg.y0, plan, eps, cfg.t_grid, cfg.n_paths, seed, threads)
    rows = _survival_rows(cfg.t_grid, curve.estimates)
    checks.append(_monotone_check(curve.estimates))
    if spec.chart == "euclidean" and strategy.kind is CouplingKind.MIRROR:
        # reflection coupling in R^d: |X - Y| is |x - y| + 2 W_t stopped at 0
        gap = float(np.linalg.norm(np.subtract(cfg.x0, cfg.y0)))
        for t, estimate in zip(cfg.t_grid, curve.estimates):
            if t > 0:
                exact = 2.0 * norm.cdf(gap / (2.0 * math.sqrt(t))) - 1.0
                checks.append(CheckRecord(f"reflection survival oracle, t={t:g}", "survival of the coupling time",
                                          estimate.point, estimate.interval, exact))
    return RunReport("simulate", as_dict(cfg), seed, checks, SURVIVAL_COLUMNS, rows)


def cmd_verify(cfg: VerifyConfig, seed: int, threads: int = 1) -> RunReport:
    return RunReport("verify", as_dict(cfg), seed, run_suite(cfg, seed, threads))


def cmd_caratheodory(cfg: CaratheodoryConfig, seed: int, threads: int = 1) -> RunReport:
    spec = spec_for(cfg.space)
    strategy = CouplingStrategy.for_spec(cfg.strategy, spec)
    phases = np.linspace(0.0, 2.0 * np.pi, cfg.phases, endpoint=False)
    if spec.chart == "disk":
        family = moebius_family(complex(cfg.y[0], cfg.y[1]), phases)
    else:
        center = tuple(real_to_complex(np.asarray(cfg.y, dtype=float)))
        family = [CoordinateSliceCHn(index, center, float(phase)) for index in range(len(center)) for phase in phases]
    plan = StepPlan(cfg.dt, cfg.t) if cfg.dt is not None else None
    report = stochastic_caratheodory(spec, strategy, cfg.x, cfg.y, cfg.t, family, cfg.n_paths, seed,
                                     plan=plan, eps_couple=cfg.eps_couple, threads=threads)
    anchor = "stochastic formula for the Carathéodory distance"
    estimate = report.stochastic_estimate
    checks = [
        CheckRecord.judged("c <= 2 P(tau > t)", anchor, report.closed_form, report.bound_respected(),
                           (2.0 * report.survival.lo, 2.0 * report.survival.hi), report.survival_bound),
        CheckRecord("sup over the test family", anchor, estimate.point, estimate.interval, report.closed_form,
                    note=f"best member {report.best_member} of {len(family)}"),
    ]
    if report.schwarz_rhs is not None:
        checks.append(CheckRecord("Schwarz right-hand side", "stochastic Schwarz lemma", report.closed_form,
                                  bound=report.schwarz_rhs))
    if spec.chart == "h2c":
        p, q = real_to_complex(np.asarray(cfg.x, dtype=float)), real_to_complex(np.asarray(cfg.y, dtype=float))
        checks.append(CheckRecord("normalized Poincaré distance", "Carathéodory distance of the ball",
                                  chn_poincare_distance(p, q), bound=caratheodory_ball(p, q),
                                  note="sqrt(n + 1) artanh of the Carathéodory distance"))
    return RunReport("caratheodory", as_dict(cfg), seed, checks)


def cmd_wilson(cfg: WilsonConfig, seed: int, threads: int = 1) -> RunReport:
    lo, hi = wilson_interval(cfg.k, cfg.n, cfg.z)
    row = {"k": cfg.k, "n": cfg.n, "z": cfg.z, "p_hat": cfg.k / cfg.n, "wilson_lo": lo, "wilson_hi": hi}
    return RunReport("wilson", as_dict(cfg), seed, [], WILSON_COLUMNS, [row])


COMMANDS = {
    "bounds": cmd_bounds,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "caratheodory": cmd_caratheodory,
    "wilson": cmd_wilson,
}


def run_command(command: str, cfg, seed: int, threads: int = 1) -> RunReport:
    started = time.perf_counter()
    report = COMMANDS[command](cfg, seed, threads)
    report.elapsed = time.perf_counter() - started
    logger.info(f"{command} finished in {report.elapsed:.2f}s")
    return report
