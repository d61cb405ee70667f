"""
Verification suites run by ``coupleman verify <suite>``.

Each suite returns CheckRecords. Oracle-backed checks are pass/fail with a
band of config.SE_MULTIPLIER standard errors; checks whose constants are not
known in closed form are report-only. Path counts default to the acceptance
scale and are multiplied by VerifyConfig.scale.
"""

import logging
import math
from typing import Callable, Dict, List

import numpy as np

import config
from caratheodory.estimator import disk_schwarz_check, stochastic_caratheodory
from caratheodory.holomorphic import MoebiusAboutPoint, PowerMap, moebius_family
from comparison.bounds import comparison_drift_kahler, non_coupling_lower_bound
from comparison.functions import ricci_reduction_sweep
from comparison.radial import (absorption_probability, absorption_probability_numeric,
                               constant_drift_diffusion, eta_comparison, rho_comparison, wang_bound)
from coupling.estimators import (ExpectationEstimate, estimate_absorption_survival, estimate_survival,
                                 expectations_from_batch, joint_matrix_psd_probe, marginal_energy_test,
                                 survival_from_times, trace_drift_probe)
from coupling.simulator import simulate_coupled_batch
from coupling.strategies import CouplingKind, CouplingStrategy
from geometry.complex_ball import chc2_diffusion_batch
from geometry.disk import disk_geodesic_distance, from_complex, to_complex
from geometry.model_spaces import DISK_PROFILE
from sde.engine import DiffusionSpec, StepPlan, simulate_batch, strong_convergence_probe
from sde.entrance import simulate_entrance
from sde.specs import chc2_spec, disk_spec

from .config_schema import VerifyConfig
from .reporting import CheckRecord, Verdict

logger = logging.getLogger("experiment_cli")

SuiteRunner = Callable[[VerifyConfig, int, int], List[CheckRecord]]

K = config.SE_MULTIPLIER
# two-sided agreement between two simulated laws
LAW_SE_MULTIPLIER = 4.0

ALL_KINDS = (CouplingKind.SYNCHRONOUS, CouplingKind.INDEPENDENT, CouplingKind.MIRROR)
H2C_KINDS = (CouplingKind.SYNCHRONOUS, CouplingKind.INDEPENDENT)


def _complex_se(estimate: ExpectationEstimate) -> float:
    return math.hypot(estimate.real.se, estimate.imag.se)


def _next_seed(seed: int) -> int:
    return (seed + 1) % 2 ** 64


def _ball_points(rng: np.random.Generator, count: int, dim: int, radius: float = 0.95) -> np.ndarray:
    """Uniform points of the ball of the given radius in R^dim."""
    directions = rng.standard_normal((count, dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    return directions * (radius * rng.uniform(size=(count, 1)) ** (1.0 / dim))


def comparison_1d(cfg: VerifyConfig, seed: int, threads: int) -> List[CheckRecord]:
    """Constant-drift comparison diffusion against its scale-function oracle."""
    anchor = "absorption probability of the distance comparison process"
    b, sigma2, r0 = 1.0, 2.0, 0.5
    plan = StepPlan(config.DT_RADIAL, 50.0)
    t_grid = [1.0, 5.0, 20.0, 50.0]
    process = constant_drift_diffusion(b, sigma2, r0)
    curve = estimate_absorption_survival(process, plan, t_grid, cfg.paths(100_000), seed, threads)
    exact = absorption_probability(b, sigma2, r0)
    final = curve.estimates[-1]
    absorbed = 1.0 - final.point
    checks = [
        CheckRecord.judged("absorbed fraction by t_max", anchor, absorbed, abs(absorbed - exact) <= 0.015,
                           (1.0 - final.hi, 1.0 - final.lo), exact, "tolerance 0.015"),
        CheckRecord.judged("survival P(tau > t_max)", anchor, final.point,
                           abs(final.point - (1.0 - exact)) <= 0.015, final.interval, 1.0 - exact),
    ]
    numeric = absorption_probability_numeric(b, sigma2, r0)
    checks.append(CheckRecord.judged("exit ODE oracle", anchor, numeric, abs(numeric - exact) <= 1e-6,
                                     bound=exact, note="boundary value solve against the scale function"))
    a = sigma2 / 2.0
    limit = wang_bound(a, b, r0, math.inf)
    checks.append(CheckRecord.judged("survival bound at t = inf", "survival bound for the comparison diffusion",
                                     limit, abs(limit - (1.0 - exact)) <= 1e-12, bound=1.0 - exact))
    for t, estimate in zip(t_grid, curve.estimates):
        bound = wang_bound(a, b, r0, t)
        checks.append(CheckRecord.judged(f"survival bound at t={t:g}", "survival bound for the comparison diffusion",
                                         estimate.point, estimate.point <= bound + K * estimate.se,
                                         estimate.interval, bound))
    records = ricci_reduction_sweep()
    held = sum(rec.holds for rec in records)
    worst = min(rec.slack for rec in records)
    checks.append(CheckRecord("Ricci reduction sweep", "concavity of k -> G(k, r)", float(held),
                              bound=float(len(records)), verdict=Verdict.REPORT_ONLY,
                              note=f"{held} of {len(records)} grid points hold, worst slack {worst:.3e}"))
    return checks


def martingale(cfg: VerifyConfig, seed: int, threads: int) -> List[CheckRecord]:
    """Holomorphic functions of the pair are martingales under every coupling."""
    anchor = "martingale step of the stochastic Carathéodory formula"
    spec = disk_spec()
    x, y = 0.5 + 0j, 0j
    t_grid = [0.25, 0.5, 1.0, 2.0]
    plan = StepPlan(config.DT_DISK, 2.0)
    functions = {"z": PowerMap(1), "z^2": PowerMap(2), "moebius(0.3)": MoebiusAboutPoint(0.3)}
    n_paths = cfg.paths(20_000)
    n_marginal = min(cfg.paths(10_000), n_paths)
    references = {
        label: simulate_batch(spec, from_complex(start), plan, n_marginal, _next_seed(seed + offset),
                              t_grid=[1.0], threads=threads).snapshots[:, 0]
        for offset, (label, start) in enumerate((("X", x), ("Y", y)))
    }
    checks = []
    for kind in ALL_KINDS:
        strategy = CouplingStrategy.for_spec(kind, spec)
        batch = simulate_coupled_batch(spec, strategy, from_complex(x), from_complex(y), plan,
                                       config.EPS_COUPLE_DISK, n_paths, seed, t_grid=t_grid, threads=threads)
        for label, f in functions.items():
            exact = f.value_at(x) - f.value_at(y)
            for report in expectations_from_batch(batch, f.evaluate_states):
                error = abs(report.weighted.value - exact)
                se = _complex_se(report.weighted)
                checks.append(CheckRecord.judged(
                    f"{kind.value}: E[f(X_t) - f(Y_t)], f={label}, t={report.t:g}", anchor,
                    report.weighted.modulus, error <= K * se,
                    (report.weighted.modulus - K * se, report.weighted.modulus + K * se), abs(exact),
                    f"|error| = {error:.3e}, se = {se:.3e}"))
        # both marginals must still be disk Brownian motions from their own start points
        index = int(np.flatnonzero(np.isclose(batch.t_grid, 1.0))[0])
        for label, snapshots in (("X", batch.snapshots_x), ("Y", batch.snapshots_y)):
            p_value = marginal_energy_test(snapshots[:n_marginal, index], references[label], seed=seed)
            checks.append(CheckRecord.judged(f"{kind.value}: {label}_1 marginal law",
                                             "marginal law of a Markovian coupling", p_value, p_value >= 0.01,
                                             bound=0.01, note=f"energy test p-value, {n_marginal} paths"))
    return checks


def caratheodory(cfg: VerifyConfig, seed: int, threads: int) -> List[CheckRecord]:
    """c(x, y) <= 2 P(tau > t) and the Möbius sup reproducing c on the disk."""
    anchor = "stochastic formula for the Carathéodory distance"
    spec = disk_spec()
    x, y = from_complex(0.5 + 0j), from_complex(0j)
    n_paths = cfg.paths(20_000)
    family = moebius_family(0j) + [PowerMap(2)]
    mirror = CouplingStrategy.for_spec(CouplingKind.MIRROR, spec)
    checks = []
    for t in (0.5, 1.0, 2.0, 4.0):
        report = stochastic_caratheodory(spec, mirror, x, y, t, family, n_paths, seed, threads=threads)
        survival = report.survival
        checks.append(CheckRecord.judged(
            f"c <= 2 P(tau > t), t={t:g}", anchor, report.closed_form, report.bound_respected(),
            (2.0 * survival.lo, 2.0 * survival.hi), report.survival_bound))
        estimate = report.stochastic_estimate
        checks.append(CheckRecord.judged(
            f"sup over Möbius family, t={t:g}", anchor, estimate.point,
            abs(estimate.point - report.closed_form) <= K * estimate.se, estimate.interval, report.closed_form))
        moebius_only = max(e.modulus for e in report.member_estimates[:-1])
        widest = max(e.modulus for e in report.member_estimates)
        checks.append(CheckRecord.judged(f"family monotonicity, t={t:g}", anchor, widest, widest >= moebius_only,
                                         bound=moebius_only))
        if t == 1.0:
            checks.append(CheckRecord("Schwarz right-hand side, t=1", "stochastic Schwarz lemma",
                                      report.closed_form, bound=report.schwarz_rhs))
    # mirror should leave the least slack among the strategies
    for kind in (CouplingKind.SYNCHRONOUS, CouplingKind.INDEPENDENT):
        other = estimate_survival(spec, CouplingStrategy.for_spec(kind, spec), x, y, StepPlan(config.DT_DISK, 1.0),
                                  config.EPS_COUPLE_DISK, [1.0], n_paths, seed, threads).estimates[0]
        checks.append(CheckRecord(f"{kind.value}: 2 P(tau > 1)", anchor, 2.0 * other.point,
                                  (2.0 * other.lo, 2.0 * other.hi), 0.5,
                                  note="slack against the mirror coupling"))
    return checks


def disk_schwarz(cfg: VerifyConfig, seed: int, threads: int) -> List[CheckRecord]:
    anchor = "stochastic Schwarz lemma on the disk"
    mirror = CouplingStrategy(CouplingKind.MIRROR, "disk")
    n_paths = cfg.paths(20_000)
    t = 1.0
    checks = []
    for x in (0.3, 0.5, 0.7):
        result = disk_schwarz_check(PowerMap(2), x, t, mirror, n_paths, seed, threads=threads)
        checks.append(CheckRecord.judged(f"f=z^2, x={x:g}: lhs <= rhs", anchor, result.lhs, result.holds,
                                         (result.lhs - K * result.lhs_se, result.lhs + K * result.lhs_se),
                                         result.rhs + K * result.combined_se))
        checks.append(CheckRecord(f"f=z^2, x={x:g}: exact means", anchor, result.lhs, bound=x * x,
                                  note=f"rhs {result.rhs:.6g} against {x:g}"))
    rotation = disk_schwarz_check(PowerMap(1, math.pi / 3.0), 0.5, t, mirror, n_paths, seed, threads=threads)
    gap = abs(rotation.lhs - rotation.rhs)
    checks.append(CheckRecord.judged("rotation: lhs = rhs", anchor, gap, gap <= K * rotation.combined_se,
                                     bound=K * rotation.combined_se))
    return checks


def h2c_unsuccessful(cfg: VerifyConfig, seed: int, threads: int) -> List[CheckRecord]:
    """No Markovian coupling on H^2(C) is successful: P(tau > 10) >= |x - y|^2 / 4."""
    anchor = "unsuccessful couplings on H^2(C)"
    spec = chc2_spec()
    x0, y0 = spec.check_start(cfg.x0), spec.check_start(cfg.y0)
    rho = float(np.linalg.norm(x0 - y0))
    bound = non_coupling_lower_bound(rho)
    if rho == 0:
        logger.warning("h2c_prop72 with x0 = y0: the bound is 0 and the check is vacuous")
        return [CheckRecord.judged("P(tau > 10) >= rho^2 / 4", anchor, 0.0, True, bound=0.0,
                                   note="vacuous pass: x0 = y0")]
    plan = StepPlan(config.DT_H2C, 10.0)
    t_grid = [1.0, 2.5, 5.0, 10.0]
    checks = []
    for kind in H2C_KINDS:
        strategy = CouplingStrategy.for_spec(kind, spec)
        batch = simulate_coupled_batch(spec, strategy, x0, y0, plan, config.EPS_COUPLE_H2C,
                                       cfg.paths(20_000), seed, threads=threads)
        curve = survival_from_times(batch.coupling_time, t_grid)
        final = curve[-1]
        checks.append(CheckRecord.judged(
            f"{kind.value}: P(tau > 10) >= rho^2 / 4", anchor, final.point, final.point >= bound - K * final.se,
            final.interval, bound, f"{batch.n_domain_exits} pairs frozen at a domain exit"))
        for t, estimate in zip(t_grid[:-1], curve[:-1]):
            checks.append(CheckRecord(f"{kind.value}: P(tau > {t:g})", anchor, estimate.point,
                                      estimate.interval, bound))
    return checks


def _random_pairs(spec: DiffusionSpec, seed: int, count: int):
    rng = np.random.default_rng(seed)
    return _ball_points(rng, count, spec.dim), _ball_points(rng, count, spec.dim)


def psd_probe(cfg: VerifyConfig, seed: int, threads: int) -> List[CheckRecord]:
    anchor = "nonnegative joint diffusion matrix"
    checks = []
    for spec in (disk_spec(), chc2_spec()):
        xs, ys = _random_pairs(spec, seed, cfg.paths(1_000))
        kinds = ALL_KINDS if spec.chart == "disk" else H2C_KINDS
        for kind in kinds:
            report = joint_matrix_psd_probe(spec, CouplingStrategy.for_spec(kind, spec), xs, ys)
            checks.append(CheckRecord.judged(f"{spec.name}/{kind.value}: min eig a(x, y)", anchor,
                                             report.worst_joint, report.worst_joint >= -1e-9, bound=-1e-9))
            if kind is CouplingKind.INDEPENDENT:
                checks.append(CheckRecord.judged(f"{spec.name}/independent: min eig A_hat", anchor,
                                                 report.worst_hat, report.worst_hat > 0, bound=0.0))
        same = joint_matrix_psd_probe(spec, CouplingStrategy.for_spec(CouplingKind.SYNCHRONOUS, spec), xs, xs)
        size = float(np.max(np.abs(same.hat_trace)))
        checks.append(CheckRecord.judged(f"{spec.name}/synchronous at x = y: Tr A_hat", anchor, size,
                                         size <= 1e-12, bound=1e-12))
    return checks


def matrix(cfg: VerifyConfig, seed: int, threads: int) -> List[CheckRecord]:
    """Structure of A(x) on H^2(C), joint PSD and the trace identity."""
    anchor = "Brownian motion on H^2(C) in the ball chart"
    rng = np.random.default_rng(seed)
    points = _ball_points(rng, 1_000, 4)
    a = chc2_diffusion_batch(points)
    asymmetry = float(np.max(np.abs(a - np.swapaxes(a, 1, 2))))
    r2 = np.sum(points ** 2, axis=1)
    expected = np.sort(np.column_stack([2 * (1 - r2), 2 * (1 - r2), 2 * np.sqrt(1 - r2), 2 * np.sqrt(1 - r2)]), axis=1)
    eigen_error = float(np.max(np.abs(np.linalg.eigvalsh(a) - expected)))
    checks = [
        CheckRecord.judged("A(x) symmetry", anchor, asymmetry, asymmetry <= 1e-14, bound=1e-14),
        CheckRecord.judged("A(x) eigenvalues", anchor, eigen_error, eigen_error <= 1e-10, bound=1e-10),
    ]
    spec = chc2_spec()
    xs, ys = _ball_points(rng, 1_000, 4), _ball_points(rng, 1_000, 4)
    for kind in H2C_KINDS:
        report = joint_matrix_psd_probe(spec, CouplingStrategy.for_spec(kind, spec), xs, ys)
        checks.append(CheckRecord.judged(f"{kind.value}: min eig a(x, y)", anchor, report.worst_joint,
                                         report.worst_joint >= -1e-9, bound=-1e-9))
    x0 = np.array([0.3, 0.1, 0.0, 0.0])
    y0 = np.array([-0.1, 0.0, 0.4, 0.2])
    t_grid = np.linspace(0.001, 0.01, 10)
    drift = trace_drift_probe(spec, x0, y0, t_grid, StepPlan(config.DT_H2C, 0.01), cfg.paths(20_000), seed,
                              threads=threads)
    checks.append(CheckRecord.judged("synchronous drift of E|X_t - Y_t|^2", "trace of the coupled generator",
                                     drift.slope.point, drift.relative_error <= 0.1, drift.slope.interval,
                                     drift.trace, f"relative error {drift.relative_error:.3e}"))
    return checks


def dominance(cfg: VerifyConfig, seed: int, threads: int) -> List[CheckRecord]:
    """Mirror-coupled survival on the disk is dominated by the comparison diffusion."""
    anchor = "distance comparison under the mirror coupling"
    spec = disk_spec()
    half = math.tanh(0.15)
    x0, y0 = from_complex(half + 0j), from_complex(-half + 0j)
    rho0 = disk_geodesic_distance(half, -half)
    t_grid = [0.5, 1.0, 2.0]
    plan = StepPlan(config.DT_DISK, 2.0)
    n_paths = cfg.paths(20_000)
    mirror = CouplingStrategy.for_spec(CouplingKind.MIRROR, spec)
    coupled = estimate_survival(spec, mirror, x0, y0, plan, config.EPS_COUPLE_DISK, t_grid, n_paths, seed, threads)
    process = rho_comparison(DISK_PROFILE, rho0)
    comparison = estimate_absorption_survival(process, plan, t_grid, n_paths, seed, threads)
    checks = []
    for t, ours, theirs in zip(t_grid, coupled.estimates, comparison.estimates):
        joint = math.hypot(ours.se, theirs.se)
        checks.append(CheckRecord.judged(
            f"P(tau > {t:g}) <= comparison survival", anchor, ours.point, ours.point <= theirs.point + K * joint,
            ours.interval, theirs.point + K * joint,
            f"comparison b = {comparison_drift_kahler(DISK_PROFILE):g}, sigma2 = {process.sigma2:g}"))

    halved = estimate_survival(spec, mirror, x0, y0, StepPlan(config.DT_DISK, 1.0), config.EPS_COUPLE_DISK / 2.0,
                               [1.0], n_paths, seed, threads).estimates[0]
    baseline = coupled.estimates[1]
    shift = abs(halved.point - baseline.point)
    checks.append(CheckRecord("coupling threshold halved, t=1", "coupling-time detection", halved.point,
                              halved.interval, baseline.point,
                              note=f"shift {shift:.3e} ({'within' if shift <= baseline.se else 'beyond'} 1 se)"))

    # distance from the start of one disk Brownian motion has the law of the radial comparison process
    law_anchor = "radial part of Brownian motion on the disk"
    start = np.zeros(2)
    motion = simulate_batch(spec, start, plan, n_paths, seed, t_grid=t_grid, threads=threads)
    radial = simulate_entrance(eta_comparison(DISK_PROFILE), plan, n_paths, _next_seed(seed), t_grid, threads)
    for i, t in enumerate(t_grid):
        distances = 2.0 * np.arctanh(np.abs(to_complex(motion.snapshots[:, i])))
        for level in (0.5, 1.0, 2.0):
            p_disk = float(np.mean(distances > level))
            p_eta = float(np.mean(radial.snapshots[:, i] > level))
            joint = math.sqrt(p_disk * (1 - p_disk) / n_paths + p_eta * (1 - p_eta) / n_paths)
            checks.append(CheckRecord.judged(f"P(rho_t > {level:g}) at t={t:g}", law_anchor, p_disk,
                                             abs(p_disk - p_eta) <= LAW_SE_MULTIPLIER * joint, bound=p_eta,
                                             note=f"agreement within {LAW_SE_MULTIPLIER:g} joint se"))
    return checks


def integrator(cfg: VerifyConfig, seed: int, threads: int) -> List[CheckRecord]:
    anchor = "Euler-Maruyama strong order on H^2(C)"
    table = strong_convergence_probe(chc2_spec(), [0.3, 0.0, 0.0, 0.0], [4e-3, 2e-3, 1e-3, 5e-4], 0.2,
                                     cfg.paths(2_048), seed, threads)
    order = table.fitted_order()
    checks = [CheckRecord.judged("fitted strong order", anchor, order, 0.3 <= order <= 0.7, (0.3, 0.7))]
    for row in table.rows:
        checks.append(CheckRecord(f"strong error at dt={row.dt:g}", anchor, row.strong_error,
                                  note=f"reference dt {table.reference_dt:g}"))
    return checks


SUITE_RUNNERS: Dict[str, SuiteRunner] = {
    "disk_schwarz": disk_schwarz,
    "caratheodory": caratheodory,
    "h2c_prop72": h2c_unsuccessful,
    "comparison_1d": comparison_1d,
    "psd_probe": psd_probe,
    "martingale": martingale,
    "dominance": dominance,
    "integrator": integrator,
    "matrix": matrix,
}


def run_suite(cfg: VerifyConfig, seed: int, threads: int = 1) -> List[CheckRecord]:
    logger.info(f"Running verify suite {cfg.suite} (seed {seed}, scale {cfg.scale:g})")
    checks = SUITE_RUNNERS[cfg.suite](cfg, seed, threads)
    failed = [check.name for check in checks if check.failed]
    if failed:
        logger.warning(f"Suite {cfg.suite}: {len(failed)} of {len(checks)} checks failed: {', '.join(failed)}")
    else:
        logger.info(f"Suite {cfg.suite}: all {len(checks)} checks passed or are report-only")
    return checks
