"""
Suite runner: executes every scenario of an experiment config, writes the
per-scenario outputs and merges the check reports into one summary.
"""

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import psutil
from colorama import Fore, Style, init as colorama_init

from . import plotting, reports
from .config import ConfigManager, ExperimentConfig, ScenarioConfig
from .dynamics import simulate
from .energy import perfect_learning_probe
from .error_handling import (ConfigurationError, DivergenceError, ErrorHandler, HypothesisViolationError,
                             LabError, safe_call)
from .scenarios import build_agent, build_quasi_period, build_system, time_grid
from .stability import analyze_homogeneous, bibo_decay_check, certify_sun
from .verify import (TheoremReport, Verdict, certificate_validation, convergence_check, corollary_report,
                     deviation_series, energy_balance_report, environmental_energy_boundedness,
                     pseudo_period_deviation, stability_certificate_report)

logger = logging.getLogger(__name__)


@dataclass
class ScenarioOutcome:
    name: str
    reports: List[TheoremReport] = field(default_factory=list)
    outputs: List[str] = field(default_factory=list)
    error_counts: Dict[str, int] = field(default_factory=dict)


@dataclass
class SuiteResult:
    reports: List[TheoremReport]
    outputs: Dict[str, List[str]]
    summary_path: str
    report_path: str
    error_stats: dict

    @property
    def exit_code(self) -> int:
        if any(r.verdict == Verdict.ERROR for r in self.reports):
            return 1
        if any(r.verdict == Verdict.FAIL for r in self.reports):
            return 2
        return 0


def default_jobs() -> int:
    """One worker per physical core."""
    return psutil.cpu_count(logical=False) or 1


def _error_report(check: str, scenario: str, error: LabError) -> TheoremReport:
    return TheoremReport(check, scenario, Verdict.ERROR, message=error.message)


def _run_dynamics(scenario: ScenarioConfig, seed: int, base_dir: str, output_dir: str, plots: bool,
                  handler: ErrorHandler) -> ScenarioOutcome:
    outcome = ScenarioOutcome(scenario.name)
    resolve = lambda p: p if os.path.isabs(p) else os.path.normpath(os.path.join(base_dir, p))  # noqa: E731
    agent = build_agent(scenario, seed, resolve)
    integrator = scenario.integrator
    options = scenario.options

    try:
        record = simulate(agent, integrator.T, integrator.h, integrator.sample_stride)
    except DivergenceError as e:
        handler.handle_error(e, f"scenario '{scenario.name}'")
        outcome.reports = [TheoremReport(check, scenario.name, Verdict.FAIL, message=f"diverged: {e.message}")
                           for check in scenario.checks]
        return outcome
    logger.info(f"Scenario '{scenario.name}': {record.steps} steps, {len(record)} samples")

    csv_path = os.path.join(output_dir, f"{scenario.name}.csv")
    outcome.outputs.append(reports.write_trajectory_csv(csv_path, record))

    spec = build_quasi_period(scenario)
    checks = {
        "energy-balance": lambda: energy_balance_report(record, scenario.name, options.residual_rtol),
        "corollary": lambda: corollary_report(record, scenario.name),
        "homo-exp-conv": lambda: pseudo_period_deviation(record, spec, scenario.name),
        "generalization": lambda: environmental_energy_boundedness(record, spec, scenario.name,
                                                                   horizon=options.plateau_horizon),
        "convergence": lambda: convergence_check(record, options.tail_fraction, scenario.name,
                                                 minimizer=options.minimizer),
        "stability-certificate": lambda: stability_certificate_report(record, agent, scenario.name),
        "perfect-learning": lambda: _perfect_learning_report(scenario, agent, record.horizon),
    }
    for check in scenario.checks:
        try:
            outcome.reports.append(checks[check]())
        except LabError as e:
            handler.handle_error(e, f"scenario '{scenario.name}' check {check}")
            outcome.reports.append(_error_report(check, scenario.name, e))

    if plots:
        stem = os.path.join(output_dir, scenario.name)
        for path in (safe_call(plotting.plot_weights, record, f"{stem}_weights.svg", scenario.name,
                               context="weights plot"),
                     safe_call(plotting.plot_energy, record, f"{stem}_energy.svg", scenario.name,
                               context="energy plot")):
            if path:
                outcome.outputs.append(path)
        deviation = next((r for r in outcome.reports if r.theorem == "homo-exp-conv"
                          and "fitted_exponent" in r.measured), None)
        if deviation is not None:
            times, devs = deviation_series(record, spec.advance)
            path = safe_call(plotting.plot_deviation_fit, times, devs, spec.alpha,
                             deviation.measured["fitted_exponent"], deviation.measured["bound_exponent"],
                             f"{stem}_deviation.svg", scenario.name, context="deviation plot")
            if path:
                outcome.outputs.append(path)
    return outcome


def _perfect_learning_report(scenario: ScenarioConfig, agent, horizon: float) -> TheoremReport:
    options = scenario.options
    T = options.probe_T if options.probe_T is not None else horizon
    frozen = perfect_learning_probe(agent, options.probe_w, T)
    gap = abs(frozen.E - frozen.delta_V)
    return TheoremReport.judged(
        "perfect-learning", scenario.name, gap <= 1e-6 * (1.0 + abs(frozen.delta_V)),
        measured={"max_dVdt": frozen.max_dVdt, "E": frozen.E, "delta_V": frozen.delta_V},
        parameters={"T": T, "samples": frozen.samples},
        message=f"frozen weights: max |dV/dt| = {frozen.max_dVdt:.3e}, E = {frozen.E:.6g}",
    )


def _run_stability(scenario: ScenarioConfig, base_dir: str, output_dir: str, plots: bool,
                   handler: ErrorHandler) -> ScenarioOutcome:
    outcome = ScenarioOutcome(scenario.name)
    cfg = scenario.system
    resolve = lambda p: p if os.path.isabs(p) else os.path.normpath(os.path.join(base_dir, p))  # noqa: E731
    system = build_system(cfg, resolve)
    grid = time_grid(cfg)

    measured = {}
    try:
        if cfg.method == "homogeneous":
            analysis = analyze_homogeneous(cfg.theta, system.B, grid)
            certificate = analysis.certificate
            measured = {"lambda_min": analysis.lambda_min, "chi": analysis.chi,
                        "first_condition": analysis.first_condition,
                        "second_condition_literal": analysis.second_condition_literal,
                        "second_condition_simplified": analysis.second_condition_simplified}
            anchor = "lemma:homogeneous-stability"
        else:
            certificate = certify_sun(system, cfg.m_grid, grid)
            anchor = "lemma:exp-stability"
    except HypothesisViolationError as e:
        handler.handle_error(e, f"scenario '{scenario.name}'")
        outcome.reports = [TheoremReport(check, scenario.name, Verdict.FAIL,
                                         message=f"no certificate / hypothesis violated: {e.message}")
                           for check in scenario.checks]
        return outcome

    for check in scenario.checks:
        if certificate is None:
            outcome.reports.append(TheoremReport(check, scenario.name, Verdict.FAIL, measured=dict(measured),
                                                 anchor=anchor if check == "stability-certificate" else "",
                                                 message="no certificate"))
            continue
        try:
            if check == "stability-certificate":
                max_horizon = 1e4 if system.is_constant else cfg.T - cfg.t0
                transition, envelope = certificate_validation(system, certificate, h=cfg.simulation_h, t0=cfg.t0,
                                                              horizon_factor=cfg.horizon_factor,
                                                              max_horizon=max_horizon)
                path = os.path.join(output_dir, f"{scenario.name}_transition.csv")
                outcome.outputs.append(reports.write_transition_csv(path, transition, certificate.decay_rate,
                                                                    envelope.gamma_hat))
                if plots:
                    svg = safe_call(plotting.plot_transition, transition, certificate.decay_rate,
                                    envelope.gamma_hat, os.path.join(output_dir, f"{scenario.name}_transition.svg"),
                                    scenario.name, context="transition plot")
                    if svg:
                        outcome.outputs.append(svg)
                outcome.reports.append(TheoremReport.judged(
                    check, scenario.name, envelope.passed, anchor=anchor,
                    measured={**measured, "m": certificate.m, "margin": certificate.margin,
                              "decay_rate": certificate.decay_rate, "gamma_hat": envelope.gamma_hat,
                              "violations": envelope.violations},
                    parameters={"grid_size": certificate.grid_size, "h": cfg.simulation_h},
                    message=f"certified at m = {certificate.m:.6g}, decay rate {certificate.decay_rate:.4g}; "
                            f"{envelope.violations} envelope violations"))
            elif check == "bibo-decay":
                bibo = bibo_decay_check(system, cfg.bibo_q, T=cfg.bibo_T, h=cfg.bibo_h, certificate=certificate)
                outcome.reports.append(TheoremReport.judged(
                    check, scenario.name, bibo.passed,
                    measured={"fitted_exponent": bibo.fitted_exponent, "bound_exponent": bibo.bound},
                    parameters={"q": bibo.q, "T": cfg.bibo_T, "h": cfg.bibo_h},
                    message=f"fitted exponent {bibo.fitted_exponent:.4g} vs bound {bibo.bound:.4g}"))
        except LabError as e:
            handler.handle_error(e, f"scenario '{scenario.name}' check {check}")
            outcome.reports.append(_error_report(check, scenario.name, e))
    return outcome


def run_scenario(scenario: ScenarioConfig, suite_seed: int, base_dir: str, output_dir: str,
                 plots: bool = False) -> ScenarioOutcome:
    """Run one scenario; every failure ends up as a report row."""
    handler = ErrorHandler(logger)
    seed = scenario.seed if scenario.seed is not None else suite_seed
    try:
        if scenario.kind == "stability":
            outcome = _run_stability(scenario, base_dir, output_dir, plots, handler)
        else:
            outcome = _run_dynamics(scenario, seed, base_dir, output_dir, plots, handler)
    except Exception as e:
        error = handler.handle_error(e, f"scenario '{scenario.name}'")
        outcome = ScenarioOutcome(scenario.name, [_error_report(check, scenario.name, error)
                                                  for check in scenario.checks or ["setup"]])
    outcome.error_counts = dict(handler.error_counts)
    return outcome


class SuiteRunner:
    """Runs a validated experiment config and reports the verdicts."""

    def __init__(self, manager: ConfigManager, config: ExperimentConfig, output_dir: Optional[str] = None,
                 only: Optional[str] = None, jobs: Optional[int] = None, plots: bool = False):
        self.manager = manager
        self.config = config
        self.output_dir = os.path.abspath(output_dir) if output_dir else manager.get_absolute_path(config.output_dir)
        self.only = only
        self.jobs = jobs if jobs is not None else config.jobs
        if self.jobs == 0:
            self.jobs = default_jobs()
        self.plots = plots
        self.logger = logging.getLogger(__name__)

    def selected(self) -> List[ScenarioConfig]:
        scenarios = self.config.scenarios
        if self.only is not None:
            scenarios = [s for s in scenarios if s.name == self.only]
            if not scenarios:
                raise ConfigurationError(f"no scenario named '{self.only}'")
        return scenarios

    def run_all(self) -> SuiteResult:
        scenarios = self.selected()
        self.logger.info(f"Running {len(scenarios)} scenario(s) of '{self.config.name}' "
                         f"with {self.jobs} worker(s) into {self.output_dir}")
        args = [(s, self.config.seed, self.manager.base_dir, self.output_dir, self.plots) for s in scenarios]

        if self.jobs > 1 and len(scenarios) > 1:
            with ProcessPoolExecutor(max_workers=min(self.jobs, len(scenarios))) as pool:
                outcomes = list(pool.map(run_scenario, *zip(*args)))
        else:
            outcomes = [run_scenario(*a) for a in args]

        outcomes.sort(key=lambda o: o.name)
        all_reports = [r for o in outcomes for r in o.reports]
        outputs = {o.name: o.outputs for o in outcomes}
        error_counts: Dict[str, int] = {}
        for o in outcomes:
            for key, count in o.error_counts.items():
                error_counts[key] = error_counts.get(key, 0) + count

        summary_path = reports.write_summary_csv(os.path.join(self.output_dir, "summary.csv"), all_reports)
        report_path = reports.write_text_report(os.path.join(self.output_dir, "report.txt"),
                                                self.config.name, all_reports, outputs)
        stats = {"total_errors": sum(error_counts.values()), "error_breakdown": error_counts}
        return SuiteResult(all_reports, outputs, summary_path, report_path, stats)

    def display_summary(self, result: SuiteResult) -> None:
        """Coloured verdicts on the console."""
        colorama_init()
        colours = {Verdict.PASS: Fore.GREEN, Verdict.FAIL: Fore.RED,
                   Verdict.NOT_APPLICABLE: Fore.YELLOW, Verdict.ERROR: Fore.MAGENTA}
        print("\n" + "=" * 50)
        print(f"SUITE SUMMARY: {self.config.name}")
        print("=" * 50)
        for r in result.reports:
            colour = colours[r.verdict]
            print(f"{colour}{r.verdict.value.upper():<15}{Style.RESET_ALL} {r.scenario} / {r.theorem}  ({r.anchor})")
            if r.verdict != Verdict.PASS and r.message:
                print(f"{'':<15} {r.message}")
        passed = sum(r.passed for r in result.reports)
        print(f"\nChecks: {passed}/{len(result.reports)} passed")
        if result.error_stats["total_errors"]:
            print(f"Errors logged: {result.error_stats['total_errors']}")
        print(f"Summary: {result.summary_path}")
        print(f"Report:  {result.report_path}")
