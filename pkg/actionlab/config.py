"""
Configuration management for the cognitive action laboratory.
Loads experiment suites from JSON files, applies environment overrides and
validates every scenario before anything runs.
"""

import os
import json
import logging
import math
from dataclasses import dataclass, field, fields, asdict
from typing import Any, Dict, List, Optional, Union

from .error_handling import ConfigurationError

DYNAMICS_CHECKS = ("energy-balance", "corollary", "homo-exp-conv", "generalization", "convergence",
                   "stability-certificate", "perfect-learning")
STABILITY_CHECKS = ("stability-certificate", "bibo-decay")
SIGNAL_KINDS = ("constant", "sinusoid-bank", "periodic-plus-decay", "tabulated")
POTENTIAL_KINDS = ("quadratic-tracking", "linear-regression", "two-layer-tanh")
DISSIPATION_KINDS = ("exponential", "power", "constant")
FEATURE_KINDS = ("identity", "affine", "fourier")
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


@dataclass
class SignalConfig:
    """Environment signal block; which fields apply depends on kind."""
    kind: str = "constant"
    value: Optional[List[float]] = None
    amplitudes: Optional[List[List[float]]] = None
    frequencies: Optional[List[float]] = None
    phases: Optional[List[float]] = None
    offset: Optional[List[float]] = None
    period: Optional[float] = None
    base: Optional["SignalConfig"] = None
    epsilon: float = 1.0
    alpha: float = 1.0
    order: float = 2.0
    direction: Optional[List[float]] = None
    path: Optional[str] = None
    repeat: bool = False


@dataclass
class TargetConfig:
    coef: List[float] = field(default_factory=list)
    bias: float = 0.0


@dataclass
class PotentialConfig:
    kind: str = "quadratic-tracking"
    matrix: Optional[List[List[float]]] = None
    features: str = "identity"
    n_features: Optional[int] = None
    scale: float = 1.0
    hidden: int = 2
    target: Optional[TargetConfig] = None


@dataclass
class DissipationConfig:
    kind: str = "exponential"
    theta: float = 0.0
    alpha: float = 1.0
    k: float = 0.0


@dataclass
class InitialStateConfig:
    w: Optional[List[float]] = None
    wdot: Optional[List[float]] = None
    random_scale: float = 0.5


@dataclass
class IntegratorConfig:
    method: str = "rk4"
    h: float = 1e-3
    T: float = 10.0
    sample_stride: int = 1


@dataclass
class QuasiPeriodConfig:
    epsilon: float = 1.0
    alpha: float = 1.0
    order: Union[float, str] = 2.0
    tau0: float = 1.0

    @property
    def order_value(self) -> float:
        return math.inf if isinstance(self.order, str) and self.order.lower() == "inf" else float(self.order)


@dataclass
class SystemConfig:
    """Stability scenario: constant A/B inline, a coefficient CSV, or theta with B."""
    method: str = "sun"
    A: Optional[List[List[float]]] = None
    B: Optional[List[List[float]]] = None
    theta: Optional[float] = None
    path: Optional[str] = None
    m_grid: Optional[List[float]] = None
    t0: float = 0.0
    T: float = 10.0
    grid_size: int = 512
    simulation_h: float = 0.05
    horizon_factor: float = 50.0
    bibo_q: Optional[float] = -2.0
    bibo_T: float = 500.0
    bibo_h: float = 0.05


@dataclass
class CheckOptions:
    residual_rtol: float = 1e-6
    tail_fraction: float = 0.1
    plateau_horizon: Optional[float] = None
    minimizer: Optional[List[float]] = None
    probe_w: Optional[List[float]] = None
    probe_T: Optional[float] = None


@dataclass
class ScenarioConfig:
    name: str = ""
    kind: str = "dynamics"
    seed: Optional[int] = None
    masses: Optional[List[float]] = None
    checks: List[str] = field(default_factory=list)
    signal: Optional[SignalConfig] = None
    potential: Optional[PotentialConfig] = None
    dissipation: Optional[DissipationConfig] = None
    initial_state: Optional[InitialStateConfig] = None
    integrator: Optional[IntegratorConfig] = None
    quasi_period: Optional[QuasiPeriodConfig] = None
    system: Optional[SystemConfig] = None
    options: Optional[CheckOptions] = None

    def __post_init__(self):
        """Initialize nested config objects."""
        if self.dissipation is None:
            self.dissipation = DissipationConfig()
        if self.initial_state is None:
            self.initial_state = InitialStateConfig()
        if self.integrator is None:
            self.integrator = IntegratorConfig()
        if self.options is None:
            self.options = CheckOptions()


@dataclass
class ExperimentConfig:
    """A suite of scenarios plus process-level settings."""
    name: str = "suite"
    seed: int = 0
    output_dir: str = "output"
    log_level: str = "INFO"
    log_dir: str = "../logs"
    jobs: int = 1
    scenarios: List[ScenarioConfig] = field(default_factory=list)


NESTED = {
    (SignalConfig, "base"): SignalConfig,
    (PotentialConfig, "target"): TargetConfig,
    (ScenarioConfig, "signal"): SignalConfig,
    (ScenarioConfig, "potential"): PotentialConfig,
    (ScenarioConfig, "dissipation"): DissipationConfig,
    (ScenarioConfig, "initial_state"): InitialStateConfig,
    (ScenarioConfig, "integrator"): IntegratorConfig,
    (ScenarioConfig, "quasi_period"): QuasiPeriodConfig,
    (ScenarioConfig, "system"): SystemConfig,
    (ScenarioConfig, "options"): CheckOptions,
}


class ConfigManager:
    """Manages experiment configuration from a suite file and the environment."""

    def __init__(self, config_file: str):
        self.config_file = os.path.abspath(config_file)
        self.config = ExperimentConfig()
        self.logger = logging.getLogger(__name__)
        self._errors: List[str] = []

    @property
    def base_dir(self) -> str:
        return os.path.dirname(self.config_file)

    def load_config(self) -> ExperimentConfig:
        """Load configuration from file and environment variables, then validate."""
        self._errors = []
        self._load_from_file()
        self._load_from_environment()
        self._validate_config()
        return self.config

    def _load_from_file(self) -> None:
        try:
            with open(self.config_file, 'r') as f:
                config_data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"Malformed config {self.config_file}: {e}", cause=e)
        except OSError as e:
            raise ConfigurationError(f"Cannot read config {self.config_file}: {e}", cause=e)
        if not isinstance(config_data, dict):
            raise ConfigurationError(f"Config {self.config_file} must hold a JSON object")

        self._update_config_from_dict(config_data)
        self.logger.info(f"Configuration loaded from {self.config_file}")

    def _load_from_environment(self) -> None:
        """Environment overrides (also read from env/.env)."""
        env_mappings = {
            'ACTIONLAB_OUTPUT_DIR': ('output_dir', str),
            'ACTIONLAB_LOG_LEVEL': ('log_level', str),
            'ACTIONLAB_LOG_DIR': ('log_dir', str),
            'ACTIONLAB_JOBS': ('jobs', int),
        }

        for env_var, (config_path, var_type) in env_mappings.items():
            value = os.getenv(env_var)
            if value is not None and value != "":
                try:
                    converted_value = var_type(value)
                    if config_path.endswith('_dir'):
                        # relative to the working directory, not the config file
                        converted_value = os.path.abspath(converted_value)
                    self._set_config_value(config_path, converted_value)
                    self.logger.debug(f"Set {config_path} from environment: {converted_value}")
                except (ValueError, TypeError) as e:
                    self.logger.warning(f"Invalid environment value for {env_var}: {value} ({e})")

    def _update_config_from_dict(self, config_data: Dict[str, Any]) -> None:
        for key, value in config_data.items():
            if key == "scenarios":
                if not isinstance(value, list):
                    self._errors.append("scenarios must be a list")
                    continue
                self.config.scenarios = []
                for i, item in enumerate(value):
                    label = f"scenario #{i + 1}"
                    if isinstance(item, dict) and isinstance(item.get("name"), str):
                        label = f"scenario '{item['name']}'"
                    scenario = self._build_block(ScenarioConfig, item, label, "")
                    if scenario is not None:
                        self.config.scenarios.append(scenario)
            elif key in {f.name for f in fields(ExperimentConfig)}:
                setattr(self.config, key, value)
            else:
                self._errors.append(f"unknown top-level field '{key}'")

    def _build_block(self, cls, data: Any, label: str, prefix: str):
        """Dataclass instance from a JSON object; unknown keys are recorded as errors."""
        where = f"{label}: {prefix}" if prefix else f"{label}: "
        if not isinstance(data, dict):
            self._errors.append(f"{where.rstrip(': ')} must be an object")
            return None
        known = {f.name for f in fields(cls)}
        kwargs = {}
        for key, value in data.items():
            if key not in known:
                self._errors.append(f"{where}{key} is not a recognized field")
                continue
            nested = NESTED.get((cls, key))
            if nested is not None and value is not None:
                value = self._build_block(nested, value, label, f"{prefix}{key}.")
            kwargs[key] = value
        return cls(**kwargs)

    def _set_config_value(self, path: str, value: Any) -> None:
        """Set a configuration value using dot notation."""
        parts = path.split('.')
        obj = self.config
        for part in parts[:-1]:
            obj = getattr(obj, part)
        setattr(obj, parts[-1], value)

    def _validate_config(self) -> None:
        """Validate every scenario, collecting all problems before raising."""
        errors = self._errors

        if str(self.config.log_level).upper() not in LOG_LEVELS:
            errors.append(f"log_level must be one of {', '.join(LOG_LEVELS)}")
        if not isinstance(self.config.jobs, int) or self.config.jobs < 1:
            errors.append("jobs must be a positive integer")
        if not isinstance(self.config.seed, int):
            errors.append("seed must be an integer")

        seen = set()
        for scenario in self.config.scenarios:
            if not scenario.name:
                errors.append("every scenario needs a name")
            elif scenario.name in seen:
                errors.append(f"scenario '{scenario.name}': duplicate name")
            seen.add(scenario.name)
            errors.extend(f"scenario '{scenario.name}': {problem}" for problem in _scenario_problems(scenario))

        if errors:
            error_msg = "Configuration validation failed:\n" + "\n".join(f"  - {error}" for error in errors)
            raise ConfigurationError(error_msg)

    def save_config(self, config_file: Optional[str] = None) -> None:
        """Write the resolved configuration (after overrides) as JSON."""
        file_path = config_file or self.config_file
        os.makedirs(os.path.dirname(os.path.abspath(file_path)), exist_ok=True)
        try:
            with open(file_path, 'w') as f:
                json.dump(_prune(asdict(self.config)), f, indent=2)
            self.logger.info(f"Configuration saved to {file_path}")
        except IOError as e:
            self.logger.error(f"Failed to save config to {file_path}: {e}")
            raise

    def get_absolute_path(self, relative_path: str) -> str:
        """Resolve a path from the config file's directory."""
        if os.path.isabs(relative_path):
            return relative_path
        return os.path.normpath(os.path.join(self.base_dir, relative_path))


def _prune(data):
    if isinstance(data, dict):
        return {k: _prune(v) for k, v in data.items() if v is not None}
    if isinstance(data, list):
        return [_prune(v) for v in data]
    return data


def _positive(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and value > 0 and math.isfinite(value)


def _signal_problems(signal: SignalConfig, prefix: str = "signal") -> List[str]:
    problems = []
    if signal.kind not in SIGNAL_KINDS:
        return [f"{prefix}.kind must be one of {', '.join(SIGNAL_KINDS)}"]
    if signal.kind == "constant" and not signal.value:
        problems.append(f"{prefix}.value is required for a constant signal")
    if signal.kind == "sinusoid-bank":
        if not signal.amplitudes or not signal.frequencies:
            problems.append(f"{prefix}.amplitudes and {prefix}.frequencies are required for a sinusoid bank")
    if signal.kind == "periodic-plus-decay":
        if signal.base is None:
            problems.append(f"{prefix}.base is required for a periodic-plus-decay signal")
        else:
            problems.extend(_signal_problems(signal.base, f"{prefix}.base"))
        if not _positive(signal.period):
            problems.append(f"{prefix}.period must be positive")
        if not _positive(signal.epsilon):
            problems.append(f"{prefix}.epsilon must be positive")
        if not _positive(signal.alpha):
            problems.append(f"{prefix}.alpha must be positive")
        if not isinstance(signal.order, (int, float)) or signal.order < 0:
            problems.append(f"{prefix}.order must be non-negative")
    if signal.kind == "tabulated" and not signal.path:
        problems.append(f"{prefix}.path is required for a tabulated signal")
    return problems


def _scenario_problems(scenario: ScenarioConfig) -> List[str]:
    problems = []
    if scenario.kind not in ("dynamics", "stability"):
        return ["kind must be 'dynamics' or 'stability'"]
    allowed = DYNAMICS_CHECKS if scenario.kind == "dynamics" else STABILITY_CHECKS
    for check in scenario.checks:
        if check not in allowed:
            problems.append(f"check '{check}' is not available for {scenario.kind} scenarios "
                            f"({', '.join(allowed)})")

    if scenario.kind == "stability":
        system = scenario.system
        if system is None:
            return problems + ["system block is required"]
        if system.method not in ("sun", "homogeneous"):
            problems.append("system.method must be 'sun' or 'homogeneous'")
        if system.method == "homogeneous":
            if not _positive(system.theta):
                problems.append("system.theta must be positive")
            if system.B is None and system.path is None:
                problems.append("system.B or system.path is required")
        elif system.path is None and (system.A is None or system.B is None):
            problems.append("system.A and system.B (or system.path) are required")
        if not system.T > system.t0:
            problems.append("system.T must exceed system.t0")
        if not isinstance(system.grid_size, int) or system.grid_size < 1:
            problems.append("system.grid_size must be a positive integer")
        if not _positive(system.simulation_h):
            problems.append("system.simulation_h must be positive")
        if system.m_grid is not None and not all(_positive(m) for m in system.m_grid):
            problems.append("system.m_grid entries must be positive")
        if system.bibo_q is not None and (system.bibo_q >= 0 or system.bibo_q == -0.5):
            problems.append("system.bibo_q must be negative and different from -0.5")
        return problems

    integrator = scenario.integrator
    if integrator.method != "rk4":
        problems.append("integrator.method must be 'rk4'")
    if not _positive(integrator.h):
        problems.append("integrator.h must be positive")
    if not _positive(integrator.T):
        problems.append("integrator.T must be positive")
    if not isinstance(integrator.sample_stride, int) or integrator.sample_stride < 1:
        problems.append("integrator.sample_stride must be a positive integer")

    if scenario.signal is None:
        problems.append("signal block is required")
    else:
        problems.extend(_signal_problems(scenario.signal))

    potential = scenario.potential
    if potential is None:
        problems.append("potential block is required")
    elif potential.kind not in POTENTIAL_KINDS:
        problems.append(f"potential.kind must be one of {', '.join(POTENTIAL_KINDS)}")
    else:
        if potential.kind == "quadratic-tracking" and not potential.matrix:
            problems.append("potential.matrix is required for quadratic-tracking")
        if potential.kind in ("linear-regression", "two-layer-tanh") and (potential.target is None
                                                                          or not potential.target.coef):
            problems.append("potential.target.coef is required")
        if potential.kind == "linear-regression" and potential.features not in FEATURE_KINDS:
            problems.append(f"potential.features must be one of {', '.join(FEATURE_KINDS)}")
        if potential.kind == "two-layer-tanh" and (not isinstance(potential.hidden, int) or potential.hidden < 1):
            problems.append("potential.hidden must be a positive integer")

    dissipation = scenario.dissipation
    if dissipation.kind not in DISSIPATION_KINDS:
        problems.append(f"dissipation.kind must be one of {', '.join(DISSIPATION_KINDS)}")
    elif dissipation.kind == "exponential" and not dissipation.theta >= 0:
        problems.append("dissipation.theta must be non-negative")
    elif dissipation.kind == "power":
        if not _positive(dissipation.alpha):
            problems.append("dissipation.alpha must be positive")
        if not dissipation.k >= 0:
            problems.append("dissipation.k must be non-negative")

    if scenario.masses is not None and not all(_positive(m) for m in scenario.masses):
        problems.append("masses must be strictly positive")

    needs_period = {"homo-exp-conv", "generalization"} & set(scenario.checks)
    if needs_period and scenario.quasi_period is None and (
            scenario.signal is None or scenario.signal.kind != "periodic-plus-decay"):
        problems.append(f"{', '.join(sorted(needs_period))} needs a quasi_period block "
                        f"or a periodic-plus-decay signal")
    if ("homo-exp-conv" in scenario.checks and scenario.quasi_period is None and scenario.signal is not None
            and scenario.signal.kind == "periodic-plus-decay"
            and isinstance(scenario.signal.order, (int, float))
            and (scenario.signal.order == 0.5 or not scenario.signal.order > 0)):
        problems.append("signal.order must be positive and different from 0.5")
    if scenario.quasi_period is not None:
        qp = scenario.quasi_period
        try:
            order = qp.order_value
        except (TypeError, ValueError):
            order = float("nan")
            problems.append("quasi_period.order must be a number or 'inf'")
        if "homo-exp-conv" in scenario.checks and (order == 0.5 or not order > 0):
            problems.append("quasi_period.order must be positive and different from 0.5")
        if not _positive(qp.tau0):
            problems.append("quasi_period.tau0 must be positive")
        if not _positive(qp.epsilon) or not _positive(qp.alpha):
            problems.append("quasi_period.epsilon and quasi_period.alpha must be positive")

    options = scenario.options
    if not 0 < options.tail_fraction <= 1:
        problems.append("options.tail_fraction must lie in (0, 1]")
    if options.plateau_horizon is not None and not (_positive(options.plateau_horizon)
                                                    and options.plateau_horizon <= integrator.T):
        problems.append("options.plateau_horizon must lie in (0, integrator.T]")
    if "perfect-learning" in scenario.checks and options.probe_w is None:
        problems.append("options.probe_w is required for the perfect-learning check")
    return problems
