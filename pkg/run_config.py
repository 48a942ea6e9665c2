"""
Run configuration: a tree of dataclasses loaded from JSON or a flat
key=value file, with a canonical hash recorded next to every artifact.

Flat files use dotted keys (grid.N=256, evolution.perturbation.amplitude=1e-4);
bare physical keys (m, R, gamma, T_inf, u_inf, phi_b) belong to params.
"""
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from dataclasses_json import dataclass_json

from config import DIAGNOSTICS, EVOLUTION, SAGDEEV, STATIONARY
from errors import ConfigError
from params import PlasmaParams

logger = logging.getLogger(__name__)

REQUIRED_PARAM_KEYS = ("m", "R", "gamma", "T_inf", "u_inf", "phi_b")


@dataclass_json
@dataclass
class GridOptions:
    L: Optional[float] = None  # None: chosen from the decay scale
    N: int = STATIONARY.DEFAULT_CELLS


@dataclass_json
@dataclass
class StationaryOptions:
    L_max: float = STATIONARY.L_MAX
    tail_eps: float = STATIONARY.TAIL_EPS
    quad_tol: float = SAGDEEV.QUAD_TOL


@dataclass_json
@dataclass
class PerturbationOptions:
    shape: str = "gaussian"
    amplitude: float = EVOLUTION.PERTURBATION_AMPLITUDE
    center: Optional[float] = None
    width: Optional[float] = None
    components: List[str] = field(default_factory=lambda: ["psi"])


@dataclass_json
@dataclass
class EvolutionOptions:
    t_end: float = 10.0
    cfl: float = EVOLUTION.CFL
    observer_period: float = 0.1
    snapshot_every: Optional[float] = None
    strict: bool = EVOLUTION.STRICT_UPWIND
    poisson_tol: float = EVOLUTION.POISSON_TOL
    perturbation: PerturbationOptions = field(default_factory=PerturbationOptions)


@dataclass_json
@dataclass
class DiagnosticsOptions:
    weight_kind: str = "algebraic"
    weight_alpha: float = 4.0
    weight_beta: Optional[float] = None  # None: beta_fraction times the sheath scale
    beta_fraction: float = DIAGNOSTICS.QFORM_BETA_FRACTION
    norm_order: int = 1
    fit_model: Optional[str] = None  # None: "alg" for algebraic weights, "exp" otherwise
    fit_window: Optional[List[float]] = None
    qcheck_epsilon: float = DIAGNOSTICS.QFORM_EPSILON
    qcheck_beta_fraction: float = DIAGNOSTICS.QFORM_BETA_FRACTION
    qcheck_x_max: float = DIAGNOSTICS.QFORM_X_MAX
    qcheck_samples: int = DIAGNOSTICS.QFORM_SAMPLES


@dataclass_json
@dataclass
class VerifyOptions:
    max_order: int = 3


@dataclass_json
@dataclass
class RunConfig:
    params: PlasmaParams
    grid: GridOptions = field(default_factory=GridOptions)
    stationary: StationaryOptions = field(default_factory=StationaryOptions)
    evolution: EvolutionOptions = field(default_factory=EvolutionOptions)
    diagnostics: DiagnosticsOptions = field(default_factory=DiagnosticsOptions)
    verify: VerifyOptions = field(default_factory=VerifyOptions)
    output_prefix: str = "run"

    def validate(self) -> "RunConfig":
        positive = {
            "stationary.L_max": self.stationary.L_max,
            "stationary.tail_eps": self.stationary.tail_eps,
            "stationary.quad_tol": self.stationary.quad_tol,
            "evolution.cfl": self.evolution.cfl,
            "evolution.observer_period": self.evolution.observer_period,
            "evolution.poisson_tol": self.evolution.poisson_tol,
            "diagnostics.beta_fraction": self.diagnostics.beta_fraction,
            "diagnostics.qcheck_epsilon": self.diagnostics.qcheck_epsilon,
            "diagnostics.qcheck_x_max": self.diagnostics.qcheck_x_max,
        }
        for key, value in positive.items():
            if not value > 0:
                raise ConfigError(f"{key} must be positive, got {value}")
        if self.grid.L is not None and not self.grid.L > 0:
            raise ConfigError(f"grid.L must be positive, got {self.grid.L}")
        if self.grid.N < EVOLUTION.MIN_CELLS:
            raise ConfigError(f"grid.N must be at least {EVOLUTION.MIN_CELLS}, got {self.grid.N}")
        if self.evolution.t_end < 0:
            raise ConfigError(f"evolution.t_end must be non-negative, got {self.evolution.t_end}")
        if self.diagnostics.weight_kind not in ("algebraic", "exponential"):
            raise ConfigError(f"diagnostics.weight_kind must be algebraic or exponential, "
                              f"got {self.diagnostics.weight_kind!r}")
        if self.diagnostics.fit_model not in (None, "exp", "alg"):
            raise ConfigError(f"diagnostics.fit_model must be exp or alg, got {self.diagnostics.fit_model!r}")
        if not 0 <= self.verify.max_order <= 3:
            raise ConfigError(f"verify.max_order must be in 0..3, got {self.verify.max_order}")
        if not self.output_prefix:
            raise ConfigError("output_prefix must be nonempty")
        return self


def config_hash(cfg: RunConfig) -> str:
    """SHA-256 of the canonical JSON form (sorted keys, compact separators)"""
    canonical = json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _set_dotted(tree: Dict[str, Any], key: str, value: Any):
    parts = key.split(".")
    if len(parts) == 1 and parts[0] in REQUIRED_PARAM_KEYS:
        parts = ["params"] + parts
    node = tree
    for part in parts[:-1]:
        child = node.setdefault(part, {})
        if not isinstance(child, dict):
            raise ConfigError(f"key {key!r} conflicts with the scalar {part!r}")
        node = child
    node[parts[-1]] = value


def parse_flat(text: str) -> Dict[str, Any]:
    tree: Dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        _set_dotted(tree, key, _parse_value(value))
    return tree


def config_from_dict(data: Dict[str, Any]) -> RunConfig:
    params = data.get("params")
    if not isinstance(params, dict):
        raise ConfigError("missing section 'params'")
    for key in REQUIRED_PARAM_KEYS:
        if key not in params:
            raise ConfigError(f"missing required key '{key}' in params")
    try:
        cfg = RunConfig.from_dict(data)
    except (KeyError, TypeError, AttributeError) as e:
        raise ConfigError(f"malformed run configuration: {e}") from e
    return cfg.validate()


def load_run_config(path: Union[str, Path]) -> RunConfig:
    """Read a JSON or key=value run configuration"""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text()
    if path.suffix == ".json" or text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: {e}") from e
    else:
        data = parse_flat(text)
    logger.debug("Loaded run configuration from %s", path)
    return config_from_dict(data)


def apply_overrides(cfg: RunConfig, overrides: Dict[str, Any]) -> RunConfig:
    """Copy of cfg with dotted keys replaced; None values are skipped"""
    data = cfg.to_dict()
    for key, value in overrides.items():
        if value is not None:
            _set_dotted(data, key, value)
    return config_from_dict(data)
