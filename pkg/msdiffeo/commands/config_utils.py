"""
Run configuration: a plain-text key = value file with dotted sections

Grammar (one setting per line, '#' starts a comment):

    seed = 7
    source = data/source.csv
    kernel.mode = finite
    kernel.component = 0.25, 1.0
    kernel.component = 0.05, 1.0
    time.steps = 10
    optimizer.max_iters = 500

`kernel.component` is the only key that may repeat; any other repeated or unknown key
is rejected.
"""

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

from ..exceptions import ConfigError
from ..fields import Grid2
from ..flows import TimeIntegrator
from ..kernels import ContinuumKernelSpec, FiniteKernelSpec, GaussianKernel, KernelSpec
from ..kernels.kernel_utils import DEFAULT_JITTER
from ..registration import FORMULATIONS, SUM_OF_KERNELS, OptimizerConfig

logger = logging.getLogger(__name__)

COMMANDS = ("register", "decompose", "verify", "oracle")
ALL_CHECKS = ("A1", "A2", "A3", "A4", "A5", "A6", "A7", "A8", "A9", "A10", "switch_st")


@dataclass(frozen=True)
class GridConfig:
    nx: Optional[int] = None
    ny: Optional[int] = None
    h: Optional[float] = None
    origin: Optional[Tuple[float, float]] = None


@dataclass(frozen=True)
class KernelConfig:
    mode: str = "finite"
    components: Tuple[Tuple[float, float], ...] = ((0.25, 1.0), (0.05, 1.0))
    smin: float = 0.0
    smax: float = 1.0
    nodes: int = 16
    sigma_min: float = 0.05
    sigma_max: float = 0.25
    jitter: float = DEFAULT_JITTER


@dataclass(frozen=True)
class TimeConfig:
    steps: int = 10
    substeps: int = 1
    scheme: str = "rk4"
    scale_nodes: int = 8
    bins: int = 4


@dataclass(frozen=True)
class DecomposeConfig:
    ordering: str = "coarse_first"
    convention: str = "fine_outer"
    segment: str = "right"


@dataclass(frozen=True)
class VerifyConfig:
    checks: Tuple[str, ...] = ALL_CHECKS
    threshold_scale: float = 1.0
    oracle_tuples: int = 1000


@dataclass(frozen=True)
class RunConfig:
    """
    Every setting of one run

    Paths are kept as written; `resolve_inputs` in the command layer checks them.
    """
    command: str = "verify"
    seed: int = 0
    out: str = "msdiffeo_out"
    formulation: str = SUM_OF_KERNELS
    source: Optional[str] = None
    target: Optional[str] = None
    control: Optional[str] = None
    sigma2: Optional[float] = None
    grid: GridConfig = field(default_factory=GridConfig)
    kernel: KernelConfig = field(default_factory=KernelConfig)
    time: TimeConfig = field(default_factory=TimeConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    decompose: DecomposeConfig = field(default_factory=DecomposeConfig)
    verify: VerifyConfig = field(default_factory=VerifyConfig)

    def kernel_spec(self) -> KernelSpec:
        k = self.kernel
        if k.mode == "finite":
            return FiniteKernelSpec(tuple(GaussianKernel(s, w) for s, w in k.components), k.jitter)
        return ContinuumKernelSpec.midpoint(k.smin, k.smax, k.nodes, k.sigma_min, k.sigma_max, jitter=k.jitter)

    def integrator(self) -> TimeIntegrator:
        return TimeIntegrator(self.time.scheme, self.time.substeps)

    def velocity_grid(self) -> Optional[Grid2]:
        """Explicit grid, or None to let the problem choose one"""
        g = self.grid
        if g.nx is None and g.ny is None and g.h is None:
            return None
        if g.nx is None or g.ny is None or g.h is None:
            raise ConfigError("grid.nx, grid.ny and grid.h must be given together")
        return Grid2(g.nx, g.ny, g.h, g.origin or (0.0, 0.0))


def _pair(text: str) -> Tuple[float, float]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise ValueError(f"expected two comma-separated numbers, got {text!r}")
    return (float(parts[0]), float(parts[1]))


def _checks(text: str) -> Tuple[str, ...]:
    names = tuple(p.strip() for p in text.split(",") if p.strip())
    if names == ("all",):
        return ALL_CHECKS
    unknown = [n for n in names if n not in ALL_CHECKS]
    if unknown:
        raise ValueError(f"unknown check(s) {', '.join(unknown)}")
    return names


def _choice(*allowed: str) -> Callable[[str], str]:
    def parse(text: str) -> str:
        if text not in allowed:
            raise ValueError(f"expected one of {', '.join(allowed)}, got {text!r}")
        return text
    return parse


# key -> (section, attribute, parser)
KEYS: Dict[str, Tuple[Optional[str], str, Callable[[str], Any]]] = {
    "command": (None, "command", _choice(*COMMANDS)),
    "seed": (None, "seed", int),
    "out": (None, "out", str),
    "formulation": (None, "formulation", _choice(*FORMULATIONS)),
    "source": (None, "source", str),
    "target": (None, "target", str),
    "control": (None, "control", str),
    "data.sigma2": (None, "sigma2", float),
    "grid.nx": ("grid", "nx", int),
    "grid.ny": ("grid", "ny", int),
    "grid.h": ("grid", "h", float),
    "grid.origin": ("grid", "origin", _pair),
    "kernel.mode": ("kernel", "mode", _choice("finite", "continuum")),
    "kernel.component": ("kernel", "components", _pair),
    "kernel.smin": ("kernel", "smin", float),
    "kernel.smax": ("kernel", "smax", float),
    "kernel.nodes": ("kernel", "nodes", int),
    "kernel.sigma_min": ("kernel", "sigma_min", float),
    "kernel.sigma_max": ("kernel", "sigma_max", float),
    "kernel.jitter": ("kernel", "jitter", float),
    "time.steps": ("time", "steps", int),
    "time.substeps": ("time", "substeps", int),
    "time.scheme": ("time", "scheme", _choice("rk4", "euler")),
    "time.scale_nodes": ("time", "scale_nodes", int),
    "time.bins": ("time", "bins", int),
    "optimizer.max_iters": ("optimizer", "max_iters", int),
    "optimizer.step": ("optimizer", "step", float),
    "optimizer.backtrack": ("optimizer", "backtrack", float),
    "optimizer.armijo": ("optimizer", "armijo", float),
    "optimizer.grad_tol": ("optimizer", "grad_tol", float),
    "optimizer.rel_tol": ("optimizer", "rel_tol", float),
    "optimizer.direction": ("optimizer", "direction", _choice("lbfgs", "steepest")),
    "optimizer.memory": ("optimizer", "memory", int),
    "optimizer.log_every": ("optimizer", "log_every", int),
    "decompose.ordering": ("decompose", "ordering", _choice("coarse_first", "coarse_last")),
    "decompose.convention": ("decompose", "convention", _choice("fine_outer", "coarse_outer")),
    "decompose.segment": ("decompose", "segment", _choice("right", "left")),
    "verify.checks": ("verify", "checks", _checks),
    "verify.threshold_scale": ("verify", "threshold_scale", float),
    "verify.oracle_tuples": ("verify", "oracle_tuples", int),
}

REPEATABLE = ("kernel.component",)


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """
    Parse configuration text into a RunConfig

    Args:
        text: File contents
        source: Name used in error messages

    Returns:
        RunConfig: Defaults overridden by the given keys

    Raises:
        ConfigError: Malformed line, unknown or repeated key, bad value

    Example:
        >>> parse_config("seed = 3\\ntime.steps = 16").time.steps
        16
    """
    top: Dict[str, Any] = {}
    sections: Dict[str, Dict[str, Any]] = {}
    seen = set()
    components: List[Tuple[float, float]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in seen and key not in REPEATABLE:
            raise ConfigError(f"{source}:{lineno}: key {key!r} given twice")
        seen.add(key)
        section, attr, parse = KEYS[key]
        try:
            parsed = parse(value)
        except ValueError as e:
            raise ConfigError(f"{source}:{lineno}: invalid value for {key}: {e}") from e
        if key == "kernel.component":
            components.append(parsed)
        elif section is None:
            top[attr] = parsed
        else:
            sections.setdefault(section, {})[attr] = parsed
    if components:
        sections.setdefault("kernel", {})["components"] = tuple(components)

    base = RunConfig()
    try:
        for name, values in sections.items():
            top[name] = dataclasses.replace(getattr(base, name), **values)
        cfg = dataclasses.replace(base, **top)
    except ValueError as e:
        raise ConfigError(f"{source}: {e}") from e
    _validate(cfg, source)
    return cfg


def _validate(cfg: RunConfig, source: str) -> None:
    t = cfg.time
    if t.steps < 1 or t.substeps < 1 or t.scale_nodes < 1 or t.bins < 1:
        raise ConfigError(f"{source}: time settings must be positive integers")
    if cfg.verify.threshold_scale <= 0 or cfg.verify.oracle_tuples < 1:
        raise ConfigError(f"{source}: verify.threshold_scale and verify.oracle_tuples must be positive")
    if cfg.sigma2 is not None and not cfg.sigma2 > 0:
        raise ConfigError(f"{source}: data.sigma2 must be positive")
    try:
        cfg.kernel_spec()
        cfg.velocity_grid()
    except ValueError as e:
        raise ConfigError(f"{source}: {e}") from e


def load_config(path: str) -> RunConfig:
    """Read and parse a configuration file"""
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    cfg = parse_config(text, path)
    logger.info(f"✓ Loaded config {path}")
    return cfg


def _format(value: Any) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    return str(value)


def dump_config(cfg: RunConfig) -> str:
    """
    Serialize every set value; parse_config(dump_config(cfg)) == cfg

    Example:
        >>> cfg = parse_config("kernel.component = 0.3, 2.0")
        >>> parse_config(dump_config(cfg)) == cfg
        True
    """
    lines = []
    for key, (section, attr, _) in KEYS.items():
        holder = cfg if section is None else getattr(cfg, section)
        value = getattr(holder, attr)
        if value is None:
            continue
        if key == "kernel.component":
            lines.extend(f"{key} = {_format(c)}" for c in value)
        else:
            lines.append(f"{key} = {_format(value)}")
    return "\n".join(lines) + "\n"
