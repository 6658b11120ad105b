"""Sectioned key=value run configuration.

Every field has a default, so a minimal file (or an empty one) is a valid
configuration; parsing collects every violation before failing, and
:func:`emit_config` writes the effective configuration back out in a form
that re-parses to an identical object.

Repeatable rows: ``mode = k lambda`` (1-D) or ``mode = k l lambda`` (2-D)
in [noise] override the default spectrum, and ``rung = level factor`` rows
in [mc] define the comparison ladder.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable

from .errors import ConfigError
from .linalg import SolverOptions
from .mc import ExperimentPlan, LadderRung, Problem, TrackingPlan
from .noise import ModeSpec, NoiseModel, default_modes
from .potential import PotentialParams
from .profiles import constant_profile, cosine_profile, tanh_ellipse_profile

INITIAL_KINDS = ("constant", "cosine", "tanh-ellipse")


@dataclass(frozen=True)
class RunConfig:
    """Flat effective configuration; defaults form the 1-D desk study."""

    # [domain]
    dim: int = 1
    level: int = 5
    # [time]
    final_time: float = 0.25
    n_steps: int = 1024
    # [potential]
    gamma: float = 1e-5
    epsilon: float = 1.0
    rho: str = "indicator"
    # [initial]
    initial_kind: str = "cosine"
    initial_value: float = 1.0
    center: tuple = (0.5, 0.5)
    semi_axes: tuple = (0.3, 0.18)
    # [noise]
    noise_enabled: bool = True
    master_seed: int = 42
    max_wavenumber: int = 3
    modes: tuple = ()  # empty: default spectrum for the dimension
    # [solver]
    rel_tolerance: float = 1e-10
    max_iterations: int | None = None
    # [output]
    out_dir: str = "out"
    snapshot_every: int = 0
    noise_dump: bool = False
    # [mc]
    samples: int = 100
    ref_level: int = 9
    n_fine: int = 16384
    rungs: tuple = ((7, 2), (6, 8), (5, 32))
    workers: int = 1
    # [rtrack]
    rtrack_level: int = 7
    rtrack_n_fine: int = 1024
    rtrack_factors: tuple = (8, 4, 2, 1)

    @property
    def tau(self) -> float:
        return self.final_time / self.n_steps


def _parse_int(raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"expected an integer, got {raw!r}") from None


def _parse_float(raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ValueError(f"expected a number, got {raw!r}") from None


def _parse_bool(raw: str) -> bool:
    lowered = raw.lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected true or false, got {raw!r}")


def _parse_str(raw: str) -> str:
    return raw


def _parse_iterations(raw: str) -> int | None:
    if raw.lower() == "auto":
        return None
    return _parse_int(raw)


def _parse_factors(raw: str) -> tuple:
    parts = raw.split()
    if not parts:
        raise ValueError("expected a space-separated list of integers")
    return tuple(_parse_int(p) for p in parts)


# section -> key -> (RunConfig attribute, parser)
_SCHEMA = {
    "domain": {
        "dim": ("dim", _parse_int),
        "level": ("level", _parse_int),
    },
    "time": {
        "final_time": ("final_time", _parse_float),
        "n_steps": ("n_steps", _parse_int),
    },
    "potential": {
        "gamma": ("gamma", _parse_float),
        "epsilon": ("epsilon", _parse_float),
        "rho": ("rho", _parse_str),
    },
    "initial": {
        "kind": ("initial_kind", _parse_str),
        "value": ("initial_value", _parse_float),
        "center_x": (("center", 0), _parse_float),
        "center_y": (("center", 1), _parse_float),
        "semi_axis_x": (("semi_axes", 0), _parse_float),
        "semi_axis_y": (("semi_axes", 1), _parse_float),
    },
    "noise": {
        "enabled": ("noise_enabled", _parse_bool),
        "master_seed": ("master_seed", _parse_int),
        "max_wavenumber": ("max_wavenumber", _parse_int),
    },
    "solver": {
        "rel_tolerance": ("rel_tolerance", _parse_float),
        "max_iterations": ("max_iterations", _parse_iterations),
    },
    "output": {
        "directory": ("out_dir", _parse_str),
        "snapshot_every": ("snapshot_every", _parse_int),
        "noise_dump": ("noise_dump", _parse_bool),
    },
    "mc": {
        "samples": ("samples", _parse_int),
        "ref_level": ("ref_level", _parse_int),
        "n_fine": ("n_fine", _parse_int),
        "workers": ("workers", _parse_int),
    },
    "rtrack": {
        "level": ("rtrack_level", _parse_int),
        "n_fine": ("rtrack_n_fine", _parse_int),
        "factors": ("rtrack_factors", _parse_factors),
    },
}

# repeatable row keys, handled outside the scalar schema
_ROW_KEYS = {"noise": "mode", "mc": "rung"}


def _parse_mode_row(raw: str, dim: int):
    parts = raw.split()
    if len(parts) != dim + 1:
        raise ValueError(
            f"mode rows need {dim + 1} fields in {dim}-D "
            f"(wavenumbers then lambda), got {raw!r}"
        )
    k = tuple(_parse_int(p) for p in parts[:-1])
    return ModeSpec(k=k, amplitude=_parse_float(parts[-1]))


def _parse_rung_row(raw: str):
    parts = raw.split()
    if len(parts) != 2:
        raise ValueError(f"rung rows need two fields (level factor), got {raw!r}")
    return _parse_int(parts[0]), _parse_int(parts[1])


def _scan(text: str):
    """Split config text into scalar assignments and repeatable rows.

    Returns (scalars, rows, violations) where scalars maps (section, key)
    to the raw value and rows collects repeated ``mode``/``rung`` lines in
    file order.
    """
    scalars = {}
    rows = {"mode": [], "rung": []}
    violations = []
    section = None
    known_section = False
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            section = stripped[1:-1].strip()
            known_section = section in _SCHEMA
            if not known_section:
                violations.append(f"line {lineno}: unknown section [{section}]")
            continue
        if "=" not in stripped:
            violations.append(
                f"line {lineno}: expected key = value, got {stripped!r}"
            )
            continue
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if section is None:
            violations.append(
                f"line {lineno}: key {key!r} appears before any section"
            )
            continue
        if not known_section:
            continue  # section already reported
        if key == _ROW_KEYS.get(section):
            rows[key].append((lineno, raw))
            continue
        if key not in _SCHEMA[section]:
            violations.append(
                f"line {lineno}: unknown key {key!r} in section [{section}]"
            )
            continue
        if (section, key) in scalars:
            violations.append(
                f"line {lineno}: duplicate key {key!r} in section [{section}]"
            )
            continue
        scalars[(section, key)] = (lineno, raw)
    return scalars, rows, violations


def _domain_checks(config: RunConfig) -> list:
    """Cross-field validation by building every domain object once."""
    violations = []

    def attempt(build: Callable) -> None:
        try:
            build()
        except ConfigError as exc:
            violations.extend(exc.violations)

    attempt(lambda: potential_params(config))
    attempt(lambda: solver_options(config))
    if config.dim in (1, 2):
        # the dimension-dependent builders would each re-report a bad dim
        attempt(lambda: noise_model(config))
        attempt(lambda: experiment_plan(config))
        attempt(lambda: tracking_plan(config))
    else:
        violations.append(f"domain.dim must be 1 or 2, got {config.dim!r}")
    if config.level < 1:
        violations.append(f"domain.level must be >= 1, got {config.level!r}")
    if not config.final_time > 0:
        violations.append(
            f"time.final_time must be > 0, got {config.final_time!r}"
        )
    if config.n_steps < 1:
        violations.append(f"time.n_steps must be >= 1, got {config.n_steps!r}")
    if config.initial_kind not in INITIAL_KINDS:
        violations.append(
            f"initial.kind must be one of {INITIAL_KINDS}, "
            f"got {config.initial_kind!r}"
        )
    if config.initial_kind == "tanh-ellipse":
        if config.dim != 2:
            violations.append("initial.kind tanh-ellipse needs domain.dim = 2")
        if not all(a > 0 for a in config.semi_axes):
            violations.append(
                f"initial semi-axes must be positive, got {config.semi_axes!r}"
            )
    if config.max_wavenumber < 1:
        violations.append(
            f"noise.max_wavenumber must be >= 1, got {config.max_wavenumber!r}"
        )
    if config.snapshot_every < 0:
        violations.append(
            f"output.snapshot_every must be >= 0, got {config.snapshot_every!r}"
        )
    elif config.snapshot_every and config.n_steps % config.snapshot_every:
        violations.append(
            f"output.snapshot_every = {config.snapshot_every} does not divide "
            f"time.n_steps = {config.n_steps}"
        )
    if config.workers < 1:
        violations.append(f"mc.workers must be >= 1, got {config.workers!r}")
    return violations


def parse_config(path) -> RunConfig:
    """Load and fully validate a configuration file.

    Raises :class:`ConfigError` carrying every violation found: scan
    problems, per-key type errors, and all cross-field constraint failures.
    """
    text = Path(path).read_text()
    scalars, rows, violations = _scan(text)

    values = {}
    pairs = {}  # partially assembled tuple fields like center
    for (section, key), (lineno, raw) in sorted(
            scalars.items(), key=lambda item: item[1][0]):
        target, parser = _SCHEMA[section][key]
        try:
            parsed = parser(raw)
        except ValueError as exc:
            violations.append(f"line {lineno}: {section}.{key}: {exc}")
            continue
        if isinstance(target, tuple):
            pairs.setdefault(target[0], {})[target[1]] = parsed
        else:
            values[target] = parsed

    defaults = RunConfig()
    for name, parts in pairs.items():
        base = list(getattr(defaults, name))
        for index, parsed in parts.items():
            base[index] = parsed
        values[name] = tuple(base)

    dim = values.get("dim", defaults.dim)
    modes = []
    for lineno, raw in rows["mode"]:
        try:
            modes.append(_parse_mode_row(raw, dim if dim in (1, 2) else 1))
        except ValueError as exc:
            violations.append(f"line {lineno}: noise.mode: {exc}")
    if modes:
        values["modes"] = tuple(modes)
    rungs = []
    for lineno, raw in rows["rung"]:
        try:
            rungs.append(_parse_rung_row(raw))
        except ValueError as exc:
            violations.append(f"line {lineno}: mc.rung: {exc}")
    if rungs:
        values["rungs"] = tuple(rungs)

    if violations:
        raise ConfigError(violations)

    config = replace(defaults, **values)
    violations = _domain_checks(config)
    if violations:
        raise ConfigError(violations)
    return config


def emit_config(config: RunConfig) -> str:
    """Render the effective configuration; re-parsing gives an equal object."""
    iterations = ("auto" if config.max_iterations is None
                  else str(config.max_iterations))
    lines = [
        "[domain]",
        f"dim = {config.dim}",
        f"level = {config.level}",
        "",
        "[time]",
        f"final_time = {config.final_time!r}",
        f"n_steps = {config.n_steps}",
        "",
        "[potential]",
        f"gamma = {config.gamma!r}",
        f"epsilon = {config.epsilon!r}",
        f"rho = {config.rho}",
        "",
        "[initial]",
        f"kind = {config.initial_kind}",
        f"value = {config.initial_value!r}",
        f"center_x = {config.center[0]!r}",
        f"center_y = {config.center[1]!r}",
        f"semi_axis_x = {config.semi_axes[0]!r}",
        f"semi_axis_y = {config.semi_axes[1]!r}",
        "",
        "[noise]",
        f"enabled = {str(config.noise_enabled).lower()}",
        f"master_seed = {config.master_seed}",
        f"max_wavenumber = {config.max_wavenumber}",
    ]
    for mode in config.modes:
        numbers = " ".join(str(k) for k in mode.k)
        lines.append(f"mode = {numbers} {mode.amplitude!r}")
    lines += [
        "",
        "[solver]",
        f"rel_tolerance = {config.rel_tolerance!r}",
        f"max_iterations = {iterations}",
        "",
        "[output]",
        f"directory = {config.out_dir}",
        f"snapshot_every = {config.snapshot_every}",
        f"noise_dump = {str(config.noise_dump).lower()}",
        "",
        "[mc]",
        f"samples = {config.samples}",
        f"ref_level = {config.ref_level}",
        f"n_fine = {config.n_fine}",
        f"workers = {config.workers}",
    ]
    for level, factor in config.rungs:
        lines.append(f"rung = {level} {factor}")
    lines += [
        "",
        "[rtrack]",
        f"level = {config.rtrack_level}",
        f"n_fine = {config.rtrack_n_fine}",
        "factors = " + " ".join(str(f) for f in config.rtrack_factors),
    ]
    return "\n".join(lines) + "\n"


def potential_params(config: RunConfig) -> PotentialParams:
    return PotentialParams(gamma=config.gamma, epsilon=config.epsilon,
                           rho_kind=config.rho)


def solver_options(config: RunConfig) -> SolverOptions:
    return SolverOptions(rel_tolerance=config.rel_tolerance,
                         max_iterations=config.max_iterations)


def config_modes(config: RunConfig) -> tuple:
    if config.modes:
        return config.modes
    return default_modes(config.dim, config.max_wavenumber)


def noise_model(config: RunConfig) -> NoiseModel | None:
    if not config.noise_enabled:
        return None
    return NoiseModel(config.dim, config_modes(config), config.master_seed)


def initial_profile(config: RunConfig) -> Callable:
    if config.initial_kind == "constant":
        return constant_profile(config.initial_value)
    if config.initial_kind == "cosine":
        return cosine_profile(config.initial_value)
    if config.initial_kind == "tanh-ellipse":
        return tanh_ellipse_profile(config.epsilon, center=config.center,
                                    semi_axes=config.semi_axes)
    raise ConfigError(
        [f"initial.kind must be one of {INITIAL_KINDS}, "
         f"got {config.initial_kind!r}"]
    )


def problem(config: RunConfig) -> Problem:
    return Problem(
        params=potential_params(config),
        modes=config_modes(config),
        initial=initial_profile(config),
        solver=solver_options(config),
        noise_enabled=config.noise_enabled,
    )


def experiment_plan(config: RunConfig) -> ExperimentPlan:
    return ExperimentPlan(
        dim=config.dim,
        final_time=config.final_time,
        n_fine=config.n_fine,
        ref_level=config.ref_level,
        rungs=tuple(LadderRung(level, factor)
                    for level, factor in config.rungs),
        samples=config.samples,
        master_seed=config.master_seed,
    )


def tracking_plan(config: RunConfig) -> TrackingPlan:
    return TrackingPlan(
        dim=config.dim,
        level=config.rtrack_level,
        final_time=config.final_time,
        n_fine=config.rtrack_n_fine,
        factors=config.rtrack_factors,
        samples=config.samples,
        master_seed=config.master_seed,
    )
