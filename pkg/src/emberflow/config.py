"""Line-based run configuration: ``key = value`` entries under ``[section]`` headers.

The format is dependency-free on purpose. ``#`` starts a comment, blank
lines are ignored, and every parse error names the offending line and key.
All numeric fields are validated against the module preconditions at parse
time; unknown sections or keys are rejected.
"""

from dataclasses import dataclass, field as dataclass_field, replace

import numpy as np

from .grid import GridSpec, ScalarField, initial_data_library
from .integrate import PicardConfig, StepScheme
from .reaction import ModelParams

KNOWN_AUDITS = ("fuel", "linfty", "linear_growth", "l2", "gradient", "decay")
KNOWN_SCENARIOS = ("uniform", "gaussian", "plateau")


class ConfigError(Exception):
    """Invalid run configuration; message carries line and key context."""


@dataclass(frozen=True)
class RunConfig:
    # [grid]
    d: int = 1
    n: int = 256
    extent: float = 100.0
    # [model]
    lam: float = 0.0
    beta: float = 0.3
    # [scheme]
    scheme: str = "etd2"                      # etd1 | etd2 | picard
    dt: float = 0.01
    slab_length: float = 0.5
    nodes: int = 9
    tol: float = 1e-10
    max_iter: int = 60
    # [run]
    horizon: float = 1.0
    record_every: int = 1
    snapshot_times: tuple = ()
    seed: int = 0
    output: str = "runs/out"
    # [initial]
    t0_scenario: str = "gaussian"
    t0_params: dict = dataclass_field(default_factory=lambda: {"amplitude": 1.0, "sigma": 5.0})
    y0_scenario: str = "uniform"
    y0_params: dict = dataclass_field(default_factory=lambda: {"amplitude": 1.0})
    # [audit]
    bounds: tuple = ()
    eps0: float = None
    # [ignite]
    a_low: float = 0.5
    a_high: float = 5.0
    ratio_tol: float = 1.02
    budget: int = 32

    def grid(self) -> GridSpec:
        return GridSpec(d=self.d, n=self.n, extent=self.extent)

    def params(self) -> ModelParams:
        return ModelParams(lam=self.lam, beta=self.beta)

    def step_scheme(self) -> StepScheme:
        return StepScheme(kind=self.scheme, dt=self.dt)

    def picard_config(self) -> PicardConfig:
        return PicardConfig(slab_length=self.slab_length, quadrature_nodes=self.nodes,
                            tol=self.tol, max_iter=self.max_iter)

    def initial_fields(self) -> tuple:
        """(T0, Y0) built from the named scenarios."""
        g = self.grid()
        return (initial_data_library(g, self.t0_scenario, **self.t0_params),
                initial_data_library(g, self.y0_scenario, **self.y0_params))


def _parse_bool_free_float(raw, line_no, key):
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"line {line_no}: key '{key}': expected a number, got {raw!r}")


def _parse_int(raw, line_no, key):
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"line {line_no}: key '{key}': expected an integer, got {raw!r}")


def _parse_float_list(raw, line_no, key):
    if not raw.strip():
        return ()
    try:
        return tuple(float(tok) for tok in raw.split(","))
    except ValueError:
        raise ConfigError(f"line {line_no}: key '{key}': expected comma-separated numbers")


_SCENARIO_PARAM_KEYS = ("amplitude", "sigma", "center", "width", "ramp")


def parse_config(text: str) -> RunConfig:
    """Parse and fully validate a configuration; unknown keys are rejected."""
    assignments = {}   # (section, key) -> (value-string, line number)
    section = None
    known_sections = ("grid", "model", "scheme", "run", "initial", "audit", "ignite")
    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in known_sections:
                raise ConfigError(f"line {line_no}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected 'key = value', got {raw_line.strip()!r}")
        if section is None:
            raise ConfigError(f"line {line_no}: key outside of any [section]")
        key, _, value = line.partition("=")
        key = key.strip().lower()
        value = value.strip()
        if (section, key) in assignments:
            raise ConfigError(f"line {line_no}: duplicate key '{key}' in section [{section}]")
        assignments[(section, key)] = (value, line_no)

    fields = {}
    t0_params, y0_params = {}, {}

    def take(section, key, parser):
        item = assignments.pop((section, key), None)
        if item is None:
            return None
        return parser(item[0], item[1], key)

    def take_str(section, key, allowed=None):
        item = assignments.pop((section, key), None)
        if item is None:
            return None
        value, line_no = item
        value = value.lower()
        if allowed and value not in allowed:
            raise ConfigError(f"line {line_no}: key '{key}': must be one of "
                              f"{', '.join(allowed)}; got {value!r}")
        return value

    def put(name, value):
        if value is not None:
            fields[name] = value

    put("d", take("grid", "d", _parse_int))
    put("n", take("grid", "n", _parse_int))
    put("extent", take("grid", "l", _parse_bool_free_float))
    put("lam", take("model", "lambda", _parse_bool_free_float))
    put("beta", take("model", "beta", _parse_bool_free_float))
    put("scheme", take_str("scheme", "kind", ("etd1", "etd2", "picard")))
    put("dt", take("scheme", "dt", _parse_bool_free_float))
    put("slab_length", take("scheme", "slab_length", _parse_bool_free_float))
    put("nodes", take("scheme", "nodes", _parse_int))
    put("tol", take("scheme", "tol", _parse_bool_free_float))
    put("max_iter", take("scheme", "max_iter", _parse_int))
    put("horizon", take("run", "horizon", _parse_bool_free_float))
    put("record_every", take("run", "record_every", _parse_int))
    put("snapshot_times", take("run", "snapshot_times", _parse_float_list))
    put("seed", take("run", "seed", _parse_int))
    raw_output = assignments.pop(("run", "output"), None)
    if raw_output is not None:
        fields["output"] = raw_output[0]
    put("t0_scenario", take_str("initial", "t0_scenario", KNOWN_SCENARIOS))
    put("y0_scenario", take_str("initial", "y0_scenario", KNOWN_SCENARIOS))
    for param in _SCENARIO_PARAM_KEYS:
        v = take("initial", f"t0_{param}", _parse_bool_free_float)
        if v is not None:
            t0_params[param] = v
        v = take("initial", f"y0_{param}", _parse_bool_free_float)
        if v is not None:
            y0_params[param] = v
    raw_bounds = assignments.pop(("audit", "bounds"), None)
    if raw_bounds is not None:
        names = tuple(tok.strip().lower() for tok in raw_bounds[0].split(",") if tok.strip())
        for name in names:
            if name not in KNOWN_AUDITS:
                raise ConfigError(f"line {raw_bounds[1]}: unknown audit {name!r}; "
                                  f"known: {', '.join(KNOWN_AUDITS)}")
        fields["bounds"] = names
    put("eps0", take("audit", "eps0", _parse_bool_free_float))
    put("a_low", take("ignite", "a_low", _parse_bool_free_float))
    put("a_high", take("ignite", "a_high", _parse_bool_free_float))
    put("ratio_tol", take("ignite", "ratio_tol", _parse_bool_free_float))
    put("budget", take("ignite", "budget", _parse_int))

    if assignments:
        (section, key), (_, line_no) = next(iter(assignments.items()))
        raise ConfigError(f"line {line_no}: unknown key '{key}' in section [{section}]")

    cfg = RunConfig(**fields)
    if t0_params or y0_params:
        cfg = replace(cfg,
                      t0_params={**default_scenario_params(cfg.t0_scenario), **t0_params}
                      if "t0_scenario" in fields or t0_params else cfg.t0_params,
                      y0_params={**default_scenario_params(cfg.y0_scenario), **y0_params}
                      if "y0_scenario" in fields or y0_params else cfg.y0_params)
    elif "t0_scenario" in fields or "y0_scenario" in fields:
        cfg = replace(cfg, t0_params=default_scenario_params(cfg.t0_scenario),
                      y0_params=default_scenario_params(cfg.y0_scenario))
    validate_config(cfg)
    return cfg


def default_scenario_params(scenario: str) -> dict:
    if scenario == "gaussian":
        return {"amplitude": 1.0, "sigma": 5.0}
    if scenario == "plateau":
        return {"amplitude": 1.0}
    return {"amplitude": 1.0}


def validate_config(cfg: RunConfig):
    """Check every field against the module preconditions it will feed."""
    try:
        cfg.grid()
    except ValueError as exc:
        raise ConfigError(f"[grid]: {exc}")
    try:
        cfg.params()
    except ValueError as exc:
        raise ConfigError(f"[model]: {exc}")
    try:
        if cfg.scheme == "picard":
            cfg.picard_config()
        else:
            cfg.step_scheme()
        cfg.picard_config()
    except ValueError as exc:
        raise ConfigError(f"[scheme]: {exc}")
    if not (np.isfinite(cfg.horizon) and cfg.horizon > 0):
        raise ConfigError(f"[run]: horizon must be positive, got {cfg.horizon}")
    if cfg.record_every < 1:
        raise ConfigError(f"[run]: record_every must be >= 1, got {cfg.record_every}")
    for ts in cfg.snapshot_times:
        if not (0 <= ts <= cfg.horizon):
            raise ConfigError(f"[run]: snapshot time {ts} outside [0, horizon]")
    try:
        cfg.initial_fields()
    except ValueError as exc:
        raise ConfigError(f"[initial]: {exc}")
    if cfg.eps0 is not None and cfg.eps0 <= 0:
        raise ConfigError(f"[audit]: eps0 must be positive, got {cfg.eps0}")
    if not (0 < cfg.a_low < cfg.a_high):
        raise ConfigError(f"[ignite]: need 0 < a_low < a_high, got {cfg.a_low}, {cfg.a_high}")
    if cfg.ratio_tol <= 1.0:
        raise ConfigError(f"[ignite]: ratio_tol must exceed 1, got {cfg.ratio_tol}")
    if cfg.budget < 2:
        raise ConfigError(f"[ignite]: budget must be >= 2, got {cfg.budget}")


def config_echo(cfg: RunConfig) -> str:
    """Effective configuration, serialized so that re-parsing reproduces it."""
    lines = [
        "[grid]",
        f"d = {cfg.d}",
        f"n = {cfg.n}",
        f"L = {cfg.extent:.17g}",
        "",
        "[model]",
        f"lambda = {cfg.lam:.17g}",
        f"beta = {cfg.beta:.17g}",
        "",
        "[scheme]",
        f"kind = {cfg.scheme}",
        f"dt = {cfg.dt:.17g}",
        f"slab_length = {cfg.slab_length:.17g}",
        f"nodes = {cfg.nodes}",
        f"tol = {cfg.tol:.17g}",
        f"max_iter = {cfg.max_iter}",
        "",
        "[run]",
        f"horizon = {cfg.horizon:.17g}",
        f"record_every = {cfg.record_every}",
        f"snapshot_times = {', '.join(f'{t:.17g}' for t in cfg.snapshot_times)}",
        f"seed = {cfg.seed}",
        f"output = {cfg.output}",
        "",
        "[initial]",
        f"t0_scenario = {cfg.t0_scenario}",
    ]
    lines += [f"t0_{k} = {v:.17g}" for k, v in sorted(cfg.t0_params.items())]
    lines.append(f"y0_scenario = {cfg.y0_scenario}")
    lines += [f"y0_{k} = {v:.17g}" for k, v in sorted(cfg.y0_params.items())]
    lines += [
        "",
        "[audit]",
        f"bounds = {', '.join(cfg.bounds)}",
    ]
    if cfg.eps0 is not None:
        lines.append(f"eps0 = {cfg.eps0:.17g}")
    lines += [
        "",
        "[ignite]",
        f"a_low = {cfg.a_low:.17g}",
        f"a_high = {cfg.a_high:.17g}",
        f"ratio_tol = {cfg.ratio_tol:.17g}",
        f"budget = {cfg.budget}",
    ]
    return "\n".join(lines) + "\n"
