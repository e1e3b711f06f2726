"""Time evolution of the coupled temperature/fuel system.

Two independent integrators approximate the same mild solution: exponential
(Duhamel-quadrature) stepping, and Picard fixed-point iteration on short
time slabs. Both apply the exact spectral semigroup between quadrature
nodes, and both keep the fuel update in exponential form
Y <- Y * exp(-beta * integral of r(T)), so Y >= 0 and pointwise fuel
monotonicity hold exactly in floating point (multiplying by a factor <= 1
can never increase a value under round-to-nearest).
"""

import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .analysis import grad_sup, lp_norm
from .grid import (ScalarField, SystemState, boundary_mass_fraction, field_integral,
                   forward_transform, inverse_transform,
                   BOUNDARY_CONTAMINATION_THRESHOLD)
from .reaction import ModelParams
from .semigroup import HeatPropagator

TRAJECTORY_COLUMNS = ("l1_T", "l2_T", "linf_T", "gradsup_T",
                      "l1_Y", "linf_Y", "minY", "enthalpy", "boundary_frac")


class NonFiniteFieldError(RuntimeError):
    """A field went non-finite mid-run.

    The model itself precludes finite-time blow-up, so this always indicates
    a numerical defect (bad parameters, too-coarse resolution), never a model
    behavior.
    """


class PicardDivergenceError(RuntimeError):
    """The fixed-point iteration failed to contract or to converge."""


@dataclass(frozen=True)
class StepScheme:
    """Exponential stepping scheme: kind in {'etd1', 'etd2'} and step size."""

    kind: str
    dt: float

    def __post_init__(self):
        if self.kind not in ("etd1", "etd2"):
            raise ValueError(f"scheme kind must be 'etd1' or 'etd2', got {self.kind!r}")
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"step size must be positive, got {self.dt}")


@dataclass(frozen=True)
class PicardConfig:
    """Fixed-point solver settings: slab length, nodes per slab, stopping rule."""

    slab_length: float = 0.5
    quadrature_nodes: int = 9
    tol: float = 1e-10
    max_iter: int = 60

    def __post_init__(self):
        if not (np.isfinite(self.slab_length) and self.slab_length > 0):
            raise ValueError(f"slab length must be positive, got {self.slab_length}")
        if self.quadrature_nodes < 2:
            raise ValueError(f"need at least 2 quadrature nodes, got {self.quadrature_nodes}")
        if not (np.isfinite(self.tol) and self.tol > 0):
            raise ValueError(f"tolerance must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ValueError(f"iteration cap must be >= 1, got {self.max_iter}")


@dataclass
class SlabRecord:
    """Per-slab fixed-point diagnostics."""

    start: float
    length: float
    iterations: int
    rho: float          # worst observed contraction factor (0 if converged immediately)
    halvings: int       # slab halvings that were needed before this slab ran


class TrajectoryRecord:
    """Time series of norms and conserved quantities, with optional snapshots.

    Recorded columns, in order: l1_T, l2_T, linf_T, gradsup_T, l1_Y, linf_Y,
    minY, enthalpy, boundary_frac. Enthalpy is the signed integral of
    T + Y/beta and is NaN when beta = 0. Times are strictly increasing and
    all recorded values except enthalpy-at-beta-0 are finite.
    """

    def __init__(self, meta: dict):
        self.meta = dict(meta)
        self.times: list = []
        self.data = {name: [] for name in TRAJECTORY_COLUMNS}
        self.snapshots: list = []       # list of SystemState
        self.slabs: list = []           # list of SlabRecord (Picard runs only)
        self.initial_state = None
        self.final_state = None

    def append(self, t: float, **values):
        if self.times and t <= self.times[-1]:
            raise ValueError(f"record times must be strictly increasing ({t} after {self.times[-1]})")
        if set(values) != set(TRAJECTORY_COLUMNS):
            missing = set(TRAJECTORY_COLUMNS) ^ set(values)
            raise ValueError(f"column mismatch: {sorted(missing)}")
        for name, v in values.items():
            if name != "enthalpy" and not np.isfinite(v):
                raise ValueError(f"recorded {name} at t={t} is not finite: {v}")
            self.data[name].append(float(v))
        self.times.append(float(t))

    def column(self, name) -> np.ndarray:
        if name == "t":
            return np.asarray(self.times)
        return np.asarray(self.data[name])

    def add_snapshot(self, state: SystemState):
        self.snapshots.append(state)

    @property
    def max_boundary_fraction(self) -> float:
        return max(self.data["boundary_frac"], default=0.0)

    @property
    def contaminated(self) -> bool:
        return self.max_boundary_fraction > BOUNDARY_CONTAMINATION_THRESHOLD


def _measurements(state: SystemState, params: ModelParams) -> dict:
    T, Y = state.temperature, state.fuel
    if params.beta > 0:
        enthalpy = field_integral(T) + field_integral(Y) / params.beta
    else:
        enthalpy = float("nan")
    return dict(
        l1_T=lp_norm(T, 1), l2_T=lp_norm(T, 2), linf_T=lp_norm(T, np.inf),
        gradsup_T=grad_sup(T),
        l1_Y=lp_norm(Y, 1), linf_Y=lp_norm(Y, np.inf), minY=float(Y.values.min()),
        enthalpy=enthalpy, boundary_frac=boundary_mass_fraction(T),
    )


def _check_match(state: SystemState, params: ModelParams, prop: HeatPropagator):
    if prop.grid != state.grid:
        raise ValueError("propagator grid does not match the state grid")
    if prop.lam != params.lam:
        raise ValueError(f"propagator damping {prop.lam} does not match parameters {params.lam}")


def step_etd1(state: SystemState, params: ModelParams, prop: HeatPropagator) -> SystemState:
    """One first-order exponential step (left-endpoint Duhamel quadrature).

    T <- inv(E * T_hat + phi1 * F_hat) with F = Y*r(T) frozen at the step
    start; Y <- Y*exp(-beta dt r(T_start)), which is exact for frozen T.
    """
    _check_match(state, params, prop)
    dt = prop.dt
    rate0 = _kernels.arrhenius(state.temperature.values)
    source0 = state.fuel.values * rate0
    t_hat = np.fft.fftn(state.temperature.values)
    f_hat = np.fft.fftn(source0)
    new_temp = np.fft.ifftn(prop.decay_multipliers * t_hat
                            + prop.duhamel_multipliers * f_hat).real
    new_fuel = _kernels.fuel_decay(state.fuel.values, rate0, params.beta * dt)
    return SystemState(state.temperature.with_values(new_temp),
                       state.fuel.with_values(new_fuel), state.time + dt)


def step_etd2(state: SystemState, params: ModelParams, prop: HeatPropagator) -> SystemState:
    """One second-order exponential step (predictor-corrector).

    The predictor is the first-order step; the corrector adds the
    linear-interpolation weight applied to (F_pred - F_start). The fuel
    exponent uses the trapezoidal average of the start and predicted rates.
    """
    _check_match(state, params, prop)
    dt = prop.dt
    rate0 = _kernels.arrhenius(state.temperature.values)
    source0_hat = np.fft.fftn(state.fuel.values * rate0)
    t_hat = np.fft.fftn(state.temperature.values)

    pred_hat = prop.decay_multipliers * t_hat + prop.duhamel_multipliers * source0_hat
    pred_temp = np.fft.ifftn(pred_hat).real
    pred_fuel = _kernels.fuel_decay(state.fuel.values, rate0, params.beta * dt)
    rate_pred = _kernels.arrhenius(pred_temp)

    sourcep_hat = np.fft.fftn(pred_fuel * rate_pred)
    new_temp = np.fft.ifftn(pred_hat + prop.corrector_multipliers
                            * (sourcep_hat - source0_hat)).real
    new_fuel = _kernels.fuel_decay_average(state.fuel.values, rate0, rate_pred,
                                           params.beta * dt)
    return SystemState(state.temperature.with_values(new_temp),
                       state.fuel.with_values(new_fuel), state.time + dt)


_STEPPERS = {"etd1": step_etd1, "etd2": step_etd2}


def _resolve_steps(horizon: float, dt: float) -> int:
    n_steps = int(round(horizon / dt))
    if n_steps < 1 or abs(n_steps * dt - horizon) > 1e-9 * max(1.0, horizon):
        raise ValueError(f"horizon {horizon} is not a positive multiple of dt {dt}")
    return n_steps


def run_simulation(T0: ScalarField, Y0: ScalarField, params: ModelParams,
                   scheme: StepScheme, horizon: float, record_every: int = 1,
                   snapshot_times=()) -> TrajectoryRecord:
    """Step to the horizon, recording norms every ``record_every`` steps.

    Snapshots are taken at the steps nearest the requested times. Fails fast
    if any field becomes non-finite. Boundary contamination above the
    threshold raises a warning, not a failure.
    """
    if horizon <= 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    if record_every < 1:
        raise ValueError(f"record_every must be >= 1, got {record_every}")
    if T0.grid != Y0.grid:
        raise ValueError("initial fields must share one grid")
    n_steps = _resolve_steps(horizon, scheme.dt)
    stepper = _STEPPERS[scheme.kind]
    prop = HeatPropagator(T0.grid, params.lam, scheme.dt)

    record = TrajectoryRecord(meta=dict(grid=T0.grid, params=params, scheme=scheme.kind,
                                        dt=scheme.dt, horizon=horizon))
    snap_steps = sorted({min(max(int(round(ts / scheme.dt)), 0), n_steps)
                         for ts in snapshot_times})

    state = SystemState(T0, Y0, 0.0)
    record.initial_state = state
    record.append(0.0, **_measurements(state, params))
    if snap_steps and snap_steps[0] == 0:
        record.add_snapshot(state)

    for m in range(1, n_steps + 1):
        try:
            state = stepper(state, params, prop)
        except ValueError as exc:
            raise NonFiniteFieldError(
                f"step to t={m * scheme.dt:g} produced a non-finite field "
                f"(numerical defect, not a model behavior): {exc}") from exc
        state = replace(state, time=m * scheme.dt)   # keep times exact multiples
        if m % record_every == 0 or m == n_steps:
            record.append(state.time, **_measurements(state, params))
        if m in snap_steps:
            record.add_snapshot(state)

    record.final_state = state
    if record.contaminated:
        warnings.warn(f"boundary contamination reached {record.max_boundary_fraction:.3e} "
                      f"(threshold {BOUNDARY_CONTAMINATION_THRESHOLD:g}); "
                      "periodic images may pollute this run")
    return record


def _picard_slab(grid, params, cfg, temp_start, fuel_start, length):
    """One fixed-point slab; returns (converged, payload).

    payload is (T_nodes, Y_nodes, iterations, rho) on success or a
    diagnostic string on non-contraction.
    """
    nodes = cfg.quadrature_nodes
    delta = length / (nodes - 1)
    c = grid.squared_wavenumbers() + params.lam
    gap = [np.exp(-c * (g * delta)) for g in range(nodes)]

    start_hat = np.fft.fftn(temp_start)
    linear = [np.fft.ifftn(gap[m] * start_hat).real for m in range(nodes)]

    temp = [arr.copy() for arr in linear]
    fuel = [fuel_start.copy() for _ in range(nodes)]

    prev_diff = None
    rho_worst = 0.0
    bad_streak = 0
    for iteration in range(1, cfg.max_iter + 1):
        rates = [_kernels.arrhenius(temp[m]) for m in range(nodes)]
        source_hats = [np.fft.fftn(fuel[m] * rates[m]) for m in range(nodes)]

        new_temp = [temp_start.copy()]
        for m in range(1, nodes):
            acc = 0.5 * gap[m] * source_hats[0] + 0.5 * source_hats[m]
            for i in range(1, m):
                acc = acc + gap[m - i] * source_hats[i]
            new_temp.append(linear[m] + delta * np.fft.ifftn(acc).real)

        new_fuel = [fuel_start.copy()]
        cumulative = np.zeros_like(fuel_start)
        for m in range(1, nodes):
            cumulative = cumulative + 0.5 * delta * (rates[m - 1] + rates[m])
            new_fuel.append(_kernels.fuel_decay(fuel_start, cumulative, params.beta))

        diff = 0.0
        for m in range(nodes):
            diff = max(diff,
                       float(np.abs(new_temp[m] - temp[m]).max()),
                       float(np.abs(new_fuel[m] - fuel[m]).max()))
        temp, fuel = new_temp, new_fuel

        if diff < cfg.tol:
            return True, (temp, fuel, iteration, rho_worst)

        if prev_diff is not None and prev_diff > 0:
            rho = diff / prev_diff
            rho_worst = max(rho_worst, rho)
            bad_streak = bad_streak + 1 if rho >= 1.0 else 0
            if bad_streak >= 3:
                return False, (f"no contraction: ratio {rho:.3g} for {bad_streak} "
                               f"consecutive iterations at slab length {length:g}")
        prev_diff = diff

    raise PicardDivergenceError(
        f"fixed-point iteration did not reach tol={cfg.tol:g} within "
        f"{cfg.max_iter} iterations (last update {prev_diff:.3g}, slab length {length:g})")


def picard_solve(T0: ScalarField, Y0: ScalarField, params: ModelParams,
                 cfg: PicardConfig, horizon: float, snapshot_times=()) -> TrajectoryRecord:
    """Solve by fixed-point iteration of the integral-equation map on time slabs.

    Each slab keeps candidate trajectories at uniformly spaced nodes, applies
    the damped heat flow to the slab-start data, adds a trapezoidal
    quadrature of the flowed reaction source, and exponentiates the
    accumulated rate integral for the fuel. Slabs are halved (up to 10
    times) when the iteration fails to contract; the worst observed
    contraction factor per slab is recorded.
    """
    if T0.grid != Y0.grid:
        raise ValueError("initial fields must share one grid")
    if horizon <= 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    n_slabs = int(round(horizon / cfg.slab_length))
    if n_slabs < 1 or abs(n_slabs * cfg.slab_length - horizon) > 1e-9 * max(1.0, horizon):
        raise ValueError(f"horizon {horizon} is not a positive multiple of the "
                         f"slab length {cfg.slab_length}")

    grid = T0.grid
    node_dt = cfg.slab_length / (cfg.quadrature_nodes - 1)
    record = TrajectoryRecord(meta=dict(grid=grid, params=params, scheme="picard",
                                        dt=node_dt, horizon=horizon,
                                        slab_length=cfg.slab_length,
                                        quadrature_nodes=cfg.quadrature_nodes))
    snapshot_queue = sorted(float(ts) for ts in snapshot_times)

    state = SystemState(T0, Y0, 0.0)
    record.initial_state = state
    record.append(0.0, **_measurements(state, params))

    def take_snapshots(upto_time, node_states):
        # snapshot at the nearest node at or before the requested time
        while snapshot_queue and snapshot_queue[0] <= upto_time + 1e-12:
            target = snapshot_queue.pop(0)
            nearest = min(node_states, key=lambda s: abs(s.time - target))
            record.add_snapshot(nearest)

    if snapshot_queue and snapshot_queue[0] <= 1e-12:
        snapshot_queue.pop(0)
        record.add_snapshot(state)

    t = 0.0
    length = cfg.slab_length
    halvings = 0
    temp_now, fuel_now = T0.values, Y0.values
    while t < horizon - 1e-12:
        slab_len = min(length, horizon - t)
        converged, payload = _picard_slab(grid, params, cfg, temp_now, fuel_now, slab_len)
        if not converged:
            halvings += 1
            if halvings > 10:
                raise PicardDivergenceError(
                    f"slab at t={t:g} still fails to contract after 10 halvings: {payload}")
            length *= 0.5
            continue

        temp_nodes, fuel_nodes, iterations, rho = payload
        record.slabs.append(SlabRecord(start=t, length=slab_len,
                                       iterations=iterations, rho=rho, halvings=halvings))
        delta = slab_len / (cfg.quadrature_nodes - 1)
        node_states = []
        for m in range(1, cfg.quadrature_nodes):
            s = SystemState(ScalarField(grid, temp_nodes[m]),
                            ScalarField(grid, fuel_nodes[m]), t + m * delta)
            node_states.append(s)
            record.append(s.time, **_measurements(s, params))
        take_snapshots(t + slab_len, node_states)
        state = node_states[-1]
        temp_now, fuel_now = state.temperature.values, state.fuel.values
        t += slab_len

    record.final_state = state
    if record.contaminated:
        warnings.warn(f"boundary contamination reached {record.max_boundary_fraction:.3e}; "
                      "periodic images may pollute this run")
    return record


def constant_ode_reference(temp0: float, fuel0: float, params: ModelParams, times):
    """High-accuracy reference for spatially uniform states.

    Integrates T' = -lam*T + Y*r(T), Y' = -beta*Y*r(T) with an adaptive
    Runge-Kutta method (DOP853, rtol 1e-12), independent of the spectral
    integrators. Returns (T(t), Y(t)) arrays over ``times``.
    """
    from scipy.integrate import solve_ivp

    from .reaction import arrhenius_rate

    times = np.atleast_1d(np.asarray(times, dtype=np.float64))

    def rhs(_t, u):
        temp, fuel = u
        r = arrhenius_rate(temp)
        return [-params.lam * temp + fuel * r, -params.beta * fuel * r]

    sol = solve_ivp(rhs, (0.0, float(times[-1])), [float(temp0), float(fuel0)],
                    method="DOP853", rtol=1e-12, atol=1e-14, t_eval=times)
    if not sol.success:
        raise RuntimeError(f"reference ODE solve failed: {sol.message}")
    return sol.y[0], sol.y[1]
