"""Periodic uniform grids, scalar fields over them, and discrete Fourier transforms.

The whole-space problem is truncated to the periodic box [0, L)^d with
d in {1, 2}. Validity of the truncation is monitored, not assumed: see
:func:`boundary_mass_fraction`, which every simulation records so that runs
with non-negligible periodic-image contamination can be flagged.
"""

from dataclasses import dataclass

import numpy as np

BOUNDARY_MARGIN_FRACTION = 0.125   # boundary zone width as a fraction of L, per axis
BOUNDARY_CONTAMINATION_THRESHOLD = 1e-6


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid on [0, L)^d.

    Parameters
    ----------
    d : int
        Spatial dimension, 1 or 2.
    n : int
        Points per axis; a power of two, at least 8.
    extent : float
        Box side length L > 0.

    Nodes sit at i*h per axis (left-aligned), h = L/n. Because n is a power
    of two, ``spacing * n == extent`` holds exactly in floating point.
    """

    d: int
    n: int
    extent: float

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError(f"spatial dimension must be 1 or 2, got {self.d}")
        if self.n < 8 or (self.n & (self.n - 1)) != 0:
            raise ValueError(f"points per axis must be a power of two >= 8, got {self.n}")
        if not (np.isfinite(self.extent) and self.extent > 0):
            raise ValueError(f"box side length must be positive and finite, got {self.extent}")

    @property
    def spacing(self) -> float:
        """Grid spacing h = L/n (derived, never stored)."""
        return self.extent / self.n

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.d

    @property
    def npoints(self) -> int:
        return self.n ** self.d

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.d

    def axis_coordinates(self) -> np.ndarray:
        """Node positions i*h along one axis."""
        return np.arange(self.n) * self.spacing

    def coordinate_arrays(self) -> tuple:
        """Full coordinate arrays, one per axis, each shaped like a field."""
        axes = (self.axis_coordinates(),) * self.d
        return tuple(np.meshgrid(*axes, indexing="ij")) if self.d > 1 else (axes[0].copy(),)

    def wavenumber_axes(self) -> tuple:
        """Per-axis wavenumbers k_j = 2*pi*j/L with j in [-n/2, n/2)."""
        k = 2.0 * np.pi * np.fft.fftfreq(self.n, d=1.0 / self.n) / self.extent
        return (k,) * self.d

    def squared_wavenumbers(self) -> np.ndarray:
        """|k|^2 on the full mode lattice, shaped like a field."""
        axes = self.wavenumber_axes()
        if self.d == 1:
            return axes[0] ** 2
        kx, ky = np.meshgrid(axes[0], axes[1], indexing="ij")
        return kx ** 2 + ky ** 2


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Real values sampled on a periodic grid; immutable once constructed."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64, order="C", copy=True)
        if arr.shape != self.grid.shape:
            raise ValueError(f"values shape {arr.shape} does not match grid shape {self.grid.shape}")
        if not np.isfinite(arr).all():
            bad = int(np.flatnonzero(~np.isfinite(arr.reshape(-1)))[0])
            raise ValueError(f"field values must be finite; flat index {bad} is {arr.reshape(-1)[bad]}")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    def with_values(self, values) -> "ScalarField":
        """New field on the same grid."""
        return ScalarField(self.grid, values)

    @property
    def flat(self) -> np.ndarray:
        """Row-major flat view of the samples (length n^d)."""
        return self.values.reshape(-1)


@dataclass(frozen=True, eq=False)
class SystemState:
    """The evolving pair (temperature T, fuel density Y) at time t."""

    temperature: ScalarField
    fuel: ScalarField
    time: float

    def __post_init__(self):
        if self.temperature.grid != self.fuel.grid:
            raise ValueError("temperature and fuel must share one grid")
        if self.time < 0:
            raise ValueError(f"time must be nonnegative, got {self.time}")
        if self.fuel.values.min() < 0:
            raise ValueError("fuel density must be nonnegative everywhere")

    @property
    def grid(self) -> GridSpec:
        return self.temperature.grid


def make_field(grid: GridSpec, generator) -> ScalarField:
    """Sample a pointwise function of position onto the grid.

    ``generator`` receives one coordinate array per axis (d arrays for
    d dimensions) and must evaluate elementwise, e.g. ``lambda x: np.sin(x)``
    or ``lambda x, y: x * y``. Non-finite output is rejected with a message
    naming the offending coordinate.
    """
    coords = grid.coordinate_arrays()
    values = np.asarray(generator(*coords), dtype=np.float64)
    if values.shape != grid.shape:
        values = np.broadcast_to(values, grid.shape)
    finite = np.isfinite(values)
    if not finite.all():
        idx = np.unravel_index(int(np.flatnonzero(~finite.reshape(-1))[0]), grid.shape)
        point = tuple(float(c[idx]) for c in coords)
        raise ValueError(f"generator returned non-finite value at x = {point}")
    return ScalarField(grid, values)


def _smooth_ramp(s: np.ndarray) -> np.ndarray:
    # C-infinity transition: 0 for s <= 0, 1 for s >= 1.
    out = np.zeros_like(s)
    out[s >= 1.0] = 1.0
    mid = (s > 0.0) & (s < 1.0)
    sm = s[mid]
    rise = np.exp(-1.0 / sm)
    fall = np.exp(-1.0 / (1.0 - sm))
    out[mid] = rise / (rise + fall)
    return out


def _radius_squared(grid: GridSpec, center) -> np.ndarray:
    coords = grid.coordinate_arrays()
    if np.isscalar(center) or center is None:
        center = (grid.extent / 2.0,) * grid.d if center is None else (float(center),) * grid.d
    return sum((c - c0) ** 2 for c, c0 in zip(coords, center))


def initial_data_library(grid: GridSpec, name: str, **params) -> ScalarField:
    """Construct a named initial-data scenario.

    Scenarios
    ---------
    uniform : constant field of the given ``amplitude`` (the standard fuel bed).
    gaussian : isotropic bump ``amplitude * exp(-|x-center|^2 / (2 sigma^2))``.
    plateau : compactly supported C-infinity bump of the given ``amplitude``
        over a subinterval of full width ``width``, with mollified edges of
        length ``ramp`` (smooth, so spectral ringing stays controlled). In
        two dimensions the per-axis profiles multiply.
    """
    known = ("uniform", "gaussian", "plateau")
    if name not in known:
        raise ValueError(f"unknown initial-data scenario {name!r}; known: {', '.join(known)}")

    amplitude = float(params.pop("amplitude", 1.0))
    if not np.isfinite(amplitude) or amplitude < 0:
        raise ValueError(f"amplitude must be finite and >= 0, got {amplitude}")

    if name == "uniform":
        _reject_extra(name, params)
        return ScalarField(grid, np.full(grid.shape, amplitude))

    if name == "gaussian":
        sigma = float(params.pop("sigma", 1.0))
        center = params.pop("center", None)
        _reject_extra(name, params)
        if not (np.isfinite(sigma) and sigma > 0):
            raise ValueError(f"gaussian sigma must be positive, got {sigma}")
        r2 = _radius_squared(grid, center)
        return ScalarField(grid, amplitude * np.exp(-r2 / (2.0 * sigma * sigma)))

    width = float(params.pop("width", grid.extent / 4.0))
    ramp = float(params.pop("ramp", grid.extent / 32.0))
    center = params.pop("center", None)
    _reject_extra(name, params)
    if not (np.isfinite(width) and width > 0):
        raise ValueError(f"plateau width must be positive, got {width}")
    if not (np.isfinite(ramp) and ramp > 0):
        raise ValueError(f"plateau ramp must be positive, got {ramp}")
    coords = grid.coordinate_arrays()
    if center is None:
        center = (grid.extent / 2.0,) * grid.d
    elif np.isscalar(center):
        center = (float(center),) * grid.d
    profile = np.ones(grid.shape)
    for c, c0 in zip(coords, center):
        left = c0 - width / 2.0
        right = c0 + width / 2.0
        profile = profile * _smooth_ramp((c - (left - ramp)) / ramp)
        profile = profile * _smooth_ramp(((right + ramp) - c) / ramp)
    return ScalarField(grid, amplitude * profile)


def _reject_extra(name, params):
    if params:
        raise ValueError(f"unknown parameter(s) for scenario {name!r}: {sorted(params)}")


def forward_transform(field: ScalarField) -> np.ndarray:
    """Discrete Fourier transform of the samples (numpy fftn convention).

    The zero-mode coefficient equals n^d times the field mean; other modules
    rely on that normalization.
    """
    return np.fft.fftn(field.values)


def inverse_transform(grid: GridSpec, modes: np.ndarray) -> ScalarField:
    """Inverse transform back to a real field; rejects size mismatches."""
    modes = np.asarray(modes)
    if modes.shape != grid.shape:
        raise ValueError(f"mode array shape {modes.shape} does not match grid shape {grid.shape}")
    return ScalarField(grid, np.fft.ifftn(modes).real)


def field_integral(field: ScalarField) -> float:
    """Signed integral h^d * sum(values)."""
    return field.grid.cell_volume * float(field.values.sum())


def field_mean(field: ScalarField) -> float:
    return float(field.values.mean())


def boundary_mass_fraction(field: ScalarField,
                           margin_fraction: float = BOUNDARY_MARGIN_FRACTION) -> float:
    """Fraction of the field's absolute mass within margin_fraction*L of the boundary.

    Proxy for periodic-image contamination; simulations flag values above
    ``BOUNDARY_CONTAMINATION_THRESHOLD``. Returns 0 for an identically zero
    field.
    """
    g = field.grid
    margin = margin_fraction * g.extent
    axis = g.axis_coordinates()
    near_axis = (axis < margin) | (axis > g.extent - margin)
    if g.d == 1:
        near = near_axis
    else:
        near = near_axis[:, None] | near_axis[None, :]
    total = float(np.abs(field.values).sum())
    if total == 0.0:
        return 0.0
    return float(np.abs(field.values[near]).sum()) / total
