"""Pointwise hot-loop kernels with a numba backend and a pure-numpy fallback.

The reaction rate and the exponential fuel update are evaluated at every
grid point on every time step, so they get dedicated kernels. The backend
is chosen once at import time from the ``EMBERFLOW_BACKEND`` environment
variable ("numba" or "numpy"); when unset, numba is used if importable and
numpy otherwise. Both backends implement identical arithmetic and agree to
a few ulps, but bit-identity is only guaranteed within one backend.

Spectral work (FFTs, per-mode multipliers) stays in numpy throughout the
package; only pointwise loops live here.
"""

import math
import os
import warnings

import numpy as np


def _arrhenius_numpy(temp):
    out = np.zeros_like(temp)
    hot = temp > 0.0
    out[hot] = np.exp(-1.0 / temp[hot])
    return out


def _arrhenius_derivative_numpy(temp):
    out = np.zeros_like(temp)
    hot = temp > 0.0
    t = temp[hot]
    out[hot] = np.exp(-1.0 / t) / (t * t)
    return out


def _fuel_decay_numpy(fuel, rate, beta_dt):
    return fuel * np.exp(-beta_dt * rate)


def _fuel_decay_average_numpy(fuel, rate_a, rate_b, beta_dt):
    return fuel * np.exp(-0.5 * beta_dt * (rate_a + rate_b))


_NUMPY_IMPLS = {
    "arrhenius": _arrhenius_numpy,
    "arrhenius_derivative": _arrhenius_derivative_numpy,
    "fuel_decay": _fuel_decay_numpy,
    "fuel_decay_average": _fuel_decay_average_numpy,
}

try:
    from numba import njit

    _NUMBA_IMPORTABLE = True
except ImportError:  # pragma: no cover - exercised only without numba installed
    _NUMBA_IMPORTABLE = False

if _NUMBA_IMPORTABLE:

    @njit(cache=True)
    def _arrhenius_flat(temp, out):
        for i in range(temp.size):
            t = temp[i]
            out[i] = math.exp(-1.0 / t) if t > 0.0 else 0.0

    @njit(cache=True)
    def _arrhenius_derivative_flat(temp, out):
        for i in range(temp.size):
            t = temp[i]
            out[i] = math.exp(-1.0 / t) / (t * t) if t > 0.0 else 0.0

    @njit(cache=True)
    def _fuel_decay_flat(fuel, rate, beta_dt, out):
        for i in range(fuel.size):
            out[i] = fuel[i] * math.exp(-beta_dt * rate[i])

    @njit(cache=True)
    def _fuel_decay_average_flat(fuel, rate_a, rate_b, beta_dt, out):
        for i in range(fuel.size):
            out[i] = fuel[i] * math.exp(-0.5 * beta_dt * (rate_a[i] + rate_b[i]))

    def _arrhenius_numba(temp):
        temp = np.ascontiguousarray(temp)
        out = np.empty_like(temp)
        _arrhenius_flat(temp.reshape(-1), out.reshape(-1))
        return out

    def _arrhenius_derivative_numba(temp):
        temp = np.ascontiguousarray(temp)
        out = np.empty_like(temp)
        _arrhenius_derivative_flat(temp.reshape(-1), out.reshape(-1))
        return out

    def _fuel_decay_numba(fuel, rate, beta_dt):
        fuel = np.ascontiguousarray(fuel)
        out = np.empty_like(fuel)
        _fuel_decay_flat(fuel.reshape(-1), np.ascontiguousarray(rate).reshape(-1),
                         float(beta_dt), out.reshape(-1))
        return out

    def _fuel_decay_average_numba(fuel, rate_a, rate_b, beta_dt):
        fuel = np.ascontiguousarray(fuel)
        out = np.empty_like(fuel)
        _fuel_decay_average_flat(fuel.reshape(-1),
                                 np.ascontiguousarray(rate_a).reshape(-1),
                                 np.ascontiguousarray(rate_b).reshape(-1),
                                 float(beta_dt), out.reshape(-1))
        return out

    _NUMBA_IMPLS = {
        "arrhenius": _arrhenius_numba,
        "arrhenius_derivative": _arrhenius_derivative_numba,
        "fuel_decay": _fuel_decay_numba,
        "fuel_decay_average": _fuel_decay_average_numba,
    }


def available_backends():
    """Backends usable in this process."""
    return ("numba", "numpy") if _NUMBA_IMPORTABLE else ("numpy",)


def backend_impls(name):
    """Kernel set for one named backend (used by benchmarks and tests)."""
    if name == "numpy":
        return dict(_NUMPY_IMPLS)
    if name == "numba":
        if not _NUMBA_IMPORTABLE:
            raise RuntimeError("numba backend requested but numba is not importable")
        return dict(_NUMBA_IMPLS)
    raise ValueError(f"unknown kernel backend {name!r}")


_requested = os.environ.get("EMBERFLOW_BACKEND", "").strip().lower()
if _requested and _requested not in ("numba", "numpy"):
    raise ValueError(
        f"EMBERFLOW_BACKEND={_requested!r} is not recognized; use 'numba' or 'numpy'")

if _requested == "numpy":
    ACTIVE_BACKEND = "numpy"
elif _requested == "numba" and not _NUMBA_IMPORTABLE:
    warnings.warn("EMBERFLOW_BACKEND=numba but numba is not importable; "
                  "falling back to the numpy kernels")
    ACTIVE_BACKEND = "numpy"
else:
    ACTIVE_BACKEND = "numba" if _NUMBA_IMPORTABLE else "numpy"

_active = backend_impls(ACTIVE_BACKEND)
arrhenius = _active["arrhenius"]
arrhenius_derivative = _active["arrhenius_derivative"]
fuel_decay = _active["fuel_decay"]
fuel_decay_average = _active["fuel_decay_average"]
