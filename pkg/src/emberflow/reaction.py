"""Arrhenius reaction rate, its derivative, and polynomial domination constants.

The rate is r(T) = exp(-1/T) for T > 0 and exactly 0 for T <= 0. It is
monotone nondecreasing with range [0, 1) on finite inputs. In 64-bit
arithmetic exp(-1/T) underflows to zero for 0 < T < 1/745.13 or so
(1/T beyond ~744.44 flushes past the smallest subnormal); we accept the
underflowed 0 there, which is consistent with both the T <= 0 branch and
the rate's vanishing to all orders at T = 0.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .grid import ScalarField

# Largest 1/T for which exp(-1/T) is still a nonzero subnormal.
UNDERFLOW_INVERSE_TEMPERATURE = 744.44


@dataclass(frozen=True)
class ModelParams:
    """Dimensionless model parameters: heat-loss rate and fuel consumption ratio."""

    lam: float
    beta: float

    def __post_init__(self):
        if not (np.isfinite(self.lam) and self.lam >= 0):
            raise ValueError(f"heat-loss rate must be finite and >= 0, got {self.lam}")
        if not (np.isfinite(self.beta) and self.beta >= 0):
            raise ValueError(f"fuel consumption ratio must be finite and >= 0, got {self.beta}")


def arrhenius_rate(temperature):
    """r(T) = exp(-1/T) for T > 0, else 0. Accepts scalars or arrays."""
    if np.isscalar(temperature):
        t = float(temperature)
        return math.exp(-1.0 / t) if t > 0.0 else 0.0
    return _kernels.arrhenius(np.asarray(temperature, dtype=np.float64))


def arrhenius_rate_derivative(temperature):
    """r'(T) = exp(-1/T)/T^2 for T > 0, else 0. Accepts scalars or arrays."""
    if np.isscalar(temperature):
        t = float(temperature)
        return math.exp(-1.0 / t) / (t * t) if t > 0.0 else 0.0
    return _kernels.arrhenius_derivative(np.asarray(temperature, dtype=np.float64))


def rate_field(temperature: ScalarField) -> ScalarField:
    """Pointwise reaction rate of a temperature field."""
    return temperature.with_values(_kernels.arrhenius(temperature.values))


def poly_domination_constant(p: int) -> float:
    """Smallest C with r(T) <= C * T**p on [0, 1].

    For p >= 1 the maximum of r(T)/T^p sits at the interior critical point
    T = 1/p with value (p/e)^p, or at the endpoint T = 1 with value 1/e;
    the two coincide at p = 1. For p = 0 the maximum of r itself is r(1) = 1/e.
    """
    if p < 0 or p != int(p):
        raise ValueError(f"power must be a nonnegative integer, got {p}")
    p = int(p)
    if p == 0:
        return math.exp(-1.0)
    return max((p / math.e) ** p, math.exp(-1.0))
