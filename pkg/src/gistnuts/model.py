"""Target distributions given by a potential energy and its gradient.

Potentials are negative log densities with additive normalization constants
dropped, so energy differences are constant-free.  The funnel stores the log
scale first: ``(omega, x_1, ..., x_d)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numba
import numpy as np

__all__ = [
    "TargetModel",
    "PhasePoint",
    "hamiltonian",
    "funnel_potential",
    "stdnormal_potential",
    "funnel",
    "std_normal",
    "get_model",
    "MODELS",
]


@dataclass(frozen=True)
class TargetModel:
    """A differentiable target on R^dim.

    ``potential`` and ``gradient`` take a float64 vector.  When both are numba
    jitted functions the samplers run compiled kernels; plain Python callables
    work too, only slower.
    """

    name: str
    dim: int
    potential: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be positive, got {self.dim}")


@dataclass(frozen=True)
class PhasePoint:
    position: np.ndarray
    momentum: np.ndarray

    def __post_init__(self):
        pos = np.ascontiguousarray(self.position, dtype=np.float64)
        mom = np.ascontiguousarray(self.momentum, dtype=np.float64)
        if pos.ndim != 1 or pos.shape != mom.shape:
            raise ValueError(
                f"position {pos.shape} and momentum {mom.shape} must be equal-length vectors"
            )
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "momentum", mom)

    @property
    def dim(self) -> int:
        return self.position.shape[0]


def check_dim(model: TargetModel, z: PhasePoint) -> None:
    if z.dim != model.dim:
        raise ValueError(f"phase point has dimension {z.dim}, model {model.name!r} has {model.dim}")


def hamiltonian(model: TargetModel, z: PhasePoint) -> float:
    """U(theta) + |rho|^2 / 2 under the identity mass matrix."""
    check_dim(model, z)
    return float(model.potential(z.position)) + 0.5 * float(z.momentum @ z.momentum)


# --- funnel -----------------------------------------------------------------


@numba.njit(cache=True)
def _funnel_potential(theta):
    omega = theta[0]
    scale = np.exp(-omega)
    sq = 0.0
    for i in range(1, theta.shape[0]):
        sq += theta[i] * theta[i]
    # x = 0 with exp overflow gives 0 * inf
    u = omega * omega / 18.0 + 0.5 * sq * scale + 0.5 * omega * (theta.shape[0] - 1)
    if np.isnan(u):
        return np.inf
    return u


@numba.njit(cache=True)
def _funnel_gradient(theta):
    omega = theta[0]
    scale = np.exp(-omega)
    g = np.empty_like(theta)
    sq = 0.0
    for i in range(1, theta.shape[0]):
        sq += theta[i] * theta[i]
        g[i] = theta[i] * scale
    g[0] = omega / 9.0 + 0.5 * (theta.shape[0] - 1) - 0.5 * sq * scale
    return g


def funnel_potential(omega: float, x) -> float:
    """omega^2/18 + sum_i (x_i^2 e^{-omega} / 2 + omega / 2).

    Returns +inf where ``e^{-omega}`` overflows.
    """
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    return float(_funnel_potential(np.concatenate(([float(omega)], x))))


def funnel(d: int) -> TargetModel:
    """Neal's funnel: omega ~ normal(0, 3), x_i | omega ~ normal(0, e^{omega/2}).

    ``d`` counts the x coordinates; the model dimension is d + 1.
    """
    if d < 1:
        raise ValueError(f"funnel needs at least one x coordinate, got d={d}")
    return TargetModel("funnel", d + 1, _funnel_potential, _funnel_gradient)


# --- standard normal ----------------------------------------------------------


@numba.njit(cache=True)
def _stdnormal_potential(theta):
    s = 0.0
    for i in range(theta.shape[0]):
        s += theta[i] * theta[i]
    return 0.5 * s


@numba.njit(cache=True)
def _stdnormal_gradient(theta):
    return theta.copy()


def stdnormal_potential(x) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    return float(_stdnormal_potential(x))


def std_normal(d: int) -> TargetModel:
    return TargetModel("std_normal", d, _stdnormal_potential, _stdnormal_gradient)


MODELS = {"funnel": funnel, "std_normal": std_normal}


def get_model(name: str, dim: int) -> TargetModel:
    """Look up a shipped model by name.  For the funnel ``dim`` is d."""
    try:
        factory = MODELS[name]
    except KeyError:
        raise ValueError(f"unknown model {name!r}; choose from {sorted(MODELS)}") from None
    return factory(dim)
