"""Leapfrog integration with running energy extrema."""

from __future__ import annotations

from dataclasses import dataclass

from ._kernels import kernels_for
from .model import PhasePoint, TargetModel, check_dim

__all__ = ["LeapfrogResult", "MAX_FINE_STEPS", "leapfrog", "leapfrog_refined"]

#: hard cap on fine steps per call
MAX_FINE_STEPS = 2**20


@dataclass(frozen=True)
class LeapfrogResult:
    """Endpoint plus the max/min Hamiltonian over every visited state.

    Both extrema include the start state.  ``h_max`` is +inf when any visited
    energy was non-finite, and ``divergent`` is then set.
    """

    endpoint: PhasePoint
    h_max: float
    h_min: float
    divergent: bool = False


def leapfrog(model: TargetModel, z: PhasePoint, L: int, h: float) -> LeapfrogResult:
    """Take ``|L|`` leapfrog steps of size ``h``, backward in time when L < 0.

    Backward steps flip the momentum, integrate forward and flip back.
    """
    check_dim(model, z)
    if not h > 0:
        raise ValueError(f"step size must be positive, got {h}")
    L = int(L)
    if abs(L) > MAX_FINE_STEPS:
        raise ValueError(f"|L| = {abs(L)} exceeds the cap of {MAX_FINE_STEPS} fine steps")
    k = kernels_for(model.potential, model.gradient)
    th, rho, h_max, h_min, finite = k.leapfrog(
        model.potential, model.gradient, z.position, z.momentum, L, float(h)
    )
    return LeapfrogResult(PhasePoint(th, rho), float(h_max), float(h_min), not bool(finite))


def leapfrog_refined(
    model: TargetModel, z: PhasePoint, L_coarse: int, h: float, R: int
) -> LeapfrogResult:
    """``L_coarse`` coarse steps, each made of ``R`` fine steps of size h/R.

    The extrema span every fine gridpoint, not only the coarse ones.
    """
    R = int(R)
    if R < 1:
        raise ValueError(f"refinement factor must be >= 1, got {R}")
    return leapfrog(model, z, R * int(L_coarse), h / R)
