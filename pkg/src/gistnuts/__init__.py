"""No-U-turn sampling as a Gibbs self-tuning sampler, with locally adaptive step size."""

from .integrator import LeapfrogResult, leapfrog, leapfrog_refined
from .model import (
    PhasePoint,
    TargetModel,
    funnel,
    funnel_potential,
    get_model,
    hamiltonian,
    std_normal,
    stdnormal_potential,
)

__version__ = "0.1.0"
