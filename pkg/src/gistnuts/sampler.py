"""Transition kernels and chain running.

Random numbers are drawn in a fixed order per transition: momentum
(``d`` normals), direction string (``M`` bits), then for the adaptive kernel
the step-reduction offset (one integer), then one uniform per orbit index
above ``a`` for index selection.  Rejected transitions consume the same
stream, so a seed fixes a run bit for bit.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from ._kernels import kernels_for
from .model import PhasePoint, TargetModel, check_dim
from .orbit import as_bits, b_star

__all__ = [
    "AdaptiveConfig",
    "FixedConfig",
    "TransitionRecord",
    "AdaptiveProposal",
    "ChainResult",
    "nuts_step",
    "step_reduction",
    "adaptive_proposal",
    "adapt_nuts_step",
    "run_chain",
    "chain_rng",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FixedConfig:
    h: float
    M: int
    R: int = 1

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError(f"h must be positive, got {self.h}")
        if self.M < 0:
            raise ValueError(f"M must be non-negative, got {self.M}")
        if self.R < 1:
            raise ValueError(f"R must be >= 1, got {self.R}")


@dataclass(frozen=True)
class AdaptiveConfig:
    """Coarse step ``h``, orbits of at most ``2**M`` states, acceptance
    threshold ``a_min`` for the energy gap, and ``k_cap`` bounding the search
    over fine steps ``h / 2**k``."""

    h: float
    M: int
    a_min: float
    k_cap: int = 10

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError(f"h must be positive, got {self.h}")
        if self.M < 1:
            raise ValueError(f"M must be positive, got {self.M}")
        if not 0 < self.a_min < 1:
            raise ValueError(f"a_min must lie in (0, 1), got {self.a_min}")
        if self.k_cap < 1:
            raise ValueError(f"k_cap must be >= 1, got {self.k_cap}")


@dataclass(frozen=True)
class TransitionRecord:
    """Per-transition diagnostics.

    In fixed-step mode ``k_used`` is ``log2(R)`` (or -1 when R is not a power
    of two) and the two step-reduction fields are -1.
    """

    next_position: np.ndarray
    accepted: bool
    k_used: int
    k_tilde: int
    k_tilde_star: int
    orbit_len: int
    dh_gap: float


@dataclass(frozen=True)
class AdaptiveProposal:
    """Everything one adaptive transition computed, including the enlarged
    state ``(theta, rho, k, B, ell, a, b, L)`` and its image under the
    involution."""

    theta: np.ndarray
    rho: np.ndarray
    k: int
    B: np.ndarray
    ell: int
    a: int
    b: int
    L: int
    theta_star: np.ndarray
    rho_star: np.ndarray
    B_star: np.ndarray
    k_tilde: int
    k_tilde_star: int
    capped: bool
    capped_star: bool
    dh_gap: float
    accepted: bool


def _kern(model):
    return kernels_for(model.potential, model.gradient)


def nuts_step(
    model: TargetModel, theta, h: float, R: int, M: int, rng: np.random.Generator
) -> np.ndarray:
    """One NUTS transition with fixed step; the proposal is always taken."""
    return _nuts_transition(model, np.asarray(theta, dtype=np.float64), h, R, M, rng)[0]


def _nuts_transition(model, theta, h, R, M, rng):
    kern = _kern(model)
    rho = rng.standard_normal(model.dim)
    bits = rng.integers(0, 2, size=M).astype(np.int8)
    a, b, ell, gap = kern.orbit_selection(
        model.potential, model.gradient, theta, rho, bits, float(h), int(R)
    )
    uniforms = rng.random(b - a)
    th, _, _ = kern.index_selection(
        model.potential, model.gradient, theta, rho, a, b, float(h), int(R), uniforms
    )
    return th, b - a + 1, float(gap)


def step_reduction(
    model: TargetModel, z: PhasePoint, B, h: float, a_min: float, k_cap: int = 10
) -> tuple[int, bool]:
    """Smallest ``k >= 1`` whose orbit at fine step ``h / 2**k`` has
    ``exp(-dh_gap) >= a_min``.

    Returns ``(k, capped)``; ``capped`` is True when no k up to ``k_cap``
    qualifies, and k is then ``k_cap``.
    """
    check_dim(model, z)
    kern = _kern(model)
    k, capped = kern.step_reduction(
        model.potential, model.gradient, z.position, z.momentum, as_bits(B),
        float(h), float(a_min), int(k_cap),
    )
    return int(k), bool(capped)


def adaptive_proposal(
    model: TargetModel, theta, cfg: AdaptiveConfig, rng: np.random.Generator
) -> AdaptiveProposal:
    """Run one step-size-adaptive transition and return all its pieces."""
    kern = _kern(model)
    pot, grad = model.potential, model.gradient
    theta = np.asarray(theta, dtype=np.float64)
    h = float(cfg.h)

    rho = rng.standard_normal(model.dim)
    bits = rng.integers(0, 2, size=cfg.M).astype(np.int8)
    k_tilde, capped = kern.step_reduction(pot, grad, theta, rho, bits, h, cfg.a_min, cfg.k_cap)
    k = int(k_tilde) - 1 + int(rng.integers(0, 3))
    R = 1 << k
    a, b, ell, gap = kern.orbit_selection(pot, grad, theta, rho, bits, h, R)
    uniforms = rng.random(b - a)
    th_star, rho_star, L = kern.index_selection(pot, grad, theta, rho, a, b, h, R, uniforms)
    bits_star = b_star(int(L), int(a), int(b), bits)
    k_tilde_star, capped_star = kern.step_reduction(
        pot, grad, th_star, rho_star, bits_star, h, cfg.a_min, cfg.k_cap
    )
    # uniform window of width 3: the ratio of window probabilities is 1 or 0
    accepted = (not capped) and (not capped_star) and abs(k - int(k_tilde_star)) <= 1
    return AdaptiveProposal(
        theta=theta, rho=rho, k=k, B=bits, ell=int(ell), a=int(a), b=int(b), L=int(L),
        theta_star=th_star, rho_star=rho_star, B_star=bits_star,
        k_tilde=int(k_tilde), k_tilde_star=int(k_tilde_star),
        capped=bool(capped), capped_star=bool(capped_star),
        dh_gap=float(gap), accepted=bool(accepted),
    )


def adapt_nuts_step(
    model: TargetModel, theta, cfg: AdaptiveConfig, rng: np.random.Generator
) -> TransitionRecord:
    """One step-size-adaptive NUTS transition with the GIST accept/reject.

    Draws ``k`` uniformly from the window around the step reduction of the
    current state and accepts iff ``k`` also lies in the window around the
    step reduction of the proposal (seen with the reconstructed string B*).
    A capped search on either side rejects.
    """
    p = adaptive_proposal(model, theta, cfg, rng)
    nxt = p.theta_star if p.accepted else p.theta
    return TransitionRecord(
        next_position=nxt,
        accepted=p.accepted,
        k_used=p.k,
        k_tilde=p.k_tilde,
        k_tilde_star=p.k_tilde_star,
        orbit_len=p.b - p.a + 1,
        dh_gap=p.dh_gap,
    )


# --- chains -------------------------------------------------------------------


RECORD_DTYPE = np.dtype(
    [
        ("accepted", np.bool_),
        ("k_used", np.int16),
        ("k_tilde", np.int16),
        ("k_tilde_star", np.int16),
        ("orbit_len", np.int32),
        ("dh_gap", np.float64),
    ]
)


@dataclass
class ChainResult:
    """Draws (one row per transition) and the matching transition records."""

    draws: np.ndarray
    records: np.ndarray = field(repr=False)
    h: float

    @property
    def acceptance_rate(self) -> float:
        return float(self.records["accepted"].mean())

    @property
    def fine_step_sizes(self) -> np.ndarray:
        """Realized fine step ``h / 2**k_used`` per transition."""
        return self.h * np.exp2(-self.records["k_used"].astype(np.float64))


def chain_rng(seed: int, chain: int = 0, n_chains: int = 1) -> np.random.Generator:
    """Generator for chain ``chain`` of a run seeded with ``seed``.

    A single chain uses ``default_rng(seed)``; chain i of a multi-chain run
    uses the i-th child of ``SeedSequence(seed).spawn(n_chains)``.
    """
    if n_chains == 1:
        return np.random.default_rng(seed)
    return np.random.default_rng(np.random.SeedSequence(seed).spawn(n_chains)[chain])


def run_chain(
    model: TargetModel,
    cfg: AdaptiveConfig | FixedConfig,
    n_draws: int,
    seed: int | np.random.Generator,
    mode: Literal["fixed", "adaptive"] | None = None,
    theta0=None,
) -> ChainResult:
    """Run ``n_draws`` transitions from ``theta0`` (default: the origin).

    ``mode`` is inferred from the config type when omitted.
    """
    if n_draws < 1:
        raise ValueError(f"n_draws must be >= 1, got {n_draws}")
    if mode is None:
        mode = "adaptive" if isinstance(cfg, AdaptiveConfig) else "fixed"
    if mode == "adaptive" and not isinstance(cfg, AdaptiveConfig):
        raise ValueError("adaptive mode needs an AdaptiveConfig")
    if mode == "fixed" and not isinstance(cfg, FixedConfig):
        raise ValueError("fixed mode needs a FixedConfig")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    theta = np.zeros(model.dim) if theta0 is None else np.array(theta0, dtype=np.float64)
    if theta.shape != (model.dim,):
        raise ValueError(f"theta0 has shape {theta.shape}, expected ({model.dim},)")

    draws = np.empty((n_draws, model.dim))
    records = np.empty(n_draws, dtype=RECORD_DTYPE)
    if mode == "fixed":
        k_fixed = cfg.R.bit_length() - 1 if cfg.R & (cfg.R - 1) == 0 else -1
        for n in range(n_draws):
            theta, size, gap = _nuts_transition(model, theta, cfg.h, cfg.R, cfg.M, rng)
            draws[n] = theta
            records[n] = (True, k_fixed, -1, -1, size, gap)
    else:
        n_capped = 0
        for n in range(n_draws):
            p = adaptive_proposal(model, theta, cfg, rng)
            if p.accepted:
                theta = p.theta_star
            n_capped += p.capped or p.capped_star
            draws[n] = theta
            records[n] = (p.accepted, p.k, p.k_tilde, p.k_tilde_star, p.b - p.a + 1, p.dh_gap)
        if n_capped:
            logger.warning("%d of %d transitions hit k_cap=%d", n_capped, n_draws, cfg.k_cap)
    return ChainResult(draws, records, float(cfg.h))
