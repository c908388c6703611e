"""Orbit machinery of the no-U-turn sampler.

Orbits are index sets ``[a:b]`` of coarse leapfrog iterates around a start
state, grown by doubling in the directions given by a bit string ``B``
(bit 0 extends forward in time, bit 1 backward).  A coarse step of size ``h``
is made of ``R`` fine leapfrog steps of size ``h / R``.

Direction strings are plain integer sequences; the samplers use ``int8``
arrays of length M.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._kernels import kernels_for
from .integrator import leapfrog_refined
from .model import PhasePoint, TargetModel, check_dim

__all__ = [
    "OrbitSpec",
    "IndexSelection",
    "indicator_u_turn",
    "indicator_sub_u_turn",
    "orbit_endpoints",
    "orbit_selection",
    "index_selection",
    "beta_string",
    "b_star",
    "as_bits",
]


@dataclass(frozen=True)
class OrbitSpec:
    """Selected orbit ``[a:b]`` with ``b - a + 1 == 2**ell``.

    ``dh_gap`` is the spread between the largest and smallest Hamiltonian
    seen while selecting the orbit, fine gridpoints included.
    """

    a: int
    b: int
    ell: int
    dh_gap: float

    @property
    def size(self) -> int:
        return self.b - self.a + 1


@dataclass(frozen=True)
class IndexSelection:
    endpoint: PhasePoint
    index: int


def as_bits(B) -> np.ndarray:
    bits = np.asarray(B, dtype=np.int8).reshape(-1)
    if bits.size and not np.all((bits == 0) | (bits == 1)):
        raise ValueError(f"direction string must be binary, got {B!r}")
    return bits


def _u_turn_legs(model, a, b, z, h, R):
    lo = leapfrog_refined(model, z, a, h, R)
    hi = leapfrog_refined(model, z, b, h, R)
    return lo, hi


def indicator_u_turn(model: TargetModel, a: int, b: int, z: PhasePoint, h: float, R: int):
    """U-turn test of the orbit ``[a:b]`` from ``z``.

    Integrates to both endpoints from ``z`` and flags a U-turn when either end
    momentum points against the end-to-end displacement.  Returns
    ``(flag, h_max, h_min)`` with the energy extrema of both legs; a
    divergent leg forces ``flag = 1`` and ``h_max = inf``.
    """
    if a > b:
        raise ValueError(f"need a <= b, got [{a}:{b}]")
    lo, hi = _u_turn_legs(model, a, b, z, h, R)
    h_max = max(lo.h_max, hi.h_max)
    h_min = min(lo.h_min, hi.h_min)
    if lo.divergent or hi.divergent:
        return 1, np.inf, h_min
    diff = hi.endpoint.position - lo.endpoint.position
    flag = hi.endpoint.momentum @ diff < 0 or lo.endpoint.momentum @ diff < 0
    return int(flag), h_max, h_min


def _sub_u_turn(model, a, b, z, h, R):
    """(flag, divergent) over every node of the balanced binary tree on [a:b]."""
    if a == b:
        return 0, False
    m = (a + b) // 2
    full, h_max, _ = indicator_u_turn(model, a, b, z, h, R)
    left, div_l = _sub_u_turn(model, a, m, z, h, R)
    right, div_r = _sub_u_turn(model, m + 1, b, z, h, R)
    return max(full, left, right), bool(np.isinf(h_max)) or div_l or div_r


def indicator_sub_u_turn(model: TargetModel, a: int, b: int, z: PhasePoint, h: float, R: int) -> int:
    """1 if any node interval of the binary tree over ``[a:b]`` has a U-turn."""
    size = b - a + 1
    if size < 1 or size & (size - 1):
        raise ValueError(f"orbit [{a}:{b}] does not have power-of-two length")
    return _sub_u_turn(model, a, b, z, h, R)[0]


def orbit_endpoints(prefix: Sequence[int]) -> tuple[int, int]:
    """Endpoints of the orbit built by doubling along ``prefix``."""
    a = b = 0
    for j, bit in enumerate(prefix):
        if bit:
            a -= 1 << j
        else:
            b += 1 << j
    return a, b


def orbit_selection(model: TargetModel, z: PhasePoint, B, h: float, R: int) -> OrbitSpec:
    """Double the orbit along ``B`` until a U-turn or sub-U-turn appears.

    Each round first U-turn checks the current orbit, then sub-U-turn checks
    the proposed extension, and doubles only if both are clear.  At most
    ``len(B)`` doublings.  A non-finite energy stops the doubling and makes
    ``dh_gap`` infinite.
    """
    check_dim(model, z)
    bits = as_bits(B)
    kern = kernels_for(model.potential, model.gradient)
    a, b, ell, gap = kern.orbit_selection(
        model.potential, model.gradient, z.position, z.momentum, bits, float(h), int(R)
    )
    return OrbitSpec(int(a), int(b), int(ell), float(gap))


def index_selection(
    model: TargetModel, z: PhasePoint, a: int, b: int, h: float, R: int, rng: np.random.Generator
) -> IndexSelection:
    """Draw ``L`` in ``[a:b]`` with probability proportional to ``exp(-H)``.

    One forward pass from the ``a`` endpoint; index ``i`` replaces the current
    pick with probability ``exp(-H_i) / (running weight)``.  Consumes exactly
    ``b - a`` uniforms from ``rng``.  If every weight underflows the start
    state (index 0) is returned.
    """
    check_dim(model, z)
    if not a <= 0 <= b:
        raise ValueError(f"orbit [{a}:{b}] must contain 0")
    uniforms = rng.random(b - a)
    kern = kernels_for(model.potential, model.gradient)
    th, rho, L = kern.index_selection(
        model.potential, model.gradient, z.position, z.momentum, int(a), int(b),
        float(h), int(R), uniforms,
    )
    return IndexSelection(PhasePoint(th, rho), int(L))


def _check_orbit(L, a, b):
    size = b - a + 1
    if size < 1 or size & (size - 1):
        raise ValueError(f"orbit [{a}:{b}] does not have power-of-two length")
    if not a <= L <= b:
        raise ValueError(f"index {L} outside [{a}:{b}]")
    return size.bit_length() - 1


def beta_string(L: int, a: int, b: int) -> tuple[int, ...]:
    """Bisection bits locating ``L`` in ``[a:b]``.

    The last bit says whether L lies in the upper half of ``[a:b]``; earlier
    bits recurse into that half.
    """
    ell = _check_orbit(L, a, b)
    bits = [0] * ell
    lo, hi = a, b
    for i in range(ell - 1, -1, -1):
        m = (lo + hi) // 2
        if L <= m:
            hi = m
        else:
            bits[i] = 1
            lo = m + 1
    return tuple(bits)


def b_star(L: int, a: int, b: int, B) -> np.ndarray:
    """Direction string seen from iterate ``L``: beta bits, then the tail of B."""
    ell = _check_orbit(L, a, b)
    bits = as_bits(B).copy()
    if ell > bits.size:
        raise ValueError(f"orbit of 2**{ell} states needs at least {ell} bits, got {bits.size}")
    bits[:ell] = beta_string(L, a, b)
    return bits
