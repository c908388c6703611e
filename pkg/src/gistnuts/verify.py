"""Brute-force oracles and statistical checks for the sampler.

The oracles here avoid the cached orbit kernel on purpose: orbit lengths are
recovered from the closed-form termination rule evaluated with the literal
indicator functions, and Boltzmann weights from one leapfrog call per index.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import stats

from .integrator import leapfrog_refined
from .model import PhasePoint, TargetModel, hamiltonian
from .orbit import (
    OrbitSpec,
    _sub_u_turn,
    as_bits,
    b_star,
    indicator_u_turn,
    orbit_endpoints,
    orbit_selection,
)
from .sampler import AdaptiveProposal

MAX_ENUMERATION_M = 8


# --- orbit kernel tables ------------------------------------------------------


@dataclass
class KernelTable:
    """Law of ``(ell, a, b)`` given a phase point, over uniform strings B."""

    entries: dict[tuple[int, int, int], float]
    context: dict = field(default_factory=dict)

    def total(self) -> float:
        return float(sum(self.entries.values()))

    def cells(self) -> list[tuple[int, int, int]]:
        return sorted(self.entries)

    def to_json(self) -> str:
        rows = [{"ell": c[0], "a": c[1], "b": c[2], "prob": self.entries[c]} for c in self.cells()]
        return json.dumps({"context": self.context, "cells": rows})


def all_strings(M: int) -> Iterable[np.ndarray]:
    for bits in itertools.product((0, 1), repeat=M):
        yield np.array(bits, dtype=np.int8)


def _table(fn, model, z, h, R, M, label):
    if M > MAX_ENUMERATION_M:
        raise ValueError(f"M={M} too large to enumerate (max {MAX_ENUMERATION_M})")
    weight = 2.0**-M
    entries: dict[tuple[int, int, int], float] = {}
    for bits in all_strings(M):
        ell, a, b = fn(model, z, bits, h, R)
        entries[(ell, a, b)] = entries.get((ell, a, b), 0.0) + weight
    return KernelTable(entries, {"h": h, "R": R, "M": M, "source": label})


def brute_force_orbit_kernel(model: TargetModel, z: PhasePoint, h: float, R: int, M: int) -> KernelTable:
    """Enumerate all ``2**M`` strings through ``orbit_selection``."""

    def run(model, z, bits, h, R):
        o = orbit_selection(model, z, bits, h, R)
        return o.ell, o.a, o.b

    return _table(run, model, z, h, R, M, "orbit_selection")


def ell_min_oracle(model: TargetModel, z: PhasePoint, B, h: float, R: int) -> int:
    """Doubling count from the closed-form termination rule.

    The first ``ell`` in ``[1:M-1]`` whose orbit ``[a_ell:b_ell]`` has a U-turn
    or whose next extension has a sub-U-turn; ``M`` if there is none.
    """
    bits = as_bits(B)
    M = bits.size
    if M == 0:
        return 0
    for ell in range(1, M):
        a, b = orbit_endpoints(bits[:ell])
        if indicator_u_turn(model, a, b, z, h, R)[0]:
            return ell
        shift = -(1 << ell) if bits[ell] else (1 << ell)
        if _sub_u_turn(model, a + shift, b + shift, z, h, R)[0]:
            return ell
    return M


def delta_form_kernel(model: TargetModel, z: PhasePoint, h: float, R: int, M: int) -> KernelTable:
    """Orbit law from the product-of-deltas form, enumerated over B."""

    def run(model, z, bits, h, R):
        ell = ell_min_oracle(model, z, bits, h, R)
        a, b = orbit_endpoints(bits[:ell])
        return ell, a, b

    return _table(run, model, z, h, R, M, "delta_form")


def reference_orbit_selection(model: TargetModel, z: PhasePoint, B, h: float, R: int) -> OrbitSpec:
    """Literal doubling loop built from the recomputing indicator functions."""
    bits = as_bits(B)
    a = b = 0
    ell = 0
    h0 = hamiltonian(model, z)
    h_max = h_min = h0
    diverged = not np.isfinite(h0)
    if diverged:
        return OrbitSpec(0, 0, 0, np.inf)
    for i in range(1, bits.size + 1):
        shift = -(1 << (i - 1)) if bits[i - 1] else 1 << (i - 1)
        ta, tb = a + shift, b + shift
        uturn, hi, lo = indicator_u_turn(model, a, b, z, h, R)
        h_max, h_min = max(hi, h_max), min(lo, h_min)
        if np.isinf(hi):
            diverged = True
            break
        if uturn:
            # the extension test cannot change the outcome
            break
        sub, div = _sub_u_turn(model, ta, tb, z, h, R)
        if div:
            diverged = True
        if sub:
            break
        a, b = min(a, ta), max(b, tb)
        ell = i
    return OrbitSpec(a, b, ell, np.inf if diverged else h_max - h_min)


def coarse_states(model: TargetModel, z: PhasePoint, a: int, b: int, h: float, R: int) -> list[PhasePoint]:
    """Iterates ``a..b`` computed by independent legs from ``z``."""
    return [leapfrog_refined(model, z, j, h, R).endpoint for j in range(a, b + 1)]


def tree_nodes(a: int, b: int) -> list[tuple[int, int]]:
    """All intervals of the balanced binary tree over ``[a:b]`` with >= 2 states."""
    nodes = []
    size = b - a + 1
    width = 2
    while width <= size:
        nodes.extend((s, s + width - 1) for s in range(a, b + 1, width))
        width *= 2
    return nodes


def sub_u_turn_brute_force(model: TargetModel, a: int, b: int, z: PhasePoint, h: float, R: int) -> int:
    """Max of the U-turn condition over every enumerated tree node."""
    states = coarse_states(model, z, a, b, h, R)
    for lo, hi in tree_nodes(a, b):
        zl, zh = states[lo - a], states[hi - a]
        diff = zh.position - zl.position
        if zh.momentum @ diff < 0 or zl.momentum @ diff < 0:
            return 1
    return 0


# --- index kernel and detailed balance ----------------------------------------


def boltzmann_weights(model: TargetModel, z: PhasePoint, a: int, b: int, h: float, R: int) -> np.ndarray:
    """Categorical index law over ``[a:b]`` from per-index energies."""
    energies = np.array([hamiltonian(model, s) for s in coarse_states(model, z, a, b, h, R)])
    logw = -(energies - energies.min())
    w = np.exp(logw)
    return w / w.sum()


def nuts_log_density(
    model: TargetModel, z: PhasePoint, B, ell: int, a: int, b: int, L: int, h: float, R: int
) -> float:
    """``log[exp(-H(z)) p_NUTS(B, ell, a, b, L | z)]``, or -inf off support."""
    bits = as_bits(B)
    if ell_min_oracle(model, z, bits, h, R) != ell or orbit_endpoints(bits[:ell]) != (a, b):
        return -np.inf
    energies = np.array([hamiltonian(model, s) for s in coarse_states(model, z, a, b, h, R)])
    log_q = -energies[L - a] - np.logaddexp.reduce(-energies)
    return -hamiltonian(model, z) - bits.size * np.log(2.0) + log_q


def detailed_balance_residual(
    model: TargetModel, z: PhasePoint, B, h: float, R: int, L: int | None = None
) -> float:
    """Relative mismatch between the joint density of an enlarged state and of
    its involution image.  Every index of the selected orbit is checked when
    ``L`` is None; the largest mismatch is returned."""
    bits = as_bits(B)
    ell = ell_min_oracle(model, z, bits, h, R)
    a, b = orbit_endpoints(bits[:ell])
    worst = 0.0
    for idx in range(a, b + 1) if L is None else (L,):
        lhs = nuts_log_density(model, z, bits, ell, a, b, idx, h, R)
        zs = leapfrog_refined(model, z, idx, h, R).endpoint
        rhs = nuts_log_density(model, zs, b_star(idx, a, b, bits), ell, a - idx, b - idx, -idx, h, R)
        if not (np.isfinite(lhs) and np.isfinite(rhs)):
            return np.inf
        worst = max(worst, abs(np.expm1(rhs - lhs)))
    return worst


# --- involution ------------------------------------------------------------------


@dataclass(frozen=True)
class EnlargedState:
    """A point ``(theta, rho, k, B, ell, a, b, L)`` of the enlarged space."""

    theta: np.ndarray
    rho: np.ndarray
    k: int
    B: np.ndarray
    ell: int
    a: int
    b: int
    L: int

    @classmethod
    def from_proposal(cls, p: AdaptiveProposal) -> "EnlargedState":
        return cls(p.theta, p.rho, p.k, p.B, p.ell, p.a, p.b, p.L)

    def discrete(self) -> tuple:
        return (self.k, tuple(int(x) for x in self.B), self.ell, self.a, self.b, self.L)


def apply_g(model: TargetModel, s: EnlargedState, h: float) -> EnlargedState:
    """Move to iterate L at fine step ``h / 2**k`` and re-centre the orbit on it."""
    end = leapfrog_refined(model, PhasePoint(s.theta, s.rho), s.L, h, 1 << s.k).endpoint
    return EnlargedState(
        end.position, end.momentum, s.k, b_star(s.L, s.a, s.b, s.B), s.ell, s.a - s.L, s.b - s.L, -s.L
    )


@dataclass
class InvolutionReport:
    n_states: int
    max_discrete_deviation: int
    max_continuous_deviation: float
    n_discrete_failures: int

    def passed(self, tol: float = 1e-8) -> bool:
        return self.n_discrete_failures == 0 and self.max_continuous_deviation <= tol

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def check_g_involution(model: TargetModel, states: Sequence[EnlargedState], h: float) -> InvolutionReport:
    """Apply the involution twice to each state and measure the round trip."""
    max_disc = 0
    max_cont = 0.0
    failures = 0
    for s in states:
        back = apply_g(model, apply_g(model, s, h), h)
        dev = max(
            float(np.max(np.abs(back.theta - s.theta))),
            float(np.max(np.abs(back.rho - s.rho))),
        )
        max_cont = max(max_cont, dev)
        d0, d1 = s.discrete(), back.discrete()
        disc = max(abs(d0[0] - d1[0]), abs(d0[2] - d1[2]), abs(d0[3] - d1[3]),
                   abs(d0[4] - d1[4]), abs(d0[5] - d1[5]),
                   sum(x != y for x, y in zip(d0[1], d1[1])))
        max_disc = max(max_disc, disc)
        failures += disc > 0
    return InvolutionReport(len(states), max_disc, max_cont, failures)


# --- statistics ------------------------------------------------------------------


@dataclass(frozen=True)
class KSResult:
    statistic: float
    pvalue: float
    passed: bool


def ks_stationarity_test(draws, exact_cdf: Callable, alpha: float = 1e-3) -> KSResult:
    """One-sample Kolmogorov-Smirnov test against ``exact_cdf``."""
    x = np.asarray(draws, dtype=np.float64).ravel()
    if x.size < 1000:
        raise ValueError(f"need at least 1000 draws, got {x.size}")
    res = stats.kstest(x, exact_cdf)
    return KSResult(float(res.statistic), float(res.pvalue), bool(res.pvalue > alpha))


def multinomial_z_scores(counts: dict, probs: dict, n: int) -> dict:
    """Per-cell (observed - expected) / sd under Multinomial(n, probs)."""
    out = {}
    for cell in set(counts) | set(probs):
        p = probs.get(cell, 0.0)
        c = counts.get(cell, 0)
        sd = np.sqrt(n * p * (1 - p))
        out[cell] = 0.0 if sd == 0 and c == n * p else (c - n * p) / sd if sd > 0 else np.inf
    return out


def chi_square_pvalue(counts: Sequence[int], probs: Sequence[float]) -> float:
    """Goodness of fit of observed counts to a categorical law.

    Cells with zero probability must be empty; they are dropped before the
    test.
    """
    counts = np.asarray(counts, dtype=np.float64)
    probs = np.asarray(probs, dtype=np.float64)
    zero = probs == 0
    if np.any(counts[zero] > 0):
        return 0.0
    counts, probs = counts[~zero], probs[~zero]
    if counts.size < 2:
        return 1.0
    expected = probs / probs.sum() * counts.sum()
    return float(stats.chisquare(counts, expected).pvalue)


def with_retry(check: Callable[[int], bool], seeds: tuple[int, int]) -> bool:
    """Run a seeded statistical check; rerun once with a fresh seed and fail
    only if both runs fail."""
    return check(seeds[0]) or check(seeds[1])
