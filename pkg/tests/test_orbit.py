import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gistnuts.integrator import leapfrog_refined
from gistnuts.model import PhasePoint, TargetModel, funnel, std_normal
from gistnuts.orbit import (
    b_star,
    beta_string,
    index_selection,
    indicator_sub_u_turn,
    indicator_u_turn,
    orbit_endpoints,
    orbit_selection,
)
from gistnuts.verify import (
    boltzmann_weights,
    chi_square_pvalue,
    ell_min_oracle,
    reference_orbit_selection,
    sub_u_turn_brute_force,
)

Z1 = PhasePoint([1.0], [0.0])


def one_step(theta, rho, h):
    rho = rho - 0.5 * h * theta
    theta = theta + h * rho
    return theta, rho - 0.5 * h * theta


def random_point(rng, model):
    if model.name == "funnel":
        pos = np.concatenate(([rng.normal(0, 1.5)], rng.normal(0, 1, model.dim - 1)))
    else:
        pos = rng.normal(size=model.dim)
    return PhasePoint(pos, rng.normal(size=model.dim))


# --- U-turn indicators -----------------------------------------------------------


def test_u_turn_single_point(normal1):
    assert indicator_u_turn(normal1, 0, 0, PhasePoint([0.4], [1.0]), 0.5, 1)[0] == 0


def test_u_turn_half_period(normal1):
    # one-step oracle: after 7 steps from (1, 0) the momentum opposes the displacement
    states = [(1.0, 0.0)]
    for _ in range(7):
        states.append(one_step(*states[-1], 0.5))
    (t0, r0), (t7, r7) = states[0], states[-1]
    expected = int(r7 * (t7 - t0) < 0 or r0 * (t7 - t0) < 0)
    assert expected == 1
    flag, h_max, h_min = indicator_u_turn(normal1, 0, 7, Z1, 0.5, 1)
    assert flag == expected
    energies = [0.5 * (t * t + r * r) for t, r in states]
    assert h_max == pytest.approx(max(energies), rel=1e-12)
    assert h_min == pytest.approx(min(energies), rel=1e-12)


@given(st.integers(0, 2**32 - 1), st.integers(-6, 3), st.integers(0, 6), st.integers(-5, 5), st.integers(1, 3))
def test_u_turn_shift_invariance(seed, a, width, L, R):
    rng = np.random.default_rng(seed)
    model = std_normal(3)
    z = random_point(rng, model)
    b = a + width
    zs = leapfrog_refined(model, z, L, 0.4, R).endpoint
    assert indicator_u_turn(model, a - L, b - L, zs, 0.4, R)[0] == indicator_u_turn(model, a, b, z, 0.4, R)[0]


def test_sub_u_turn_base_and_full(normal1):
    assert indicator_sub_u_turn(normal1, 3, 3, Z1, 0.5, 1) == 0
    assert indicator_u_turn(normal1, 0, 7, Z1, 0.5, 1)[0] == 1
    assert indicator_sub_u_turn(normal1, 0, 7, Z1, 0.5, 1) == 1


def test_sub_u_turn_requires_power_of_two(normal1):
    with pytest.raises(ValueError):
        indicator_sub_u_turn(normal1, 0, 2, Z1, 0.5, 1)


@given(st.integers(0, 2**32 - 1), st.integers(0, 4), st.integers(-16, 0), st.sampled_from([0.3, 0.7, 1.3]))
def test_sub_u_turn_brute_force(seed, ell, a, h):
    rng = np.random.default_rng(seed)
    model = std_normal(2)
    z = random_point(rng, model)
    b = a + (1 << ell) - 1
    assert indicator_sub_u_turn(model, a, b, z, h, 1) == sub_u_turn_brute_force(model, a, b, z, h, 1)


# --- orbit endpoints and selection ---------------------------------------------


def test_orbit_endpoints_examples():
    assert orbit_endpoints(()) == (0, 0)
    assert orbit_endpoints((1, 0)) == (-1, 2)
    assert orbit_endpoints((0, 1, 1)) == (-6, 1)


@given(st.lists(st.integers(0, 1), max_size=12))
def test_orbit_endpoints_inductive(bits):
    a = b = 0
    for j, bit in enumerate(bits):
        shift = (-1) ** bit * 2**j
        a, b = min(a, a + shift), max(b, b + shift)
    assert orbit_endpoints(bits) == (a, b)
    assert b - a + 1 == 2 ** len(bits)


def test_orbit_selection_no_doublings(normal1):
    o = orbit_selection(normal1, Z1, [], 0.5, 1)
    assert (o.a, o.b, o.ell, o.dh_gap) == (0, 0, 0, 0.0)


def test_orbit_selection_half_period(normal1):
    o = orbit_selection(normal1, Z1, np.zeros(10, dtype=np.int8), 0.5, 1)
    assert o.b - o.a + 1 <= 8
    assert (o.a, o.b) == orbit_endpoints([0] * o.ell)
    # independent check: the next doubling must fail one of the two tests
    assert o.ell < 10
    nxt = 1 << o.ell
    assert (indicator_u_turn(normal1, o.a, o.b, Z1, 0.5, 1)[0]
            or indicator_sub_u_turn(normal1, o.b + 1, o.b + nxt, Z1, 0.5, 1))


CASES = [("normal", std_normal(2), 0.9), ("normal", std_normal(2), 0.3), ("funnel", funnel(3), 0.6)]


@pytest.mark.parametrize("label,model,h", CASES)
def test_orbit_selection_matches_literal_loop(label, model, h):
    rng = np.random.default_rng(7)
    for _ in range(40):
        z = random_point(rng, model)
        M = int(rng.integers(0, 7))
        bits = rng.integers(0, 2, M)
        R = int(rng.choice([1, 2, 4]))
        fast = orbit_selection(model, z, bits, h, R)
        slow = reference_orbit_selection(model, z, bits, h, R)
        assert (fast.a, fast.b, fast.ell) == (slow.a, slow.b, slow.ell)
        if np.isinf(slow.dh_gap):
            assert np.isinf(fast.dh_gap)
        else:
            assert fast.dh_gap == pytest.approx(slow.dh_gap, rel=1e-12, abs=1e-12)
        assert fast.ell == ell_min_oracle(model, z, bits, h, R)
        assert (fast.a, fast.b) == orbit_endpoints(bits[: fast.ell])


def test_orbit_selection_divergent_start_region():
    model = funnel(2)
    z = PhasePoint([-400.0, 0.01, -0.01], [0.5, 1.0, -1.0])
    bits = np.zeros(8, dtype=np.int8)
    o = orbit_selection(model, z, bits, 1.0, 1)
    slow = reference_orbit_selection(model, z, bits, 1.0, 1)
    assert (o.a, o.b, o.ell) == (slow.a, slow.b, slow.ell)
    assert np.isinf(o.dh_gap) and np.isinf(slow.dh_gap)


def test_orbit_selection_python_route():
    py = TargetModel("py_normal", 2, lambda x: 0.5 * float(x @ x), lambda x: x.copy())
    rng = np.random.default_rng(3)
    for _ in range(10):
        z = random_point(rng, py)
        bits = rng.integers(0, 2, 6)
        a = orbit_selection(py, z, bits, 0.4, 2)
        b = orbit_selection(std_normal(2), z, bits, 0.4, 2)
        assert (a.a, a.b, a.ell) == (b.a, b.b, b.ell)


# --- index selection ---------------------------------------------------------------


def test_index_selection_single_state(normal1, rng):
    sel = index_selection(normal1, Z1, 0, 0, 0.5, 1, rng)
    assert sel.index == 0
    np.testing.assert_array_equal(sel.endpoint.position, Z1.position)


def test_index_selection_endpoint_is_iterate(normal3, rng):
    z = PhasePoint([0.3, -1.0, 2.0], [1.0, 0.5, -0.2])
    for _ in range(20):
        sel = index_selection(normal3, z, -5, 2, 0.4, 2, rng)
        ref = leapfrog_refined(normal3, z, sel.index, 0.4, 2).endpoint
        np.testing.assert_allclose(sel.endpoint.position, ref.position, atol=1e-12)


def test_index_selection_consumes_one_uniform_per_index(normal1):
    r1 = np.random.default_rng(5)
    index_selection(normal1, Z1, -3, 4, 0.5, 1, r1)
    r2 = np.random.default_rng(5)
    r2.random(7)
    assert r1.random() == r2.random()


def test_index_selection_law(funnel2):
    rng = np.random.default_rng(11)
    z = PhasePoint([0.5, 0.3, -0.8], [1.0, -0.4, 0.6])
    a, b = -5, 2
    probs = boltzmann_weights(funnel2, z, a, b, 0.5, 1)
    n = 20_000
    counts = np.bincount([index_selection(funnel2, z, a, b, 0.5, 1, rng).index - a for _ in range(n)],
                         minlength=b - a + 1)
    assert chi_square_pvalue(counts, probs) > 1e-3


def test_index_selection_uniform_in_flow_limit(normal1):
    rng = np.random.default_rng(12)
    z = PhasePoint([0.6], [0.8])
    a, b = -3, 4
    probs = boltzmann_weights(normal1, z, a, b, 1e-4, 1)
    np.testing.assert_allclose(probs, 1 / 8, rtol=1e-6)
    counts = np.bincount([index_selection(normal1, z, a, b, 1e-4, 1, rng).index - a
                          for _ in range(20_000)], minlength=8)
    assert chi_square_pvalue(counts, np.full(8, 1 / 8)) > 1e-3


def test_index_selection_underflow_high_dim():
    model = std_normal(4096)
    rng = np.random.default_rng(1)
    z = PhasePoint(rng.normal(size=4096) * 2, rng.normal(size=4096))
    sel = index_selection(model, z, -3, 4, 0.05, 1, rng)
    assert -3 <= sel.index <= 4


# --- beta strings and B* -----------------------------------------------------------


def test_beta_string_examples():
    assert beta_string(2, -3, 4) == (1, 0, 1)
    assert beta_string(5, 5, 5) == ()
    assert beta_string(2, -1, 2) == (1, 1)


def test_beta_string_preconditions():
    with pytest.raises(ValueError):
        beta_string(5, -3, 4)
    with pytest.raises(ValueError):
        beta_string(0, -1, 1)


@given(st.integers(0, 7), st.data())
def test_beta_string_recentres_orbit(ell, data):
    a = data.draw(st.integers(-(2**ell) + 1, 0))
    b = a + 2**ell - 1
    L = data.draw(st.integers(a, b))
    assert orbit_endpoints(beta_string(L, a, b)) == (a - L, b - L)


def test_b_star_examples():
    B = np.array([1, 0, 1, 1], dtype=np.int8)
    np.testing.assert_array_equal(b_star(0, 0, 0, B), B)
    np.testing.assert_array_equal(b_star(2, -1, 2, [1, 0]), [1, 1])
    with pytest.raises(ValueError):
        b_star(0, -3, 4, [1, 0])


def test_b_star_involution_exhaustive():
    checked = 0
    for M in range(0, 7):
        for B in itertools.product((0, 1), repeat=M):
            for ell in range(M + 1):
                a, b = orbit_endpoints(B[:ell])
                for L in range(a, b + 1):
                    once = b_star(L, a, b, B)
                    twice = b_star(-L, a - L, b - L, once)
                    assert tuple(twice) == B
                    checked += 1
    assert checked > 1000


def test_b_star_matches_loop_construction():
    """Recursive beta bits agree with the top-down bisection loop."""
    rng = np.random.default_rng(0)
    for _ in range(500):
        M = int(rng.integers(1, 9))
        B = rng.integers(0, 2, M)
        ell = int(rng.integers(0, M + 1))
        a, b = orbit_endpoints(B[:ell])
        L = int(rng.integers(a, b + 1))
        loop = B.copy()
        lo, hi = a, b
        for i in range(ell, 0, -1):
            m = (lo + hi) // 2
            if lo <= L <= m:
                loop[i - 1], hi = 0, m
            else:
                loop[i - 1], lo = 1, m + 1
        np.testing.assert_array_equal(b_star(L, a, b, B), loop)


@pytest.mark.parametrize("model,h", [(std_normal(2), 0.7), (funnel(3), 0.5)])
def test_endpoint_shift_and_ell_symmetry(model, h):
    rng = np.random.default_rng(99)
    for _ in range(30):
        z = random_point(rng, model)
        M = int(rng.integers(1, 8))
        B = rng.integers(0, 2, M).astype(np.int8)
        R = int(rng.choice([1, 2, 4]))
        o = orbit_selection(model, z, B, h, R)
        for L in range(o.a, o.b + 1):
            zs = leapfrog_refined(model, z, L, h, R).endpoint
            os_ = orbit_selection(model, zs, b_star(L, o.a, o.b, B), h, R)
            assert (os_.a, os_.b, os_.ell) == (o.a - L, o.b - L, o.ell)
