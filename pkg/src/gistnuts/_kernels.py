"""Numba kernels for the inner leapfrog loops.

Every kernel takes the potential and gradient as its first two arguments so
one compiled specialization serves each model.  ``_build`` is instantiated
twice: compiled, and as plain Python for models whose callables are not
numba functions.

Backward integration always happens in the momentum-flipped frame, so a
coarse iterate reached by stepping from a cached neighbour is bitwise equal
to the one reached by a single long call from the start state.
"""

from types import SimpleNamespace

import numba
import numpy as np
from numba.extending import is_jitted


def _build(wrap):
    @wrap
    def _dot(u, v):
        s = 0.0
        for i in range(u.shape[0]):
            s += u[i] * v[i]
        return s

    @wrap
    def _energy(potential, theta, rho):
        return potential(theta) + 0.5 * _dot(rho, rho)

    @wrap
    def _step(gradient, theta, rho, grad, eps):
        """One in-place leapfrog step; ``grad`` holds the gradient at ``theta``."""
        half = 0.5 * eps
        for i in range(theta.shape[0]):
            rho[i] -= half * grad[i]
        for i in range(theta.shape[0]):
            theta[i] += eps * rho[i]
        g = gradient(theta)
        for i in range(theta.shape[0]):
            rho[i] -= half * g[i]
        return g

    @wrap
    def _is_uturn(theta_lo, rho_lo, theta_hi, rho_hi):
        s_hi = 0.0
        s_lo = 0.0
        for i in range(theta_lo.shape[0]):
            diff = theta_hi[i] - theta_lo[i]
            s_hi += rho_hi[i] * diff
            s_lo += rho_lo[i] * diff
        return s_hi < 0.0 or s_lo < 0.0

    @wrap
    def _leapfrog(potential, gradient, theta, rho, n_steps, eps):
        """Returns (theta, rho, h_max, h_min, finite) after ``n_steps`` steps.

        Negative ``n_steps`` integrates backward in time.  ``h_max`` is +inf if
        any visited energy is non-finite.
        """
        th = theta.copy()
        r = rho.copy()
        h0 = _energy(potential, th, r)
        h_max = h0
        h_min = h0
        finite = np.isfinite(h0)
        n = n_steps
        if n < 0:
            n = -n
            for i in range(r.shape[0]):
                r[i] = -r[i]
        if n > 0:
            g = gradient(th)
            for _ in range(n):
                g = _step(gradient, th, r, g, eps)
                e = _energy(potential, th, r)
                if not np.isfinite(e):
                    finite = False
                elif e > h_max:
                    h_max = e
                elif e < h_min:
                    h_min = e
        if n_steps < 0:
            for i in range(r.shape[0]):
                r[i] = -r[i]
        if not finite:
            h_max = np.inf
        return th, r, h_max, h_min, finite

    @wrap
    def _orbit_selection(potential, gradient, theta, rho, bits, step, n_fine):
        """Orbit doubling with cached endpoints.

        Returns (a, b, ell, dh_gap).  Energy extrema of the current orbit are
        merged into the running gap only when that orbit is U-turn checked, and a
        divergence anywhere in the traversed states makes the gap infinite.
        """
        d = theta.shape[0]
        m_max = bits.shape[0]
        eps = step / n_fine
        h0 = _energy(potential, theta, rho)
        if not np.isfinite(h0):
            return 0, 0, 0, np.inf
        h_max = h0
        h_min = h0
        orb_max = h0
        orb_min = h0
        orb_finite = True
        diverged = False
        th_lo = theta.copy()
        r_lo = rho.copy()
        th_hi = theta.copy()
        r_hi = rho.copy()
        a = 0
        b = 0
        ell = 0
        # block-start states per tree level, stored in the true momentum frame
        st_th = np.empty((m_max + 1, d))
        st_r = np.empty((m_max + 1, d))
        cur_r = np.empty(d)
        for i in range(1, m_max + 1):
            if orb_max > h_max:
                h_max = orb_max
            if orb_min < h_min:
                h_min = orb_min
            if not orb_finite:
                diverged = True
                break
            if _is_uturn(th_lo, r_lo, th_hi, r_hi):
                break
            n = 1 << (i - 1)
            forward = bits[i - 1] == 0
            if forward:
                th = th_hi.copy()
                r = r_hi.copy()
            else:
                th = th_lo.copy()
                r = -r_lo
            g = gradient(th)
            ext_max = -np.inf
            ext_min = np.inf
            ext_finite = True
            sub = False
            for t in range(1, n + 1):
                for _ in range(n_fine):
                    g = _step(gradient, th, r, g, eps)
                    e = _energy(potential, th, r)
                    if not np.isfinite(e):
                        ext_finite = False
                    else:
                        if e > ext_max:
                            ext_max = e
                        if e < ext_min:
                            ext_min = e
                if n == 1 or sub or not ext_finite:
                    continue
                if forward:
                    for q in range(d):
                        cur_r[q] = r[q]
                else:
                    for q in range(d):
                        cur_r[q] = -r[q]
                j = 1
                while j < i:
                    size = 1 << j
                    if (t - 1) % size == 0:
                        st_th[j, :] = th
                        st_r[j, :] = cur_r
                    j += 1
                j = 1
                while j < i:
                    size = 1 << j
                    if t % size == 0:
                        if forward:
                            hit = _is_uturn(st_th[j], st_r[j], th, cur_r)
                        else:
                            hit = _is_uturn(th, cur_r, st_th[j], st_r[j])
                        if hit:
                            sub = True
                            break
                    j += 1
            if n > 1 and not ext_finite:
                diverged = True
                break
            if sub:
                break
            if forward:
                b += n
                th_hi = th
                r_hi = r
            else:
                a -= n
                th_lo = th
                r_lo = -r
            if not ext_finite:
                orb_finite = False
            if ext_max > orb_max:
                orb_max = ext_max
            if ext_min < orb_min:
                orb_min = ext_min
            ell = i
        if diverged:
            return a, b, ell, np.inf
        return a, b, ell, h_max - h_min

    @wrap
    def _step_reduction(potential, gradient, theta, rho, bits, step, a_min, k_cap):
        """Smallest k in [1, k_cap] meeting the energy-gap threshold.

        Returns (k, capped); a failed search reports (k_cap, True).
        """
        for k in range(1, k_cap + 1):
            _, _, _, gap = _orbit_selection(
                potential, gradient, theta, rho, bits, step, 1 << k
            )
            if np.exp(-gap) >= a_min:
                return k, False
        return k_cap, True

    @wrap
    def _logaddexp(x, y):
        if x == -np.inf:
            return y
        if y == -np.inf:
            return x
        hi = max(x, y)
        return hi + np.log1p(np.exp(-abs(x - y)))

    @wrap
    def _index_selection(potential, gradient, theta, rho, a, b, step, n_fine, uniforms):
        """Single forward pass over [a:b] with a progressive Boltzmann reservoir.

        ``uniforms`` holds one draw per index a+1..b.  Weights are kept in log
        space so high-dimensional energies do not underflow.
        """
        eps = step / n_fine
        th, r, _, _, _ = _leapfrog(potential, gradient, theta, rho, n_fine * a, eps)
        e = _energy(potential, th, r)
        log_w = -e if np.isfinite(e) else -np.inf
        sel = a
        sel_th = th.copy()
        sel_r = r.copy()
        for i in range(a + 1, b + 1):
            th, r, _, _, _ = _leapfrog(potential, gradient, th, r, n_fine, eps)
            e = _energy(potential, th, r)
            if np.isfinite(e):
                log_w = _logaddexp(log_w, -e)
                ap = np.exp(-e - log_w)
            else:
                ap = 0.0
            if uniforms[i - a - 1] <= ap:
                sel = i
                sel_th[:] = th
                sel_r[:] = r
        if log_w == -np.inf:
            return theta.copy(), rho.copy(), 0
        return sel_th, sel_r, sel

    return SimpleNamespace(
        dot=_dot,
        energy=_energy,
        is_uturn=_is_uturn,
        leapfrog=_leapfrog,
        orbit_selection=_orbit_selection,
        step_reduction=_step_reduction,
        index_selection=_index_selection,
    )


def _identity(f):
    return f


python_kernels = _build(_identity)
jit_kernels = _build(numba.njit(nogil=True))


def kernels_for(potential, gradient):
    """Compiled kernels when both model callables are numba-jitted."""
    if is_jitted(potential) and is_jitted(gradient):
        return jit_kernels
    return python_kernels
