"""Pure-numpy kernels; the compiled ``_ckernels`` module mirrors this API.

All integrals are of ``sin(mu t) exp(i w t)`` products over time intervals and
are evaluated through divided differences of the exponential so that nearly
coincident frequencies need no special-case formulas.
"""
from __future__ import annotations

import math

import numpy as np

# below this node spread the three-point divided difference uses its series
SERIES_SPREAD = 0.5
SERIES_TERMS = 24


def _expi_dd2(theta_a, theta_b):
    """exp[i a, i b] = (e^{ib} - e^{ia}) / (i (b - a)), stable as b -> a."""
    half = 0.5 * (theta_b - theta_a)
    return np.exp(0.5j * (theta_a + theta_b)) * np.sinc(half / np.pi)


def _expi_dd3(t0, t1, t2):
    """Second divided difference of exp over imaginary nodes i*t0, i*t1, i*t2."""
    t0, t1, t2 = np.broadcast_arrays(*(np.asarray(t, dtype=float) for t in (t0, t1, t2)))
    nodes = np.sort(np.stack([t0, t1, t2]), axis=0)
    lo, mid, hi = nodes
    spread = hi - lo
    out = np.empty(lo.shape, dtype=complex)

    wide = spread >= SERIES_SPREAD
    if np.any(wide):
        a, b, c = lo[wide], mid[wide], hi[wide]
        out[wide] = (_expi_dd2(b, c) - _expi_dd2(a, b)) / (1j * (c - a))
    narrow = ~wide
    if np.any(narrow):
        a = lo[narrow]
        x = 1j * (mid[narrow] - a)
        y = 1j * (hi[narrow] - a)
        # sum_n h_n(x, y) / (n + 2)!, h_n complete homogeneous polynomial
        total = np.zeros(a.shape, dtype=complex)
        hn = np.ones(a.shape, dtype=complex)
        xp = np.ones(a.shape, dtype=complex)
        for n in range(SERIES_TERMS):
            total += hn / math.factorial(n + 2)
            xp = xp * x
            hn = hn * y + xp
        out[narrow] = np.exp(1j * a) * total
    return out


def interval_integrals(mu, omegas, starts, ends):
    """``int_a^b sin(mu t) e^{i w t} dt`` for every (w, interval) pair.

    Returns a complex array of shape ``(len(omegas), len(starts))``.
    """
    w = np.asarray(omegas, dtype=float)[:, None]
    a = np.asarray(starts, dtype=float)[None, :]
    b = np.asarray(ends, dtype=float)[None, :]
    length = b - a
    p = mu + w
    q = w - mu
    ep = length * _expi_dd2(p * a, p * b)
    eq = length * _expi_dd2(q * a, q * b)
    return (ep - eq) / 2j


def _triangle(nu, lam, a, length):
    """int_a^{a+L} dt' int_a^{t'} dt exp(i nu t' + i lam t)."""
    return np.exp(1j * (nu + lam) * a) * length**2 * _expi_dd3(
        np.zeros_like(a * nu), (nu + lam) * length, nu * length
    )


def triangle_integrals(mu, omegas, starts, ends):
    """Time-ordered segment self-integrals.

    ``int_a^b dt' int_a^{t'} dt sin(mu t) sin(mu t') sin(w (t' - t))`` for
    every mode frequency and interval; real array ``(len(omegas), len(starts))``.
    """
    w = np.asarray(omegas, dtype=float)[:, None]
    a = np.asarray(starts, dtype=float)[None, :] + np.zeros_like(w)
    length = np.asarray(ends, dtype=float)[None, :] - np.asarray(starts, dtype=float)[None, :]
    length = length + np.zeros_like(w)
    p = mu + w
    q = w - mu
    total = (
        _triangle(p, -q, a, length)
        - _triangle(p, -p, a, length)
        - _triangle(q, -q, a, length)
        + _triangle(q, -p, a, length)
    )
    return (-0.25 * total).imag


def mode_kernels(mu, omegas, bounds):
    """Per-mode segment integrals ``c`` (N x S) and ordered kernels ``g`` (N x S x S).

    ``g[k, a, b]`` integrates over ``t`` in segment ``a`` and ``t' > t`` in
    segment ``b``; entries with ``a > b`` vanish.
    """
    bounds = np.asarray(bounds, dtype=float)
    starts, ends = bounds[:-1], bounds[1:]
    c = interval_integrals(mu, omegas, starts, ends)
    g = np.imag(np.conj(c)[:, :, None] * c[:, None, :])
    g = np.triu(g, k=1)
    diag = triangle_integrals(mu, omegas, starts, ends)
    idx = np.arange(len(starts))
    g[:, idx, idx] = diag
    return c, g


def penalty_objective(x, amat, kmat, p_idx, q_idx, targets, w_alpha, w_chi, w_power):
    """Penalty value and gradient for stacked pair amplitudes ``x``.

    ``amat[P]`` maps pair ``P``'s amplitudes to the displacements of its
    ions (rows), ``kmat[t]`` is the symmetric spin-spin kernel of ion pair
    ``t`` coupling pair vectors ``p_idx[t]`` and ``q_idx[t]``.
    """
    n_pairs, _, n_seg = amat.shape
    om = x.reshape(n_pairs, n_seg)
    alpha = np.einsum("prs,ps->pr", amat, om)
    grad = 2.0 * w_alpha * np.einsum("prs,pr->ps", amat.conj(), alpha).real
    value = w_alpha * float(np.sum(alpha.real**2 + alpha.imag**2))

    kq = np.einsum("tab,tb->ta", kmat, om[q_idx])
    chis = np.einsum("ta,ta->t", om[p_idx], kq)
    resid = chis - targets
    value += w_chi * float(resid @ resid)
    kp = np.einsum("tab,ta->tb", kmat, om[p_idx])
    coef = 2.0 * w_chi * resid
    np.add.at(grad, p_idx, coef[:, None] * kq)
    np.add.at(grad, q_idx, coef[:, None] * kp)

    value += w_power * float(x @ x)
    grad = grad.reshape(-1) + 2.0 * w_power * x
    return value, grad
