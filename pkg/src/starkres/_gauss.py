"""Shared Gaussian-integral and panel-quadrature helpers.

Everything here is exact closed-form algebra or fixed composite
Gauss-Legendre machinery; no adaptive state, safe for concurrent use.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

__all__ = [
    "gaussian_poly_integral",
    "panel_nodes",
    "cumulative_matrix",
]


def gaussian_poly_integral(coeffs, a, b):
    """Closed form of ``int P(x) exp(-a x^2 + b x) dx`` over the real line.

    ``coeffs`` are ascending polynomial coefficients of P.  Requires
    Re(a) > 0.  Uses the centered-moment expansion around the saddle
    mu = b/(2a); exact for polynomials, stable for the low degrees the
    Hermite-Gaussian family produces.
    """
    a = complex(a)
    b = complex(b)
    if a.real <= 0.0:
        raise ValueError(f"gaussian integral needs Re(a) > 0, got a={a}")
    mu = b / (2.0 * a)
    inv2a = 1.0 / (2.0 * a)
    total = 0.0 + 0.0j
    for m, cm in enumerate(coeffs):
        if cm == 0:
            continue
        # E[(t+mu)^m] for centered Gaussian with <t^2> = 1/(2a)
        acc = 0.0 + 0.0j
        for r in range(0, m // 2 + 1):
            acc += (
                math.comb(m, 2 * r)
                * _double_factorial(2 * r - 1)
                * mu ** (m - 2 * r)
                * inv2a**r
            )
        total += cm * acc
    return np.sqrt(np.pi / a) * np.exp(b * b / (4.0 * a)) * total


def _double_factorial(n: int) -> int:
    if n <= 0:
        return 1
    out = 1
    for k in range(n, 0, -2):
        out *= k
    return out


@lru_cache(maxsize=64)
def panel_nodes(lo: float, hi: float, n_panels: int, n_nodes: int):
    """Composite Gauss-Legendre nodes and weights on [lo, hi].

    Returns (x, w) as flat arrays, plus the panel edge array, cached by
    grid signature.
    """
    xg, wg = np.polynomial.legendre.leggauss(n_nodes)
    edges = np.linspace(lo, hi, n_panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    x = (half[:, None] * xg[None, :] + mid[:, None]).ravel()
    w = (half[:, None] * wg[None, :]).ravel()
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w, edges


@lru_cache(maxsize=16)
def cumulative_matrix(n_nodes: int):
    """Spectral indefinite-integration matrix on Gauss-Legendre nodes.

    M maps values at the n nodes of [-1, 1] to the values of the
    antiderivative (vanishing at -1) at those same nodes.  Exact for
    polynomials of degree < n.
    """
    xg, wg = np.polynomial.legendre.leggauss(n_nodes)
    # Legendre-coefficient analysis matrix: c_l = (2l+1)/2 sum_m w_m P_l(x_m) v_m
    P = np.polynomial.legendre.legvander(xg, n_nodes - 1)  # (m, l)
    ell = np.arange(n_nodes)
    analysis = ((2 * ell + 1) / 2.0)[:, None] * (P * wg[:, None]).T
    # integrate coefficientwise, then evaluate at nodes and subtract value at -1
    M = np.zeros((n_nodes, n_nodes))
    for col in range(n_nodes):
        coeffs = analysis[:, col]
        integ = np.polynomial.legendre.legint(coeffs)
        vals = np.polynomial.legendre.legval(xg, integ)
        v_lo = np.polynomial.legendre.legval(-1.0, integ)
        M[:, col] = vals - v_lo
    M.setflags(write=False)
    return M
