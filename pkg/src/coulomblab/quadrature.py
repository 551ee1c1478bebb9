"""Composite Gauss-Legendre rules and polar grids.

All weights returned here already include the 1/pi factor of the normalized
area measure dA = dx dy / pi, so that integral(1 over unit disc) == 1.
"""

from __future__ import annotations

import numpy as np
from scipy.special import roots_legendre


def composite_gl(a: float, b: float, panels: int, order: int = 24):
    """Composite Gauss-Legendre rule on [a, b] with uniform panels.

    Returns (nodes, weights) for plain 1-d integration (no measure factors).
    """
    x, w = roots_legendre(order)
    edges = np.linspace(a, b, panels + 1)
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def radial_rule(r_max: float, panels: int, order: int = 24):
    """1-d radial rule for integrals 2*int_0^R f(r) r dr  (= int f dA for radial f).

    Returns (r, w) with w including the 2*r Jacobian of dA in polar form.
    """
    r, w = composite_gl(0.0, r_max, panels, order)
    return r, 2.0 * w * r


def polar_grid(center: complex, r_max: float, n_r_panels: int, n_theta: int,
               gl_order: int = 24, radial_refine_at: tuple[float, ...] = (),
               refine_width: float = 0.0):
    """Polar quadrature grid for dA on the disc D(center, r_max).

    Returns (nodes, weights) as flat complex/real arrays; weights include 1/pi.
    ``radial_refine_at`` lists radii near which the radial panel density is
    doubled within ``refine_width`` (used to resolve region boundaries).
    """
    edges = np.linspace(0.0, r_max, n_r_panels + 1)
    if radial_refine_at and refine_width > 0:
        extra = []
        for r0 in radial_refine_at:
            if 0 < r0 < r_max:
                lo = max(0.0, r0 - refine_width)
                hi = min(r_max, r0 + refine_width)
                extra.append(np.linspace(lo, hi, 9))
        if extra:
            edges = np.unique(np.concatenate([edges] + extra))
    x, w = roots_legendre(gl_order)
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    r = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wr = (half[:, None] * w[None, :]).ravel()
    theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
    # dA = r dr dtheta / pi; uniform trapezoid in theta has weight 2*pi/n_theta.
    nodes = (center + r[:, None] * np.exp(1j * theta)[None, :]).ravel()
    weights = np.broadcast_to((wr * r * 2.0 / n_theta)[:, None],
                              (r.size, n_theta)).ravel().copy()
    return nodes, weights


def logsumexp_weighted(log_terms: np.ndarray, axis=None):
    """log of sum of exp(log_terms), safe against -inf entries."""
    m = np.max(log_terms, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    s = np.sum(np.exp(log_terms - m), axis=axis)
    return np.squeeze(m, axis=axis) + np.log(s)
