"""Concentration operators and the sampling / interpolation machinery.

The compression T f = P(f * indicator(Omega)) of multiplication by a region
indicator onto an order-m weighted polynomial space is a positive
contraction; its spectrum drives the eigenvalue-counting route to
equidistribution. Node families are graded by the smallest generalized
eigenvalue of their node Gram against a restricted continuum Gram
(sampling) and by the smallest eigenvalue of the kernel Gram
(interpolation).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, NumericalError
from .potential import Potential, DropletDescriptor, droplet as droplet_of
from .polyspace import (WeightedPolySpace, build_space, kernel_gram,
                        lagrange_values, _chunks)
from .quadrature import polar_grid, composite_gl

_EIG_TOL = 1e-10


@dataclass(frozen=True)
class OmegaRegion:
    """Disc D(center, radius), optionally cut to a droplet vicinity
    {dist(z, S) < margin}."""

    center: complex
    radius: float
    droplet: Optional[DropletDescriptor] = None
    margin: float = 0.0

    def keep(self, z) -> np.ndarray:
        inside = np.abs(np.asarray(z) - self.center) <= self.radius
        if self.droplet is not None:
            inside &= self.droplet.distance(z) < self.margin
        return inside

    @property
    def has_cut(self) -> bool:
        """True when the vicinity boundary actually intersects the disc."""
        if self.droplet is None:
            return False
        if self.droplet.kind == "disc":
            r_v = self.droplet.radius + self.margin
            return abs(self.center) + self.radius > r_v
        return True


@dataclass
class ConcentrationSpectrum:
    m: int
    region: OmegaRegion
    eigenvalues: np.ndarray  # non-increasing
    trace: float
    trace_sq: float
    trace_quad: float        # independent quadrature of the kernel diagonal
    trace_sq_quad: float

    def __post_init__(self):
        lam = self.eigenvalues
        if lam.size and (lam[-1] < -_EIG_TOL or lam[0] > 1.0 + _EIG_TOL):
            raise NumericalError(
                f"concentration eigenvalues escape [0, 1]: "
                f"[{lam[-1]:.3e}, {lam[0]:.6f}]")


def _omega_grid(space: WeightedPolySpace, region: OmegaRegion):
    """Boundary-refined polar rule on the disc carrying the region."""
    m = space.m
    s_max = region.radius
    c = abs(region.center)
    # angular frequency of basis products along circles around the center
    if c > 1.5 * s_max:
        freq = int(m * s_max / (c - s_max)) + 1
    else:
        freq = m
    n_theta = 2 * freq + 128
    cycles = s_max * math.sqrt(m)
    panels = max(12, int(1.5 * cycles) + 6)
    if region.has_cut:
        # the vicinity boundary crosses the disc: double the resolution there
        n_theta *= 2
        panels = int(1.5 * panels)
    nodes, wts = polar_grid(region.center, s_max, panels, n_theta, gl_order=12)
    keep = region.keep(nodes)
    return nodes[keep], wts[keep]


def concentration(space: WeightedPolySpace, region: OmegaRegion,
                  force_general: bool = False) -> ConcentrationSpectrum:
    """Spectrum and traces of the concentration operator on the space.

    Matrix entries are quadratures of basis products over the region; traces
    are cross-checked against direct kernel-diagonal quadrature. Centered
    discs over radial fields diagonalize in the monomial basis and take a
    1-d fast path unless force_general is set.
    """
    centered = (space.kind == "radial" and region.center == 0
                and not region.has_cut and region.radius <= space.r_cut)
    if centered and not force_general:
        return _concentration_diagonal(space, region)
    nodes, wts = _omega_grid(space, region)
    m = space.m
    t_mat = np.zeros((m, m), dtype=complex)
    for sl in _chunks(nodes.size, m):
        b = space.basis(nodes[sl])
        t_mat += (b * wts[sl, None]).conj().T @ b
    t_mat = 0.5 * (t_mat + t_mat.conj().T)
    lam = np.linalg.eigvalsh(t_mat)[::-1]
    trace_quad = 0.0
    for sl in _chunks(nodes.size, m):
        trace_quad += float(wts[sl] @ space.one_point(nodes[sl]))
    trace_sq_quad = float(np.sum(np.abs(t_mat) ** 2))
    return ConcentrationSpectrum(
        m=m, region=region, eigenvalues=lam,
        trace=float(np.sum(lam)), trace_sq=float(np.sum(lam ** 2)),
        trace_quad=trace_quad, trace_sq_quad=trace_sq_quad)


def _concentration_diagonal(space: WeightedPolySpace,
                            region: OmegaRegion) -> ConcentrationSpectrum:
    diag = np.real(np.diag(_restricted_gram(space, region.radius)))
    lam = np.sort(diag)[::-1]
    r, w = composite_gl(0.0, region.radius, space.radial_panels, 20)
    trace_quad = float(np.sum(2.0 * w * r * space.one_point(r + 0j)))
    return ConcentrationSpectrum(
        m=space.m, region=region, eigenvalues=lam,
        trace=float(np.sum(lam)), trace_sq=float(np.sum(lam ** 2)),
        trace_quad=trace_quad, trace_sq_quad=float(np.sum(lam ** 2)))


@dataclass
class EigCountReport:
    thetas: np.ndarray
    residuals: np.ndarray
    bounds: np.ndarray

    @property
    def max_excess(self) -> float:
        return float(np.max(self.residuals - self.bounds))

    @property
    def passed(self) -> bool:
        return self.max_excess <= 1e-9


def eig_count_check(spec: ConcentrationSpectrum,
                    thetas: Sequence[float] = tuple(np.linspace(0.05, 0.95, 19))) -> EigCountReport:
    """Counting inequality: for every threshold theta in (0, 1),

        |#{lam_j >= theta} - trace T| <= max(1/theta, 1/(1-theta))
                                         * (trace T - trace T^2).
    """
    lam = spec.eigenvalues
    thetas = np.asarray(thetas, dtype=float)
    counts = np.array([np.sum(lam >= th) for th in thetas], dtype=float)
    residuals = np.abs(counts - spec.trace)
    gap = spec.trace - spec.trace_sq
    bounds = np.maximum(1.0 / thetas, 1.0 / (1.0 - thetas)) * gap
    return EigCountReport(thetas=thetas, residuals=residuals, bounds=bounds)


@dataclass
class TraceTrendRow:
    m: int
    order: int
    L: float
    rho: float
    trace: float
    trace_gap: float
    ratio: float           # trace / (rho * lapQ * L^2), halved at the edge
    gap_over_l: float
    gap_over_llog: float


def trace_asymptotics(potential: Potential, p: complex, regime: str,
                      L_list: Sequence[float], rho: float, big_m: float,
                      m_list: Sequence[int]) -> list[TraceTrendRow]:
    """Trend table for concentration traces under zooming discs.

    For each base order m, builds the space of order round(m * rho) and the
    regions D(p, L/sqrt(m)) cut to the droplet vicinity of width
    big_m/sqrt(m), then reports trace ratios against the expected bulk and
    boundary laws.
    """
    if regime not in ("bulk", "boundary"):
        raise ConfigError("regime must be 'bulk' or 'boundary'")
    drop = droplet_of(potential)
    dq = float(potential.laplacian(p))
    rows = []
    for m in m_list:
        order = int(round(m * rho))  # non-integer m*rho rounds to a space order
        space = build_space(potential, order)
        rho_eff = order / m
        for L in L_list:
            region = OmegaRegion(center=p, radius=L / math.sqrt(m),
                                 droplet=drop, margin=big_m / math.sqrt(m))
            spec = concentration(space, region)
            denom = rho_eff * dq * L * L
            if regime == "boundary":
                denom *= 0.5
            gap = spec.trace - spec.trace_sq
            rows.append(TraceTrendRow(
                m=m, order=order, L=L, rho=rho_eff, trace=spec.trace,
                trace_gap=gap, ratio=spec.trace / denom,
                gap_over_l=gap / L,
                gap_over_llog=gap / (L * math.log(L)) if L > 1 else math.nan))
    return rows


# ---------------------------------------------------------------------------
# Sampling / interpolation constants


@dataclass
class MZReport:
    rho: float
    big_m: float
    mu: float
    constant: float
    failed: bool
    order: int


def _restricted_gram(space: WeightedPolySpace, r_cap: float) -> np.ndarray:
    """Gram of the basis over the centered disc of radius r_cap."""
    pot = space.potential
    if space.kind == "radial":
        r, w = composite_gl(0.0, min(r_cap, space.r_cut),
                            space.radial_panels, 24)
        base = np.log(2.0 * w * r) - space.m * pot.radial_part(r)
        logr = np.log(r)
        diag = np.empty(space.m)
        from .quadrature import logsumexp_weighted
        for sl in _chunks(space.m, r.size):
            k = np.arange(sl.start, sl.stop)
            diag[sl] = logsumexp_weighted(
                base[None, :] + 2.0 * k[:, None] * logr[None, :], axis=1)
        return np.diag(np.exp(diag - space.log_norm2))
    nodes, wts = polar_grid(0.0, min(r_cap, space.r_cut),
                            space.radial_panels, space.n_theta)
    g = np.zeros((space.m, space.m), dtype=complex)
    for sl in _chunks(nodes.size, space.m):
        b = space.basis(nodes[sl])
        g += (b * wts[sl, None]).conj().T @ b
    return g


def mz_constant(config, potential: Potential, rho: float, big_m: float,
                drop: Optional[DropletDescriptor] = None) -> MZReport:
    """Empirical sampling constant of a node family.

    mu is the smallest generalized eigenvalue of (node Gram / n, Gram
    restricted to the 2*big_m vicinity of the droplet); the family samples
    iff mu > 0, with empirical constant (1 - rho)^2 / mu.
    """
    pts = np.asarray(config.points, dtype=complex)
    n = pts.size
    if not 0 < rho < 1:
        raise ConfigError("sampling requires 0 < rho < 1")
    order = int(round(n * rho))
    rho_eff = order / n
    space = build_space(potential, order)
    drop = drop or droplet_of(potential)
    r_cap = drop.radius + 2.0 * big_m / math.sqrt(n)
    g_res = _restricted_gram(space, r_cap)
    b = space.basis(pts)
    g_node = b.conj().T @ b / n
    try:
        chol = np.linalg.cholesky(g_res)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"restricted Gram not positive: {exc}") from exc
    white = np.linalg.solve(chol, np.linalg.solve(chol, g_node.conj().T).conj().T)
    mu = float(np.linalg.eigvalsh(0.5 * (white + white.conj().T))[0])
    failed = mu <= 1e-12
    const = math.inf if failed else (1.0 - rho_eff) ** 2 / mu
    return MZReport(rho=rho_eff, big_m=big_m, mu=mu, constant=const,
                    failed=failed, order=order)


@dataclass
class InterpolationReport:
    rho: float
    lambda_min: float
    constant: float
    failed: bool
    order: int


def interpolation_constant(config, potential: Potential, rho: float) -> InterpolationReport:
    """Empirical interpolation constant of a node family.

    The minimal-norm interpolant through the reproducing kernel has squared
    norm a* G^{-1} a for node values a, so the worst constant over unit
    value vectors is n (rho - 1)^2 / lambda_min(G).
    """
    pts = np.asarray(config.points, dtype=complex)
    n = pts.size
    if rho <= 1:
        raise ConfigError("interpolation requires rho > 1")
    order = int(round(n * rho))
    rho_eff = order / n
    space = build_space(potential, order)
    gram = kernel_gram(space, pts)
    lam = np.linalg.eigvalsh(0.5 * (gram + gram.conj().T))
    lam_min = float(lam[0])
    scale = float(np.median(np.real(np.diag(gram))))
    failed = lam_min <= 1e-12 * max(scale, 1.0)
    const = math.inf if failed else (rho_eff - 1.0) ** 2 * n / lam_min
    return InterpolationReport(rho=rho_eff, lambda_min=lam_min, constant=const,
                               failed=failed, order=order)


# ---------------------------------------------------------------------------
# Localized Lagrange polynomials


def localized_lagrange(config, potential: Potential, j: int, epsilon: float,
                       z) -> np.ndarray:
    """Lagrange polynomial of node j damped by a squared Berezin-type factor
    built from the order-(n*epsilon) kernel."""
    pts = np.asarray(config.points, dtype=complex)
    n = pts.size
    ne = int(round(n * epsilon))
    if ne < 2:
        raise ConfigError("n * epsilon must round to at least 2")
    space = build_space(potential, ne)
    k_jj = float(space.one_point(np.array([pts[j]]))[0])
    if k_jj < 1e-12 * ne:
        raise NumericalError(
            f"kernel diagonal {k_jj:.3e} at node {j} violates the expected "
            f"lower bound of order n*epsilon = {ne}")
    z = np.asarray(z, dtype=complex)
    k_zj = space.kernel(z, pts[j])
    lj = lagrange_values(pts, potential, z)[..., j]
    return (k_zj / k_jj) ** 2 * lj


def localized_lagrange_sum(config, potential: Potential, epsilon: float,
                           z) -> np.ndarray:
    """sum_j |L_j(z)| over a grid, the quantity bounded by C / epsilon."""
    pts = np.asarray(config.points, dtype=complex)
    n = pts.size
    ne = int(round(n * epsilon))
    if ne < 2:
        raise ConfigError("n * epsilon must round to at least 2")
    space = build_space(potential, ne)
    diag = space.one_point(pts)
    if np.any(diag < 1e-12 * ne):
        raise NumericalError("kernel diagonal collapse at a node")
    z = np.asarray(z, dtype=complex)
    flat = z.ravel()
    out = np.empty(flat.size)
    for sl in _chunks(flat.size, n + space.m):
        k_zj = space.kernel_matrix(flat[sl], pts)
        lj = lagrange_values(pts, potential, flat[sl])
        out[sl] = np.sum(np.abs((k_zj / diag[None, :]) ** 2 * lj), axis=1)
    return out.reshape(z.shape)
