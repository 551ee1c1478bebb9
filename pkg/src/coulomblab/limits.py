"""Microscopic scaling limits: blow-up maps, limiting kernels, area laws.

The two universal kernels at inverse temperature 1 are the bulk Gaussian
kernel  G(z, w) = exp(z conj(w) - |z|^2/2 - |w|^2/2)  and the edge family
K_l(z, w) = G(z, w) * F(z + conj(w) + 2 l), where F is half the
complementary error function of z / sqrt(2). K_l interpolates between G
(l -> -inf) and the zero kernel (l -> +inf).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.special import erfc, wofz, dawsn

from .errors import ConfigError, NumericalError, UnsupportedError
from .potential import Potential, DropletDescriptor
from .polyspace import WeightedPolySpace
from .quadrature import polar_grid


# ---------------------------------------------------------------------------
# Special functions


_LOG2 = math.log(2.0)


def _log_half_erfc(w):
    """Complex log of erfc(w)/2 for Re(w) >= 0, via the Faddeeva function."""
    return -w * w + np.log(wofz(1j * w)) - _LOG2


def erfc_profile(z):
    """F(z) = erfc(z / sqrt(2)) / 2 for real or complex argument.

    This is the edge density profile; F(0) = 1/2 and F(x) + F(-x) = 1.
    Complex arguments are handled in log form so large imaginary parts
    neither overflow prematurely nor lose accuracy.
    """
    z = np.asarray(z)
    if np.isrealobj(z):
        return 0.5 * erfc(z / math.sqrt(2.0))
    zs = z / math.sqrt(2.0)
    flip = zs.real < 0
    w = np.where(flip, -zs, zs)
    val = np.exp(_log_half_erfc(w))
    return np.where(flip, 1.0 - val, val)


def dawson(x):
    """Dawson's integral exp(-x^2) * integral(exp(t^2), 0..x)."""
    return dawsn(x)


def ginibre_kernel(z, w):
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    return np.exp(z * np.conj(w) - 0.5 * np.abs(z) ** 2 - 0.5 * np.abs(w) ** 2)


def edge_kernel(l: float, z, w):
    """Boundary limit kernel K_l(z, w) = G(z, w) * F(z + conj(w) + 2 l).

    Evaluated through a single combined exponent: |K_l| is bounded, so the
    net exponent is safe even where the erfc factor alone would overflow.
    """
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    g_exp = z * np.conj(w) - 0.5 * np.abs(z) ** 2 - 0.5 * np.abs(w) ** 2
    zs = (z + np.conj(w) + 2.0 * l) / math.sqrt(2.0)
    flip = zs.real < 0
    ws = np.where(flip, -zs, zs)
    piece = np.exp(g_exp + _log_half_erfc(ws))
    direct = np.exp(np.where(flip, g_exp, -np.inf))
    return np.where(flip, direct - piece, piece)


def edge_log_abs(l: float, z, w):
    """log |K_l(z, w)|, stable arbitrarily far from the diagonal."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    g_re = -0.5 * np.abs(z - w) ** 2
    zs = (z + np.conj(w) + 2.0 * l) / math.sqrt(2.0)
    flip = zs.real < 0
    ws = np.where(flip, -zs, zs)
    lhe = _log_half_erfc(ws)
    # flip branch: log |1 - exp(lhe)|, guarding the overflowing exponent
    big = lhe.real > 40.0
    safe = np.where(big, 0.0, lhe)
    with np.errstate(divide="ignore"):
        log_flip = np.where(big, lhe.real, np.log(np.abs(1.0 - np.exp(safe))))
    return g_re + np.where(flip, log_flip, lhe.real)


@dataclass(frozen=True)
class LimitKernel:
    """Universal microscopic kernel: bulk ("ginibre") or edge with offset l."""

    kind: str
    l: float = 0.0

    def __post_init__(self):
        if self.kind not in ("ginibre", "edge"):
            raise ConfigError(f"unknown limit kernel kind {self.kind!r}")

    def __call__(self, z, w):
        if self.kind == "ginibre":
            return ginibre_kernel(z, w)
        return edge_kernel(self.l, z, w)


# ---------------------------------------------------------------------------
# Rescaling


@dataclass(frozen=True)
class RescaleMap:
    """Blow-up z = sqrt(n rho lapQ(p)) * (zeta - p) * exp(-i theta)."""

    p: complex
    n: int
    rho: float = 1.0
    delta_q: float = 1.0
    theta: float = 0.0

    def __post_init__(self):
        if self.delta_q <= 0:
            raise ConfigError("blow-up needs lap Q(p) > 0 at the zoom point")

    @property
    def scale(self) -> float:
        return math.sqrt(self.n * self.rho * self.delta_q)

    def forward(self, zeta):
        return self.scale * (np.asarray(zeta, dtype=complex) - self.p) \
            * np.exp(-1j * self.theta)

    def inverse(self, z):
        return self.p + np.asarray(z, dtype=complex) * np.exp(1j * self.theta) \
            / self.scale


def rescale_points(mapping: RescaleMap, config) -> np.ndarray:
    pts = np.asarray(getattr(config, "points", config), dtype=complex)
    return mapping.forward(pts)


def rescale_kernel(mapping: RescaleMap, space: WeightedPolySpace):
    """Kernel of the blown-up point process, as a callable on (z, w)."""
    factor = 1.0 / (mapping.n * mapping.rho * mapping.delta_q)

    def kernel(z, w):
        return factor * space.kernel(mapping.inverse(z), mapping.inverse(w))

    return kernel


# ---------------------------------------------------------------------------
# Decay envelope


@dataclass
class DecayReport:
    max_constant: float
    envelope: float
    samples: int

    @property
    def passed(self) -> bool:
        return self.max_constant <= self.envelope


def verify_decay(l_values: Iterable[float], samples: int, seed: int = 0,
                 envelope: float = 10.0) -> DecayReport:
    """Empirical constant C in |K_l| <= C exp(-Re(z-w)^2/2) / (1 + |Im(z-w)|).

    Sampled over |z|, |w| <= 30 and the given offsets l; the bound is an
    empirical envelope (existence is all the theory asserts).
    """
    rng = np.random.default_rng(seed)
    ls = np.asarray(list(l_values), dtype=float)
    worst = -math.inf
    per_l = max(1, samples // ls.size)
    for l in ls:
        z = 30 * (2 * rng.random(per_l) - 1) + 30j * (2 * rng.random(per_l) - 1)
        w = 30 * (2 * rng.random(per_l) - 1) + 30j * (2 * rng.random(per_l) - 1)
        u = z - w
        log_ratio = (edge_log_abs(l, z, w) + 0.5 * np.real(u) ** 2
                     + np.log1p(np.abs(np.imag(u))))
        worst = max(worst, float(np.max(log_ratio)))
    return DecayReport(max_constant=math.exp(worst), envelope=envelope,
                       samples=samples)


# ---------------------------------------------------------------------------
# Regions and area laws


@dataclass(frozen=True)
class Region:
    """Bounded set with piecewise smooth boundary for flux integrals.

    kind: "disc" (radius), "square" (side, centered), or "strip"
    (axis-aligned rectangle [x0, x1] x [y0, y1], a bounded piece of a
    half-plane strip). Perimeter follows the normalized convention
    arclength / pi, so perim(disc R) = 2 R and |disc R| = R^2.
    """

    kind: str
    radius: float = 0.0
    side: float = 0.0
    x0: float = 0.0
    x1: float = 0.0
    y0: float = 0.0
    y1: float = 0.0

    def indicator(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        if self.kind == "disc":
            return np.abs(z) <= self.radius
        if self.kind == "square":
            h = self.side / 2
            return (np.abs(z.real) <= h) & (np.abs(z.imag) <= h)
        return ((z.real >= self.x0) & (z.real <= self.x1)
                & (z.imag >= self.y0) & (z.imag <= self.y1))

    @property
    def perimeter(self) -> float:
        if self.kind == "disc":
            return 2.0 * self.radius
        if self.kind == "square":
            return 4.0 * self.side / math.pi
        return 2.0 * ((self.x1 - self.x0) + (self.y1 - self.y0)) / math.pi

    @property
    def area(self) -> float:
        if self.kind == "disc":
            return self.radius ** 2
        if self.kind == "square":
            return self.side ** 2 / math.pi
        return (self.x1 - self.x0) * (self.y1 - self.y0) / math.pi

    @property
    def bounding_radius(self) -> float:
        if self.kind == "disc":
            return self.radius
        if self.kind == "square":
            return self.side / math.sqrt(2.0)
        return max(abs(self.x0), abs(self.x1), abs(self.y0), abs(self.y1)) * math.sqrt(2)

    def quadrature(self, pitch: float):
        """Midpoint rule on the region with cell size <= pitch (dA weights)."""
        rb = self.bounding_radius
        nn = int(math.ceil(2 * rb / pitch))
        ax = -rb + (np.arange(nn) + 0.5) * (2 * rb / nn)
        gx, gy = np.meshgrid(ax, ax)
        z = (gx + 1j * gy).ravel()
        keep = self.indicator(z)
        cell = (2 * rb / nn) ** 2 / math.pi
        return z[keep], np.full(int(np.sum(keep)), cell)


def disc_region(radius: float) -> Region:
    return Region("disc", radius=radius)


def square_region(side: float) -> Region:
    return Region("square", side=side)


def strip_region(x0: float, x1: float, y0: float, y1: float) -> Region:
    return Region("strip", x0=x0, x1=x1, y0=y0, y1=y1)


@dataclass
class AreaLawResult:
    flux: float
    perim: float
    ratio: float
    log_ratio: float  # flux / (perim * (1 + log+ (|E|/perim)))


def _graded_line(t_max: float, order: int = 12):
    """Symmetric 1-d rule on [-t_max, t_max], panels doubling away from 0."""
    edges = [0.0, 0.5, 1.0]
    while edges[-1] < t_max:
        edges.append(min(2.0 * edges[-1], t_max))
    nodes, weights = [], []
    from scipy.special import roots_legendre
    x, w = roots_legendre(order)
    for a, b in zip(edges[:-1], edges[1:]):
        half, mid = 0.5 * (b - a), 0.5 * (a + b)
        nodes.append(mid + half * x)
        weights.append(half * w)
    t = np.concatenate(nodes)
    wt = np.concatenate(weights)
    return np.concatenate([-t[::-1], t]), np.concatenate([wt[::-1], wt])


def _edge_abs2(x_w, u, l):
    """|K_l(w + u, w)|^2 for Re(w) = x_w (it depends only on that and u)."""
    return np.abs(edge_kernel(l, x_w + u, np.asarray(x_w, dtype=complex))) ** 2


def area_law(kernel: LimitKernel, region: Region, pitch: float = 0.15,
             tail_radius: float = 8.0) -> AreaLawResult:
    """Boundary flux integral(|K(z, w)|^2, z in E, w outside E).

    Written as an integral over w in E and the displacement u = z - w. The
    bulk kernel decays like a Gaussian in u, so |u| <= tail_radius captures
    the flux to ~1e-6. The edge kernel decays only like 1 / Im(u)^2, so its
    displacement grid is graded out to a tail scaled by |E| / perim.
    """
    wz, ww = region.quadrature(pitch)
    flux = 0.0
    if kernel.kind == "ginibre":
        un, uw = polar_grid(0.0, tail_radius, max(8, int(tail_radius)),
                            64, gl_order=8)
        gauss = np.exp(-np.abs(un) ** 2) * uw
        for lo in range(0, wz.size, 512):
            sl = slice(lo, min(lo + 512, wz.size))
            outside = ~region.indicator(wz[sl, None] + un[None, :])
            flux += float(np.sum(ww[sl, None] * outside * gauss[None, :]))
    else:
        t_max = max(tail_radius, 12.0 * region.area / max(region.perimeter, 1e-9))
        ux, uxw = _graded_line(6.0, order=10)
        uy, uyw = _graded_line(t_max, order=10)
        un = (ux[:, None] + 1j * uy[None, :]).ravel()
        uw = (uxw[:, None] * uyw[None, :]).ravel() / math.pi
        xs, inv = np.unique(np.round(wz.real, 12), return_inverse=True)
        prof = np.empty((xs.size, un.size))
        for i, x in enumerate(xs):
            prof[i] = _edge_abs2(x, un, kernel.l)
        prof *= uw[None, :]
        for lo in range(0, wz.size, 256):
            sl = slice(lo, min(lo + 256, wz.size))
            outside = ~region.indicator(wz[sl, None] + un[None, :])
            flux += float(np.sum(ww[sl, None] * outside * prof[inv[sl]]))
    if not math.isfinite(flux):
        raise NumericalError("area-law quadrature did not converge")
    perim = region.perimeter
    logp = max(0.0, math.log(region.area / perim)) if perim > 0 else 0.0
    return AreaLawResult(flux=flux, perim=perim, ratio=flux / perim,
                         log_ratio=flux / (perim * (1.0 + logp)))


# ---------------------------------------------------------------------------
# Finite-n edge profiles


@dataclass
class BoundaryProfile:
    x: np.ndarray
    rescaled: np.ndarray
    predicted: np.ndarray
    l: float
    n: int

    @property
    def max_deviation(self) -> float:
        return float(np.max(np.abs(self.rescaled - self.predicted)))


def boundary_profile(space: WeightedPolySpace, potential: Potential,
                     drop: DropletDescriptor, l: float, window: int = 161,
                     x_range: float = 4.0) -> BoundaryProfile:
    """Rescaled one-point density across the droplet edge vs F(2x + 2l).

    The zoom point sits at signed distance l (in blown-up units) outside the
    boundary point q along the outward normal; the cross-section spans
    x in [-x_range, x_range].
    """
    if drop.kind != "disc":
        raise UnsupportedError("edge profiles need an analytic droplet")
    n = space.m
    q = complex(drop.radius)
    normal = drop.outward_normal(q)
    dq = float(potential.laplacian(q))
    if dq <= 0:
        raise ConfigError("zoom at a point with vanishing density")
    p = q + l * normal / math.sqrt(n * dq)
    # the offset l is defined through lap Q at p itself; one refinement pass
    p = q + l * normal / math.sqrt(n * float(potential.laplacian(p)))
    dqp = float(potential.laplacian(p))
    scale = math.sqrt(n * dqp)
    x = np.linspace(-x_range, x_range, window)
    zeta = p + x * normal / scale
    rescaled = space.one_point(zeta) / (n * dqp)
    predicted = erfc_profile(2.0 * x + 2.0 * l)
    return BoundaryProfile(x=x, rescaled=rescaled, predicted=predicted,
                           l=l, n=n)
