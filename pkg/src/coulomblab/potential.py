"""External fields Q, their derivatives, equilibrium measures and droplets.

Conventions used throughout the package:
  * dA is the Lebesgue measure divided by pi.
  * The Laplacian is the quarter Laplacian, lap Q = (Qxx + Qyy) / 4, so that
    the equilibrium density on the droplet is exactly lap Q under dA.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad
from scipy.spatial import ConvexHull

from .errors import ConfigError, ModelViolationError, UnsupportedError

RADIAL_MONOMIAL = "radial_monomial"
RADIAL_PLUS_HARMONIC = "radial_monomial_plus_harmonic"
CUSTOM = "custom"


@dataclass(frozen=True)
class Potential:
    """External field Q on the plane.

    kind selects between Q = |z|^(2p), Q = |z|^(2p) - t*Re(z^d), and a
    user-supplied triple of callables (value, complex gradient, quarter
    Laplacian). Built-in kinds satisfy the growth condition
    Q(z) / (2 log|z|) -> infinity along rays.
    """

    kind: str
    p: int = 1
    t: float = 0.0
    d: int = 1
    value_fn: Optional[Callable] = field(default=None, repr=False)
    grad_fn: Optional[Callable] = field(default=None, repr=False)
    lap_fn: Optional[Callable] = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind in (RADIAL_MONOMIAL, RADIAL_PLUS_HARMONIC):
            if self.p < 1 or int(self.p) != self.p:
                raise ConfigError(f"p must be a positive integer, got {self.p}")
        if self.kind == RADIAL_PLUS_HARMONIC:
            if self.d < 1 or int(self.d) != self.d:
                raise ConfigError(f"d must be a positive integer, got {self.d}")
            if self.d >= 2 * self.p:
                raise ConfigError(
                    f"harmonic degree d={self.d} must be < 2p={2 * self.p} "
                    "for the growth condition to hold")
        elif self.kind == CUSTOM:
            if self.value_fn is None:
                raise ConfigError("custom potential needs a value callable")
        elif self.kind != RADIAL_MONOMIAL:
            raise ConfigError(f"unknown potential kind {self.kind!r}")

    # -- evaluation ---------------------------------------------------------

    def value(self, z):
        z = np.asarray(z, dtype=complex)
        if self.kind == CUSTOM:
            return np.asarray(self.value_fn(z), dtype=float)
        q = np.abs(z) ** (2 * self.p)
        if self.kind == RADIAL_PLUS_HARMONIC:
            q = q - self.t * np.real(z ** self.d)
        return q

    def grad(self, z):
        """Gradient of Q as a complex number gx + i*gy."""
        z = np.asarray(z, dtype=complex)
        if self.kind == CUSTOM:
            if self.grad_fn is None:
                raise ConfigError("custom potential has no gradient callable")
            return np.asarray(self.grad_fn(z), dtype=complex)
        # dQ/dz = p |z|^(2p-2) conj(z) - t d z^(d-1) / 2; grad = 2 conj(dQ/dz).
        dz = self.p * np.abs(z) ** (2 * self.p - 2) * np.conj(z)
        if self.kind == RADIAL_PLUS_HARMONIC:
            dz = dz - 0.5 * self.t * self.d * z ** (self.d - 1)
        return 2.0 * np.conj(dz)

    def laplacian(self, z):
        """Quarter Laplacian of Q; harmonic parts contribute nothing."""
        z = np.asarray(z, dtype=complex)
        if self.kind == CUSTOM:
            if self.lap_fn is None:
                raise ConfigError("custom potential has no laplacian callable")
            return np.asarray(self.lap_fn(z), dtype=float)
        return self.p ** 2 * np.abs(z) ** (2 * self.p - 2)

    def eval(self, z):
        """(Q(z), (Qx, Qy), lap Q(z)) at a single point."""
        g = complex(self.grad(z))
        return float(self.value(z)), (g.real, g.imag), float(self.laplacian(z))

    def value_scalar(self, z: complex) -> float:
        """Scalar Q(z) without array overhead (Markov-chain hot path)."""
        if self.kind == CUSTOM:
            return float(self.value_fn(z))
        q = (z.real * z.real + z.imag * z.imag) ** self.p
        if self.kind == RADIAL_PLUS_HARMONIC:
            q -= self.t * (z ** self.d).real
        return q

    # -- radial profile helpers (used by the polynomial-space builder) ------

    def radial_part(self, r):
        """Angular minimum of Q on the circle |z| = r (a lower envelope)."""
        r = np.asarray(r, dtype=float)
        q = r ** (2 * self.p)
        if self.kind == RADIAL_PLUS_HARMONIC:
            q = q - abs(self.t) * r ** self.d
        return q

    @property
    def is_radial(self) -> bool:
        return self.kind == RADIAL_MONOMIAL


def ginibre() -> Potential:
    return Potential(RADIAL_MONOMIAL, p=1)


def radial_monomial(p: int) -> Potential:
    return Potential(RADIAL_MONOMIAL, p=p)


def radial_plus_harmonic(p: int, t: float, d: int) -> Potential:
    return Potential(RADIAL_PLUS_HARMONIC, p=p, t=t, d=d)


def custom_potential(value, grad=None, laplacian=None) -> Potential:
    return Potential(CUSTOM, value_fn=value, grad_fn=grad, lap_fn=laplacian)


def figure_gallery_potentials():
    """The four low-energy showcase fields: |z|^2, |z|^4, and two
    harmonically deformed quartic/sextic fields."""
    return {
        "abs2": ginibre(),
        "abs4": radial_monomial(2),
        "abs4_re2": radial_plus_harmonic(2, 2.0 / np.sqrt(2.0), 2),
        "abs6_re3": radial_plus_harmonic(3, 2.0 / np.sqrt(5.0), 3),
    }


# ---------------------------------------------------------------------------
# Droplets


@dataclass(frozen=True)
class DropletDescriptor:
    """Support S of the equilibrium measure, with a distance oracle.

    kind is one of "disc", "annulus", "empirical". The empirical branch keeps
    the convex hull of a reference configuration, dilated by ``margin``.
    """

    kind: str
    radius: float = 0.0
    r_in: float = 0.0
    hull: Optional[np.ndarray] = None  # (k, 2) hull vertices, ccw
    margin: float = 0.0

    def distance(self, z):
        """dist(z, S); exactly 0 on S. 1-Lipschitz in z."""
        z = np.asarray(z, dtype=complex)
        if self.kind == "disc":
            return np.maximum(np.abs(z) - self.radius, 0.0)
        if self.kind == "annulus":
            r = np.abs(z)
            return np.maximum(np.maximum(self.r_in - r, r - self.radius), 0.0)
        d = _convex_polygon_distance(self.hull, z)
        return np.maximum(d - self.margin, 0.0)

    def contains(self, z):
        return self.distance(z) <= 0.0

    def boundary_points(self, k: int):
        """k points on the outer boundary of S (analytic kinds only)."""
        if self.kind in ("disc", "annulus"):
            ang = 2 * np.pi * np.arange(k) / k
            return self.radius * np.exp(1j * ang)
        raise UnsupportedError("empirical droplets have no exact boundary")

    def outward_normal(self, q: complex) -> complex:
        """Unit outward normal at a boundary point q (analytic kinds only)."""
        if self.kind in ("disc", "annulus"):
            if abs(q) == 0:
                raise ConfigError("normal undefined at the origin")
            return q / abs(q)
        raise UnsupportedError("empirical droplets have no exact normal")


def _convex_polygon_distance(verts: np.ndarray, z: np.ndarray):
    """Distance from points z to a convex polygon (0 inside)."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    pts = np.stack([z.real, z.imag], axis=-1)  # (..., 2)
    a = verts
    b = np.roll(verts, -1, axis=0)
    ab = b - a  # (k, 2)
    # signed area cross products; inside iff all >= 0 for ccw hulls
    rel = pts[:, None, :] - a[None, :, :]  # (n, k, 2)
    cross = ab[None, :, 0] * rel[..., 1] - ab[None, :, 1] * rel[..., 0]
    inside = np.all(cross >= -1e-12, axis=1)
    # point-segment distances
    ab2 = np.sum(ab ** 2, axis=1)
    tt = np.clip(np.sum(rel * ab[None, :, :], axis=-1) / ab2[None, :], 0.0, 1.0)
    proj = a[None, :, :] + tt[..., None] * ab[None, :, :]
    seg_d = np.sqrt(np.sum((pts[:, None, :] - proj) ** 2, axis=-1))
    d = np.where(inside, 0.0, np.min(seg_d, axis=1))
    return d.reshape(np.shape(np.asarray(z)))


def droplet(potential: Potential, reference=None, margin: float = 0.0) -> DropletDescriptor:
    """Support of the equilibrium measure.

    Radial monomials admit the closed form Disc(p^(-1/(2p))), normalized so
    that the equilibrium mass integral(lap Q, S) equals 1. Other kinds need a
    reference configuration whose convex hull (dilated by ``margin``) stands
    in for S.
    """
    if potential.kind == RADIAL_MONOMIAL:
        r = potential.p ** (-1.0 / (2 * potential.p))
        return DropletDescriptor("disc", radius=r)
    if reference is None:
        raise UnsupportedError(
            f"no analytic droplet for kind {potential.kind!r}; "
            "supply a reference configuration")
    pts = np.asarray(getattr(reference, "points", reference), dtype=complex)
    hull = ConvexHull(np.stack([pts.real, pts.imag], axis=1))
    verts = hull.points[hull.vertices]  # ccw by scipy convention
    return DropletDescriptor("empirical", hull=verts, margin=margin,
                             radius=float(np.max(np.abs(pts))) + margin)


def vicinity(drop: DropletDescriptor, z: complex, big_m: float, n: int):
    """Membership in the big_m / sqrt(n) neighbourhood of the droplet.

    Returns (inside, delta) with inside True iff delta < big_m / sqrt(n)
    (strict, so the neighbourhood's boundary is excluded).
    """
    if big_m < 0 or n < 1:
        raise ConfigError("need big_m >= 0 and n >= 1")
    delta = float(drop.distance(z))
    return delta < big_m / np.sqrt(n), delta


def equilibrium_density(potential: Potential, drop: DropletDescriptor, z):
    """Density of the equilibrium measure wrt dA: lap Q on S, zero outside."""
    z = np.asarray(z, dtype=complex)
    lap = potential.laplacian(z)
    inside = drop.distance(z) <= 0.0
    if np.any(inside & (lap < 0)):
        raise ModelViolationError("negative Laplacian inside the droplet")
    return np.where(inside, lap, 0.0)


def equilibrium_mass(potential: Potential, drop: DropletDescriptor) -> float:
    """integral(lap Q, S) under dA via adaptive radial quadrature.

    Should equal 1 for analytic droplets; used as a self check.
    """
    if drop.kind != "disc":
        raise UnsupportedError("mass check implemented for disc droplets")
    p = potential.p
    val, _ = quad(lambda r: 2.0 * p ** 2 * r ** (2 * p - 1), 0.0, drop.radius,
                  epsabs=1e-13, epsrel=1e-13)
    return val


def max_laplacian(potential: Potential, drop: DropletDescriptor, pad: float = 0.1) -> float:
    """max of lap Q over a slightly padded droplet (grid estimate)."""
    r_out = drop.radius + pad
    r = np.linspace(0.0, r_out, 256)
    ang = np.exp(1j * np.linspace(0.0, 2 * np.pi, 64, endpoint=False))
    vals = potential.laplacian(np.outer(r, ang))
    return float(np.max(vals))


def equilibrium_sample(potential: Potential, n: int, rng: np.random.Generator):
    """Stratified draw of n points from the equilibrium measure.

    For radial monomials the radial CDF p*r^(2p) is inverted exactly with
    stratified uniforms; other kinds fall back to the radial-part envelope,
    which is only used to seed Markov chains.
    """
    p = potential.p
    u = (np.arange(n) + rng.random(n)) / n
    r = (u / p) ** (1.0 / (2 * p))
    theta = rng.random(n) * 2 * np.pi
    pts = r * np.exp(1j * theta)
    return pts[rng.permutation(n)]
