"""Configuration statistics: spacing, disc counts, densities, lattice order.

Counting conventions follow the microscopic scale 1/sqrt(n): discs around a
zoom point p have radius L/sqrt(n), densities are counts divided by L^2, and
spacing is sqrt(n) times the minimal pairwise distance.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigError
from .potential import DropletDescriptor


def _points_of(config) -> np.ndarray:
    return np.asarray(getattr(config, "points", config), dtype=complex)


def spacing_bruteforce(config) -> float:
    pts = _points_of(config)
    n = pts.size
    d = np.abs(pts[:, None] - pts[None, :])
    return math.sqrt(n) * float(np.min(d[np.triu_indices(n, 1)]))


def spacing(config) -> float:
    """sqrt(n) * min pairwise distance, via uniform-grid spatial hashing.

    With cell size h, any pair at distance <= h shares a 3x3 neighbourhood,
    so a candidate minimum <= h is certified global; otherwise the cell size
    doubles (O(1) expected rounds for near-uniform configurations).
    """
    pts = _points_of(config)
    n = pts.size
    xs, ys = pts.real, pts.imag
    span = max(xs.max() - xs.min(), ys.max() - ys.min(), 1e-300)
    h = 2.0 * span / math.sqrt(n)
    best = math.inf
    for _ in range(64):
        cells = defaultdict(list)
        for i in range(n):
            cells[(math.floor(xs[i] / h), math.floor(ys[i] / h))].append(i)
        best = math.inf
        for (cx, cy), members in cells.items():
            neigh = []
            for dx in (-1, 0, 1):
                for dy in (-1, 0, 1):
                    neigh.extend(cells.get((cx + dx, cy + dy), ()))
            neigh = np.asarray(neigh)
            arr = pts[neigh]
            for i in members:
                d = np.abs(arr[neigh != i] - pts[i])
                if d.size:
                    best = min(best, float(np.min(d)))
        if best <= h:
            return math.sqrt(n) * best
        h *= 2.0
    return math.sqrt(n) * best


def count_disc(config, p: complex, L: float, s: float, n: Optional[int] = None):
    """Counts (N, N-, N+) in discs of radius (L, L-s, L+s) / sqrt(n) at p."""
    if not L > s >= 0:
        raise ConfigError("need L > s >= 0")
    pts = _points_of(config)
    n = n or pts.size
    d = np.abs(pts - p) * math.sqrt(n)
    return (int(np.sum(d < L)), int(np.sum(d < L - s)), int(np.sum(d < L + s)))


def vacuum_distance(config, drop: DropletDescriptor) -> float:
    """Largest distance from a configuration point to the droplet."""
    return float(np.max(drop.distance(_points_of(config))))


def psi6(config, bulk_mask=None, drop: Optional[DropletDescriptor] = None,
         bulk_margin: float = 0.15) -> float:
    """Sixfold bond-orientational order over bulk points.

    Neighbours are the 6 nearest points; a perfect triangular lattice gives
    1, uniform noise stays well below. Bulk points are either given by a
    mask or taken at relative depth bulk_margin inside the droplet.
    """
    pts = _points_of(config)
    if bulk_mask is None:
        if drop is None or drop.kind != "disc":
            raise ConfigError("psi6 needs a bulk mask or a disc droplet")
        bulk_mask = np.abs(pts) <= drop.radius * (1.0 - bulk_margin)
    idx = np.flatnonzero(bulk_mask)
    if idx.size < 7 or pts.size < 7:
        raise ConfigError("need at least 7 points for sixfold order")
    xy = np.stack([pts.real, pts.imag], axis=1)
    tree = cKDTree(xy)
    _, nbr = tree.query(xy[idx], k=7)
    vals = np.empty(idx.size)
    for row, i in enumerate(idx):
        others = [j for j in nbr[row] if j != i][:6]
        ang = np.angle(pts[others] - pts[i])
        vals[row] = abs(np.mean(np.exp(6j * ang)))
    return float(np.mean(vals))


# ---------------------------------------------------------------------------
# Zoom rules and density tables


@dataclass(frozen=True)
class ZoomRule:
    """How the zoom point p_n is chosen for each family member.

    kind "fixed": constant point. kind "boundary": offset l from a boundary
    point along the outward normal, in blown-up units. kind "adversarial":
    densest (or emptiest) disc centre found by grid search over a band of
    the droplet.
    """

    kind: str
    point: complex = 0j
    l: float = 0.0
    boundary_point: complex = 1.0 + 0j
    densest: bool = True
    band: str = "bulk"      # adversarial search region: "bulk" or "vicinity"
    big_m: float = 2.0

    def locate(self, config, drop: DropletDescriptor, L: float,
               delta_q: Callable) -> complex:
        n = _points_of(config).size
        if self.kind == "fixed":
            return self.point
        if self.kind == "boundary":
            q = self.boundary_point
            normal = drop.outward_normal(q)
            dq = float(delta_q(q))
            return q + self.l * normal / math.sqrt(n * dq)
        if self.kind != "adversarial":
            raise ConfigError(f"unknown zoom rule {self.kind!r}")
        return self._adversarial(config, drop, L, n)

    def _adversarial(self, config, drop: DropletDescriptor, L: float, n: int):
        pts = _points_of(config)
        pitch = 0.5 / math.sqrt(n)
        r_max = drop.radius + self.big_m / math.sqrt(n)
        ax = np.arange(-r_max, r_max + pitch, pitch)
        gx, gy = np.meshgrid(ax, ax)
        centers = (gx + 1j * gy).ravel()
        if self.band == "bulk":
            keep = np.abs(centers) <= max(drop.radius - (L + 2.0) / math.sqrt(n),
                                          pitch)
        else:
            keep = drop.distance(centers) < self.big_m / math.sqrt(n)
        centers = centers[keep]
        tree = cKDTree(np.stack([pts.real, pts.imag], axis=1))
        counts = tree.query_ball_point(
            np.stack([centers.real, centers.imag], axis=1),
            r=L / math.sqrt(n), return_length=True)
        best = np.argmax(counts) if self.densest else np.argmin(counts)
        return complex(centers[best])


def bl_density(family: Sequence, zoom: ZoomRule, L_grid: Sequence[float],
               drop: DropletDescriptor, delta_q: Callable,
               tail_from: Optional[int] = None):
    """Counting densities N / L^2 across a family of configurations.

    Returns rows (L, lo, hi) where lo/hi are min/max of the density over the
    family tail (members with n >= tail_from; default: second half).
    """
    family = list(family)
    ns = [(f.points.size if hasattr(f, "points") else len(f)) for f in family]
    if tail_from is None:
        tail_from = sorted(ns)[len(ns) // 2]
    rows = []
    for L in L_grid:
        dens = []
        for cfg, n in zip(family, ns):
            if n < tail_from:
                continue
            p = zoom.locate(cfg, drop, L, delta_q)
            count, _, _ = count_disc(cfg, p, L, 0.0)
            dens.append(count / L ** 2)
        rows.append((L, min(dens), max(dens)))
    return rows


def discrepancy(family: Sequence, zoom: ZoomRule, L: float, regime: str,
                drop: DropletDescriptor, delta_q: Callable,
                tail_from: Optional[int] = None) -> float:
    """Normalized discrepancy residual at scale L, max over the family tail.

    Bulk: |N - lapQ(p*) L^2| / L^(5/3); boundary: the residual against half
    the bulk law, normalized by L^(5/3) log L.
    """
    if regime not in ("bulk", "boundary"):
        raise ConfigError("regime must be 'bulk' or 'boundary'")
    family = list(family)
    ns = [(f.points.size if hasattr(f, "points") else len(f)) for f in family]
    if tail_from is None:
        tail_from = sorted(ns)[len(ns) // 2]
    worst = 0.0
    for cfg, n in zip(family, ns):
        if n < tail_from:
            continue
        p = zoom.locate(cfg, drop, L, delta_q)
        count, _, _ = count_disc(cfg, p, L, 0.0)
        dq = float(delta_q(p))
        expect = dq * L * L if regime == "bulk" else 0.5 * dq * L * L
        resid = abs(count - expect)
        norm = L ** (5.0 / 3.0)
        if regime == "boundary":
            norm *= max(math.log(L), 1e-9)
        worst = max(worst, resid / norm)
    return worst


@dataclass
class StatReport:
    """Summary statistics of one configuration against its droplet."""

    n: int
    spacing: float
    vacuum: float
    sqrt_n_vacuum: float
    psi6: Optional[float]
    counts: list = field(default_factory=list)   # (p, L, N, N-, N+)

    @classmethod
    def build(cls, config, drop: DropletDescriptor, delta_q: Callable,
              L_grid: Sequence[float] = (2.0, 4.0, 8.0),
              zooms: Sequence[complex] = (0j,), s: float = 0.25):
        pts = _points_of(config)
        n = pts.size
        counts = []
        for p in zooms:
            for L in L_grid:
                nn, nm, np_ = count_disc(config, p, L, s)
                counts.append((p, L, nn, nm, np_))
        try:
            hexa = psi6(config, drop=drop)
        except ConfigError:
            hexa = None
        vac = vacuum_distance(config, drop)
        return cls(n=n, spacing=spacing(config), vacuum=vac,
                   sqrt_n_vacuum=math.sqrt(n) * vac, psi6=hexa, counts=counts)

    def to_json_dict(self) -> dict:
        return {
            "n": self.n,
            "spacing": self.spacing,
            "vacuum": self.vacuum,
            "sqrt_n_vacuum": self.sqrt_n_vacuum,
            "psi6": self.psi6,
            "counts": [
                {"p": [p.real, p.imag], "L": L, "N": nn, "N_minus": nm,
                 "N_plus": np_}
                for (p, L, nn, nm, np_) in self.counts
            ],
        }


def fit_separation_constant(spacings_by_c: dict) -> dict:
    """Fit s0(c) = m_fit * exp(-3 / (2c)) to per-c minimum tail spacings.

    Returns {"m": fitted constant, "s0": {c: predicted}}; the functional form
    is reported, not asserted.
    """
    cs = sorted(spacings_by_c)
    mins = {c: min(spacings_by_c[c]) for c in cs}
    ratios = [mins[c] / math.exp(-1.5 / c) for c in cs]
    m_fit = float(np.median(ratios))
    return {"m": m_fit,
            "s0": {c: m_fit * math.exp(-1.5 / c) for c in cs},
            "observed_min": mins}
