"""Energies, Gibbs sampling, and minimum-energy configurations.

The total energy of points z_1..z_n in field n*Q is

    H = sum over ordered pairs j != k of log 1/|z_j - z_k|  +  n * sum Q(z_j),

so each unordered pair is counted twice. Coincident points get a +inf
sentinel instead of an exception so that Markov moves reject naturally.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError, NumericalError
from .potential import Potential, equilibrium_sample, droplet, max_laplacian

GIBBS = "gibbs"
FEKETE = "fekete"
SYNTHETIC = "synthetic"


@dataclass(frozen=True)
class Configuration:
    """An n-point plane configuration with its sampling provenance."""

    points: np.ndarray  # (n,) complex
    beta: float
    seed: int
    provenance: str
    c: Optional[float] = None
    note: str = ""

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=complex)
        object.__setattr__(self, "points", pts)
        if pts.ndim != 1 or pts.size < 2:
            raise ConfigError("a configuration needs at least 2 points")
        if not np.all(np.isfinite(pts)):
            raise ConfigError("configuration contains non-finite points")
        if self.provenance == GIBBS and self.c is not None:
            want = self.c * math.log(pts.size)
            if self.beta != want:
                raise ConfigError(
                    f"beta={self.beta} inconsistent with c*log(n)={want}")

    @property
    def n(self) -> int:
        return self.points.size

    def to_json_dict(self) -> dict:
        d = {
            "n": self.n,
            "beta": None if math.isinf(self.beta) else self.beta,
            "seed": self.seed,
            "provenance": self.provenance,
            "points": [[z.real, z.imag] for z in self.points],
        }
        if self.c is not None:
            d["c"] = self.c
        if self.note:
            d["note"] = self.note
        return d

    @classmethod
    def from_json_dict(cls, d: dict) -> "Configuration":
        pts = np.array([complex(x, y) for x, y in d["points"]])
        beta = d["beta"] if d["beta"] is not None else math.inf
        return cls(points=pts, beta=beta, seed=d["seed"],
                   provenance=d["provenance"], c=d.get("c"),
                   note=d.get("note", ""))

    def dumps(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)

    @classmethod
    def loads(cls, s: str) -> "Configuration":
        return cls.from_json_dict(json.loads(s))


@dataclass
class ChainDiagnostics:
    acceptance_rate: float
    energy_trace: np.ndarray
    step_scale: float


def _points_of(config) -> np.ndarray:
    return np.asarray(getattr(config, "points", config), dtype=complex)


def _pair_dist_sq(pts: np.ndarray) -> np.ndarray:
    """Squared pairwise distances with 1.0 on the diagonal."""
    x, y = pts.real, pts.imag
    dx = x[:, None] - x[None, :]
    dy = y[:, None] - y[None, :]
    ad2 = dx * dx
    ad2 += dy * dy
    np.fill_diagonal(ad2, 1.0)
    return ad2


def hamiltonian(config, potential: Potential) -> float:
    """Exact O(n^2) energy; +inf if two points coincide."""
    pts = _points_of(config)
    n = pts.size
    ad2 = _pair_dist_sq(pts)
    if np.any(ad2 == 0.0):
        return math.inf
    interaction = -0.5 * float(np.sum(np.log(ad2)))  # each pair twice, diag 0
    return float(interaction + n * np.sum(potential.value(pts)))


def energy_and_grad(points: np.ndarray, potential: Potential):
    """(H, complex gradient) in one pairwise pass; inf energy on coincidence."""
    pts = points
    n = pts.size
    ad2 = _pair_dist_sq(pts)
    if np.any(ad2 == 0.0):
        raise NumericalError("coincident points in gradient evaluation")
    energy = -0.5 * float(np.sum(np.log(ad2))) \
        + n * float(np.sum(potential.value(pts)))
    diff = pts[:, None] - pts[None, :]
    diff /= ad2
    np.fill_diagonal(diff, 0.0)
    grad = -2.0 * np.sum(diff, axis=1) + n * potential.grad(pts)
    return energy, grad


def hamiltonian_delta(points: np.ndarray, potential: Potential, j: int,
                      z_new: complex) -> float:
    """H(points with z_j -> z_new) - H(points); O(n)."""
    pts = points
    n = pts.size
    z_old = pts[j]
    d_new = np.abs(z_new - pts)
    d_new[j] = 1.0
    if np.any(d_new == 0.0):
        return math.inf
    d_old = np.abs(z_old - pts)
    d_old[j] = 1.0
    inter = -2.0 * (np.sum(np.log(d_new)) - np.sum(np.log(d_old)))
    ext = n * (potential.value(z_new) - potential.value(z_old))
    return float(inter + ext)


def grad_hamiltonian_complex(points: np.ndarray, potential: Potential) -> np.ndarray:
    """dH/dx_j + i dH/dy_j for every j, as complex numbers."""
    return energy_and_grad(points, potential)[1]


def grad_hamiltonian(config, potential: Potential) -> np.ndarray:
    """Energy gradient per point as an (n, 2) array of real 2-vectors."""
    g = grad_hamiltonian_complex(_points_of(config), potential)
    return np.stack([g.real, g.imag], axis=1)


def metropolis_accept(delta_h: float, beta: float, u: float) -> bool:
    """Accept rule min(1, exp(-beta * delta_h)) driven by a uniform u."""
    if delta_h <= 0.0:
        return True
    if not math.isfinite(delta_h):
        return False
    return math.log(u) < -beta * delta_h


def sample_gibbs(potential: Potential, n: int, beta: Optional[float] = None,
                 c: Optional[float] = None, sweeps: int = 200, seed: int = 0):
    """Metropolis chain targeting the Boltzmann-Gibbs law at inverse
    temperature beta (or beta = c*log n when c is given).

    Single-particle Gaussian proposals; the step is adapted toward 30%
    acceptance during burn-in (first fifth of the sweeps) by a Robbins-Monro
    recursion and frozen afterwards. Deterministic given the seed.
    """
    if (beta is None) == (c is None):
        raise ConfigError("specify exactly one of beta, c")
    if c is not None:
        beta = c * math.log(n)
    if beta <= 0 or sweeps < 1:
        raise ConfigError("need beta > 0 and sweeps >= 1")

    drop = droplet(potential) if potential.is_radial else None
    max_dq = max_laplacian(potential, drop) if drop is not None else \
        float(np.max(potential.laplacian(np.linspace(0.1, 1.5, 64) + 0j)))
    step0 = 1.0 / math.sqrt(n * beta * max_dq)

    for attempt in range(4):
        rng = np.random.default_rng(seed)
        pts = equilibrium_sample(potential, n, rng)
        step = step0 / (4.0 ** attempt)
        energy = hamiltonian(pts, potential)
        if math.isfinite(energy):
            result = _run_chain(pts, potential, n, beta, sweeps, step, rng)
            if result is not None:
                pts, diag = result
                return (Configuration(points=pts, beta=beta, seed=seed,
                                      provenance=GIBBS, c=c), diag)
    raise NumericalError("non-finite energy persisted across chain restarts")


def _sweep(pts, potential, n, beta, step, rng):
    """One Metropolis sweep of n single-particle moves, in place.

    Returns (accepted count, energy change). Uses squared-distance logs:
    the pair energy is -sum(log d^2) over unordered pairs.
    """
    noise = rng.standard_normal((n, 2))
    us = rng.random(n)
    order = rng.integers(0, n, size=n)
    log_us = np.log(us)
    acc = 0
    dh_total = 0.0
    for k in range(n):
        j = order[k]
        z_old = pts[j]
        z_new = z_old + step * complex(noise[k, 0], noise[k, 1])
        d_new = pts - z_new
        d2_new = d_new.real ** 2 + d_new.imag ** 2
        d2_new[j] = 1.0
        if np.any(d2_new == 0.0):
            continue
        d_old = pts - z_old
        d2_old = d_old.real ** 2 + d_old.imag ** 2
        d2_old[j] = 1.0
        dh = -(float(np.sum(np.log(d2_new))) - float(np.sum(np.log(d2_old)))) \
            + n * (potential.value_scalar(z_new) - potential.value_scalar(z_old))
        if dh <= 0.0 or (math.isfinite(dh) and log_us[k] < -beta * dh):
            pts[j] = z_new
            dh_total += dh
            acc += 1
    return acc, dh_total


def _run_chain(pts, potential, n, beta, sweeps, step, rng):
    burn = max(1, sweeps // 5)
    energy = hamiltonian(pts, potential)
    trace = []
    accepted = 0
    proposed = 0
    for sweep in range(sweeps):
        acc_sweep, dh = _sweep(pts, potential, n, beta, step, rng)
        energy += dh
        if sweep < burn:
            if not math.isfinite(energy):
                return None  # restart with a smaller step
            # Robbins-Monro toward 30% acceptance
            gain = 1.0 / (1.0 + sweep)
            step *= math.exp(gain * (acc_sweep / n - 0.3))
        else:
            accepted += acc_sweep
            proposed += n
            trace.append(energy)
        if sweep == burn - 1:
            energy = hamiltonian(pts, potential)  # resync accumulated drift
    diag = ChainDiagnostics(acceptance_rate=accepted / max(proposed, 1),
                            energy_trace=np.array(trace), step_scale=step)
    return pts, diag


def fekete(potential: Potential, n: int, seed: int = 0,
           anneal_sweeps: int = 20, grad_tol: float = 1e-8,
           max_iter: int = 50000) -> Configuration:
    """Low-energy configuration: annealing then descent.

    Anneals with beta doubling from 1 to 2^14, then runs damped gradient
    descent (Barzilai-Borwein steps with a backtracking safeguard) until the
    gradient max-norm drops below grad_tol * n. Returns the lowest-energy
    configuration seen; a failed line search returns the best iterate with a
    note set on the configuration.
    """
    if n < 2:
        raise ConfigError("need n >= 2")
    rng = np.random.default_rng(seed)
    pts = equilibrium_sample(potential, n, rng)

    beta = 1.0
    while beta <= 2.0 ** 14:
        scale = 1.0 / math.sqrt(n * beta)
        for _ in range(anneal_sweeps):
            _sweep(pts, potential, n, beta, scale, rng)
        beta *= 2.0

    pts, note = _descend(pts, potential, n, grad_tol * n, max_iter)
    return Configuration(points=pts, beta=math.inf, seed=seed,
                         provenance=FEKETE, note=note)


def _descend(pts, potential, n, tol, max_iter):
    energy, g = energy_and_grad(pts, potential)
    best_pts, best_energy = pts.copy(), energy
    recent = [energy] * 8  # nonmonotone line-search reference window
    alpha = 1.0 / (n * 8.0)
    note = ""
    for _ in range(max_iter):
        gmax = np.max(np.abs(g))
        if gmax <= tol:
            break
        moved = False
        a = alpha
        ref = max(recent)
        g_norm2 = float(np.sum(np.abs(g) ** 2))
        for _ in range(60):
            cand = pts - a * g
            e_cand = hamiltonian(cand, potential)
            if e_cand <= ref - 1e-4 * a * g_norm2:
                moved = True
                break
            a *= 0.5
        if not moved:
            note = "line search failed before reaching gradient tolerance"
            break
        e_cand, g_new = energy_and_grad(cand, potential)
        ds = cand - pts
        dg = g_new - g
        denom = np.real(np.vdot(ds, dg))
        alpha = np.real(np.vdot(ds, ds)) / denom if denom > 0 else a
        alpha = min(max(alpha, 1e-12), 1.0)
        pts, energy, g = cand, e_cand, g_new
        recent = recent[1:] + [energy]
        if energy < best_energy:
            best_pts, best_energy = pts.copy(), energy
    else:
        note = "iteration cap reached before gradient tolerance"
    if energy > best_energy:
        return best_pts, note
    return pts, note
