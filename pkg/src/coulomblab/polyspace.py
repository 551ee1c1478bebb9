"""Weighted polynomial spaces, reproducing kernels, and Lagrange polynomials.

An order-m space holds functions q(z) * exp(-m Q(z) / 2) with deg q < m,
viewed inside L2(dA). For purely radial fields the weighted monomials are
orthogonal and only their norms are needed (1-d log-domain quadrature, m up
to a few thousand). Fields with a harmonic deformation -t*Re(z^d) couple
monomials within residue classes mod d; those blocks are orthonormalized by
an Arnoldi-style recurrence evaluated on quadrature nodes, never through an
explicit monomial Gram matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError, NumericalError
from .potential import Potential, RADIAL_MONOMIAL, DropletDescriptor
from .quadrature import composite_gl, polar_grid, logsumexp_weighted

_MAX_PLANE_NODES = 6_000_000
_BLOCK_ORDER_CAP = 256
_RADIAL_ORDER_CAP = 4096


@dataclass
class _Block:
    """One residue class of the Arnoldi orthonormalization."""
    residue: int
    columns: np.ndarray      # positions of this block's functions in the basis
    hess: np.ndarray         # (b, b-1) Hessenberg recurrence coefficients
    log_norm0: float


class WeightedPolySpace:
    """Orthonormal basis of an order-m weighted polynomial space."""

    def __init__(self, potential: Potential, m: int, kind: str,
                 log_norm2: Optional[np.ndarray], blocks: Optional[list],
                 r_cut: float, radial_panels: int, n_theta: int,
                 condition_estimate: float):
        self.potential = potential
        self.m = m
        self.kind = kind                    # "radial" | "blocks"
        self.log_norm2 = log_norm2          # radial: log of monomial norm^2
        self.blocks = blocks
        self.r_cut = r_cut
        self.radial_panels = radial_panels
        self.n_theta = n_theta
        self.condition_estimate = condition_estimate

    # -- basis evaluation ----------------------------------------------------

    def basis(self, z) -> np.ndarray:
        """Values of the orthonormal basis, shape z.shape + (m,)."""
        z = np.asarray(z, dtype=complex)
        flat = z.ravel()
        if self.kind == "radial":
            out = self._basis_radial(flat)
        else:
            out = self._basis_blocks(flat)
        return out.reshape(z.shape + (self.m,))

    def _basis_radial(self, flat: np.ndarray) -> np.ndarray:
        m = self.m
        nz = flat != 0
        logz = np.zeros_like(flat)
        logz[nz] = np.log(flat[nz])
        k = np.arange(m)
        expo = (logz[:, None] * k[None, :]
                - 0.5 * self.log_norm2[None, :]
                - 0.5 * m * self.potential.value(flat)[:, None])
        out = np.exp(expo)
        if np.any(~nz):
            out[~nz, 1:] = 0.0
            out[~nz, 0] = np.exp(-0.5 * self.log_norm2[0])
        return out

    def _basis_blocks(self, flat: np.ndarray) -> np.ndarray:
        out = np.zeros((flat.size, self.m), dtype=complex)
        mq2 = 0.5 * self.m * self.potential.value(flat)
        nz = flat != 0
        logz = np.zeros_like(flat)
        logz[nz] = np.log(flat[nz])
        for blk in self.blocks:
            b = blk.columns.size
            seed = np.exp(blk.residue * logz - mq2 - blk.log_norm0)
            if blk.residue > 0:
                seed[~nz] = 0.0
            vals = np.empty((flat.size, b), dtype=complex)
            vals[:, 0] = seed
            if b > 1:
                shift = flat ** self._block_step
                for kk in range(b - 1):
                    w = shift * vals[:, kk]
                    w -= vals[:, :kk + 1] @ blk.hess[:kk + 1, kk]
                    vals[:, kk + 1] = w / blk.hess[kk + 1, kk]
            out[:, blk.columns] = vals
        return out

    @property
    def _block_step(self) -> int:
        return self.potential.d if self.potential.kind != "custom" else 1

    # -- kernels --------------------------------------------------------------

    def kernel(self, z, w):
        """Reproducing kernel K(z, w), broadcasting over z and w."""
        bz = self.basis(z)
        bw = self.basis(w)
        return np.sum(bz * np.conj(bw), axis=-1)

    def kernel_matrix(self, z_list, w_list) -> np.ndarray:
        bz = self.basis(np.asarray(z_list))
        bw = self.basis(np.asarray(w_list))
        return bz @ np.conj(bw.T)

    def one_point(self, z):
        """Diagonal K(z, z) = expected particles per unit area at beta=1."""
        b = self.basis(z)
        return np.sum(np.abs(b) ** 2, axis=-1)

    def berezin(self, z, w):
        """|K(z, w)|^2 / K(z, z); a probability density in w."""
        r = self.one_point(z)
        if np.any(r < 1e-12):
            raise NumericalError("one-point function vanishes at the root z")
        return np.abs(self.kernel(z, w)) ** 2 / r

    # -- quadrature ------------------------------------------------------------

    def plane_quadrature(self, refine: float = 1.0):
        """Polar dA-rule covering the space's effective support."""
        n_r = max(8, int(self.radial_panels * refine))
        n_t = int(self.n_theta * refine)
        if n_r * 24 * n_t > _MAX_PLANE_NODES:
            raise NumericalError(
                f"plane quadrature for m={self.m} would need "
                f"{n_r * 24 * n_t} nodes; reduce the order")
        return polar_grid(0.0, self.r_cut, n_r, n_t)

    def gram_residual(self, refine: float = 1.4) -> float:
        """max |Gram - I| on an independently refined rule."""
        nodes, wts = self.plane_quadrature(refine=refine)
        g = np.zeros((self.m, self.m), dtype=complex)
        for sl in _chunks(nodes.size, self.m):
            b = self.basis(nodes[sl])
            g += (b * wts[sl, None]).conj().T @ b
        return float(np.max(np.abs(g - np.eye(self.m))))


def _chunks(total: int, m: int, budget: int = 8_000_000):
    step = max(1, budget // max(m, 1))
    for lo in range(0, total, step):
        yield slice(lo, min(lo + step, total))


# ---------------------------------------------------------------------------
# Construction


def _radial_cutoff(potential: Potential, m: int, drop_nats: float = 90.0) -> float:
    """Radius beyond which every order-m basis function is negligible."""
    def g(r):
        return (2 * m - 1) * math.log(r) - m * potential.radial_part(r)
    lo = (max(m - 0.5, 0.5) / (potential.p * m)) ** (1.0 / (2 * potential.p))
    lo = max(lo, 1e-3)
    g_peak = g(lo)
    hi = lo
    while g(hi) > g_peak - drop_nats:
        hi *= 1.25
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if g(mid) > g_peak - drop_nats:
            lo = mid
        else:
            hi = mid
    return hi


def _radial_log_norms(potential: Potential, m: int, r_cut: float, panels: int,
                      order: int = 24) -> np.ndarray:
    """log of ||z^k exp(-mQ/2)||^2 for k < m, via log-domain radial rule."""
    r, w = composite_gl(1e-300, r_cut, panels, order)
    log_base = np.log(2.0 * w * r) - m * potential.radial_part(r)
    logr = np.log(r)
    out = np.empty(m)
    for sl in _chunks(m, r.size):
        k = np.arange(sl.start, sl.stop)
        out[sl] = logsumexp_weighted(log_base[None, :] + 2.0 * k[:, None] * logr[None, :],
                                     axis=1)
    return out


def build_space(potential: Potential, m: int) -> WeightedPolySpace:
    """Construct the order-m space with its orthonormal basis.

    Raises NumericalError on conditioning or tail-capture failure, and
    ConfigError for orders beyond the double-precision caps.
    """
    if m < 1:
        raise ConfigError("order m must be >= 1")
    n_theta = 4 * m + 16

    if potential.kind == RADIAL_MONOMIAL:
        if m > _RADIAL_ORDER_CAP:
            raise ConfigError(f"radial spaces capped at m={_RADIAL_ORDER_CAP}")
        r_cut = _radial_cutoff(potential, m)
        panels = max(16, int(0.9 * r_cut * math.sqrt(potential.p * m)))
        log_n2 = _radial_log_norms(potential, m, r_cut, panels)
        check = _radial_log_norms(potential, m, r_cut, int(panels * 1.5) + 4, order=30)
        err = float(np.max(np.abs(np.expm1(check - log_n2))))
        if err > 1e-10:
            raise NumericalError(
                f"radial quadrature not converged for m={m} (err={err:.2e})")
        space = WeightedPolySpace(potential, m, "radial", log_n2, None,
                                  r_cut, panels, n_theta, 1.0)
        _check_tail(space)
        return space

    if m > _BLOCK_ORDER_CAP:
        raise ConfigError(
            f"non-radial spaces capped at m={_BLOCK_ORDER_CAP} "
            f"(got m={m} for {potential.kind})")
    return _build_blocks(potential, m, n_theta)


def _build_blocks(potential: Potential, m: int, n_theta: int) -> WeightedPolySpace:
    d = potential.d if potential.kind != "custom" else 1
    r_cut = _radial_cutoff(potential, m)
    panels = max(12, int(1.1 * r_cut * math.sqrt(potential.p * m)) + 4)
    nodes, wts = polar_grid(0.0, r_cut, panels, n_theta)
    mq2 = 0.5 * m * potential.value(nodes)
    shift = nodes ** d
    log_nodes = np.where(nodes != 0, np.log(np.where(nodes == 0, 1, nodes)), 0.0)

    blocks = []
    cond = 1.0
    for residue in range(min(d, m)):
        cols = np.arange(residue, m, d)
        b = cols.size
        seed = np.exp(residue * log_nodes - mq2)
        if residue > 0:
            seed[nodes == 0] = 0.0
        norm0 = math.sqrt(float(np.sum(wts * np.abs(seed) ** 2).real))
        v = np.empty((nodes.size, b), dtype=complex)
        v[:, 0] = seed / norm0
        hess_c = np.zeros((b, max(b - 1, 1)), dtype=complex)
        for k in range(b - 1):
            w = shift * v[:, k]
            pre = math.sqrt(float(np.sum(wts * np.abs(w) ** 2).real))
            for _ in range(2):  # CGS with reorthogonalization
                coef = (v[:, :k + 1].conj() * wts[:, None]).T @ w
                w = w - v[:, :k + 1] @ coef
                hess_c[:k + 1, k] += coef
            h = math.sqrt(float(np.sum(wts * np.abs(w) ** 2).real))
            if h == 0.0 or not math.isfinite(h):
                raise NumericalError(
                    f"orthonormalization broke down at m={m}, block {residue} "
                    f"for potential {potential.kind}")
            cond = max(cond, pre / h)
            hess_c[k + 1, k] = h
            v[:, k + 1] = w / h
        blocks.append(_Block(residue=residue, columns=cols,
                             hess=hess_c[:, :max(b - 1, 1)],
                             log_norm0=math.log(norm0)))
    if cond > 1e12:
        raise NumericalError(
            f"conditioning failure (estimate {cond:.2e}) at m={m} "
            f"for potential {potential.kind}")
    space = WeightedPolySpace(potential, m, "blocks", None, blocks,
                              r_cut, panels, n_theta, cond)
    _check_tail(space)
    return space


def _check_tail(space: WeightedPolySpace):
    ang = np.exp(2j * np.pi * np.arange(8) / 8)
    edge = space.r_cut * ang
    vals = np.abs(space.basis(edge))
    if float(np.max(vals)) > 1e-12:
        raise NumericalError(
            f"insufficient tail capture at m={space.m}: boundary value "
            f"{float(np.max(vals)):.2e}")


# ---------------------------------------------------------------------------
# Lagrange polynomials


def lagrange_values(config, potential: Potential, z) -> np.ndarray:
    """Weighted Lagrange polynomials of a node set, evaluated in log domain.

    Returns an array of shape z.shape + (n,) whose j-th slice is the weighted
    polynomial equal to 1 at node j and 0 at the others.
    """
    pts = np.asarray(getattr(config, "points", config), dtype=complex)
    n = pts.size
    z = np.asarray(z, dtype=complex)
    flat = z.ravel()

    diff_nodes = pts[:, None] - pts[None, :]
    np.fill_diagonal(diff_nodes, 1.0)
    if np.any(diff_nodes == 0.0):
        raise ConfigError("coincident interpolation nodes")
    log_dn = np.log(diff_nodes)
    np.fill_diagonal(log_dn, 0.0)
    denom = np.sum(log_dn, axis=1)            # sum_k!=j Log(z_j - z_k)
    qn = potential.value(pts)

    out = np.empty((flat.size, n), dtype=complex)
    for sl in _chunks(flat.size, n):
        zz = flat[sl]
        dz = zz[:, None] - pts[None, :]
        hit = np.abs(dz) == 0.0
        dz_safe = np.where(hit, 1.0, dz)
        log_dz = np.log(dz_safe)
        s = np.sum(log_dz, axis=1)
        expo = (s[:, None] - log_dz - denom[None, :]
                - 0.5 * n * (potential.value(zz)[:, None] - qn[None, :]))
        vals = np.exp(expo)
        rows = np.any(hit, axis=1)
        if np.any(rows):
            vals[rows] = np.where(hit[rows], 1.0, 0.0)
        out[sl] = vals
    return out.reshape(z.shape + (n,))


def sup_norms_lagrange(config, potential: Potential, drop: DropletDescriptor,
                       pitch: float = 0.2) -> np.ndarray:
    """Grid maximum of |l_j| over the droplet, one value per node.

    The grid pitch is pitch/sqrt(n); the nodes themselves are always included
    so every sup is at least 1.
    """
    pts = np.asarray(getattr(config, "points", config), dtype=complex)
    n = pts.size
    h = pitch / math.sqrt(n)
    r_out = drop.radius
    ax = np.arange(-r_out, r_out + h, h)
    gx, gy = np.meshgrid(ax, ax)
    grid = (gx + 1j * gy).ravel()
    grid = grid[drop.distance(grid) <= 0.0]
    grid = np.concatenate([grid, pts])
    sups = np.zeros(n)
    for sl in _chunks(grid.size, n):
        vals = np.abs(lagrange_values(pts, potential, grid[sl]))
        sups = np.maximum(sups, vals.max(axis=0))
    return sups


def kernel_gram(space: WeightedPolySpace, points) -> np.ndarray:
    """Hermitian Gram matrix K(z_j, z_k) of a node set."""
    b = space.basis(np.asarray(points, dtype=complex))
    return b @ b.conj().T


def minimal_norm_interpolant(space: WeightedPolySpace, points, values):
    """Least-L2-norm element of the space matching the given node values.

    Returns (evaluate, norm_sq) where evaluate maps z to f(z).
    """
    pts = np.asarray(points, dtype=complex)
    vals = np.asarray(values, dtype=complex)
    gram = kernel_gram(space, pts)
    try:
        coef = np.linalg.solve(gram, vals)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"kernel Gram is singular: {exc}") from exc
    norm_sq = float(np.real(np.vdot(vals, coef)))

    def evaluate(z):
        return space.kernel_matrix(np.atleast_1d(np.asarray(z, dtype=complex)),
                                   pts) @ coef

    return evaluate, norm_sq


# ---------------------------------------------------------------------------
# Estimate verifications


@dataclass
class PointwiseLpReport:
    max_constant: float
    bound: float
    trials: int

    @property
    def passed(self) -> bool:
        return self.max_constant <= self.bound


def _local_disc_rule(radius: float, n_panels=3, order=10, n_theta=24):
    return polar_grid(0.0, radius, n_panels, n_theta, gl_order=order)


def _random_members(space, rng, trials):
    m = space.m
    coef = (rng.standard_normal((trials, m))
            + 1j * rng.standard_normal((trials, m))) / math.sqrt(2)
    z0 = (np.sqrt(rng.random(trials)) * 0.55 * space.r_cut
          * np.exp(2j * np.pi * rng.random(trials)))
    return coef, z0


def _batched_local_values(space, z0, template, coef):
    """|f_t| on the local template shifted to each probe point z0_t."""
    trials, npts = z0.size, template.size
    out = np.empty((trials, npts))
    step = max(1, 200_000 // npts)
    for lo in range(0, trials, step):
        sl = slice(lo, min(lo + step, trials))
        nodes = (z0[sl, None] + template[None, :]).ravel()
        b = space.basis(nodes).reshape(sl.stop - sl.start, npts, space.m)
        out[sl] = np.abs(np.einsum("tpm,tm->tp", b, coef[sl]))
    return out


def verify_pointwise_lp(space: WeightedPolySpace, p_exp: float, s: float,
                        trials: int, seed: int = 0,
                        max_lap: Optional[float] = None) -> PointwiseLpReport:
    """Empirical constant in the pointwise-Lp bound

        |f(z0)|^p <= m * (C^p / s^2) * integral(|f|^p, D(z0, s/sqrt(m)))

    for random members f; the proven value is C = exp(max_lap * s^2 / 2).
    """
    m = space.m
    rng = np.random.default_rng(seed)
    if max_lap is None:
        r_probe = np.linspace(0, 0.7 * space.r_cut, 512)
        max_lap = float(np.max(space.potential.laplacian(r_probe + 0j)))
    bound = math.exp(max_lap * s * s / 2.0) * 1.1
    template, wts = _local_disc_rule(s / math.sqrt(m))
    coef, z0 = _random_members(space, rng, trials)
    fz0 = np.abs(np.einsum("tm,tm->t", space.basis(z0), coef))
    fv = _batched_local_values(space, z0, template, coef)
    integrals = (fv ** p_exp) @ wts
    ok = integrals > 0
    c_impl = (fz0[ok] ** p_exp * s * s / (m * integrals[ok])) ** (1.0 / p_exp)
    worst = float(np.max(c_impl)) if c_impl.size else 0.0
    return PointwiseLpReport(max_constant=worst, bound=bound, trials=trials)


@dataclass
class BernsteinReport:
    max_constant: float
    bound: float
    trials: int

    @property
    def passed(self) -> bool:
        return self.max_constant <= self.bound


def verify_bernstein(space: WeightedPolySpace, trials: int,
                     seed: int = 0) -> BernsteinReport:
    """Empirical constant in the gradient bound

        |grad |f|(z0)| <= C * sqrt(m) * average(|f|, D(z0, 1/sqrt(m)))

    with gradient by central differences; proven C is 4*exp(max_lap/2).
    """
    m = space.m
    rng = np.random.default_rng(seed)
    r_probe = np.linspace(0, 0.7 * space.r_cut, 512)
    max_lap = float(np.max(space.potential.laplacian(r_probe + 0j)))
    bound = 4.0 * math.exp(max_lap / 2.0) * 1.1
    h = 1e-3 / math.sqrt(m)
    coef, z0 = _random_members(space, rng, trials)
    stencil = np.array([h, -h, 1j * h, -1j * h, 0.0])
    fv = _batched_local_values(space, z0, stencil, coef)
    grad = np.hypot((fv[:, 0] - fv[:, 1]) / (2 * h),
                    (fv[:, 2] - fv[:, 3]) / (2 * h))
    template, wts = _local_disc_rule(1.0 / math.sqrt(m))
    avg = (m * (_batched_local_values(space, z0, template, coef) @ wts))
    ok = (fv[:, 4] > 1e-10) & (avg > 0)
    ratios = grad[ok] / (math.sqrt(m) * avg[ok])
    worst = float(np.max(ratios)) if ratios.size else 0.0
    return BernsteinReport(max_constant=worst, bound=bound, trials=trials)


@dataclass
class MCIdentityResult:
    estimate: float
    target: float
    stderr: float
    inconclusive: bool


def verify_exact_identity(potential: Potential, n: int, beta: float,
                          chains: int, sweeps: int, u_radius: float = 2.0,
                          seed: int = 0, thin: int = 10,
                          retained: int = 20) -> MCIdentityResult:
    """Monte Carlo test of the swap identity: the expected mass
    integral(|l_j|^(2 beta), U) equals |U| when U contains the droplet.

    Each chain contributes the average of the node-averaged mass over
    ``retained`` states spaced ``thin`` sweeps apart; the standard error
    comes from the chain-to-chain spread (chains are independent).
    """
    from .ensemble import sample_gibbs, _sweep

    if n > 8 or beta > 4:
        raise ConfigError("identity check is meant for small n and moderate beta")
    nodes, wts = polar_grid(0.0, u_radius, 12, 96)
    means = []
    for i in range(chains):
        cfg, diag = sample_gibbs(potential, n, beta=beta, sweeps=sweeps,
                                 seed=seed + 7919 * i)
        pts = cfg.points.copy()
        rng = np.random.default_rng((seed + 7919 * i) ^ 0x9E3779B9)
        vals = []
        for _ in range(retained):
            for _ in range(thin):
                _sweep(pts, potential, n, beta, diag.step_scale, rng)
            lv = np.abs(lagrange_values(pts, potential, nodes))
            vals.append(float(np.mean(wts @ lv ** (2.0 * beta))))
        means.append(float(np.mean(vals)))
    means = np.array(means)
    est = float(np.mean(means))
    stderr = float(np.std(means, ddof=1) / math.sqrt(chains))
    target = u_radius ** 2
    return MCIdentityResult(estimate=est, target=target, stderr=stderr,
                            inconclusive=stderr > 0.25 * target)
