"""Command-line orchestration: runs, artifacts, manifests, reports.

Artifacts are JSON (structured), CSV (tables), and SVG (plots), all with
deterministic bytes for a fixed config and seed set; the manifest lists
every emitted file with its checksum.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .errors import ConfigError, CoulombLabError, NumericalError
from .potential import (Potential, droplet, ginibre, radial_monomial,
                        radial_plus_harmonic, equilibrium_mass)
from .ensemble import Configuration, sample_gibbs, fekete
from .polyspace import build_space
from .limits import boundary_profile, erfc_profile, dawson, verify_decay
from .landau import OmegaRegion, concentration, eig_count_check, trace_asymptotics
from .stats import (StatReport, spacing, ZoomRule, bl_density,
                    fit_separation_constant)
from .svg import scatter_svg, line_svg

_COMMANDS = ("sample", "fekete", "kernel", "concentrate", "verify", "stats",
             "report")

_KNOWN_KEYS = {
    "command", "potential", "n", "n_grid", "c", "beta", "seeds", "sweeps",
    "L_grid", "rho", "gamma", "M", "m", "m_grid", "l_values", "regime",
    "suite", "provenance", "inputs", "out",
}

_POTENTIAL_KEYS = {"kind", "p", "t", "d"}


@dataclass
class RunConfig:
    """Validated run description; see load_config for the file schema."""

    command: str
    potential: Potential
    potential_spec: dict
    n_grid: list
    c: Optional[float]
    beta: Optional[float]
    seeds: list
    sweeps: int
    L_grid: list
    rho: float
    gamma: float
    big_m: float
    m: int
    m_grid: list
    l_values: list
    regime: str
    suite: str
    provenance: str
    inputs: list
    out: Optional[str]
    raw: dict = field(repr=False, default_factory=dict)

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(
            json.dumps(self.raw, sort_keys=True).encode()).hexdigest()[:16]


def parse_potential(block: dict) -> Potential:
    if not isinstance(block, dict):
        raise ConfigError("potential must be an object with a 'kind'")
    unknown = set(block) - _POTENTIAL_KEYS
    if unknown:
        raise ConfigError(f"unknown potential keys: {sorted(unknown)}")
    kind = block.get("kind", "radial_monomial")
    if kind == "radial_monomial":
        return radial_monomial(int(block.get("p", 1)))
    if kind == "radial_monomial_plus_harmonic":
        return radial_plus_harmonic(int(block["p"]), float(block["t"]),
                                    int(block["d"]))
    raise ConfigError(f"unknown potential kind {kind!r}")


def load_config(path) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return validate_config(raw)


def validate_config(raw: dict) -> RunConfig:
    unknown = set(raw) - _KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    command = raw.get("command")
    if command not in _COMMANDS:
        raise ConfigError(f"command must be one of {_COMMANDS}, got {command!r}")
    pot_block = raw.get("potential", {"kind": "radial_monomial", "p": 1})
    potential = parse_potential(pot_block)

    if "n" in raw and "n_grid" in raw:
        raise ConfigError("give n or n_grid, not both")
    n_grid = [int(raw["n"])] if "n" in raw else [int(v) for v in
                                                 raw.get("n_grid", [64])]
    if n_grid != sorted(n_grid):
        raise ConfigError("n_grid must be sorted ascending")

    c = raw.get("c")
    beta = raw.get("beta")
    if c is not None and beta is not None:
        raise ConfigError("give c or beta, not both")

    seeds = raw.get("seeds", 1)
    if isinstance(seeds, int):
        seeds = list(range(seeds))
    seeds = [int(s) for s in seeds]

    return RunConfig(
        command=command, potential=potential, potential_spec=pot_block,
        n_grid=n_grid, c=c, beta=beta, seeds=seeds,
        sweeps=int(raw.get("sweeps", 200)),
        L_grid=[float(v) for v in raw.get("L_grid", [2.0, 4.0, 6.0, 8.0])],
        rho=float(raw.get("rho", 0.8)), gamma=float(raw.get("gamma", 0.2)),
        big_m=float(raw.get("M", 2.0)), m=int(raw.get("m", 64)),
        m_grid=[int(v) for v in raw.get("m_grid", [])],
        l_values=[float(v) for v in raw.get("l_values", [0.0])],
        regime=raw.get("regime", "bulk"), suite=raw.get("suite", "all"),
        provenance=raw.get("provenance", "gibbs"),
        inputs=list(raw.get("inputs", [])), out=raw.get("out"), raw=raw)


# ---------------------------------------------------------------------------
# Artifact plumbing


def _json_bytes(obj) -> bytes:
    return (json.dumps(obj, sort_keys=True, indent=2) + "\n").encode()


def _csv_bytes(header, rows) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue().encode()


class ArtifactWriter:
    """Writes artifacts under one directory and keeps the manifest."""

    def __init__(self, out_dir: Path, config: RunConfig):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.config = config
        self.entries = []
        self.t0 = time.time()
        self._write_manifest(complete=False)

    def write(self, name: str, data: bytes):
        path = self.out_dir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
        self.entries.append({
            "path": name,
            "sha256": hashlib.sha256(data).hexdigest(),
            "bytes": len(data),
        })
        return path

    def _write_manifest(self, complete: bool):
        manifest = {
            "tool_version": __version__,
            "config_hash": self.config.config_hash,
            "config": self.config.raw,
            "artifacts": sorted(self.entries, key=lambda e: e["path"]),
            "timing_s": round(time.time() - self.t0, 3),
            "complete": complete,
        }
        (self.out_dir / "run_manifest.json").write_bytes(_json_bytes(manifest))

    def finalize(self):
        self._write_manifest(complete=True)


def _beta_of(cfg: RunConfig, n: int) -> dict:
    if cfg.c is not None:
        return {"c": float(cfg.c)}
    return {"beta": float(cfg.beta if cfg.beta is not None else 1.0)}


# ---------------------------------------------------------------------------
# Commands


def cmd_sample(cfg: RunConfig, writer: ArtifactWriter, threads: int):
    def job(n, seed):
        sample, diag = sample_gibbs(cfg.potential, n, sweeps=cfg.sweeps,
                                    seed=seed, **_beta_of(cfg, n))
        return n, seed, sample, diag

    jobs = [(n, s) for n in cfg.n_grid for s in cfg.seeds]
    results = _fan_out(job, jobs, threads)
    summary = []
    for n, seed, sample, diag in results:
        name = f"config_gibbs_n{n}_s{seed}.json"
        writer.write(name, _json_bytes(sample.to_json_dict()))
        summary.append({"n": n, "seed": seed, "file": name,
                        "acceptance": round(diag.acceptance_rate, 4),
                        "spacing": spacing(sample)})
    writer.write("sample_summary.json", _json_bytes(summary))


def cmd_fekete(cfg: RunConfig, writer: ArtifactWriter, threads: int):
    def job(n, seed):
        return n, seed, fekete(cfg.potential, n, seed=seed)

    jobs = [(n, s) for n in cfg.n_grid for s in cfg.seeds]
    results = _fan_out(job, jobs, threads)
    summary = []
    for n, seed, sample in results:
        name = f"config_fekete_n{n}_s{seed}.json"
        writer.write(name, _json_bytes(sample.to_json_dict()))
        writer.write(f"scatter_fekete_n{n}_s{seed}.svg",
                     scatter_svg(sample.points,
                                 title=f"minimum-energy n={n}").encode())
        summary.append({"n": n, "seed": seed, "file": name,
                        "spacing": spacing(sample), "note": sample.note})
    writer.write("fekete_summary.json", _json_bytes(summary))


def cmd_kernel(cfg: RunConfig, writer: ArtifactWriter, threads: int):
    space = build_space(cfg.potential, cfg.m)
    rule_nodes = space.radial_panels * 24 * space.n_theta
    writer.write("space_summary.json", _json_bytes({
        "m": space.m, "kind": space.kind,
        "condition_estimate": space.condition_estimate,
        "r_cut": space.r_cut, "n_theta": space.n_theta,
        "quadrature_nodes": rule_nodes,
    }))
    if cfg.potential.is_radial:
        drop = droplet(cfg.potential)
        rows = []
        curves = []
        for l in cfg.l_values:
            prof = boundary_profile(space, cfg.potential, drop, l)
            curves.append((l, prof))
            for x, r, p in zip(prof.x, prof.rescaled, prof.predicted):
                rows.append((l, float(x), float(r), float(p)))
        writer.write("edge_profiles.csv",
                     _csv_bytes(["l", "x", "rescaled_density", "predicted"],
                                rows))
        l0, prof0 = curves[0]
        writer.write("edge_profile.svg", line_svg(
            prof0.x, [prof0.rescaled, prof0.predicted],
            ["measured", "limit"],
            title=f"edge density, m={cfg.m}, l={l0:g}").encode())


def cmd_concentrate(cfg: RunConfig, writer: ArtifactWriter, threads: int):
    drop = droplet(cfg.potential)
    if cfg.regime == "bulk":
        p = 0j
    else:
        p = complex(drop.radius)
    m_list = cfg.m_grid or [cfg.m]
    rows_out = []
    for row in trace_asymptotics(cfg.potential, p, cfg.regime, cfg.L_grid,
                                 cfg.rho, cfg.big_m, m_list):
        rows_out.append((row.m, row.L, row.rho, row.trace, row.trace_sq,
                         row.ratio, row.gap_over_l))
    writer.write("concentration_trend.csv", _csv_bytes(
        ["m", "L", "rho", "trace", "trace_sq", "ratio", "bound_residual"],
        rows_out))


def cmd_stats(cfg: RunConfig, writer: ArtifactWriter, threads: int):
    drop = droplet(cfg.potential)
    family = []
    if cfg.inputs:
        for path in cfg.inputs:
            family.append(Configuration.loads(Path(path).read_text()))
    else:
        def job(n, seed):
            if cfg.provenance == "fekete":
                return fekete(cfg.potential, n, seed=seed)
            sample, _ = sample_gibbs(cfg.potential, n, sweeps=cfg.sweeps,
                                     seed=seed, **_beta_of(cfg, n))
            return sample

        family = _fan_out(job, [(n, s) for n in cfg.n_grid
                                for s in cfg.seeds], threads)
    reports = []
    for sample in family:
        rep = StatReport.build(sample, drop, cfg.potential.laplacian,
                               L_grid=cfg.L_grid)
        reports.append(rep.to_json_dict())
    writer.write("stat_reports.json", _json_bytes(reports))

    zoom_bulk = ZoomRule("adversarial", band="bulk", big_m=cfg.big_m)
    zoom_edge = ZoomRule("boundary", l=0.0, boundary_point=complex(drop.radius))
    rows = []
    for L, lo, hi in bl_density(family, zoom_bulk, cfg.L_grid, drop,
                                cfg.potential.laplacian):
        rows.append(("bulk", L, lo, hi))
    for L, lo, hi in bl_density(family, zoom_edge, cfg.L_grid, drop,
                                cfg.potential.laplacian):
        rows.append(("boundary", L, lo, hi))
    writer.write("density_table.csv",
                 _csv_bytes(["regime", "L", "min_density", "max_density"],
                            rows))
    for i, sample in enumerate(family[:4]):
        writer.write(f"scatter_{i}.svg",
                     scatter_svg(sample.points,
                                 title=f"n={sample.n}").encode())


def cmd_verify(cfg: RunConfig, writer: ArtifactWriter, threads: int):
    results = run_verification_suites()
    writer.write("verify_summary.json", _json_bytes(results))
    if not all(r["passed"] for r in results.values()):
        raise NumericalError("verification suites failed: " + ", ".join(
            k for k, r in results.items() if not r["passed"]))


def cmd_report(cfg: RunConfig, writer: ArtifactWriter, threads: int):
    sections = ["# Run family report", ""]
    gallery = []
    density_rows = []
    spacing_by_c = {}
    found_any = False
    for run_dir in map(Path, cfg.inputs):
        manifest_path = run_dir / "run_manifest.json"
        if not manifest_path.exists():
            sections.append(f"- missing manifest in {run_dir}, skipped")
            continue
        manifest = json.loads(manifest_path.read_text())
        found_any = True
        run_cfg = manifest.get("config", {})
        for entry in manifest.get("artifacts", []):
            name = entry["path"]
            if name.startswith("config_fekete") and name.endswith(".json"):
                sample = Configuration.loads((run_dir / name).read_text())
                gallery.append((run_cfg.get("potential", {}), sample))
            if name == "density_table.csv":
                with open(run_dir / name) as fh:
                    for row in csv.DictReader(fh):
                        density_rows.append(row)
            if name == "sample_summary.json":
                c = run_cfg.get("c")
                if c is not None:
                    entries = json.loads((run_dir / name).read_text())
                    spacing_by_c.setdefault(float(c), []).extend(
                        e["spacing"] for e in entries)
    if not found_any:
        sections.append("")
        sections.append("*warning: no usable runs found; empty report*")

    if gallery:
        sections.append("## Low-energy configuration gallery")
        for i, (pot_spec, sample) in enumerate(gallery):
            name = f"gallery_{i}.svg"
            writer.write(name, scatter_svg(
                sample.points, title=_potential_label(pot_spec)).encode())
            sections.append(f"- {name}: {_potential_label(pot_spec)}, "
                            f"n={sample.n}")
        sections.append("")
    if density_rows:
        sections.append("## Counting densities N / L^2")
        sections.append("")
        sections.append("| regime | L | min | max |")
        sections.append("|---|---|---|---|")
        for row in density_rows:
            sections.append(f"| {row['regime']} | {row['L']} | "
                            f"{float(row['min_density']):.4f} | "
                            f"{float(row['max_density']):.4f} |")
        sections.append("")
    if spacing_by_c:
        fit = fit_separation_constant(spacing_by_c)
        sections.append("## Spacing vs inverse-temperature slope c")
        sections.append("")
        sections.append("| c | min spacing | fitted s0(c) |")
        sections.append("|---|---|---|")
        for c in sorted(spacing_by_c):
            sections.append(f"| {c:g} | {min(spacing_by_c[c]):.4f} | "
                            f"{fit['s0'][c]:.4f} |")
        sections.append("")
        sections.append(f"fitted prefactor m = {fit['m']:.4f} "
                        "(empirical, reported not asserted)")
        sections.append("")
    writer.write("report.md", ("\n".join(sections) + "\n").encode())


def _potential_label(pot_spec: dict) -> str:
    kind = pot_spec.get("kind", "radial_monomial")
    p = pot_spec.get("p", 1)
    if kind == "radial_monomial":
        return f"|z|^{2 * p}"
    return f"|z|^{2 * p} - {pot_spec.get('t', 0):.3f} Re z^{pot_spec.get('d', 1)}"


def _fan_out(job, jobs, threads: int):
    if threads <= 1 or len(jobs) <= 1:
        return [job(*args) for args in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(job, *args) for args in jobs]
        return [f.result() for f in futures]


# ---------------------------------------------------------------------------
# Verification battery (used by the verify command)


def run_verification_suites(seed: int = 0) -> dict:
    """Fast invariant battery; each suite returns passed + a detail number."""
    out = {}
    rng = np.random.default_rng(seed)

    pots = [ginibre(), radial_monomial(2),
            radial_plus_harmonic(2, 2.0 / math.sqrt(2.0), 2)]
    worst = 0.0
    h = 1e-5
    for pot in pots:
        z = (rng.random(2000) * 2 - 1) + 1j * (rng.random(2000) * 2 - 1)
        gx = (pot.value(z + h) - pot.value(z - h)) / (2 * h)
        gy = (pot.value(z + 1j * h) - pot.value(z - 1j * h)) / (2 * h)
        g = pot.grad(z)
        scale = np.maximum(np.abs(g), 1.0)
        worst = max(worst, float(np.max(np.abs(g - (gx + 1j * gy)) / scale)))
        # quarter Laplacian by central differences of the analytic gradient
        # (double differencing Q itself drowns in roundoff at this step)
        lap_fd = (np.real(pot.grad(z + h) - pot.grad(z - h))
                  + np.imag(pot.grad(z + 1j * h) - pot.grad(z - 1j * h))) \
            / (8 * h)
        lap = pot.laplacian(z)
        scale = np.maximum(np.abs(lap), 1.0)
        worst = max(worst, float(np.max(np.abs(lap - lap_fd) / scale)))
    out["potential_derivatives"] = {"passed": worst <= 1e-6, "detail": worst}

    mass_err = max(abs(equilibrium_mass(p, droplet(p)) - 1.0)
                   for p in pots[:2])
    out["droplet_mass"] = {"passed": mass_err <= 1e-10, "detail": mass_err}

    from scipy.special import gammaln
    worst = 0.0
    for m in (8, 64):
        space = build_space(ginibre(), m)
        z = 1.2 * (rng.random(50) + 1j * rng.random(50) - 0.5 - 0.5j)
        x = m * np.abs(z) ** 2
        k = np.arange(m)
        with np.errstate(divide="ignore"):
            lt = k[None, :] * np.log(np.maximum(x[:, None], 1e-300)) \
                - gammaln(k + 1)[None, :] - x[:, None]
        mx = lt.max(axis=1, keepdims=True)
        oracle = m * np.exp(mx[:, 0]) * np.exp(lt - mx).sum(axis=1)
        worst = max(worst, float(np.max(np.abs(space.one_point(z) / oracle - 1))))
    out["kernel_oracle"] = {"passed": worst <= 1e-10, "detail": worst}

    g32 = build_space(ginibre(), 32)
    h24 = build_space(radial_plus_harmonic(2, 2.0 / math.sqrt(2.0), 2), 24)
    resid = max(g32.gram_residual(), h24.gram_residual())
    out["gram_identity"] = {"passed": resid <= 1e-8, "detail": resid}

    nodes, wts = g32.plane_quadrature()
    basis = g32.basis(nodes)
    coef = (rng.standard_normal(32) + 1j * rng.standard_normal(32))
    fvals = basis @ coef
    zt = 0.4 + 0.2j
    phi_t = g32.basis(np.array([zt]))[0]
    recon = (phi_t @ (basis.conj() * wts[:, None]).T) @ fvals
    rep_err = abs(recon - phi_t @ coef) / np.linalg.norm(coef)
    ber = float(np.sum(wts * g32.berezin(zt, nodes)))
    out["reproducing_and_berezin"] = {
        "passed": rep_err <= 1e-7 and abs(ber - 1.0) <= 1e-7,
        "detail": max(float(rep_err), abs(ber - 1.0))}

    refl = float(np.max(np.abs(erfc_profile(np.linspace(-10, 10, 201))
                               + erfc_profile(-np.linspace(-10, 10, 201)) - 1)))
    d10 = abs(float(dawson(10.0)) - 0.05)
    sf_ok = erfc_profile(0.0) == 0.5 and refl <= 1e-12 and d10 <= 6e-4
    out["special_functions"] = {"passed": bool(sf_ok),
                                "detail": max(refl, d10)}

    decay = verify_decay(np.linspace(-10, 10, 5), 10000, seed=seed)
    out["decay_envelope"] = {"passed": decay.passed,
                             "detail": decay.max_constant}

    spec = concentration(g32, OmegaRegion(center=0j, radius=3.0 / math.sqrt(32)))
    rep = eig_count_check(spec)
    out["eigenvalue_counting"] = {"passed": rep.passed, "detail": rep.max_excess}

    out["detailed_balance"] = _detailed_balance_suite(seed)
    return out


def _detailed_balance_suite(seed: int) -> dict:
    """Two-state toy measure sampled with the package's accept rule."""
    from scipy.stats import chisquare
    from .ensemble import metropolis_accept

    rng = np.random.default_rng(seed)
    energies = np.array([0.0, 0.7])
    beta = 1.3
    state = 0
    counts = np.zeros(2)
    us = rng.random(20000)
    for u in us:
        new = 1 - state
        if metropolis_accept(float(energies[new] - energies[state]), beta, u):
            state = new
        counts[state] += 1
    weights = np.exp(-beta * energies)
    expected = counts.sum() * weights / weights.sum()
    stat, pvalue = chisquare(counts, expected)
    return {"passed": bool(pvalue > 0.01), "detail": float(pvalue)}


# ---------------------------------------------------------------------------
# Entry point


def run(config_path, out_dir=None, threads: int = 1, seed_offset: int = 0) -> int:
    """Execute a run config; returns the process exit status."""
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if seed_offset:
        cfg.seeds = [s + seed_offset for s in cfg.seeds]
        cfg.raw = dict(cfg.raw, seeds=cfg.seeds)  # manifest reflects reality
    out_root = out_dir or cfg.out or os.environ.get("COULOMBLAB_OUT", "runs")
    target = Path(out_root)
    if cfg.out is None and out_dir is None:
        target = target / f"{cfg.command}_{cfg.config_hash}"
    writer = ArtifactWriter(target, cfg)
    handlers = {
        "sample": cmd_sample, "fekete": cmd_fekete, "kernel": cmd_kernel,
        "concentrate": cmd_concentrate, "verify": cmd_verify,
        "stats": cmd_stats, "report": cmd_report,
    }
    try:
        handlers[cfg.command](cfg, writer, threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except CoulombLabError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    writer.finalize()
    print(f"wrote {len(writer.entries)} artifacts to {writer.out_dir}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="coulomblab",
        description="Planar Coulomb gas laboratory: sampling, kernels, "
                    "concentration spectra, equidistribution statistics.")
    parser.add_argument("--config", required=True, help="JSON run config")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--seed-offset", type=int, default=0)
    args = parser.parse_args(argv)
    return run(args.config, args.out, args.threads, args.seed_offset)


if __name__ == "__main__":
    sys.exit(main())
