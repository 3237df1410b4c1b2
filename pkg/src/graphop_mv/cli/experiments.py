"""Experiment drivers behind the command line: build objects from a RunConfig,
run, check invariants, and collect artifacts in memory before writing."""

import csv
import io
import json
import math
import os
import shutil
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .. import graphops as go
from ..entropy import (boundedness_constant, fit_decay_rate, kappa_threshold, relative_entropy,
                       theoretical_rate, CSV_FIELDS)
from ..particles import (ParticleEnsemble, complete_graph, empirical_density, euler_maruyama_run,
                         generate_erdos_renyi, generate_power_law_graph, sample_positions)
from ..sakaguchi import (FrequencyDistribution, SakaguchiConfig, critical_coupling, kappa_zero,
                         sakaguchi_initial, sakaguchi_run)
from ..solver import SolverConfig, make_initial_condition, run, snapshot_bytes
from ..torus import InteractionPotential, TorusGrid, make_cosine_potential, make_kuramoto_potential


@dataclass
class Outcome:
    """Artifacts of one experiment: file name -> text or bytes, plus status."""

    files: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    hard_failures: list = field(default_factory=list)

    @property
    def exit_code(self):
        return 1 if self.hard_failures else 0

    def write(self, out_dir):
        """Write everything at once; a failure mid-way leaves no partial directory contents."""
        self.files["summary.json"] = json.dumps(_jsonable(self.summary), indent=2, sort_keys=True) + "\n"
        os.makedirs(out_dir, exist_ok=True)
        stage = tempfile.mkdtemp(prefix=".stage-", dir=out_dir)
        try:
            for name, content in self.files.items():
                mode = "wb" if isinstance(content, bytes) else "w"
                with open(os.path.join(stage, name), mode) as fh:
                    fh.write(content)
            for name in self.files:
                os.replace(os.path.join(stage, name), os.path.join(out_dir, name))
        finally:
            shutil.rmtree(stage, ignore_errors=True)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    return obj


# -- builders -----------------------------------------------------------------

def build_grid(cfg):
    return TorusGrid(cfg.grid.L, cfg.grid.d, cfg.grid.n)


def build_potential(cfg):
    spec, L, d = cfg.potential, cfg.grid.L, cfg.grid.d
    if spec.kind == "kuramoto":
        return make_kuramoto_potential(L)
    if spec.kind == "cosine":
        return make_cosine_potential(L, d)
    modes, coeffs = [], []
    for mode, c in zip(spec.modes, spec.coeffs):
        if len(mode) != d:
            raise ValueError(f"potential mode {mode} does not have {d} components")
        modes += [mode, [-v for v in mode]]
        coeffs += [c / 2, c / 2]
    return InteractionPotential(L, d, np.array(modes), np.array(coeffs), name="fourier")


def build_graphop(spec, m=None, seed=0):
    m = spec.m_list[0] if m is None else m
    kind = spec.kind
    gseed = seed if spec.seed is None else spec.seed
    if kind == "identity":
        return go.identity_graphop(go.NetworkSpace.uniform(m) if m > 1 else go.NetworkSpace.point())
    if kind == "constant":
        return go.constant_graphon(spec.p, go.NetworkSpace.uniform(m))
    if kind == "power-law":
        return go.power_law_graphop(go.PowerLawParams(spec.alpha), m, spec.quadrature)
    if kind == "spherical":
        return go.spherical_graphop(spec.n_sphere, spec.m_equator, spec.balance)
    if kind == "edge-list":
        return go.empirical_graphop(go.read_edge_list(spec.path), spec.r_N)
    if kind == "kernel-csv":
        W = go.read_kernel_csv(spec.path)
        return go.graphon_operator(W, go.NetworkSpace.uniform(W.values.shape[0]))
    if kind == "erdos-renyi-graph":
        return go.empirical_graphop(generate_erdos_renyi(m, spec.p, gseed), spec.r_N)
    if kind == "power-law-graph":
        A, r_N = generate_power_law_graph(m, go.PowerLawParams(spec.alpha, spec.beta_edge), gseed)
        return go.empirical_graphop(A, r_N)
    if kind == "complete-graph":
        return go.empirical_graphop(complete_graph(m), 1.0)
    raise ValueError(f"unknown graphop kind {kind!r}")


def node_modulation(spec, space):
    mod = spec.modulation
    m = space.size
    if isinstance(mod, list):
        if len(mod) != m:
            raise ValueError(f"modulation has {len(mod)} entries for {m} nodes")
        return np.asarray(mod, dtype=float)
    if mod == "none":
        return None
    if mod == "ramp":
        return 0.5 + 0.5 * np.arange(m) / max(m - 1, 1)
    if mod == "alternating":
        return (-1.0) ** np.arange(m)
    if mod == "sphere-z":
        nodes = np.asarray(space.nodes)
        if nodes.ndim != 2 or nodes.shape[1] != 3:
            raise ValueError("sphere-z modulation needs points on the sphere as nodes")
        return nodes[:, 2].copy()
    raise ValueError(f"unknown modulation {mod!r}")


def initial_params(spec, space):
    p = {"eps": spec.eps, "mode": spec.mode, "phase": spec.phase}
    if spec.kind == "von-mises-mixture":
        p = {"centers": spec.centers or [0.0], "concentrations": spec.concentrations or [1.0]}
        if spec.weights is not None:
            p["weights"] = spec.weights
    mod = node_modulation(spec, space)
    if mod is not None:
        p["modulation"] = mod
    return p


def build_frequency(spec):
    if spec.kind == "dirac":
        return FrequencyDistribution.dirac(spec.omega)
    if spec.kind == "gaussian":
        return FrequencyDistribution.gaussian(spec.sigma, spec.mean, spec.n_nodes)
    if spec.kind == "uniform":
        return FrequencyDistribution.uniform(spec.low, spec.high, spec.n_nodes)
    return FrequencyDistribution.custom(spec.atoms)


def graphop_constants(A):
    """n(A), ||A||_{inf->1}, c-regularity constant (or None)."""
    return {
        "numerical_radius": go.numerical_radius(A),
        "norm_inf_to_1": go.norm_infty_to_1(A),
        "c_regular": go.check_c_regular(A),
    }


def _csv_text(rows):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: repr(float(r[k])) for k in CSV_FIELDS})
    return buf.getvalue()


def _check(outcome, name, ok, hard=True):
    outcome.summary.setdefault("checks", {})[name] = bool(ok)
    if hard and not ok:
        outcome.hard_failures.append(name)


# -- run ----------------------------------------------------------------------

def run_experiment(cfg, label="run"):
    """Integrate the PDE model described by ``cfg`` and evaluate all invariants."""
    if cfg.model == "particles":
        return particle_experiment(cfg, label)
    grid = build_grid(cfg)
    D = build_potential(cfg)
    A = build_graphop(cfg.graphop, seed=cfg.seed)
    consts = graphop_constants(A)
    nA = consts["numerical_radius"]
    out = Outcome()
    s = out.summary
    s.update(label=label, model=cfg.model, graphop=A.name, nodes=A.space.size, L=grid.L, d=grid.d, n=grid.n,
             sup_laplacian_D=D.sup_laplacian, **consts)

    if cfg.model == "sakaguchi":
        g = build_frequency(cfg.frequency)
        beta = cfg.beta_temp
        threshold = kappa_zero(beta, grid.L, D) / nA
        kappa = cfg.kappa if cfg.kappa is not None else cfg.kappa_fraction * threshold
        rate = theoretical_rate(kappa, nA, grid.L, D, diffusion=1.0 / beta)
        s.update(beta_temp=beta, frequency=g.tag, frequency_nodes=g.size,
                 kappa_zero=kappa_zero(beta, grid.L, D), kappa_critical=critical_coupling(beta, g))
        rho0 = sakaguchi_initial(cfg.initial.kind, initial_params(cfg.initial, A.space), grid, A, g)
        sc = SakaguchiConfig(beta, kappa, cfg.time.dt, cfg.time.T, cadence=cfg.time.cadence,
                             snapshot_cadence=cfg.time.snapshot_cadence)
        traj = sakaguchi_run(rho0, sc, A, D, g)
    else:
        threshold = kappa_threshold(nA, grid.L, D)
        kappa = cfg.kappa if cfg.kappa is not None else cfg.kappa_fraction * threshold
        rate = theoretical_rate(kappa, nA, grid.L, D)
        rho0 = make_initial_condition(cfg.initial.kind, initial_params(cfg.initial, A.space), grid, A.space)
        sc = SolverConfig(kappa, cfg.time.dt, cfg.time.T, cadence=cfg.time.cadence,
                          snapshot_cadence=cfg.time.snapshot_cadence)
        traj = run(rho0, sc, A, D)

    bound = boundedness_constant(kappa, D, consts["norm_inf_to_1"], grid.L)
    t, H = traj.t, traj.H_hat
    sub = kappa < threshold
    s.update(kappa=kappa, kappa_threshold=threshold, regime="sub-threshold" if sub else "above-threshold",
             rate_bound=rate, boundedness_constant=bound, H_initial=H[0], H_final=H[-1], steps=traj.steps)
    chk = cfg.checks
    s["mass_drift_max"] = float(traj.column("mass_drift_max").max())
    s["rho_min"] = float(traj.column("rho_min").min())
    s["ckp_margin_min"] = float(traj.column("ckp_margin_min").min())
    s["logsob_margin_min"] = float(traj.column("logsob_margin_min").min())
    _check(out, "mass_conservation", s["mass_drift_max"] <= chk.mass_tol)
    _check(out, "positivity", s["rho_min"] >= -chk.positivity_tol)
    _check(out, "ckp_inequality", s["ckp_margin_min"] >= -chk.margin_tol)
    _check(out, "log_sobolev_inequality", s["logsob_margin_min"] >= -chk.margin_tol)
    _check(out, "boundedness", bool(np.all(H <= max(H[0], bound) * (1 + 1e-12))))
    s["fitted_rate"] = None
    if t.size >= 10 and t[-1] > t[0]:
        try:
            s["fitted_rate"] = fit_decay_rate(t, H)
        except ValueError:
            pass  # too few usable samples in the fit window
    if sub and H[0] > 0:
        ratio = H / (H[0] * np.exp(-rate * (t - t[0])))
        s["decay_ratio_max"] = float(ratio.max())
        _check(out, "decay_bound", s["decay_ratio_max"] <= chk.rate_slack)
        if s["fitted_rate"] is not None:
            _check(out, "fitted_rate_at_least_bound", s["fitted_rate"] >= rate)
    else:
        _check(out, "stays_away_from_splay", H[-1] > 1e-3, hard=False)
    s["hard_failures"] = list(out.hard_failures)
    out.files["diagnostics.csv"] = _csv_text(traj.records)
    for i, snap in enumerate(traj.snapshots):
        out.files[f"snapshot_{i:04d}.bin"] = snapshot_bytes(snap)
    return out


# -- estimate -----------------------------------------------------------------

ESTIMATE_FIELDS = ("m", "numerical_radius", "dense_eigen_radius", "operator_norm", "norm_inf_to_1",
                   "c_regular", "W_1", "W_2")


def estimate_graphop(cfg, label="estimate"):
    """Graphop constants for every node count in graphop.m."""
    rows = []
    for m in cfg.graphop.m_list:
        A = build_graphop(cfg.graphop, m=m, seed=cfg.seed)
        row = {"m": A.space.size, **graphop_constants(A)}
        row["operator_norm"] = go.operator_norm(A)
        if A.space.size <= 4096:
            S = A.symmetrized()
            S = S.toarray() if hasattr(S, "toarray") else S
            row["dense_eigen_radius"] = float(np.max(np.abs(np.linalg.eigvalsh((S + S.T) / 2))))
        else:
            row["dense_eigen_radius"] = float("nan")
        if A.kernel is not None:
            row["W_1"] = go.graphon_norm(A.kernel, A.space, 1)
            row["W_2"] = go.graphon_norm(A.kernel, A.space, 2)
        else:
            row["W_1"] = row["W_2"] = float("nan")
        row["c_regular"] = float("nan") if row["c_regular"] is None else row["c_regular"]
        rows.append(row)
    out = Outcome()
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=ESTIMATE_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (r[k] if k == "m" else repr(float(r[k]))) for k in ESTIMATE_FIELDS})
    out.files["estimate.csv"] = buf.getvalue()
    radii = [r["numerical_radius"] for r in rows]
    out.summary.update(label=label, graphop=cfg.graphop.kind, rows=rows,
                       radius_increasing=bool(all(b > a for a, b in zip(radii, radii[1:]))))
    for r in rows:
        if math.isfinite(r["dense_eigen_radius"]):
            agree = abs(r["numerical_radius"] - r["dense_eigen_radius"]) <= 1e-6 * r["dense_eigen_radius"]
            _check(out, f"power_iteration_matches_dense_m{r['m']}", agree)
    out.summary["hard_failures"] = list(out.hard_failures)
    return out


# -- particles ----------------------------------------------------------------

PARTICLE_FIELDS = ("N", "seed", "L1_to_mean_field", "H_kde_start", "H_kde_end")


def _reference_density(cfg, grid, D):
    """xi-averaged mean-field density at particles.T, when the graph has a scalar limit."""
    kind = cfg.graphop.kind
    if kind == "complete-graph":
        p = 1.0
    elif kind == "erdos-renyi-graph":
        p = cfg.graphop.p
    else:
        return None
    space = go.NetworkSpace.point()
    A = go.constant_graphon(p, space)
    rho0 = make_initial_condition(cfg.initial.kind, initial_params(cfg.initial.model_copy(
        update={"modulation": "none"}), space), grid, space)
    sc = SolverConfig(cfg.kappa, cfg.time.dt, cfg.particles.T, cadence=cfg.particles.T)
    return run(rho0, sc, A, D).final.values[0]


def _initial_density_fn(cfg, grid):
    spec = cfg.initial
    if spec.kind != "perturbed-uniform":
        raise ValueError("particle experiments sample perturbed-uniform initial data")

    def f(x):
        return (1 + spec.eps * np.cos(2 * np.pi * spec.mode * x[:, 0] / grid.L + spec.phase)) / grid.volume
    return f


def particle_experiment(cfg, label="particles"):
    if cfg.kappa is None:
        raise ValueError("particle experiments need an explicit 'kappa'")
    grid = build_grid(cfg)
    D = build_potential(cfg)
    ps = cfg.particles
    t_start, t_end = ps.entropy_window
    if not 0 <= t_start < t_end <= ps.T:
        raise ValueError("particles.entropy_window must lie inside [0, particles.T]")
    ref = _reference_density(cfg, grid, D)
    density = _initial_density_fn(cfg, grid)
    rows = []
    for N in ps.N:
        h = ps.bandwidth_factor * N ** (-0.2) * grid.L / (2 * np.pi)
        for s in range(ps.seeds):
            seed = cfg.seed * 100003 + N * 101 + s
            rng = np.random.default_rng(seed)
            X = sample_positions(N, grid.L, grid.d, density, rng)
            gspec = cfg.graphop
            r_N = 1.0
            if gspec.kind == "erdos-renyi-graph":
                adj = generate_erdos_renyi(N, gspec.p, seed)
            elif gspec.kind == "power-law-graph":
                adj, r_N = generate_power_law_graph(N, go.PowerLawParams(gspec.alpha, gspec.beta_edge), seed)
            else:
                adj = complete_graph(N)
            ens = ParticleEnsemble(X, adj, grid.L, cfg.kappa, r_N=r_N, seed=seed + 1)
            if t_start > 0:
                euler_maruyama_run(ens, D, ps.dt, t_start)
            H_start = relative_entropy(empirical_density(ens.positions, grid, h), grid)
            euler_maruyama_run(ens, D, ps.dt, t_end - t_start)
            H_end = relative_entropy(empirical_density(ens.positions, grid, h), grid)
            if ps.T > t_end:
                euler_maruyama_run(ens, D, ps.dt, ps.T - t_end)
            kde = empirical_density(ens.positions, grid, h)
            l1 = float(grid.integrate(np.abs(kde - ref))) if ref is not None else float("nan")
            rows.append({"N": N, "seed": seed, "L1_to_mean_field": l1, "H_kde_start": H_start, "H_kde_end": H_end})
    out = Outcome()
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=PARTICLE_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (r[k] if k in ("N", "seed") else repr(float(r[k]))) for k in PARTICLE_FIELDS})
    out.files["particles.csv"] = buf.getvalue()
    mean_l1 = {N: float(np.mean([r["L1_to_mean_field"] for r in rows if r["N"] == N])) for N in ps.N}
    dH = float(np.mean([r["H_kde_end"] - r["H_kde_start"] for r in rows]))
    vals = [mean_l1[N] for N in ps.N]
    out.summary.update(label=label, model="particles", kappa=cfg.kappa, graph=cfg.graphop.kind,
                       mean_L1_by_N={str(N): v for N, v in mean_l1.items()}, mean_entropy_change=dH)
    if ref is not None:
        _check(out, "L1_decreasing_in_N", all(b < a for a, b in zip(vals, vals[1:])), hard=False)
    _check(out, "kde_entropy_decreasing", dH < 0, hard=False)
    out.summary["hard_failures"] = list(out.hard_failures)
    return out
