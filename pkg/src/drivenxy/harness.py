"""Experiment orchestration shared by the CLI and the test suite."""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .config import ExperimentConfig
from .meanfield import ProductState, SweepSpec, scan_bistability, sweep_detuning
from .model import LatticeSpec, ModelParams
from .tn.mpo import (
    EvolveReport,
    TruncationPolicy,
    VectorizedMPO,
    build_trotter_schedule,
    evolve_to_ness,
    product_mpo,
)

__all__ = [
    "MpoSweepPoint",
    "MpoSweepResult",
    "mpo_sweep",
    "mpo_refine_dt",
    "ResultRecord",
    "run_experiment",
]


@dataclass
class MpoSweepPoint:
    delta: float
    densities: np.ndarray
    n_center: float
    entropy: float
    correlations: dict
    report: EvolveReport


@dataclass
class MpoSweepResult:
    chi: int
    direction: str
    points: list = field(default_factory=list)

    @property
    def deltas(self) -> np.ndarray:
        return np.array([p.delta for p in self.points])

    @property
    def n_center(self) -> np.ndarray:
        return np.array([p.n_center for p in self.points])

    @property
    def entropies(self) -> np.ndarray:
        return np.array([p.entropy for p in self.points])

    def correlation_series(self, r: int) -> np.ndarray:
        return np.array([p.correlations[r] for p in self.points])

    def point_at(self, delta: float) -> MpoSweepPoint:
        k = int(np.argmin(np.abs(self.deltas - delta)))
        return self.points[k]


def mpo_sweep(params: ModelParams, spec: LatticeSpec, chi: int, grid,
              dt: float = 0.05, tol: float = 1e-5, t_max: float = 60.0,
              sv_cutoff: float = 1e-10, anchor_t: float = None,
              correlation_r: tuple = (), entropy: bool = False,
              check_interval: float = 1.0, mpo: VectorizedMPO = None) -> MpoSweepResult:
    """Warm-started detuning sweep of matrix-product steady states.

    Starts from the all-down product state (or a caller-provided operator) and
    carries the converged state from one grid point to the next. The first
    point may use a longer budget ``anchor_t``.
    """
    grid = [float(g) for g in grid]
    direction = "rl" if len(grid) > 1 and grid[1] < grid[0] else "lr"
    policy = TruncationPolicy(chi, sv_cutoff)
    if mpo is None:
        mpo = product_mpo(ProductState.all_down(spec.n_sites))
    center = spec.center_site
    result = MpoSweepResult(chi=chi, direction=direction)
    for i, delta in enumerate(grid):
        p = params.with_delta(delta)
        schedule = build_trotter_schedule(p, spec, dt)
        budget = anchor_t if (i == 0 and anchor_t is not None) else t_max
        report = evolve_to_ness(mpo, schedule, policy, tol=tol, t_max=budget,
                                check_interval=check_interval)
        dens = mpo.densities()
        corr = {r: mpo.correlation(center, r) for r in correlation_r}
        s_val = mpo.operator_entropy() if entropy else float("nan")
        result.points.append(MpoSweepPoint(
            delta, dens, float(dens[center]), s_val, corr, report))
    return result


def mpo_refine_dt(mpo: VectorizedMPO, params: ModelParams, spec: LatticeSpec,
                  chi: int, dt_stages, sv_cutoff: float = 1e-12,
                  check_interval: float = 1.0):
    """Polish a steady state through a schedule of decreasing time steps.

    ``dt_stages`` is a sequence of (dt, tol, t_max); returns the list of
    evolution reports. Used for high-accuracy oracle comparisons where the
    splitting bias of a single dt matters.
    """
    policy = TruncationPolicy(chi, sv_cutoff)
    reports = []
    for dt, tol, t_max in dt_stages:
        schedule = build_trotter_schedule(params, spec, dt)
        reports.append(evolve_to_ness(mpo, schedule, policy, tol=tol,
                                      t_max=t_max, check_interval=check_interval))
    return reports


# ---------------------------------------------------------------------------
# experiment dispatch
# ---------------------------------------------------------------------------

@dataclass
class ResultRecord:
    """Everything a run produces, before serialization."""

    config_hash: str
    version: str
    seed: int
    wall_seconds: float
    tables: dict          # name -> (columns, rows)
    warnings: list = field(default_factory=list)


def _fmt(value):
    if isinstance(value, float):
        return float(f"{value:.12g}")
    return value


def _map_jobs(fn, jobs, workers: int):
    """Map independent jobs, fanning out to processes when workers > 1.

    Results come back in job order, so output files stay deterministic.
    """
    if workers > 1 and len(jobs) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


def _run_oracle(config: ExperimentConfig, seed: int, workers: int):
    from . import oracle

    lv = oracle.liouvillian(config.lattice, config.params)
    ss = oracle.steady_state(lv)
    rows = [(j, _fmt(float(n))) for j, n in enumerate(ss.densities)]
    tables = {"results": (("site", "n"), rows)}
    warnings = []
    if ss.degenerate:
        warnings.append(f"steady state degenerate (null dimension {ss.null_dim})")
    return tables, warnings


def _sweep_grids(block):
    start, stop, step = block["start"], block["stop"], block["step"]
    grids = {}
    for d in block["directions"]:
        lo, hi = sorted((start, stop))
        n = int(round((hi - lo) / step))
        if d == "rl":
            grids[d] = tuple(hi - step * k for k in range(n + 1))
        else:
            grids[d] = tuple(lo + step * k for k in range(n + 1))
    return grids


def _run_mf_sweep(config: ExperimentConfig, seed: int, workers: int):
    block = config.blocks["sweep"]
    ev = config.blocks["evolve"]
    rows = []
    profile_rows = []
    warnings = []
    for direction, grid in sorted(_sweep_grids(block).items()):
        spec = SweepSpec(grid=grid, direction=direction, n_seeds=block["n_seeds"])
        res = sweep_detuning(spec, config.params, config.lattice, dt=ev["dt"],
                             tol=ev["tol"], t_max=ev["t_max"], seed=seed)
        if not res.anchor_unique:
            warnings.append(
                f"{direction} anchor not unique across seeds (spread {res.anchor_spread:.2e})")
        for p in res.points:
            rows.append((_fmt(p.delta), direction, _fmt(p.n_center),
                         int(p.report.converged), _fmt(p.report.residual)))
            for site, n in enumerate(p.densities):
                profile_rows.append((_fmt(p.delta), direction, site, _fmt(float(n))))
    rows.sort(key=lambda r: (r[1], r[0]))
    profile_rows.sort(key=lambda r: (r[1], r[0], r[2]))
    return {
        "results": (("delta_over_gamma", "direction", "n_c", "converged", "residual"), rows),
        "profiles": (("delta_over_gamma", "direction", "site", "n"), profile_rows),
    }, warnings


def _run_mf_scan(config: ExperimentConfig, seed: int, workers: int):
    block = config.blocks["scan"]
    ev = config.blocks["evolve"]
    records = scan_bistability(
        block["j_values"], block["omega_values"], config.params, config.lattice,
        delta_range=(block["delta_start"], block["delta_stop"]),
        step=block["step"], dt=ev["dt"], tol=ev["tol"], t_max=ev["t_max"],
        seed=seed)
    rows = []
    for r in records:
        interval = r.interval
        rows.append((_fmt(r.J), _fmt(r.Omega),
                     _fmt(r.delta_rl) if r.delta_rl is not None else "",
                     _fmt(r.delta_lr) if r.delta_lr is not None else "",
                     _fmt(interval[1] - interval[0]) if interval else 0.0))
    rows.sort(key=lambda r: (r[0], r[1]))
    return {"results": (("J_over_gamma", "Omega_over_gamma", "delta_rl",
                         "delta_lr", "width"), rows)}, []


def _mf_traj_point(args):
    config, seed, delta = args
    from .trajectories import run_ensemble

    block = config.blocks["ensemble"]
    stats = run_ensemble(config.params.with_delta(delta), config.lattice,
                         T=block["T"], dt=block["dt"],
                         n_traj=block["n_traj"], window=block["window"],
                         master_seed=seed, n_bins=block["n_bins"])
    return delta, stats


def _run_mf_traj(config: ExperimentConfig, seed: int, workers: int):
    block = config.blocks["ensemble"]
    deltas = sorted(block["deltas"] or [config.params.Delta])
    jobs = [(config, seed, d) for d in deltas]
    hist_rows, summary_rows = [], []
    for delta, stats in _map_jobs(_mf_traj_point, jobs, workers):
        centers = 0.5 * (stats.bin_edges[:-1] + stats.bin_edges[1:])
        for c, n in zip(centers, stats.hist_counts):
            hist_rows.append((_fmt(delta), _fmt(float(c)), int(n)))
        summary_rows.append((_fmt(delta), _fmt(stats.mean), _fmt(stats.stderr)))
    return {
        "histogram": (("delta_over_gamma", "bin_center", "count"), hist_rows),
        "results": (("delta_over_gamma", "mean_n_c", "stderr"), summary_rows),
    }, []


def _mpo_ness_point(args):
    config, chi = args
    tn = config.blocks["tn"]
    corr_r = tuple(int(r) for r in tn["correlation_r"])
    res = mpo_sweep(config.params, config.lattice, chi,
                    [config.params.Delta], dt=tn["dt"], tol=tn["tol"],
                    t_max=tn["t_max"], sv_cutoff=tn["sv_cutoff"],
                    correlation_r=corr_r, entropy=bool(tn["entropy"]))
    p = res.points[0]
    row = [chi, _fmt(p.n_center), _fmt(p.entropy)]
    row += [_fmt(p.correlations[r]) for r in corr_r]
    row += [_fmt(p.report.discarded_total), int(p.report.converged)]
    return tuple(row)


def _run_mpo_ness(config: ExperimentConfig, seed: int, workers: int):
    tn = config.blocks["tn"]
    chis = sorted(int(c) for c in (tn["chi_values"] or [tn["chi"]]))
    corr_r = tuple(int(r) for r in tn["correlation_r"])
    jobs = [(config, chi) for chi in chis]
    rows = list(_map_jobs(_mpo_ness_point, jobs, workers))
    columns = ["chi", "n_c", "entropy"] + [f"c{r}" for r in corr_r] \
        + ["discarded", "converged"]
    return {"results": (tuple(columns), rows)}, []


def _run_mpo_sweep(config: ExperimentConfig, seed: int, workers: int):
    tn = config.blocks["tn"]
    block = config.blocks["sweep"]
    corr_r = tuple(int(r) for r in tn["correlation_r"])
    rows = []
    for direction, grid in sorted(_sweep_grids(block).items()):
        res = mpo_sweep(config.params, config.lattice, int(tn["chi"]), grid,
                        dt=tn["dt"], tol=tn["tol"], t_max=tn["t_max"],
                        sv_cutoff=tn["sv_cutoff"], correlation_r=corr_r,
                        entropy=bool(tn["entropy"]))
        for p in res.points:
            row = [_fmt(p.delta), direction, int(tn["chi"]), _fmt(p.n_center),
                   _fmt(p.entropy)]
            row += [_fmt(p.correlations[r]) for r in corr_r]
            row.append(int(p.report.converged))
            rows.append(tuple(row))
    rows.sort(key=lambda r: (r[1], r[0]))
    columns = ["delta_over_gamma", "direction", "chi", "n_c", "entropy"] \
        + [f"c{r}" for r in corr_r] + ["converged"]
    return {"results": (tuple(columns), rows)}, []


def _run_mps_traj(config: ExperimentConfig, seed: int, workers: int):
    from .tn.traj import mps_trajectory_run

    block = config.blocks["tn_traj"]
    ens = mps_trajectory_run(config.params, config.lattice,
                             int(block["chi_tilde"]), block["T"], block["dt"],
                             int(block["n_traj"]), window=block["window"],
                             master_seed=seed)
    rows = [(r, _fmt(float(v))) for r, v in enumerate(ens.center_averages)]
    summary = [(_fmt(config.params.Delta), _fmt(ens.mean), _fmt(ens.stderr),
                ens.max_bond)]
    return {
        "trajectories": (("trajectory", "n_c_avg"), rows),
        "results": (("delta_over_gamma", "mean_n_c", "stderr", "max_bond"), summary),
    }, []


def _run_cqed(config: ExperimentConfig, seed: int, workers: int):
    from .cqed import CircuitSpec, compare_to_xy

    c = config.blocks["circuit"]
    spec = CircuitSpec.from_detunings(
        c["delta_1"], c["delta_2"], c["g_1"], c["delta_c"], c["omega"],
        mode_sign=int(c["mode_sign"]), n_max=int(c["n_max"]))
    T = c["T"] if c["T"] else None
    rows = []
    series_rows = []
    for s in sorted(float(x) for x in c["scales"]):
        cmp = compare_to_xy(spec.scaled(s), T=T, n_times=int(c["n_times"]))
        rows.append((_fmt(s), _fmt(cmp.deviation)))
        if s == 1.0:
            for t, pf, px in zip(cmp.times, cmp.populations_full, cmp.populations_xy):
                series_rows.append(tuple(_fmt(float(v)) for v in
                                         (t, *pf, *px)))
    tables = {"results": (("scale", "max_deviation"), rows)}
    if series_rows:
        tables["timeseries"] = (("t", "n1_full", "n2_full", "n3_full",
                                 "n1_xy", "n2_xy", "n3_xy"), series_rows)
    return tables, []


_RUNNERS = {
    "oracle": _run_oracle,
    "mf-sweep": _run_mf_sweep,
    "mf-scan": _run_mf_scan,
    "mf-traj": _run_mf_traj,
    "mpo-ness": _run_mpo_ness,
    "mpo-sweep": _run_mpo_sweep,
    "mps-traj": _run_mps_traj,
    "cqed-compare": _run_cqed,
}


def run_experiment(config: ExperimentConfig, workers: int = 1,
                   seed_override: int = None) -> ResultRecord:
    """Dispatch a validated config to its runner and collect tabular output."""
    errors = [f for f in config.validate() if f.level == "error"]
    if errors:
        msgs = "; ".join(f"{f.field}: {f.message}" for f in errors)
        raise ValueError(f"invalid config: {msgs}")
    seed = seed_override if seed_override is not None else config.seed
    if seed is None:
        seed = int(np.random.SeedSequence().entropy % (2**31))
    t0 = time.time()
    tables, warnings = _RUNNERS[config.kind](config, seed, workers)
    return ResultRecord(
        config_hash=config.hash(),
        version=__version__,
        seed=seed,
        wall_seconds=time.time() - t0,
        tables=tables,
        warnings=warnings,
    )
