"""Mean-field (product density matrix) steady states, sweeps and profile fits.

The lattice state is factorized into per-site 2x2 density matrices. Each step
freezes the neighbor expectation values, builds a local 4x4 generator per site
acting on the component vector (rho00, rho01, rho11, rho10), and applies its
exact exponential. The nonlinearity enters only through the site-dependent
drive amplitude Omega_j = Omega - J * sum_neighbors <sigma->.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.optimize

from .model import LatticeSpec, ModelParams, from_components, to_components

__all__ = [
    "ProductState",
    "ConvergenceReport",
    "SweepSpec",
    "SweepPoint",
    "SweepResult",
    "OscillationFit",
    "effective_driving",
    "effective_driving_all",
    "local_liouvillian",
    "evolve_to_ness",
    "sweep_detuning",
    "fit_density_oscillations",
    "critical_point",
    "scan_bistability",
]


class ProductState:
    """Collection of per-site 2x2 density matrices.

    Stored internally in the component ordering (rho00, rho01, rho11, rho10)
    as an (n_sites, 4) complex array.
    """

    def __init__(self, components: np.ndarray):
        comp = np.array(components, dtype=complex)
        if comp.ndim != 2 or comp.shape[1] != 4:
            raise ValueError("components must have shape (n_sites, 4)")
        self.components = comp

    @classmethod
    def from_matrices(cls, mats) -> "ProductState":
        return cls(np.array([to_components(m) for m in mats]))

    @classmethod
    def all_down(cls, n_sites: int) -> "ProductState":
        comp = np.zeros((n_sites, 4), dtype=complex)
        comp[:, 0] = 1.0
        return cls(comp)

    @classmethod
    def all_up(cls, n_sites: int) -> "ProductState":
        comp = np.zeros((n_sites, 4), dtype=complex)
        comp[:, 2] = 1.0
        return cls(comp)

    @classmethod
    def random(cls, n_sites: int, rng: np.random.Generator) -> "ProductState":
        """Independent Haar-random pure qubit state on every site."""
        psi = rng.normal(size=(n_sites, 2)) + 1j * rng.normal(size=(n_sites, 2))
        psi /= np.linalg.norm(psi, axis=1, keepdims=True)
        comp = np.empty((n_sites, 4), dtype=complex)
        comp[:, 0] = np.abs(psi[:, 0]) ** 2
        comp[:, 2] = np.abs(psi[:, 1]) ** 2
        comp[:, 3] = psi[:, 1] * psi[:, 0].conj()  # <1|rho|0>
        comp[:, 1] = comp[:, 3].conj()
        return cls(comp)

    @property
    def n_sites(self) -> int:
        return self.components.shape[0]

    def copy(self) -> "ProductState":
        return ProductState(self.components.copy())

    def matrices(self) -> np.ndarray:
        return np.array([from_components(c) for c in self.components])

    def densities(self) -> np.ndarray:
        return self.components[:, 2].real.copy()

    def sigma_minus(self) -> np.ndarray:
        """<sigma->_j = <1|rho_j|0> for every site."""
        return self.components[:, 3].copy()

    def validate(self, atol: float = 1e-9):
        comp = self.components
        if not np.allclose(comp[:, 1], comp[:, 3].conj(), atol=atol):
            raise ValueError("state is not Hermitian")
        traces = comp[:, 0] + comp[:, 2]
        if not np.allclose(traces, 1.0, atol=atol):
            raise ValueError("site traces deviate from 1")
        # eigenvalues of [[a, c*], [c, b]]: (a+b)/2 +- sqrt(((a-b)/2)^2 + |c|^2)
        a, b = comp[:, 0].real, comp[:, 2].real
        disc = np.sqrt(((a - b) / 2) ** 2 + np.abs(comp[:, 3]) ** 2)
        lo = (a + b) / 2 - disc
        if np.min(lo) < -atol:
            raise ValueError(f"negative eigenvalue {np.min(lo):.3e}")


def effective_driving(state: ProductState, site: int, params: ModelParams,
                      spec: LatticeSpec) -> complex:
    """Site-dependent drive Omega_j = Omega - J * sum_{j' nn j} <sigma->_{j'}."""
    sm = state.sigma_minus()
    return params.Omega - params.J * sum(sm[j] for j in spec.neighbors(site))


def effective_driving_all(state: ProductState, params: ModelParams,
                          adjacency: np.ndarray) -> np.ndarray:
    return params.Omega - params.J * (adjacency @ state.sigma_minus())


def local_liouvillian(omega_j: complex, params: ModelParams) -> np.ndarray:
    """Local 4x4 generator on (rho00, rho01, rho11, rho10) for frozen Omega_j."""
    return _generators(np.array([omega_j]), params)[0]


def _generators(omegas: np.ndarray, params: ModelParams) -> np.ndarray:
    """Batched local generators, shape (n, 4, 4)."""
    n = omegas.shape[0]
    g, d = params.gamma, params.Delta
    w = omegas
    wc = omegas.conj()
    lv = np.zeros((n, 4, 4), dtype=complex)
    lv[:, 0, 1] = 1j * w
    lv[:, 0, 2] = g
    lv[:, 0, 3] = -1j * wc
    lv[:, 1, 0] = 1j * wc
    lv[:, 1, 1] = 1j * d - g / 2
    lv[:, 1, 2] = -1j * wc
    lv[:, 2, 1] = -1j * w
    lv[:, 2, 2] = -g
    lv[:, 2, 3] = 1j * wc
    lv[:, 3, 0] = -1j * w
    lv[:, 3, 2] = 1j * w
    lv[:, 3, 3] = -1j * d - g / 2
    return lv


def _step(components: np.ndarray, params: ModelParams, adjacency: np.ndarray,
          dt: float) -> np.ndarray:
    """One update: exact exponential of each frozen local generator."""
    omegas = params.Omega - params.J * (adjacency @ components[:, 3])
    lv = _generators(omegas, params)
    try:
        w, v = np.linalg.eig(lv)
        phases = np.exp(w * dt)
        rhs = np.linalg.solve(v, components[..., None])
        out = (v * phases[:, None, :]) @ rhs
        return out[..., 0]
    except np.linalg.LinAlgError:
        out = np.empty_like(components)
        for i in range(components.shape[0]):
            out[i] = scipy.linalg.expm(lv[i] * dt) @ components[i]
        return out


@dataclass
class ConvergenceReport:
    converged: bool
    t_final: float
    residual: float
    dt: float
    tol: float


def evolve_to_ness(state0: ProductState, params: ModelParams, spec: LatticeSpec,
                   dt: float = 2e-3, tol: float = 1e-7, t_max: float = 500.0,
                   check_interval: float = 1.0) -> tuple:
    """Evolve all sites simultaneously until the density profile is stationary.

    Convergence: max_j |n_j(t) - n_j(t - check_interval)| < tol. Non-convergence
    by t_max is reported, not raised.
    """
    if dt <= 0 or tol <= 0:
        raise ValueError("dt and tol must be positive")
    adjacency = spec.adjacency()
    comp = state0.components.copy()
    steps_per_check = max(1, int(round(check_interval / dt)))
    n_checks = max(1, int(round(t_max / (steps_per_check * dt))))
    last = comp[:, 2].real.copy()
    t = 0.0
    residual = np.inf
    converged = False
    for _ in range(n_checks):
        for _ in range(steps_per_check):
            comp = _step(comp, params, adjacency, dt)
        t += steps_per_check * dt
        dens = comp[:, 2].real
        residual = float(np.max(np.abs(dens - last)))
        last = dens.copy()
        if residual < tol:
            converged = True
            break
    return ProductState(comp), ConvergenceReport(converged, t, residual, dt, tol)


@dataclass(frozen=True)
class SweepSpec:
    """Warm-started detuning sweep; the first grid point is the anchor."""

    grid: tuple
    direction: str  # "rl" (decreasing Delta) or "lr" (increasing)
    n_seeds: int = 5
    warm_start: bool = True

    def __post_init__(self):
        grid = tuple(float(g) for g in self.grid)
        object.__setattr__(self, "grid", grid)
        if self.direction not in ("rl", "lr"):
            raise ValueError("direction must be 'rl' or 'lr'")
        diffs = np.diff(grid)
        if self.direction == "rl" and not np.all(diffs < 0):
            raise ValueError("rl sweep grid must be strictly decreasing")
        if self.direction == "lr" and not np.all(diffs > 0):
            raise ValueError("lr sweep grid must be strictly increasing")

    @classmethod
    def from_range(cls, start: float, stop: float, step: float = 0.02,
                   n_seeds: int = 5) -> "SweepSpec":
        direction = "rl" if stop < start else "lr"
        sgn = -1.0 if direction == "rl" else 1.0
        n = int(round(abs(stop - start) / step))
        grid = tuple(start + sgn * step * k for k in range(n + 1))
        return cls(grid=grid, direction=direction, n_seeds=n_seeds)

    @property
    def anchor(self) -> float:
        return self.grid[0]


@dataclass
class SweepPoint:
    delta: float
    densities: np.ndarray
    n_center: float
    report: ConvergenceReport


@dataclass
class SweepResult:
    spec: SweepSpec
    points: list
    anchor_unique: bool
    anchor_spread: float

    @property
    def deltas(self) -> np.ndarray:
        return np.array([p.delta for p in self.points])

    @property
    def n_center(self) -> np.ndarray:
        return np.array([p.n_center for p in self.points])

    def point_at(self, delta: float) -> SweepPoint:
        k = int(np.argmin(np.abs(self.deltas - delta)))
        return self.points[k]


def sweep_detuning(sweep: SweepSpec, params: ModelParams, spec: LatticeSpec,
                   dt: float = 2e-3, tol: float = 1e-7, t_max: float = 500.0,
                   seed: int = 0, anchor_tol: float = 1e-6) -> SweepResult:
    """Run a warm-started detuning sweep of mean-field steady states.

    The anchor point is solved from ``n_seeds`` random product states; if they
    disagree on any density by more than ``anchor_tol`` the sweep is flagged
    as anchored on a non-unique state but continues from the first seed.
    """
    rng = np.random.default_rng(seed)
    center = spec.center_site
    anchor_params = params.with_delta(sweep.anchor)
    anchor_states = []
    for _ in range(max(1, sweep.n_seeds)):
        s0 = ProductState.random(spec.n_sites, rng)
        s, _ = evolve_to_ness(s0, anchor_params, spec, dt=dt, tol=tol, t_max=t_max)
        anchor_states.append(s)
    spread = 0.0
    for s in anchor_states[1:]:
        spread = max(spread, float(np.max(np.abs(
            s.densities() - anchor_states[0].densities()))))
    anchor_unique = spread <= anchor_tol

    points = []
    state = anchor_states[0]
    for delta in sweep.grid:
        p = params.with_delta(delta)
        start = state if sweep.warm_start else ProductState.random(spec.n_sites, rng)
        state, report = evolve_to_ness(start, p, spec, dt=dt, tol=tol, t_max=t_max)
        dens = state.densities()
        points.append(SweepPoint(delta, dens, float(dens[center]), report))
    return SweepResult(sweep, points, anchor_unique, spread)


@dataclass
class OscillationFit:
    """Damped-oscillation fit of a density profile, delta_n = A e^{-j/r} sin(kj + phi)."""

    amplitude: float
    decay_length: float
    wavenumber: float
    phase: float
    bulk_density: float
    residual: float
    ok: bool

    def canonical(self) -> tuple:
        """(A, phi) reduced to A > 0, phi in [-pi, pi)."""
        a, phi = self.amplitude, self.phase
        if a < 0:
            a, phi = -a, phi + np.pi
        phi = (phi + np.pi) % (2 * np.pi) - np.pi
        return a, phi


def fit_density_oscillations(profile: np.ndarray, margin: int = 5,
                             window: tuple = None,
                             residual_threshold: float = 0.5) -> OscillationFit:
    """Fit decaying density oscillations on the left half of a symmetric profile.

    ``profile`` holds n_j for 1-based sites 1..N. The fit window defaults to
    sites [margin+1, ceil(N/2)]; the bulk density is the average over the
    central third of the chain. Residuals are weighted by an envelope estimate
    so every oscillation period counts equally (an unweighted fit is dominated
    by the near-edge periods and biases r and k). The flag ``ok`` is cleared
    when the relative residual exceeds ``residual_threshold``.
    """
    profile = np.asarray(profile, dtype=float)
    n = profile.size
    third = max(1, n // 3)
    bulk = float(np.mean(profile[(n - third) // 2:(n - third) // 2 + third]))
    if window is None:
        window = (margin + 1, (n + 1) // 2)
    lo, hi = window
    j = np.arange(lo, hi + 1, dtype=float)
    y = profile[lo - 1:hi] - bulk

    scale = float(np.max(np.abs(y)))
    if scale < 1e-14:
        return OscillationFit(0.0, np.inf, 0.0, 0.0, bulk, 0.0, False)

    # initial wavenumber from the discrete spectrum of the windowed signal
    pad = 8 * y.size
    spectrum = np.abs(np.fft.rfft(y, n=pad))
    ks = 2 * np.pi * np.fft.rfftfreq(pad)
    k0 = float(ks[np.argmax(spectrum[1:]) + 1])
    k0 = min(max(k0, 0.05), np.pi - 0.05)

    envelope = np.abs(y) + 0.15 * scale

    def model(theta, jj):
        a, r, k, phi = theta
        return a * np.exp(-jj / r) * np.sin(k * jj + phi)

    best = None
    for r0 in (n / 8.0, n / 4.0):
        for phi0 in np.linspace(-np.pi, np.pi, 8, endpoint=False):
            a0 = scale * np.exp(j[0] / r0)
            res = scipy.optimize.least_squares(
                lambda th: (model(th, j) - y) / envelope,
                x0=[a0, r0, k0, phi0],
                bounds=([-np.inf, 0.3, 1e-3, -2 * np.pi],
                        [np.inf, 10.0 * n, np.pi, 2 * np.pi]),
                max_nfev=2000,
            )
            if best is None or res.cost < best.cost:
                best = res
    a, r, k, phi = best.x
    fit_values = model(best.x, j)
    resid = float(np.sqrt(np.mean((fit_values - y) ** 2)))
    ok = resid <= residual_threshold * scale
    return OscillationFit(float(a), float(r), float(k), float(phi), bulk, resid, ok)


def critical_point(deltas: np.ndarray, n_center: np.ndarray,
                   min_jump: float = 0.1) -> tuple:
    """Locate the sharpest shift of n_center along a sweep.

    Returns (delta_critical, jump); delta_critical is None when the maximal
    adjacent-grid jump stays below ``min_jump``.
    """
    deltas = np.asarray(deltas, dtype=float)
    n_center = np.asarray(n_center, dtype=float)
    jumps = np.abs(np.diff(n_center))
    k = int(np.argmax(jumps))
    jump = float(jumps[k])
    if jump < min_jump:
        return None, jump
    return float(0.5 * (deltas[k] + deltas[k + 1])), jump


@dataclass
class BistabilityRecord:
    J: float
    Omega: float
    delta_rl: float
    delta_lr: float
    jump_rl: float
    jump_lr: float

    @property
    def interval(self) -> tuple:
        """Bistable window (low, high) or None when either sweep is smooth."""
        if self.delta_rl is None or self.delta_lr is None:
            return None
        lo, hi = sorted((self.delta_rl, self.delta_lr))
        if hi - lo < 1e-12:
            return None
        return (lo, hi)


def scan_bistability(j_values, omega_values, params: ModelParams,
                     spec: LatticeSpec, delta_range: tuple = (-2.0, 3.0),
                     step: float = 0.02, dt: float = 2e-3, tol: float = 1e-7,
                     t_max: float = 500.0, min_jump: float = 0.1,
                     agreement_tol: float = 1e-3, seed: int = 0) -> list:
    """Map bistable windows over a (J, Omega) grid by running both sweeps."""
    lo, hi = delta_range
    out = []
    for j_val in j_values:
        for omega in omega_values:
            p = ModelParams(J=j_val, Omega=omega, Delta=0.0, gamma=params.gamma)
            rl = sweep_detuning(SweepSpec.from_range(hi, lo, step), p, spec,
                                dt=dt, tol=tol, t_max=t_max, seed=seed)
            lr = sweep_detuning(SweepSpec.from_range(lo, hi, step), p, spec,
                                dt=dt, tol=tol, t_max=t_max, seed=seed)
            nc_rl = rl.n_center[::-1]  # align with the lr grid
            agree = np.max(np.abs(nc_rl - lr.n_center)) <= agreement_tol
            if agree:
                out.append(BistabilityRecord(j_val, omega, None, None, 0.0, 0.0))
                continue
            d_rl, jump_rl = critical_point(rl.deltas, rl.n_center, min_jump)
            d_lr, jump_lr = critical_point(lr.deltas, lr.n_center, min_jump)
            out.append(BistabilityRecord(j_val, omega, d_rl, d_lr, jump_rl, jump_lr))
    return out
