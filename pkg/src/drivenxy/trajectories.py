"""Monte Carlo wave-function unraveling restricted to product pure states.

Each trajectory keeps one normalized 2-component vector per site. Between
jumps every site evolves under its own non-Hermitian 2x2 generator built from
the frozen neighbor expectation values; a quantum jump applies sigma- locally.
Jump decisions use the first-order probability p_j = gamma * dt * <n_j> with
one uniform draw per site per step, so the random stream of a trajectory is
fixed by (master_seed, trajectory_id) alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import LatticeSpec, ModelParams

__all__ = [
    "TrajectoryState",
    "JumpEvent",
    "EnsembleStats",
    "local_effective_hamiltonian",
    "trajectory_step",
    "run_trajectory",
    "run_ensemble",
    "histogram_modes",
    "ModesSummary",
]

MAX_JUMP_STEP = 0.05  # dt * gamma above this invalidates first-order jumps


@dataclass
class JumpEvent:
    time: float
    site: int


class TrajectoryState:
    """Product pure state of one stochastic realization."""

    def __init__(self, psi: np.ndarray, traj_id: int = 0,
                 rng: np.random.Generator = None):
        psi = np.array(psi, dtype=complex)
        if psi.ndim != 2 or psi.shape[1] != 2:
            raise ValueError("psi must have shape (n_sites, 2)")
        self.psi = psi
        self.traj_id = traj_id
        self.rng = rng

    @classmethod
    def random(cls, n_sites: int, master_seed: int, traj_id: int) -> "TrajectoryState":
        rng = np.random.default_rng([master_seed, traj_id])
        psi = rng.normal(size=(n_sites, 2)) + 1j * rng.normal(size=(n_sites, 2))
        psi /= np.linalg.norm(psi, axis=1, keepdims=True)
        return cls(psi, traj_id, rng)

    @classmethod
    def all_down(cls, n_sites: int, rng: np.random.Generator = None) -> "TrajectoryState":
        psi = np.zeros((n_sites, 2), dtype=complex)
        psi[:, 0] = 1.0
        return cls(psi, 0, rng)

    @property
    def n_sites(self) -> int:
        return self.psi.shape[0]

    def densities(self) -> np.ndarray:
        return np.abs(self.psi[:, 1]) ** 2

    def sigma_minus(self) -> np.ndarray:
        """<sigma->_j = conj(psi0) * psi1 per site."""
        return self.psi[:, 0].conj() * self.psi[:, 1]

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.psi, axis=1)


def local_effective_hamiltonian(state: TrajectoryState, site: int,
                                params: ModelParams, spec: LatticeSpec) -> np.ndarray:
    """Non-Hermitian 2x2 generator of site ``site`` in the (|0>, |1>) basis."""
    sm = state.sigma_minus()
    omega_j = params.Omega - params.J * sum(sm[j] for j in spec.neighbors(site))
    h = np.zeros((2, 2), dtype=complex)
    h[1, 1] = params.Delta - 0.5j * params.gamma
    h[1, 0] = omega_j
    h[0, 1] = np.conj(omega_j)
    return h


def _exp_generators(omegas: np.ndarray, params: ModelParams, dt: float):
    """exp(-i H_eff dt) for every site, closed form for traceless-split 2x2.

    H_eff = [[0, conj(w)], [w, Delta - i gamma/2]]; returns the four entries
    of the exponential as arrays aligned with ``omegas``.
    """
    dd = params.Delta - 0.5j * params.gamma
    a = -0.5j * dt * dd  # half trace of -i dt H
    b00 = -a
    b01 = -1j * dt * omegas.conj()
    b10 = -1j * dt * omegas
    mu = np.sqrt(b00 * b00 + b01 * b10 + 0j)
    small = np.abs(mu) < 1e-12
    mu_safe = np.where(small, 1.0, mu)
    sinch = np.where(small, 1.0 + mu * mu / 6.0, np.sinh(mu_safe) / mu_safe)
    cosh = np.cosh(mu)
    ea = np.exp(a)
    return (ea * (cosh + sinch * b00), ea * sinch * b01,
            ea * sinch * b10, ea * (cosh - sinch * b00))


def _advance(psi: np.ndarray, uniforms: np.ndarray, params: ModelParams,
             adjacency: np.ndarray, dt: float):
    """One step for a batch of product states, psi shape (..., n_sites, 2).

    Returns the jump mask of this step; psi is updated in place.
    """
    n1 = np.abs(psi[..., 1]) ** 2
    sm = psi[..., 0].conj() * psi[..., 1]
    omegas = params.Omega - params.J * (sm @ adjacency.T)
    p_jump = params.gamma * dt * n1
    jump = uniforms < p_jump

    u00, u01, u10, u11 = _exp_generators(omegas, params, dt)
    new0 = u00 * psi[..., 0] + u01 * psi[..., 1]
    new1 = u10 * psi[..., 0] + u11 * psi[..., 1]
    norm = np.sqrt(np.abs(new0) ** 2 + np.abs(new1) ** 2)
    if np.any(norm < 1e-300):
        raise FloatingPointError("state norm underflow during non-Hermitian step")
    new0 /= norm
    new1 /= norm

    # jump branch: sigma- maps psi to (psi1, 0) -> renormalized keeps the phase
    amp = psi[..., 1]
    mag = np.abs(amp)
    mag_safe = np.where(mag > 0, mag, 1.0)
    jump0 = amp / mag_safe
    psi[..., 0] = np.where(jump, jump0, new0)
    psi[..., 1] = np.where(jump, 0.0, new1)
    return jump


def trajectory_step(state: TrajectoryState, params: ModelParams, spec: LatticeSpec,
                    dt: float, rng: np.random.Generator = None,
                    t: float = 0.0) -> list:
    """Advance one trajectory by dt; returns the jump events of this step."""
    if dt * params.gamma >= MAX_JUMP_STEP:
        raise ValueError(
            f"dt*gamma = {dt * params.gamma:.3g} too large for first-order jumps"
        )
    rng = rng if rng is not None else state.rng
    if rng is None:
        raise ValueError("no random generator attached to the trajectory")
    uniforms = rng.random(state.n_sites)
    jump = _advance(state.psi, uniforms, params, spec.adjacency(), dt)
    return [JumpEvent(t, int(j)) for j in np.nonzero(jump)[0]]


def run_trajectory(params: ModelParams, spec: LatticeSpec, T: float, dt: float,
                   master_seed: int, traj_id: int, window: float = 0.3,
                   log_events: bool = False):
    """Evolve a single trajectory; returns (time-averaged densities, events)."""
    state = TrajectoryState.random(spec.n_sites, master_seed, traj_id)
    n_steps = int(round(T / dt))
    avg_from = int(round((1.0 - window) * n_steps))
    adjacency = spec.adjacency()
    acc = np.zeros(spec.n_sites)
    count = 0
    events = []
    for step in range(n_steps):
        uniforms = state.rng.random(spec.n_sites)
        jump = _advance(state.psi, uniforms, params, adjacency, dt)
        if log_events and np.any(jump):
            t = (step + 1) * dt
            events.extend(JumpEvent(t, int(j)) for j in np.nonzero(jump)[0])
        if step >= avg_from:
            acc += state.densities()
            count += 1
    return acc / max(count, 1), events


@dataclass
class EnsembleStats:
    n_traj: int
    window: float
    center_averages: np.ndarray  # per-trajectory time-averaged <n_c>
    hist_counts: np.ndarray
    bin_edges: np.ndarray
    mean: float
    stderr: float
    mean_profile: np.ndarray
    master_seed: int

    def __post_init__(self):
        assert int(self.hist_counts.sum()) == self.n_traj


def run_ensemble(params: ModelParams, spec: LatticeSpec, T: float = 200.0,
                 dt: float = 2e-3, n_traj: int = 1000, window: float = 0.3,
                 master_seed: int = 0, n_bins: int = 50,
                 chunk_size: int = 200, block_steps: int = 500) -> EnsembleStats:
    """Ensemble of independent trajectories with per-trajectory RNG streams.

    Trajectories are processed in batches for speed; each trajectory draws all
    of its random numbers from its own generator seeded by
    (master_seed, traj_id), so the result is independent of the batching.
    """
    if dt * params.gamma >= MAX_JUMP_STEP:
        raise ValueError(
            f"dt*gamma = {dt * params.gamma:.3g} too large for first-order jumps"
        )
    if not 0.0 < window <= 1.0:
        raise ValueError("window fraction must lie in (0, 1]")
    n_sites = spec.n_sites
    adjacency = spec.adjacency()
    n_steps = int(round(T / dt))
    avg_from = int(round((1.0 - window) * n_steps))
    center = spec.center_site

    center_averages = np.empty(n_traj)
    profile_acc = np.zeros(n_sites)
    for start in range(0, n_traj, chunk_size):
        ids = range(start, min(start + chunk_size, n_traj))
        rngs = [np.random.default_rng([master_seed, r]) for r in ids]
        b = len(rngs)
        psi = np.empty((b, n_sites, 2), dtype=complex)
        for i, rng in enumerate(rngs):
            raw = rng.normal(size=(n_sites, 2)) + 1j * rng.normal(size=(n_sites, 2))
            psi[i] = raw / np.linalg.norm(raw, axis=1, keepdims=True)
        acc_c = np.zeros(b)
        acc_prof = np.zeros((b, n_sites))
        count = 0
        step = 0
        while step < n_steps:
            todo = min(block_steps, n_steps - step)
            uniforms = np.empty((b, todo, n_sites))
            for i, rng in enumerate(rngs):
                uniforms[i] = rng.random((todo, n_sites))
            for s in range(todo):
                _advance(psi, uniforms[:, s], params, adjacency, dt)
                if step + s >= avg_from:
                    dens = np.abs(psi[..., 1]) ** 2
                    acc_c += dens[:, center]
                    acc_prof += dens
                    count += 1
            step += todo
        center_averages[start:start + b] = acc_c / max(count, 1)
        profile_acc += acc_prof.sum(axis=0) / max(count, 1)

    hist_counts, bin_edges = np.histogram(center_averages, bins=n_bins,
                                          range=(0.0, 1.0))
    mean = float(np.mean(center_averages))
    stderr = float(np.std(center_averages, ddof=1) / np.sqrt(n_traj)) if n_traj > 1 else 0.0
    return EnsembleStats(
        n_traj=n_traj,
        window=window,
        center_averages=center_averages,
        hist_counts=hist_counts,
        bin_edges=bin_edges,
        mean=mean,
        stderr=stderr,
        mean_profile=profile_acc / n_traj,
        master_seed=master_seed,
    )


@dataclass
class ModesSummary:
    bimodal: bool
    positions: tuple
    separation: float
    peak_counts: tuple
    valley_count: int


def histogram_modes(counts: np.ndarray, edges: np.ndarray,
                    smooth: int = 3) -> ModesSummary:
    """Locate the two dominant modes of a histogram and the valley between them.

    A light moving-average smoothing suppresses single-bin noise before local
    maxima are ranked by mass.
    """
    counts = np.asarray(counts, dtype=float)
    centers = 0.5 * (edges[:-1] + edges[1:])
    if smooth > 1:
        kernel = np.ones(smooth) / smooth
        smoothed = np.convolve(counts, kernel, mode="same")
    else:
        smoothed = counts
    peaks = []
    for i in range(len(smoothed)):
        left = smoothed[i - 1] if i > 0 else -1.0
        right = smoothed[i + 1] if i < len(smoothed) - 1 else -1.0
        if smoothed[i] > 0 and smoothed[i] >= left and smoothed[i] >= right:
            peaks.append(i)
    if len(peaks) < 2:
        pos = centers[peaks[0]] if peaks else 0.0
        return ModesSummary(False, (pos,), 0.0, (counts[peaks[0]] if peaks else 0,), 0)
    ranked = sorted(peaks, key=lambda i: smoothed[i], reverse=True)
    # take the strongest peak and the strongest one separated from it that
    # carries non-negligible mass
    first = ranked[0]
    second = None
    for cand in ranked[1:]:
        if abs(cand - first) >= 2 and smoothed[cand] >= 0.05 * smoothed[first]:
            second = cand
            break
    if second is None:
        pos = centers[first]
        return ModesSummary(False, (pos,), 0.0, (counts[first],), 0)
    lo, hi = sorted((first, second))
    valley = lo + int(np.argmin(smoothed[lo:hi + 1]))
    return ModesSummary(
        bimodal=True,
        positions=(float(centers[lo]), float(centers[hi])),
        separation=float(centers[hi] - centers[lo]),
        peak_counts=(float(counts[lo]), float(counts[hi])),
        valley_count=float(counts[valley]),
    )
