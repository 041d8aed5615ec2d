"""Quantum-jump trajectories with matrix-product pure states.

Each trajectory evolves under the full chain Hamiltonian plus the
non-Hermitian loss drift, applied as TEBD bond gates at bond dimension
chi_tilde, with per-site jump decisions drawn from the exact local densities
of the current MPS.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ..model import (
    IDENTITY,
    NUMBER,
    SIGMA_MINUS,
    SIGMA_PLUS,
    LatticeSpec,
    ModelParams,
)
from ..trajectories import MAX_JUMP_STEP
from .core import MPS
from .superops import absorption_weights

__all__ = [
    "HamiltonianSchedule",
    "TrajectoryResult",
    "MpsEnsemble",
    "build_hamiltonian_schedule",
    "run_mps_trajectory",
    "mps_trajectory_run",
]


class HamiltonianSchedule:
    """Non-Hermitian bond gates exp(-i h_eff dt) for the pure-state engine."""

    def __init__(self, params: ModelParams, spec: LatticeSpec, dt: float):
        self.params = params
        self.spec = spec
        self.dt = dt
        sp, sm = SIGMA_PLUS.matrix, SIGMA_MINUS.matrix
        eye = IDENTITY.matrix
        h1 = (params.Delta * NUMBER.matrix + params.Omega * (sp + sm)
              - 0.5j * params.gamma * NUMBER.matrix)
        self.generators = {}
        for bond, (w_left, w_right) in absorption_weights(spec).items():
            h2 = (-params.J * (np.kron(sp, sm) + np.kron(sm, sp))
                  + w_left * np.kron(h1, eye) + w_right * np.kron(eye, h1))
            self.generators[bond] = -1j * h2
        self.odd_bonds = sorted(b for b in self.generators if b % 2 == 1)
        self.even_bonds = sorted(b for b in self.generators if b % 2 == 0)
        self._gates = {}

    def gate(self, bond: int, fraction: float) -> np.ndarray:
        key = (bond, fraction)
        if key not in self._gates:
            g = scipy.linalg.expm(self.generators[bond] * (self.dt * fraction))
            self._gates[key] = np.ascontiguousarray(g.reshape(2, 2, 2, 2))
        return self._gates[key]


def build_hamiltonian_schedule(params: ModelParams, spec: LatticeSpec,
                               dt: float) -> HamiltonianSchedule:
    return HamiltonianSchedule(params, spec, dt)


def _random_product_mps(n_sites: int, rng: np.random.Generator) -> MPS:
    psi = rng.normal(size=(n_sites, 2)) + 1j * rng.normal(size=(n_sites, 2))
    psi /= np.linalg.norm(psi, axis=1, keepdims=True)
    return MPS.from_product(psi)


def _sweep(mps: MPS, schedule: HamiltonianSchedule, bonds, fraction: float,
           chi_max: int, sv_cutoff: float, reverse: bool):
    seq = reversed(bonds) if reverse else bonds
    for b in seq:
        mps.apply_two_site(b, schedule.gate(b, fraction), chi_max, sv_cutoff,
                           to="left" if reverse else "right")


@dataclass
class TrajectoryResult:
    mean_profile: np.ndarray  # densities time-averaged over the final window
    n_jumps: int
    max_bond: int


def run_mps_trajectory(params: ModelParams, spec: LatticeSpec, chi_tilde: int,
                       T: float, dt: float, master_seed: int, traj_id: int,
                       window: float = 0.8, sv_cutoff: float = 1e-10,
                       initial: str = "random") -> TrajectoryResult:
    """Evolve one jump trajectory; densities are averaged over the final window."""
    if dt * params.gamma >= MAX_JUMP_STEP:
        raise ValueError(
            f"dt*gamma = {dt * params.gamma:.3g} too large for first-order jumps")
    rng = np.random.default_rng([master_seed, traj_id])
    n = spec.n_sites
    if initial == "random":
        mps = _random_product_mps(n, rng)
    elif initial == "down":
        vecs = np.zeros((n, 2)); vecs[:, 0] = 1.0
        mps = MPS.from_product(vecs)
    else:
        raise ValueError(f"unknown initial state {initial!r}")
    schedule = build_hamiltonian_schedule(params, spec, dt)
    n_steps = int(round(T / dt))
    avg_from = int(round((1.0 - window) * n_steps))
    acc = np.zeros(n)
    count = 0
    n_jumps = 0
    max_bond = 1
    sm = SIGMA_MINUS.matrix
    for step in range(n_steps):
        dens = mps.expect_all_local(NUMBER.matrix).real
        uniforms = rng.random(n)
        jumps = np.nonzero(uniforms < params.gamma * dt * dens)[0]
        for site in jumps:
            mps.apply_one_site(int(site), sm)
            mps.move_center(int(site))
            nrm = mps.norm()
            if nrm < 1e-150:
                raise FloatingPointError("jump annihilated the state")
            mps.scale(1.0 / nrm)
        n_jumps += len(jumps)
        _sweep(mps, schedule, schedule.odd_bonds, 0.5, chi_tilde, sv_cutoff, False)
        _sweep(mps, schedule, schedule.even_bonds, 1.0, chi_tilde, sv_cutoff, True)
        _sweep(mps, schedule, schedule.odd_bonds, 0.5, chi_tilde, sv_cutoff, False)
        mps.scale(1.0 / mps.norm())
        max_bond = max(max_bond, mps.max_bond)
        if step >= avg_from:
            acc += mps.expect_all_local(NUMBER.matrix).real
            count += 1
    return TrajectoryResult(acc / max(count, 1), n_jumps, max_bond)


@dataclass
class MpsEnsemble:
    n_traj: int
    window: float
    center_averages: np.ndarray
    mean_profile: np.ndarray
    mean: float
    stderr: float
    max_bond: int


def mps_trajectory_run(params: ModelParams, spec: LatticeSpec, chi_tilde: int,
                       T: float, dt: float, n_traj: int, window: float = 0.8,
                       master_seed: int = 0, initial: str = "random") -> MpsEnsemble:
    """Average local densities over ``n_traj`` independent MPS trajectories."""
    center = spec.center_site
    profiles = np.empty((n_traj, spec.n_sites))
    max_bond = 1
    for r in range(n_traj):
        res = run_mps_trajectory(params, spec, chi_tilde, T, dt, master_seed, r,
                                 window=window, initial=initial)
        profiles[r] = res.mean_profile
        max_bond = max(max_bond, res.max_bond)
    center_avgs = profiles[:, center]
    mean = float(np.mean(center_avgs))
    stderr = (float(np.std(center_avgs, ddof=1) / np.sqrt(n_traj))
              if n_traj > 1 else 0.0)
    return MpsEnsemble(n_traj, window, center_avgs, profiles.mean(axis=0),
                       mean, stderr, max_bond)
