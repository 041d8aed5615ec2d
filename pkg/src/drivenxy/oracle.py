"""Dense brute-force Liouvillian for small lattices.

Exact reference against which every approximate solver in the package is
checked. Capacity-limited to n_sites <= 5 (the superoperator is 4^N x 4^N).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .model import (
    NUMBER,
    SIGMA_MINUS,
    SIGMA_PLUS,
    LatticeSpec,
    ModelParams,
    lmul,
    rmul,
    sandwich,
    unvec,
    vec,
)

MAX_ORACLE_SITES = 5

__all__ = [
    "CapacityError",
    "SteadyStateError",
    "SteadyStateResult",
    "site_operator",
    "hamiltonian",
    "liouvillian",
    "steady_state",
    "evolve",
    "expect",
]


class CapacityError(ValueError):
    """System too large for the dense oracle."""


class SteadyStateError(RuntimeError):
    """Null-space extraction failed."""


def site_operator(n_sites: int, site: int, op: np.ndarray) -> np.ndarray:
    """Embed a 2x2 operator at ``site`` of an ``n_sites`` chain (site 0 leftmost)."""
    left = np.eye(2**site)
    right = np.eye(2 ** (n_sites - site - 1))
    return np.kron(np.kron(left, np.asarray(op)), right)


def hamiltonian(spec: LatticeSpec, params: ModelParams) -> np.ndarray:
    """Dense XY Hamiltonian with uniform drive and detuning."""
    n = spec.n_sites
    dim = 2**n
    h = np.zeros((dim, dim), dtype=complex)
    for j in range(n):
        h += params.Delta * site_operator(n, j, NUMBER.matrix)
        h += params.Omega * site_operator(n, j, SIGMA_PLUS.matrix + SIGMA_MINUS.matrix)
    for i, j in spec.edges():
        sp_i = site_operator(n, i, SIGMA_PLUS.matrix)
        sm_j = site_operator(n, j, SIGMA_MINUS.matrix)
        hop = sp_i @ sm_j
        h += -params.J * (hop + hop.conj().T)
    return h


def liouvillian(spec: LatticeSpec, params: ModelParams) -> np.ndarray:
    """Dense superoperator L with vec(drho/dt) = L vec(rho), column-stacked."""
    n = spec.n_sites
    if n > MAX_ORACLE_SITES:
        raise CapacityError(
            f"dense oracle supports at most {MAX_ORACLE_SITES} sites, got {n}"
        )
    h = hamiltonian(spec, params)
    lv = -1j * (lmul(h) - rmul(h))
    g = params.gamma
    for j in range(n):
        sm = site_operator(n, j, SIGMA_MINUS.matrix)
        num = site_operator(n, j, NUMBER.matrix)
        lv += g * (sandwich(sm) - 0.5 * lmul(num) - 0.5 * rmul(num))
    return lv


@dataclass
class SteadyStateResult:
    rho: np.ndarray
    residual: float
    null_dim: int
    degenerate: bool
    basis: list

    @property
    def densities(self) -> np.ndarray:
        n = int(round(np.log2(self.rho.shape[0])))
        return np.array(
            [expect(self.rho, site_operator(n, j, NUMBER.matrix)) for j in range(n)]
        ).real


def steady_state(lv: np.ndarray, null_tol: float = 1e-10) -> SteadyStateResult:
    """Trace-1 Hermitian element of the null space of a Lindblad superoperator.

    Extracted from the smallest singular vector(s); singular values below
    ``null_tol`` (relative to the largest) count towards the null space.
    """
    _, s, vh = scipy.linalg.svd(lv)
    rel = s / s[0]
    null_dim = int(np.sum(rel < null_tol))
    if null_dim == 0:
        # fall back to the single smallest singular vector, but insist it is small
        if rel[-1] > 1e-6:
            raise SteadyStateError(
                f"no null vector: smallest relative singular value {rel[-1]:.3e}"
            )
        null_dim = 1
    basis = []
    for k in range(null_dim):
        rho = unvec(vh[-(k + 1)].conj())
        rho = 0.5 * (rho + rho.conj().T)
        tr = np.trace(rho)
        if abs(tr) > 1e-12:
            rho = rho / tr
        basis.append(rho)
    rho = basis[0]
    if abs(np.trace(rho)) < 1e-12:
        raise SteadyStateError("null vector has vanishing trace")
    residual = float(np.linalg.norm(lv @ vec(rho)))
    return SteadyStateResult(
        rho=rho,
        residual=residual,
        null_dim=null_dim,
        degenerate=null_dim > 1,
        basis=basis,
    )


def evolve(lv: np.ndarray, rho0: np.ndarray, t: float) -> np.ndarray:
    """Propagate a density matrix for time ``t`` under the dense Liouvillian."""
    v = scipy.sparse.linalg.expm_multiply(lv * t, vec(rho0))
    return unvec(v)


def expect(rho: np.ndarray, op: np.ndarray) -> complex:
    return np.trace(op @ rho) / np.trace(rho)
