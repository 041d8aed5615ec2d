"""Two-site superoperator construction for the vectorized-operator engine.

A local density operator is stored as a 4-vector in column-stacked order,
p = i + 2k for the element <i|rho|k>. Composite two-site indices are
site-major, P = 4 p_a + p_b. The builders below assemble the generator of one
Trotter bond, hopping plus the absorbed shares of the single-site drive,
detuning and loss terms.
"""

from __future__ import annotations

import numpy as np

from ..model import (
    IDENTITY,
    NUMBER,
    SIGMA_MINUS,
    SIGMA_PLUS,
    LatticeSpec,
    ModelParams,
    lmul,
    rmul,
    sandwich,
    vec,
)

__all__ = [
    "VEC_ID",
    "op_functional",
    "single_site_hamiltonian",
    "single_site_superop",
    "two_site_hamiltonian_superop",
    "bond_generator",
    "absorption_weights",
]

VEC_ID = vec(np.eye(2))

# permutation from the column-stacked composite index (of the 4x4 two-site
# operator, site a = most significant Hilbert factor) to the site-major pair
# index P = 4 p_a + p_b
_PAIR_PERM = np.empty(16, dtype=int)
for _ia in range(2):
    for _ib in range(2):
        for _ka in range(2):
            for _kb in range(2):
                _colstack = (2 * _ia + _ib) + 4 * (2 * _ka + _kb)
                _sitemajor = 4 * (_ia + 2 * _ka) + (_ib + 2 * _kb)
                _PAIR_PERM[_sitemajor] = _colstack


def op_functional(op: np.ndarray) -> np.ndarray:
    """Site vector w with w . vec(rho) = Tr(op rho)."""
    return vec(np.asarray(op).T)


def single_site_hamiltonian(params: ModelParams) -> np.ndarray:
    return (params.Delta * NUMBER.matrix
            + params.Omega * (SIGMA_PLUS.matrix + SIGMA_MINUS.matrix))


def single_site_superop(params: ModelParams) -> np.ndarray:
    """Full local generator (drive, detuning, loss) on one vectorized site."""
    h = single_site_hamiltonian(params)
    g = params.gamma
    return (-1j * (lmul(h) - rmul(h))
            + g * (sandwich(SIGMA_MINUS.matrix)
                   - 0.5 * lmul(NUMBER.matrix) - 0.5 * rmul(NUMBER.matrix)))


def two_site_hamiltonian_superop(h2: np.ndarray) -> np.ndarray:
    """-i [h2, .] as a 16x16 matrix on the site-major pair index."""
    s = -1j * (lmul(h2) - rmul(h2))
    return s[np.ix_(_PAIR_PERM, _PAIR_PERM)]


def absorption_weights(spec: LatticeSpec) -> dict:
    """Share of each site's single-site generator carried by each 1D bond.

    Bulk sites split half/half between their two bonds; the chain ends put
    their full share on their only bond, so the bond generators sum exactly
    to the full Liouvillian.
    """
    n = spec.n_sites
    if spec.dimension != 1:
        raise ValueError("matrix-product evolution requires a 1D lattice")
    if n < 2:
        raise ValueError("need at least two sites to build bond generators")
    weights = {}
    for bond in range(n - 1):
        w_left = 1.0 if bond == 0 else 0.5
        w_right = 1.0 if bond == n - 2 else 0.5
        weights[bond] = (w_left, w_right)
    return weights


def bond_generator(params: ModelParams, w_left: float, w_right: float) -> np.ndarray:
    """Generator of one Trotter bond on the site-major pair index."""
    sp, sm = SIGMA_PLUS.matrix, SIGMA_MINUS.matrix
    eye = IDENTITY.matrix
    h1 = single_site_hamiltonian(params)
    h2 = (-params.J * (np.kron(sp, sm) + np.kron(sm, sp))
          + w_left * np.kron(h1, eye) + w_right * np.kron(eye, h1))
    gen = two_site_hamiltonian_superop(h2)
    g = params.gamma
    diss = g * (sandwich(sm) - 0.5 * lmul(NUMBER.matrix) - 0.5 * rmul(NUMBER.matrix))
    eye4 = np.eye(4)
    gen = gen + w_left * np.kron(diss, eye4) + w_right * np.kron(eye4, diss)
    return gen
