"""Model definition: rates, lattice geometry and local spin-1/2 operators.

Conventions used throughout the package:

* local basis order is (|0>, |1>), i.e. index 0 = empty/down, 1 = excited/up;
* all rates are expressed in units of the loss rate ``gamma`` (which is kept
  as an explicit field so dimensional quantities can be restored);
* ``vec`` stacks matrix columns (Fortran order), so vec(A X B) = (B^T kron A) vec(X);
* in multi-site tensor products site 0 is the leftmost (most significant)
  factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ModelParams",
    "LatticeSpec",
    "LocalOperator",
    "SIGMA_MINUS",
    "SIGMA_PLUS",
    "SIGMA_Z",
    "NUMBER",
    "IDENTITY",
    "OPERATORS",
    "vec",
    "unvec",
    "lmul",
    "rmul",
    "sandwich",
    "COMPONENT_PERM",
    "to_components",
    "from_components",
    "single_site_steady_density",
]


@dataclass(frozen=True)
class ModelParams:
    """Physical rates of the driven-dissipative XY lattice, in units of gamma."""

    J: float
    Omega: float
    Delta: float
    gamma: float = 1.0

    def __post_init__(self):
        for name in ("J", "Omega", "Delta", "gamma"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
        if self.gamma <= 0:
            raise ValueError(f"gamma must be positive, got {self.gamma!r}")

    def with_delta(self, delta: float) -> "ModelParams":
        return ModelParams(self.J, self.Omega, delta, self.gamma)


@dataclass(frozen=True)
class LatticeSpec:
    """Open-boundary chain (1D) or rectangular lattice (2D).

    Sites are indexed 0..n_sites-1; in 2D the flat index is row-major,
    ``site = row * extents[1] + col``.
    """

    dimension: int
    extents: tuple

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.dimension}")
        ext = tuple(int(e) for e in self.extents)
        object.__setattr__(self, "extents", ext)
        if len(ext) != self.dimension:
            raise ValueError("extents must have one entry per dimension")
        if any(e < 1 for e in ext):
            raise ValueError("all extents must be >= 1")

    @classmethod
    def chain(cls, n: int) -> "LatticeSpec":
        return cls(1, (n,))

    @classmethod
    def rectangle(cls, nx: int, ny: int) -> "LatticeSpec":
        return cls(2, (nx, ny))

    @property
    def n_sites(self) -> int:
        n = 1
        for e in self.extents:
            n *= e
        return n

    def coords(self, site: int):
        self._check_site(site)
        if self.dimension == 1:
            return (site,)
        return divmod(site, self.extents[1])

    def site_index(self, coords) -> int:
        if self.dimension == 1:
            (x,) = coords
            return x
        row, col = coords
        return row * self.extents[1] + col

    def _check_site(self, site: int):
        if not 0 <= site < self.n_sites:
            raise IndexError(f"site {site} outside lattice of {self.n_sites} sites")

    def neighbors(self, site: int) -> list:
        """Nearest neighbors of ``site`` under open boundaries."""
        self._check_site(site)
        if self.dimension == 1:
            n = self.extents[0]
            return [j for j in (site - 1, site + 1) if 0 <= j < n]
        nx, ny = self.extents
        row, col = divmod(site, ny)
        out = []
        for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            r, c = row + dr, col + dc
            if 0 <= r < nx and 0 <= c < ny:
                out.append(r * ny + c)
        return out

    def edges(self) -> list:
        """All nearest-neighbor pairs (i, j) with i < j, each pair once."""
        out = []
        for i in range(self.n_sites):
            for j in self.neighbors(i):
                if j > i:
                    out.append((i, j))
        return out

    def adjacency(self) -> np.ndarray:
        """Dense symmetric 0/1 neighbor matrix."""
        a = np.zeros((self.n_sites, self.n_sites))
        for i, j in self.edges():
            a[i, j] = a[j, i] = 1.0
        return a

    @property
    def center_site(self) -> int:
        """Flat index of the central site, ceil(n/2) in 1-based counting per axis."""
        if self.dimension == 1:
            return (self.extents[0] + 1) // 2 - 1
        nx, ny = self.extents
        return ((nx + 1) // 2 - 1) * ny + ((ny + 1) // 2 - 1)


@dataclass(frozen=True)
class LocalOperator:
    """A tagged single-site 2x2 operator."""

    name: str
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)


SIGMA_MINUS = LocalOperator("sigma_minus", [[0.0, 1.0], [0.0, 0.0]])
SIGMA_PLUS = LocalOperator("sigma_plus", [[0.0, 0.0], [1.0, 0.0]])
NUMBER = LocalOperator("number", [[0.0, 0.0], [0.0, 1.0]])
SIGMA_Z = LocalOperator("sigma_z", [[-1.0, 0.0], [0.0, 1.0]])
IDENTITY = LocalOperator("identity", [[1.0, 0.0], [0.0, 1.0]])

OPERATORS = {op.name: op for op in (SIGMA_MINUS, SIGMA_PLUS, NUMBER, SIGMA_Z, IDENTITY)}


def vec(mat: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization."""
    return np.asarray(mat).flatten(order="F")


def unvec(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v)
    d = int(round(math.isqrt(v.size)))
    if d * d != v.size:
        raise ValueError(f"cannot unvec a vector of length {v.size}")
    return v.reshape((d, d), order="F")


def lmul(a: np.ndarray) -> np.ndarray:
    """Superoperator of left multiplication: vec(A X) = lmul(A) vec(X)."""
    a = np.asarray(a)
    return np.kron(np.eye(a.shape[0]), a)


def rmul(b: np.ndarray) -> np.ndarray:
    """Superoperator of right multiplication: vec(X B) = rmul(B) vec(X)."""
    b = np.asarray(b)
    return np.kron(b.T, np.eye(b.shape[0]))


def sandwich(l: np.ndarray) -> np.ndarray:
    """Superoperator of vec(L X L^dag)."""
    l = np.asarray(l)
    return np.kron(l.conj(), l)


# Permutation between the column-stacked local vector (rho00, rho10, rho01, rho11)
# and the component ordering (rho00, rho01, rho11, rho10) used by the mean-field
# propagator: components[i] = colstack[COMPONENT_PERM[i]].
COMPONENT_PERM = np.array([0, 2, 3, 1])


def to_components(rho: np.ndarray) -> np.ndarray:
    """2x2 density matrix -> (rho00, rho01, rho11, rho10)."""
    return vec(rho)[COMPONENT_PERM]


def from_components(v: np.ndarray) -> np.ndarray:
    """(rho00, rho01, rho11, rho10) -> 2x2 density matrix."""
    out = np.empty(4, dtype=complex)
    out[COMPONENT_PERM] = v
    return unvec(out)


def single_site_steady_density(omega, delta, gamma=1.0):
    """Excited-state population of the steady state of a single driven lossy TLS.

    Closed form for the optical Bloch equations with drive amplitude ``omega``
    (H = delta*n + omega*sigma+ + conj(omega)*sigma-) and loss rate ``gamma``.
    """
    w2 = np.abs(omega) ** 2
    return w2 / (delta**2 + gamma**2 / 4.0 + 2.0 * w2)
