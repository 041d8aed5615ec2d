"""Matrix-product container with an orthogonality center.

Shared by the vectorized density-operator engine (physical dimension 4) and
the pure-state trajectory engine (physical dimension 2). Tensors are stored as
(left bond, physical, right bond); everything strictly left of the center is a
left isometry, everything right of it a right isometry, so singular values at
the center bond are Schmidt coefficients of the global object under the
2-norm (Hilbert-Schmidt norm for vectorized operators).
"""

from __future__ import annotations

import json

import numpy as np
import scipy.linalg

__all__ = ["MPS", "truncated_svd"]

CHECKPOINT_FORMAT = "drivenxy-mps-1"


def truncated_svd(mat: np.ndarray, chi_max: int, sv_cutoff: float):
    """SVD with relative singular-value cutoff and bond cap.

    Returns (U, S, Vh, discarded) with discarded = sum of dropped S^2 over
    sum of all S^2. Falls back to the slower gesvd driver if gesdd fails.
    """
    try:
        u, s, vh = np.linalg.svd(mat, full_matrices=False)
    except np.linalg.LinAlgError:
        u, s, vh = scipy.linalg.svd(mat, full_matrices=False,
                                    lapack_driver="gesvd")
    if s[0] == 0.0:
        return u[:, :1], s[:1], vh[:1], 0.0
    keep = int(np.sum(s > sv_cutoff * s[0]))
    keep = max(1, min(keep, chi_max))
    total = float(np.sum(s**2))
    discarded = float(np.sum(s[keep:] ** 2) / total)
    return u[:, :keep], s[:keep], vh[:keep], discarded


class MPS:
    """Finite matrix-product object in mixed-canonical form."""

    def __init__(self, tensors, center: int = 0):
        self.tensors = [np.asarray(t, dtype=complex) for t in tensors]
        self.center = center

    @classmethod
    def from_product(cls, vectors) -> "MPS":
        tensors = [np.asarray(v, dtype=complex).reshape(1, -1, 1) for v in vectors]
        return cls(tensors, center=0)

    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    @property
    def phys_dim(self) -> int:
        return self.tensors[0].shape[1]

    def bond_dims(self) -> list:
        return [t.shape[2] for t in self.tensors[:-1]]

    @property
    def max_bond(self) -> int:
        return max(self.bond_dims(), default=1)

    def copy(self) -> "MPS":
        return MPS([t.copy() for t in self.tensors], self.center)

    # -- canonical form ----------------------------------------------------

    def _shift_right(self):
        c = self.center
        dl, d, dr = self.tensors[c].shape
        q, r = np.linalg.qr(self.tensors[c].reshape(dl * d, dr))
        self.tensors[c] = q.reshape(dl, d, -1)
        self.tensors[c + 1] = np.tensordot(r, self.tensors[c + 1], axes=(1, 0))
        self.center = c + 1

    def _shift_left(self):
        c = self.center
        dl, d, dr = self.tensors[c].shape
        q, r = np.linalg.qr(self.tensors[c].reshape(dl, d * dr).T)
        self.tensors[c] = q.T.reshape(-1, d, dr)
        self.tensors[c - 1] = np.tensordot(self.tensors[c - 1], r.T, axes=(2, 0))
        self.center = c - 1

    def move_center(self, target: int):
        if not 0 <= target < self.n_sites:
            raise IndexError(f"center target {target} out of range")
        while self.center < target:
            self._shift_right()
        while self.center > target:
            self._shift_left()

    def canonicalize(self, target: int = 0):
        """Restore mixed-canonical form from arbitrary tensors."""
        self.center = self.n_sites - 1
        self.move_center(0)
        self.move_center(target)

    def norm(self) -> float:
        """2-norm of the represented object (center tensor Frobenius norm)."""
        return float(np.linalg.norm(self.tensors[self.center]))

    def scale(self, factor: complex):
        self.tensors[self.center] = self.tensors[self.center] * factor

    # -- gates -------------------------------------------------------------

    def apply_one_site(self, site: int, op: np.ndarray):
        self.tensors[site] = np.tensordot(op, self.tensors[site],
                                          axes=(1, 1)).transpose(1, 0, 2)

    def apply_two_site(self, bond: int, gate: np.ndarray, chi_max: int,
                       sv_cutoff: float, to: str = "right") -> float:
        """Apply a (d,d,d,d) gate [out_a, out_b, in_a, in_b] at (bond, bond+1).

        The orthogonality center must end up inside the pair before the SVD,
        which keeps the truncation optimal; it lands on ``bond+1`` for
        to='right' and on ``bond`` for to='left'. Returns the discarded weight.
        """
        if self.center < bond:
            self.move_center(bond)
        elif self.center > bond + 1:
            self.move_center(bond + 1)
        a, b = self.tensors[bond], self.tensors[bond + 1]
        dl, d = a.shape[0], a.shape[1]
        dr = b.shape[2]
        theta = np.tensordot(a, b, axes=(2, 0))  # (dl, d, d, dr)
        theta = np.tensordot(gate, theta, axes=([2, 3], [1, 2]))  # (d, d, dl, dr)
        theta = theta.transpose(2, 0, 1, 3).reshape(dl * d, d * dr)
        u, s, vh, discarded = truncated_svd(theta, chi_max, sv_cutoff)
        keep = s.size
        if to == "right":
            self.tensors[bond] = u.reshape(dl, d, keep)
            self.tensors[bond + 1] = (s[:, None] * vh).reshape(keep, d, dr)
            self.center = bond + 1
        else:
            self.tensors[bond] = (u * s).reshape(dl, d, keep)
            self.tensors[bond + 1] = vh.reshape(keep, d, dr)
            self.center = bond
        return discarded

    # -- spectra -----------------------------------------------------------

    def schmidt_values(self, bond: int) -> np.ndarray:
        """Singular values across the cut between sites bond and bond+1."""
        self.move_center(bond)
        t = self.tensors[bond]
        dl, d, dr = t.shape
        s = np.linalg.svd(t.reshape(dl * d, dr), compute_uv=False)
        return s[s > 0]

    # -- linear functionals (vectorized-operator use) ----------------------

    def _site_rows(self, vectors) -> list:
        return [np.tensordot(v, t, axes=(0, 1))
                for v, t in zip(vectors, self.tensors)]

    def contract_vectors(self, vectors) -> complex:
        """Contract one (d,) vector per site against the network."""
        acc = np.ones(1, dtype=complex)
        for row in self._site_rows(vectors):
            acc = acc @ row
        return complex(acc[0])

    def local_functionals(self, default_vec: np.ndarray,
                          op_vec: np.ndarray) -> np.ndarray:
        """<op at site j, default everywhere else> for every j, in O(N chi^2)."""
        n = self.n_sites
        rows = [np.tensordot(default_vec, t, axes=(0, 1)) for t in self.tensors]
        prefix = [np.ones(1, dtype=complex)]
        for row in rows[:-1]:
            prefix.append(prefix[-1] @ row)
        suffix = [np.ones(1, dtype=complex)]
        for row in rows[:0:-1]:
            suffix.append(row @ suffix[-1])
        suffix.reverse()
        out = np.empty(n, dtype=complex)
        for j in range(n):
            op_row = np.tensordot(op_vec, self.tensors[j], axes=(0, 1))
            out[j] = (prefix[j] @ op_row) @ suffix[j]
        return out

    def pair_functional(self, default_vec: np.ndarray, site_a: int,
                        vec_a: np.ndarray, site_b: int,
                        vec_b: np.ndarray) -> complex:
        if site_a > site_b:
            site_a, site_b, vec_a, vec_b = site_b, site_a, vec_b, vec_a
        if site_a == site_b:
            raise ValueError("sites must differ")
        acc = np.ones(1, dtype=complex)
        for j, t in enumerate(self.tensors):
            if j == site_a:
                v = vec_a
            elif j == site_b:
                v = vec_b
            else:
                v = default_vec
            acc = acc @ np.tensordot(v, t, axes=(0, 1))
        return complex(acc[0])

    # -- quadratic expectations (pure-state use) ----------------------------

    def expect_local(self, site: int, op: np.ndarray) -> complex:
        self.move_center(site)
        t = self.tensors[site]
        ot = np.tensordot(op, t, axes=(1, 1)).transpose(1, 0, 2)
        return complex(np.sum(t.conj() * ot))

    def expect_all_local(self, op: np.ndarray) -> np.ndarray:
        """<op>_j for every site of a normalized pure state, one sweep."""
        out = np.empty(self.n_sites, dtype=complex)
        self.move_center(0)
        for j in range(self.n_sites):
            if j > 0:
                self._shift_right()
            t = self.tensors[j]
            ot = np.tensordot(op, t, axes=(1, 1)).transpose(1, 0, 2)
            out[j] = np.sum(t.conj() * ot)
        return out

    # -- checkpointing ------------------------------------------------------

    def save(self, path):
        meta = {
            "format": CHECKPOINT_FORMAT,
            "n_sites": self.n_sites,
            "phys_dim": self.phys_dim,
            "center": self.center,
            "bond_dims": self.bond_dims(),
        }
        arrays = {f"tensor_{j}": t for j, t in enumerate(self.tensors)}
        np.savez_compressed(path, meta=json.dumps(meta), **arrays)

    @classmethod
    def load(cls, path) -> "MPS":
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(str(data["meta"]))
            if meta.get("format") != CHECKPOINT_FORMAT:
                raise ValueError(f"unknown checkpoint format {meta.get('format')!r}")
            tensors = [data[f"tensor_{j}"] for j in range(meta["n_sites"])]
            return cls(tensors, center=meta["center"])
