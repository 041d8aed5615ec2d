"""Circuit-QED realization check for the driven XY chain.

Builds the rotating-frame Hamiltonian of a 3-transmon / 4-cavity ladder, the
corresponding second-order dispersive Hamiltonian, and the exact 3-site XY
comparator, and quantifies how well the dispersive mapping reproduces the XY
dynamics from a vacuum start. The cavity-mode sign choice selects the
ferromagnetic (-) or antiferromagnetic (+) qubit-qubit coupling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import NUMBER, SIGMA_MINUS, SIGMA_PLUS, ModelParams

__all__ = [
    "CircuitSpec",
    "DerivedCouplings",
    "Finding",
    "build_full_hamiltonian",
    "build_effective_hamiltonian",
    "build_xy_hamiltonian",
    "derived_couplings",
    "evolve_closed",
    "qubit_populations",
    "vacuum_down_state",
    "compare_to_xy",
    "dispersive_checks",
    "required_detuning",
    "feasibility_report",
]

MAX_DIMENSION = 100_000


@dataclass(frozen=True)
class CircuitSpec:
    """3 driven transmons, 4 readout-free coupling cavities, alternating design.

    Cavity frequencies and couplings repeat with period two
    (omega_1 = omega_3, omega_2 = omega_4, same for g), so the ladder extends
    periodically. ``mode_sign`` is -1 when qubits sit at the first-mode antinode
    (ferromagnetic XY) and +1 for the second mode (antiferromagnetic).
    """

    qubit_freq: float
    cavity_freqs: tuple  # length 4, with freq[0] == freq[2], freq[1] == freq[3]
    couplings: tuple     # length 4, with g[0] == g[2], g[1] == g[3]
    drive_amp: float
    drive_freq: float
    mode_sign: int = -1
    n_max: int = 2
    n_qubits: int = 3
    n_cavities: int = 4

    def __post_init__(self):
        object.__setattr__(self, "cavity_freqs", tuple(float(w) for w in self.cavity_freqs))
        object.__setattr__(self, "couplings", tuple(float(g) for g in self.couplings))
        if self.n_qubits != 3 or self.n_cavities != 4:
            raise NotImplementedError("only the 3-qubit / 4-cavity ladder is supported")
        if len(self.cavity_freqs) != 4 or len(self.couplings) != 4:
            raise ValueError("need 4 cavity frequencies and 4 couplings")
        for arr, name in ((self.cavity_freqs, "cavity_freqs"), (self.couplings, "couplings")):
            if not (np.isclose(arr[0], arr[2]) and np.isclose(arr[1], arr[3])):
                raise ValueError(f"{name} must repeat with period two")
        if self.mode_sign not in (-1, 1):
            raise ValueError("mode_sign must be -1 or +1")
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")

    @classmethod
    def from_detunings(cls, delta_1: float, delta_2: float, g_1: float,
                       delta_c: float, drive_amp: float, mode_sign: int = -1,
                       n_max: int = 2, g_2: float = None) -> "CircuitSpec":
        """Build a spec directly from the rotating-frame detunings.

        The drive frequency is taken as the zero of energy; g_2 defaults to the
        balanced choice g_2^2 = g_1^2 * (delta_2 / delta_1) which equalizes the
        two effective bond couplings.
        """
        if g_2 is None:
            g_2 = g_1 * np.sqrt(delta_2 / delta_1)
        return cls(
            qubit_freq=delta_c,
            cavity_freqs=(-delta_1, -delta_2, -delta_1, -delta_2),
            couplings=(g_1, g_2, g_1, g_2),
            drive_amp=drive_amp,
            drive_freq=0.0,
            mode_sign=mode_sign,
            n_max=n_max,
        )

    @property
    def delta_c(self) -> float:
        return self.qubit_freq - self.drive_freq

    @property
    def cavity_detunings(self) -> tuple:
        return tuple(self.drive_freq - w for w in self.cavity_freqs)

    @property
    def dims(self) -> tuple:
        return (2,) * self.n_qubits + (self.n_max + 1,) * self.n_cavities

    @property
    def dimension(self) -> int:
        return int(np.prod(self.dims))

    def scaled(self, s: float) -> "CircuitSpec":
        """Deeper-dispersive variant: detunings scaled by s, couplings by sqrt(s).

        Leaves every second-order rate g^2/Delta, and hence the simulated XY
        model, unchanged.
        """
        d1, d2 = self.cavity_detunings[0], self.cavity_detunings[1]
        g1, g2 = self.couplings[0], self.couplings[1]
        return CircuitSpec.from_detunings(
            s * d1, s * d2, np.sqrt(s) * g1, self.delta_c, self.drive_amp,
            mode_sign=self.mode_sign, n_max=self.n_max, g_2=np.sqrt(s) * g2)


def _embed(spec: CircuitSpec, factor_index: int, op: np.ndarray) -> np.ndarray:
    dims = spec.dims
    left = int(np.prod(dims[:factor_index], dtype=np.int64)) if factor_index else 1
    right = int(np.prod(dims[factor_index + 1:], dtype=np.int64)) if factor_index + 1 < len(dims) else 1
    return np.kron(np.kron(np.eye(left), op), np.eye(right))


def _check_dimension(spec: CircuitSpec):
    if spec.dimension > MAX_DIMENSION:
        raise ValueError(
            f"Hilbert dimension {spec.dimension} exceeds the dense cap {MAX_DIMENSION}")


def _qubit_ops(spec: CircuitSpec):
    sp = [_embed(spec, q, SIGMA_PLUS.matrix) for q in range(spec.n_qubits)]
    sm = [_embed(spec, q, SIGMA_MINUS.matrix) for q in range(spec.n_qubits)]
    num = [_embed(spec, q, NUMBER.matrix) for q in range(spec.n_qubits)]
    return sp, sm, num


def _cavity_ops(spec: CircuitSpec):
    nc = spec.n_max + 1
    a_local = np.diag(np.sqrt(np.arange(1, nc)), k=1)
    a = [_embed(spec, spec.n_qubits + c, a_local) for c in range(spec.n_cavities)]
    return a


def build_full_hamiltonian(spec: CircuitSpec) -> np.ndarray:
    """Rotating-frame qubit-cavity Hamiltonian on the truncated Fock spaces.

    Qubit j couples to cavity j with strength mode_sign * g_j and to cavity
    j+1 with +g_{j+1}.
    """
    _check_dimension(spec)
    sp, sm, num = _qubit_ops(spec)
    a = _cavity_ops(spec)
    deltas = spec.cavity_detunings
    g = spec.couplings
    h = np.zeros((spec.dimension, spec.dimension), dtype=complex)
    for q in range(spec.n_qubits):
        h += spec.delta_c * num[q]
        h += spec.drive_amp * (sp[q] + sm[q])
    for c in range(spec.n_cavities):
        h -= deltas[c] * (a[c].conj().T @ a[c])
    for q in range(spec.n_qubits):
        own, right = q, q + 1  # cavity indices flanking qubit q
        h += spec.mode_sign * g[own] * (sp[q] @ a[own] + sm[q] @ a[own].conj().T)
        h += g[right] * (sp[q] @ a[right] + sm[q] @ a[right].conj().T)
    return h


def build_effective_hamiltonian(spec: CircuitSpec,
                                include_cavity_hopping: bool = False,
                                t: float = 0.0) -> np.ndarray:
    """Second-order dispersive Hamiltonian of the 3-qubit / 4-cavity ladder.

    The rotating cavity-hopping terms oscillate at Delta_1 - Delta_2 and are
    dropped by default; with ``include_cavity_hopping`` they are evaluated at
    time ``t``. From a photon-vacuum start they act trivially either way, as
    every retained term conserves the total photon number.
    """
    _check_dimension(spec)
    sp, sm, num = _qubit_ops(spec)
    a = _cavity_ops(spec)
    d1, d2 = spec.cavity_detunings[0], spec.cavity_detunings[1]
    g1, g2 = spec.couplings[0], spec.couplings[1]
    nphot = [ai.conj().T @ ai for ai in a]
    h = np.zeros((spec.dimension, spec.dimension), dtype=complex)
    stark = spec.delta_c + g1**2 / d1 + g2**2 / d2
    for q in range(spec.n_qubits):
        h += stark * num[q]
        h += spec.drive_amp * (sp[q] + sm[q])
    h += (2 * g1**2 * num[0] - (g1**2 + d1**2) * np.eye(spec.dimension)) @ nphot[0] / d1
    h += (2 * g2**2 * (num[0] + num[1]) - (2 * g2**2 + d2**2) * np.eye(spec.dimension)) @ nphot[1] / d2
    h += (2 * g1**2 * (num[1] + num[2]) - (2 * g1**2 + d1**2) * np.eye(spec.dimension)) @ nphot[2] / d1
    h += (2 * g2**2 * num[2] - (g2**2 + d2**2) * np.eye(spec.dimension)) @ nphot[3] / d2
    h += spec.mode_sign * (g1**2 / d1) * (sp[0] @ sm[1] + sm[0] @ sp[1])
    h += spec.mode_sign * (g2**2 / d2) * (sp[1] @ sm[2] + sm[1] @ sp[2])
    if include_cavity_hopping:
        j12 = 0.5 * g1 * g2 * (1.0 / d1 + 1.0 / d2)
        phase = np.exp(1j * (d1 - d2) * t)
        h += j12 * (phase * (a[0].conj().T @ a[1]) + np.conj(phase) * (a[1].conj().T @ a[0]))
        h += j12 * (np.conj(phase) * (a[1].conj().T @ a[2]) + phase * (a[2].conj().T @ a[1]))
    return h


def build_xy_hamiltonian(params: ModelParams, couplings: tuple = None) -> np.ndarray:
    """Exact 3-site XY comparator; per-bond couplings override params.J."""
    n = 3
    dim = 2**n
    def emb(site, op):
        return np.kron(np.kron(np.eye(2**site), op), np.eye(2**(n - site - 1)))
    h = np.zeros((dim, dim), dtype=complex)
    for j in range(n):
        h += params.Delta * emb(j, NUMBER.matrix)
        h += params.Omega * emb(j, SIGMA_PLUS.matrix + SIGMA_MINUS.matrix)
    js = couplings if couplings is not None else (params.J, params.J)
    for b, jb in enumerate(js):
        hop = emb(b, SIGMA_PLUS.matrix) @ emb(b + 1, SIGMA_MINUS.matrix)
        h += -jb * (hop + hop.conj().T)
    return h


@dataclass
class DerivedCouplings:
    J_12: float
    J_23: float
    xy_couplings: tuple      # bond couplings of the simulated XY model
    g2_constraint_residual: float
    delta_mapped: float      # simulated XY detuning equivalent to delta_c
    J_eff: float


def derived_couplings(spec: CircuitSpec) -> DerivedCouplings:
    """Second-order rates and the detuning mapping of the dispersive ladder."""
    d1, d2 = spec.cavity_detunings[0], spec.cavity_detunings[1]
    if d1 == 0.0 or d2 == 0.0:
        raise ZeroDivisionError("cavity detunings must be nonzero")
    g1, g2 = spec.couplings[0], spec.couplings[1]
    j12 = 0.5 * g1 * g2 * (1.0 / d1 + 1.0 / d2)
    j23 = 0.5 * g2 * g1 * (1.0 / d1 + 1.0 / d2)
    stark = g1**2 / d1 + g2**2 / d2
    return DerivedCouplings(
        J_12=j12,
        J_23=j23,
        xy_couplings=(-spec.mode_sign * g1**2 / d1, -spec.mode_sign * g2**2 / d2),
        g2_constraint_residual=abs(g2**2 - g1**2 * (d2 / d1)),
        delta_mapped=spec.delta_c + stark,
        J_eff=g1**2 / d1,
    )


def evolve_closed(h: np.ndarray, psi0: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Unitary evolution: (n_times, dim) array of states, via eigendecomposition."""
    psi0 = np.asarray(psi0, dtype=complex)
    if not np.isclose(np.linalg.norm(psi0), 1.0, atol=1e-10):
        raise ValueError("initial state must be normalized")
    return _propagate(h, psi0, times)


def qubit_populations(spec: CircuitSpec, states: np.ndarray) -> np.ndarray:
    """n_j(t) for each qubit from a (n_times, dim) array of state vectors."""
    _, _, num = _qubit_ops(spec)
    out = np.empty((states.shape[0], spec.n_qubits))
    for q, op in enumerate(num):
        out[:, q] = np.einsum("ti,ij,tj->t", states.conj(), op, states).real
    return out


def vacuum_down_state(spec: CircuitSpec) -> np.ndarray:
    psi = np.zeros(spec.dimension, dtype=complex)
    psi[0] = 1.0
    return psi


@dataclass
class XyComparison:
    times: np.ndarray
    populations_full: np.ndarray
    populations_xy: np.ndarray
    deviation: float


def compare_to_xy(spec: CircuitSpec, T: float = None, n_times: int = 400) -> XyComparison:
    """Evolve the full ladder and the mapped XY model from vacuum, all qubits down.

    Reports max_t max_j |n_j^full - n_j^xy|. The XY comparator uses the
    detuning mapping and the second-order bond couplings of the ladder.
    """
    dc = derived_couplings(spec)
    if T is None:
        T = 20.0 / abs(dc.J_eff)
    times = np.linspace(0.0, T, n_times)

    h_full = build_full_hamiltonian(spec)
    psi0 = vacuum_down_state(spec)
    states = _propagate(h_full, psi0, times)
    pops_full = qubit_populations(spec, states)

    params = ModelParams(J=0.0, Omega=spec.drive_amp, Delta=dc.delta_mapped)
    h_xy = build_xy_hamiltonian(params, couplings=dc.xy_couplings)
    psi0_xy = np.zeros(8, dtype=complex)
    psi0_xy[0] = 1.0
    states_xy = _propagate(h_xy, psi0_xy, times)
    num = NUMBER.matrix
    pops_xy = np.empty((n_times, 3))
    for q in range(3):
        op = np.kron(np.kron(np.eye(2**q), num), np.eye(2**(2 - q)))
        pops_xy[:, q] = np.einsum("ti,ij,tj->t", states_xy.conj(), op, states_xy).real
    deviation = float(np.max(np.abs(pops_full - pops_xy)))
    return XyComparison(times, pops_full, pops_xy, deviation)


def _propagate(h: np.ndarray, psi0: np.ndarray, times: np.ndarray) -> np.ndarray:
    energies, vectors = np.linalg.eigh(h)
    coeff = vectors.conj().T @ np.asarray(psi0, dtype=complex)
    phases = np.exp(-1j * np.outer(np.asarray(times), energies))
    return (phases * coeff) @ vectors.T  # (n_times, dim)


@dataclass
class Finding:
    level: str  # "pass" | "warn" | "info"
    code: str
    message: str


def required_detuning(g_1: float, j_eff: float) -> float:
    """Detuning needed to realize a target second-order rate, Delta_1 = g_1^2 / J_eff."""
    if j_eff == 0:
        raise ZeroDivisionError("target coupling must be nonzero")
    return g_1**2 / j_eff


def dispersive_checks(spec: CircuitSpec, gamma: float = None) -> list:
    """Static screening of the dispersive conditions and driving windows.

    Produces warnings only, never hard failures. When ``gamma`` is given the
    drive, detuning and coupling rates are additionally checked against the
    workable windows Omega in [0.1, 2] gamma, Delta_c in [-2, 10] gamma and
    J_eff in [0, 10] gamma.
    """
    findings = []
    dc = derived_couplings(spec)
    g = spec.couplings
    deltas = spec.cavity_detunings
    for c in (0, 1):
        ratio = abs(deltas[c]) / abs(g[c]) if g[c] else np.inf
        level = "pass" if ratio >= 10 else "warn"
        findings.append(Finding(level, "dispersive-coupling",
                                f"|Delta_{c+1}|/g_{c+1} = {ratio:.2f}"))
        if spec.delta_c != 0:
            ratio_c = abs(deltas[c]) / abs(spec.delta_c)
            level = "pass" if ratio_c >= 10 else "warn"
            findings.append(Finding(level, "dispersive-detuning",
                                    f"|Delta_{c+1}|/|Delta_c| = {ratio_c:.2f}"))
    split = abs(deltas[0] - deltas[1])
    j_big = max(abs(dc.J_12), abs(dc.J_23))
    level = "pass" if split >= 10 * j_big else "warn"
    findings.append(Finding(level, "cavity-splitting",
                            f"|Delta_1 - Delta_2| = {split:.3g} vs 10*J = {10*j_big:.3g}"))
    if dc.g2_constraint_residual > 1e-9 * max(g[0] ** 2, 1e-300):
        findings.append(Finding("warn", "coupling-balance",
                                f"g_2^2 - g_1^2 (Delta_2/Delta_1) = {dc.g2_constraint_residual:.3g}"))
    if gamma is not None:
        windows = (("drive", spec.drive_amp / gamma, 0.1, 2.0),
                   ("detuning", spec.delta_c / gamma, -2.0, 10.0),
                   ("coupling", dc.J_eff / gamma, 0.0, 10.0))
        for name, value, lo, hi in windows:
            level = "pass" if lo <= value <= hi else "warn"
            findings.append(Finding(level, f"window-{name}",
                                    f"{name}/gamma = {value:.3g}, workable range [{lo}, {hi}]"))
    return findings


def feasibility_report(g1_over_2pi_mhz: float, j_eff_mhz: float) -> list:
    """Screen a target coupling against typical hardware frequency windows.

    Resonators run at 2-10 GHz and drives below 18 GHz; a required detuning
    below the 2 GHz resonator floor parks the cavity inside the qubit band.
    """
    req = required_detuning(g1_over_2pi_mhz, j_eff_mhz) / 1000.0  # GHz
    findings = [Finding("info", "required-detuning",
                        f"Delta_1/2pi = {req:.3g} GHz for J_eff = {j_eff_mhz} MHz "
                        f"at g_1/2pi = {g1_over_2pi_mhz} MHz")]
    if req < 2.0:
        findings.append(Finding("warn", "resonator-window",
                                f"required Delta_1/2pi = {req:.3g} GHz is below the "
                                "2-10 GHz resonator band"))
    elif req > 16.0:
        findings.append(Finding("warn", "drive-window",
                                f"required Delta_1/2pi = {req:.3g} GHz exceeds the "
                                "attainable drive-resonator separation"))
    return findings
