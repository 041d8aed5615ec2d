"""Experiment configuration: strict JSON schema, validation and hashing.

A config file is one JSON object. Every experiment needs ``kind``, ``params``
and (except cqed-compare) ``lattice``; each kind adds its own block. Unknown
keys anywhere are rejected so typos cannot silently change a run. All rates
are in units of gamma unless the optional ``units`` block declares otherwise.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from .model import LatticeSpec, ModelParams

__all__ = ["ConfigError", "ValidationFinding", "ExperimentConfig", "KINDS"]

KINDS = (
    "oracle",
    "mf-sweep",
    "mf-scan",
    "mf-traj",
    "mpo-ness",
    "mpo-sweep",
    "mps-traj",
    "cqed-compare",
)

_BLOCK_KEYS = {
    "oracle": (),
    "mf-sweep": ("sweep",),
    "mf-scan": ("scan",),
    "mf-traj": ("ensemble",),
    "mpo-ness": ("tn",),
    "mpo-sweep": ("tn", "sweep"),
    "mps-traj": ("tn_traj",),
    "cqed-compare": ("circuit",),
}

_SCHEMA = {
    "kind": None,
    "params": {"J": 0.0, "Omega": 0.0, "Delta": 0.0, "gamma": 1.0},
    "lattice": {"dimension": 1, "extents": [1]},
    "seed": 0,
    "output_dir": "",
    "units": {"gamma": 1.0},
    "sweep": {"start": 0.0, "stop": 0.0, "step": 0.02, "n_seeds": 5,
              "directions": ["rl"]},
    "scan": {"j_values": [], "omega_values": [], "delta_start": 0.0,
             "delta_stop": 0.0, "step": 0.02},
    "ensemble": {"T": 200.0, "dt": 2e-3, "n_traj": 1000, "window": 0.3,
                 "deltas": [], "n_bins": 50},
    "tn": {"chi": 1, "chi_values": [], "dt": 2e-3, "tol": 1e-6, "t_max": 400.0,
           "sv_cutoff": 1e-10, "correlation_r": [], "entropy": False},
    "tn_traj": {"chi_tilde": 1, "T": 200.0, "dt": 2e-3, "n_traj": 10,
                "window": 0.8},
    "evolve": {"dt": 2e-3, "tol": 1e-7, "t_max": 500.0},
    "circuit": {"delta_1": 30.0, "delta_2": 20.0, "g_1": 1.0, "delta_c": 0.0,
                "omega": 0.0, "mode_sign": -1, "n_max": 2,
                "scales": [1.0], "n_times": 400, "T": 0.0, "gamma": 0.0},
}


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


@dataclass
class ValidationFinding:
    level: str  # "error" | "warn" | "info"
    field: str
    message: str


def _check_keys(data: dict, allowed, where: str):
    unknown = set(data) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in {where}")


def _merge_block(name: str, data: dict) -> dict:
    defaults = _SCHEMA[name]
    _check_keys(data, defaults, name)
    merged = dict(defaults)
    merged.update(data)
    return merged


@dataclass
class ExperimentConfig:
    kind: str
    params: ModelParams
    lattice: LatticeSpec
    seed: int
    blocks: dict
    output_dir: str
    raw: dict

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config root must be a JSON object")
        _check_keys(data, _SCHEMA, "config root")
        kind = data.get("kind")
        if kind not in KINDS:
            raise ConfigError(f"kind must be one of {KINDS}, got {kind!r}")
        required = _BLOCK_KEYS[kind]
        for block in required:
            if block not in data:
                raise ConfigError(f"kind {kind!r} requires the {block!r} block")
        params_data = _merge_block("params", data.get("params", {}))
        try:
            params = ModelParams(**params_data)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad params block: {exc}") from exc
        lattice_data = _merge_block("lattice", data.get("lattice", {}))
        try:
            lattice = LatticeSpec(lattice_data["dimension"],
                                  tuple(lattice_data["extents"]))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad lattice block: {exc}") from exc
        blocks = {}
        for name in ("sweep", "scan", "ensemble", "tn", "tn_traj", "evolve",
                     "circuit"):
            if name in data:
                blocks[name] = _merge_block(name, data[name])
            elif name in required or name == "evolve":
                blocks[name] = dict(_SCHEMA[name])
        seed = data.get("seed")
        return cls(
            kind=kind,
            params=params,
            lattice=lattice,
            seed=seed,
            blocks=blocks,
            output_dir=data.get("output_dir", ""),
            raw=data,
        )

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(
                    f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: "
                    f"{exc.msg}") from exc
        return cls.from_dict(data)

    def hash(self) -> str:
        canonical = dict(self.raw)
        canonical.pop("output_dir", None)
        if self.seed is not None:
            canonical["seed"] = self.seed
        blob = json.dumps(canonical, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def validate(self) -> list:
        """Static checks; findings only, never raises."""
        findings = []
        if self.seed is None:
            findings.append(ValidationFinding(
                "info", "seed", "no seed given; one will be drawn and recorded"))
        if self.kind in ("mf-traj", "mps-traj"):
            block = self.blocks.get("ensemble") or self.blocks.get("tn_traj")
            dt = block["dt"] * self.params.gamma
            if dt >= 0.05:
                findings.append(ValidationFinding(
                    "error", "dt",
                    f"dt*gamma = {dt:.3g} too large for first-order jump sampling"))
            elif dt > 0.01:
                findings.append(ValidationFinding(
                    "warn", "dt", f"dt*gamma = {dt:.3g}; jump probabilities are "
                    "first order in dt"))
        if "sweep" in self.blocks:
            sw = self.blocks["sweep"]
            if sw["step"] <= 0:
                findings.append(ValidationFinding(
                    "error", "sweep.step", "step must be positive"))
            if sw["start"] == sw["stop"]:
                findings.append(ValidationFinding(
                    "error", "sweep", "start and stop coincide"))
            for d in sw["directions"]:
                if d not in ("rl", "lr"):
                    findings.append(ValidationFinding(
                        "error", "sweep.directions", f"unknown direction {d!r}"))
        if "tn" in self.blocks:
            tn = self.blocks["tn"]
            chis = list(tn["chi_values"]) or [tn["chi"]]
            if any(c < 1 for c in chis):
                findings.append(ValidationFinding(
                    "error", "tn.chi", "bond dimension must be >= 1"))
            if self.lattice.dimension != 1:
                findings.append(ValidationFinding(
                    "error", "lattice", "matrix-product kinds need a 1D lattice"))
        if self.kind == "oracle" and self.lattice.n_sites > 5:
            findings.append(ValidationFinding(
                "error", "lattice", "dense oracle supports at most 5 sites"))
        if self.kind == "cqed-compare":
            from .cqed import CircuitSpec, dispersive_checks
            c = self.blocks["circuit"]
            spec = CircuitSpec.from_detunings(
                c["delta_1"], c["delta_2"], c["g_1"], c["delta_c"], c["omega"],
                mode_sign=c["mode_sign"], n_max=c["n_max"])
            gamma = c["gamma"] if c["gamma"] else None
            for f in dispersive_checks(spec, gamma=gamma):
                if f.level == "warn":
                    findings.append(ValidationFinding("warn", f.code, f.message))
        return findings
