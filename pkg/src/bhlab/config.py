"""Experiment configuration: parsing, validation, resolution, hashing.

Configs are TOML (primary) or JSON.  The canonical form used for hashing
is the sorted-key JSON serialization, so logically identical configs hash
identically regardless of source format.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from . import couplings as cpl
from . import fock
from .lattice import Lattice, Region, ball, chain, grid, region

try:
    import tomllib  # py >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

__all__ = [
    "ConfigError",
    "load_config",
    "canonical_json",
    "config_hash",
    "build_lattice",
    "build_region",
    "build_couplings",
    "build_basis_from_config",
    "build_state",
    "build_times",
    "validate_config",
]


class ConfigError(ValueError):
    """Schema violation with a machine-readable field path."""

    def __init__(self, code: str, field_path: str, message: str):
        super().__init__(f"{field_path}: {message}")
        self.code = code
        self.field_path = field_path
        self.message = message

    def to_json(self) -> dict:
        return {"code": self.code, "field_path": self.field_path, "message": self.message}


def load_config(path) -> dict:
    path = Path(path)
    data = path.read_bytes()
    if path.suffix.lower() == ".json":
        return json.loads(data)
    try:
        return tomllib.loads(data.decode())
    except tomllib.TOMLDecodeError:
        try:
            return json.loads(data)
        except json.JSONDecodeError:
            raise ConfigError("parse", "<file>", f"cannot parse {path} as TOML or JSON")


def canonical_json(cfg: dict) -> str:
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"))


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(canonical_json(cfg).encode()).hexdigest()[:16]


def _require(cfg: dict, key: str, path: str):
    if key not in cfg:
        raise ConfigError("missing", f"{path}.{key}" if path else key, "required field missing")
    return cfg[key]


def build_lattice(cfg: dict) -> Lattice:
    spec = _require(cfg, "lattice", "")
    dim = _require(spec, "dim", "lattice")
    shape = _require(spec, "shape", "lattice")
    if len(shape) != dim:
        raise ConfigError("shape", "lattice.shape", f"expected {dim} side lengths")
    origin = spec.get("origin")
    if dim == 1:
        return chain(shape[0], origin=origin[0] if origin else 0)
    return grid(tuple(shape), tuple(origin) if origin else None)


def build_region(lattice: Lattice, spec, path: str) -> Region:
    if isinstance(spec, (list, tuple)):
        return region(lattice, spec)
    if isinstance(spec, dict) and "ball" in spec:
        b = spec["ball"]
        return ball(lattice, b.get("center", [0] * lattice.dimension), b["radius"])
    raise ConfigError("region", path, "region must be a site-index list or {ball: {center, radius}}")


def build_couplings(lattice: Lattice, cfg: dict):
    spec = cfg.get("couplings", {})
    J = V = None
    if "hopping" in spec:
        h = spec["hopping"]
        J = cpl.power_law_couplings(
            lattice, cpl.HOPPING, h["alpha"], h["amplitude"], h.get("range_cap")
        )
    if "interaction" in spec:
        w = spec["interaction"]
        V = cpl.power_law_couplings(
            lattice, cpl.INTERACTION, w["alpha"], w["amplitude"],
            w.get("range_cap"), onsite=w.get("onsite", 0.0),
        )
    q_terms = []
    for i, qs in enumerate(spec.get("q_interactions", [])):
        Vq = cpl.power_law_couplings(
            lattice, cpl.INTERACTION, qs["alpha"], qs["amplitude"], qs.get("range_cap")
        )
        q_terms.append((Vq, int(qs["q"])))
    return J, V, q_terms


def build_basis_from_config(lattice: Lattice, cfg: dict) -> fock.FockBasis:
    spec = _require(cfg, "sector", "")
    if "fixed_n" in spec:
        return fock.build_basis(lattice, ("fixed_n", int(spec["fixed_n"])))
    if "truncated" in spec:
        return fock.build_basis(lattice, ("truncated", int(spec["truncated"])))
    raise ConfigError("sector", "sector", "need fixed_n or truncated")


def estimated_dimension(lattice: Lattice, cfg: dict) -> int:
    spec = _require(cfg, "sector", "")
    L = len(lattice)
    if "fixed_n" in spec:
        return fock.fixed_n_dimension(L, int(spec["fixed_n"]))
    if "truncated" in spec:
        return fock.truncated_dimension(L, int(spec["truncated"]))
    raise ConfigError("sector", "sector", "need fixed_n or truncated")


def build_state(basis: fock.FockBasis, cfg: dict) -> fock.QuantumState:
    spec = _require(cfg, "initial_state", "")
    if "mott" in spec:
        return fock.mott_state(basis, int(spec["mott"]))
    if "occupations" in spec:
        return fock.basis_vector(basis, spec["occupations"])
    if "shell" in spec:
        sh = spec["shell"]
        X = build_region(basis.lattice, sh["region"], "initial_state.shell.region")
        return fock.shell_state(basis, X, sh["xi"], sh["occupations"])
    raise ConfigError(
        "initial_state", "initial_state", "need mott, occupations, or shell"
    )


def build_times(cfg: dict) -> np.ndarray:
    spec = _require(cfg, "times", "")
    if isinstance(spec, dict):
        t = np.linspace(spec.get("start", 0.0), spec["stop"], int(spec["num"]))
    else:
        t = np.asarray(spec, dtype=float)
    if len(t) == 0 or (len(t) > 1 and not np.all(np.diff(t) > 0)):
        raise ConfigError("times", "times", "time grid must be strictly increasing")
    return t


def validate_config(cfg: dict) -> dict:
    """Parse and resolve without simulating; return a dimension report."""
    lattice = build_lattice(cfg)
    dim = estimated_dimension(lattice, cfg)
    if dim > fock.DEFAULT_DIMENSION_CAP:
        raise ConfigError(
            "dimension_cap", "sector",
            f"Fock dimension {dim} exceeds cap {fock.DEFAULT_DIMENSION_CAP}",
        )
    build_couplings(lattice, cfg)
    if "times" in cfg:
        build_times(cfg)
    # dense propagator memory for the dominant dim <= threshold path
    mem_mb = dim * dim * 16 / 1e6
    return {
        "sites": len(lattice),
        "dimension": dim,
        "dense_memory_mb": round(mem_mb, 3),
        "config_hash": config_hash(cfg),
        "warnings": (
            [f"dimension {dim} will use the Krylov propagator"] if dim > 400 else []
        ),
    }
