"""Run configuration: YAML schema, defaults, validation and manifests.

A run config fully determines every output; the manifest written next to
the outputs embeds the resolved config so any run can be re-executed
bit-identically from its manifest alone.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import yaml

from bubblebands.boundary import BoundaryBasis, make_dimer
from bubblebands.lattice import (
    Lattice,
    dirac_point,
    gamma_point,
    m_point,
    make_lattice,
    x_point,
)
from bubblebands.operators import Material


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


DEFAULTS = {
    "lattice": {"kind": "honeycomb", "constant": 1.0},
    "bubbles": {"radius": 0.2, "multipole_order": 6, "quadrature_nodes": 64},
    "material": {"rho": 1000.0, "kappa": 1000.0, "rho_b": 1.0, "kappa_b": 1.0},
    "greens": {"method": "ewald", "spectral_shells": 0, "ewald_split": 0.0,
               "ewald_real_shells": 0, "ewald_recip_shells": 0},
    "solver": {"tol": 1.0e-9, "sigma_accept": 1.0e-6},
    "bands": {"path": ["gamma", "dirac", "m", "gamma"], "n_per_segment": 16},
    "dirac": {"fd_step_rel": 1.0e-3, "fit_radii_rel": [1.0e-3, 1.4e-3, 2.0e-3,
                                                       3.0e-3, 4.3e-3, 6.0e-3],
              "n_directions": 8},
    "field": {"epsilon": 8.0e-3, "band": "lower", "region_cells": 6,
              "resolution": 96, "line_cells": 96, "samples_per_cell": 8},
    "envelope": {"epsilons": [-1.0e-2, -8.0e-3, -5.0e-3, -2.0e-3, -1.0e-3,
                              1.0e-3, 2.0e-3, 5.0e-3, 8.0e-3, 1.0e-2],
                 "fft_epsilons": [8.0e-3], "n_cells": 96, "samples_per_cell": 8},
    "seed": 0,
}

_SQUARE_ENVELOPE = [1.0e-3, 2.0e-3, 3.0e-3, 5.0e-3, 7.0e-3, 8.5e-3, 1.0e-2]


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        if key not in base:
            raise ConfigError(f"unknown config key {path + key!r}")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"{path + key!r} must be a mapping")
            out[key] = _merge(base[key], val, path + key + ".")
        else:
            out[key] = val
    return out


@dataclass(frozen=True)
class RunConfig:
    """Resolved configuration; `raw` is the fully merged dictionary."""

    raw: dict

    @property
    def lattice(self) -> Lattice:
        sec = self.raw["lattice"]
        return make_lattice(sec["kind"], float(sec["constant"]))

    @property
    def material(self) -> Material:
        m = self.raw["material"]
        return Material(float(m["rho"]), float(m["kappa"]),
                        float(m["rho_b"]), float(m["kappa_b"]))

    def basis(self) -> BoundaryBasis:
        b = self.raw["bubbles"]
        return make_dimer(self.lattice, float(b["radius"]),
                          int(b["multipole_order"]), int(b["quadrature_nodes"]))

    @property
    def solver_tol(self) -> float:
        return float(self.raw["solver"]["tol"])

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    def waypoints(self):
        """Resolve named or explicit [x, y] band-path waypoints."""
        lat = self.lattice
        named = {"gamma": gamma_point, "dirac": dirac_point, "k": dirac_point,
                 "m": m_point, "x": x_point}
        pts = []
        for wp in self.raw["bands"]["path"]:
            if isinstance(wp, str):
                key = wp.lower()
                if key not in named:
                    raise ConfigError(f"unknown waypoint name {wp!r}")
                pts.append(named[key](lat))
            else:
                if len(wp) != 2:
                    raise ConfigError(f"waypoint {wp!r} is not a 2-vector")
                pts.append([float(wp[0]), float(wp[1])])
        return pts

    def envelope_epsilons(self):
        import numpy as np
        eps = self.raw["envelope"]["epsilons"]
        if self.raw["lattice"]["kind"] == "square" and any(e < 0 for e in eps):
            # square runs use positive depths below the apex
            eps = _SQUARE_ENVELOPE
        return np.asarray(eps, dtype=float)

    def digest(self) -> str:
        return hashlib.sha256(
            json.dumps(self.raw, sort_keys=True).encode()).hexdigest()


def load_config(path: str | Path | None, overrides: dict | None = None) -> RunConfig:
    """Load a YAML config (or a manifest JSON; its embedded config is used)."""
    data = {}
    if path is not None:
        text = Path(path).read_text()
        if str(path).endswith(".json"):
            doc = json.loads(text)
            data = doc.get("config", doc)
        else:
            data = yaml.safe_load(text) or {}
        if not isinstance(data, dict):
            raise ConfigError(f"config root must be a mapping, got {type(data)}")
    merged = _merge(DEFAULTS, data)
    if overrides:
        merged = _merge(merged, overrides)
    kind = merged["lattice"]["kind"]
    if kind not in ("honeycomb", "square"):
        raise ConfigError(f"lattice.kind must be honeycomb or square, got {kind!r}")
    if kind == "square" and data.get("envelope", {}).get("epsilons") is None:
        merged["envelope"]["epsilons"] = list(_SQUARE_ENVELOPE)
    if merged["greens"]["method"] not in ("ewald", "spectral"):
        raise ConfigError("greens.method must be ewald or spectral")
    return RunConfig(raw=merged)


def manifest_dict(config: RunConfig, command: str, threads: int,
                  outputs: dict) -> dict:
    from bubblebands import __version__

    return {
        "schema_version": 1,
        "package_version": __version__,
        "command": command,
        "threads": threads,
        "seed": config.seed,
        "config": config.raw,
        "config_sha256": config.digest(),
        "outputs": outputs,
    }
