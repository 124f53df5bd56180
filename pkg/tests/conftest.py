"""Shared fixtures: default geometry, materials and the expensive solves
reused across the suite (session-scoped; everything downstream is pure)."""

import json
from pathlib import Path

import numpy as np
import pytest

from bubblebands.boundary import make_dimer
from bubblebands.lattice import dirac_point, make_lattice
from bubblebands.operators import AssemblyCache, default_material

GOLDEN_PATH = Path(__file__).parent / "golden" / "defaults.json"


@pytest.fixture(scope="session")
def golden():
    return json.loads(GOLDEN_PATH.read_text())


@pytest.fixture(scope="session")
def hc_lattice():
    return make_lattice("honeycomb", 1.0)


@pytest.fixture(scope="session")
def sq_lattice():
    return make_lattice("square", 1.0)


@pytest.fixture(scope="session")
def hc_basis(hc_lattice):
    return make_dimer(hc_lattice, 0.2, 6, 64)


@pytest.fixture(scope="session")
def sq_basis(sq_lattice):
    return make_dimer(sq_lattice, 0.2, 6, 64)


@pytest.fixture(scope="session")
def material():
    return default_material()


@pytest.fixture(scope="session")
def alpha_star(hc_lattice):
    return dirac_point(hc_lattice)


@pytest.fixture(scope="session")
def hc_cache_star(hc_basis, alpha_star):
    return AssemblyCache(hc_basis, alpha_star, k_max=1.0)


@pytest.fixture(scope="session")
def psis_star(hc_basis, alpha_star, hc_cache_star):
    from bubblebands.spectral import solve_psi

    return solve_psi(hc_basis, alpha_star, cache=hc_cache_star)


@pytest.fixture(scope="session")
def dirac_data(hc_basis, material):
    from bubblebands.spectral import dirac_velocity

    return dirac_velocity(hc_basis, material)


@pytest.fixture(scope="session")
def band_point_star(hc_basis, material, alpha_star):
    from bubblebands.spectral import solve_bands_at

    return solve_bands_at(hc_basis, material, alpha_star)


@pytest.fixture(scope="session")
def omega_star_num(band_point_star):
    return float(band_point_star.omegas[-1])


@pytest.fixture(scope="session")
def seed_offset(hc_basis, material):
    from bubblebands.spectral import seed_offset_at_cone

    return seed_offset_at_cone(hc_basis, material)


@pytest.fixture(scope="session")
def hc_solver(hc_basis, material):
    from bubblebands.spectral import DispersionSolver

    return DispersionSolver(hc_basis, material)


@pytest.fixture(scope="session")
def sq_solver(sq_basis, material):
    from bubblebands.spectral import DispersionSolver

    return DispersionSolver(sq_basis, material)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260809)
