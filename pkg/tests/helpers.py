"""Shared numerical oracles for the test suite.

These deliberately avoid the production assembly path: near-boundary
potentials are computed from trigonometrically upsampled densities with
plain fine quadrature, giving an independent reference for jump, trace
and continuity checks.
"""

import numpy as np

from bubblebands.boundary import make_dimer


def upsample_density(basis, vals, factor):
    """Trig-interpolate nodal values per circle onto a factor-times-finer basis."""
    nq = basis.dimer.n_quad
    fine = make_dimer(basis.dimer.lattice, basis.dimer.radius,
                      basis.dimer.n_modes, nq * factor)
    out = np.zeros(fine.n_nodes, dtype=complex)
    for j in range(basis.dimer.n_bubbles):
        spec = np.fft.fft(np.asarray(vals, dtype=complex)[j * nq:(j + 1) * nq])
        pad = np.zeros(nq * factor, dtype=complex)
        pad[:nq // 2] = spec[:nq // 2]
        pad[-(nq // 2):] = spec[-(nq // 2):]
        out[j * nq * factor:(j + 1) * nq * factor] = np.fft.ifft(pad) * factor
    return fine, out


def boundary_image_distance(basis, x):
    """Distance from x to the nearest bubble boundary over all lattice images."""
    lat = basis.dimer.lattice
    shifts = lat.lattice_points(2)
    d = np.inf
    for c in basis.dimer.centers:
        r = np.linalg.norm(np.asarray(x) - (c + shifts), axis=1)
        d = min(d, np.abs(r - basis.dimer.radius).min())
    return d


def one_sided_boundary_value(basis, alpha, k, density, x0, nu, side, *,
                             factor=68, t=1e-3):
    """Boundary limit of the single layer potential from one side.

    Quadratic extrapolation in the offset of the upsampled-density
    potential; `side` is +1 (exterior) or -1 (interior).
    """
    from bubblebands.operators import single_layer_potential

    fine, dfine = upsample_density(basis, density, factor)
    pts = [x0 + side * s * t * nu for s in (1.0, 2.0, 3.0)]
    u = single_layer_potential(fine, alpha, k, dfine, pts)
    return 3.0 * u[0] - 3.0 * u[1] + u[2]
