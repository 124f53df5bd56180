"""Bubble geometry within the unit cell and the discrete boundary basis.

Circles are discretized by equispaced nodes with trapezoid weights
(Nystrom collocation); the equispaced layout is what makes the
periodic-log quadrature correction in the operator assembly spectrally
accurate.  The Fourier mode set |n| <= n_modes doubles as a diagnostic
projection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from bubblebands.lattice import Lattice, LatticeKind


class GeometryError(ValueError):
    """Invalid bubble geometry (touching or under-resolved)."""


@dataclass(frozen=True)
class BubbleDimer:
    """Circular bubbles in the unit cell.

    Honeycomb: centres (l1+l2)/3 and 2(l1+l2)/3 (the dimer); square: the
    single centre (l1+l2)/2.
    """

    lattice: Lattice
    centers: tuple
    radius: float
    n_modes: int
    n_quad: int

    @property
    def bubble_area(self) -> float:
        """|D_1| = pi R^2."""
        return np.pi * self.radius ** 2

    @property
    def n_bubbles(self) -> int:
        return len(self.centers)


@dataclass(frozen=True)
class BoundaryBasis:
    """Collocation nodes, outward normals, arclength weights and modes."""

    dimer: BubbleDimer
    nodes: np.ndarray      # (n, 2)
    normals: np.ndarray    # (n, 2)
    weights: np.ndarray    # (n,)
    thetas: np.ndarray     # (n,) angle of each node on its circle
    circle_index: np.ndarray  # (n,) which bubble each node belongs to

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def modes(self) -> np.ndarray:
        N = self.dimer.n_modes
        return np.arange(-N, N + 1)

    def circle_slice(self, j: int) -> slice:
        """Nodes of bubble j (1-based, matching the indicator convention)."""
        nq = self.dimer.n_quad
        if not 1 <= j <= self.dimer.n_bubbles:
            raise ValueError(f"bubble index {j} out of range")
        return slice((j - 1) * nq, j * nq)

    def fourier_coeffs(self, values: np.ndarray, j: int) -> np.ndarray:
        """Diagnostic projection of nodal values on bubble j onto e^{i n theta}."""
        sl = self.circle_slice(j)
        th = self.thetas[sl]
        return np.array([np.mean(values[sl] * np.exp(-1j * n * th))
                         for n in self.modes])


def _min_image_gap(lattice: Lattice, centers, radius: float) -> float:
    """Smallest surface-to-surface distance over all pairs of bubble images."""
    shifts = lattice.lattice_points(2)
    gap = np.inf
    for i, ci in enumerate(centers):
        for jj, cj in enumerate(centers):
            d = np.linalg.norm(ci - (cj + shifts), axis=1)
            if i == jj:
                d = d[d > 1e-12]  # drop the zero self-shift
            gap = min(gap, float(d.min()) - 2.0 * radius)
    return gap


def make_dimer(lattice: Lattice, R: float, N: int, n_quad: int) -> BoundaryBasis:
    """Construct the bubble geometry and its boundary basis.

    Requires n_quad even (the log-quadrature pairs nodes) and
    n_quad >= 4N + 4 so the multipole content |n| <= 2N is integrated
    exactly by the trapezoid rule.
    """
    if R <= 0:
        raise GeometryError("bubble radius must be positive")
    if N < 1:
        raise GeometryError("multipole order must be >= 1")
    if n_quad < 4 * N + 4:
        raise GeometryError(
            f"n_quad = {n_quad} under-resolves |n| <= {2 * N} modes; need >= {4 * N + 4}")
    if n_quad % 2:
        raise GeometryError("n_quad must be even")

    if lattice.kind is LatticeKind.HONEYCOMB:
        centers = ((lattice.l1 + lattice.l2) / 3.0, 2.0 * (lattice.l1 + lattice.l2) / 3.0)
    else:
        centers = (0.5 * (lattice.l1 + lattice.l2),)
    gap = _min_image_gap(lattice, centers, R)
    if gap <= 1e-9:
        raise GeometryError(
            f"bubbles touch across the lattice (gap {gap:.3e}); reduce R")

    dimer = BubbleDimer(lattice=lattice, centers=centers, radius=float(R),
                        n_modes=int(N), n_quad=int(n_quad))
    th = 2.0 * np.pi * np.arange(n_quad) / n_quad
    ring = np.stack([np.cos(th), np.sin(th)], axis=1)
    nodes = np.vstack([c + R * ring for c in centers])
    normals = np.vstack([ring for _ in centers])
    weights = np.full(nodes.shape[0], 2.0 * np.pi * R / n_quad)
    thetas = np.concatenate([th for _ in centers])
    circle_index = np.repeat(np.arange(1, len(centers) + 1), n_quad)
    return BoundaryBasis(dimer=dimer, nodes=nodes, normals=normals,
                         weights=weights, thetas=thetas, circle_index=circle_index)


def indicator_rhs(basis: BoundaryBasis, j: int) -> np.ndarray:
    """Right-hand side chi_{boundary of D_j}: 1 on bubble j's nodes, 0 elsewhere."""
    if not 1 <= j <= basis.dimer.n_bubbles:
        raise ValueError(f"bubble index {j} out of range for {basis.dimer.n_bubbles} bubble(s)")
    rhs = np.zeros(basis.n_nodes)
    rhs[basis.circle_slice(j)] = 1.0
    return rhs


def r3_node_permutation(basis: BoundaryBasis) -> np.ndarray:
    """Permutation p with node[p[i]] = R3(node[i]) for the honeycomb dimer.

    R3 maps the node of D1 at angle theta to the node of D2 at pi - theta.
    """
    if basis.dimer.n_bubbles != 2:
        raise ValueError("R3 node permutation requires the honeycomb dimer")
    nq = basis.dimer.n_quad
    i = np.arange(nq)
    mirrored = (nq // 2 - i) % nq
    return np.concatenate([mirrored + nq, mirrored])
