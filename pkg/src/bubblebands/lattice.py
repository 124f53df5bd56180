"""Direct/dual lattice geometry, Brillouin-zone paths and point symmetries.

Two lattice kinds are supported: the honeycomb lattice (two bubbles per
cell, conical degeneracy at the zone corner) and the square lattice (one
bubble per cell, first-band maximum at the zone corner M).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class LatticeKind(str, enum.Enum):
    HONEYCOMB = "honeycomb"
    SQUARE = "square"


@dataclass(frozen=True)
class Lattice:
    """Direct basis (l1, l2), dual basis (a1, a2) with a_i . l_j = 2 pi delta_ij."""

    kind: LatticeKind
    L: float
    l1: np.ndarray
    l2: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    cell_area: float

    @property
    def direct_basis(self) -> np.ndarray:
        """Rows are l1, l2."""
        return np.vstack([self.l1, self.l2])

    @property
    def dual_basis(self) -> np.ndarray:
        """Rows are a1, a2."""
        return np.vstack([self.a1, self.a2])

    def lattice_points(self, shells: int) -> np.ndarray:
        """All m1*l1 + m2*l2 with |m1|, |m2| <= shells, shape (M, 2)."""
        m = np.arange(-shells, shells + 1)
        m1, m2 = np.meshgrid(m, m, indexing="ij")
        return m1.reshape(-1, 1) * self.l1 + m2.reshape(-1, 1) * self.l2

    def dual_points(self, shells: int) -> np.ndarray:
        """All m1*a1 + m2*a2 with |m1|, |m2| <= shells, shape (M, 2)."""
        m = np.arange(-shells, shells + 1)
        m1, m2 = np.meshgrid(m, m, indexing="ij")
        return m1.reshape(-1, 1) * self.a1 + m2.reshape(-1, 1) * self.a2


@dataclass(frozen=True)
class SymmetryOp:
    """Affine map x -> matrix @ x + offset."""

    tag: str
    matrix: np.ndarray
    offset: np.ndarray


def make_lattice(kind: LatticeKind | str, L: float) -> Lattice:
    """Build a lattice of the given kind and lattice constant L > 0.

    The dual basis is obtained by solving a_i . l_j = 2 pi delta_ij as a
    2x2 linear system; the closed forms serve as test oracles.
    """
    kind = LatticeKind(kind)
    if not L > 0:
        raise ValueError(f"lattice constant must be positive, got {L}")
    if kind is LatticeKind.HONEYCOMB:
        l1 = L * np.array([np.sqrt(3.0) / 2.0, 0.5])
        l2 = L * np.array([np.sqrt(3.0) / 2.0, -0.5])
    else:
        l1 = L * np.array([1.0, 0.0])
        l2 = L * np.array([0.0, 1.0])
    direct = np.vstack([l1, l2])
    # rows of `dual` solve dual @ direct.T = 2 pi I
    dual = 2.0 * np.pi * np.linalg.inv(direct.T)
    cell_area = abs(np.linalg.det(direct))
    return Lattice(kind=kind, L=float(L), l1=l1, l2=l2,
                   a1=dual[0].copy(), a2=dual[1].copy(), cell_area=cell_area)


def dirac_point(lattice: Lattice) -> np.ndarray:
    """Quasi-momentum of the conical point (zone corner).

    Honeycomb: alpha* = (2 a1 + a2) / 3.  Square: M = (pi/L, pi/L), where
    the first band attains its maximum.
    """
    if lattice.kind is LatticeKind.HONEYCOMB:
        return (2.0 * lattice.a1 + lattice.a2) / 3.0
    return np.array([np.pi, np.pi]) / lattice.L


def second_dirac_point(lattice: Lattice) -> np.ndarray:
    """The other zone corner alpha2* = (a1 + 2 a2) / 3 (honeycomb only)."""
    if lattice.kind is not LatticeKind.HONEYCOMB:
        raise ValueError("second Dirac point is defined for the honeycomb lattice")
    return (lattice.a1 + 2.0 * lattice.a2) / 3.0


def gamma_point(lattice: Lattice) -> np.ndarray:
    return np.zeros(2)


def m_point(lattice: Lattice) -> np.ndarray:
    """Edge midpoint of the Brillouin zone: (a1 + a2)/2."""
    return 0.5 * (lattice.a1 + lattice.a2)


def x_point(lattice: Lattice) -> np.ndarray:
    """a1/2; for the square lattice this is the X point."""
    return 0.5 * lattice.a1


def reduce_to_bz(lattice: Lattice, alpha: np.ndarray) -> np.ndarray:
    """Reduce alpha into the fundamental parallelogram {s a1 + t a2, 0 <= s,t < 1}.

    Idempotent; the hexagonal first zone is used only for display.
    """
    alpha = np.asarray(alpha, dtype=float)
    # fractional coordinates w.r.t. the dual basis
    frac = np.linalg.solve(lattice.dual_basis.T, alpha)
    frac -= np.floor(frac)
    # guard against 1.0 - eps rounding back up to exactly 1
    frac[frac >= 1.0] = 0.0
    return frac @ lattice.dual_basis


@dataclass(frozen=True)
class BzPath:
    """Piecewise-linear Brillouin-zone path with cumulative arclength."""

    points: np.ndarray     # (M, 2)
    arclength: np.ndarray  # (M,)
    waypoint_index: np.ndarray  # indices of the input waypoints within `points`


def bz_path(lattice: Lattice, waypoints, n_per_segment: int) -> BzPath:
    """Sample a piecewise-linear path through the given quasi-momenta.

    Each segment contributes n_per_segment points plus the shared starting
    waypoint, so len(points) == n_segments * n_per_segment + 1.
    """
    waypoints = [np.asarray(w, dtype=float) for w in waypoints]
    if len(waypoints) < 2:
        raise ValueError("need at least two waypoints")
    if n_per_segment < 1:
        raise ValueError("n_per_segment must be >= 1")
    pts = [waypoints[0]]
    wp_idx = [0]
    for a, b in zip(waypoints[:-1], waypoints[1:]):
        ts = np.arange(1, n_per_segment + 1) / n_per_segment
        pts.extend(a + t * (b - a) for t in ts)
        wp_idx.append(len(pts) - 1)
    points = np.array(pts)
    seg = np.linalg.norm(np.diff(points, axis=0), axis=1)
    arclength = np.concatenate([[0.0], np.cumsum(seg)])
    return BzPath(points=points, arclength=arclength,
                  waypoint_index=np.array(wp_idx, dtype=int))


def apply_symmetry(op: SymmetryOp, x: np.ndarray) -> np.ndarray:
    """Affine map x -> matrix @ x + offset (x may be (..., 2))."""
    x = np.asarray(x, dtype=float)
    return x @ op.matrix.T + op.offset


def honeycomb_symmetries(lattice: Lattice) -> dict[str, SymmetryOp]:
    """The point symmetries fixing the bubble dimer.

    R0: rotation by pi about the cell centre x0 (swaps the two bubbles).
    R1/R2: rotations by -2pi/3 about the bubble centres x1/x2 (fix them).
    R3: reflection across the vertical line through x0 (swaps the bubbles).
    """
    if lattice.kind is not LatticeKind.HONEYCOMB:
        raise ValueError("dimer symmetries are defined for the honeycomb lattice")
    x0 = 0.5 * (lattice.l1 + lattice.l2)
    c, s = np.cos(-2.0 * np.pi / 3.0), np.sin(-2.0 * np.pi / 3.0)
    rot = np.array([[c, -s], [s, c]])
    ident = np.eye(2)
    return {
        "R0": SymmetryOp("R0", -ident, 2.0 * x0),
        "R1": SymmetryOp("R1", rot, lattice.l1.copy()),
        "R2": SymmetryOp("R2", rot, 2.0 * lattice.l1),
        "R3": SymmetryOp("R3", np.array([[-1.0, 0.0], [0.0, 1.0]]),
                         np.array([2.0 * x0[0], 0.0])),
    }
