"""Dense matrix realizations of the quasi-periodic layer operators.

Assembles the single layer operator S_D^{alpha,k}, the Neumann-Poincare
operator (K_D^{-alpha,k})* and the 2x2 block operator

    A_delta(alpha, omega) = [[ S^{alpha,k_b},        -S^{alpha,k}          ],
                             [ -I/2 + K*^{alpha,k_b}, -delta (I/2 + K*^{alpha,k}) ]]

in the Nystrom basis of `boundary`.  The quasi-periodic kernel is split
into the free-space Helmholtz kernel (log-singular, handled by the
periodic-log quadrature on each circle) plus a lattice remainder that is
analytic near coincidence and integrated by the plain trapezoid rule.

An `AssemblyCache` holds everything that depends on (basis, alpha) but
not on omega, so frequency sweeps at fixed quasi-momentum reduce to a
couple of small matrix products per omega.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.special import hankel1, j0, j1

from bubblebands import greens
from bubblebands.boundary import BoundaryBasis
from bubblebands.greens import (
    EULER_GAMMA,
    SingularityError,
    _ACUT,
    _check_resonance,
    _series_coeffs,
    expn_chain,
    integer_disc,
    reduce_points,
    regular_part_self,
)


@dataclass(frozen=True)
class Material:
    """Bulk parameters; the bubble is the high-contrast phase (delta << 1)."""

    rho: float
    kappa: float
    rho_b: float
    kappa_b: float

    def __post_init__(self):
        for name in ("rho", "kappa", "rho_b", "kappa_b"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"density contrast delta = {self.delta} outside (0, 1)")

    @property
    def delta(self) -> float:
        return self.rho_b / self.rho

    @property
    def v(self) -> float:
        return float(np.sqrt(self.kappa / self.rho))

    @property
    def v_b(self) -> float:
        return float(np.sqrt(self.kappa_b / self.rho_b))


def default_material() -> Material:
    """rho = kappa = 1000, rho_b = kappa_b = 1: delta = 1e-3, v = v_b = 1."""
    return Material(1000.0, 1000.0, 1.0, 1.0)


class LayerKind(str, enum.Enum):
    SINGLE_LAYER = "single_layer"
    NEUMANN_POINCARE = "neumann_poincare"


@dataclass(frozen=True)
class LayerOperator:
    matrix: np.ndarray
    kind: LayerKind
    alpha: np.ndarray
    k: float

    def cond(self) -> float:
        return float(np.linalg.cond(self.matrix))


@dataclass(frozen=True)
class BlockOperator:
    matrix: np.ndarray  # (2n, 2n)
    delta: float
    omega: float
    v: float
    v_b: float
    alpha: np.ndarray

    @property
    def n(self) -> int:
        return self.matrix.shape[0] // 2


def _log_quadrature_weights(n: int) -> np.ndarray:
    """Kress weights R_ij for int log(4 sin^2((t-s)/2)) f(s) ds on n nodes.

    Exact for trigonometric polynomials of degree < n/2 against the log
    kernel; n must be even.
    """
    d = 2.0 * np.pi * np.arange(n) / n
    m = np.arange(1, n // 2)
    row = -(4.0 * np.pi / n) * (np.cos(np.outer(d, m)) / m).sum(axis=1) \
        - (4.0 * np.pi / n ** 2) * np.cos((n // 2) * d)
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    return row[idx]


class AssemblyCache:
    """Frequency-independent tables for one (basis, alpha) pair.

    Immutable after construction; safe to share across threads.
    """

    def __init__(self, basis: BoundaryBasis, alpha, *, k_max: float = 2.0,
                 eta: float | None = None):
        lat = basis.dimer.lattice
        self.basis = basis
        self.alpha = np.asarray(alpha, dtype=float)
        self.k_max = float(k_max)
        self.eta = float(eta) if eta else float(np.sqrt(np.pi) / lat.L)
        self.lattice = lat

        nodes, normals = basis.nodes, basis.normals
        n = basis.n_nodes
        eta2 = self.eta ** 2

        # reciprocal side: Gaussian-filtered dual sum
        radius = np.sqrt(self.k_max ** 2 + 4.0 * eta2 * _ACUT)
        self.qp = greens.dual_disc(lat, self.alpha, radius)
        self.qnorm2 = np.einsum("ij,ij->i", self.qp, self.qp)
        self.ph = np.exp(1j * (nodes @ self.qp.T))          # (n, nq)
        self.phc = self.ph.conj()
        self.phN = 1j * (normals @ self.qp.T) * self.ph     # i (q'.nu_i) e^{i q'.x_i}

        # real side: image sums of exponential integrals, self-image excluded
        # exactly at coincident nodes
        self.mser = len(_series_coeffs(self.k_max, self.eta)) - 1
        rcut = np.sqrt(_ACUT) / self.eta
        D = nodes[:, None, :] - nodes[None, :, :]           # (n, n, 2)
        dmax = float(np.linalg.norm(D.reshape(-1, 2), axis=1).max())
        imgs = integer_disc(lat.direct_basis, np.zeros(2), dmax + rcut)
        npts = imgs @ lat.direct_basis
        Tg = np.zeros((self.mser + 1, n, n), dtype=complex)
        Tk = np.zeros((self.mser + 1, n, n), dtype=complex)
        for p, ip in zip(npts, np.exp(1j * (npts @ self.alpha))):
            Z = D - p
            u = eta2 * np.einsum("ijk,ijk->ij", Z, Z)
            mask = (u <= _ACUT) & (u > 1e-24)
            if not mask.any():
                continue
            E = expn_chain(u[mask], self.mser + 1)
            nuZ = np.einsum("ik,ijk->ij", normals, Z)[mask]
            for m in range(self.mser + 1):
                Tg[m][mask] += ip * E[m + 1]
                Tk[m][mask] += ip * nuZ * E[m]
        self.Tg, self.Tk = Tg, Tk

        # per-circle structures for the singular correction
        nq = basis.dimer.n_quad
        dth = basis.thetas[:nq][:, None] - basis.thetas[:nq][None, :]
        self.abs_s = np.abs(np.sin(0.5 * dth))
        R = basis.dimer.radius
        self.chord = 2.0 * R * self.abs_s
        with np.errstate(divide="ignore"):
            L = np.log(4.0 * np.sin(0.5 * dth) ** 2)
        np.fill_diagonal(L, 0.0)
        self.logmat = L
        self.kress = _log_quadrature_weights(nq)

    # -- frequency-dependent pieces -----------------------------------

    def _coeffs(self, k: float):
        if k > self.k_max:
            raise ValueError(f"k = {k} exceeds cache k_max = {self.k_max}")
        den = _check_resonance(k, self.qnorm2)
        cq = np.exp((k * k - self.qnorm2) / (4.0 * self.eta ** 2)) / den
        cm = np.zeros(self.mser + 1)
        got = _series_coeffs(k, self.eta)
        cm[:len(got)] = got
        return cq, cm

    def green_matrix(self, k: float) -> np.ndarray:
        """G(x_i - y_j) for all node pairs; diagonal holds the n != 0 image part."""
        cq, cm = self._coeffs(k)
        spec = (self.ph * cq) @ self.phc.T / self.lattice.cell_area
        spat = -np.tensordot(cm, self.Tg, axes=(0, 0)) / (4.0 * np.pi)
        return spec + spat

    def green_nu_matrix(self, k: float) -> np.ndarray:
        """nu_i . grad G(x_i - y_j); diagonal holds the n != 0 image part."""
        cq, cm = self._coeffs(k)
        spec = (self.phN * cq) @ self.phc.T / self.lattice.cell_area
        spat = (self.eta ** 2 / (2.0 * np.pi)) * np.tensordot(cm, self.Tk, axes=(0, 0))
        return spec + spat

    def single_layer(self, k: float) -> np.ndarray:
        S = self.green_matrix(k) * self.basis.weights[None, :]
        self._correct_single(S, k)
        return S

    def neumann_poincare(self, k: float) -> np.ndarray:
        K = self.green_nu_matrix(k) * self.basis.weights[None, :]
        self._correct_np(K, k)
        return K

    def _correct_single(self, S: np.ndarray, k: float):
        """Replace same-circle blocks with the log-corrected quadrature."""
        basis = self.basis
        R = basis.dimer.radius
        nq = basis.dimer.n_quad
        g0, _ = regular_part_self(self.lattice, self.alpha, k, eta=self.eta)
        Gmat = self.green_matrix(k)
        off = ~np.eye(nq, dtype=bool)
        for j in range(1, basis.dimer.n_bubbles + 1):
            sl = basis.circle_slice(j)
            Gblk = Gmat[sl, sl]
            if k == 0.0:
                M1 = np.full((nq, nq), R / (4.0 * np.pi))
                M2 = np.full((nq, nq), R * np.log(R) / (2.0 * np.pi), dtype=complex)
                free = np.zeros((nq, nq), dtype=complex)
                free[off] = np.log(self.chord[off]) / (2.0 * np.pi)
            else:
                M1 = (R / (4.0 * np.pi)) * j0(k * self.chord)
                free = np.zeros((nq, nq), dtype=complex)
                free[off] = -0.25j * hankel1(0, k * self.chord[off])
                M2 = free * R - M1 * self.logmat
                np.fill_diagonal(M2, R * (-0.25j + (np.log(0.5 * k * R) + EULER_GAMMA)
                                          / (2.0 * np.pi)))
            K2reg = (Gblk - free) * R
            np.fill_diagonal(K2reg, g0 * R)
            S[sl, sl] = self.kress * M1 + (2.0 * np.pi / nq) * (M2 + K2reg)

    def _correct_np(self, K: np.ndarray, k: float):
        basis = self.basis
        R = basis.dimer.radius
        nq = basis.dimer.n_quad
        _, dg0 = regular_part_self(self.lattice, self.alpha, k, eta=self.eta)
        Kmat = self.green_nu_matrix(k)
        off = ~np.eye(nq, dtype=bool)
        for j in range(1, basis.dimer.n_bubbles + 1):
            sl = basis.circle_slice(j)
            Kblk = Kmat[sl, sl]
            nu_dg0 = basis.normals[sl] @ dg0
            if k == 0.0:
                K1 = np.zeros((nq, nq))
                K2 = np.full((nq, nq), 1.0 / (4.0 * np.pi), dtype=complex)
                nufree = np.full((nq, nq), 1.0 / (4.0 * np.pi * R), dtype=complex)
            else:
                K1 = -(k / (4.0 * np.pi)) * j1(k * self.chord) * self.abs_s * R
                nufree = np.zeros((nq, nq), dtype=complex)
                nufree[off] = (0.25j * k) * hankel1(1, k * self.chord[off]) * self.abs_s[off]
                K2 = nufree * R - K1 * self.logmat
                np.fill_diagonal(K2, 1.0 / (4.0 * np.pi))
            K2reg = (Kblk - nufree) * R
            np.fill_diagonal(K2reg, nu_dg0 * R)
            K[sl, sl] = self.kress * K1 + (2.0 * np.pi / nq) * (K2 + K2reg)

    def block(self, material: Material, omega: float) -> BlockOperator:
        """The block operator A_delta at (alpha, omega)."""
        if omega < 0:
            raise ValueError("omega must be nonnegative")
        k = omega / material.v
        kb = omega / material.v_b
        Sb = self.single_layer(kb)
        S = Sb if k == kb else self.single_layer(k)
        Kb = self.neumann_poincare(kb)
        K = Kb if k == kb else self.neumann_poincare(k)
        n = self.basis.n_nodes
        eye = np.eye(n)
        A = np.empty((2 * n, 2 * n), dtype=complex)
        A[:n, :n] = Sb
        A[:n, n:] = -S
        A[n:, :n] = -0.5 * eye + Kb
        A[n:, n:] = -material.delta * (0.5 * eye + K)
        return BlockOperator(matrix=A, delta=material.delta, omega=float(omega),
                             v=material.v, v_b=material.v_b, alpha=self.alpha)


# ----------------------------------------------------------------------
# module-level assembly entry points


def assemble_single_layer(basis: BoundaryBasis, alpha, k: float, *,
                          cache: AssemblyCache | None = None) -> LayerOperator:
    cache = cache or AssemblyCache(basis, alpha, k_max=max(2.0, 1.5 * k))
    return LayerOperator(matrix=cache.single_layer(k), kind=LayerKind.SINGLE_LAYER,
                         alpha=np.asarray(alpha, float), k=float(k))


def assemble_np(basis: BoundaryBasis, alpha, k: float, *,
                cache: AssemblyCache | None = None) -> LayerOperator:
    cache = cache or AssemblyCache(basis, alpha, k_max=max(2.0, 1.5 * k))
    return LayerOperator(matrix=cache.neumann_poincare(k),
                         kind=LayerKind.NEUMANN_POINCARE,
                         alpha=np.asarray(alpha, float), k=float(k))


def assemble_A(basis: BoundaryBasis, material: Material, alpha, omega: float, *,
               cache: AssemblyCache | None = None) -> BlockOperator:
    cache = cache or AssemblyCache(basis, alpha,
                                   k_max=max(2.0, 1.5 * omega / min(material.v, material.v_b)))
    return cache.block(material, omega)


def equilibrate(matrix: np.ndarray):
    """Scale each row to unit max-norm; returns (scaled matrix, scales)."""
    scale = np.abs(matrix).max(axis=1)
    scale[scale == 0.0] = 1.0
    return matrix / scale[:, None], scale


def sigma_min(block: BlockOperator) -> float:
    """Smallest singular value of the row-equilibrated block matrix."""
    eq, _ = equilibrate(block.matrix)
    return float(np.linalg.svd(eq, compute_uv=False)[-1])


def sigma_extents(block: BlockOperator):
    """(smallest, largest) singular values after row equilibration."""
    eq, _ = equilibrate(block.matrix)
    s = np.linalg.svd(eq, compute_uv=False)
    return float(s[-1]), float(s[0])


def equilibrated_svd(block: BlockOperator):
    """Full SVD of the row-equilibrated block matrix: (s, Vh, row scales)."""
    eq, scale = equilibrate(block.matrix)
    _, s, Vh = np.linalg.svd(eq)
    return s, Vh, scale


# ----------------------------------------------------------------------
# off-boundary evaluation of the single layer potential


def single_layer_potential(basis: BoundaryBasis, alpha, k: float,
                           density: np.ndarray, points, *,
                           eta: float | None = None,
                           chunk: int = 4096) -> np.ndarray:
    """S_D^{alpha,k}[density](x) at arbitrary points (quasi-periodic in x).

    Plain quadrature over the boundary nodes; spectrally accurate away
    from the boundary.  Points within ~1e-10 of a source node raise
    SingularityError; callers that sample near the boundary nudge first.
    """
    lat = basis.dimer.lattice
    alpha = np.asarray(alpha, dtype=float)
    eta = float(eta) if eta else float(np.sqrt(np.pi) / lat.L)
    eta2 = eta * eta
    X = np.atleast_2d(np.asarray(points, dtype=float))
    Xr, shifts = reduce_points(lat, X)
    phase = np.exp(1j * (shifts @ alpha))
    wphi = basis.weights * np.asarray(density)

    radius = np.sqrt(k * k + 4.0 * eta2 * _ACUT)
    qp = greens.dual_disc(lat, alpha, radius)
    qnorm2 = np.einsum("ij,ij->i", qp, qp)
    den = _check_resonance(k, qnorm2)
    cq = np.exp((k * k - qnorm2) / (4.0 * eta2)) / den
    moments = cq * (np.exp(-1j * (basis.nodes @ qp.T)).T @ wphi)

    cm = _series_coeffs(k, eta)
    mmax = len(cm) - 1
    rcut = np.sqrt(_ACUT) / eta
    span = float(np.abs(Xr).max(initial=0.0) + np.abs(basis.nodes).max())
    imgs = integer_disc(lat.direct_basis, np.zeros(2), span + rcut)
    npts = imgs @ lat.direct_basis
    iphase = np.exp(1j * (npts @ alpha))

    out = np.empty(X.shape[0], dtype=complex)
    for lo in range(0, X.shape[0], chunk):
        xs = Xr[lo:lo + chunk]
        vals = (np.exp(1j * (xs @ qp.T)) @ moments) / lat.cell_area
        spat = np.zeros(xs.shape[0], dtype=complex)
        for p, ip in zip(npts, iphase):
            Z = xs[:, None, :] - (basis.nodes + p)[None, :, :]
            u = eta2 * np.einsum("ijk,ijk->ij", Z, Z)
            mask = u <= _ACUT
            if not mask.any():
                continue
            um = u[mask]
            if np.any(um < 1e-24):
                raise SingularityError("field point coincides with a boundary node")
            E = expn_chain(um, mmax + 1)
            ser = np.zeros_like(u)
            ser[mask] = np.tensordot(cm, E[1:], axes=(0, 0))
            spat += ip * (ser @ wphi)
        out[lo:lo + chunk] = vals - spat / (4.0 * np.pi)
    return phase * out
