"""Quasi-periodic Helmholtz Green's function for 2D lattices.

The function solves (Delta + k^2) G = sum_n delta(x - n) e^{i alpha . n}
over the lattice and has the dual-lattice representation

    G(x) = (1/|Y|) sum_{q in dual lattice} e^{i (alpha+q).x} / (k^2 - |alpha+q|^2).

Two independent evaluation strategies are provided:

* Ewald splitting (default): an exponentially convergent reciprocal sum
  (Gaussian-filtered dual sum) plus a real-space image sum built from
  exponential integrals E_n.
* Windowed spectral summation: the defining dual sum with a smooth
  radial cutoff.  Truncated sharply the sum is only conditionally
  convergent; the C-infinity window makes the truncation error decay
  superalgebraically in the cutoff radius (for x away from the source
  lattice), which is what lets it serve as an independent oracle.

The two paths share only the dual-lattice enumeration; cross-method
agreement at 1e-8 is an acceptance criterion for the package.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np
from scipy.special import exp1

from bubblebands.lattice import Lattice

EULER_GAMMA = float(np.euler_gamma)

# Gaussian / exponential-integral cut: e^{-36} ~ 2e-16 per term.
_ACUT = 36.0
# Coefficient series (k/2 eta)^{2m} / m! truncated below this.
_MTERM_TOL = 1e-18
# Dimensionless product (cutoff radius) x (distance to nearest source) that
# the windowed spectral sum needs for ~1e-10 truncation error; calibrated
# against Ewald.
_SPECTRAL_QR = 110.0
_SPECTRAL_MIN_SHELLS = 4
# the window ramps from 1 to 0 over [_WINDOW_START, 1] x cutoff radius
_WINDOW_START = 0.1
_WINDOW_ORDER = 9

_RESONANCE_TOL = 1e-12
_SINGULARITY_TOL = 1e-10


class ResonanceError(ValueError):
    """k^2 coincides with |alpha+q|^2 for a retained dual-lattice point."""


class SingularityError(ValueError):
    """Evaluation point lies (numerically) on the source lattice."""


@dataclass(frozen=True)
class GreensParams:
    """Evaluation parameters; zero/None truncations mean auto-tuned."""

    lattice: Lattice
    alpha: np.ndarray
    k: float
    method: str = "ewald"            # "ewald" | "spectral"
    spectral_radius: int = 0         # dual-lattice shells; 0 = auto
    ewald_split: float = 0.0         # splitting parameter eta; 0 = auto sqrt(pi)/L
    ewald_trunc: tuple = (0, 0)      # (real shells, reciprocal shells); 0 = auto

    def __post_init__(self):
        object.__setattr__(self, "alpha", np.asarray(self.alpha, dtype=float))
        if self.k < 0:
            raise ValueError("wavenumber k must be nonnegative")
        if self.method not in ("ewald", "spectral"):
            raise ValueError(f"unknown method {self.method!r}")


# ----------------------------------------------------------------------
# lattice enumeration helpers


def integer_disc(basis: np.ndarray, center: np.ndarray, radius: float) -> np.ndarray:
    """Integer pairs m with |center + m1 b1 + m2 b2| <= radius (rows of basis)."""
    inv = np.linalg.inv(basis.T)  # maps xy -> fractional
    cf = inv @ center
    # half-widths of the bounding box in fractional coordinates
    half = radius * np.linalg.norm(inv, axis=1)
    m1 = np.arange(int(np.floor(-cf[0] - half[0])), int(np.ceil(-cf[0] + half[0])) + 1)
    m2 = np.arange(int(np.floor(-cf[1] - half[1])), int(np.ceil(-cf[1] + half[1])) + 1)
    g1, g2 = np.meshgrid(m1, m2, indexing="ij")
    m = np.stack([g1.ravel(), g2.ravel()], axis=1)
    pts = center + m @ basis
    keep = np.einsum("ij,ij->i", pts, pts) <= radius * radius
    return m[keep]


def dual_disc(lattice: Lattice, alpha: np.ndarray, radius: float) -> np.ndarray:
    """All alpha + q (q in the dual lattice) with |alpha + q| <= radius."""
    m = integer_disc(lattice.dual_basis, np.asarray(alpha, float), radius)
    return alpha + m @ lattice.dual_basis


def first_resonance(lattice: Lattice, alpha: np.ndarray) -> float:
    """min_q |alpha + q|: the empty-lattice cutoff below which k is resonance-free."""
    b = max(np.linalg.norm(lattice.a1), np.linalg.norm(lattice.a2))
    qp = dual_disc(lattice, alpha, 3.0 * b)
    return float(np.min(np.linalg.norm(qp, axis=1)))


def reduce_points(lattice: Lattice, X: np.ndarray):
    """Split X = X_red + shift with X_red in the centred unit cell, shift in the lattice.

    By quasi-periodicity G(x) = e^{i alpha . shift} G(x_red); reducing keeps
    the real-space image sums short for points many cells away.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    frac = np.linalg.solve(lattice.direct_basis.T, X.T).T
    mshift = np.floor(frac + 0.5)
    shifts = mshift @ lattice.direct_basis
    return X - shifts, shifts


def nearest_source_distance(lattice: Lattice, X: np.ndarray) -> np.ndarray:
    """Distance from each point to the nearest lattice point."""
    Xr, _ = reduce_points(lattice, X)
    near = lattice.lattice_points(1)
    d = Xr[:, None, :] - near[None, :, :]
    return np.sqrt(np.einsum("pni,pni->pn", d, d).min(axis=1))


# ----------------------------------------------------------------------
# exponential-integral chain and smooth window


def expn_chain(x: np.ndarray, mmax: int) -> np.ndarray:
    """E_0(x) .. E_mmax(x) for x > 0, stacked on axis 0.

    E_1 from scipy, E_0 = e^-x / x, upward recurrence
    E_{j+1}(x) = (e^-x - x E_j(x)) / j.  The recurrence loses relative
    accuracy only where the terms are already negligible (x >> j).
    """
    x = np.asarray(x, dtype=float)
    out = np.empty((mmax + 1,) + x.shape)
    ex = np.exp(-x)
    out[0] = ex / x
    if mmax >= 1:
        out[1] = exp1(x)
    for j in range(1, mmax):
        out[j + 1] = (ex - x * out[j]) / j
    return out


def smooth_window(t: np.ndarray) -> np.ndarray:
    """High-order radial cutoff: 1 near 0, 0 on [1, inf).

    An order-9 smoothstep ramp over [_WINDOW_START, 1]; the truncation
    error of the windowed dual sum then decays like (radius x distance to
    the source lattice)^-10 instead of the conditional O(1) oscillation
    of a sharp cutoff.
    """
    t = np.asarray(t, dtype=float)
    w = np.zeros_like(t)
    w[t <= _WINDOW_START] = 1.0
    mid = (t > _WINDOW_START) & (t < 1.0)
    s = (t[mid] - _WINDOW_START) / (1.0 - _WINDOW_START)
    n = _WINDOW_ORDER
    step = np.zeros_like(s)
    for j in range(n + 1):
        step += comb(n + j, j) * comb(2 * n + 1, n - j) * (-s) ** j
    w[mid] = 1.0 - step * s ** (n + 1)
    return w


def _series_mmax(k: float, eta: float) -> int:
    """Truncation of the (k/2 eta)^{2m}/m! coefficient series."""
    if k == 0.0:
        return 0
    rho = (k / (2.0 * eta)) ** 2
    m, term = 0, 1.0
    while term > _MTERM_TOL and m < 60:
        m += 1
        term *= rho / m
    return m


def _series_coeffs(k: float, eta: float) -> np.ndarray:
    mmax = _series_mmax(k, eta)
    rho = (k / (2.0 * eta)) ** 2
    c = np.empty(mmax + 1)
    c[0] = 1.0
    for m in range(1, mmax + 1):
        c[m] = c[m - 1] * rho / m
    return c


# ----------------------------------------------------------------------
# Ewald evaluation


def _check_resonance(k: float, qnorm2: np.ndarray):
    den = k * k - qnorm2
    bad = np.abs(den) < _RESONANCE_TOL
    if np.any(bad):
        raise ResonanceError(
            f"k^2 within {_RESONANCE_TOL} of an empty-lattice level |alpha+q|^2 = "
            f"{qnorm2[bad][0]:.15g}")
    return den


def _ewald_recip(lattice, alpha, k, eta, radius=None):
    """Dual points, denominators and Gaussian-filtered coefficients."""
    if radius is None:
        radius = np.sqrt(max(k * k, 0.0) + 4.0 * eta * eta * _ACUT)
    qp = dual_disc(lattice, alpha, radius)
    qnorm2 = np.einsum("ij,ij->i", qp, qp)
    den = _check_resonance(k, qnorm2)
    coeff = np.exp((k * k - qnorm2) / (4.0 * eta * eta)) / den
    return qp, coeff


def ewald_green_many(lattice: Lattice, alpha, k: float, X, *,
                     eta: float | None = None, grad: bool = False,
                     recip_radius: float | None = None,
                     real_radius: float | None = None):
    """Ewald evaluation of G (and optionally its gradient) at points X (P,2)."""
    alpha = np.asarray(alpha, dtype=float)
    if eta is None or eta == 0.0:
        eta = np.sqrt(np.pi) / lattice.L
    Xr, shifts = reduce_points(lattice, X)
    phase = np.exp(1j * (shifts @ alpha))

    qp, coeff = _ewald_recip(lattice, alpha, k, eta, recip_radius)
    ph = np.exp(1j * (Xr @ qp.T))                      # (P, nq)
    g = (ph @ coeff) / lattice.cell_area
    if grad:
        gx = (ph @ (coeff * qp[:, 0])) * (1j / lattice.cell_area)
        gy = (ph @ (coeff * qp[:, 1])) * (1j / lattice.cell_area)

    rcut = real_radius if real_radius else np.sqrt(_ACUT) / eta
    cm = _series_coeffs(k, eta)
    mmax = len(cm) - 1
    images = integer_disc(lattice.direct_basis, np.zeros(2),
                          rcut + float(np.abs(Xr).max(initial=0.0)) * 2.0)
    npts = images @ lattice.direct_basis
    iphase = np.exp(1j * (npts @ alpha))               # (ni,)
    D = Xr[:, None, :] - npts[None, :, :]              # (P, ni, 2)
    r2 = np.einsum("pni,pni->pn", D, D)
    if np.any(r2 < (_SINGULARITY_TOL * lattice.L) ** 2):
        raise SingularityError("evaluation point on the source lattice")
    mask = r2 <= rcut * rcut
    u = eta * eta * r2[mask]
    if u.size:
        # E_0 .. E_{mmax+1}; G uses E_{m+1}, the gradient uses E_m
        E = expn_chain(u, mmax + 1)
        gser = np.tensordot(cm, E[1:mmax + 2], axes=(0, 0))
        vals = np.zeros_like(r2, dtype=complex)
        vals[mask] = gser
        g = g - (vals @ iphase) / (4.0 * np.pi)
        if grad:
            dser = np.tensordot(cm, E[0:mmax + 1], axes=(0, 0))
            dvals = np.zeros_like(r2, dtype=complex)
            dvals[mask] = dser
            w = dvals * iphase[None, :]
            gx = gx + (eta * eta / (2.0 * np.pi)) * np.einsum("pn,pn->p", w, D[:, :, 0])
            gy = gy + (eta * eta / (2.0 * np.pi)) * np.einsum("pn,pn->p", w, D[:, :, 1])

    if grad:
        return phase * g, phase[:, None] * np.stack([gx, gy], axis=1)
    return phase * g


# ----------------------------------------------------------------------
# windowed spectral evaluation


def _spectral_radius(lattice: Lattice, rmin: float, shells: int) -> float:
    bnn = min(np.linalg.norm(lattice.a1), np.linalg.norm(lattice.a2))
    if shells and shells > 0:
        return shells * bnn
    auto = max(_SPECTRAL_MIN_SHELLS * bnn, _SPECTRAL_QR / max(rmin, 1e-3 * lattice.L))
    return auto


def spectral_green_many(lattice: Lattice, alpha, k: float, X, *,
                        shells: int = 0, grad: bool = False,
                        radius: float | None = None):
    """Windowed dual-lattice sum for G (and optionally its gradient)."""
    alpha = np.asarray(alpha, dtype=float)
    Xr, shifts = reduce_points(lattice, X)
    phase = np.exp(1j * (shifts @ alpha))
    rmin = float(nearest_source_distance(lattice, Xr).min())
    if rmin < _SINGULARITY_TOL * lattice.L:
        raise SingularityError("evaluation point on the source lattice")
    if radius is None:
        radius = _spectral_radius(lattice, rmin, shells)
    qp = dual_disc(lattice, alpha, radius)
    qnorm2 = np.einsum("ij,ij->i", qp, qp)
    den = _check_resonance(k, qnorm2)
    w = smooth_window(np.sqrt(qnorm2) / radius)
    coeff = w / den
    ph = np.exp(1j * (Xr @ qp.T))
    g = (ph @ coeff) / lattice.cell_area
    if not grad:
        return phase * g
    gx = (ph @ (coeff * qp[:, 0])) * (1j / lattice.cell_area)
    gy = (ph @ (coeff * qp[:, 1])) * (1j / lattice.cell_area)
    return phase * g, phase[:, None] * np.stack([gx, gy], axis=1)


# ----------------------------------------------------------------------
# public API


def green(params: GreensParams, x) -> complex:
    """G^{alpha,k}(x) by the configured method."""
    return complex(green_many(params, np.atleast_2d(x))[0])


def green_many(params: GreensParams, X) -> np.ndarray:
    if params.method == "ewald":
        return ewald_green_many(params.lattice, params.alpha, params.k, X,
                                eta=params.ewald_split or None,
                                real_radius=_trunc_real(params),
                                recip_radius=_trunc_recip(params))
    return spectral_green_many(params.lattice, params.alpha, params.k, X,
                               shells=params.spectral_radius)


def green_grad(params: GreensParams, x) -> np.ndarray:
    """Gradient of G^{alpha,k} at x, shape (2,) complex."""
    if params.method == "ewald":
        _, dg = ewald_green_many(params.lattice, params.alpha, params.k,
                                 np.atleast_2d(x), eta=params.ewald_split or None,
                                 grad=True,
                                 real_radius=_trunc_real(params),
                                 recip_radius=_trunc_recip(params))
    else:
        _, dg = spectral_green_many(params.lattice, params.alpha, params.k,
                                    np.atleast_2d(x), shells=params.spectral_radius,
                                    grad=True)
    return dg[0]


def _trunc_real(params: GreensParams) -> float | None:
    n = params.ewald_trunc[0] if params.ewald_trunc else 0
    if not n:
        return None
    lnn = min(np.linalg.norm(params.lattice.l1), np.linalg.norm(params.lattice.l2))
    return n * lnn


def _trunc_recip(params: GreensParams) -> float | None:
    n = params.ewald_trunc[1] if len(params.ewald_trunc) > 1 else 0
    if not n:
        return None
    bnn = min(np.linalg.norm(params.lattice.a1), np.linalg.norm(params.lattice.a2))
    return n * bnn


def green_static_correction(lattice: Lattice, alpha, x, *, shells: int = 0) -> complex:
    """First frequency correction G_1: (G^{alpha,k} - G^{alpha,0})/k^2 -> G_1 as k -> 0.

    Dual sum -(1/|Y|) sum_q e^{i(alpha+q).x} / |alpha+q|^4, evaluated with
    the same smooth window as the spectral method.  Requires alpha != 0
    (the q = 0 denominator vanishes there).
    """
    alpha = np.asarray(alpha, dtype=float)
    if np.linalg.norm(alpha) == 0.0:
        raise ValueError("alpha = 0 is rejected: divergent q = 0 term")
    X = np.atleast_2d(x)
    Xr, shifts = reduce_points(lattice, X)
    phase = np.exp(1j * (shifts @ alpha))
    rmin = float(nearest_source_distance(lattice, Xr).min())
    radius = _spectral_radius(lattice, rmin, shells)
    qp = dual_disc(lattice, alpha, radius)
    qnorm2 = np.einsum("ij,ij->i", qp, qp)
    w = smooth_window(np.sqrt(qnorm2) / radius)
    coeff = -w / qnorm2 ** 2
    vals = (np.exp(1j * (Xr @ qp.T)) @ coeff) / lattice.cell_area
    return complex((phase * vals)[0])


# ----------------------------------------------------------------------
# coincidence limits of the lattice-regular part (used by the Nystrom
# assembly for diagonal kernel entries)


def regular_part_self(lattice: Lattice, alpha, k: float, *,
                      eta: float | None = None):
    """(G_reg(0), grad G_reg(0)) where G_reg = G - free-space kernel.

    The free-space kernel is -(i/4) H0^(1)(k|x|) for k > 0 and
    (1/2 pi) ln|x| for k = 0; G_reg extends analytically to 0 and these
    coincidence values follow from the Ewald split in closed form.
    """
    alpha = np.asarray(alpha, dtype=float)
    if eta is None or eta == 0.0:
        eta = np.sqrt(np.pi) / lattice.L

    qp, coeff = _ewald_recip(lattice, alpha, k, eta)
    g_spec = coeff.sum() / lattice.cell_area
    dg_spec = 1j * np.array([(coeff * qp[:, 0]).sum(),
                             (coeff * qp[:, 1]).sum()]) / lattice.cell_area

    rcut = np.sqrt(_ACUT) / eta
    cm = _series_coeffs(k, eta)
    mmax = len(cm) - 1
    images = integer_disc(lattice.direct_basis, np.zeros(2), rcut)
    npts = images @ lattice.direct_basis
    keep = np.einsum("ij,ij->i", npts, npts) > (_SINGULARITY_TOL * lattice.L) ** 2
    npts = npts[keep]
    iphase = np.exp(1j * (npts @ alpha))
    u = eta * eta * np.einsum("ij,ij->i", npts, npts)
    E = expn_chain(u, mmax + 1)
    gser = np.tensordot(cm, E[1:mmax + 2], axes=(0, 0))
    g_spat = -(gser @ iphase) / (4.0 * np.pi)
    dser = np.tensordot(cm, E[0:mmax + 1], axes=(0, 0))
    w = dser * iphase
    dg_spat = -(eta * eta / (2.0 * np.pi)) * np.array([w @ npts[:, 0], w @ npts[:, 1]])

    if k == 0.0:
        const = (EULER_GAMMA + 2.0 * np.log(eta)) / (4.0 * np.pi)
    else:
        tail = sum(cm[m] / m for m in range(1, mmax + 1))
        const = (-EULER_GAMMA / (4.0 * np.pi)
                 + np.log(2.0 * eta / k) / (2.0 * np.pi)
                 + 0.25j
                 - tail / (4.0 * np.pi))
    return g_spec + g_spat + const, dg_spec + dg_spat
