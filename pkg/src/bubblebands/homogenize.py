"""Effective 2x2 Dirac model and envelope spatial-frequency laws.

Near the cone frequency omega* the macroscopic envelopes obey a Dirac
system whose plane-wave eigenstructure gives the near-zero-index law for
the honeycomb lattice: an envelope at frequency shift epsilon oscillates
at spatial frequency

    f = |epsilon| / (|c| lambda0 sqrt(delta))   (cycles per 2 pi length),

i.e. linearly in epsilon through zero.  The square lattice (quadratic
band apex at M) instead obeys f ~ sqrt(epsilon), with no modes above the
apex.  Both laws are measured here by inverting the full multipole
dispersion and, independently, by demodulating field line cuts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from bubblebands.fields import eval_field_points, kernel_densities
from bubblebands.lattice import LatticeKind, dirac_point
from bubblebands.spectral import DispersionSolver


class NoModeError(ValueError):
    """No Bloch mode exists at the requested frequency shift (bandgap side)."""


@dataclass(frozen=True)
class DiracSystem:
    """lambda0 [[0, c (a1 + i a2)], [conj(c) (a1 - i a2), 0]] acting on (A, B)."""

    lambda0: float
    c: complex

    def matrix(self, alpha_tilde) -> np.ndarray:
        a1, a2 = np.asarray(alpha_tilde, float)
        return self.lambda0 * np.array([
            [0.0, self.c * (a1 + 1j * a2)],
            [np.conj(self.c) * (a1 - 1j * a2), 0.0]])


@dataclass(frozen=True)
class DiracEigenpairs:
    values: np.ndarray    # (- branch, + branch)
    vectors: np.ndarray   # columns matching values
    degenerate: bool


def dirac_eigenpairs(system: DiracSystem, alpha_tilde) -> DiracEigenpairs:
    """Closed-form eigenpairs +-lambda0 |c| |alpha_tilde| of the Dirac matrix."""
    at = np.asarray(alpha_tilde, float)
    mag = float(np.hypot(at[0], at[1]))
    if mag == 0.0:
        return DiracEigenpairs(values=np.zeros(2), vectors=np.eye(2, dtype=complex),
                               degenerate=True)
    lam = system.lambda0 * abs(system.c) * mag
    phase = (system.c / abs(system.c)) * (at[0] + 1j * at[1]) / mag
    vminus = np.array([-phase, 1.0]) / np.sqrt(2.0)
    vplus = np.array([phase, 1.0]) / np.sqrt(2.0)
    return DiracEigenpairs(values=np.array([-lam, lam]),
                           vectors=np.stack([vminus, vplus], axis=1),
                           degenerate=False)


def effective_wavenumber(beta: float, system: DiracSystem) -> float:
    """Envelope Helmholtz wavenumber |beta| / (|c| lambda0); -> 0 as beta -> 0."""
    return abs(beta) / (abs(system.c) * system.lambda0)


# ----------------------------------------------------------------------
# dispersion inversion


def envelope_frequency_dispersion(solver: DispersionSolver, epsilon: float,
                                  direction, *, slope_hint: float | None = None,
                                  t_max_rel: float = 0.35,
                                  tol: float = 1e-11) -> float:
    """Solve omega_band(alpha* + t u) = omega* + epsilon for t >= 0; f = t / 2 pi.

    The band is the upper cone branch for epsilon > 0 and the lower one
    for epsilon < 0 (the only branch for the square lattice, whose first
    band peaks at alpha*; positive shifts raise NoModeError there).

    g(t) = omega_band(t) - (omega* + epsilon) starts at -epsilon (the band
    touches omega* at t = 0) and the crossing is bracketed by marching a
    geometric ladder outward, which is robust for both the conical
    (honeycomb) and quadratic (square) apex shapes.
    """
    lat = solver.basis.dimer.lattice
    astar = dirac_point(lat)
    u = np.asarray(direction, float)
    u = u / np.linalg.norm(u)
    if epsilon == 0.0:
        return 0.0
    om_star = solver.dirac_frequency()
    nb = solver.basis.dimer.n_bubbles
    if nb == 1:
        if epsilon > 0.0:
            raise NoModeError("square lattice: bandgap above the apex frequency")
        branch = 0
    else:
        branch = 1 if epsilon > 0.0 else 0
    target = om_star + epsilon

    def g(t):
        if t == 0.0:
            return -epsilon  # the band touches omega* at the apex
        return solver.band(astar + t * u, branch) - target

    t_max = t_max_rel * np.linalg.norm(astar)
    sign0 = -np.sign(epsilon)
    t = abs(epsilon) / slope_hint if slope_hint else 0.02 * np.linalg.norm(astar)
    t = min(max(t, 1e-4 * t_max), 0.6 * t_max)
    t_lo = 0.0
    bracket = None
    for _ in range(28):
        gt = g(t)
        if np.sign(gt) != sign0 and gt != 0.0:
            bracket = (t_lo, t)
            break
        t_lo = t
        if t >= t_max:
            break
        t = min(t * 1.7, t_max)
    if bracket is None:
        raise NoModeError(
            f"no band crossing omega* + {epsilon:+g} within the search window")
    t_root = brentq(g, bracket[0], bracket[1], xtol=tol)
    return float(t_root / (2.0 * np.pi))


# ----------------------------------------------------------------------
# FFT-based envelope frequency


def envelope_frequency_fft(values: np.ndarray, positions: np.ndarray,
                           cell_length: float, alpha_star) -> float:
    """Dominant envelope frequency of a field line cut (cycles per length).

    Demodulates the cell-scale structure by averaging u e^{-i alpha* . x}
    over each lattice period, then locates the FFT peak of the resulting
    cell series with parabolic interpolation.  Returns 0.0 when no peak
    rises above 3x the spectral median (constant envelope).
    """
    values = np.asarray(values)
    pts = np.atleast_2d(np.asarray(positions, float))
    astar = np.asarray(alpha_star, float)
    x = pts[:, 0]
    demod = values * np.exp(-1j * (pts @ astar))
    n_cells = int(round((x.max() - x.min() + (x[1] - x[0])) / cell_length))
    if n_cells < 8:
        raise ValueError("need at least 8 cells for envelope extraction")
    cell_of = np.floor((x - x.min()) / cell_length).astype(int)
    cell_of = np.clip(cell_of, 0, n_cells - 1)
    series = np.zeros(n_cells, dtype=complex)
    counts = np.zeros(n_cells)
    np.add.at(series, cell_of, demod)
    np.add.at(counts, cell_of, 1.0)
    series /= np.maximum(counts, 1.0)

    spec = np.abs(np.fft.fft(series))
    j = int(np.argmax(spec))
    med = float(np.median(spec))
    if j == 0 or spec[j] < 3.0 * med:
        return 0.0
    # parabolic refinement on the log magnitude around the peak
    lm, l0, lp = (np.log(spec[(j - 1) % n_cells] + 1e-300),
                  np.log(spec[j] + 1e-300),
                  np.log(spec[(j + 1) % n_cells] + 1e-300))
    denom = lm - 2.0 * l0 + lp
    shift = 0.5 * (lm - lp) / denom if denom != 0 else 0.0
    jf = j + shift
    if jf > n_cells / 2:
        jf = n_cells - jf  # negative-frequency branch
    return float(jf / (n_cells * cell_length))


def sample_line(solver: DispersionSolver, densities, *, n_cells: int = 96,
                samples_per_cell: int = 8, y: float = 0.0):
    """Field samples along the x-axis spanning n_cells lattice periods."""
    lat = solver.basis.dimer.lattice
    period = float((lat.l1 + lat.l2)[0]) if lat.kind is LatticeKind.HONEYCOMB \
        else float(lat.L)
    n = n_cells * samples_per_cell
    xs = (np.arange(n) + 0.5) * period / samples_per_cell
    pts = np.stack([xs, np.full(n, y)], axis=1)
    fg = eval_field_points(solver.basis, solver.material, densities, pts)
    return pts, fg.values, period


# ----------------------------------------------------------------------
# f(epsilon) curves


@dataclass(frozen=True)
class EnvelopeFit:
    model: str           # "linear" | "sqrt"
    coefficient: float   # slope (linear: f vs |eps|) or a in f = a sqrt(eps)
    intercept: float
    r2: float


@dataclass(frozen=True)
class EnvelopeCurve:
    epsilons: np.ndarray
    f: np.ndarray              # dispersion-inversion values
    f_fft: np.ndarray          # NaN where not computed
    method: str
    fit: EnvelopeFit
    omega_star: float


def _linear_fit(x, y):
    A = np.stack([x, np.ones_like(x)], axis=1)
    (a, b), *_ = np.linalg.lstsq(A, y, rcond=None)
    yhat = a * x + b
    ss = np.sum((y - np.mean(y)) ** 2)
    r2 = 1.0 - np.sum((y - yhat) ** 2) / ss if ss > 0 else 1.0
    return float(a), float(b), float(r2)


def f_curve(solver: DispersionSolver, epsilons, *, direction=(1.0, 0.0),
            fft_epsilons=(), n_cells: int = 96,
            samples_per_cell: int = 8) -> EnvelopeCurve:
    """Envelope frequency law over a grid of frequency shifts.

    Honeycomb: epsilons are signed shifts omega - omega*; the fitted model
    is linear through (0, 0).  Square: epsilons are positive depths below
    the apex (omega = omega* - epsilon); the fitted model is f = a sqrt(eps).
    Shifts on a bandgap side are skipped (recorded as NaN).
    """
    lat = solver.basis.dimer.lattice
    kind = lat.kind
    eps = np.asarray(epsilons, float)
    om_star = solver.dirac_frequency()
    astar = dirac_point(lat)
    u = np.asarray(direction, float)
    u = u / np.linalg.norm(u)

    fvals = np.full(eps.size, np.nan)
    ffft = np.full(eps.size, np.nan)
    fft_set = {round(float(e), 15) for e in fft_epsilons}
    slope_hint = None
    for i, e in enumerate(eps):
        shift = float(e) if kind is LatticeKind.HONEYCOMB else -float(e)
        try:
            fvals[i] = envelope_frequency_dispersion(solver, shift, u,
                                                     slope_hint=slope_hint)
        except NoModeError:
            continue
        if fvals[i] > 0 and slope_hint is None:
            slope_hint = abs(shift) / (2.0 * np.pi * fvals[i])
        if round(float(e), 15) in fft_set and fvals[i] > 0:
            t = fvals[i] * 2.0 * np.pi
            alpha = astar + t * u
            branch = (1 if shift > 0 else 0) if kind is LatticeKind.HONEYCOMB else 0
            om = solver.band(alpha, branch)
            dens = kernel_densities(solver.basis, solver.material, alpha, om)
            pts, vals, period = sample_line(solver, dens, n_cells=n_cells,
                                            samples_per_cell=samples_per_cell)
            ffft[i] = envelope_frequency_fft(vals, pts, period, astar)

    good = ~np.isnan(fvals)
    if kind is LatticeKind.HONEYCOMB:
        a, b, r2 = _linear_fit(np.abs(eps[good]), fvals[good])
        fit = EnvelopeFit(model="linear", coefficient=a, intercept=b, r2=r2)
    else:
        pos = good & (eps > 0)
        x = np.sqrt(eps[pos])
        y = fvals[pos]
        a = float(x @ y / (x @ x))
        ss = np.sum((y - np.mean(y)) ** 2)
        r2 = float(1.0 - np.sum((y - a * x) ** 2) / ss) if ss > 0 else 1.0
        fit = EnvelopeFit(model="sqrt", coefficient=a, intercept=0.0, r2=r2)
    return EnvelopeCurve(epsilons=eps, f=fvals, f_fft=ffft,
                         method="dispersion_inversion", fit=fit,
                         omega_star=float(om_star))
