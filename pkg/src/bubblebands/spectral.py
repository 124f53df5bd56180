"""Capacitance matrix, characteristic-value (band) solver and Dirac-cone data.

The sub-wavelength bands are located as sharp minima of the smallest
singular value of the row-equilibrated block operator; leading-order
seeds come from the capacitance-matrix asymptotics

    omega_j(alpha) = sqrt(delta lambda_j / |D_1|) v_b + O(delta),

with lambda_j the eigenvalues c1 -+ |c2| of the 2x2 capacitance matrix
(single eigenvalue for the square lattice).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from bubblebands.boundary import BoundaryBasis, indicator_rhs
from bubblebands.lattice import dirac_point
from bubblebands.operators import AssemblyCache, Material, equilibrate


class DiscretizationError(RuntimeError):
    """A symmetry or conditioning check failed beyond tolerance."""


_COND_LIMIT = 1e12


@dataclass(frozen=True)
class CapacitanceMatrix:
    """C_ij = -int_{dD_j} psi_i dsigma with psi_j solving S^{alpha,0} psi_j = chi_j."""

    matrix: np.ndarray
    alpha: np.ndarray

    @property
    def n_bubbles(self) -> int:
        return self.matrix.shape[0]

    @property
    def c11(self) -> complex:
        return complex(self.matrix[0, 0])

    @property
    def c12(self) -> complex:
        return complex(self.matrix[0, 1]) if self.n_bubbles == 2 else 0.0j

    @property
    def c21(self) -> complex:
        return complex(self.matrix[1, 0]) if self.n_bubbles == 2 else 0.0j

    @property
    def c22(self) -> complex:
        return complex(self.matrix[1, 1]) if self.n_bubbles == 2 else self.c11

    @property
    def c1(self) -> float:
        return self.c11.real

    @property
    def c2(self) -> complex:
        return self.c12

    @property
    def eigenvalues(self) -> np.ndarray:
        """Ascending: c1 - |c2|, c1 + |c2| (single value for one bubble)."""
        if self.n_bubbles == 1:
            return np.array([self.c1])
        return np.array([self.c1 - abs(self.c2), self.c1 + abs(self.c2)])


def solve_psi(basis: BoundaryBasis, alpha, *, cache: AssemblyCache | None = None,
              k_max: float = 0.8) -> np.ndarray:
    """Densities psi_j with S^{alpha,0} psi_j = chi_{dD_j}; shape (n_bubbles, n)."""
    cache = cache or AssemblyCache(basis, alpha, k_max=k_max)
    S0 = cache.single_layer(0.0)
    cond = np.linalg.cond(S0)
    if cond > _COND_LIMIT:
        raise DiscretizationError(
            f"static single-layer system nearly singular (cond = {cond:.2e}); "
            "alpha too close to the zone centre?")
    rhs = np.stack([indicator_rhs(basis, j + 1)
                    for j in range(basis.dimer.n_bubbles)], axis=1)
    return np.linalg.solve(S0, rhs).T


def capacitance(basis: BoundaryBasis, alpha, *,
                cache: AssemblyCache | None = None) -> CapacitanceMatrix:
    psi = solve_psi(basis, alpha, cache=cache)
    nb = basis.dimer.n_bubbles
    C = np.empty((nb, nb), dtype=complex)
    for i in range(nb):
        for j in range(nb):
            sl = basis.circle_slice(j + 1)
            C[i, j] = -np.sum(basis.weights[sl] * psi[i, sl])
    return CapacitanceMatrix(matrix=C, alpha=np.asarray(alpha, float))


def asymptotic_bands(cap: CapacitanceMatrix, material: Material,
                     bubble_area: float) -> np.ndarray:
    """Leading-order band frequencies sqrt(delta lambda_j / |D_1|) v_b, ascending."""
    lam = cap.eigenvalues
    if np.any(lam < 0):
        raise DiscretizationError(
            f"capacitance eigenvalues {lam} not positive; discretization suspect")
    return np.sqrt(material.delta * lam / bubble_area) * material.v_b


# ----------------------------------------------------------------------
# Dirac point data


@dataclass(frozen=True)
class DiracData:
    alpha_star: np.ndarray
    omega_star: float          # asymptotic sqrt(delta c1 / |D1|) v_b
    c_dirac: complex           # conj(d c2 / d alpha_1) at alpha*
    lambda0: float
    slope: float               # sqrt(delta) lambda0 |c|
    c1_star: float
    grad_c1_rel: float         # |grad c1| / |c|, expected ~ 0
    pattern_dev: float         # |d2/d1 - i|, expected ~ 0
    fd_step: float


def dirac_velocity(basis: BoundaryBasis, material: Material, *,
                   h_rel: float = 1e-3) -> DiracData:
    """Dirac velocity c = conj(dc2/dalpha1)|_{alpha*} by Richardson-refined
    central differences of the capacitance coefficients.

    Cross-checks the (1, i) gradient pattern dc2/dalpha2 = i dc2/dalpha1 and
    grad c1(alpha*) = 0; a pattern mismatch above 1e-2 relative raises
    DiscretizationError.
    """
    lattice = basis.dimer.lattice
    astar = dirac_point(lattice)
    if not 1e-5 <= h_rel <= 1e-2:
        raise ValueError("finite-difference step h_rel outside [1e-5, 1e-2]")
    h = h_rel * np.linalg.norm(astar)

    def cmat(a):
        return capacitance(basis, a)

    def diffs(step):
        e1 = np.array([step, 0.0])
        e2 = np.array([0.0, step])
        cp1, cm1 = cmat(astar + e1), cmat(astar - e1)
        cp2, cm2 = cmat(astar + e2), cmat(astar - e2)
        d1 = (cp1.c2 - cm1.c2) / (2 * step)
        d2 = (cp2.c2 - cm2.c2) / (2 * step)
        g = np.array([(cp1.c11 - cm1.c11).real, (cp2.c11 - cm2.c11).real]) / (2 * step)
        return d1, d2, g

    d1h, d2h, gh = diffs(h)
    d1h2, d2h2, gh2 = diffs(h / 2)
    d1 = (4 * d1h2 - d1h) / 3
    d2 = (4 * d2h2 - d2h) / 3
    grad_c1 = (4 * gh2 - gh) / 3

    pattern = abs(d2 / d1 - 1j)
    if pattern > 1e-2:
        raise DiscretizationError(
            f"gradient pattern dc2/da2 = i dc2/da1 violated by {pattern:.2e}")

    c = np.conj(d1)
    cap0 = cmat(astar)
    c1s = cap0.c1
    lam0 = 0.5 * np.sqrt(material.v_b ** 2 / (basis.dimer.bubble_area * c1s))
    return DiracData(
        alpha_star=astar,
        omega_star=float(np.sqrt(material.delta * c1s / basis.dimer.bubble_area)
                         * material.v_b),
        c_dirac=complex(c),
        lambda0=float(lam0),
        slope=float(np.sqrt(material.delta) * lam0 * abs(c)),
        c1_star=float(c1s),
        grad_c1_rel=float(np.linalg.norm(grad_c1) / abs(c)),
        pattern_dev=float(pattern),
        fd_step=float(h),
    )


# ----------------------------------------------------------------------
# characteristic-value search


@dataclass(frozen=True)
class CharacteristicRoot:
    omega: float
    residual: float        # sigma_min at the root (equilibrated)
    sigma_ratio: float     # sigma_min / sigma_max
    converged: bool
    multiplicity: int = 1


def find_characteristic(basis: BoundaryBasis, material: Material, alpha,
                        omega_guess: float, tol: float = 1e-9, *,
                        cache: AssemblyCache | None = None,
                        bracket: tuple | None = None,
                        bracket_rel: float = 0.3,
                        sigma_accept: float = 1e-6) -> CharacteristicRoot:
    """Locate the characteristic value nearest omega_guess.

    Minimizes sigma_min of the equilibrated block operator over a bracket
    around the guess (golden-section/parabolic via bounded Brent, absolute
    omega tolerance tol * omega_guess).  Returns converged=False when no
    dip with sigma_min <= sigma_accept * sigma_max is found; the caller
    may widen the bracket.
    """
    cache = cache or AssemblyCache(basis, alpha, k_max=max(1.0, 2.0 * omega_guess))
    if bracket is None:
        lo = omega_guess * (1.0 - bracket_rel)
        hi = omega_guess * (1.0 + bracket_rel)
    else:
        lo, hi = bracket
    lo = max(lo, 1e-12)

    def f(om):
        eq, _ = equilibrate(cache.block(material, om).matrix)
        return np.linalg.svd(eq, compute_uv=False)[-1]

    xatol = max(tol * omega_guess, 1e-15)
    res = minimize_scalar(f, bounds=(lo, hi), method="bounded",
                          options={"xatol": xatol, "maxiter": 200})
    om = float(res.x)
    eq, _ = equilibrate(cache.block(material, om).matrix)
    s = np.linalg.svd(eq, compute_uv=False)
    smin, smax = float(s[-1]), float(s[0])
    at_edge = (om - lo) < 2 * xatol or (hi - om) < 2 * xatol
    converged = (smin <= sigma_accept * smax) and not at_edge
    mult = int(np.sum(s <= max(10.0 * smin, 1e-9 * smax)))
    return CharacteristicRoot(omega=om, residual=smin, sigma_ratio=smin / smax,
                              converged=converged, multiplicity=max(mult, 1))


@dataclass(frozen=True)
class BandPoint:
    alpha: np.ndarray
    omegas: np.ndarray       # ascending; NaN where the solve failed
    residuals: np.ndarray
    omegas_asym: np.ndarray
    multiplicity: int = 1    # > 1 when the roots merged (double root)
    ok: bool = True


def solve_bands_at(basis: BoundaryBasis, material: Material, alpha, *,
                   cache: AssemblyCache | None = None,
                   seeds: np.ndarray | None = None,
                   seed_offset: float | None = None,
                   tol: float = 1e-9,
                   merge_tol: float = 1e-6) -> BandPoint:
    """All sub-wavelength bands at one quasi-momentum.

    Seeds default to the capacitance asymptotics shifted by seed_offset
    (the O(delta) gap between asymptotic and exact roots; calibrated
    automatically near a degeneracy when not supplied).  Brackets are
    narrowed so each search isolates its own dip; nearly equal seeds are
    detected as a double characteristic value and searched once.
    """
    alpha = np.asarray(alpha, dtype=float)
    nb = basis.dimer.n_bubbles
    cache = cache or AssemblyCache(basis, alpha, k_max=1.0)
    asym = asymptotic_bands(capacitance(basis, alpha, cache=cache), material,
                            basis.dimer.bubble_area)
    if seeds is not None:
        guesses = np.sort(np.asarray(seeds, float))
    else:
        guesses = asym.copy()
        split = abs(guesses[-1] - guesses[0])
        if seed_offset is None and nb == 2 and split > merge_tol * guesses[-1] \
                and split < 0.05 * guesses[-1]:
            # close roots: the O(delta) seed error may exceed the split, so
            # anchor the pair by one wide unconstrained search first
            center = _search_with_widening(basis, material, alpha,
                                           float(guesses.mean()), tol, cache,
                                           half_cap=None)
            if center.converged:
                nearest = int(np.argmin(np.abs(guesses - center.omega)))
                seed_offset = center.omega - guesses[nearest]
        if seed_offset:
            guesses = guesses + seed_offset

    if nb == 2 and abs(guesses[1] - guesses[0]) <= merge_tol * guesses[1]:
        root = _search_with_widening(basis, material, alpha, float(guesses.mean()),
                                     tol, cache, half_cap=None)
        om = np.array([root.omega, root.omega])
        return BandPoint(alpha=alpha, omegas=om,
                         residuals=np.array([root.residual, root.residual]),
                         omegas_asym=asym, multiplicity=max(root.multiplicity, 2),
                         ok=root.converged)

    omegas, residuals, ok = [], [], True
    for i, g in enumerate(guesses):
        half_cap = None
        if nb == 2:
            other = guesses[1 - i]
            half_cap = 0.45 * abs(g - other)
        root = _search_with_widening(basis, material, alpha, float(g), tol, cache,
                                     half_cap=half_cap)
        omegas.append(root.omega if root.converged else np.nan)
        residuals.append(root.residual)
        ok = ok and root.converged
    order = np.argsort(omegas)
    return BandPoint(alpha=alpha, omegas=np.array(omegas)[order],
                     residuals=np.array(residuals)[order],
                     omegas_asym=asym, multiplicity=1, ok=ok)


def seed_offset_at_cone(basis: BoundaryBasis, material: Material, *,
                        tol: float = 1e-9) -> float:
    """Exact-minus-asymptotic frequency shift at the cone point.

    The capacitance seeds miss the true characteristic values by O(delta);
    near a degeneracy that error exceeds the band split, so sweeps seed
    with asymptotics + this offset.
    """
    astar = dirac_point(basis.dimer.lattice)
    bp = solve_bands_at(basis, material, astar, tol=tol)
    return float(bp.omegas[-1] - bp.omegas_asym[-1])


def _search_with_widening(basis, material, alpha, guess, tol, cache, *,
                          half_cap: float | None) -> CharacteristicRoot:
    half = 0.1 * guess
    if half_cap is not None:
        half = min(half, half_cap)
    for _ in range(4):
        root = find_characteristic(basis, material, alpha, guess, tol,
                                   cache=cache, bracket=(guess - half, guess + half))
        if root.converged:
            return root
        wider = half * 2.0
        if half_cap is not None:
            wider = min(wider, half_cap)
        if wider <= half * 1.001:
            break
        half = wider
    return root


@dataclass(frozen=True)
class BandStructure:
    path: np.ndarray          # (M, 2)
    arclength: np.ndarray     # (M,)
    omegas: np.ndarray        # (M, nb) ascending per point, NaN on failure
    residuals: np.ndarray     # (M, nb)
    omegas_asym: np.ndarray   # (M, nb)
    ok: np.ndarray            # (M,) bool

    @property
    def omega1(self) -> np.ndarray:
        return self.omegas[:, 0]

    @property
    def omega2(self) -> np.ndarray:
        return self.omegas[:, -1]

    @property
    def n_failed(self) -> int:
        return int(np.sum(~self.ok))


def _sweep_point(args):
    basis, material, alpha, seeds, seed_offset, tol = args
    alpha = np.asarray(alpha, dtype=float)
    if np.linalg.norm(alpha) < 1e-12:
        # Gamma point: omega = 0 is the exact quasi-static Bloch eigenvalue
        # of the first band; the remaining bands are seeded by continuation.
        nb = basis.dimer.n_bubbles
        if nb == 1:
            return BandPoint(alpha=alpha, omegas=np.zeros(1),
                             residuals=np.zeros(1),
                             omegas_asym=np.full(1, np.nan), ok=True)
        if seeds is None:
            om = np.full(nb, np.nan)
            om[0] = 0.0
            return BandPoint(alpha=alpha, omegas=om, residuals=np.zeros(nb),
                             omegas_asym=np.full(nb, np.nan), ok=False)
        cache = AssemblyCache(basis, alpha, k_max=1.0)
        root = _search_with_widening(basis, material, alpha, float(seeds[-1]),
                                     tol, cache, half_cap=None)
        om = np.array([0.0, root.omega if root.converged else np.nan])
        return BandPoint(alpha=alpha, omegas=om,
                         residuals=np.array([0.0, root.residual]),
                         omegas_asym=np.full(2, np.nan), ok=root.converged)
    try:
        return solve_bands_at(basis, material, alpha, seeds=seeds,
                              seed_offset=seed_offset, tol=tol)
    except Exception:
        nb = basis.dimer.n_bubbles
        return BandPoint(alpha=alpha, omegas=np.full(nb, np.nan),
                         residuals=np.full(nb, np.nan),
                         omegas_asym=np.full(nb, np.nan), ok=False)


def band_sweep(basis: BoundaryBasis, material: Material, path, *,
               arclength: np.ndarray | None = None,
               tol: float = 1e-9,
               workers: int = 1) -> BandStructure:
    """Solve the sub-wavelength bands along a path of quasi-momenta.

    Each point is an independent solve seeded by its own capacitance
    asymptotics (previous-point roots seed only the Gamma special case),
    so results are deterministic regardless of `workers`.
    """
    pts = np.atleast_2d(np.asarray(path, dtype=float))
    if pts.shape[0] == 0:
        raise ValueError("empty path")
    if arclength is None:
        seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        arclength = np.concatenate([[0.0], np.cumsum(seg)])

    offset = None
    if basis.dimer.n_bubbles == 2:
        offset = seed_offset_at_cone(basis, material, tol=tol)

    norms = np.linalg.norm(pts, axis=1)
    tasks = [(basis, material, pts[i], None, offset, tol) for i in range(pts.shape[0])]

    if workers > 1:
        import multiprocessing as mp
        with mp.get_context("fork").Pool(workers) as pool:
            results = pool.map(_sweep_point, tasks)
    else:
        results = [_sweep_point(t) for t in tasks]

    # second pass for Gamma points, seeded by the nearest solved neighbour
    for i in np.flatnonzero(norms < 1e-12):
        for j in list(range(i - 1, -1, -1)) + list(range(i + 1, pts.shape[0])):
            if norms[j] >= 1e-12 and results[j].ok:
                seeds = results[j].omegas
                results[i] = _sweep_point((basis, material, pts[i], seeds, None, tol))
                break

    nb = basis.dimer.n_bubbles
    omegas = np.vstack([r.omegas for r in results])
    residuals = np.vstack([r.residuals for r in results])
    asym = np.vstack([r.omegas_asym for r in results])
    ok = np.array([r.ok for r in results])
    return BandStructure(path=pts, arclength=np.asarray(arclength, float),
                         omegas=omegas, residuals=residuals, omegas_asym=asym, ok=ok)


# ----------------------------------------------------------------------
# cone fitting


@dataclass(frozen=True)
class DiracFit:
    omega_star_fit: float
    slope_plus: float
    slope_minus: float
    r2_plus: float
    r2_minus: float

    @property
    def conical(self) -> bool:
        return min(self.r2_plus, self.r2_minus) >= 0.999


def dirac_fit(ts: np.ndarray, omega_lower: np.ndarray, omega_upper: np.ndarray,
              omega_star: float | None = None) -> DiracFit:
    """Linear fits of omega2 - omega* and omega* - omega1 against |alpha - alpha*|.

    With omega_star=None the apex is a joint fit parameter (shared
    intercept of the two branches); R^2 below 0.999 flags non-conical data.
    """
    ts = np.asarray(ts, float)
    w1 = np.asarray(omega_lower, float)
    w2 = np.asarray(omega_upper, float)
    if ts.size < 5:
        raise ValueError("need at least 5 radii for a cone fit")
    if omega_star is None:
        # least squares for (omega*, s+, s-): w2 = o + s+ t, w1 = o - s- t
        A = np.zeros((2 * ts.size, 3))
        A[:ts.size, 0] = 1.0
        A[:ts.size, 1] = ts
        A[ts.size:, 0] = 1.0
        A[ts.size:, 2] = -ts
        rhs = np.concatenate([w2, w1])
        (o, sp, sm), *_ = np.linalg.lstsq(A, rhs, rcond=None)
    else:
        o = omega_star
        sp = float(ts @ (w2 - o) / (ts @ ts))
        sm = float(ts @ (o - w1) / (ts @ ts))

    def r2(y, yhat):
        ss = np.sum((y - np.mean(y)) ** 2)
        return 1.0 - np.sum((y - yhat) ** 2) / ss if ss > 0 else 1.0

    return DiracFit(omega_star_fit=float(o), slope_plus=float(sp),
                    slope_minus=float(sm),
                    r2_plus=r2(w2, o + sp * ts), r2_minus=r2(w1, o - sm * ts))


def cone_scan(basis: BoundaryBasis, material: Material, *,
              radii_rel, directions=(0.0,), tol: float = 1e-9,
              workers: int = 1):
    """Band pairs on rays alpha* + t (cos th, sin th).

    Returns (ts, lower, upper) with shapes (ndir, nrad); ts in absolute
    reciprocal units.
    """
    astar = dirac_point(basis.dimer.lattice)
    offset = seed_offset_at_cone(basis, material, tol=tol)
    tvals = np.asarray(radii_rel, float) * np.linalg.norm(astar)
    lower = np.empty((len(directions), tvals.size))
    upper = np.empty_like(lower)
    tasks = []
    for th in directions:
        u = np.array([np.cos(th), np.sin(th)])
        for t in tvals:
            tasks.append((basis, material, astar + t * u, None, offset, tol))
    if workers > 1:
        import multiprocessing as mp
        with mp.get_context("fork").Pool(workers) as pool:
            results = pool.map(_sweep_point, tasks)
    else:
        results = [_sweep_point(t) for t in tasks]
    for i in range(len(directions)):
        for j in range(tvals.size):
            r = results[i * tvals.size + j]
            lower[i, j] = r.omegas[0]
            upper[i, j] = r.omegas[-1]
    return tvals, lower, upper


# ----------------------------------------------------------------------
# dispersion handle used by the homogenization layer


class DispersionSolver:
    """Caches per-alpha band solves and answers queries omega_j(alpha)."""

    def __init__(self, basis: BoundaryBasis, material: Material, *,
                 tol: float = 1e-9):
        self.basis = basis
        self.material = material
        self.tol = tol
        self._points: dict[tuple, BandPoint] = {}
        self._offset: float | None = None

    def seed_offset(self) -> float:
        if self._offset is None:
            if self.basis.dimer.n_bubbles == 2:
                self._offset = seed_offset_at_cone(self.basis, self.material,
                                                   tol=self.tol)
            else:
                self._offset = 0.0
        return self._offset

    def bands(self, alpha) -> BandPoint:
        key = tuple(np.round(np.asarray(alpha, float), 14))
        if key not in self._points:
            self._points[key] = solve_bands_at(self.basis, self.material, alpha,
                                               seed_offset=self.seed_offset(),
                                               tol=self.tol)
        return self._points[key]

    def band(self, alpha, branch: int) -> float:
        """branch 0 = lowest; -1 = highest sub-wavelength band."""
        return float(self.bands(alpha).omegas[branch])

    def dirac_frequency(self) -> float:
        """Numeric double root at the cone point (band apex for the square)."""
        astar = dirac_point(self.basis.dimer.lattice)
        return float(self.bands(astar).omegas[-1])
