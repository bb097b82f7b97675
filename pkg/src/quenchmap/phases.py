"""Equilibrium critical line, phase classification, and dynamical phase maps.

The ferromagnet/paramagnet line T_c(h) is built from Binder-cumulant
crossings of two lattice sizes, anchored at the exactly known endpoints
(h = 0, T_c = 2/ln(1+sqrt 2)) and (h = 3.044, T_c = 0), and interpolated
with a monotone shape-preserving cubic.  Final-temperature curves are
interpolated the same way; their intersections with the line are the
dynamical critical fields, with bounds read off from where the upper and
lower T_f bound curves intersect the line.

The finite-size extrapolation T_f(L) = a L**(-b) + c is a weighted nonlinear
least-squares fit by damped Gauss-Newton with multiple starts in b.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .errors import CrossingNotFoundError, DataQualityError, FitFailureError
from .lattice import LatticeSpec, ModelParams, ThermalPoint, build_lattice
from .qmc import QmcConfig, derive_seed, run_qmc
from .quench import QmcEvaluator, TfCurve, tf_curve

ONSAGER_TC = 2.0 / np.log(1.0 + np.sqrt(2.0))
QUANTUM_CRITICAL_FIELD = 3.044

FM = "FM"
PM = "PM"
BOUNDARY = "boundary-within-uncertainty"


@dataclass
class CriticalLine:
    """Monotone interpolable table of (h, T_c(h)) with uncertainties."""

    h: np.ndarray
    T_c: np.ndarray
    dT_c: np.ndarray
    sources: list  # "anchor" or "crossing" per point
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.any(np.diff(self.h) <= 0):
            raise ValueError("h values must be strictly increasing")
        self._interp = PchipInterpolator(self.h, self.T_c)

    def temperature(self, h) -> np.ndarray:
        """T_c(h); 0 beyond the quantum critical endpoint."""
        h = np.asarray(h, dtype=np.float64)
        out = np.where(h >= self.h[-1], 0.0,
                       np.clip(self._interp(np.clip(h, self.h[0], self.h[-1])),
                               0.0, None))
        return out if out.ndim else float(out)

    def uncertainty(self, h) -> np.ndarray:
        h = np.asarray(h, dtype=np.float64)
        out = np.interp(h, self.h, self.dT_c)
        return out if out.ndim else float(out)


@dataclass
class DynamicalCriticalPoint:
    h_c: float
    h_lo: float
    h_hi: float
    branch: int  # 1-based, ascending in h_f

    def __post_init__(self):
        assert self.h_lo <= self.h_c <= self.h_hi


@dataclass
class DynamicalPhaseDiagram:
    h_i: float
    T_i_grid: np.ndarray
    h_f_grid: np.ndarray
    phases: list        # per T_i: list of phase labels per h_f cell
    curves: list        # per T_i: TfCurve
    critical_points: list  # per T_i: list[DynamicalCriticalPoint]
    meta: dict = field(default_factory=dict)


@dataclass
class FssFit:
    a: float
    b: float
    c: float
    covariance: np.ndarray  # 3x3, parameter order (a, b, c)
    rmse: float
    degenerate: bool = False
    n_iterations: int = 0

    @property
    def c_stderr(self) -> float:
        return float(np.sqrt(self.covariance[2, 2]))


@dataclass(frozen=True)
class SweepResources:
    """Knobs shared by every QMC run inside a sweep."""

    J: float = 1.0
    n_thermalization: int = 5_000
    n_measure: int = 40_000
    n_bins: int = 32
    n_chains: int = 1
    master_seed: int = 0
    store: object = None

    def config(self, lattice: LatticeSpec, h: float, T: float,
               seed: int) -> QmcConfig:
        return QmcConfig(lattice=lattice, params=ModelParams(J=self.J, h=h),
                         T=T, n_thermalization=self.n_thermalization,
                         n_measure=self.n_measure, n_bins=self.n_bins,
                         rng_seed=seed, n_chains=self.n_chains)


def _binder(lattice: LatticeSpec, h: float, T: float,
            resources: SweepResources) -> tuple:
    seed = derive_seed(resources.master_seed, "binder", lattice.L, h,
                       round(T, 6))
    est = run_qmc(resources.config(lattice, h, T, seed))
    u = est["binder_U"]
    return u.mean, u.stderr


def binder_crossing_Tc(h: float, L_pair: tuple, T_range: tuple,
                       resources: SweepResources,
                       max_steps: int = 40) -> tuple:
    """Temperature where U(L_small, T) = U(L_large, T), with uncertainty.

    Bisection on the sign of g(T) = U(small) - U(large): below T_c the larger
    lattice is more ordered (g < 0), above it less (g > 0).  Stops when g is
    consistent with zero within its jackknife errors; the uncertainty is the
    error of g at the crossing divided by its local slope.
    """
    L_small, L_large = L_pair
    if not L_small < L_large:
        raise ValueError(f"need L_small < L_large, got {L_pair}")
    if h >= QUANTUM_CRITICAL_FIELD:
        raise CrossingNotFoundError(
            f"h = {h} is at/beyond the quantum critical field "
            f"{QUANTUM_CRITICAL_FIELD}; no finite-T transition")
    lat_s, lat_l = build_lattice(L_small), build_lattice(L_large)

    def g(T):
        u_s, d_s = _binder(lat_s, h, T, resources)
        u_l, d_l = _binder(lat_l, h, T, resources)
        return u_s - u_l, float(np.hypot(d_s, d_l))

    T1, T2 = T_range
    g1, dg1 = g(T1)
    g2, dg2 = g(T2)
    scan = [(T1, g1, dg1), (T2, g2, dg2)]
    if not (g1 < 0 < g2):
        raise CrossingNotFoundError(
            f"no Binder crossing bracketed in T = {T_range} at h = {h}: "
            f"g({T1}) = {g1:.4f}+-{dg1:.4f}, g({T2}) = {g2:.4f}+-{dg2:.4f}",
            scan=scan)
    gm, dgm = g1, dg1
    Tm = T1
    for _ in range(max_steps):
        Tm = 0.5 * (T1 + T2)
        gm, dgm = g(Tm)
        scan.append((Tm, gm, dgm))
        if abs(gm) <= dgm:
            break
        if g1 * gm < 0:
            T2, g2, dg2 = Tm, gm, dgm
        else:
            T1, g1, dg1 = Tm, gm, dgm
    slope = (g2 - g1) / (T2 - T1) if T2 > T1 else 0.0
    if slope > 0:
        dT = dgm / slope
    else:
        dT = 0.5 * (T2 - T1)
    dT = min(max(dT, 1e-6), T_range[1] - T_range[0])
    return float(Tm), float(dT)


def build_critical_line(h_grid, L_pair: tuple, resources: SweepResources,
                        T_search: tuple | None = None,
                        anchor_uncertainty: float = 1e-3) -> CriticalLine:
    """Critical line through computed crossings plus the two exact anchors."""
    points = [(0.0, ONSAGER_TC, anchor_uncertainty, "anchor")]
    T_hi_default = ONSAGER_TC * 1.15
    for h in h_grid:
        if not 0.0 < h <= 3.0:
            raise ValueError(f"crossing grid must lie in (0, 3.0], got {h}")
        t_range = T_search or (0.2, T_hi_default)
        T_c, dT_c = binder_crossing_Tc(h, L_pair, t_range, resources)
        points.append((h, T_c, dT_c, "crossing"))
    points.append((QUANTUM_CRITICAL_FIELD, 0.0, anchor_uncertainty, "anchor"))
    points.sort(key=lambda p: p[0])
    h_arr = np.array([p[0] for p in points])
    t_arr = np.array([p[1] for p in points])
    d_arr = np.array([p[2] for p in points])
    for k in range(len(points) - 1):
        if t_arr[k + 1] >= t_arr[k] + np.hypot(d_arr[k], d_arr[k + 1]):
            raise DataQualityError(
                f"critical line not decreasing beyond joint uncertainty "
                f"between h = {h_arr[k]} and h = {h_arr[k + 1]}: "
                f"T_c = {t_arr[k]:.4f} -> {t_arr[k + 1]:.4f}")
    # enforce exact monotonicity for the interpolant (within-error wiggles)
    t_mono = np.minimum.accumulate(t_arr)
    return CriticalLine(h=h_arr, T_c=t_mono, dT_c=d_arr,
                        sources=[p[3] for p in points],
                        meta={"L_pair": list(L_pair),
                              "resources": {"n_measure": resources.n_measure,
                                            "n_bins": resources.n_bins,
                                            "seed": resources.master_seed}})


def classify(point: ThermalPoint, line: CriticalLine) -> str:
    """FM / PM / boundary verdict for an equilibrium point against the line."""
    if point.h >= QUANTUM_CRITICAL_FIELD:
        return PM
    t_c = line.temperature(point.h)
    band = line.uncertainty(point.h)
    if abs(point.T - t_c) <= band:
        return BOUNDARY
    return FM if point.T < t_c else PM


def _interp_curve(h_vals, t_vals):
    return PchipInterpolator(np.asarray(h_vals), np.asarray(t_vals))


def _sign_changes(f, lo, hi, n_scan=2000):
    """All roots of f on [lo, hi] located by scan plus brentq refinement."""
    xs = np.linspace(lo, hi, n_scan)
    vals = np.array([f(x) for x in xs])
    roots = []
    for k in range(len(xs) - 1):
        a, b = vals[k], vals[k + 1]
        if a == 0.0:
            roots.append(xs[k])
        elif a * b < 0:
            roots.append(float(brentq(f, xs[k], xs[k + 1], xtol=1e-10)))
    if vals[-1] == 0.0:
        roots.append(xs[-1])
    # drop duplicates from exact-zero hits adjacent to sign changes
    out = []
    for r in roots:
        if not out or abs(r - out[-1]) > 1e-8:
            out.append(r)
    return out


def dynamical_critical_points(curve: TfCurve,
                              line: CriticalLine) -> list:
    """Intersections of the interpolated T_f(h_f) curve with the line.

    Bounds follow from intersecting the interpolated T_lo and T_hi curves
    with the line; when a bound curve does not cross near a central crossing,
    the grid edge is used.
    """
    pts = curve.ok_points()
    if len(pts) < 2:
        raise ValueError("need >= 2 solved grid points to intersect")
    h_vals = [p.h_f for p in pts]
    f_mid = _interp_curve(h_vals, [p.result.T_f for p in pts])
    f_lo = _interp_curve(h_vals, [p.result.T_lo for p in pts])
    f_hi = _interp_curve(h_vals, [p.result.T_hi for p in pts])
    lo, hi = h_vals[0], h_vals[-1]

    def gap(interp):
        return lambda h: interp(h) - line.temperature(h)

    centers = _sign_changes(gap(f_mid), lo, hi)
    lo_roots = _sign_changes(gap(f_lo), lo, hi)
    hi_roots = _sign_changes(gap(f_hi), lo, hi)
    out = []
    for branch, h_c in enumerate(sorted(centers), start=1):
        candidates = [r for r in lo_roots + hi_roots]
        below = [r for r in candidates if r <= h_c]
        above = [r for r in candidates if r >= h_c]
        h_lo = max(below) if below else lo
        h_hi = min(above) if above else hi
        out.append(DynamicalCriticalPoint(h_c=float(h_c),
                                          h_lo=float(min(h_lo, h_c)),
                                          h_hi=float(max(h_hi, h_c)),
                                          branch=branch))
    return out


def phase_diagram(h_i: float, T_i_grid, h_f_grid, line: CriticalLine,
                  resources: SweepResources, lattice: LatticeSpec,
                  solver_resources: SweepResources | None = None) -> DynamicalPhaseDiagram:
    """Full dynamical phase diagram for fixed h_i over a (T_i, h_f) grid.

    Each T_i row runs one initial-ensemble estimate and one tf_curve; cells
    are classified by where (h_f, T_f) falls against the line.  The lowest
    T_i must be >= 1/L.  Per-cell solver failures are recorded in the phase
    table as "failed" and do not abort the sweep.
    """
    T_i_grid = np.asarray(sorted(T_i_grid), dtype=np.float64)
    h_f_grid = np.asarray(sorted(h_f_grid), dtype=np.float64)
    if T_i_grid[0] < 1.0 / lattice.L - 1e-12:
        raise ValueError(f"lowest T_i = {T_i_grid[0]} below 1/L = "
                         f"{1.0 / lattice.L}")
    solver_resources = solver_resources or resources
    phases, curves, crit_points = [], [], []
    for T_i in T_i_grid:
        seed = derive_seed(resources.master_seed, "initial-ensemble",
                           lattice.L, h_i, round(float(T_i), 6))
        est_i = run_qmc(resources.config(lattice, h_i, float(T_i), seed))

        def make_evaluator(h_f):
            proto = solver_resources.config(lattice, h_f, 1.0, 0)
            return QmcEvaluator(proto, solver_resources.master_seed,
                                store=solver_resources.store)

        curve = tf_curve(est_i, h_f_grid, make_evaluator, T_i=float(T_i))
        curves.append(curve)
        row = []
        for p in curve.points:
            if p.status != "ok":
                row.append("failed")
            else:
                row.append(classify(ThermalPoint(h=p.h_f, T=p.result.T_f),
                                    line))
        phases.append(row)
        try:
            crit_points.append(dynamical_critical_points(curve, line))
        except ValueError:
            crit_points.append([])
    return DynamicalPhaseDiagram(
        h_i=h_i, T_i_grid=T_i_grid, h_f_grid=h_f_grid, phases=phases,
        curves=curves, critical_points=crit_points,
        meta={"L": lattice.L, "seed": resources.master_seed})


def _fss_model(L, a, b, c):
    return a * L ** (-b) + c


def fss_fit(points, max_iterations: int = 200,
            b_starts=(0.5, 1.0, 2.0)) -> FssFit:
    """Weighted fit of T_f(L) = a L**(-b) + c by damped Gauss-Newton.

    ``points`` is a sequence of (L, T_f, sigma).  Weights are 1/sigma**2;
    the covariance is (J^T J)^(-1) of the weighted Jacobian at the optimum
    and RMSE is the unweighted root-mean-square residual.  A fit whose
    curvature matrix is numerically singular (e.g. constant data, where b is
    unidentifiable) is still reported, flagged degenerate with a wide
    covariance.
    """
    pts = [(float(L), float(y), float(s)) for L, y, s in points]
    if len({p[0] for p in pts}) < 4:
        raise ValueError("need >= 4 distinct L values")
    L = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    sigma = np.array([p[2] for p in pts])
    if np.any(sigma <= 0):
        raise ValueError("all uncertainties must be > 0")
    w = 1.0 / sigma

    def residuals(theta):
        a, b, c = theta
        return (y - _fss_model(L, a, b, c)) * w

    def jacobian(theta):
        a, b, c = theta
        lb = L ** (-b)
        cols = np.stack([-lb, a * np.log(L) * lb, -np.ones_like(L)], axis=1)
        return cols * w[:, None]

    best = None
    trace = []
    for b0 in b_starts:
        # a, c enter linearly: start them from a weighted linear solve
        lb = L ** (-b0)
        A = np.stack([lb * w, w], axis=1)
        coef, *_ = np.linalg.lstsq(A, y * w, rcond=None)
        theta = np.array([coef[0], b0, coef[1]])
        cost = float(residuals(theta) @ residuals(theta))
        converged = False
        iters = 0
        for iters in range(1, max_iterations + 1):
            r = residuals(theta)
            Jm = jacobian(theta)
            step, *_ = np.linalg.lstsq(Jm, -r, rcond=None)
            scale = 1.0
            improved = False
            for _ in range(30):
                trial = theta + scale * step
                trial_cost = float(residuals(trial) @ residuals(trial))
                if trial_cost <= cost:
                    theta, cost = trial, trial_cost
                    improved = True
                    break
                scale *= 0.5
            trace.append((b0, iters, cost))
            if not improved or np.linalg.norm(scale * step) < 1e-12 * (
                    1.0 + np.linalg.norm(theta)):
                converged = True
                break
        if not converged:
            continue
        if best is None or cost < best[1]:
            best = (theta, cost, iters)
    if best is None:
        raise FitFailureError(
            f"Gauss-Newton did not converge from any start after "
            f"{max_iterations} iterations", trace=trace)
    theta, cost, iters = best
    a, b, c = theta
    Jm = jacobian(theta)
    jtj = Jm.T @ Jm
    degenerate = bool(np.linalg.cond(jtj) > 1e10) or not b > 0
    if degenerate:
        cov = np.linalg.pinv(jtj)
        # unidentifiable directions get a wide variance, not a tiny one
        bad = np.diag(cov) < 1e-30
        cov[np.diag_indices(3)] += np.where(bad, 1e12, 0.0)
    else:
        cov = np.linalg.inv(jtj)
    resid = y - _fss_model(L, a, b, c)
    rmse = float(np.sqrt(np.mean(resid ** 2)))
    return FssFit(a=float(a), b=float(b), c=float(c), covariance=cov,
                  rmse=rmse, degenerate=degenerate, n_iterations=iters)
