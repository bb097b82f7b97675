"""Post-quench temperature from energy conservation.

The conserved energy of a field quench h_i -> h_f is computed from two
estimators of the *initial* ensemble,

    E_q = -J <sum_bonds sz sz>_i  -  h_f <sum_i sx_i>_i,

and the final temperature solves E(h_f, T_f) = E_q, where E(h_f, T) is the
equilibrium energy of the post-quench Hamiltonian.  E(T) is monotone, so a
bisection is used; because each evaluation is a stochastic estimate with a
known error bar, the bisection stops once the midpoint energy agrees with
E_q within the combined 1-sigma errors.  Bounds on T_f come from separate
full-precision evaluations around T_f, propagated through the local slope
dE/dT.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .binning import EstimateSet
from .errors import BracketFailureError, DataQualityError
from .qmc import QmcConfig, coarse_config, derive_seed, run_qmc

MAX_BISECTION_STEPS = 60
FULL_PRECISION_TAIL = 3
BRACKET_EXPANSIONS = 3


@dataclass(frozen=True)
class QuenchEnergy:
    """Conserved total energy of a quench, with its 1-sigma error."""

    E_q: float
    dE_q: float
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if not np.isfinite(self.E_q) or self.dE_q < 0:
            raise ValueError(f"bad quench energy {self.E_q} +- {self.dE_q}")


@dataclass
class TfResult:
    """Solved final temperature with bounds and the full evaluation trail."""

    T_f: float
    T_lo: float
    T_hi: float
    n_bisection_steps: int
    evaluations: list  # (T, E, dE) in evaluation order
    interval: tuple    # surviving bisection interval (T1, T2)

    def __post_init__(self):
        assert self.T_lo <= self.T_f <= self.T_hi

    def trail_is_monotone(self, n_sigma: float = 3.0) -> bool:
        """True when no evaluation pair inverts E(T) beyond n_sigma times
        the combined error bars (exact trails are monotone exactly)."""
        trail = sorted(self.evaluations)
        for (t1, e1, d1), (t2, e2, d2) in zip(trail, trail[1:]):
            if e1 - e2 > n_sigma * (d1 + d2) + 1e-12:
                return False
        return True


@dataclass
class TfCurvePoint:
    h_f: float
    status: str                  # "ok" or an error tag
    result: TfResult | None = None
    cooling: bool = False
    E_q: float = float("nan")
    dE_q: float = float("nan")


@dataclass
class TfCurve:
    """T_f over an h_f grid for one initial condition (h_i, T_i)."""

    h_i: float
    T_i: float
    points: list
    meta: dict = field(default_factory=dict)

    def ok_points(self) -> list:
        return [p for p in self.points if p.status == "ok"]


def quench_energy(est_i: EstimateSet, h_f: float, J: float) -> QuenchEnergy:
    """E_q from the initial ensemble's zz and sx estimators (independent errors)."""
    for name in ("zz_bond_sum", "x_sum"):
        if name not in est_i.estimates:
            raise ValueError(f"initial estimate set lacks {name!r}")
    zz = est_i["zz_bond_sum"]
    x = est_i["x_sum"]
    e_q = -J * zz.mean - h_f * x.mean
    d_q = float(np.hypot(J * zz.stderr, h_f * x.stderr))
    return QuenchEnergy(E_q=e_q, dE_q=d_q, provenance={
        "h_i": est_i.meta.get("h"), "T_i": est_i.meta.get("T"),
        "h_f": h_f, "J": J, "zz_mean": zz.mean, "zz_stderr": zz.stderr,
        "x_mean": x.mean, "x_stderr": x.stderr})


@dataclass
class EdEvaluator:
    """Exact E(T) of a diagonalized Hamiltonian; zero statistical error."""

    spectra: list

    def __call__(self, T: float, full_precision: bool = True):
        from .ed import energy_vs_temperature

        return float(energy_vs_temperature(self.spectra, [T])[0]), 0.0


class QmcEvaluator:
    """E(T) from SSE runs at fixed (lattice, J, h_f); cached and seeded.

    Evaluations are cached by (L, J, h, T rounded to 1e-6, precision); the
    simulation runs at the rounded temperature so the cache key identifies
    the result exactly.  The run seed is derived from the master seed and the
    same key, so re-evaluations are bit-identical.
    """

    def __init__(self, prototype: QmcConfig, master_seed: int,
                 store=None):
        self.prototype = prototype
        self.master_seed = master_seed
        self.store = store
        self._memory: dict[tuple, tuple] = {}

    def cache_key(self, T: float, full_precision: bool) -> tuple:
        p = self.prototype
        return (p.lattice.L, p.params.J, p.params.h, round(T, 6),
                bool(full_precision), p.n_measure, p.n_bins)

    def __call__(self, T: float, full_precision: bool = True):
        key = self.cache_key(T, full_precision)
        hit = self._memory.get(key)
        if hit is not None:
            return hit
        if self.store is not None:
            payload = self.store.get_json(_store_key(key, self.master_seed))
            if payload is not None:
                value = (payload["mean"], payload["stderr"])
                self._memory[key] = value
                return value
        T_run = round(T, 6)
        seed = derive_seed(self.master_seed, "energy-eval", *key)
        config = replace(self.prototype, T=T_run, rng_seed=seed)
        if not full_precision:
            config = coarse_config(config)
        est = run_qmc(config)
        e = est["total_energy"]
        value = (e.mean, e.stderr)
        self._memory[key] = value
        if self.store is not None:
            self.store.put_json(_store_key(key, self.master_seed),
                                {"mean": e.mean, "stderr": e.stderr,
                                 "estimate_set": est.to_jsonable()})
        return value


def _store_key(key: tuple, master_seed: int) -> str:
    from .qmc import ENGINE_VERSION

    L, J, h, T, full, n_measure, n_bins = key
    tag = "full" if full else "coarse"
    return (f"eval_{ENGINE_VERSION}_L{L}_J{J!r}_h{h!r}_T{T:.6f}_{tag}"
            f"_m{n_measure}_b{n_bins}_s{master_seed}")


def default_bracket(T_i: float, L: int) -> tuple:
    """Initial temperature interval; quenches both heat and cool, so it
    straddles T_i."""
    return (max(T_i / 4.0, 1.0 / L), 4.0 * max(T_i, 1.0))


def solve_Tf(h_f: float, E_q: QuenchEnergy, evaluator,
             bracket: tuple, max_steps: int = MAX_BISECTION_STEPS) -> TfResult:
    """Bisect E(T) = E_q with the statistical stopping rule.

    Early midpoints are evaluated at reduced precision; once the reduced-
    precision stopping rule |E_mid - E_q| <= dE_mid + dE_q first fires (or
    the step budget nearly runs out), the last FULL_PRECISION_TAIL steps are
    evaluated at full precision.  The bracket is expanded up to three times
    per side before giving up.
    """
    T1, T2 = bracket
    if not (0 < T1 < T2):
        raise ValueError(f"invalid bracket {bracket}")
    trail = []

    def evaluate(T, full):
        e, d = evaluator(T, full_precision=full)
        trail.append((T, e, d))
        return e, d

    E1, d1 = evaluate(T1, False)
    E2, d2 = evaluate(T2, False)
    if E1 - E2 > 3.0 * (d1 + d2) + 1e-12:
        raise DataQualityError(
            f"E(T) decreasing beyond errors: E({T1:.4g}) = {E1:.6g} "
            f"> E({T2:.4g}) = {E2:.6g}")
    for _ in range(BRACKET_EXPANSIONS):
        if E_q.E_q < E1 - (d1 + E_q.dE_q):
            T1 = T1 / 2.0
            E1, d1 = evaluate(T1, False)
        else:
            break
    for _ in range(BRACKET_EXPANSIONS):
        if E_q.E_q > E2 + (d2 + E_q.dE_q):
            T2 = T2 * 2.0
            E2, d2 = evaluate(T2, False)
        else:
            break
    if E_q.E_q < E1 - (d1 + E_q.dE_q) or E_q.E_q > E2 + (d2 + E_q.dE_q):
        raise BracketFailureError(
            f"E_q = {E_q.E_q:.6g} +- {E_q.dE_q:.2g} outside "
            f"[E({T1:.4g}) = {E1:.6g}, E({T2:.4g}) = {E2:.6g}] "
            f"after {BRACKET_EXPANSIONS} expansions per side")

    T_mid = 0.5 * (T1 + T2)
    full_steps_left = -1  # -1: still in the coarse phase
    steps = 0
    while steps < max_steps:
        T_mid = 0.5 * (T1 + T2)
        in_tail = full_steps_left >= 0 or steps >= max_steps - FULL_PRECISION_TAIL
        Em, dm = evaluate(T_mid, in_tail)
        steps += 1
        converged = abs(Em - E_q.E_q) <= dm + E_q.dE_q
        if in_tail:
            if full_steps_left < 0:
                full_steps_left = FULL_PRECISION_TAIL
            full_steps_left -= 1
            if converged or full_steps_left == 0:
                break
        elif converged:
            # switch to the full-precision tail for the remaining steps
            full_steps_left = FULL_PRECISION_TAIL
        if (E1 - E_q.E_q) * (Em - E_q.E_q) < 0:
            T2, E2, d2 = T_mid, Em, dm
        else:
            T1, E1, d1 = T_mid, Em, dm
    return TfResult(T_f=T_mid, T_lo=T1, T_hi=T2, n_bisection_steps=steps,
                    evaluations=trail, interval=(T1, T2))


def tf_bounds(result: TfResult, E_q: QuenchEnergy,
              extra_runs: list) -> tuple:
    """(T_lo, T_hi) from extra evaluations around T_f.

    The local slope s = dE/dT comes from the two extra runs nearest T_f that
    bracket it; the half width is (dE_q + dE(T_f)) / s.  If the slope is
    consistent with zero within its own error, the bounds fall back to the
    full surviving bisection interval.
    """
    if len(extra_runs) < 2:
        raise ValueError("need at least 2 extra evaluations around T_f")
    below = [r for r in extra_runs if r[0] <= result.T_f]
    above = [r for r in extra_runs if r[0] > result.T_f]
    if not below or not above:
        raise ValueError("extra evaluations must bracket T_f")
    T_a, E_a, d_a = max(below, key=lambda r: r[0])
    T_b, E_b, d_b = min(above, key=lambda r: r[0])
    slope = (E_b - E_a) / (T_b - T_a)
    slope_err = np.hypot(d_a, d_b) / (T_b - T_a)
    if slope <= 0 or slope <= slope_err:
        return result.interval
    d_tf = 0.5 * (d_a + d_b)
    half = (E_q.dE_q + d_tf) / slope
    return (result.T_f - half, result.T_f + half)


def tf_curve(est_i: EstimateSet, h_f_grid, evaluator_factory,
             T_i: float | None = None, J: float | None = None,
             bracket: tuple | None = None,
             bound_delta: float = 0.05) -> TfCurve:
    """Solve T_f over an h_f grid, reusing one initial-ensemble estimate.

    ``evaluator_factory(h_f)`` must return an E(T) evaluator for the
    post-quench Hamiltonian.  Solver failures are recorded per grid point
    and do not abort the sweep.
    """
    h_f_grid = list(h_f_grid)
    if any(b <= a for a, b in zip(h_f_grid, h_f_grid[1:])):
        raise ValueError("h_f grid must be strictly increasing")
    T_i = est_i.meta.get("T") if T_i is None else T_i
    J = est_i.meta.get("J") if J is None else J
    L = est_i.meta.get("L")
    h_i = est_i.meta.get("h")
    if T_i is None or J is None:
        raise ValueError("T_i and J must be given or present in est_i.meta")
    points = []
    for h_f in h_f_grid:
        e_q = quench_energy(est_i, h_f, J)
        point = TfCurvePoint(h_f=h_f, status="ok",
                             E_q=e_q.E_q, dE_q=e_q.dE_q)
        try:
            evaluator = evaluator_factory(h_f)
            brk = bracket if bracket is not None else default_bracket(T_i, L or 4)
            result = solve_Tf(h_f, e_q, evaluator, brk)
            delta = bound_delta * max(result.T_f, 1e-6)
            extra = []
            for T in (result.T_f - delta, result.T_f + delta):
                if T > 0:
                    e, d = evaluator(T, full_precision=True)
                    extra.append((T, e, d))
            if len(extra) == 2:
                lo, hi = tf_bounds(result, e_q, extra)
                result.T_lo = min(lo, result.T_f)
                result.T_hi = max(hi, result.T_f)
            point.result = result
            point.cooling = result.T_hi < T_i * (1.0 - 1e-6)
        except Exception as exc:  # recorded, sweep continues
            point.status = f"{type(exc).__name__}: {exc}"
        points.append(point)
    return TfCurve(h_i=h_i, T_i=T_i, points=points,
                   meta={"L": L, "J": J,
                         "initial_meta": dict(est_i.meta)})
