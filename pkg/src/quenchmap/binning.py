"""Binning statistics for Monte Carlo estimators.

Per-sweep samples are reduced to n_bins bin means; the quoted error is the
standard error of the bin means.  The Binder cumulant is a ratio of noisy
means, so it is estimated by leave-one-bin-out jackknife (bias corrected) with
the jackknife error.  An integrated-autocorrelation estimate is derived from
the ratio of binned to naive variance and reported for diagnostics only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

OBSERVABLES = ("total_energy", "zz_bond_sum", "x_sum", "M2", "M4",
               "binder_U", "C_nn")


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    n_bins: int
    tau_int: float = float("nan")


@dataclass
class EstimateSet:
    """Means, errors and bin series for all estimators of one run.

    ``meta`` echoes the run configuration (L, J, h, T, sweep counts, seed,
    engine) so downstream consumers never have to guess provenance.
    ``bins`` maps observable name -> per-bin means (binder_U has no bin
    series; it is a jackknife functional of the M2/M4 bins).
    """

    estimates: dict[str, Estimate]
    bins: dict[str, np.ndarray]
    meta: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> Estimate:
        return self.estimates[name]

    @property
    def n_bins(self) -> int:
        return next(iter(self.estimates.values())).n_bins

    def to_jsonable(self) -> dict:
        return {
            "schema_version": 1,
            "meta": self.meta,
            "estimates": {
                k: {"mean": e.mean, "stderr": e.stderr, "n_bins": e.n_bins,
                    "tau_int": e.tau_int}
                for k, e in self.estimates.items()},
            "bins": {k: list(map(float, v)) for k, v in self.bins.items()},
        }

    @classmethod
    def from_jsonable(cls, data: dict) -> "EstimateSet":
        est = {k: Estimate(mean=v["mean"], stderr=v["stderr"],
                           n_bins=v["n_bins"], tau_int=v["tau_int"])
               for k, v in data["estimates"].items()}
        bins = {k: np.asarray(v, dtype=np.float64)
                for k, v in data["bins"].items()}
        return cls(estimates=est, bins=bins, meta=data.get("meta", {}))


def bin_series(samples: np.ndarray, n_bins: int) -> np.ndarray:
    """Reduce a per-sweep sample series to n_bins bin means."""
    n = len(samples)
    if n % n_bins != 0:
        raise ValueError(f"{n} samples not divisible by {n_bins} bins")
    return samples.reshape(n_bins, n // n_bins).mean(axis=1)


def estimate_from_samples(samples: np.ndarray, n_bins: int) -> Estimate:
    bins = bin_series(samples, n_bins)
    mean = float(bins.mean())
    var_bins = float(bins.var(ddof=1)) if n_bins > 1 else 0.0
    stderr = np.sqrt(var_bins / n_bins)
    var_naive = float(samples.var(ddof=1)) if len(samples) > 1 else 0.0
    bin_size = len(samples) // n_bins
    if var_naive > 0:
        tau = 0.5 * bin_size * var_bins / var_naive
    else:
        tau = 0.0
    return Estimate(mean=mean, stderr=float(stderr), n_bins=n_bins,
                    tau_int=float(tau))


def binder_from_bins(m2_bins: np.ndarray, m4_bins: np.ndarray) -> Estimate:
    """Bias-corrected jackknife of U = 1 - <m^4> / (3 <m^2>^2) over bins."""
    n = len(m2_bins)
    if n < 2:
        raise ValueError("binder jackknife needs >= 2 bins")

    def u(m2, m4):
        return 1.0 - m4 / (3.0 * m2 ** 2)

    u_full = u(m2_bins.mean(), m4_bins.mean())
    m2_sum, m4_sum = m2_bins.sum(), m4_bins.sum()
    u_loo = np.array([u((m2_sum - m2_bins[k]) / (n - 1),
                        (m4_sum - m4_bins[k]) / (n - 1)) for k in range(n)])
    u_jack = n * u_full - (n - 1) * u_loo.mean()
    var = (n - 1) / n * np.sum((u_loo - u_loo.mean()) ** 2)
    return Estimate(mean=float(u_jack), stderr=float(np.sqrt(var)),
                    n_bins=n)


def estimate_set_from_samples(samples: dict[str, np.ndarray], n_bins: int,
                              meta: dict) -> EstimateSet:
    """Assemble the full EstimateSet for a run from per-sweep sample series."""
    estimates, bins = {}, {}
    for name in ("total_energy", "zz_bond_sum", "x_sum", "M2", "M4", "C_nn"):
        est = estimate_from_samples(samples[name], n_bins)
        estimates[name] = est
        bins[name] = bin_series(samples[name], n_bins)
    estimates["binder_U"] = binder_from_bins(bins["M2"], bins["M4"])
    return EstimateSet(estimates=estimates, bins=bins, meta=meta)


def merge_chains(sets: list[EstimateSet]) -> EstimateSet:
    """Pool independent chains by concatenating their bin series.

    All chains must share identical configurations apart from the RNG seed;
    pooled errors shrink like 1/sqrt(n_chains).
    """
    if not sets:
        raise ValueError("nothing to merge")
    if len(sets) == 1:
        return sets[0]
    keys = ("L", "J", "h", "T", "n_thermalization", "n_measure", "n_bins",
            "engine")
    ref = {k: sets[0].meta.get(k) for k in keys}
    for s in sets[1:]:
        other = {k: s.meta.get(k) for k in keys}
        if other != ref:
            raise ValueError(f"cannot merge chains with different configs: "
                             f"{other} != {ref}")
    estimates, bins = {}, {}
    for name in ("total_energy", "zz_bond_sum", "x_sum", "M2", "M4", "C_nn"):
        pooled = np.concatenate([s.bins[name] for s in sets])
        n = len(pooled)
        mean = float(pooled.mean())
        stderr = float(np.sqrt(pooled.var(ddof=1) / n)) if n > 1 else 0.0
        tau = float(np.mean([s.estimates[name].tau_int for s in sets]))
        estimates[name] = Estimate(mean=mean, stderr=stderr, n_bins=n,
                                   tau_int=tau)
        bins[name] = pooled
    estimates["binder_U"] = binder_from_bins(bins["M2"], bins["M4"])
    meta = dict(sets[0].meta)
    meta["n_chains_merged"] = len(sets)
    meta["chain_seeds"] = [s.meta.get("rng_seed") for s in sets]
    return EstimateSet(estimates=estimates, bins=bins, meta=meta)
