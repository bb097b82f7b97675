"""Quantum Monte Carlo driver: configuration, chains, and estimate assembly.

``run_qmc`` is deterministic: the full estimate set, bit for bit, is a
function of the QmcConfig including its seed.  Chain k of a multi-chain run
draws from ``numpy.random.default_rng(splitmix64(rng_seed XOR k))``, so chains
are reproducible individually and independent of scheduling; merging happens
in chain order.

h > 0 runs the SSE engine; h = 0 is routed to the classical Ising sampler,
which shares the estimator interface.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import sse
from .binning import EstimateSet, estimate_set_from_samples, merge_chains
from .classical import run_classical_chain
from .errors import DiagnosticsError
from .lattice import LatticeSpec, ModelParams

ENGINE_VERSION = "qmc-1"

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One step of the splitmix64 stream function (public domain constants)."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def chain_stream(rng_seed: int, chain_index: int) -> int:
    """Per-chain RNG stream: splitmix64(seed XOR chain_index)."""
    return splitmix64((rng_seed & _MASK64) ^ chain_index)


def derive_seed(master: int, *parts) -> int:
    """Deterministic 64-bit seed for a labeled subtask of a master seed.

    blake2b over the master seed and the reprs of the label parts; every
    random number in a pipeline descends from the master seed this way.
    """
    digest = hashlib.blake2b(digest_size=8)
    digest.update(str(int(master) & _MASK64).encode())
    for p in parts:
        digest.update(b"|")
        digest.update(repr(p).encode())
    return int.from_bytes(digest.digest(), "little")


@dataclass(frozen=True)
class QmcConfig:
    lattice: LatticeSpec
    params: ModelParams
    T: float
    n_thermalization: int = 10_000
    n_measure: int = 100_000
    n_bins: int = 32
    rng_seed: int = 0
    n_chains: int = 1

    def __post_init__(self):
        if self.T <= 0:
            raise ValueError(f"temperature must be > 0, got T={self.T}")
        if self.n_bins < 16:
            raise ValueError(f"need n_bins >= 16, got {self.n_bins}")
        if self.n_measure % self.n_bins != 0:
            raise ValueError(f"n_measure={self.n_measure} not divisible by "
                             f"n_bins={self.n_bins}")
        if self.n_chains < 1:
            raise ValueError("n_chains must be >= 1")

    def with_temperature(self, T: float) -> "QmcConfig":
        return replace(self, T=T)

    def meta(self) -> dict:
        return {"L": self.lattice.L, "J": self.params.J, "h": self.params.h,
                "T": self.T, "n_thermalization": self.n_thermalization,
                "n_measure": self.n_measure, "n_bins": self.n_bins,
                "rng_seed": self.rng_seed, "n_chains": self.n_chains,
                "engine_version": ENGINE_VERSION}


def coarse_config(config: QmcConfig, factor: int = 4) -> QmcConfig:
    """Reduced-precision variant: 1/factor of the measurement sweeps.

    Thermalization is kept at full length; shortening it would trade bias
    for speed, while the coarse evaluations only tolerate extra noise.
    """
    n_measure = max(config.n_bins, (config.n_measure // factor
                                    // config.n_bins) * config.n_bins)
    return replace(config, n_measure=n_measure)


def _run_sse_chain(config: QmcConfig, stream: int,
                   debug_checks: bool) -> EstimateSet:
    lattice, params = config.lattice, config.params
    J, h, T = params.J, params.h, config.T
    beta = 1.0 / T
    m_total = 2.0 * J * lattice.n_bonds + h * lattice.n_sites
    cutoff_max = int(3.0 * beta * m_total) + 1000

    rng = np.random.default_rng(stream)
    state = sse.init_state(lattice, rng,
                           cutoff=max(20, int(0.3 * beta * m_total) + 1))
    nbr = lattice.neighbor_table()

    def workspaces():
        return sse._workspaces(lattice, state.cutoff)

    parent, flip_flag, first_in, last_out = workspaces()
    max_n_seen = state.n
    done = 0
    batch = 10
    while done < config.n_thermalization:
        k = min(batch, config.n_thermalization - done)
        state.n, max_n = sse._thermalize_sweeps(
            state.spins, state.op_type, state.op_arg, lattice.bonds,
            J, h, beta, state.n, rng, k, parent, flip_flag, first_in,
            last_out)
        done += k
        max_n_seen = max(max_n_seen, max_n)
        target = int(np.ceil(1.3 * max_n_seen))
        if target > state.cutoff:
            if target > cutoff_max:
                raise DiagnosticsError(
                    f"operator-string cutoff grew past the safety bound "
                    f"{cutoff_max} (wanted {target}); the chain is not "
                    f"converging at T={T}")
            state.grow_cutoff(target)
            parent, flip_flag, first_in, last_out = workspaces()
        if debug_checks:
            sse.validate_state(state, lattice)

    samples = np.empty((config.n_measure, 6))
    if debug_checks:
        for k in range(config.n_measure):
            state.n, _ = sse._measure_sweeps(
                state.spins, state.op_type, state.op_arg, lattice.bonds, nbr,
                J, h, beta, state.n, rng, samples[k:k + 1], parent, flip_flag,
                first_in, last_out)
            sse.validate_state(state, lattice)
        saturated = False
    else:
        state.n, max_n = sse._measure_sweeps(
            state.spins, state.op_type, state.op_arg, lattice.bonds, nbr,
            J, h, beta, state.n, rng, samples, parent, flip_flag, first_in,
            last_out)
        saturated = max_n >= state.cutoff

    shift = J * lattice.n_bonds + h * lattice.n_sites
    n2 = lattice.n_sites ** 2
    series = {
        "total_energy": shift - T * samples[:, 0],
        "zz_bond_sum": samples[:, 3].copy(),
        "x_sum": T * samples[:, 2] / h,
        "M2": samples[:, 4] / n2,
        "M4": samples[:, 5] / (n2 * n2),
        "C_nn": samples[:, 3] / lattice.n_sites,
    }
    meta = config.meta()
    meta.update(engine="sse", chain_stream=stream, cutoff=state.cutoff,
                cutoff_saturated=bool(saturated))
    return estimate_set_from_samples(series, config.n_bins, meta)


def _run_classical_chain(config: QmcConfig, stream: int) -> EstimateSet:
    rng = np.random.default_rng(stream)
    series = run_classical_chain(config.lattice, config.params.J, config.T,
                                 config.n_thermalization, config.n_measure,
                                 rng)
    meta = config.meta()
    meta.update(engine="classical-ising", chain_stream=stream)
    return estimate_set_from_samples(series, config.n_bins, meta)


def run_qmc(config: QmcConfig, debug_checks: bool = False,
            max_workers: int = 1) -> EstimateSet:
    """Sample the thermal state at (h, T) and return the full EstimateSet."""

    def one_chain(k: int) -> EstimateSet:
        stream = chain_stream(config.rng_seed, k)
        if config.params.h == 0.0:
            est = _run_classical_chain(config, stream)
        else:
            est = _run_sse_chain(config, stream, debug_checks)
        est.meta["chain_index"] = k
        return est

    if config.n_chains == 1:
        return one_chain(0)
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            chains = list(pool.map(one_chain, range(config.n_chains)))
    else:
        chains = [one_chain(k) for k in range(config.n_chains)]
    return merge_chains(chains)
