"""Classical 2D Ising sampling for the h = 0 limit.

At zero transverse field the Hamiltonian is diagonal and the Gibbs state is
the classical Ising distribution, where the SSE chain loses its off-diagonal
sector and stops being ergodic.  This path samples it with one Metropolis
sweep plus one Wolff cluster flip per step and feeds the same estimator
interface as the SSE engine (x_sum is exactly zero).
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .lattice import LatticeSpec


@njit(cache=True, nogil=True)
def _classical_sweeps(spins, nbr, bonds, J, beta, rng, samples, stack):
    n_sites = spins.shape[0]
    p_add = 1.0 - np.exp(-2.0 * J * beta)
    for k in range(samples.shape[0]):
        for _ in range(n_sites):
            s = rng.integers(0, n_sites)
            nn = (spins[nbr[s, 0]] + spins[nbr[s, 1]]
                  + spins[nbr[s, 2]] + spins[nbr[s, 3]])
            d_e = 2.0 * J * spins[s] * nn
            if d_e <= 0.0 or rng.random() < np.exp(-beta * d_e):
                spins[s] = -spins[s]
        # one Wolff cluster, flipping sites as they join
        seed = rng.integers(0, n_sites)
        cl_spin = spins[seed]
        spins[seed] = -cl_spin
        stack[0] = seed
        n_stack = 1
        while n_stack > 0:
            n_stack -= 1
            x = stack[n_stack]
            for d in range(4):
                y = nbr[x, d]
                if spins[y] == cl_spin and rng.random() < p_add:
                    spins[y] = -cl_spin
                    stack[n_stack] = y
                    n_stack += 1
        m = 0
        for s in range(n_sites):
            m += spins[s]
        zz = 0
        for b in range(bonds.shape[0]):
            zz += spins[bonds[b, 0]] * spins[bonds[b, 1]]
        samples[k, 0] = zz
        samples[k, 1] = m


def run_classical_chain(lattice: LatticeSpec, J: float, T: float,
                        n_thermalization: int, n_measure: int,
                        rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Sample per-sweep series of all estimators at h = 0."""
    n = lattice.n_sites
    spins = (2 * rng.integers(0, 2, size=n) - 1).astype(np.int8)
    nbr = lattice.neighbor_table()
    stack = np.empty(n, dtype=np.int64)
    beta = 1.0 / T
    if n_thermalization > 0:
        scratch = np.empty((n_thermalization, 2))
        _classical_sweeps(spins, nbr, lattice.bonds, J, beta, rng, scratch,
                          stack)
    samples = np.empty((n_measure, 2))
    _classical_sweeps(spins, nbr, lattice.bonds, J, beta, rng, samples, stack)
    zz = samples[:, 0]
    m = samples[:, 1] / n
    zeros = np.zeros(n_measure)
    return {
        "total_energy": -J * zz,
        "zz_bond_sum": zz.copy(),
        "x_sum": zeros,
        "M2": m ** 2,
        "M4": m ** 4,
        "C_nn": zz / n,
    }
