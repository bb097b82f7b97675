"""Stochastic series expansion in the sz basis for H = -J zz - h sx.

The partition function is expanded in powers of the positive operator
C - H with C = J*n_bonds + h*n_sites, built from three operator species:

* diagonal bond    J(sz_i sz_j + 1)   nonzero (2J) only on parallel spins,
* diagonal site    h * identity,
* off-diagonal site h * sx_i.

The operator string has fixed cutoff length Lambda with identity padding.
``spins`` stores the configuration at imaginary-time slice 0; propagating it
through the whole string returns it to itself (periodicity), which the
cluster update preserves by construction.

The cluster (multibranch) update cuts every site's time line at its site
operators, glues segments through bond operators (all four legs of a bond
operator belong to one cluster), and flips each cluster with probability 1/2.
A site operator bounded by exactly one flipped segment toggles between its
diagonal and off-diagonal species; both carry weight h, so the move is
rejection free.

Estimators:
* total energy   E = C - T <n>            (n = non-identity operator count)
* sum_i <sx_i>   = T <n_offdiag> / h
* sz-diagonal observables (zz, m^2, m^4) are averaged over all Lambda
  propagated time slices.

Operator string encoding: op_type 0 = identity, 1 = diagonal bond,
2 = diagonal site, 3 = off-diagonal site; op_arg holds the bond index
(type 1), the site index (types 2, 3), or -1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .lattice import LatticeSpec, ModelParams


@dataclass
class SseState:
    """Mutable Monte Carlo state; owned by exactly one chain."""

    spins: np.ndarray    # int8, +-1, configuration at slice 0
    op_type: np.ndarray  # int8, length Lambda
    op_arg: np.ndarray   # int64, length Lambda
    n: int               # non-identity operator count

    @property
    def cutoff(self) -> int:
        return len(self.op_type)

    def grow_cutoff(self, new_cutoff: int) -> None:
        """Extend the string with identities (thermalization only)."""
        if new_cutoff <= self.cutoff:
            return
        pad = new_cutoff - self.cutoff
        self.op_type = np.concatenate(
            [self.op_type, np.zeros(pad, dtype=np.int8)])
        self.op_arg = np.concatenate(
            [self.op_arg, np.full(pad, -1, dtype=np.int64)])


def init_state(lattice: LatticeSpec, rng: np.random.Generator,
               cutoff: int = 20) -> SseState:
    spins = (2 * rng.integers(0, 2, size=lattice.n_sites) - 1).astype(np.int8)
    return SseState(spins=spins,
                    op_type=np.zeros(cutoff, dtype=np.int8),
                    op_arg=np.full(cutoff, -1, dtype=np.int64),
                    n=0)


@njit(cache=True, nogil=True)
def _diagonal_update(spins, op_type, op_arg, bonds, J, h, beta, n, rng):
    lam = op_type.shape[0]
    n_b = bonds.shape[0]
    n_sites = spins.shape[0]
    m_total = 2.0 * J * n_b + h * n_sites
    p_site = (h * n_sites) / m_total if m_total > 0.0 else 0.0
    for p in range(lam):
        t = op_type[p]
        if t == 0:
            # propose insertion: accept with min(1, beta*m_total/(lam-n))
            if rng.random() * (lam - n) < beta * m_total:
                if rng.random() < p_site:
                    op_type[p] = 2
                    op_arg[p] = rng.integers(0, n_sites)
                    n += 1
                else:
                    b = rng.integers(0, n_b)
                    if spins[bonds[b, 0]] == spins[bonds[b, 1]]:
                        op_type[p] = 1
                        op_arg[p] = b
                        n += 1
        elif t == 1 or t == 2:
            # propose removal: accept with min(1, (lam-n+1)/(beta*m_total))
            if rng.random() * beta * m_total < (lam - n + 1):
                op_type[p] = 0
                op_arg[p] = -1
                n -= 1
        else:
            s = op_arg[p]
            spins[s] = -spins[s]
    return n


@njit(cache=True, nogil=True)
def _find(parent, v):
    while parent[v] != v:
        parent[v] = parent[parent[v]]
        v = parent[v]
    return v


@njit(cache=True, nogil=True)
def _union(parent, a, b):
    ra = _find(parent, a)
    rb = _find(parent, b)
    if ra == rb:
        return
    if ra < rb:
        parent[rb] = ra
    else:
        parent[ra] = rb


@njit(cache=True, nogil=True)
def _cluster_update(spins, op_type, op_arg, bonds, rng,
                    parent, flip_flag, first_in, last_out):
    lam = op_type.shape[0]
    n_sites = spins.shape[0]
    nv = 4 * lam

    for v in range(nv):
        parent[v] = -2  # unused leg
    for s in range(n_sites):
        first_in[s] = -1
        last_out[s] = -1

    # legs of position p: 4p, 4p+1 enter from below; 4p+2, 4p+3 exit above.
    # Site operators use legs 4p and 4p+2 only.
    for p in range(lam):
        t = op_type[p]
        if t == 0:
            continue
        v0 = 4 * p
        if t == 1:
            b = op_arg[p]
            i = bonds[b, 0]
            j = bonds[b, 1]
            for k in range(4):
                parent[v0 + k] = v0 + k
            if last_out[i] >= 0:
                _union(parent, v0, last_out[i])
            else:
                first_in[i] = v0
            if last_out[j] >= 0:
                _union(parent, v0 + 1, last_out[j])
            else:
                first_in[j] = v0 + 1
            last_out[i] = v0 + 2
            last_out[j] = v0 + 3
            _union(parent, v0, v0 + 1)
            _union(parent, v0, v0 + 2)
            _union(parent, v0, v0 + 3)
        else:
            s = op_arg[p]
            parent[v0] = v0
            parent[v0 + 2] = v0 + 2
            if last_out[s] >= 0:
                _union(parent, v0, last_out[s])
            else:
                first_in[s] = v0
            last_out[s] = v0 + 2
            # no internal union: site operators bound clusters

    # close the periodic time boundary
    for s in range(n_sites):
        if first_in[s] >= 0:
            _union(parent, first_in[s], last_out[s])

    # one fair coin per cluster, drawn in ascending root order
    for v in range(nv):
        flip_flag[v] = 0
    for v in range(nv):
        if parent[v] == -2:
            continue
        r = _find(parent, v)
        if flip_flag[r] == 0:
            flip_flag[r] = 2 if rng.random() < 0.5 else 1

    # spins at slice 0 live on the wrap segment containing first_in[s]
    for s in range(n_sites):
        if first_in[s] < 0:
            if rng.random() < 0.5:
                spins[s] = -spins[s]
        elif flip_flag[_find(parent, first_in[s])] == 2:
            spins[s] = -spins[s]

    # toggle site operators bounded by exactly one flipped cluster
    for p in range(lam):
        t = op_type[p]
        if t == 2 or t == 3:
            v0 = 4 * p
            f_in = flip_flag[_find(parent, v0)] == 2
            f_out = flip_flag[_find(parent, v0 + 2)] == 2
            if f_in != f_out:
                op_type[p] = 5 - t


@njit(cache=True, nogil=True)
def _measure_sample(spins, op_type, op_arg, bonds, nbr, out):
    """One sample: operator counts and slice-averaged diagonal observables.

    out[0..5] = n_total, n_bond, n_offdiag, zz_avg, m2_avg, m4_avg where
    m2/m4 are (sum_i sz_i)^2 and ^4 before normalization.  The spins array
    is propagated through the full string and returns to its input state.
    """
    n_sites = spins.shape[0]
    lam = op_type.shape[0]
    m = 0
    for s in range(n_sites):
        m += spins[s]
    zz = 0
    for b in range(bonds.shape[0]):
        zz += spins[bonds[b, 0]] * spins[bonds[b, 1]]
    n_total = 0
    n_bond = 0
    n_off = 0
    zz_acc = 0.0
    m2_acc = 0.0
    m4_acc = 0.0
    for p in range(lam):
        zz_acc += zz
        m2 = float(m) * float(m)
        m2_acc += m2
        m4_acc += m2 * m2
        t = op_type[p]
        if t == 0:
            continue
        n_total += 1
        if t == 1:
            n_bond += 1
        elif t == 3:
            n_off += 1
            s = op_arg[p]
            old = spins[s]
            nn = (spins[nbr[s, 0]] + spins[nbr[s, 1]]
                  + spins[nbr[s, 2]] + spins[nbr[s, 3]])
            zz -= 2 * old * nn
            m -= 2 * old
            spins[s] = -old
    out[0] = n_total
    out[1] = n_bond
    out[2] = n_off
    inv = 1.0 / lam
    out[3] = zz_acc * inv
    out[4] = m2_acc * inv
    out[5] = m4_acc * inv


@njit(cache=True, nogil=True)
def _thermalize_sweeps(spins, op_type, op_arg, bonds, J, h, beta, n, rng,
                       n_sweeps, parent, flip_flag, first_in, last_out):
    max_n = n
    for _ in range(n_sweeps):
        n = _diagonal_update(spins, op_type, op_arg, bonds, J, h, beta, n, rng)
        _cluster_update(spins, op_type, op_arg, bonds, rng,
                        parent, flip_flag, first_in, last_out)
        if n > max_n:
            max_n = n
    return n, max_n


@njit(cache=True, nogil=True)
def _measure_sweeps(spins, op_type, op_arg, bonds, nbr, J, h, beta, n, rng,
                    samples, parent, flip_flag, first_in, last_out):
    max_n = n
    for k in range(samples.shape[0]):
        n = _diagonal_update(spins, op_type, op_arg, bonds, J, h, beta, n, rng)
        _cluster_update(spins, op_type, op_arg, bonds, rng,
                        parent, flip_flag, first_in, last_out)
        _measure_sample(spins, op_type, op_arg, bonds, nbr, samples[k])
        if n > max_n:
            max_n = n
    return n, max_n


@njit(cache=True, nogil=True)
def _check_state(spins, op_type, op_arg, bonds, n):
    """Return 0 if valid, else an error code.

    1: operator count mismatch; 2: diagonal bond on antiparallel spins;
    3: string not periodic in imaginary time.
    """
    n_sites = spins.shape[0]
    work = np.empty(n_sites, dtype=np.int8)
    for s in range(n_sites):
        work[s] = spins[s]
    count = 0
    for p in range(op_type.shape[0]):
        t = op_type[p]
        if t == 0:
            continue
        count += 1
        if t == 1:
            b = op_arg[p]
            if work[bonds[b, 0]] != work[bonds[b, 1]]:
                return 2
        elif t == 3:
            s = op_arg[p]
            work[s] = -work[s]
    if count != n:
        return 1
    for s in range(n_sites):
        if work[s] != spins[s]:
            return 3
    return 0


def _workspaces(lattice: LatticeSpec, cutoff: int):
    return (np.empty(4 * cutoff, dtype=np.int64),
            np.empty(4 * cutoff, dtype=np.int8),
            np.empty(lattice.n_sites, dtype=np.int64),
            np.empty(lattice.n_sites, dtype=np.int64))


def diagonal_update(state: SseState, lattice: LatticeSpec,
                    params: ModelParams, T: float,
                    rng: np.random.Generator) -> SseState:
    """Insert/remove diagonal operators with Metropolis weights at 1/T."""
    state.n = int(_diagonal_update(state.spins, state.op_type, state.op_arg,
                                   lattice.bonds, params.J, params.h,
                                   1.0 / T, state.n, rng))
    return state


def cluster_update(state: SseState, lattice: LatticeSpec,
                   rng: np.random.Generator) -> SseState:
    """Flip spin clusters and toggle site-operator species accordingly."""
    parent, flip_flag, first_in, last_out = _workspaces(lattice, state.cutoff)
    _cluster_update(state.spins, state.op_type, state.op_arg, lattice.bonds,
                    rng, parent, flip_flag, first_in, last_out)
    return state


def measure(state: SseState, lattice: LatticeSpec, params: ModelParams,
            T: float) -> dict:
    """One sample of every estimator from the current state."""
    nbr = lattice.neighbor_table()
    out = np.empty(6)
    _measure_sample(state.spins, state.op_type, state.op_arg, lattice.bonds,
                    nbr, out)
    return raw_sample_to_observables(out, lattice, params, T)


def raw_sample_to_observables(raw: np.ndarray, lattice: LatticeSpec,
                              params: ModelParams, T: float) -> dict:
    n_sites = lattice.n_sites
    shift = params.J * lattice.n_bonds + params.h * n_sites
    x_sum = T * raw[2] / params.h if params.h > 0 else 0.0
    return {
        "total_energy": shift - T * raw[0],
        "zz_bond_sum": raw[3],
        "x_sum": x_sum,
        "M2": raw[4] / n_sites ** 2,
        "M4": raw[5] / n_sites ** 4,
        "C_nn": raw[3] / n_sites,
    }


def validate_state(state: SseState, lattice: LatticeSpec) -> None:
    """Raise AssertionError if a state invariant is broken."""
    code = int(_check_state(state.spins, state.op_type, state.op_arg,
                            lattice.bonds, state.n))
    messages = {1: "operator count out of sync",
                2: "diagonal bond operator on antiparallel spins",
                3: "operator string not periodic in imaginary time"}
    assert code == 0, messages.get(code, "unknown state corruption")
    assert state.n <= state.cutoff
