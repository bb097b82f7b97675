"""Shared fixtures and the independent dense oracle.

The oracle builds Hamiltonians and observables by Kronecker products of
2x2 Pauli matrices (a different construction from the package's bit-twiddled
basis), so agreement between the two is a genuine cross-check.
"""

import numpy as np
import pytest
from scipy.linalg import expm

from quenchmap import ModelParams, build_lattice, diagonalize


def kron_chain(ops):
    out = ops[0]
    for op in ops[1:]:
        out = np.kron(out, op)
    return out


SX = np.array([[0.0, 1.0], [1.0, 0.0]])
SZ = np.array([[1.0, 0.0], [0.0, -1.0]])
ID = np.eye(2)


def site_operator(op, site, n_sites):
    ops = [ID] * n_sites
    ops[site] = op
    return kron_chain(ops)


def kron_hamiltonian(lattice, J, h):
    """H = -J sum_bonds sz sz - h sum_i sx, built by Kronecker products.

    Convention: site i acts on tensor factor i counted from the LEFT, which
    matches bit i of the package's basis ordering only after relabeling; all
    oracle comparisons therefore go through basis-independent quantities
    (spectra, traces, thermal expectations).
    """
    n = lattice.n_sites
    dim = 2 ** n
    H = np.zeros((dim, dim))
    for i, j in lattice.bonds:
        H -= J * site_operator(SZ, i, n) @ site_operator(SZ, j, n)
    for i in range(n):
        H -= h * site_operator(SX, i, n)
    return H


def kron_observable(lattice, kind):
    n = lattice.n_sites
    dim = 2 ** n
    if kind == "x_sum":
        return sum(site_operator(SX, i, n) for i in range(n))
    if kind == "zz_bond_sum":
        return sum(site_operator(SZ, i, n) @ site_operator(SZ, j, n)
                   for i, j in lattice.bonds)
    if kind == "C_nn":
        return kron_observable(lattice, "zz_bond_sum") / n
    if kind == "M2":
        m = sum(site_operator(SZ, i, n) for i in range(n))
        return (m @ m) / n ** 2
    if kind == "M4":
        m = sum(site_operator(SZ, i, n) for i in range(n))
        return np.linalg.matrix_power(m, 4) / n ** 4
    if kind == "z_sum":
        return sum(site_operator(SZ, i, n) for i in range(n))
    raise ValueError(kind)


def kron_thermal(H, T, O):
    """Tr(O exp(-H/T)) / Tr(exp(-H/T)) by full matrix exponentiation."""
    rho = expm(-H / T)
    return float(np.trace(O @ rho).real / np.trace(rho).real)


@pytest.fixture(scope="session")
def lat3():
    return build_lattice(3)


@pytest.fixture(scope="session")
def lat2():
    return build_lattice(2)


@pytest.fixture(scope="session")
def spectra3_h2(lat3):
    return diagonalize(lat3, ModelParams(J=1.0, h=2.0))


@pytest.fixture(scope="session")
def spectra3_h3(lat3):
    return diagonalize(lat3, ModelParams(J=1.0, h=3.0))
