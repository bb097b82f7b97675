"""Square-lattice geometry and model parameters for the transverse-field Ising model.

The Hamiltonian is

    H = -J sum_<ij> sz_i sz_j - h sum_i sx_i

on an L x L torus.  Sites are indexed row-major, ``index = y*L + x``.  Bonds are
enumerated site by site in ascending index order, right edge before up edge, so
the bond list is a pure function of L.  Every energy in this package is a total
(not per-site) unless a name says otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LatticeSpec:
    """L x L periodic square lattice.

    ``bonds`` has shape (2*L**2, 2); row b holds the two site indices of edge b.
    For L = 2 the torus has two distinct edges between each neighbor pair, so
    site pairs repeat and ``degenerate_torus`` is set.
    """

    L: int
    n_sites: int
    bonds: np.ndarray
    coords: np.ndarray  # (n_sites, 2), columns (x, y)
    degenerate_torus: bool = False

    def __post_init__(self):
        self.bonds.setflags(write=False)
        self.coords.setflags(write=False)

    @property
    def n_bonds(self) -> int:
        return self.bonds.shape[0]

    def site_index(self, x: int, y: int) -> int:
        return (y % self.L) * self.L + (x % self.L)

    def neighbor_table(self) -> np.ndarray:
        """(n_sites, 4) array of nearest neighbors: +x, +y, -x, -y."""
        L = self.L
        nbr = np.empty((self.n_sites, 4), dtype=np.int64)
        for s in range(self.n_sites):
            x, y = s % L, s // L
            nbr[s, 0] = self.site_index(x + 1, y)
            nbr[s, 1] = self.site_index(x, y + 1)
            nbr[s, 2] = self.site_index(x - 1, y)
            nbr[s, 3] = self.site_index(x, y - 1)
        return nbr


@dataclass(frozen=True)
class ModelParams:
    """Couplings of the Hamiltonian. J = 1 in physics runs; h >= 0."""

    J: float = 1.0
    h: float = 0.0

    def __post_init__(self):
        if self.h < 0:
            raise ValueError(f"transverse field must be >= 0, got h={self.h}")


@dataclass(frozen=True)
class ThermalPoint:
    """A point (h, T) in the equilibrium phase diagram; T > 0."""

    h: float
    T: float

    def __post_init__(self):
        if self.T <= 0:
            raise ValueError(f"temperature must be > 0, got T={self.T}")


@dataclass(frozen=True)
class QuenchSpec:
    """Instantaneous field quench h_i -> h_f from a thermal or ground state.

    ``ground_state=True`` replaces the initial Gibbs ensemble by the (possibly
    degenerate) ground manifold of the initial Hamiltonian; T_i is ignored.
    """

    h_i: float
    h_f: float
    T_i: float = 0.0
    ground_state: bool = False

    def __post_init__(self):
        if self.h_i < 0 or self.h_f < 0:
            raise ValueError("fields must be >= 0")
        if not self.ground_state and self.T_i <= 0:
            raise ValueError("T_i must be > 0 unless ground_state is set")


def build_lattice(L: int) -> LatticeSpec:
    """Build the L x L periodic lattice with the canonical bond order.

    Raises ValueError for L < 2.  L = 2 is produced but flagged degenerate
    (doubled edges on the 2-torus); physics pipelines should use L >= 3.
    """
    if L < 2:
        raise ValueError(f"lattice size must be >= 2, got L={L}")
    n = L * L
    bonds = np.empty((2 * n, 2), dtype=np.int64)
    coords = np.empty((n, 2), dtype=np.int64)
    k = 0
    for s in range(n):
        x, y = s % L, s // L
        coords[s] = (x, y)
        bonds[k] = (s, y * L + (x + 1) % L)  # right edge
        bonds[k + 1] = (s, ((y + 1) % L) * L + x)  # up edge
        k += 2
    return LatticeSpec(L=L, n_sites=n, bonds=bonds, coords=coords,
                       degenerate_torus=(L == 2))


def classical_ground_energy(lattice: LatticeSpec, params: ModelParams) -> float:
    """Total energy of the fully polarized state at h = 0: -J * n_bonds."""
    if params.h != 0:
        raise ValueError("classical ground energy is defined at h = 0 only")
    return -params.J * lattice.n_bonds


def translation_orbits(lattice: LatticeSpec) -> np.ndarray:
    """Site permutations of all L**2 torus translations.

    Returns shape (L**2, n_sites); row t = ty*L + tx maps site i to
    ``perms[t, i]``, the image of i under the shift (x,y) -> (x+tx, y+ty).
    Row 0 is the identity.
    """
    L = lattice.L
    n = lattice.n_sites
    perms = np.empty((n, n), dtype=np.int64)
    for ty in range(L):
        for tx in range(L):
            t = ty * L + tx
            for s in range(n):
                x, y = s % L, s // L
                perms[t, s] = ((y + ty) % L) * L + (x + tx) % L
    return perms
