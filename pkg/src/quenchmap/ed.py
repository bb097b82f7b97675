"""Exact diagonalization of the transverse-field Ising model on small tori.

Two routes are provided and cross-checked against each other:

* a dense route that diagonalizes the full 2**n Hamiltonian (the trust anchor,
  n_sites <= 14 by default), and
* a symmetry-reduced route that block-diagonalizes H over the abelian group of
  the L**2 torus translations times the global spin flip (prod_i sx_i),
  n_sites <= 16 by default.

Basis states are integers; bit i of a state is 0 for sz_i = +1 and 1 for
sz_i = -1.  Symmetrized basis states are built from orbit representatives
(the minimal integer in each group orbit) in the standard way: a representative
r enters the sector with character chi iff chi is trivial on the stabilizer of
r, and matrix elements between sectors carry sqrt(|stab_b| / |stab_a|) times
the conjugated character of the group element mapping the image state back to
its representative.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ResourceLimitError
from .lattice import LatticeSpec, ModelParams, translation_orbits

DEFAULT_SYMMETRY_LIMIT = 16
DEFAULT_DENSE_LIMIT = 14
SPECTRUM_CACHE_VERSION = 1

OBSERVABLE_KINDS = ("total_energy", "zz_bond_sum", "x_sum", "M2", "M4", "C_nn",
                    "identity")


@dataclass(frozen=True)
class ObservableSpec:
    """An observable that is block-diagonal in the symmetry sectors.

    All supported kinds commute with every translation and with the global
    spin flip.  ``total_energy`` needs the couplings of the Hamiltonian it
    refers to (J, h); the other kinds ignore them.
    """

    kind: str
    J: float = 1.0
    h: float = 0.0

    def __post_init__(self):
        if self.kind not in OBSERVABLE_KINDS:
            raise ValueError(f"unknown observable kind {self.kind!r}; "
                             f"expected one of {OBSERVABLE_KINDS}")


@dataclass
class SectorBasis:
    """One symmetry sector: representatives, stabilizer sizes, characters."""

    label: tuple  # (kx, ky, parity) or ("full",)
    reps: np.ndarray          # representative state integers, ascending
    stab_sizes: np.ndarray    # |stabilizer| per representative
    chars: np.ndarray         # character value per group element
    index_of: dict            # state integer -> row in reps

    @property
    def dim(self) -> int:
        return len(self.reps)


@dataclass
class SymmetryBasis:
    """Shared machinery for all sectors of one lattice."""

    lattice: LatticeSpec
    apply_table: np.ndarray   # (2**n, n_group) image of each state
    rep_of: np.ndarray        # orbit representative per state
    to_rep_g: np.ndarray      # a group element index mapping state -> its rep
    stab_size: np.ndarray     # stabilizer size per state
    zz_of: np.ndarray         # sum_bonds sz*sz per state
    m_of: np.ndarray          # sum_i sz per state
    sectors: list             # list[SectorBasis]


@dataclass
class SectorSpectrum:
    """Eigenvalues/eigenvectors of one symmetry block (or the full basis)."""

    label: tuple
    dim: int
    eigenvalues: np.ndarray   # ascending
    eigenvectors: np.ndarray  # orthonormal columns, sector basis
    basis: SectorBasis
    lattice: LatticeSpec
    params: ModelParams


def _group_characters(L: int, kx: int, ky: int, parity: int) -> np.ndarray:
    """Characters over the 2*L**2 group elements, translations first."""
    n_tr = L * L
    tx = np.arange(n_tr) % L
    ty = np.arange(n_tr) // L
    phase = np.exp(2j * np.pi * (kx * tx + ky * ty) / L)
    return np.concatenate([phase, parity * phase])


def build_symmetry_basis(lattice: LatticeSpec) -> SymmetryBasis:
    """Build orbit tables and all (momentum, parity) sector bases."""
    L, n = lattice.L, lattice.n_sites
    n_states = 1 << n
    perms = translation_orbits(lattice)
    states = np.arange(n_states, dtype=np.int64)
    bits = (states[:, None] >> np.arange(n)) & 1  # (n_states, n)

    n_tr = L * L
    n_group = 2 * n_tr
    apply_table = np.empty((n_states, n_group), dtype=np.int64)
    full_mask = n_states - 1
    for t in range(n_tr):
        weights = (np.int64(1) << perms[t]).astype(np.int64)
        translated = bits @ weights
        apply_table[:, t] = translated
        apply_table[:, n_tr + t] = full_mask - translated  # global spin flip

    rep_of = apply_table.min(axis=1)
    to_rep_g = apply_table.argmin(axis=1)
    stab_size = (apply_table == states[:, None]).sum(axis=1)

    sz = 1 - 2 * bits  # (n_states, n)
    zz_of = np.zeros(n_states, dtype=np.int64)
    for i, j in lattice.bonds:
        zz_of += sz[:, i] * sz[:, j]
    m_of = sz.sum(axis=1)

    reps_mask = rep_of == states
    reps_all = states[reps_mask]
    sectors = []
    for parity in (1, -1):
        for ky in range(L):
            for kx in range(L):
                chars = _group_characters(L, kx, ky, parity)
                keep = []
                for s in reps_all:
                    stab = apply_table[s] == s
                    if abs(chars[stab].sum()) > 0.5:
                        keep.append(s)
                reps = np.array(keep, dtype=np.int64)
                sectors.append(SectorBasis(
                    label=(kx, ky, parity),
                    reps=reps,
                    stab_sizes=stab_size[reps],
                    chars=chars,
                    index_of={int(s): i for i, s in enumerate(reps)},
                ))
    return SymmetryBasis(lattice=lattice, apply_table=apply_table,
                         rep_of=rep_of, to_rep_g=to_rep_g,
                         stab_size=stab_size, zz_of=zz_of, m_of=m_of,
                         sectors=sectors)


def _sector_operator(sym: SymmetryBasis, sector: SectorBasis,
                     diag: np.ndarray | None,
                     flip_coeff: float) -> np.ndarray:
    """Dense sector matrix of  diag(s) + flip_coeff * sum_i sx_i.

    ``diag`` is indexed by state integer.  The result is Hermitian by
    construction; an assertion guards the bookkeeping.
    """
    dim = sector.dim
    n = sym.lattice.n_sites
    A = np.zeros((dim, dim), dtype=np.complex128)
    if diag is not None:
        A[np.diag_indices(dim)] = diag[sector.reps]
    if flip_coeff != 0.0:
        sqrt_stab = np.sqrt(sector.stab_sizes.astype(np.float64))
        for a, s_a in enumerate(sector.reps):
            for i in range(n):
                s_j = int(s_a) ^ (1 << i)
                s_b = int(sym.rep_of[s_j])
                b = sector.index_of.get(s_b)
                if b is None:
                    continue
                u = sym.to_rep_g[s_j]
                A[b, a] += (flip_coeff * np.conj(sector.chars[u])
                            * sqrt_stab[b] / sqrt_stab[a])
    if dim:
        herm_defect = np.max(np.abs(A - A.conj().T))
        scale = max(1.0, np.max(np.abs(A)))
        assert herm_defect < 1e-12 * scale, \
            f"sector operator not Hermitian: {herm_defect}"
        A = 0.5 * (A + A.conj().T)  # kill roundoff asymmetry
    return A


def sector_dimensions(lattice: LatticeSpec) -> list[int]:
    """Dimensions of every (momentum, parity) block; sums to 2**n_sites."""
    sym = build_symmetry_basis(lattice)
    return [sec.dim for sec in sym.sectors]


def dense_hamiltonian(lattice: LatticeSpec, params: ModelParams) -> np.ndarray:
    """Full 2**n x 2**n Hamiltonian matrix (real)."""
    n = lattice.n_sites
    n_states = 1 << n
    states = np.arange(n_states, dtype=np.int64)
    bits = (states[:, None] >> np.arange(n)) & 1
    sz = 1 - 2 * bits
    diag = np.zeros(n_states)
    for i, j in lattice.bonds:
        diag += sz[:, i] * sz[:, j]
    H = np.diag(-params.J * diag)
    for i in range(n):
        flipped = states ^ (1 << i)
        H[flipped, states] += -params.h
    return H


def diagonalize(lattice: LatticeSpec, params: ModelParams,
                use_symmetry: bool = True,
                max_sites: int | None = None) -> list[SectorSpectrum]:
    """Diagonalize H, either blockwise over symmetry sectors or densely.

    Raises ResourceLimitError when n_sites exceeds the route's limit
    (default 16 reduced, 14 dense).
    """
    limit = max_sites if max_sites is not None else (
        DEFAULT_SYMMETRY_LIMIT if use_symmetry else DEFAULT_DENSE_LIMIT)
    if lattice.n_sites > limit:
        route = "symmetry-reduced" if use_symmetry else "dense"
        raise ResourceLimitError(
            f"{lattice.n_sites} sites exceeds the {route} ED limit of "
            f"{limit} sites")
    if not use_symmetry:
        return [_diagonalize_dense(lattice, params)]
    sym = build_symmetry_basis(lattice)
    spectra = []
    for sector in sym.sectors:
        if sector.dim == 0:
            continue
        H = _sector_operator(sym, sector, diag=-params.J * sym.zz_of,
                             flip_coeff=-params.h)
        evals, evecs = np.linalg.eigh(H)
        spectra.append(SectorSpectrum(
            label=sector.label, dim=sector.dim, eigenvalues=evals,
            eigenvectors=evecs, basis=sector, lattice=lattice, params=params))
    return spectra


def _diagonalize_dense(lattice: LatticeSpec, params: ModelParams) -> SectorSpectrum:
    H = dense_hamiltonian(lattice, params)
    evals, evecs = np.linalg.eigh(H)
    n_states = H.shape[0]
    basis = SectorBasis(label=("full",),
                        reps=np.arange(n_states, dtype=np.int64),
                        stab_sizes=np.ones(n_states, dtype=np.int64),
                        chars=np.ones(1, dtype=np.complex128),
                        index_of={})
    return SectorSpectrum(label=("full",), dim=n_states, eigenvalues=evals,
                          eigenvectors=evecs.astype(np.complex128),
                          basis=basis, lattice=lattice, params=params)


def _state_functions(lattice: LatticeSpec, reps: np.ndarray):
    """zz and magnetization per basis state for a set of state integers."""
    n = lattice.n_sites
    bits = (reps[:, None] >> np.arange(n)) & 1
    sz = 1 - 2 * bits
    zz = np.zeros(len(reps))
    for i, j in lattice.bonds:
        zz += sz[:, i] * sz[:, j]
    return zz, sz.sum(axis=1).astype(np.float64)


def observable_matrix(spec: SectorSpectrum, obs: ObservableSpec) -> np.ndarray:
    """Observable block in this spectrum's sector basis (not eigenbasis)."""
    lattice = spec.lattice
    L2 = float(lattice.n_sites)
    sector = spec.basis
    zz, m = _state_functions(lattice, sector.reps)
    kind = obs.kind
    if kind == "identity":
        return np.eye(spec.dim, dtype=np.complex128)
    if kind == "zz_bond_sum":
        return np.diag(zz.astype(np.complex128))
    if kind == "C_nn":
        return np.diag((zz / L2).astype(np.complex128))
    if kind == "M2":
        return np.diag(((m / L2) ** 2).astype(np.complex128))
    if kind == "M4":
        return np.diag(((m / L2) ** 4).astype(np.complex128))
    if kind in ("x_sum", "total_energy"):
        if spec.label == ("full",):
            return _dense_flip_operator(lattice, zz, kind, obs)
        sym = _sym_basis_for(spec)
        if kind == "x_sum":
            return _sector_operator(sym, sector, diag=None, flip_coeff=1.0)
        return _sector_operator(sym, sector, diag=-obs.J * sym.zz_of,
                                flip_coeff=-obs.h)
    raise ValueError(f"unhandled observable kind {kind!r}")


def _dense_flip_operator(lattice, zz, kind, obs):
    n = lattice.n_sites
    n_states = 1 << n
    states = np.arange(n_states, dtype=np.int64)
    coeff = 1.0 if kind == "x_sum" else -obs.h
    A = np.zeros((n_states, n_states), dtype=np.complex128)
    if kind == "total_energy":
        A[np.diag_indices(n_states)] = -obs.J * zz
    for i in range(n):
        A[states ^ (1 << i), states] += coeff
    return A


_SYM_BASIS_CACHE: dict[int, SymmetryBasis] = {}


def _sym_basis_for(spec: SectorSpectrum) -> SymmetryBasis:
    key = spec.lattice.L
    sym = _SYM_BASIS_CACHE.get(key)
    if sym is None:
        sym = build_symmetry_basis(spec.lattice)
        _SYM_BASIS_CACHE[key] = sym
    return sym


def eigenbasis_diagonal(spec: SectorSpectrum, obs: ObservableSpec) -> np.ndarray:
    """<n|O|n> for every eigenvector of the block; real within 1e-10."""
    if obs.kind == "total_energy" and obs.J == spec.params.J and obs.h == spec.params.h:
        return spec.eigenvalues.copy()
    O = observable_matrix(spec, obs)
    V = spec.eigenvectors
    vals = np.einsum("in,ij,jn->n", V.conj(), O, V)
    assert np.max(np.abs(vals.imag)) < 1e-10
    return vals.real


def _boltzmann_weights(spectra: list[SectorSpectrum], T: float):
    """Shifted Boltzmann weights per sector, and their total."""
    e_min = min(s.eigenvalues[0] for s in spectra)
    weights = [np.exp(-(s.eigenvalues - e_min) / T) for s in spectra]
    Z = sum(w.sum() for w in weights)
    return weights, Z


def thermal_expectation(spectra: list[SectorSpectrum], T: float,
                        obs: ObservableSpec) -> float:
    """Exact Gibbs expectation <O> at temperature T from the block spectra."""
    if T <= 0:
        raise ValueError(f"temperature must be > 0, got T={T}")
    weights, Z = _boltzmann_weights(spectra, T)
    total = 0.0
    for spec, w in zip(spectra, weights):
        total += float(w @ eigenbasis_diagonal(spec, obs))
    return total / Z


def ground_state_expectation(spectra: list[SectorSpectrum],
                             obs: ObservableSpec,
                             degeneracy_tol: float = 1e-10):
    """Uniform average of <O> over the global ground manifold.

    Returns (value, degeneracy); degeneracy > 1 flags a degenerate manifold.
    """
    e_min = min(s.eigenvalues[0] for s in spectra)
    tol = degeneracy_tol * max(1.0, abs(e_min))
    total, count = 0.0, 0
    for spec in spectra:
        sel = spec.eigenvalues <= e_min + tol
        if not sel.any():
            continue
        diag = eigenbasis_diagonal(spec, obs)
        total += float(diag[sel].sum())
        count += int(sel.sum())
    return total / count, count


def energy_vs_temperature(spectra: list[SectorSpectrum],
                          T_grid) -> np.ndarray:
    """Exact total energy E(T) on a grid; nondecreasing in T."""
    T_grid = np.asarray(T_grid, dtype=np.float64)
    if np.any(T_grid <= 0):
        raise ValueError("all temperatures must be > 0")
    out = np.empty(len(T_grid))
    for k, T in enumerate(T_grid):
        weights, Z = _boltzmann_weights(spectra, T)
        out[k] = sum(float(w @ s.eigenvalues) for s, w in zip(spectra, weights)) / Z
    return out


def heat_capacity(spectra: list[SectorSpectrum], T: float) -> float:
    """dE/dT = (<E^2> - <E>^2) / T^2 from the spectra."""
    weights, Z = _boltzmann_weights(spectra, T)
    e1 = sum(float(w @ s.eigenvalues) for s, w in zip(spectra, weights)) / Z
    e2 = sum(float(w @ s.eigenvalues ** 2) for s, w in zip(spectra, weights)) / Z
    return (e2 - e1 ** 2) / T ** 2


def temperature_at_energy(spectra: list[SectorSpectrum], E: float,
                          T_lo: float = 1e-6, T_hi: float = 1e4) -> float:
    """Invert the exact E(T) curve; returns 0.0 when E is at/below the ground energy."""
    from scipy.optimize import brentq

    e_min = min(s.eigenvalues[0] for s in spectra)
    if E <= e_min + 1e-12 * max(1.0, abs(e_min)):
        return 0.0

    def f(T):
        return energy_vs_temperature(spectra, [T])[0] - E

    if f(T_hi) < 0:
        raise ValueError(f"energy {E} above E(T={T_hi}); not invertible here")
    while f(T_lo) > 0 and T_lo > 1e-12:
        T_lo /= 4.0
    if f(T_lo) > 0:
        return 0.0
    return float(brentq(f, T_lo, T_hi, xtol=1e-12, rtol=1e-14))


def save_spectra(path, spectra: list[SectorSpectrum]) -> None:
    """Persist spectra to a versioned .npz archive."""
    payload = {"version": np.array([SPECTRUM_CACHE_VERSION]),
               "n_sectors": np.array([len(spectra)]),
               "L": np.array([spectra[0].lattice.L]),
               "J": np.array([spectra[0].params.J]),
               "h": np.array([spectra[0].params.h])}
    for k, s in enumerate(spectra):
        payload[f"label_{k}"] = np.array(
            [-1] if s.label == ("full",) else list(s.label))
        payload[f"evals_{k}"] = s.eigenvalues
        payload[f"evecs_{k}"] = s.eigenvectors
        payload[f"reps_{k}"] = s.basis.reps
        payload[f"stabs_{k}"] = s.basis.stab_sizes
        payload[f"chars_{k}"] = s.basis.chars
    np.savez_compressed(path, **payload)


def load_spectra(path) -> list[SectorSpectrum]:
    """Load spectra saved by save_spectra."""
    from .lattice import build_lattice

    with np.load(path) as data:
        version = int(data["version"][0])
        if version != SPECTRUM_CACHE_VERSION:
            raise ValueError(f"spectrum cache version {version} != "
                             f"{SPECTRUM_CACHE_VERSION}")
        lattice = build_lattice(int(data["L"][0]))
        params = ModelParams(J=float(data["J"][0]), h=float(data["h"][0]))
        spectra = []
        for k in range(int(data["n_sectors"][0])):
            raw = data[f"label_{k}"]
            label = ("full",) if len(raw) == 1 else tuple(int(v) for v in raw)
            reps = data[f"reps_{k}"]
            basis = SectorBasis(
                label=label, reps=reps, stab_sizes=data[f"stabs_{k}"],
                chars=data[f"chars_{k}"],
                index_of={int(s): i for i, s in enumerate(reps)})
            spectra.append(SectorSpectrum(
                label=label, dim=len(reps), eigenvalues=data[f"evals_{k}"],
                eigenvectors=data[f"evecs_{k}"], basis=basis,
                lattice=lattice, params=params))
    return spectra


def cached_diagonalize(lattice: LatticeSpec, params: ModelParams,
                       cache_dir, use_symmetry: bool = True) -> list[SectorSpectrum]:
    """diagonalize() with an on-disk .npz cache keyed by (L, J, h, route)."""
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    route = "sym" if use_symmetry else "dense"
    name = (f"spectra_L{lattice.L}_J{params.J!r}_h{params.h!r}_{route}"
            f"_v{SPECTRUM_CACHE_VERSION}.npz")
    path = cache_dir / name
    if path.exists():
        return load_spectra(path)
    spectra = diagonalize(lattice, params, use_symmetry=use_symmetry)
    save_spectra(path, spectra)
    from .io import sha256_file

    sidecar = path.with_name(path.name + ".sha256")
    sidecar.write_text(sha256_file(path) + "\n")
    return spectra
