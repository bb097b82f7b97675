"""Real-time evolution of quenched thermal ensembles via block spectra.

Everything happens sector by sector: the initial Gibbs (or ground-manifold)
density matrix, the post-quench evolution operator, and every observable are
block diagonal in the shared symmetry sectors, so

    <O>(t) = sum_q Tr(exp(-i H_fq t) rho_iq exp(+i H_fq t) O_q) / Z_i.

Working in the eigenbasis of H_f makes the time dependence a pure phase
factor per matrix element: no time-stepping, no discretization error.  The
infinite-time average keeps the diagonal of rho in the H_f eigenbasis,
block-averaged inside clusters of degenerate eigenvalues.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ed import (ObservableSpec, SectorSpectrum, diagonalize,
                 observable_matrix, temperature_at_energy,
                 thermal_expectation)
from .lattice import LatticeSpec, ModelParams, QuenchSpec

REALITY_TOL = 1e-10
DEGENERACY_REL_GAP = 1e-10


@dataclass
class TimeSeries:
    kind: str
    times: np.ndarray
    values: np.ndarray
    lattice_L: int
    quench: QuenchSpec
    meta: dict = field(default_factory=dict)


@dataclass
class SteadyStatePrediction:
    kind: str
    value: float
    T_f: float
    source: str  # "ed-exact" or "qmc"
    E_q: float = float("nan")


@dataclass
class _BlockPair:
    """Initial density block and final-Hamiltonian eigendata for one sector."""

    rho_tilde: np.ndarray  # rho_i in the H_f eigenbasis (unnormalized)
    energies: np.ndarray   # H_f eigenvalues of the sector
    spec_f: SectorSpectrum


def _prepare_blocks(quench: QuenchSpec, lattice: LatticeSpec,
                    J: float = 1.0):
    """Diagonalize H_i and H_f on the shared sector structure and build
    the initial density blocks rotated into the H_f eigenbasis."""
    spectra_i = diagonalize(lattice, ModelParams(J=J, h=quench.h_i))
    spectra_f = diagonalize(lattice, ModelParams(J=J, h=quench.h_f))
    pairs = []
    if quench.ground_state:
        e_min = min(s.eigenvalues[0] for s in spectra_i)
        tol = 1e-10 * max(1.0, abs(e_min))
        g_total = sum(int((s.eigenvalues <= e_min + tol).sum())
                      for s in spectra_i)
        Z = float(g_total)
        for s_i, s_f in zip(spectra_i, spectra_f):
            sel = s_i.eigenvalues <= e_min + tol
            V = s_i.eigenvectors[:, sel]
            rho = V @ V.conj().T
            M = s_f.eigenvectors.conj().T @ rho @ s_f.eigenvectors
            pairs.append(_BlockPair(rho_tilde=M, energies=s_f.eigenvalues,
                                    spec_f=s_f))
    else:
        e_min = min(s.eigenvalues[0] for s in spectra_i)
        Z = 0.0
        for s_i in spectra_i:
            Z += float(np.exp(-(s_i.eigenvalues - e_min) / quench.T_i).sum())
        for s_i, s_f in zip(spectra_i, spectra_f):
            w = np.exp(-(s_i.eigenvalues - e_min) / quench.T_i)
            M = s_f.eigenvectors.conj().T @ s_i.eigenvectors
            rho_tilde = (M * w) @ M.conj().T
            pairs.append(_BlockPair(rho_tilde=rho_tilde,
                                    energies=s_f.eigenvalues, spec_f=s_f))
    return pairs, Z, spectra_i, spectra_f


def evolve(quench: QuenchSpec, lattice: LatticeSpec, obs: ObservableSpec,
           times, J: float = 1.0) -> TimeSeries:
    """<O>(t) after the quench; exact for the given lattice.

    The t = 0 value equals the initial-ensemble expectation of O, and values
    are real to REALITY_TOL (asserted) before the imaginary part is dropped.
    """
    times = np.asarray(times, dtype=np.float64)
    pairs, Z, _, spectra_f = _prepare_blocks(quench, lattice, J)
    values = np.zeros(len(times), dtype=np.complex128)
    for pair, spec_f in zip(pairs, spectra_f):
        O_q = observable_matrix(spec_f, obs)
        O_tilde = spec_f.eigenvectors.conj().T @ O_q @ spec_f.eigenvectors
        A = pair.rho_tilde * O_tilde.T  # A_mn = rho_mn * O_nm
        E = pair.energies
        for k, t in enumerate(times):
            u = np.exp(-1j * E * t)
            values[k] += u @ A @ u.conj()
    values /= Z
    max_imag = float(np.max(np.abs(values.imag))) if len(times) else 0.0
    assert max_imag < REALITY_TOL, f"imaginary residue {max_imag}"
    real_values = values.real.copy()
    if obs.kind == "M2":
        floor = 1.0 / lattice.n_sites
        assert np.all(real_values >= floor - 1e-9), "M2 below its 1/L^2 floor"
        assert np.all(real_values <= 1.0 + 1e-9)
    return TimeSeries(kind=obs.kind, times=times, values=real_values,
                      lattice_L=lattice.L, quench=quench,
                      meta={"J": J})


def diagonal_ensemble(quench: QuenchSpec, lattice: LatticeSpec,
                      obs: ObservableSpec, J: float = 1.0) -> float:
    """Infinite-time average of <O>(t): the diagonal ensemble value.

    Degenerate H_f eigenvalues (relative gap below DEGENERACY_REL_GAP) keep
    their whole block, not just the strict diagonal.
    """
    pairs, Z, _, spectra_f = _prepare_blocks(quench, lattice, J)
    total = 0.0 + 0.0j
    for pair, spec_f in zip(pairs, spectra_f):
        O_q = observable_matrix(spec_f, obs)
        O_tilde = spec_f.eigenvectors.conj().T @ O_q @ spec_f.eigenvectors
        A = pair.rho_tilde * O_tilde.T
        E = pair.energies
        scale = max(1.0, float(np.max(np.abs(E)))) if len(E) else 1.0
        gap_tol = DEGENERACY_REL_GAP * scale
        start = 0
        for stop in range(1, len(E) + 1):
            if stop == len(E) or E[stop] - E[stop - 1] > gap_tol:
                total += A[start:stop, start:stop].sum()
                start = stop
    value = total / Z
    assert abs(value.imag) < REALITY_TOL
    return float(value.real)


def quench_energy_exact(quench: QuenchSpec, lattice: LatticeSpec,
                        J: float = 1.0) -> float:
    """E_q = <H_f> in the initial ensemble, from the block spectra."""
    spectra_i = diagonalize(lattice, ModelParams(J=J, h=quench.h_i))
    obs_hf = ObservableSpec(kind="total_energy", J=J, h=quench.h_f)
    if quench.ground_state:
        from .ed import ground_state_expectation

        value, _ = ground_state_expectation(spectra_i, obs_hf)
        return value
    return thermal_expectation(spectra_i, quench.T_i, obs_hf)


def steady_state_prediction(quench: QuenchSpec, lattice: LatticeSpec,
                            obs: ObservableSpec, tf_source="ed-exact",
                            J: float = 1.0) -> SteadyStatePrediction:
    """Thermal value of O at (h_f, T_f), with T_f from energy conservation.

    ``tf_source`` is either "ed-exact" (invert the exact E(T) of H_f) or a
    TfResult-like object with a T_f attribute imported from the QMC pipeline.
    """
    spectra_f = diagonalize(lattice, ModelParams(J=J, h=quench.h_f))
    e_q = quench_energy_exact(quench, lattice, J)
    if tf_source == "ed-exact":
        T_f = temperature_at_energy(spectra_f, e_q)
        source = "ed-exact"
    else:
        T_f = float(tf_source.T_f)
        source = "qmc"
    if T_f == 0.0:
        from .ed import ground_state_expectation

        value, _ = ground_state_expectation(spectra_f, obs)
    else:
        value = thermal_expectation(spectra_f, T_f, obs)
    return SteadyStatePrediction(kind=obs.kind, value=value, T_f=T_f,
                                 source=source, E_q=e_q)


def running_time_average(series: TimeSeries) -> np.ndarray:
    """Cumulative mean of a time series by trapezoidal integration."""
    t, v = series.times, series.values
    if len(t) < 2:
        return v.copy()
    integral = np.concatenate(
        [[0.0], np.cumsum(0.5 * (v[1:] + v[:-1]) * np.diff(t))])
    out = v.copy()
    out[1:] = integral[1:] / (t[1:] - t[0])
    return out
