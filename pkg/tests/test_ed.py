import itertools

import numpy as np
import pytest

from quenchmap import (ModelParams, ObservableSpec, build_lattice,
                       diagonalize, energy_vs_temperature,
                       ground_state_expectation, thermal_expectation)
from quenchmap.ed import (cached_diagonalize, dense_hamiltonian, heat_capacity,
                          load_spectra, observable_matrix, save_spectra,
                          sector_dimensions, temperature_at_energy)
from quenchmap.errors import ResourceLimitError

from conftest import kron_hamiltonian, kron_observable, kron_thermal


def test_sector_dimensions_sum_to_hilbert_space(lat2, lat3):
    assert sum(sector_dimensions(lat2)) == 2 ** 4
    assert sum(sector_dimensions(lat3)) == 2 ** 9


def test_L4_largest_sector_dimension():
    dims = sector_dimensions(build_lattice(4))
    assert sum(dims) == 2 ** 16
    assert max(dims) <= 4096


def test_decoupled_spins_spectrum(lat2):
    # J=0, h=1: four independent spins, energies -h * sum(+-1) with
    # binomial multiplicities (1, 4, 6, 4, 1)
    spectra = diagonalize(lat2, ModelParams(J=0.0, h=1.0))
    evals = np.sort(np.concatenate([s.eigenvalues for s in spectra]))
    expected = np.sort([-(4 - 2 * k) for k in range(5)
                        for _ in range(len(list(itertools.combinations(range(4), k))))])
    assert evals.shape == (16,)
    assert np.allclose(evals, expected, atol=1e-12)


def test_symmetry_blocks_match_dense_spectrum(lat3, spectra3_h2):
    evals_sym = np.sort(np.concatenate(
        [s.eigenvalues for s in spectra3_h2]))
    dense = np.linalg.eigvalsh(dense_hamiltonian(lat3, ModelParams(1.0, 2.0)))
    assert np.max(np.abs(evals_sym - dense)) < 1e-9
    assert evals_sym[0] == pytest.approx(dense[0], abs=1e-9)


def test_eigenvectors_orthonormal(spectra3_h2):
    for s in spectra3_h2:
        V = s.eigenvectors
        assert np.max(np.abs(V.conj().T @ V - np.eye(s.dim))) < 1e-10
        assert np.all(np.diff(s.eigenvalues) >= -1e-12)


def test_partition_function_blockwise_vs_dense(lat3, spectra3_h2):
    T = 1.3
    dense = np.linalg.eigvalsh(dense_hamiltonian(lat3, ModelParams(1.0, 2.0)))
    e0 = dense[0]
    z_dense = np.exp(-(dense - e0) / T).sum()
    z_sym = sum(np.exp(-(s.eigenvalues - e0) / T).sum()
                for s in spectra3_h2)
    assert abs(z_sym - z_dense) / z_dense < 1e-9


def test_thermal_energy_vs_kron_expm_oracle(lat3, spectra3_h2):
    H = kron_hamiltonian(lat3, J=1.0, h=2.0)
    oracle = kron_thermal(H, 1.0, H)
    ours = thermal_expectation(spectra3_h2, 1.0,
                               ObservableSpec("total_energy", J=1.0, h=2.0))
    assert ours == pytest.approx(oracle, abs=1e-8)


@pytest.mark.parametrize("kind", ["zz_bond_sum", "x_sum", "M2", "M4", "C_nn"])
def test_thermal_observables_vs_kron_oracle(lat3, spectra3_h2, kind):
    H = kron_hamiltonian(lat3, J=1.0, h=2.0)
    oracle = kron_thermal(H, 0.8, kron_observable(lat3, kind))
    ours = thermal_expectation(spectra3_h2, 0.8, ObservableSpec(kind))
    assert ours == pytest.approx(oracle, abs=1e-8)


def test_decoupled_spins_x_sum_closed_form(lat3):
    spectra = diagonalize(lat3, ModelParams(J=0.0, h=1.7))
    for T in (0.5, 1.0, 3.0):
        value = thermal_expectation(spectra, T, ObservableSpec("x_sum"))
        assert value == pytest.approx(9 * np.tanh(1.7 / T), abs=1e-10)


def test_infinite_temperature_energy(spectra3_h2, lat3):
    value = thermal_expectation(spectra3_h2, 1e6,
                                ObservableSpec("total_energy", J=1.0, h=2.0))
    assert abs(value) / lat3.n_sites < 1e-3


def test_identity_observable_normalization(spectra3_h2):
    for T in (0.05, 1.0, 100.0):
        assert thermal_expectation(spectra3_h2, T,
                                   ObservableSpec("identity")) == pytest.approx(1.0, abs=1e-10)


def test_nonpositive_temperature_rejected(spectra3_h2):
    with pytest.raises(ValueError):
        thermal_expectation(spectra3_h2, 0.0, ObservableSpec("identity"))
    with pytest.raises(ValueError):
        thermal_expectation(spectra3_h2, -1.0, ObservableSpec("identity"))


def test_observable_blocks_hermitian(spectra3_h2):
    for s in spectra3_h2[:4]:
        for kind in ("x_sum", "M2", "total_energy"):
            A = observable_matrix(s, ObservableSpec(kind, J=1.0, h=2.0))
            assert np.max(np.abs(A - A.conj().T)) < 1e-12


def test_total_magnetization_vanishes_at_positive_field(lat2):
    # spin-flip symmetry: <sum_i sz_i> = 0 exactly in every thermal state
    spec = diagonalize(lat2, ModelParams(1.0, 1.5), use_symmetry=False)[0]
    m_diag = np.einsum("in,ij,jn->n", spec.eigenvectors.conj(),
                       kron_observable(lat2, "z_sum"), spec.eigenvectors).real
    for T in (0.3, 2.0):
        w = np.exp(-(spec.eigenvalues - spec.eigenvalues[0]) / T)
        assert abs(w @ m_diag / w.sum()) < 1e-12


def test_ground_state_expectation_polarized_manifold(lat3):
    spectra = diagonalize(lat3, ModelParams(J=1.0, h=0.0))
    value, degeneracy = ground_state_expectation(
        spectra, ObservableSpec("zz_bond_sum"))
    assert degeneracy == 2
    assert value == pytest.approx(18.0, abs=1e-10)


def test_ground_state_x_polarized_limit(lat3):
    spectra = diagonalize(lat3, ModelParams(J=1.0, h=1e3))
    value, _ = ground_state_expectation(spectra, ObservableSpec("x_sum"))
    assert value == pytest.approx(9.0, abs=1e-3)


def test_ground_state_m2_vs_dense_oracle(lat3, spectra3_h3):
    H = kron_hamiltonian(lat3, J=1.0, h=3.0)
    evals, evecs = np.linalg.eigh(H)
    psi = evecs[:, 0]
    oracle = float(psi @ kron_observable(lat3, "M2") @ psi)
    value, degeneracy = ground_state_expectation(spectra3_h3,
                                                 ObservableSpec("M2"))
    assert degeneracy == 1
    assert value == pytest.approx(oracle, abs=1e-8)


def test_energy_vs_temperature_monotone_and_limits(spectra3_h2):
    grid = np.linspace(0.05, 20.0, 60)
    curve = energy_vs_temperature(spectra3_h2, grid)
    assert np.all(np.diff(curve) >= -1e-10)
    ground = min(s.eigenvalues[0] for s in spectra3_h2)
    assert energy_vs_temperature(spectra3_h2, [1e-3])[0] == pytest.approx(
        ground, abs=1e-9)


def test_energy_curve_vs_kron_oracle(lat3, spectra3_h2):
    H = kron_hamiltonian(lat3, J=1.0, h=2.0)
    for T in (0.5, 1.0, 2.0, 5.0):
        oracle = kron_thermal(H, T, H)
        ours = energy_vs_temperature(spectra3_h2, [T])[0]
        assert ours == pytest.approx(oracle, abs=1e-8)


def test_temperature_at_energy_round_trip(spectra3_h2):
    for T in (0.4, 1.0, 3.0):
        E = energy_vs_temperature(spectra3_h2, [T])[0]
        assert temperature_at_energy(spectra3_h2, E) == pytest.approx(
            T, rel=1e-9)
    ground = min(s.eigenvalues[0] for s in spectra3_h2)
    assert temperature_at_energy(spectra3_h2, ground) == 0.0


def test_heat_capacity_matches_finite_difference(spectra3_h2):
    T, dT = 1.2, 1e-4
    fd = (energy_vs_temperature(spectra3_h2, [T + dT])[0]
          - energy_vs_temperature(spectra3_h2, [T - dT])[0]) / (2 * dT)
    assert heat_capacity(spectra3_h2, T) == pytest.approx(fd, rel=1e-6)


def test_resource_limits_enforced():
    lat = build_lattice(5)  # 25 sites: over every default limit
    with pytest.raises(ResourceLimitError, match="16"):
        diagonalize(lat, ModelParams(1.0, 1.0), use_symmetry=True)
    with pytest.raises(ResourceLimitError, match="14"):
        diagonalize(lat, ModelParams(1.0, 1.0), use_symmetry=False)
    with pytest.raises(ResourceLimitError, match="4"):
        diagonalize(build_lattice(3), ModelParams(1.0, 1.0), max_sites=4)


def test_spectrum_cache_round_trip(tmp_path, lat3, spectra3_h2):
    path = tmp_path / "spectra.npz"
    save_spectra(path, spectra3_h2)
    loaded = load_spectra(path)
    assert len(loaded) == len(spectra3_h2)
    for a, b in zip(spectra3_h2, loaded):
        assert a.label == b.label
        assert np.max(np.abs(a.eigenvalues - b.eigenvalues)) <= 1e-12
        assert np.array_equal(a.basis.reps, b.basis.reps)


def test_cached_diagonalize_hits_cache(tmp_path, lat3):
    params = ModelParams(1.0, 2.0)
    first = cached_diagonalize(lat3, params, tmp_path)
    files = list(tmp_path.glob("*.npz"))
    assert len(files) == 1
    second = cached_diagonalize(lat3, params, tmp_path)
    for a, b in zip(first, second):
        assert np.max(np.abs(a.eigenvalues - b.eigenvalues)) <= 1e-12
