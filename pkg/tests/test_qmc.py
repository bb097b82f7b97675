import numpy as np
import pytest

from quenchmap import (ModelParams, ObservableSpec, QmcConfig, build_lattice,
                       diagonalize, measure, run_qmc, thermal_expectation)
from quenchmap.binning import OBSERVABLES
from quenchmap.qmc import chain_stream, coarse_config, splitmix64
from quenchmap.sse import (SseState, cluster_update, diagonal_update,
                           init_state, validate_state)

pytestmark = pytest.mark.filterwarnings("ignore::DeprecationWarning")


def small_config(lattice, params, T, seed=1234, n_measure=16000, n_bins=16,
                 n_therm=1500, **kw):
    return QmcConfig(lattice=lattice, params=params, T=T,
                     n_thermalization=n_therm, n_measure=n_measure,
                     n_bins=n_bins, rng_seed=seed, **kw)


def exact_values(spectra, J, h, T):
    out = {}
    for kind in ("total_energy", "zz_bond_sum", "x_sum", "M2", "M4", "C_nn"):
        out[kind] = thermal_expectation(spectra, T,
                                        ObservableSpec(kind, J=J, h=h))
    u = 1 - out["M4"] / (3 * out["M2"] ** 2)
    out["binder_U"] = u
    return out


def assert_within_3sigma(est, exact, names=OBSERVABLES):
    for name in names:
        e = est[name]
        err = max(e.stderr, 1e-12)
        z = abs(e.mean - exact[name]) / err
        assert z < 3.0, f"{name}: {e.mean} vs {exact[name]} (z={z:.2f})"


def test_config_validation():
    lat = build_lattice(3)
    with pytest.raises(ValueError):
        QmcConfig(lattice=lat, params=ModelParams(1, 1), T=-1.0)
    with pytest.raises(ValueError, match="n_bins"):
        QmcConfig(lattice=lat, params=ModelParams(1, 1), T=1.0, n_bins=8)
    with pytest.raises(ValueError, match="divisible"):
        QmcConfig(lattice=lat, params=ModelParams(1, 1), T=1.0,
                  n_measure=1001, n_bins=16)


def test_determinism_bit_identical():
    lat = build_lattice(3)
    cfg = small_config(lat, ModelParams(1.0, 2.0), T=1.0, n_measure=3200,
                       n_therm=300)
    a, b = run_qmc(cfg), run_qmc(cfg)
    for name in OBSERVABLES:
        assert a[name].mean == b[name].mean
        assert a[name].stderr == b[name].stderr
    for name, series in a.bins.items():
        assert np.array_equal(series, b.bins[name])


def test_seed_changes_stream():
    lat = build_lattice(3)
    cfg1 = small_config(lat, ModelParams(1.0, 2.0), T=1.0, seed=1,
                        n_measure=1600, n_therm=200)
    cfg2 = small_config(lat, ModelParams(1.0, 2.0), T=1.0, seed=2,
                        n_measure=1600, n_therm=200)
    assert run_qmc(cfg1)["total_energy"].mean != run_qmc(cfg2)["total_energy"].mean
    assert splitmix64(1) != splitmix64(2)
    assert chain_stream(7, 0) != chain_stream(7, 1)


@pytest.mark.parametrize("h,T", [(2.0, 1.0), (1.0, 0.5), (3.0, 2.0)])
def test_sse_matches_ed(lat3, h, T):
    params = ModelParams(1.0, h)
    spectra = diagonalize(lat3, params)
    est = run_qmc(small_config(lat3, params, T, n_measure=32000))
    assert_within_3sigma(est, exact_values(spectra, 1.0, h, T))


def test_decoupled_spins_x_sum():
    lat = build_lattice(4)
    est = run_qmc(small_config(lat, ModelParams(0.0, 1.5), T=1.0))
    exact = 16 * np.tanh(1.5)
    assert abs(est["x_sum"].mean - exact) < 3 * est["x_sum"].stderr


def test_energy_decomposition_consistency(lat3):
    params = ModelParams(1.0, 2.0)
    est = run_qmc(small_config(lat3, params, T=1.0))
    lhs = -params.J * est["zz_bond_sum"].mean - params.h * est["x_sum"].mean
    err = 3 * np.hypot(params.J * est["zz_bond_sum"].stderr,
                       params.h * est["x_sum"].stderr)
    err += 3 * est["total_energy"].stderr
    assert abs(lhs - est["total_energy"].mean) <= err


def test_stderr_scaling_with_sweeps(lat3):
    params = ModelParams(1.0, 2.0)
    small = run_qmc(small_config(lat3, params, T=1.0, n_measure=8000,
                                 n_bins=32))
    big = run_qmc(small_config(lat3, params, T=1.0, n_measure=32000,
                               n_bins=32))
    ratio = small["total_energy"].stderr / big["total_energy"].stderr
    assert 2.0 / 1.5 < ratio < 2.0 * 1.5


def test_merged_chains_match_ed(lat3):
    params = ModelParams(1.0, 2.0)
    spectra = diagonalize(lat3, params)
    cfg = small_config(lat3, params, T=1.0, n_measure=8000, n_chains=4)
    est = run_qmc(cfg, max_workers=2)
    assert est.meta["n_chains_merged"] == 4
    assert est.n_bins == 64
    assert_within_3sigma(est, exact_values(spectra, 1.0, 2.0, 1.0))


def test_classical_path_vs_enumeration(lat3):
    import itertools

    configs = np.array(list(itertools.product([-1, 1], repeat=9)))
    zz = np.zeros(len(configs))
    for i, j in lat3.bonds:
        zz += configs[:, i] * configs[:, j]
    m = configs.sum(axis=1) / 9
    T = 2.5
    w = np.exp((zz - zz.max()) / T)
    Z = w.sum()
    exact = {"total_energy": -(w @ zz) / Z, "zz_bond_sum": (w @ zz) / Z,
             "x_sum": 0.0, "M2": (w @ m ** 2) / Z, "M4": (w @ m ** 4) / Z,
             "C_nn": (w @ zz) / Z / 9}
    exact["binder_U"] = 1 - exact["M4"] / (3 * exact["M2"] ** 2)
    est = run_qmc(small_config(lat3, ModelParams(1.0, 0.0), T=T,
                               n_measure=32000))
    assert est.meta["engine"] == "classical-ising"
    assert est["x_sum"].mean == 0.0 and est["x_sum"].stderr == 0.0
    assert_within_3sigma(est, exact)


def test_binder_limits():
    lat = build_lattice(8)
    disordered = run_qmc(small_config(lat, ModelParams(1.0, 5.0), T=2.0,
                                      n_measure=8000))
    assert abs(disordered["binder_U"].mean) < 0.1
    ordered = run_qmc(small_config(lat, ModelParams(1.0, 1.0), T=0.5,
                                   n_measure=8000))
    assert ordered["binder_U"].mean == pytest.approx(2.0 / 3.0, abs=0.02)


def test_measure_on_polarized_no_op_state(lat3):
    state = SseState(spins=np.ones(9, dtype=np.int8),
                     op_type=np.zeros(10, dtype=np.int8),
                     op_arg=np.full(10, -1, dtype=np.int64), n=0)
    sample = measure(state, lat3, ModelParams(1.0, 2.0), T=1.0)
    assert sample["zz_bond_sum"] == pytest.approx(18.0)
    assert sample["M2"] == pytest.approx(1.0)
    assert sample["M4"] == pytest.approx(1.0)
    assert sample["C_nn"] == pytest.approx(2.0)


def test_sample_moment_ordering(lat3):
    # m^2 in [0, 1] implies M4 <= M2 <= 1 for every sample
    rng = np.random.default_rng(9)
    state = init_state(lat3, rng, cutoff=40)
    params = ModelParams(1.0, 2.0)
    for _ in range(50):
        diagonal_update(state, lat3, params, 1.0, rng)
        cluster_update(state, lat3, rng)
        s = measure(state, lat3, params, 1.0)
        assert s["M4"] <= s["M2"] + 1e-12
        assert s["M2"] <= 1.0 + 1e-12


def test_no_site_operators_at_vanishing_field(lat3):
    rng = np.random.default_rng(10)
    state = init_state(lat3, rng, cutoff=60)
    params = ModelParams(1.0, 1e-12)
    for _ in range(200):
        diagonal_update(state, lat3, params, 1.0, rng)
    assert np.sum((state.op_type == 2) | (state.op_type == 3)) == 0
    assert np.sum(state.op_type == 1) > 0  # bond operators still appear


def test_update_invariants_fuzz(lat3):
    rng = np.random.default_rng(11)
    state = init_state(lat3, rng, cutoff=120)
    params = ModelParams(1.0, 2.0)
    validate_state(state, lat3)
    for step in range(100_000):
        if step % 2 == 0:
            diagonal_update(state, lat3, params, 0.8, rng)
        else:
            cluster_update(state, lat3, rng)
        if step % 500 == 0:
            validate_state(state, lat3)
    validate_state(state, lat3)


def test_zero_acceptance_keeps_state_valid(lat3):
    # beta -> 0 makes every insertion proposal fail; state stays valid
    rng = np.random.default_rng(12)
    state = init_state(lat3, rng, cutoff=30)
    params = ModelParams(1.0, 2.0)
    diagonal_update(state, lat3, params, 1e12, rng)
    assert state.n == 0
    validate_state(state, lat3)


def test_debug_checks_run(lat3):
    cfg = small_config(lat3, ModelParams(1.0, 2.0), T=1.0, n_measure=64,
                       n_bins=16, n_therm=50)
    est = run_qmc(cfg, debug_checks=True)
    assert np.isfinite(est["total_energy"].mean)


def test_coarse_config_keeps_bins_valid(lat3):
    cfg = small_config(lat3, ModelParams(1.0, 2.0), T=1.0, n_measure=32000)
    c = coarse_config(cfg)
    assert c.n_measure == 8000
    assert c.n_measure % c.n_bins == 0
