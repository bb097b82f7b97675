import numpy as np
import pytest

from quenchmap.binning import (binder_from_bins, bin_series,
                               estimate_from_samples,
                               estimate_set_from_samples, merge_chains)


def _fake_set(rng, n_samples=640, n_bins=16, meta=None):
    samples = {name: rng.normal(loc, 0.1, n_samples)
               for name, loc in [("total_energy", -10.0),
                                 ("zz_bond_sum", 5.0), ("x_sum", 3.0),
                                 ("M2", 0.5), ("M4", 0.3), ("C_nn", 0.55)]}
    meta = dict(meta or {"L": 3, "J": 1.0, "h": 2.0, "T": 1.0,
                         "n_thermalization": 1, "n_measure": n_samples,
                         "n_bins": n_bins, "engine": "sse"})
    return estimate_set_from_samples(samples, n_bins, meta)


def test_bin_series_shape_and_mean():
    x = np.arange(64.0)
    bins = bin_series(x, 16)
    assert bins.shape == (16,)
    assert bins.mean() == pytest.approx(x.mean())
    with pytest.raises(ValueError):
        bin_series(np.arange(10.0), 3)


def test_estimate_matches_iid_theory():
    rng = np.random.default_rng(1)
    samples = rng.normal(2.0, 1.0, 128000)
    est = estimate_from_samples(samples, 128)
    assert est.mean == pytest.approx(2.0, abs=5 / np.sqrt(128000))
    # iid: stderr ~ sigma/sqrt(N), tau_int ~ 0.5 (binned/naive variance ratio)
    assert est.stderr == pytest.approx(1.0 / np.sqrt(128000), rel=0.3)
    assert est.tau_int == pytest.approx(0.5, rel=0.4)


def test_binder_jackknife_on_exact_ratio():
    rng = np.random.default_rng(2)
    m2 = rng.normal(0.5, 0.001, 64)
    m4 = rng.normal(0.3, 0.001, 64)
    est = binder_from_bins(m2, m4)
    expected = 1 - 0.3 / (3 * 0.25)
    assert est.mean == pytest.approx(expected, abs=5 * est.stderr)
    assert est.stderr > 0


def test_merge_single_chain_is_identity():
    s = _fake_set(np.random.default_rng(3))
    assert merge_chains([s]) is s


def test_merge_with_itself_halves_variance():
    s = _fake_set(np.random.default_rng(4))
    merged = merge_chains([s, s])
    for name in ("total_energy", "M2"):
        assert merged[name].mean == pytest.approx(s[name].mean)
        assert merged[name].stderr ** 2 == pytest.approx(
            s[name].stderr ** 2 / 2, rel=0.05)


def test_merge_scaling_four_chains():
    rng = np.random.default_rng(5)
    sets = [_fake_set(rng) for _ in range(4)]
    merged = merge_chains(sets)
    typical = np.mean([s["total_energy"].stderr for s in sets])
    assert merged["total_energy"].stderr == pytest.approx(typical / 2,
                                                          rel=0.5)
    assert merged.n_bins == 64


def test_merge_rejects_mismatched_configs():
    a = _fake_set(np.random.default_rng(6))
    b = _fake_set(np.random.default_rng(7),
                  meta={"L": 4, "J": 1.0, "h": 2.0, "T": 1.0,
                        "n_thermalization": 1, "n_measure": 640,
                        "n_bins": 16, "engine": "sse"})
    with pytest.raises(ValueError, match="different configs"):
        merge_chains([a, b])


def test_estimate_set_json_round_trip():
    from quenchmap.binning import EstimateSet

    s = _fake_set(np.random.default_rng(8))
    back = EstimateSet.from_jsonable(s.to_jsonable())
    for name, est in s.estimates.items():
        assert back[name].mean == est.mean
        assert back[name].stderr == est.stderr
    assert np.array_equal(back.bins["M2"], s.bins["M2"])
