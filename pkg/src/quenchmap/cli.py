"""Batch command-line front end.

    quenchmap <command> --config run.ini [key=value ...]
    quenchmap --from-manifest out/manifest.json [key=value ...]

Commands: equilibrium | tf-curve | critical-line | phase-diagram | fss |
dynamics | cache.  Every command writes data files plus a RunManifest that
embeds the resolved config text; re-running from the manifest reproduces the
data files bit for bit.  Exit codes: 0 success, 1 runtime failure, 2 config
error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import ed
from .binning import Estimate, EstimateSet
from .config import ConfigError, RunConfig
from .dynamics import evolve, running_time_average, steady_state_prediction
from .io import (CacheStore, RunManifest, bins_csv_rows,
                 critical_line_csv_rows, estimate_set_csv_rows,
                 phase_boundary_csv_rows, phase_diagram_csv_rows,
                 read_critical_line_csv, tf_curve_csv_rows,
                 time_series_csv_rows, write_csv, write_json)
from .lattice import ModelParams, QuenchSpec, build_lattice
from .phases import (SweepResources, build_critical_line, fss_fit,
                     phase_diagram)
from .qmc import QmcConfig, derive_seed, run_qmc
from .quench import EdEvaluator, QmcEvaluator, tf_curve

COMMANDS = ("equilibrium", "tf-curve", "critical-line", "phase-diagram",
            "fss", "dynamics", "cache")


def ed_estimate_set(spectra, T: float, meta: dict) -> EstimateSet:
    """Exact thermal values packaged with zero errors (ED 'engine')."""
    estimates = {}
    J, h = meta["J"], meta["h"]
    for kind in ("total_energy", "zz_bond_sum", "x_sum", "M2", "M4", "C_nn"):
        value = ed.thermal_expectation(
            spectra, T, ed.ObservableSpec(kind, J=J, h=h))
        estimates[kind] = Estimate(mean=value, stderr=0.0, n_bins=0)
    m2 = estimates["M2"].mean
    m4 = estimates["M4"].mean
    estimates["binder_U"] = Estimate(mean=1.0 - m4 / (3.0 * m2 ** 2),
                                     stderr=0.0, n_bins=0)
    return EstimateSet(estimates=estimates, bins={}, meta=meta)


def _sweep_resources(cfg: RunConfig, master_seed: int,
                     store=None) -> SweepResources:
    policy = cfg.qmc_policy()
    return SweepResources(J=cfg.coupling_J(), master_seed=master_seed,
                          store=store, **policy)


def _initial_estimate(cfg: RunConfig, section: str, lattice, h: float,
                      T: float, engine: str, seed: int,
                      cache_dir) -> EstimateSet:
    J = cfg.coupling_J()
    meta = {"L": lattice.L, "J": J, "h": h, "T": T, "engine": engine}
    if engine == "ed":
        spectra = ed.cached_diagonalize(lattice, ModelParams(J=J, h=h),
                                        cache_dir)
        return ed_estimate_set(spectra, T, meta)
    if engine != "qmc":
        raise ConfigError(section, "engine",
                          f"must be 'qmc' or 'ed', got {engine!r}")
    policy = cfg.qmc_policy()
    config = QmcConfig(lattice=lattice, params=ModelParams(J=J, h=h), T=T,
                       rng_seed=seed, **policy)
    return run_qmc(config, max_workers=cfg.max_workers())


def cmd_equilibrium(cfg: RunConfig, out_dir: Path,
                    manifest: RunManifest) -> int:
    lattice = build_lattice(cfg.lattice_L())
    h = cfg.get_float("equilibrium", "h")
    if h < 0:
        raise ConfigError("equilibrium", "h", f"must be >= 0, got {h}")
    T = cfg.get_positive_float("equilibrium", "T")
    engine = cfg.get_str("equilibrium", "engine", "qmc")
    seed = derive_seed(cfg.run_seed(), "equilibrium", lattice.L, h, T)
    manifest.record_seed("equilibrium", seed)
    est = _initial_estimate(cfg, "equilibrium", lattice, h, T, engine, seed,
                            cfg.cache_dir())
    header, rows = estimate_set_csv_rows(est)
    write_csv(out_dir / "estimates.csv", header, rows)
    manifest.record_output(out_dir / "estimates.csv")
    write_json(out_dir / "estimate_set.json", est.to_jsonable())
    manifest.record_output(out_dir / "estimate_set.json")
    if est.bins and cfg.get_bool("equilibrium", "write_bins", "true"):
        header, rows = bins_csv_rows(est)
        write_csv(out_dir / "bins.csv", header, rows)
        manifest.record_output(out_dir / "bins.csv")
    return 0


def _evaluator_factory(cfg: RunConfig, section: str, lattice, J, master_seed,
                       store, cache_dir):
    engine = cfg.get_str(section, "engine", "qmc")
    if engine == "ed":
        def factory(h_f):
            spectra = ed.cached_diagonalize(lattice,
                                            ModelParams(J=J, h=h_f),
                                            cache_dir)
            return EdEvaluator(spectra)
        return factory
    if engine != "qmc":
        raise ConfigError(section, "engine",
                          f"must be 'qmc' or 'ed', got {engine!r}")
    policy = cfg.qmc_policy()

    def factory(h_f):
        proto = QmcConfig(lattice=lattice, params=ModelParams(J=J, h=h_f),
                          T=1.0, rng_seed=0, **policy)
        return QmcEvaluator(proto, master_seed, store=store)
    return factory


def cmd_tf_curve(cfg: RunConfig, out_dir: Path, manifest: RunManifest) -> int:
    lattice = build_lattice(cfg.lattice_L())
    h_i = cfg.get_float("tf_curve", "h_i")
    T_i = cfg.get_positive_float("tf_curve", "T_i")
    grid = cfg.get_grid("tf_curve", "h_f_grid")
    engine = cfg.get_str("tf_curve", "engine", "qmc")
    store = CacheStore(cfg.cache_dir())
    seed = derive_seed(cfg.run_seed(), "tf-curve-initial", lattice.L, h_i,
                       T_i)
    manifest.record_seed("initial_ensemble", seed)
    est_i = _initial_estimate(cfg, "tf_curve", lattice, h_i, T_i, engine,
                              seed, cfg.cache_dir())
    factory = _evaluator_factory(cfg, "tf_curve", lattice, cfg.coupling_J(),
                                 cfg.run_seed(), store, cfg.cache_dir())
    curve = tf_curve(est_i, grid, factory, T_i=T_i, J=cfg.coupling_J())
    header, rows = tf_curve_csv_rows(curve)
    write_csv(out_dir / "tf_curve.csv", header, rows)
    manifest.record_output(out_dir / "tf_curve.csv")
    write_json(out_dir / "tf_curve.json", {
        "h_i": h_i, "T_i": T_i, "L": lattice.L, "J": cfg.coupling_J(),
        "engine": engine, "master_seed": cfg.run_seed(),
        "qmc_policy": cfg.qmc_policy(),
        "statuses": [p.status for p in curve.points]})
    manifest.record_output(out_dir / "tf_curve.json")
    failed = sum(1 for p in curve.points if p.status != "ok")
    if failed == len(curve.points):
        print(f"all {failed} grid points failed", file=sys.stderr)
        return 1
    return 0


def cmd_critical_line(cfg: RunConfig, out_dir: Path,
                      manifest: RunManifest) -> int:
    grid = cfg.get_grid("critical_line", "h_grid")
    pair = cfg.get_grid("critical_line", "L_pair", "8,16")
    if len(pair) != 2:
        raise ConfigError("critical_line", "L_pair",
                          f"need exactly two sizes, got {pair}")
    T_min = cfg.get_float("critical_line", "T_min", "0.2")
    T_max = cfg.get_float("critical_line", "T_max", "2.6")
    seed = derive_seed(cfg.run_seed(), "critical-line")
    manifest.record_seed("critical_line", seed)
    resources = _sweep_resources(cfg, seed)
    line = build_critical_line(grid, (int(pair[0]), int(pair[1])), resources,
                               T_search=(T_min, T_max))
    header, rows = critical_line_csv_rows(line)
    write_csv(out_dir / "critical_line.csv", header, rows)
    manifest.record_output(out_dir / "critical_line.csv")
    write_json(out_dir / "critical_line.json", line.meta)
    manifest.record_output(out_dir / "critical_line.json")
    return 0


def cmd_phase_diagram(cfg: RunConfig, out_dir: Path,
                      manifest: RunManifest) -> int:
    lattice = build_lattice(cfg.lattice_L())
    h_i = cfg.get_float("phase_diagram", "h_i")
    t_grid = cfg.get_grid("phase_diagram", "T_i_grid")
    h_grid = cfg.get_grid("phase_diagram", "h_f_grid")
    line_file = cfg.get_str("phase_diagram", "critical_line_file", "-")
    if line_file != "-":
        line = read_critical_line_csv(line_file)
    else:
        seed = derive_seed(cfg.run_seed(), "critical-line")
        crossings = cfg.get_grid("critical_line", "h_grid",
                                 "0.5,1.0,1.5,2.0,2.5")
        pair = cfg.get_grid("critical_line", "L_pair", "8,16")
        line = build_critical_line(
            crossings, (int(pair[0]), int(pair[1])),
            _sweep_resources(cfg, seed),
            T_search=(cfg.get_float("critical_line", "T_min", "0.2"),
                      cfg.get_float("critical_line", "T_max", "2.6")))
    seed = derive_seed(cfg.run_seed(), "phase-diagram", lattice.L, h_i)
    manifest.record_seed("phase_diagram", seed)
    store = CacheStore(cfg.cache_dir())
    resources = _sweep_resources(cfg, seed, store=store)
    diagram = phase_diagram(h_i, t_grid, h_grid, line, resources, lattice)
    header, rows = phase_diagram_csv_rows(diagram)
    write_csv(out_dir / "phase_cells.csv", header, rows)
    manifest.record_output(out_dir / "phase_cells.csv")
    header, rows = phase_boundary_csv_rows(diagram)
    write_csv(out_dir / "phase_boundary.csv", header, rows)
    manifest.record_output(out_dir / "phase_boundary.csv")
    write_json(out_dir / "phase_diagram.json", {
        "h_i": h_i, "L": lattice.L, "T_i_grid": list(map(float, t_grid)),
        "h_f_grid": list(map(float, h_grid)), "seed": seed})
    manifest.record_output(out_dir / "phase_diagram.json")
    return 0


def cmd_fss(cfg: RunConfig, out_dir: Path, manifest: RunManifest) -> int:
    source = cfg.get_str("fss", "input_file", "-")
    points = []
    if source != "-":
        import csv as _csv

        with open(source, newline="", encoding="utf-8") as f:
            for row in _csv.DictReader(f):
                points.append((float(row["L"]), float(row["T_f"]),
                               float(row["sigma"])))
    else:
        raw = cfg.get_str("fss", "points")
        for item in raw.split(","):
            parts = item.split(":")
            if len(parts) != 3:
                raise ConfigError("fss", "points",
                                  f"expected L:T_f:sigma, got {item!r}")
            points.append(tuple(float(p) for p in parts))
    fit = fss_fit(points)
    payload = {"a": fit.a, "b": fit.b, "c": fit.c, "rmse": fit.rmse,
               "degenerate": fit.degenerate,
               "n_iterations": fit.n_iterations,
               "covariance": [[float(v) for v in row]
                              for row in fit.covariance],
               "c_stderr": fit.c_stderr}
    write_json(out_dir / "fss_fit.json", payload)
    manifest.record_output(out_dir / "fss_fit.json")
    write_csv(out_dir / "fss_fit.csv",
              ["a", "b", "c", "c_stderr", "rmse", "degenerate"],
              [[fit.a, fit.b, fit.c, fit.c_stderr, fit.rmse,
                fit.degenerate]])
    manifest.record_output(out_dir / "fss_fit.csv")
    return 0


def cmd_dynamics(cfg: RunConfig, out_dir: Path, manifest: RunManifest) -> int:
    lattice = build_lattice(cfg.lattice_L())
    h_i = cfg.get_float("dynamics", "h_i")
    h_f = cfg.get_float("dynamics", "h_f")
    ground = cfg.get_bool("dynamics", "ground_state", "false")
    T_i = 0.0 if ground else cfg.get_positive_float("dynamics", "T_i")
    quench = QuenchSpec(h_i=h_i, h_f=h_f, T_i=T_i, ground_state=ground)
    t_max = cfg.get_positive_float("dynamics", "t_max", "10.0")
    n_times = cfg.get_int("dynamics", "n_times", "101")
    kind = cfg.get_str("dynamics", "observable", "M2")
    J = cfg.coupling_J()
    obs = ed.ObservableSpec(kind, J=J, h=h_f)
    times = np.linspace(0.0, t_max, n_times)
    series = evolve(quench, lattice, obs, times, J=J)
    header, rows = time_series_csv_rows(series)
    name = f"timeseries_{kind}.csv"
    write_csv(out_dir / name, header, rows)
    manifest.record_output(out_dir / name)
    prediction = steady_state_prediction(quench, lattice, obs, "ed-exact",
                                         J=J)
    tail = running_time_average(series)[-1]
    write_json(out_dir / "prediction.json", {
        "observable": kind, "prediction": prediction.value,
        "T_f": prediction.T_f, "E_q": prediction.E_q,
        "tf_source": prediction.source,
        "tail_time_average": float(tail),
        "abs_gap": abs(float(tail) - prediction.value),
        "quench": {"h_i": h_i, "h_f": h_f, "T_i": T_i,
                   "ground_state": ground},
        "lattice": {"L": lattice.L, "J": J},
        "times": {"t_max": t_max, "n_times": n_times}})
    manifest.record_output(out_dir / "prediction.json")
    return 0


def cmd_cache(cfg: RunConfig, action: str) -> int:
    store = CacheStore(cfg.cache_dir())
    if action == "list":
        for entry in store.entries():
            print(f"{entry['file']}  {entry['key']}")
        for path in sorted(Path(cfg.cache_dir()).glob("*.npz")):
            print(f"{path.name}  <spectra>")
        return 0
    if action == "verify":
        results = store.verify()
        results.extend(ed_spectra_verify(cfg.cache_dir()))
        bad = 0
        for name, ok, detail in results:
            print(f"{'ok ' if ok else 'BAD'} {name}  {detail}")
            bad += 0 if ok else 1
        return 1 if bad else 0
    if action == "purge":
        n = store.purge()
        cache = Path(cfg.cache_dir())
        if cache.exists():
            for path in list(cache.glob("*.npz")) + list(
                    cache.glob("*.npz.sha256")):
                path.unlink()
                n += 1
        print(f"removed {n} cache entries")
        return 0
    raise ConfigError("cache", "action",
                      f"must be list, verify or purge, got {action!r}")


def ed_spectra_verify(cache_dir) -> list:
    from .io import sha256_file

    results = []
    for path in sorted(Path(cache_dir).glob("*.npz")):
        sidecar = path.with_name(path.name + ".sha256")
        if not sidecar.exists():
            results.append((path.name, False, "missing digest sidecar"))
            continue
        recorded = sidecar.read_text().strip()
        ok = sha256_file(path) == recorded
        results.append((path.name, ok, "ok" if ok else "digest mismatch"))
    return results


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="quenchmap",
        description="Dynamical phase diagram pipeline for the 2D "
                    "transverse-field Ising model")
    parser.add_argument("command", nargs="?",
                        help=f"one of: {', '.join(COMMANDS)}")
    parser.add_argument("--config", help="path to the INI config file")
    parser.add_argument("--from-manifest",
                        help="re-run the command recorded in a manifest")
    parser.add_argument("--cache-action", default="list",
                        choices=("list", "verify", "purge"),
                        help="action for the cache command")
    parser.add_argument("overrides", nargs="*",
                        help="key=value or section.key=value overrides")
    args = parser.parse_intermixed_args(argv)

    overrides = list(args.overrides)
    if args.command and "=" in args.command:
        # a stray key=value landed in the command slot (manifest mode)
        overrides.insert(0, args.command)
        args.command = None

    try:
        if args.from_manifest:
            manifest_data = RunManifest.load(args.from_manifest)
            command = manifest_data["command"]
            cfg = RunConfig.from_text(manifest_data["config_text"])
        elif args.command:
            command = args.command
            if command not in COMMANDS:
                raise ConfigError("<cli>", "command",
                                  f"unknown command {command!r}; expected "
                                  f"one of {', '.join(COMMANDS)}")
            if command != "cache" and not args.config:
                raise ConfigError("<cli>", "--config",
                                  "a config file is required")
            cfg = (RunConfig.from_file(args.config) if args.config
                   else RunConfig.from_text("[run]\n"))
        else:
            parser.print_usage(sys.stderr)
            return 2
        section = command.replace("-", "_")
        cfg.apply_overrides(overrides, section)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        if command == "cache":
            return cmd_cache(cfg, args.cache_action)
        out_dir = Path(cfg.output_dir())
        out_dir.mkdir(parents=True, exist_ok=True)
        manifest = RunManifest(command, cfg.to_text(), cfg.run_seed())
        handler = {
            "equilibrium": cmd_equilibrium,
            "tf-curve": cmd_tf_curve,
            "critical-line": cmd_critical_line,
            "phase-diagram": cmd_phase_diagram,
            "fss": cmd_fss,
            "dynamics": cmd_dynamics,
        }[command]
        code = handler(cfg, out_dir, manifest)
        manifest.write(out_dir / "manifest.json")
        return code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure -> exit 1
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
