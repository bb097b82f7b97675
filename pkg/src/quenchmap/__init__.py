"""Dynamical phase diagrams of the 2D transverse-field Ising model from
equilibrium Monte Carlo data.

The pipeline samples thermal ensembles (SSE quantum Monte Carlo, or exact
diagonalization on small tori), converts them into conserved quench energies,
inverts the equilibrium energy-temperature relation of the post-quench
Hamiltonian by noise-aware bisection, and intersects the resulting
final-temperature curves with a self-computed equilibrium critical line.
Real-time dynamics at ED-feasible sizes cross-validates the whole chain.
"""

from .lattice import (LatticeSpec, ModelParams, QuenchSpec, ThermalPoint,
                      build_lattice, classical_ground_energy,
                      translation_orbits)
from .ed import (ObservableSpec, SectorSpectrum, diagonalize,
                 energy_vs_temperature, ground_state_expectation,
                 thermal_expectation)
from .binning import Estimate, EstimateSet, merge_chains
from .qmc import QmcConfig, run_qmc
from .sse import SseState, cluster_update, diagonal_update, measure
from .quench import (QuenchEnergy, TfCurve, TfResult, quench_energy,
                     solve_Tf, tf_bounds, tf_curve)
from .phases import (CriticalLine, DynamicalCriticalPoint,
                     DynamicalPhaseDiagram, FssFit, binder_crossing_Tc,
                     build_critical_line, classify, dynamical_critical_points,
                     fss_fit, phase_diagram)
from .dynamics import (SteadyStatePrediction, TimeSeries, diagonal_ensemble,
                       evolve, steady_state_prediction)

__version__ = "0.1.0"

__all__ = [
    "LatticeSpec", "ModelParams", "QuenchSpec", "ThermalPoint",
    "build_lattice", "classical_ground_energy", "translation_orbits",
    "ObservableSpec", "SectorSpectrum", "diagonalize",
    "energy_vs_temperature", "ground_state_expectation",
    "thermal_expectation",
    "Estimate", "EstimateSet", "merge_chains",
    "QmcConfig", "run_qmc",
    "SseState", "cluster_update", "diagonal_update", "measure",
    "QuenchEnergy", "TfCurve", "TfResult", "quench_energy", "solve_Tf",
    "tf_bounds", "tf_curve",
    "CriticalLine", "DynamicalCriticalPoint", "DynamicalPhaseDiagram",
    "FssFit", "binder_crossing_Tc", "build_critical_line", "classify",
    "dynamical_critical_points", "fss_fit", "phase_diagram",
    "SteadyStatePrediction", "TimeSeries", "diagonal_ensemble", "evolve",
    "steady_state_prediction",
]
