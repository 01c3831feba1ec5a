"""Quantum-clock timing of strong-field tunnel ionization in two dimensions.

The package simulates a 2D Coulomb-bound electron driven by a quasistatic
Gaussian field pulse while an internal few-level clock accumulates phase
only inside the instantaneous tunneling barrier.  Reading the clock
pointer after the pulse, split into transmitted and reflected parts,
yields tunneling, reflection and dwell times that can be cross-checked
against the time-integrated barrier occupancy and an independent
flux-correlation (virtual detector) estimate.
"""

from .barrier import (BarrierRegion, compute_barrier, from_parabolic,
                      rasterize_barrier, stark_shifted_energy, to_parabolic)
from .checkpoint import read_checkpoint, write_checkpoint
from .clock import (CalibrationCurve, ClockParams, ClockVector, calibrate,
                    clock_state, evolve_free, free_expectation_curve,
                    pointer_weights, time_operator_expectation)
from .errors import (CalibrationRangeError, CheckpointError,
                     ConfigurationError, ConvergenceError, NoBarrierError,
                     NumericalError)
from .grid import (AtomParams, ComplexField, Grid2D, PulseParams, ScalarField,
                   absorber_mask, apply_kinetic, build_grid,
                   coulomb_potential, keldysh_time, pulse_amplitude,
                   total_potential)
from .groundstate import GroundStateResult, solve_ground_state
from .observables import (StatePart, TimesReport, assemble_times, clock_read,
                          dwell_time_from_series, mask_probability,
                          split_bound_free)
from .propagate import (ClockedWaveFunction, PropagatorConfig, evolve,
                        init_state, krylov_step)
from .runner import (RunConfig, RunResult, SweepResult, TofResult,
                     run_single, run_sweep, run_time_of_flight)
from .virtualdetector import (DetectorRecord, FluxLine, TunnelingDistribution,
                              arrival_correlation, barrier_detectors,
                              build_flux_line, line_flux, probability_current,
                              refine_peak)

__version__ = "0.1.0"
