"""Morse index and Conley-Zehnder index of perturbed closed geodesics.

Two independent pipelines compute, for a 1-periodic orbit of a
time-periodic potential on a model manifold, the Morse index of the
Jacobi operator (finite differences) and the Conley-Zehnder index of the
linearised flow (crossing forms), so that ``mu_CZ = -Ind + sigma`` can be
checked orbit by orbit.
"""
from .errors import (AccuracyError, AdmissibilityError, AssemblyError, ConfigError,
                     ConvergenceError, DegeneracyError, DomainError, FrameError, GeodexError,
                     NumericsError, ParameterError, RegularityError, ResolutionError)
from .framing import (ClosedFrame, Coefficients, assemble_Q, assemble_SU, close_frame,
                      detect_sigma, frame_for_orbit, linearized_flow_in_frame, parallel_frame)
from .geometry import (ManifoldModel, Potential, cosine_lattice, curvature_term, custom_potential,
                       flat_klein_bottle, flat_torus, metric_at, potential_data, sphere2,
                       sphere_wave, zero_potential)
from .harness import IndexReport, RunConfig, emit_figure_data, load_config, verify_index_theorem
from .jacobi import DiscretizedOperator, SpectralCount, assemble_A0, morse_index, spectral_count
from .maslov import (Crossing, HalfInteger, crossing_form, cz_index, find_crossings, rs_index,
                     signature, unitary_loop_degree)
from .orbits import (Monodromy, PerturbedOrbit, action_of, find_orbit, flow_time1,
                     hamiltonian_rhs)
from .specflow import (OperatorFamily, SpectralFlowResult, build_proof_families,
                       family_endpoint_paths, spectral_flow)
from .symplectic import (SymmetricFamily, SymplecticPath, fundamental_solution, gamma1_path,
                         gamma2_path, matrix_exponential_path, torus_coords)

__version__ = "0.1.0"
