"""Numerical laboratory for observability and control of electromagnetic
Schrödinger operators on the 2-torus."""

__version__ = "0.1.0"

from .basis import ModeBasis, ModeVector
from .fields import (CircleFunction, ConstantFunctionError, CriticalPoint,
                     FourierField2D, TruncationRiskError, VectorPotential,
                     a_gamma, apply_gauge, b_gamma_average, critical_points,
                     directional_average, gauge_g1, magnetic_field)
from .geometry import (ArcSet, Direction, Region, direction_cutoff,
                       enumerate_directions, gcc_check, inscribed_square,
                       mgcc_check, optimality_witness, project_region)
from .obs import (ControlResult, MassMatrix, ObsReport, ResolventScan,
                  gramian, hum_control, observability_constant,
                  region_mass_matrix, resolvent_constant, resolvent_scan,
                  sharp_obs_experiment)
from .quasimode import (HermiteVector, QuasimodeParams, WkbSolution,
                        build_wkb, extract_params, residual_scan,
                        witness_experiment)
from .spectral import (DampedOperator, EigenDecomposition, HermitianOperator,
                       ProjectorSpec, assemble, assemble_1d, damped_operator,
                       eigendecompose, propagate, separable_blocks,
                       spectral_projector)
from .weyl import (NormalFormReport, NormalFormSpec, Symbol, WignerSample,
                   averaging_generator_symbol, commutator, conjugate_exp,
                   localized_packet, model_operator, normal_form_g2,
                   operator_norm, plateau_bump, quantize, standard_psi,
                   standard_vartheta, wigner_eval)

__all__ = [name for name in dir() if not name.startswith("_")]
