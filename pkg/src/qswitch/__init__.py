"""Cavity-QED set-reset flip-flop switch models and simulation tools."""

from .opalg import (HilbertSpace, Operator, DensityMatrix, annihilation,
                    transition, projector, embed, expectation, partial_trace)
from .slh import (SLHModel, series, concat, displace, permute_outputs,
                  permute_inputs, generator, identity_model, source_model,
                  im_operator)
from .dynamics import (IntegrationConfig, Trajectory, Diagnostics,
                       IntegrationError, ToleranceError, InstabilityError,
                       SteadyStateTimeout, lindblad_rhs, LindbladPropagator,
                       integrate, steady_state, steady_state_exact,
                       trajectory_distance, trace_distance)
from .models import (SwitchParameters, DriveAmplitudes, LimitState,
                     NoUniqueEquilibriumError, NoSwitchError,
                     build_primary, build_intermediate,
                     displaced_intermediate_generator, build_limit,
                     limit_rhs, limit_equilibrium, integrate_limit,
                     output_amplitudes, preset, PRESET_NAMES)

__version__ = "0.1.0"
