"""Finite-dimensional quantum statistical mechanics: states, canonical
ensembles, passivity and ergotropy, collision baths, cycles and entropy
protocols."""

from .baths import (Contact, CycleLedger, Drive, IdealBath, engine_bounds,
                    partial_thermalize_blocks, partial_thermalize_isolated, run_cycle, thermalize)
from .canonical import (CanonicalSpec, beta_for_energy, canonical_state, log_partition_function,
                        mean_energy, partition_function)
from .errors import (BranchCutError, BudgetExceededError, DimensionError, InvalidStateError,
                     NotHermitianError, QThermoError)
from .interaction import (contact_experiment, energy_conserving_coupling, evolve_joint,
                          exchange_coupling)
from .linalg import expectation, partial_trace, tensor, trace_distance
from .passivity import (LevelSystem, ergotropy, extraction_report, extraction_schedule,
                        is_completely_passive, is_n_passive, is_passive, min_failing_n,
                        passive_form, same_temperature_necessary)
from .protocols import entropy_protocol, isothermal_drive
from .schedule import Schedule, Segment, propagate
from .states import (correlation, decompose, density_matrix, entropy, from_spectrum,
                     gibbs_measure, marginal, pure_state, relative_measure)
from .verify import verify_suite

__version__ = "0.1.0"
