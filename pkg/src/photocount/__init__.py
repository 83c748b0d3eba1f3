"""photocount: photodetection of a small open quantum system, three ways.

A system decaying through a single monitored channel is described by

* exact Liouvillian evolution of the joint (system x detector-mode) state,
* Monte Carlo wave-function jump trajectories of the reduced system, and
* probabilities of projection histories of the detector mode,

with numerical cross-checks that the three agree to the order of the terms
the reduced descriptions drop.
"""

from .hilbert import (
    BlockState,
    block_compose,
    block_decompose,
    matrix_exponential,
    tensor,
    trace_distance,
)
from .model import (
    LindbladModel,
    ModelParams,
    ReducedModel,
    RegimeWarning,
    build_reduced_model,
    build_total_model,
)
from .liouville import (
    Superoperator,
    apply_generator,
    build_propagator,
    component_derivatives,
    step_excited_oracle,
    step_unexcited_oracle,
)
from .trajectories import (
    EnsembleResult,
    OverExcitedError,
    TrajectoryRecord,
    apply_jump,
    ensemble_average,
    evolve_no_jump,
    sample_ensemble,
    sample_trajectory,
    trajectory_probability,
)
from .histories import (
    DecoherenceMatrix,
    coarse_grain_absorption,
    decoherence_functional,
    decoherence_report,
    full_decoherence_matrix,
    history_probability,
    projector,
)
from .analysis import (
    adiabatic_validity,
    compare_no_jump,
    compare_one_jump,
    decoherence_scaling,
    post_jump_persistence,
    unraveling_consistency,
)

__version__ = "0.1.0"
