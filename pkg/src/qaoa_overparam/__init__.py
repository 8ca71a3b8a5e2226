"""QAOA overparametrization toolkit: EQD saturation depth p_c versus optimal depth p*."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    DimensionMismatchError,
    InvalidDepthError,
    InvalidSizeError,
    NumericalFailureError,
    OverparamDepthNotFound,
    QaoaError,
    UndefinedGapError,
)
from .optimize import (  # noqa: E402
    InstanceResult,
    RunTrace,
    enforce_monotone,
    layerwise_run,
    local_minimize,
    multi_run,
    optimal_depth,
    success_probability,
    tolerance_from_gap,
)
from .problems import (  # noqa: E402
    DiagonalHamiltonian,
    Graph,
    SatInstance,
    ground_energy,
    max2sat_hamiltonian,
    maxcut_hamiltonian,
    random_2sat,
    random_graph,
    random_regular_graph,
    ring_graph,
    spectral_gap,
)
from .qfi import EqdReport, eqd, numerical_rank, overparam_depth, qfi_matrix  # noqa: E402
from .statevector import (  # noqa: E402
    ParameterVector,
    derivative_states,
    energy_gradient,
    expectation,
    ground_overlap,
    qaoa_state,
)
from .theory import (  # noqa: E402
    ring_analytic_angles,
    ring_drop,
    ring_middle_angle_energy,
    ring_optimal_depth,
    ring_subopt_energy,
)

__all__ = [
    "__version__",
    "ConfigError",
    "DiagonalHamiltonian",
    "DimensionMismatchError",
    "EqdReport",
    "Graph",
    "InstanceResult",
    "InvalidDepthError",
    "InvalidSizeError",
    "NumericalFailureError",
    "OverparamDepthNotFound",
    "ParameterVector",
    "QaoaError",
    "RunTrace",
    "SatInstance",
    "UndefinedGapError",
    "derivative_states",
    "energy_gradient",
    "enforce_monotone",
    "eqd",
    "expectation",
    "ground_energy",
    "ground_overlap",
    "layerwise_run",
    "local_minimize",
    "max2sat_hamiltonian",
    "maxcut_hamiltonian",
    "multi_run",
    "numerical_rank",
    "optimal_depth",
    "overparam_depth",
    "qaoa_state",
    "qfi_matrix",
    "random_2sat",
    "random_graph",
    "random_regular_graph",
    "ring_analytic_angles",
    "ring_drop",
    "ring_graph",
    "ring_middle_angle_energy",
    "ring_optimal_depth",
    "ring_subopt_energy",
    "spectral_gap",
    "success_probability",
    "tolerance_from_gap",
]
