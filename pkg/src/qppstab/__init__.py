"""Stability analysis of quasipolynomial Poisson systems.

The main entry points are re-exported here; see the submodules for details.
"""

from .core import (
    PoissonData,
    QPFunctional,
    QPSystem,
    StructureMatrixSpec,
    check_poisson_conditions,
    evaluate_flow,
    evaluate_functional,
    evaluate_monomials,
    hamiltonian_from_decomposition,
    recover_decomposition_lv,
)
from .errors import (
    DecompositionError,
    DivergenceError,
    DomainError,
    NotFixedPointError,
    NotInKernelError,
    QPPError,
    RefusalError,
    StructuralError,
    SystemFileError,
)
from .io import dump_system, load_system, loads_system
from .simulate import (
    Trajectory,
    functional_drift,
    integrate,
    jacobian,
    measure_period_and_phase,
    oscillation_analysis,
    phase_shift,
    spectrum_at,
)
from .stability import (
    StabilityReport,
    Verdict,
    casimirs,
    fixed_point_family,
    lyapunov_for_point,
    lyapunov_original_coordinates,
    symmetrized_form,
    theorem2_verdict,
)
from .transforms import (
    TransformRecord,
    decouple,
    embed,
    map_functional,
    map_point,
    map_poisson,
    recover_decomposition,
    to_lotka_volterra,
)

__version__ = "0.1.0"
