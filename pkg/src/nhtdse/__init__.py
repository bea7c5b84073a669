"""Numerical laboratory for non-hermitian Schrodinger dynamics.

Library layout:

- :mod:`nhtdse.biortho` -- biorthogonal eigensystems, metrics, observables
- :mod:`nhtdse.engine` -- evolution-law right-hand sides and the integrator
- :mod:`nhtdse.quench` -- the jump operator across metric discontinuities
- :mod:`nhtdse.geomphase` -- exchange geometric phases on Bloch-sphere traces
- :mod:`nhtdse.anyon` -- hard-core anyon chain via string-dressed correlators
- :mod:`nhtdse.schedules` -- named Hamiltonian families for scenarios
- :mod:`nhtdse.cli` -- the ``nhtdse`` command-line front end
"""

from .biortho import (
    BiorthoBasis,
    MetricState,
    WaveState,
    components,
    eig_biortho,
    instantaneous_metric,
    matrix_sqrt_pd,
    metric_connection,
    observable,
    track_states,
)
from .engine import (
    HamiltonianSchedule,
    IntegratorOptions,
    TdseVariant,
    Trajectory,
    check_left_right_symmetry,
    evolve,
    metric_derivative,
    metric_of,
    rhs,
)
from .quench import (
    LatticeModelSpec,
    QuenchEvent,
    apply_quench,
    asymmetric_chain,
    lrb_probe,
    quench_operator,
)

__version__ = "0.1.0"

__all__ = [
    "BiorthoBasis",
    "MetricState",
    "WaveState",
    "components",
    "eig_biortho",
    "instantaneous_metric",
    "matrix_sqrt_pd",
    "metric_connection",
    "observable",
    "track_states",
    "HamiltonianSchedule",
    "IntegratorOptions",
    "TdseVariant",
    "Trajectory",
    "check_left_right_symmetry",
    "evolve",
    "metric_derivative",
    "metric_of",
    "rhs",
    "LatticeModelSpec",
    "QuenchEvent",
    "apply_quench",
    "asymmetric_chain",
    "lrb_probe",
    "quench_operator",
    "__version__",
]
