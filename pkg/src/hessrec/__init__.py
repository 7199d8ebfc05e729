"""Low-rank Hessian recovery from O(1)-cost bilinear finite-difference probes.

The package splits into five layers:

- :mod:`hessrec.matcore` — dense SVD, Schatten norms, matrix sign, and
  tangent-space projectors;
- :mod:`hessrec.sampling` — sphere-sampled direction pairs, exact and
  finite-difference bilinear measurements, synthetic instances;
- :mod:`hessrec.recovery` — the trace-norm minimization solver and the
  minimum-Frobenius baseline;
- :mod:`hessrec.certify` — numerical checks of the recovery guarantee's
  ingredients (moments, concentration, dual certificates);
- :mod:`hessrec.bench` — experiment harness, CSV reporting, SVG plots,
  driven by the ``hessrec`` command line.
"""

from .matcore import (
    SvdFactors,
    TangentSpace,
    kron_operator,
    matrix_sign,
    numerical_rank,
    schatten_norm,
    svd,
    tangent_project,
    tangent_project_perp,
)
from .recovery import (
    RecoverySolution,
    SolverConfig,
    recovery_error,
    solve_min_frobenius,
    solve_nuclear_min,
    svt,
)
from .sampling import (
    FunctionOracle,
    LowRankInstance,
    Measurement,
    MeasurementSet,
    build_measurement_set,
    builtin_function,
    make_instance,
    measure_exact,
    measure_fd,
    sample_sphere,
)

__version__ = "0.1.0"

__all__ = [
    "FunctionOracle",
    "LowRankInstance",
    "Measurement",
    "MeasurementSet",
    "RecoverySolution",
    "SolverConfig",
    "SvdFactors",
    "TangentSpace",
    "build_measurement_set",
    "builtin_function",
    "kron_operator",
    "make_instance",
    "matrix_sign",
    "measure_exact",
    "measure_fd",
    "numerical_rank",
    "recovery_error",
    "sample_sphere",
    "schatten_norm",
    "solve_min_frobenius",
    "solve_nuclear_min",
    "svd",
    "svt",
    "tangent_project",
    "tangent_project_perp",
]
