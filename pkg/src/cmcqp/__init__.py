"""Phase-domain solvers for unit-modulus constrained complex quadratic forms."""

from .core import (
    Case,
    Direction,
    InstanceError,
    MatrixFileError,
    ProblemInstance,
    count_matvecs,
    gradient,
    gradient_case1,
    gradient_case2,
    load_complex_matrix,
    objective,
    objective_case1,
    objective_case2,
    phases_to_vector,
    random_phases,
    save_complex_matrix,
    wrap_phases,
)
from .solvers import (
    IterationTrace,
    Solution,
    SolverConfig,
    Status,
    fixed_step_baseline,
    line_search_baseline,
    pml_baseline,
    solve,
    solve_case1,
    solve_case2,
)
from .stepsize import StepCoeffs, StepDecision, StepSource, coeffs, step_from_cubic

__version__ = "0.1.0"
