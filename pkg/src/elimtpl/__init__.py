"""Elimination-template generation and action-matrix polynomial solving.

Offline: trace a random Z/p instance of a problem structure, parameterize
the space of elimination templates, and greedily minimize it.  Online: fill
the frozen template with real data, read off the action matrix, and recover
the roots from its eigendecomposition.
"""

from .arith import DEFAULT_PRIME, FractionField, NotInvertible, PrimeField, RealField
from .basisgen import QuotientBasis, SingularBasis, make_basis, nonstandard_basis, sample_bases, standard_basis
from .groebner import GroebnerResult, NotZeroDimensional, SyzygyGenerators, buchberger, groebner_with_syzygies, syzygy_generators
from .plan import PlanBuildError, PlanFormatError, SolverPlan, plan_from_template
from .poly import MacaulayMatrix, MonomialOrdering, Poly, build_macaulay, compare, shift_set
from .problems import ProblemSpec, ProblemFormatError, builtin_fixtures, load_fixture, parse_problem
from .solverun import IllConditioned, SolutionSet, action_from_template, action_with_pivoting, filter_roots, instantiate, residual_error, solve
from .templategen import (
    GenerateOptions,
    GenerationFailed,
    ParamTemplate,
    SchurNotApplicable,
    Template,
    build_H0,
    build_V,
    build_param_template,
    generate,
    greedy_columnwise,
    greedy_rowwise,
    materialize,
    prune_rows_cols,
    schur_reduce,
    verify_template,
)

__version__ = "0.1.0"
