"""Certified weak and strong approximate equilibrium points of
point-charge electrostatic potentials in fixed dimension d <= 4."""

from .errors import (
    BudgetExceeded,
    DegreeOverflow,
    EmptyPolytope,
    EmptyProduct,
    EmptySum,
    EquilibError,
    Exhausted,
    InvalidTau,
    NotFound,
    ParseError,
    SingularHessian,
    SingularPoint,
    TooFewCharges,
    TooFine,
    UnboundedDomain,
)
from .potential import (
    Charge,
    ChargeSystem,
    DerivativeExpansion,
    PolyTerm,
    derivative_bound,
    derivative_terms,
    eval_gradient,
    eval_potential,
    hessian,
    hessian_det,
)
from .wellbehaved import (
    CoverProvider,
    WellBehavedParams,
    derivative_params,
    polynomial_params,
    product_params,
    single_charge_params,
    sum_params,
)
from .grid import (
    Box,
    GridCell,
    Polytope,
    beta_schedule,
    build_axis_cuts,
    enumerate_cells,
    exclusion_radius,
    split_domain,
)
from .taylor import (
    Polynomial,
    SeriesFunction,
    TaylorModel,
    expand,
    lipschitz_bound,
    taylor_degree,
)
from .polysolve import Interval, SolveOutcome, eval_poly_interval, project, solve_system
from .equilibrium import (
    StrongAnswer,
    StrongParams,
    WeakAnswer,
    certify_pm,
    solve_strong,
    solve_strong_auto,
    solve_weak,
    strong_params,
)
from .oracle import (
    ScanReport,
    brute_force_scan,
    finite_difference,
    newton_refine,
    two_charge_bisect,
)
from .instance import Instance, load_instance, parse_instance, serialize_instance

__version__ = "0.1.0"
