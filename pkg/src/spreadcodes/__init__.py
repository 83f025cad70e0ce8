"""Design of ±1 spreading-code families by two-stage block coordinate descent."""

from .bcd import BcdConfig, RunHistory, SelectionStrategy, bcd_step, run, run_stage_one, run_stage_two, select_subset
from .core import (
    CodeFamily,
    FamilyFormatError,
    IndexSet,
    acz_parameter,
    check_family,
    format_family,
    is_acz,
    load_family,
    parse_family,
    save_family,
)
from .correlation import (
    CorrelationTable,
    ObjectiveValue,
    acz_count,
    apply_assignment,
    build_table,
    cross_correlation,
    expected_random_mos,
    isl,
    stage_one_objective,
)
from .estimator import SpreadingCodeDesigner, family_report
from .generators import GoldSpec, WeilSpec, acz_subset, gold_family, random_family, weil_family
from .subproblem import (
    STAGE_ONE,
    STAGE_TWO,
    InfeasibleError,
    PartialProblem,
    SolveResult,
    build_partial,
    dump_problem,
    evaluate,
    solve,
    solve_branch_and_bound,
    solve_exhaustive,
)

__version__ = "0.1.0"
