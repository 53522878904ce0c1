"""decohist: decoherent histories at desk scale.

Chain operators, branch weights and consistency on finite-dimensional
history spaces, von Neumann measurement models, a lattice mereology of
branch vectors, and branch-relative truth rules.  Units with hbar = 1.
"""
from .hilbert import (
    PartitionError,
    ProjectorPartition,
    Propagator,
    StructureError,
    evolve,
    heisenberg_projector,
    ket,
    tensor,
    validate_partition,
)
from .histories import (
    BranchTree,
    EnumerationBudgetExceeded,
    HistorySpace,
    UndefinedConditionalError,
    all_branch_vectors,
    branch_vector,
    branching_structure_check,
    build_branch_tree,
    chain_operator,
    coarse_grain,
    collapse_oracle,
    conditional_probability,
    consistency_check,
    decoherence_functional,
    history_id,
    sum_rule_check,
    weight,
)
from .measurement import (
    SpinPreparation,
    concentration_report,
    frequency_distribution,
    no_go_check,
    no_go_search,
    repeated_measurement_space,
    von_neumann_model,
)
from .mereology import BranchLattice, axioms_check, common_part, fusion, is_part, overlap, subset_oracle
from .scenario import Scenario, ScenarioError, load_scenario
from .semantics import Predicate, UtteranceContext, eval_might, eval_present, eval_will, past_future_split

__version__ = "0.1.0"
