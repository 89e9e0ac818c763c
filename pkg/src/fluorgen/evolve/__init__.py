from .driver import (
    ADMET_OBJECTIVES,
    GLOBAL_OBJECTIVES,
    Individual,
    ModelBundle,
    OptimizationConfig,
    SyntheticAdmetOracle,
    lsp_objective_evaluator,
    mutate,
    normalize_objective_rows,
    objectives_from_normalized_props,
    optimization_report,
    run_optimization,
)
from .fragments import attach, eligible_fragment_sites, fragment_mutate, ring_count, sa_proxy
from .nsga3 import das_dennis_points, nsga3_select
from .pareto import dominates, hypervolume, nondominated_sort, success_rate

__all__ = [
    "Individual", "ModelBundle", "OptimizationConfig", "SyntheticAdmetOracle",
    "GLOBAL_OBJECTIVES", "ADMET_OBJECTIVES",
    "mutate", "run_optimization", "optimization_report",
    "lsp_objective_evaluator", "objectives_from_normalized_props", "normalize_objective_rows",
    "attach", "eligible_fragment_sites", "fragment_mutate", "ring_count", "sa_proxy",
    "das_dennis_points", "nsga3_select",
    "dominates", "hypervolume", "nondominated_sort", "success_rate",
]
