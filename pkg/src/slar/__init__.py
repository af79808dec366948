"""slar: a laboratory for the linear adversarial-robustness game.

Synthetic label-symmetric distributions, hinge-objective best responses
(exact and stochastic), alternating-play dynamics, equilibrium construction
and verification, and certified sup-norm robustness evaluation.
"""

from slar.dist import (
    Dataset,
    DiscreteSymmetric,
    DistributionSpec,
    Gaussian,
    TwoPoint,
    enumerate_support,
    is_non_robust,
    paper_distribution,
    sample,
)
from slar.game import (
    GameConfig,
    NEReport,
    Trajectory,
    TrajectoryRecord,
    run_at,
    run_ne,
    run_oat,
    run_standard,
    verify_ne,
)
from slar.model import (
    PerturbationPlan,
    Weights,
    certified_margin,
    evaluate,
    hinge_loss,
    ne_plan,
    nonrobust_mass,
    perturbed_loss,
    row_utility,
    worst_case_plan,
)
from slar.oracle import (
    ConditionReport,
    check_emax_bounds,
    check_worst_case_grid,
    check_norm_bounds,
    check_weight_signs,
    theorem_conditions,
)
from slar.solve import (
    ExactBR,
    OptimizerConfig,
    SolverError,
    Stochastic,
    certify_unique,
    fit_oat,
    fit_svm,
)

__all__ = [
    "Dataset",
    "DiscreteSymmetric",
    "DistributionSpec",
    "Gaussian",
    "TwoPoint",
    "enumerate_support",
    "is_non_robust",
    "paper_distribution",
    "sample",
    "GameConfig",
    "NEReport",
    "Trajectory",
    "TrajectoryRecord",
    "run_at",
    "run_ne",
    "run_oat",
    "run_standard",
    "verify_ne",
    "PerturbationPlan",
    "Weights",
    "certified_margin",
    "evaluate",
    "hinge_loss",
    "ne_plan",
    "nonrobust_mass",
    "perturbed_loss",
    "row_utility",
    "worst_case_plan",
    "ConditionReport",
    "check_emax_bounds",
    "check_worst_case_grid",
    "check_norm_bounds",
    "check_weight_signs",
    "theorem_conditions",
    "ExactBR",
    "OptimizerConfig",
    "SolverError",
    "Stochastic",
    "certify_unique",
    "fit_oat",
    "fit_svm",
]

__version__ = "0.1.0"
