"""Game engine: alternating best response, reduced-objective training, and
equilibrium construction with verification.

A run produces a Trajectory of per-round records. Round indices start at 1;
round 0 is the initial weight vector (zero unless configured otherwise), so
with a zero start the first adversary move is the zero perturbation and round
1 coincides with standard training.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from slar.dist import Dataset, DistributionSpec, estimate_means
from slar.model import (
    PerturbationPlan,
    Weights,
    evaluate,
    evaluate_exact,
    ne_plan,
    ne_plan_from_means,
    row_utility,
    worst_case_plan,
)
from slar.solve import (
    AdamTrainer,
    ExactBR,
    OptimizerConfig,
    SolverError,
    Stochastic,
    fit_oat,
    fit_svm,
    oat_batch_grad,
    oat_objective,
    svm_batch_grad,
    svm_objective,
)


@dataclass(frozen=True)
class GameConfig:
    """Run parameters: budget eps, horizon, solver, and initialization."""

    eps: float
    rounds: int
    solver: OptimizerConfig
    init_w: np.ndarray | None = None
    warm_start: bool = True

    def __post_init__(self) -> None:
        if self.eps < 0.0:
            raise ValueError("eps must be nonnegative")
        if self.rounds < 1:
            raise ValueError("rounds must be at least 1")

    @property
    def lam(self) -> float:
        return self.solver.lam


@dataclass
class TrajectoryRecord:
    t: int
    w: np.ndarray
    v: np.ndarray
    delta_w_norm: float
    nonrobust_mass: float
    std_acc_train: float
    std_acc_test: float
    robust_acc_test: float
    objective: float

    @property
    def w_norm(self) -> float:
        return float(np.linalg.norm(self.w))


@dataclass
class Trajectory:
    config: GameConfig
    method: str
    records: list[TrajectoryRecord] = field(default_factory=list)
    error: str | None = None
    meta: dict = field(default_factory=dict)

    @property
    def final_weights(self) -> Weights:
        if not self.records:
            raise ValueError("trajectory has no records")
        return Weights(w=self.records[-1].w, lam=self.config.lam)


def _data_dim(data) -> int:
    return data.dim


def _mass(w: np.ndarray, mask: np.ndarray) -> float:
    total = float(w @ w)
    if total <= 0.0:
        return 0.0  # degenerate round; the mass is undefined at w = 0
    return float(w[mask] @ w[mask]) / total


def _train_accuracies(weights: Weights, data, eps: float) -> dict[str, float]:
    if isinstance(data, Dataset):
        return evaluate(weights, data, eps)
    return evaluate_exact(weights, data, eps)


def _record(t: int, w: np.ndarray, w_prev: np.ndarray, plan: PerturbationPlan,
            data, test, mask: np.ndarray, eps: float, lam: float,
            objective: float) -> TrajectoryRecord:
    weights = Weights(w=w, lam=lam)
    train_acc = _train_accuracies(weights, data, eps)
    if test is not None:
        test_acc = evaluate(weights, test, eps)
    elif isinstance(data, DistributionSpec):
        test_acc = train_acc  # population metrics serve both roles
    else:
        test_acc = {"standard_accuracy": float("nan"),
                    "certified_robust_accuracy": float("nan")}
    return TrajectoryRecord(
        t=t,
        w=w.copy(),
        v=plan.v.copy(),
        delta_w_norm=float(np.linalg.norm(w - w_prev)),
        nonrobust_mass=_mass(w, mask),
        std_acc_train=train_acc["standard_accuracy"],
        std_acc_test=test_acc["standard_accuracy"],
        robust_acc_test=test_acc["certified_robust_accuracy"],
        objective=objective,
    )


def _nonrobust_mask_for(spec: DistributionSpec | None, data, eps: float) -> np.ndarray:
    if spec is not None:
        return np.abs(spec.mu) <= eps
    mu_hat, _ = estimate_means(data)
    return np.abs(mu_hat) <= eps


def run_at(data, spec: DistributionSpec | None, config: GameConfig,
           test: Dataset | None = None) -> Trajectory:
    """Alternating best response: worst-case plan against the last model, refit.

    With the stochastic solver each round runs the configured number of epochs
    on the freshly perturbed data; warm_start keeps one trainer (weights and
    moment estimates) alive across rounds. The exact solver recomputes the
    best response from scratch every round.
    """
    dim = _data_dim(data)
    eps, lam = config.eps, config.lam
    mask = _nonrobust_mask_for(spec, data, eps)
    w = np.zeros(dim) if config.init_w is None else np.array(config.init_w, dtype=float)
    traj = Trajectory(config=config, method="at")
    stochastic = isinstance(config.solver.method, Stochastic)
    if stochastic and not isinstance(data, Dataset):
        raise TypeError("stochastic play needs a finite sample, not a spec")
    trainer = None
    if stochastic and config.warm_start:
        trainer = AdamTrainer(dim, config.solver.method, lam, init_w=w)
    grad = svm_batch_grad(lam)
    for t in range(1, config.rounds + 1):
        plan = worst_case_plan(Weights(w=w, lam=lam), eps)
        try:
            if stochastic:
                shifted = data.points - data.labels[:, None] * plan.v
                active = trainer
                if active is None:
                    active = AdamTrainer(dim, config.solver.method, lam, init_w=config.init_w)
                w_new = active.run_epochs(shifted, data.labels, config.solver.method.epochs, grad).copy()
            else:
                w_new = fit_svm(data, plan, config.solver).w
        except SolverError as err:
            traj.error = f"round {t}: {err}"
            break
        weights = Weights(w=w_new, lam=lam)
        traj.records.append(_record(t, w_new, w, plan, data, test, mask, eps, lam,
                                    svm_objective(weights, data, plan)))
        w = w_new
    return traj


def _run_fixed_plan(data, spec, config: GameConfig, test, method: str,
                    plan: PerturbationPlan) -> Trajectory:
    """Single-objective runs (standard / equilibrium plan): exact solves give
    one record, stochastic runs give one record per epoch for `rounds` epochs."""
    dim = _data_dim(data)
    eps, lam = config.eps, config.lam
    mask = _nonrobust_mask_for(spec, data, eps)
    traj = Trajectory(config=config, method=method)
    w_prev = np.zeros(dim) if config.init_w is None else np.array(config.init_w, dtype=float)
    if isinstance(config.solver.method, ExactBR):
        try:
            weights = fit_svm(data, plan, config.solver)
        except SolverError as err:
            traj.error = str(err)
            return traj
        traj.records.append(_record(1, weights.w, w_prev, plan, data, test, mask,
                                    eps, lam, svm_objective(weights, data, plan)))
        return traj
    if not isinstance(data, Dataset):
        raise TypeError("stochastic play needs a finite sample, not a spec")
    trainer = AdamTrainer(dim, config.solver.method, lam, init_w=config.init_w)
    shifted = data.points - data.labels[:, None] * plan.v
    grad = svm_batch_grad(lam)
    for t in range(1, config.rounds + 1):
        w = trainer.run_epochs(shifted, data.labels, config.solver.method.epochs, grad).copy()
        weights = Weights(w=w, lam=lam)
        traj.records.append(_record(t, w, w_prev, plan, data, test, mask, eps, lam,
                                    svm_objective(weights, data, plan)))
        w_prev = w
    return traj


def run_standard(data, spec: DistributionSpec | None, config: GameConfig,
                 test: Dataset | None = None) -> Trajectory:
    """Plain hinge training: the zero perturbation plan."""
    dim = _data_dim(data)
    return _run_fixed_plan(data, spec, config, test, "standard",
                           PerturbationPlan(v=np.zeros(dim), eps=config.eps))


def run_oat(data, spec: DistributionSpec | None, config: GameConfig,
            test: Dataset | None = None) -> Trajectory:
    """Single minimization of the reduced worst-case objective.

    Stochastic runs record one point per epoch so the trajectory is comparable
    round-for-round with alternating best response.
    """
    dim = _data_dim(data)
    eps, lam = config.eps, config.lam
    mask = _nonrobust_mask_for(spec, data, eps)
    traj = Trajectory(config=config, method="oat")
    w_prev = np.zeros(dim) if config.init_w is None else np.array(config.init_w, dtype=float)
    if isinstance(config.solver.method, ExactBR):
        try:
            weights = fit_oat(data, eps, config.solver)
        except SolverError as err:
            traj.error = str(err)
            return traj
        plan = worst_case_plan(weights, eps)
        traj.records.append(_record(1, weights.w, w_prev, plan, data, test, mask,
                                    eps, lam, oat_objective(weights, data, eps)))
        return traj
    if not isinstance(data, Dataset):
        raise TypeError("stochastic play needs a finite sample, not a spec")
    trainer = AdamTrainer(dim, config.solver.method, lam, init_w=config.init_w)
    grad = oat_batch_grad(lam, eps)
    for t in range(1, config.rounds + 1):
        w = trainer.run_epochs(data.points, data.labels, config.solver.method.epochs, grad).copy()
        weights = Weights(w=w, lam=lam)
        plan = worst_case_plan(weights, eps)
        traj.records.append(_record(t, w, w_prev, plan, data, test, mask, eps, lam,
                                    oat_objective(weights, data, eps)))
        w_prev = w
    return traj


def run_ne(data, spec: DistributionSpec | None, config: GameConfig,
           test: Dataset | None = None) -> tuple[PerturbationPlan, Weights, Trajectory]:
    """Construct the equilibrium plan and best-respond to it.

    The plan zeroes the perturbed means of non-robust features and saturates
    the budget along robust ones. Means come from the distribution spec when
    available;
    otherwise plug-in estimates are used and the trajectory metadata carries
    the largest standard error.
    """
    eps = config.eps
    meta: dict = {}
    if spec is not None:
        plan = ne_plan(spec, eps)
    else:
        if not isinstance(data, Dataset):
            raise TypeError("need either a spec or a dataset to take means from")
        mu_hat, stderr = estimate_means(data)
        plan = ne_plan_from_means(mu_hat, eps)
        meta["mean_estimation_error"] = float(np.max(stderr))
    traj = _run_fixed_plan(data, spec, config, test, "ne", plan)
    traj.meta.update(meta)
    if traj.error is not None:
        raise SolverError(traj.error)
    return plan, traj.final_weights, traj


@dataclass(frozen=True)
class NEReport:
    """Unilateral-deviation gaps for a candidate equilibrium pair."""

    row_gap: float
    col_gap: float
    row_ok: bool
    col_ok: bool
    tol: float

    @property
    def passed(self) -> bool:
        return self.row_ok and self.col_ok


def verify_ne(plan: PerturbationPlan, weights: Weights, data, eps: float,
              lam: float, tol: float, resolve_tolerance: float | None = None) -> NEReport:
    """Check both optimality conditions of an equilibrium candidate.

    Row side: the candidate plan's utility must come within tol of the
    worst-case plan's, which attains the supremum over all perturbations, so
    this comparison is exact rather than heuristic. Column side: re-solve the
    model against the plan and compare objectives.
    """
    u_plan = row_utility(plan, weights, data)
    u_worst = row_utility(worst_case_plan(weights, eps), weights, data)
    row_gap = u_worst - u_plan
    if resolve_tolerance is None:
        resolve_tolerance = min(tol * 1e-3, 1e-10)
    cfg = OptimizerConfig(method=ExactBR(tolerance=resolve_tolerance), lam=lam)
    resolved = fit_svm(data, plan, cfg)
    col_gap = svm_objective(weights, data, plan) - svm_objective(resolved, data, plan)
    return NEReport(row_gap=float(row_gap), col_gap=float(col_gap),
                    row_ok=row_gap <= tol, col_ok=col_gap <= tol, tol=tol)
