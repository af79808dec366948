"""Column-player best responses.

Two engines live here:

* an exact deterministic solver for the strongly convex hinge objective,
  certified through a duality gap, which is what the theorem checkers rely
  on; and
* a stochastic minibatch trainer with Kingma-style adaptive moment steps that
  mirrors the experimental training loop and returns its final iterate with
  no optimality certificate.

The exact engine maximizes the box-constrained concave dual by coordinate
ascent. For the plain (possibly shifted) hinge objective the coordinate
update is closed form, exactly as in dual coordinate descent for linear SVMs.
For the reduced worst-case objective, where eps * ||w||_1 sits inside the
hinge, the candidate primal point is a soft threshold of the dual combination
and each coordinate is maximized by bisection on the monotone derivative. In
both cases weak duality makes primal-minus-dual a certified bound on the
objective gap.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from slar.dist import Dataset, DistributionSpec, atoms_of
from slar.model import PerturbationPlan, Weights, perturbed_objective

_ORDER_KEY = 0x51AB1E  # fixed key for the deterministic sweep-order stream
_INIT_KEY = 0xD0A15


class SolverError(RuntimeError):
    """Raised when the exact solver hits its sweep cap before the tolerance."""

    def __init__(self, message: str, achieved_gap: float | None = None):
        super().__init__(message)
        self.achieved_gap = achieved_gap


@dataclass(frozen=True)
class ExactBR:
    """Exact best response: converge the duality gap below `tolerance`.

    `init_seed` selects a reproducible dual starting point; None starts from
    zero. Distinct seeds give genuinely different solve paths, which is what
    the uniqueness certification varies.
    """

    tolerance: float = 1e-8
    max_sweeps: int = 200_000
    init_seed: int | None = None

    def __post_init__(self) -> None:
        if not self.tolerance > 0.0:
            raise ValueError("tolerance must be positive")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be at least 1")


@dataclass(frozen=True)
class Stochastic:
    """Minibatch training schedule: adaptive-moment steps, shuffled per epoch."""

    learning_rate: float = 0.01
    batch_size: int = 200
    epochs: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.learning_rate > 0.0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")


Method = Union[ExactBR, Stochastic]


@dataclass(frozen=True)
class OptimizerConfig:
    """Solver choice plus the regularization strength it optimizes under."""

    method: Method
    lam: float
    init_w: np.ndarray | None = None  # starting weights for the stochastic engine

    def __post_init__(self) -> None:
        if not self.lam > 0.0:
            raise ValueError(f"lam must be positive, got {self.lam}")


@dataclass(frozen=True)
class SolveInfo:
    """Certificate data from an exact solve."""

    gap: float
    sweeps: int
    primal: float
    dual: float


def _sweep_order(n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.permutation(n)


def _dual_init(n: int, probs: np.ndarray, init_seed: int | None) -> np.ndarray:
    if init_seed is None:
        return np.zeros(n)
    rng = np.random.Generator(np.random.Philox(key=(int(init_seed) << 64) + _INIT_KEY))
    return rng.random(n) * probs


def _solve_svm_exact(points: np.ndarray, labels: np.ndarray, probs: np.ndarray,
                     lam: float, tol: float, max_sweeps: int,
                     init_seed: int | None) -> tuple[np.ndarray, SolveInfo]:
    """Dual coordinate ascent on the weighted hinge objective."""
    n = points.shape[0]
    yz = labels[:, None] * points
    q = np.einsum("ij,ij->i", yz, yz)
    a = _dual_init(n, probs, init_seed)
    # Zero rows contribute a constant hinge of 1; their dual coordinate sits
    # at the upper box bound and never moves.
    zero = q <= 0.0
    a[zero] = probs[zero]
    w = (a @ yz) / lam
    order_rng = np.random.Generator(np.random.Philox(key=_ORDER_KEY))
    active = np.flatnonzero(~zero)
    for sweep in range(1, max_sweeps + 1):
        for i in _sweep_order(active.size, order_rng):
            i = active[i]
            g = 1.0 - w @ yz[i]
            anew = a[i] + lam * g / q[i]
            if anew < 0.0:
                anew = 0.0
            elif anew > probs[i]:
                anew = probs[i]
            da = anew - a[i]
            if da != 0.0:
                w += (da / lam) * yz[i]
                a[i] = anew
        # Recompute from the dual variables to purge incremental drift.
        w = (a @ yz) / lam
        reg = 0.5 * lam * float(w @ w)
        primal = float(probs @ np.maximum(0.0, 1.0 - (yz @ w))) + reg
        dual = float(a.sum()) - reg
        gap = primal - dual
        if gap <= tol:
            return w, SolveInfo(gap=gap, sweeps=sweep, primal=primal, dual=dual)
    raise SolverError(
        f"exact solver did not reach tolerance {tol:g} within {max_sweeps} sweeps "
        f"(achieved gap {gap:g})",
        achieved_gap=gap,
    )


def _soft(b: np.ndarray, thresh: float) -> np.ndarray:
    return np.sign(b) * np.maximum(np.abs(b) - thresh, 0.0)


def _solve_oat_exact(points: np.ndarray, labels: np.ndarray, probs: np.ndarray,
                     lam: float, eps: float, tol: float, max_sweeps: int,
                     init_seed: int | None) -> tuple[np.ndarray, SolveInfo]:
    """Dual coordinate ascent for the reduced worst-case objective.

    With a in the box [0, p], the candidate primal point is
    w(a) = soft(b, A * eps) / lam where b is the dual combination of labeled
    points and A is the total dual mass. The coordinate derivative of the
    dual equals the worst-case margin violation at w(a), which is monotone in
    the coordinate, so bisection finds the exact maximizer.
    """
    n, d = points.shape
    yz = labels[:, None] * points
    a = _dual_init(n, probs, init_seed)
    A = float(a.sum())
    b = a @ yz

    def primal_value(w: np.ndarray) -> float:
        viol = 1.0 - (yz @ w) + eps * np.abs(w).sum()
        return float(probs @ np.maximum(0.0, viol)) + 0.5 * lam * float(w @ w)

    def dual_value(A_: float, b_: np.ndarray) -> float:
        return A_ - float(np.square(_soft(b_, A_ * eps)).sum()) / (2.0 * lam)

    def margin_at(A_: float, b_: np.ndarray, i: int) -> float:
        w = _soft(b_, A_ * eps) / lam
        return 1.0 - float(yz[i] @ w) + eps * float(np.abs(w).sum())

    order_rng = np.random.Generator(np.random.Philox(key=_ORDER_KEY))
    gap = np.inf
    for sweep in range(1, max_sweeps + 1):
        for i in _sweep_order(n, order_rng):
            ai = a[i]
            A0, b0 = A - ai, b - ai * yz[i]
            pi = probs[i]
            # Derivative of the dual in the i-th coordinate is the margin
            # violation at the candidate primal point and is nonincreasing.
            if margin_at(A0 + pi, b0 + pi * yz[i], i) >= 0.0:
                anew = pi
            elif margin_at(A0, b0, i) <= 0.0:
                anew = 0.0
            else:
                lo, hi = 0.0, pi
                for _ in range(60):
                    mid = 0.5 * (lo + hi)
                    if margin_at(A0 + mid, b0 + mid * yz[i], i) > 0.0:
                        lo = mid
                    else:
                        hi = mid
                anew = 0.5 * (lo + hi)
            a[i] = anew
            A = A0 + anew
            b = b0 + anew * yz[i]
        A = float(a.sum())
        b = a @ yz
        w = _soft(b, A * eps) / lam
        primal = primal_value(w)
        dual = dual_value(A, b)
        gap = primal - dual
        if gap <= tol:
            return w, SolveInfo(gap=gap, sweeps=sweep, primal=primal, dual=dual)
    raise SolverError(
        f"exact solver did not reach tolerance {tol:g} within {max_sweeps} sweeps "
        f"(achieved gap {gap:g})",
        achieved_gap=gap,
    )


def oat_objective(weights: Weights, data: "Dataset | DistributionSpec", eps: float) -> float:
    """Reduced worst-case objective: E max(0, 1 - y<w,x> + eps||w||_1) + ridge."""
    atoms = atoms_of(data)
    w = weights.w
    viol = 1.0 - atoms.labels * (atoms.points @ w) + eps * np.abs(w).sum()
    return float(atoms.probs @ np.maximum(0.0, viol)) + 0.5 * weights.lam * float(w @ w)


class AdamTrainer:
    """Stateful minibatch trainer; persists weights and moment estimates.

    Keeping one trainer alive across game rounds is what continual training
    means here: the weight vector and the adaptive moments survive each new
    perturbation of the data. Per-epoch shuffles are drawn from a stream
    keyed by (seed, global epoch index), so a run is bit-reproducible.
    """

    beta1 = 0.9
    beta2 = 0.999
    adam_eps = 1e-8

    def __init__(self, dim: int, cfg: Stochastic, lam: float,
                 init_w: np.ndarray | None = None):
        self.cfg = cfg
        self.lam = lam
        self.w = np.zeros(dim) if init_w is None else np.array(init_w, dtype=float)
        self.m = np.zeros(dim)
        self.v = np.zeros(dim)
        self.steps = 0
        self.epochs_done = 0

    def _step(self, grad: np.ndarray) -> None:
        self.steps += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        mhat = self.m / (1.0 - self.beta1**self.steps)
        vhat = self.v / (1.0 - self.beta2**self.steps)
        self.w = self.w - self.cfg.learning_rate * mhat / (np.sqrt(vhat) + self.adam_eps)

    def run_epochs(self, points: np.ndarray, labels: np.ndarray, epochs: int,
                   batch_grad: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]) -> np.ndarray:
        n = points.shape[0]
        for _ in range(epochs):
            key = (int(self.cfg.seed) << 64) + self.epochs_done
            perm = np.random.Generator(np.random.Philox(key=key)).permutation(n)
            for start in range(0, n, self.cfg.batch_size):
                idx = perm[start:start + self.cfg.batch_size]
                self._step(batch_grad(self.w, points[idx], labels[idx]))
            self.epochs_done += 1
        return self.w


def svm_batch_grad(lam: float) -> Callable:
    """Subgradient of the summed batch hinge plus ridge; kink contributes zero."""

    def grad(w: np.ndarray, xb: np.ndarray, yb: np.ndarray) -> np.ndarray:
        viol = 1.0 - yb * (xb @ w) > 0.0
        return lam * w - (yb[viol] @ xb[viol])

    return grad


def oat_batch_grad(lam: float, eps: float) -> Callable:
    """Subgradient of the summed worst-case batch loss; sign(0) = 0 on the l1 term."""

    def grad(w: np.ndarray, xb: np.ndarray, yb: np.ndarray) -> np.ndarray:
        viol = 1.0 - yb * (xb @ w) + eps * np.abs(w).sum() > 0.0
        k = int(viol.sum())
        return lam * w + k * eps * np.sign(w) - (yb[viol] @ xb[viol])

    return grad


def _shifted_atoms(data, plan: PerturbationPlan):
    atoms = atoms_of(data)
    if atoms.points.shape[1] != plan.dim:
        raise ValueError("plan dimension does not match the data")
    shifted = atoms.points - atoms.labels[:, None] * plan.v
    return shifted, atoms.labels, atoms.probs


def fit_svm(data: "Dataset | DistributionSpec", plan: PerturbationPlan,
            config: OptimizerConfig, return_info: bool = False):
    """Minimize mean perturbed hinge + (lam/2)||w||^2 over the given data.

    The exact engine certifies an objective gap at most `tolerance`; the
    stochastic engine runs its prescribed epochs and returns the final
    iterate uncertified.
    """
    if isinstance(config.method, ExactBR):
        z, y, p = _shifted_atoms(data, plan)
        m = config.method
        w, info = _solve_svm_exact(z, y, p, config.lam, m.tolerance, m.max_sweeps, m.init_seed)
        weights = Weights(w=w, lam=config.lam)
        return (weights, info) if return_info else weights
    if not isinstance(data, Dataset):
        raise TypeError("the stochastic engine needs a finite sample, not a spec")
    cfg = config.method
    shifted = data.points - data.labels[:, None] * plan.v
    trainer = AdamTrainer(data.dim, cfg, config.lam, init_w=config.init_w)
    w = trainer.run_epochs(shifted, data.labels, cfg.epochs, svm_batch_grad(config.lam))
    weights = Weights(w=w.copy(), lam=config.lam)
    return (weights, None) if return_info else weights


def fit_oat(data: "Dataset | DistributionSpec", eps: float,
            config: OptimizerConfig, return_info: bool = False):
    """Minimize E max(0, 1 - y<w,x> + eps||w||_1) + (lam/2)||w||^2."""
    if eps < 0.0:
        raise ValueError("eps must be nonnegative")
    if isinstance(config.method, ExactBR):
        atoms = atoms_of(data)
        m = config.method
        if eps == 0.0:
            # The reduced objective collapses to the plain hinge objective.
            w, info = _solve_svm_exact(atoms.points, atoms.labels, atoms.probs,
                                       config.lam, m.tolerance, m.max_sweeps, m.init_seed)
        else:
            w, info = _solve_oat_exact(atoms.points, atoms.labels, atoms.probs,
                                       config.lam, eps, m.tolerance, m.max_sweeps, m.init_seed)
        weights = Weights(w=w, lam=config.lam)
        return (weights, info) if return_info else weights
    if not isinstance(data, Dataset):
        raise TypeError("the stochastic engine needs a finite sample, not a spec")
    cfg = config.method
    trainer = AdamTrainer(data.dim, cfg, config.lam, init_w=config.init_w)
    w = trainer.run_epochs(data.points, data.labels, cfg.epochs, oat_batch_grad(config.lam, eps))
    weights = Weights(w=w.copy(), lam=config.lam)
    return (weights, None) if return_info else weights


@dataclass(frozen=True)
class UniquenessReport:
    max_pairwise_distance: float
    weights: Weights


def certify_unique(data: "Dataset | DistributionSpec", plan: PerturbationPlan,
                   lam: float, tolerance: float, trials: int,
                   init_seeds: Sequence[int | None] | None = None) -> UniquenessReport:
    """Solve from several starting points and report the max pairwise distance.

    Strong convexity puts every gap-certified solution inside a ball of
    radius sqrt(2 * tolerance / lam) around the unique minimizer, so the
    distances are bounded by twice that radius.
    """
    if trials < 2:
        raise ValueError("trials must be at least 2")
    if init_seeds is None:
        seeds: list[int | None] = [None] + list(range(1, trials))
    else:
        if len(init_seeds) != trials:
            raise ValueError("init_seeds length must equal trials")
        seeds = list(init_seeds)
    solutions = []
    for s in seeds:
        cfg = OptimizerConfig(method=ExactBR(tolerance=tolerance, init_seed=s), lam=lam)
        solutions.append(fit_svm(data, plan, cfg).w)
    worst = 0.0
    for i in range(trials):
        for j in range(i + 1, trials):
            worst = max(worst, float(np.linalg.norm(solutions[i] - solutions[j])))
    return UniquenessReport(max_pairwise_distance=worst,
                            weights=Weights(w=solutions[0], lam=lam))


def svm_objective(weights: Weights, data: "Dataset | DistributionSpec",
                  plan: PerturbationPlan) -> float:
    """Independent evaluation of the perturbed hinge objective (for certificates)."""
    atoms = atoms_of(data)
    return perturbed_objective(weights, atoms.points, atoms.labels, atoms.probs, plan.v)
