"""Linear models, hinge objectives, perturbation plans, and exact certification.

Perturbations are class-conditional shifts: a plan stores a vector v and the
realized perturbation of a point (x, y) is delta(x, y) = -y * v. Every
closed-form perturbation used here (the worst case eps * sign(w) and the
mean-zeroing construction) has this form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from slar.dist import Dataset, DistributionSpec, atoms_of, nonrobust_mask


@dataclass(frozen=True)
class Weights:
    """Linear model parameters w with regularization strength lam."""

    w: np.ndarray
    lam: float

    def __post_init__(self) -> None:
        if self.w.ndim != 1:
            raise ValueError("w must be a 1-D vector")
        if not np.all(np.isfinite(self.w)):
            raise ValueError("w must be finite")
        if not self.lam > 0.0:
            raise ValueError(f"lam must be positive, got {self.lam}")

    @property
    def dim(self) -> int:
        return self.w.shape[0]


@dataclass(frozen=True)
class PerturbationPlan:
    """Class-conditional shift v with budget eps; requires ||v||_inf <= eps."""

    v: np.ndarray
    eps: float

    def __post_init__(self) -> None:
        if self.v.ndim != 1:
            raise ValueError("v must be a 1-D vector")
        if self.eps < 0.0:
            raise ValueError(f"eps must be nonnegative, got {self.eps}")
        if self.v.size and np.max(np.abs(self.v)) > self.eps + 1e-12:
            raise ValueError("plan exceeds the perturbation budget in sup norm")

    @property
    def dim(self) -> int:
        return self.v.shape[0]


def _check_dim(weights: Weights, x: np.ndarray) -> None:
    if x.shape != (weights.dim,):
        raise ValueError(f"dimension mismatch: model has {weights.dim}, point has {x.shape}")


def hinge_loss(weights: Weights, x: np.ndarray, y: int) -> float:
    """max(0, 1 - y <w, x>)."""
    x = np.asarray(x, dtype=float)
    _check_dim(weights, x)
    return float(max(0.0, 1.0 - y * float(weights.w @ x)))


def perturbed_loss(weights: Weights, x: np.ndarray, y: int, plan: PerturbationPlan) -> float:
    """Hinge loss after shifting x by -y * v: max(0, 1 - y <w, x> + <w, v>)."""
    x = np.asarray(x, dtype=float)
    _check_dim(weights, x)
    if plan.dim != weights.dim:
        raise ValueError("plan dimension does not match the model")
    return float(max(0.0, 1.0 - y * float(weights.w @ x) + float(weights.w @ plan.v)))


def perturbed_objective(weights: Weights, points: np.ndarray, labels: np.ndarray,
                        probs: np.ndarray, v: np.ndarray) -> float:
    """Weighted mean perturbed hinge plus the ridge term."""
    w = weights.w
    viol = 1.0 - labels * (points @ w) + float(w @ v)
    risk = float(probs @ np.maximum(0.0, viol))
    return risk + 0.5 * weights.lam * float(w @ w)


def row_utility(plan: PerturbationPlan, weights: Weights, data: "Dataset | DistributionSpec") -> float:
    """Adversary utility: expected perturbed hinge plus (lam/2)||w||^2.

    Expectations are exact for finite-support specs and empirical for datasets.
    The ridge term is constant in the plan; it is included so the number
    matches the game's payoff exactly.
    """
    atoms = atoms_of(data)
    if atoms.points.shape[1] != weights.dim or plan.dim != weights.dim:
        raise ValueError("inconsistent dimensions between plan, weights, and data")
    return perturbed_objective(weights, atoms.points, atoms.labels, atoms.probs, plan.v)


def worst_case_plan(weights: Weights, eps: float) -> PerturbationPlan:
    """The loss-maximizing shift v = eps * sign(w), with sign(0) = 0."""
    if eps < 0.0:
        raise ValueError("eps must be nonnegative")
    return PerturbationPlan(v=eps * np.sign(weights.w), eps=eps)


def ne_plan(spec: DistributionSpec, eps: float) -> PerturbationPlan:
    """Equilibrium shift: budget-saturating on robust features, mean-zeroing elsewhere.

    Robust features (|mu_i| > eps) get v_i = eps * sign(mu_i); non-robust
    features get v_i = mu_i, so their perturbed conditional mean is exactly 0.
    """
    mu = spec.mu
    nonrob = nonrobust_mask(spec, eps)
    v = np.where(nonrob, mu, eps * np.sign(mu))
    return PerturbationPlan(v=v, eps=eps)


def ne_plan_from_means(mu: np.ndarray, eps: float) -> PerturbationPlan:
    """Same construction from externally supplied (for example estimated) means."""
    if eps < 0.0:
        raise ValueError("eps must be nonnegative")
    mu = np.asarray(mu, dtype=float)
    nonrob = np.abs(mu) <= eps
    v = np.where(nonrob, mu, eps * np.sign(mu))
    return PerturbationPlan(v=v, eps=eps)


def certified_margin(weights: Weights, x: np.ndarray, y: int, eps: float) -> float:
    """Worst-case margin y <w, x> - eps ||w||_1 over the sup-norm ball.

    Positive iff the prediction stays correct under every perturbation of
    budget eps.
    """
    x = np.asarray(x, dtype=float)
    _check_dim(weights, x)
    if eps < 0.0:
        raise ValueError("eps must be nonnegative")
    return float(y * (weights.w @ x) - eps * np.abs(weights.w).sum())


def _accuracies(weights: Weights, points: np.ndarray, labels: np.ndarray,
                probs: np.ndarray, eps: float) -> tuple[float, float]:
    scores = labels * (points @ weights.w)
    margins = scores - eps * np.abs(weights.w).sum()
    # Strict inequalities: a zero margin counts as an error. Normalizing by the
    # accumulated probability mass keeps the fractions inside [0, 1].
    total = float(probs.sum())
    std = float(probs @ (scores > 0.0)) / total
    rob = float(probs @ (margins > 0.0)) / total
    return min(std, 1.0), min(rob, 1.0)


def evaluate(weights: Weights, data: Dataset, eps: float) -> dict[str, float]:
    """Standard and certified robust accuracy on a dataset. Ties count as errors."""
    if not isinstance(data, Dataset):
        raise TypeError("evaluate expects a Dataset")
    if data.n == 0:
        raise ValueError("dataset is empty")
    if data.dim != weights.dim:
        raise ValueError("dimension mismatch between model and data")
    if eps < 0.0:
        raise ValueError("eps must be nonnegative")
    probs = np.full(data.n, 1.0 / data.n)
    std, rob = _accuracies(weights, data.points, data.labels, probs, eps)
    return {"standard_accuracy": std, "certified_robust_accuracy": rob}


def evaluate_exact(weights: Weights, spec: DistributionSpec, eps: float) -> dict[str, float]:
    """Population accuracies via support enumeration (finite specs only)."""
    atoms = atoms_of(spec)
    std, rob = _accuracies(weights, atoms.points, atoms.labels, atoms.probs, eps)
    return {"standard_accuracy": std, "certified_robust_accuracy": rob}


def nonrobust_mass(weights: Weights, spec: DistributionSpec, eps: float) -> float:
    """Fraction of squared weight carried by non-robust features."""
    total = float(weights.w @ weights.w)
    if total <= 0.0:
        raise ValueError("nonrobust_mass is undefined for the zero weight vector")
    mask = nonrobust_mask(spec, eps)
    return float(weights.w[mask] @ weights.w[mask]) / total


def write_weights_csv(weights: Weights, path) -> None:
    """CSV export: header index,w with 17 significant digits."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("index,w\n")
        for j, wj in enumerate(weights.w):
            fh.write(f"{j},{wj:.17g}\n")


def read_weights_csv(path, lam: float) -> Weights:
    """Inverse of write_weights_csv; lam is supplied by the caller."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "index,w":
            raise ValueError(f"unexpected weights header: {header!r}")
        for line in fh:
            _, wj = line.strip().split(",")
            rows.append(float(wj))
    return Weights(w=np.array(rows), lam=lam)


def write_plan_csv(plan: PerturbationPlan, path) -> None:
    """CSV export: header index,v with 17 significant digits."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("index,v\n")
        for j, vj in enumerate(plan.v):
            fh.write(f"{j},{vj:.17g}\n")
