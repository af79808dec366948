"""Brute-force and closed-form checks for every testable claim.

These functions compute the sufficient-condition arithmetic (thresholds on
the strong feature's accuracy p), verify the closed-form worst-case
perturbation against grid enumeration, and check the solution-property
properties (signs, norm bounds, the E[max(0, X)] sandwich) on exact solver
output. Checks report margins, not just booleans, so near-threshold inputs
stay visible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from slar.dist import DistributionSpec, TwoPoint
from slar.model import PerturbationPlan, Weights
from slar.solve import ExactBR, OptimizerConfig, fit_svm

ENUM_DIM_CAP = 13  # exact sup over {-1,0,1}^dim is enumerated up to here


def _condition_term(mu: np.ndarray, var: np.ndarray, eps: float, lam: float,
                    s: np.ndarray) -> np.ndarray:
    """The quantity whose sup over sign patterns bounds 1 - p.

    `s` is an (m, d) array of patterns in {-1, 0, 1}; returns one value per
    row. Patterns that zero the shifted mean vector make the bound vacuous
    and evaluate to +inf.
    """
    shifted = mu[None, :] + eps * s
    sq = shifted**2
    norm2 = sq.sum(axis=1)
    out = np.full(len(s), np.inf)
    ok = norm2 > 0.0
    sbar = np.sqrt((sq[ok] * var[None, :]).sum(axis=1) / norm2[ok])
    norm = np.sqrt(norm2[ok])
    out[ok] = 0.5 * (sbar / norm + lam / (2.0 * norm2[ok])) + 0.5 * np.sqrt(2.0 / lam) * sbar
    return out


def closed_form_s(mu: np.ndarray, eps: float) -> np.ndarray:
    """Coordinate rule for the norm-minimizing sign pattern.

    Shift against the mean when 2|mu_i| > eps, leave the coordinate alone
    when 2|mu_i| < eps; ties at 2|mu_i| = eps give equal shifted magnitude
    either way.
    """
    s = np.where(2.0 * np.abs(mu) > eps, -np.sign(mu), 0.0)
    return s


def _enumerate_sup(mu: np.ndarray, var: np.ndarray, eps: float, lam: float,
                   chunk: int = 200_000) -> tuple[float, np.ndarray]:
    d = mu.size
    total = 3**d
    powers = 3 ** np.arange(d, dtype=np.int64)
    best = -np.inf
    best_s = np.zeros(d)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        s = ((idx[:, None] // powers[None, :]) % 3 - 1).astype(float)
        terms = _condition_term(mu, var, eps, lam, s)
        k = int(np.argmax(terms))
        if terms[k] > best:
            best = float(terms[k])
            best_s = s[k]
    return best, best_s


@dataclass(frozen=True)
class ConditionReport:
    """Sufficient-condition quantities for one (spec, eps, lam) triple.

    `sigma_max` is the bound on the weak-feature deviations (features after
    the first); the strong feature's own deviation is `sigma_1` and enters
    the simplified bound only through its universal bound of 1.
    """

    p: float
    eps: float
    lam: float
    sigma_max: float
    sigma_1: float
    mu_prime_norm: float
    sigma_bar_mu: float
    s_star: tuple[float, ...]
    mu_plus_eps_s_norm: float
    sigma_bar_mu_s: float
    sup_term: float
    sup_method: str  # "enumeration" or "closed_form"
    p_threshold_standard: float
    p_threshold_at: float
    p_threshold_at_simplified: float
    simplified_branch: str  # which deviation bound the simplified form used
    holds_standard: bool
    holds_at: bool
    holds_at_simplified: bool

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "eps": self.eps,
            "lam": self.lam,
            "sigma_max": self.sigma_max,
            "sigma_1": self.sigma_1,
            "mu_prime_norm": self.mu_prime_norm,
            "sigma_bar_mu": self.sigma_bar_mu,
            "s_star": list(self.s_star),
            "mu_plus_eps_s_norm": self.mu_plus_eps_s_norm,
            "sigma_bar_mu_s": self.sigma_bar_mu_s,
            "sup_term": self.sup_term,
            "sup_method": self.sup_method,
            "p_threshold_standard": self.p_threshold_standard,
            "p_threshold_at": self.p_threshold_at,
            "p_threshold_at_simplified": self.p_threshold_at_simplified,
            "simplified_branch": self.simplified_branch,
            "holds_standard": self.holds_standard,
            "holds_at": self.holds_at,
            "holds_at_simplified": self.holds_at_simplified,
        }


def theorem_conditions(spec: DistributionSpec, eps: float, lam: float,
                       exact: bool | None = None) -> ConditionReport:
    """Compute every p-threshold for a spec whose first feature is TwoPoint.

    The alternating-play threshold takes a sup over sign patterns: exact
    enumeration up to ENUM_DIM_CAP dimensions, otherwise the closed-form
    coordinate rule (a heuristic that is exact when all deviations are
    equal). Passing exact=True forces enumeration and errors above the cap;
    exact=False forces the closed form.
    """
    if not isinstance(spec.features[0], TwoPoint):
        raise ValueError("condition arithmetic expects the first feature to be TwoPoint")
    if eps < 0.0 or lam <= 0.0:
        raise ValueError("need eps >= 0 and lam > 0")
    mu = spec.mu
    var = spec.var
    d = spec.dim
    p = spec.features[0].p

    if exact is None:
        exact = d <= ENUM_DIM_CAP
    if exact and d > ENUM_DIM_CAP:
        raise ValueError(f"dimension {d} too large for exact sign-pattern enumeration "
                         f"(cap {ENUM_DIM_CAP}); pass exact=False for the closed-form rule")
    if exact:
        sup_term, s_star = _enumerate_sup(mu, var, eps, lam)
        sup_method = "enumeration"
    else:
        s_star = closed_form_s(mu, eps)
        sup_term = float(_condition_term(mu, var, eps, lam, s_star[None, :])[0])
        sup_method = "closed_form"

    # Plain-training threshold: the zero pattern.
    mu_norm2 = float(mu @ mu)
    sigma_bar_mu = float(np.sqrt((mu**2 * var).sum() / mu_norm2)) if mu_norm2 > 0 else float("inf")
    if mu_norm2 > 0:
        std_term = (0.5 * (sigma_bar_mu / np.sqrt(mu_norm2) + lam / (2.0 * mu_norm2))
                    + 0.5 * np.sqrt(2.0 / lam) * sigma_bar_mu)
    else:
        std_term = float("inf")

    # Simplified threshold: weak-feature deviation bound, strong feature
    # handled through sigma_1 <= 1. Below deviation 1 the bound needs the
    # extra (1 + eps) * sqrt(1 - sigma_max^2) / ||mu'|| correction.
    sigma_max = float(spec.sigma[1:].max()) if d > 1 else 0.0
    sigma_1 = float(spec.sigma[0])
    mu_prime = mu.copy()
    mu_prime[0] = 0.0
    mu_prime_norm = float(np.linalg.norm(mu_prime))
    if mu_prime_norm > 0:
        if sigma_max >= 1.0:
            sigma_eff = sigma_max
            branch = "sigma_max>=1"
        else:
            sigma_eff = sigma_max + (1.0 + eps) * np.sqrt(1.0 - sigma_max**2) / mu_prime_norm
            branch = "sigma_max<1"
        simp_term = (0.5 * (sigma_eff / mu_prime_norm + lam / (2.0 * mu_prime_norm**2))
                     + 0.5 * np.sqrt(2.0 / lam) * sigma_eff)
    else:
        simp_term = float("inf")
        branch = "degenerate"

    shifted = mu + eps * s_star
    n2 = float(shifted @ shifted)
    sbar_s = float(np.sqrt((shifted**2 * var).sum() / n2)) if n2 > 0 else float("inf")

    return ConditionReport(
        p=p,
        eps=eps,
        lam=lam,
        sigma_max=sigma_max,
        sigma_1=sigma_1,
        mu_prime_norm=mu_prime_norm,
        sigma_bar_mu=sigma_bar_mu,
        s_star=tuple(float(v) for v in s_star),
        mu_plus_eps_s_norm=float(np.sqrt(n2)),
        sigma_bar_mu_s=sbar_s,
        sup_term=sup_term,
        sup_method=sup_method,
        p_threshold_standard=float(1.0 - std_term),
        p_threshold_at=float(1.0 - sup_term),
        p_threshold_at_simplified=float(1.0 - simp_term),
        simplified_branch=branch,
        holds_standard=bool(p < 1.0 - std_term),
        holds_at=bool(p < 1.0 - sup_term),
        holds_at_simplified=bool(p < 1.0 - simp_term),
    )


@dataclass(frozen=True)
class EMaxReport:
    passed: bool
    lower_margin: float
    upper_margin: float
    exact: bool


def check_emax_bounds(values: np.ndarray, probs: np.ndarray | None = None,
                      n_sigma: float = 5.0) -> EMaxReport:
    """Verify max(0, E X) <= E max(0, X) <= max(0, E X) + sqrt(Var X) / 2.

    With `probs` the moments are exact; without, `values` is treated as a
    Monte-Carlo sample and the margins get an n_sigma standard-error
    allowance.
    """
    values = np.asarray(values, dtype=float)
    if probs is not None:
        probs = np.asarray(probs, dtype=float)
        mean = float(probs @ values)
        var = float(probs @ (values - mean) ** 2)
        emax = float(probs @ np.maximum(0.0, values))
        slack = 1e-12 * max(1.0, abs(mean), var)
        exact = True
    else:
        n = values.size
        mean = float(values.mean())
        var = float(values.var(ddof=1))
        pos = np.maximum(0.0, values)
        emax = float(pos.mean())
        # allowance for sampling error in each estimated side
        slack = n_sigma * (float(pos.std(ddof=1)) + float(values.std(ddof=1))) / np.sqrt(n)
        exact = False
    lower_margin = emax - max(0.0, mean)
    upper_margin = max(0.0, mean) + 0.5 * np.sqrt(max(var, 0.0)) - emax
    passed = lower_margin >= -slack and upper_margin >= -slack
    return EMaxReport(passed=passed, lower_margin=lower_margin,
                      upper_margin=upper_margin, exact=exact)


@dataclass(frozen=True)
class WeightSignReport:
    passed: bool
    worst_violation: float
    allowance: float  # tol or the achieved-gap-derived weight slack, whichever is larger
    weights: Weights


def check_weight_signs(spec: DistributionSpec, lam: float, tol: float = 1e-6) -> WeightSignReport:
    """Exact-solver output must carry the sign of each feature mean.

    Features with mu_i = 0 must have w_i = 0 up to the allowance; others may
    not point against their mean by more than it. The allowance is tol or the
    weight-space radius implied by the achieved duality gap through strong
    convexity, whichever is larger.
    """
    solver_tol = max(1e-14, lam * tol * tol / 8.0)
    cfg = OptimizerConfig(method=ExactBR(tolerance=solver_tol), lam=lam)
    weights, info = fit_svm(spec, PerturbationPlan(v=np.zeros(spec.dim), eps=0.0), cfg,
                            return_info=True)
    allowance = max(tol, float(np.sqrt(2.0 * max(info.gap, 0.0) / lam)))
    mu = spec.mu
    w = weights.w
    viol = np.zeros(spec.dim)
    pos = mu > 0
    neg = mu < 0
    zero = mu == 0
    viol[pos] = np.maximum(0.0, -w[pos])
    viol[neg] = np.maximum(0.0, w[neg])
    viol[zero] = np.abs(w[zero])
    worst = float(viol.max()) if spec.dim else 0.0
    return WeightSignReport(passed=worst <= allowance, worst_violation=worst,
                           allowance=allowance, weights=weights)


@dataclass(frozen=True)
class NormBoundReport:
    upper_ok: bool
    lower_ok: bool | None  # None when the lower bound is vacuous
    norm: float
    upper_bound: float
    lower_bound: float


def check_norm_bounds(weights: Weights, spec: DistributionSpec, lam: float,
                      gap: float = 1e-8) -> NormBoundReport:
    """Norm sandwich for an exact solve with plan zero.

    Upper bound sqrt(2 / lam) holds for the exact minimizer; a solver with
    objective gap `gap` can exceed it by at most the implied slack. The lower
    bound applies only when its right-hand side is positive; otherwise it is
    reported as skipped (lower_ok None).
    """
    norm = float(np.linalg.norm(weights.w))
    upper = np.sqrt(2.0 * (1.0 + gap) / lam)
    mu = spec.mu
    var = spec.var
    mu_norm = float(np.linalg.norm(mu))
    if mu_norm > 0:
        sigma_bar = np.sqrt((mu**2 * var).sum() / (mu_norm**2))
        rhs = (1.0 / mu_norm) * (1.0 - 0.5 * (sigma_bar / mu_norm + lam / (2.0 * mu_norm**2)))
    else:
        rhs = -np.inf
    slack = np.sqrt(2.0 * gap / lam)
    lower_ok: bool | None
    if rhs > 0:
        lower_ok = bool(norm >= rhs - slack)
    else:
        lower_ok = None
    return NormBoundReport(upper_ok=bool(norm <= upper), lower_ok=lower_ok,
                           norm=norm, upper_bound=float(upper), lower_bound=float(rhs))


@dataclass(frozen=True)
class GridReport:
    passed: bool
    violations: int
    trials: int


def check_worst_case_grid(weights: Weights, eps: float, k: int = 5, trials: int = 100,
                      seed: int = 0, flip_sign_of: int | None = None) -> GridReport:
    """The closed-form shift must attain the grid maximum of the hinge, exactly.

    Enumerates the full {k grid points per axis}^d perturbation grid for
    random points and compares against the candidate plan. `flip_sign_of`
    corrupts one coordinate of the plan, for negative-control testing.
    """
    d = weights.dim
    if d > 5 or k > 7:
        raise ValueError("grid enumeration is for d <= 5 and k <= 7")
    axis = np.linspace(-eps, eps, k)
    grids = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
    rng = np.random.Generator(np.random.Philox(key=seed))
    plan_v = eps * np.sign(weights.w)
    if flip_sign_of is not None:
        plan_v = plan_v.copy()
        plan_v[flip_sign_of] = -plan_v[flip_sign_of]
    violations = 0
    for _ in range(trials):
        x = rng.standard_normal(d)
        y = 1 if rng.random() < 0.5 else -1
        # The candidate shift is evaluated through the same vectorized call as
        # the grid so that exact ties stay exact in floating point.
        deltas = np.vstack([grids, (-y * plan_v)[None, :]])
        losses = np.maximum(0.0, 1.0 - y * ((x[None, :] + deltas) @ weights.w))
        if losses[-1] < losses[:-1].max():
            violations += 1
    return GridReport(passed=violations == 0, violations=violations, trials=trials)


@dataclass(frozen=True)
class FlipReport:
    passed: bool
    checked: int  # transitions with a decisively signed starting weight
    worst_product: float


def sign_flip_check(ws: list[np.ndarray], mask: np.ndarray, weight_tol: float) -> FlipReport:
    """Sign alternation of non-robust coordinates along consecutive solves.

    For each transition and non-robust coordinate with |w_t| > weight_tol the
    next weight must not share its sign beyond weight_tol; coordinates inside
    the tolerance band are unconstrained. Also reports the worst product
    w_t * w_{t+1}, which must stay below weight_tol^2.
    """
    checked = 0
    worst = -np.inf
    ok = True
    for w_now, w_next in zip(ws[:-1], ws[1:]):
        a = w_now[mask]
        b = w_next[mask]
        decisive = np.abs(a) > weight_tol
        checked += int(decisive.sum())
        if np.any((a > weight_tol) & (b > weight_tol)):
            ok = False
        if np.any((a < -weight_tol) & (b < -weight_tol)):
            ok = False
        if decisive.any():
            worst = max(worst, float((a * b)[decisive].max()))
    if worst == -np.inf:
        worst = 0.0
    ok = ok and worst <= weight_tol**2
    return FlipReport(passed=ok, checked=checked, worst_product=worst)


@dataclass(frozen=True)
class StepBoundReport:
    passed: bool
    worst_slack: float


def step_lower_bound_check(ws: list[np.ndarray], mask: np.ndarray, tol: float) -> StepBoundReport:
    """||w_{t+1} - w_t||^2 >= sum of squared non-robust weights at t, up to tol."""
    worst = np.inf
    ok = True
    for w_now, w_next in zip(ws[:-1], ws[1:]):
        lhs = float(np.sum((w_next - w_now) ** 2))
        rhs = float(w_now[mask] @ w_now[mask])
        slack = lhs - rhs
        worst = min(worst, slack)
        if slack < -tol:
            ok = False
    if worst == np.inf:
        worst = 0.0
    return StepBoundReport(passed=ok, worst_slack=worst)


@dataclass(frozen=True)
class PersistenceReport:
    passed: bool
    worst_ratio: float
    bound: float


def nonconvergence_proxy_check(ws: list[np.ndarray], mu_tail_plus_eps_sq: float,
                               eps: float, tol: float) -> PersistenceReport:
    """Finite-horizon stand-in for non-convergence over the trailing half.

    Checks ||w_{t+1} - w_t|| >= (1 - eps) ||w_t|| / sqrt((1 - eps)^2 + S) - tol
    for t in the second half, where S sums (mu_j + eps)^2 over the weak
    features.
    """
    denom = np.sqrt((1.0 - eps) ** 2 + mu_tail_plus_eps_sq)
    start = len(ws) // 2
    ok = True
    worst = np.inf
    for t in range(start, len(ws) - 1):
        step = float(np.linalg.norm(ws[t + 1] - ws[t]))
        bound = (1.0 - eps) * float(np.linalg.norm(ws[t])) / denom
        worst = min(worst, step - bound)
        if step < bound - tol:
            ok = False
    if worst == np.inf:
        worst = 0.0
    return PersistenceReport(passed=ok, worst_ratio=worst, bound=float(denom))
