"""Synthetic feature distributions with label-symmetric means.

Every feature is described conditionally on the label y in {-1, +1}. The
conditional mean is y * mu_i by construction and features are drawn
independently given the label; no joint parameters exist, so conditional
independence cannot be violated by configuration.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

# Cap on the per-label product support size for exact enumeration.
SUPPORT_CAP = 10**6


@dataclass(frozen=True)
class TwoPoint:
    """Binary feature equal to the label with probability p, its negation otherwise.

    Conditional mean is 2p - 1 (times the label) and conditional variance is
    1 - (2p - 1)^2.
    """

    p: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"TwoPoint probability must lie in [0, 1], got {self.p}")

    @property
    def mean(self) -> float:
        return 2.0 * self.p - 1.0

    @property
    def var(self) -> float:
        return 1.0 - (2.0 * self.p - 1.0) ** 2


@dataclass(frozen=True)
class Gaussian:
    """Gaussian feature with conditional law N(y * mu, sigma^2)."""

    mu: float
    sigma: float

    def __post_init__(self) -> None:
        if not self.sigma > 0.0:
            raise ValueError(f"Gaussian sigma must be positive, got {self.sigma}")

    @property
    def mean(self) -> float:
        return self.mu

    @property
    def var(self) -> float:
        return self.sigma**2


@dataclass(frozen=True)
class DiscreteSymmetric:
    """Finite-support feature; stores the law for y = +1, y = -1 gets the mirror.

    Storing only one conditional law makes the mean symmetry hold by
    construction instead of by validation.
    """

    values: tuple[float, ...]
    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.values) != len(self.probs) or not self.values:
            raise ValueError("values and probs must be equal-length and nonempty")
        if any(q < 0.0 for q in self.probs):
            raise ValueError("probabilities must be nonnegative")
        if abs(sum(self.probs) - 1.0) > 1e-9:
            raise ValueError(f"probabilities must sum to 1, got {sum(self.probs)}")

    @property
    def mean(self) -> float:
        return float(np.dot(self.values, self.probs))

    @property
    def var(self) -> float:
        m = self.mean
        return float(np.dot(np.square(self.values), self.probs) - m * m)


FeatureSpec = Union[TwoPoint, Gaussian, DiscreteSymmetric]


@dataclass(frozen=True)
class DistributionSpec:
    """Ordered feature list under a uniform label prior on {-1, +1}."""

    features: tuple[FeatureSpec, ...]

    def __post_init__(self) -> None:
        if not self.features:
            raise ValueError("a distribution needs at least one feature")

    @property
    def dim(self) -> int:
        return len(self.features)

    @property
    def mu(self) -> np.ndarray:
        """Conditional means for y = +1, one entry per feature."""
        return np.array([f.mean for f in self.features])

    @property
    def var(self) -> np.ndarray:
        return np.array([f.var for f in self.features])

    @property
    def sigma(self) -> np.ndarray:
        return np.sqrt(self.var)

    def is_finite(self) -> bool:
        return all(not isinstance(f, Gaussian) for f in self.features)


@dataclass(frozen=True)
class Dataset:
    """Finite sample: an n x d matrix of points, labels in {-1, +1}, seed of record."""

    points: np.ndarray
    labels: np.ndarray
    seed: int

    def __post_init__(self) -> None:
        if self.points.ndim != 2:
            raise ValueError("points must be a 2-D array")
        if self.labels.shape != (self.points.shape[0],):
            raise ValueError("label count must equal the number of rows in points")
        if not np.all(np.isin(self.labels, (-1, 1))):
            raise ValueError("labels must take values -1 or +1 only")

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


class Atoms(NamedTuple):
    """Joint support of a finite distribution as parallel arrays."""

    points: np.ndarray  # (m, d)
    labels: np.ndarray  # (m,)
    probs: np.ndarray  # (m,)


def paper_distribution(d: int, p: float, mu: float, sigma: float) -> DistributionSpec:
    """One TwoPoint(p) feature followed by d Gaussian(mu, sigma) features.

    Total dimension is d + 1.
    """
    if d < 1:
        raise ValueError(f"d must be a positive integer, got {d}")
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie strictly inside (0, 1), got {p}")
    if not sigma > 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    return DistributionSpec((TwoPoint(p),) + (Gaussian(mu, sigma),) * d)


def _draw_layout(spec: DistributionSpec):
    """Static per-sample uniform-draw layout.

    Slot 0 is the label; TwoPoint and DiscreteSymmetric features consume one
    uniform each, Gaussians consume two (Box-Muller), so every sample uses a
    fixed number of draws from its own stream.
    """
    tp_pos, tp_slot, tp_p = [], [], []
    g_pos, g_slot, g_mu, g_sigma = [], [], [], []
    ds = []  # (position, slot, values array, cumulative probs)
    slot = 1
    for pos, f in enumerate(spec.features):
        if isinstance(f, TwoPoint):
            tp_pos.append(pos)
            tp_slot.append(slot)
            tp_p.append(f.p)
            slot += 1
        elif isinstance(f, Gaussian):
            g_pos.append(pos)
            g_slot.append(slot)
            g_mu.append(f.mu)
            g_sigma.append(f.sigma)
            slot += 2
        else:
            ds.append((pos, slot, np.asarray(f.values), np.cumsum(f.probs)))
            slot += 1
    return (
        np.array(tp_pos, dtype=int),
        np.array(tp_slot, dtype=int),
        np.array(tp_p),
        np.array(g_pos, dtype=int),
        np.array(g_slot, dtype=int),
        np.array(g_mu),
        np.array(g_sigma),
        ds,
        slot,
    )


def sample(spec: DistributionSpec, n: int, seed: int) -> Dataset:
    """Draw n i.i.d. samples, bit-reproducible and order-independent.

    Each sample owns a counter-based stream keyed by (seed, sample index), so
    serial and parallel generation produce identical datasets.
    """
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    if seed < 0:
        raise ValueError("seed must be a nonnegative integer")
    tp_pos, tp_slot, tp_p, g_pos, g_slot, g_mu, g_sigma, ds, draws = _draw_layout(spec)
    d = spec.dim
    points = np.empty((n, d))
    labels = np.empty(n, dtype=np.int64)
    base = int(seed) << 64
    for i in range(n):
        gen = np.random.Generator(np.random.Philox(key=base + i))
        u = gen.random(draws)
        y = 1 if u[0] < 0.5 else -1
        x = points[i]
        if tp_pos.size:
            x[tp_pos] = np.where(u[tp_slot] < tp_p, y, -y)
        if g_pos.size:
            # 1 - u in (0, 1], so the log is always finite.
            r = np.sqrt(-2.0 * np.log1p(-u[g_slot]))
            z = r * np.cos(2.0 * np.pi * u[g_slot + 1])
            x[g_pos] = y * g_mu + g_sigma * z
        for pos, slot, values, cum in ds:
            x[pos] = y * values[np.searchsorted(cum, u[slot], side="right")]
        labels[i] = y
    return Dataset(points=points, labels=labels, seed=int(seed))


def is_non_robust(spec: DistributionSpec, i: int, eps: float) -> bool:
    """True iff |mu_i| <= eps (boundary counts as non-robust). Index is 0-based."""
    if not 0 <= i < spec.dim:
        raise IndexError(f"feature index {i} out of range for dimension {spec.dim}")
    if eps < 0.0:
        raise ValueError("eps must be nonnegative")
    return abs(spec.features[i].mean) <= eps


def nonrobust_mask(spec: DistributionSpec, eps: float) -> np.ndarray:
    """Boolean mask over features, True where |mu_i| <= eps."""
    if eps < 0.0:
        raise ValueError("eps must be nonnegative")
    return np.abs(spec.mu) <= eps


def _conditional_support(f: FeatureSpec) -> tuple[np.ndarray, np.ndarray]:
    """Support of the y = +1 conditional law as (values, probs)."""
    if isinstance(f, TwoPoint):
        return np.array([1.0, -1.0]), np.array([f.p, 1.0 - f.p])
    if isinstance(f, DiscreteSymmetric):
        return np.asarray(f.values, dtype=float), np.asarray(f.probs, dtype=float)
    raise ValueError("exact support enumeration requires finite-support features only")


def enumerate_support(spec: DistributionSpec) -> Atoms:
    """Complete joint support with probabilities, for exact expectations.

    The y = -1 block is the mirror of the y = +1 block. Probabilities sum to 1
    up to accumulated rounding. Product support size per label is capped at
    SUPPORT_CAP.
    """
    supports = [_conditional_support(f) for f in spec.features]
    size = 1
    for vals, _ in supports:
        size *= len(vals)
        if size > SUPPORT_CAP:
            raise ValueError(f"product support size exceeds cap {SUPPORT_CAP}")
    pts = np.zeros((1, 0))
    pr = np.ones(1)
    for vals, probs in supports:
        k = len(vals)
        m = pts.shape[0]
        pts = np.hstack([np.repeat(pts, k, axis=0), np.tile(vals, m)[:, None]])
        pr = (pr[:, None] * probs[None, :]).ravel()
    points = np.vstack([pts, -pts])
    labels = np.concatenate([np.ones(len(pr), dtype=np.int64), -np.ones(len(pr), dtype=np.int64)])
    probs = 0.5 * np.concatenate([pr, pr])
    return Atoms(points=points, labels=labels, probs=probs)


def atoms_of(data: "Dataset | DistributionSpec") -> Atoms:
    """Uniform atom view: a dataset's rows with weight 1/n, or the exact support."""
    if isinstance(data, Dataset):
        w = np.full(data.n, 1.0 / data.n)
        return Atoms(points=data.points, labels=data.labels, probs=w)
    if isinstance(data, DistributionSpec):
        return enumerate_support(data)
    raise TypeError(f"expected Dataset or DistributionSpec, got {type(data).__name__}")


def discretize(spec: DistributionSpec) -> DistributionSpec:
    """Replace Gaussian features by two-point laws with matched mean and variance."""
    out: list[FeatureSpec] = []
    for f in spec.features:
        if isinstance(f, Gaussian):
            out.append(DiscreteSymmetric(values=(f.mu - f.sigma, f.mu + f.sigma), probs=(0.5, 0.5)))
        else:
            out.append(f)
    return DistributionSpec(tuple(out))


def estimate_means(data: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Plug-in estimates of mu from a sample: per-feature mean of x_i * y and its stderr."""
    prod = data.points * data.labels[:, None]
    mu_hat = prod.mean(axis=0)
    stderr = prod.std(axis=0, ddof=1) / np.sqrt(data.n) if data.n > 1 else np.full(data.dim, np.inf)
    return mu_hat, stderr


def write_dataset_csv(data: Dataset, path) -> None:
    """CSV export: header y,x1,...,xD; labels as -1/1; 17 significant digits."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("y," + ",".join(f"x{j + 1}" for j in range(data.dim)) + "\n")
        for y, row in zip(data.labels, data.points):
            fh.write(f"{int(y)}," + ",".join(f"{v:.17g}" for v in row) + "\n")
