"""Flat key-value experiment configs.

Grammar: one `key = value` pair per line; `#` starts a comment; blank lines
are ignored; keys use dotted sections (for example `solver.sgd.lr = 0.01`).
Unknown keys are rejected with the offending key named. The distribution is
either the four-parameter family (`distribution.d/p/mu/sigma`) or an explicit
feature list (`feature.1.kind = twopoint`, ...); explicit features override
the family block.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from slar.dist import DiscreteSymmetric, DistributionSpec, Gaussian, TwoPoint, paper_distribution

METHODS = ("standard", "at", "oat", "ne", "all")

_KNOWN_SCALARS = {
    "distribution.d", "distribution.p", "distribution.mu", "distribution.sigma",
    "n_train", "n_test", "eps", "lambda", "method", "rounds", "solver",
    "solver.exact.tolerance", "solver.exact.max_iters",
    "solver.sgd.lr", "solver.sgd.batch", "solver.sgd.epochs",
    "seed", "output_dir", "emit_plots", "exact_population",
}
_FEATURE_FIELDS = {"kind", "p", "mu", "sigma", "values", "probs"}


class ConfigError(ValueError):
    """A config file failed to parse or validate; message names the field."""


@dataclass
class ExperimentConfig:
    distribution: DistributionSpec
    n_train: int = 10000
    n_test: int = 1000
    eps: float = 0.02
    lam: float = 0.01
    method: str = "all"
    rounds: int = 50
    solver: str = "sgd"
    exact_tolerance: float = 1e-8
    exact_max_iters: int = 200_000
    sgd_lr: float = 0.01
    sgd_batch: int = 200
    sgd_epochs: int = 1
    seed: int = 0
    output_dir: str = "out"
    emit_plots: bool = True
    exact_population: bool = False
    dist_params: dict = field(default_factory=dict)

    def methods(self) -> list[str]:
        return ["standard", "at", "oat", "ne"] if self.method == "all" else [self.method]


def _parse_lines(text: str) -> dict[str, str]:
    pairs: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key, value = key.strip(), value.strip()
        if not key or not value:
            raise ConfigError(f"line {lineno}: empty key or value")
        if key in pairs:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        pairs[key] = value
    return pairs


def _want_int(pairs: dict, key: str, default: int) -> int:
    if key not in pairs:
        return default
    try:
        return int(pairs[key])
    except ValueError as err:
        raise ConfigError(f"{key}: expected an integer, got {pairs[key]!r}") from err


def _want_float(pairs: dict, key: str, default: float) -> float:
    if key not in pairs:
        return default
    try:
        return float(pairs[key])
    except ValueError as err:
        raise ConfigError(f"{key}: expected a number, got {pairs[key]!r}") from err


def _want_bool(pairs: dict, key: str, default: bool) -> bool:
    if key not in pairs:
        return default
    val = pairs[key].lower()
    if val in ("true", "yes", "1"):
        return True
    if val in ("false", "no", "0"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {pairs[key]!r}")


def _float_list(key: str, raw: str) -> tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in raw.split(","))
    except ValueError as err:
        raise ConfigError(f"{key}: expected comma-separated numbers, got {raw!r}") from err


def _explicit_features(pairs: dict) -> DistributionSpec | None:
    groups: dict[int, dict[str, str]] = {}
    for key in pairs:
        if not key.startswith("feature."):
            continue
        parts = key.split(".")
        if len(parts) != 3 or parts[2] not in _FEATURE_FIELDS:
            raise ConfigError(f"unknown key {key!r}")
        try:
            idx = int(parts[1])
        except ValueError as err:
            raise ConfigError(f"{key}: feature index must be an integer") from err
        groups.setdefault(idx, {})[parts[2]] = pairs[key]
    if not groups:
        return None
    indices = sorted(groups)
    if indices != list(range(1, len(indices) + 1)):
        raise ConfigError(f"feature indices must be 1..{len(indices)} without gaps, got {indices}")
    feats = []
    for idx in indices:
        g = groups[idx]
        kind = g.get("kind")
        if kind is None:
            raise ConfigError(f"feature.{idx}.kind is required")
        try:
            if kind == "twopoint":
                feats.append(TwoPoint(p=float(g["p"])))
            elif kind == "gaussian":
                feats.append(Gaussian(mu=float(g["mu"]), sigma=float(g["sigma"])))
            elif kind == "discrete":
                feats.append(DiscreteSymmetric(values=_float_list(f"feature.{idx}.values", g["values"]),
                                               probs=_float_list(f"feature.{idx}.probs", g["probs"])))
            else:
                raise ConfigError(f"feature.{idx}.kind: unknown kind {kind!r}")
        except KeyError as err:
            raise ConfigError(f"feature.{idx}: missing field {err.args[0]}") from err
        except ValueError as err:
            raise ConfigError(f"feature.{idx}: {err}") from err
    return DistributionSpec(tuple(feats))


def parse_config(text: str) -> ExperimentConfig:
    pairs = _parse_lines(text)
    for key in pairs:
        if key not in _KNOWN_SCALARS and not key.startswith("feature."):
            raise ConfigError(f"unknown key {key!r}")

    explicit = _explicit_features(pairs)
    dist_params = {}
    if explicit is not None:
        spec = explicit
    else:
        d = _want_int(pairs, "distribution.d", 2000)
        p = _want_float(pairs, "distribution.p", 0.7)
        mu = _want_float(pairs, "distribution.mu", 0.01)
        sigma = _want_float(pairs, "distribution.sigma", 0.01)
        try:
            spec = paper_distribution(d, p, mu, sigma)
        except ValueError as err:
            raise ConfigError(f"distribution: {err}") from err
        dist_params = {"d": d, "p": p, "mu": mu, "sigma": sigma}

    cfg = ExperimentConfig(
        distribution=spec,
        n_train=_want_int(pairs, "n_train", 10000),
        n_test=_want_int(pairs, "n_test", 1000),
        eps=_want_float(pairs, "eps", 0.02),
        lam=_want_float(pairs, "lambda", 0.01),
        method=pairs.get("method", "all"),
        rounds=_want_int(pairs, "rounds", 50),
        solver=pairs.get("solver", "sgd"),
        exact_tolerance=_want_float(pairs, "solver.exact.tolerance", 1e-8),
        exact_max_iters=_want_int(pairs, "solver.exact.max_iters", 200_000),
        sgd_lr=_want_float(pairs, "solver.sgd.lr", 0.01),
        sgd_batch=_want_int(pairs, "solver.sgd.batch", 200),
        sgd_epochs=_want_int(pairs, "solver.sgd.epochs", 1),
        seed=_want_int(pairs, "seed", 0),
        output_dir=pairs.get("output_dir", "out"),
        emit_plots=_want_bool(pairs, "emit_plots", True),
        exact_population=_want_bool(pairs, "exact_population", False),
        dist_params=dist_params,
    )
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    if cfg.n_train < 1:
        raise ConfigError(f"n_train: must be at least 1, got {cfg.n_train}")
    if cfg.n_test < 1:
        raise ConfigError(f"n_test: must be at least 1, got {cfg.n_test}")
    if cfg.eps < 0:
        raise ConfigError(f"eps: must be nonnegative, got {cfg.eps}")
    if cfg.lam <= 0:
        raise ConfigError(f"lambda: must be positive, got {cfg.lam}")
    if cfg.method not in METHODS:
        raise ConfigError(f"method: must be one of {'|'.join(METHODS)}, got {cfg.method!r}")
    if cfg.rounds < 1:
        raise ConfigError(f"rounds: must be at least 1, got {cfg.rounds}")
    if cfg.solver not in ("exact", "sgd"):
        raise ConfigError(f"solver: must be 'exact' or 'sgd', got {cfg.solver!r}")
    if cfg.exact_tolerance <= 0:
        raise ConfigError(f"solver.exact.tolerance: must be positive, got {cfg.exact_tolerance}")
    if cfg.exact_max_iters < 1:
        raise ConfigError(f"solver.exact.max_iters: must be at least 1, got {cfg.exact_max_iters}")
    if cfg.sgd_lr <= 0:
        raise ConfigError(f"solver.sgd.lr: must be positive, got {cfg.sgd_lr}")
    if cfg.sgd_batch < 1:
        raise ConfigError(f"solver.sgd.batch: must be at least 1, got {cfg.sgd_batch}")
    if cfg.sgd_epochs < 1:
        raise ConfigError(f"solver.sgd.epochs: must be at least 1, got {cfg.sgd_epochs}")
    if cfg.seed < 0:
        raise ConfigError(f"seed: must be nonnegative, got {cfg.seed}")


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    return parse_config(text)


def spec_to_config_lines(spec: DistributionSpec) -> str:
    """Serialize a spec as an explicit feature list in the config grammar."""
    lines = []
    for i, f in enumerate(spec.features, start=1):
        if isinstance(f, TwoPoint):
            lines.append(f"feature.{i}.kind = twopoint")
            lines.append(f"feature.{i}.p = {f.p:.17g}")
        elif isinstance(f, Gaussian):
            lines.append(f"feature.{i}.kind = gaussian")
            lines.append(f"feature.{i}.mu = {f.mu:.17g}")
            lines.append(f"feature.{i}.sigma = {f.sigma:.17g}")
        else:
            lines.append(f"feature.{i}.kind = discrete")
            lines.append(f"feature.{i}.values = " + ",".join(f"{v:.17g}" for v in f.values))
            lines.append(f"feature.{i}.probs = " + ",".join(f"{q:.17g}" for q in f.probs))
    return "\n".join(lines) + "\n"
