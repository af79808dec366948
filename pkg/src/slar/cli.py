"""Command-line front end.

Subcommands: `slar gen <config>` writes train/test CSVs, `slar run <config>`
executes the configured methods and emits trajectories, weight tables,
summary.json, and figures, `slar verify [config|builtin]` runs the
verification suite and writes verify.json.

Exit codes: 0 success, 1 verification failure, 2 config error, 3 solver
failure, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import os
import sys

from slar.config import ConfigError, ExperimentConfig, load_config
from slar.dist import (
    DiscreteSymmetric,
    DistributionSpec,
    SUPPORT_CAP,
    TwoPoint,
    discretize,
    nonrobust_mask,
    sample,
    write_dataset_csv,
)
from slar.game import GameConfig, run_at, run_ne, run_oat, run_standard
from slar.oracle import theorem_conditions
from slar.report import (
    render_acc_figure,
    render_deltaw_figure,
    render_weights_figure,
    summary_entry,
    write_json,
    write_trajectory_csv,
    write_weights_table_csv,
)
from slar.solve import ExactBR, OptimizerConfig, SolverError, Stochastic
from slar.suite import all_passed, builtin_suite, config_suite

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_IO = 4


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError(f"seed: must be nonnegative, got {args.seed}")
        cfg.seed = args.seed
    if args.out is not None:
        cfg.output_dir = args.out
    return cfg


def _say(args, message: str) -> None:
    if not args.quiet:
        print(message)


def _solver_config(cfg: ExperimentConfig) -> OptimizerConfig:
    if cfg.solver == "exact":
        method = ExactBR(tolerance=cfg.exact_tolerance, max_sweeps=cfg.exact_max_iters)
    else:
        method = Stochastic(learning_rate=cfg.sgd_lr, batch_size=cfg.sgd_batch,
                            epochs=cfg.sgd_epochs, seed=cfg.seed)
    return OptimizerConfig(method=method, lam=cfg.lam)


def _population_spec(cfg: ExperimentConfig) -> DistributionSpec:
    finite = discretize(cfg.distribution)
    size = 1
    for f in finite.features:
        size *= len(f.values) if isinstance(f, DiscreteSymmetric) else 2
        if size > SUPPORT_CAP:
            raise ConfigError(
                "exact_population: finite reduction exceeds the enumerable support cap")
    return finite


def cmd_gen(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    os.makedirs(cfg.output_dir, exist_ok=True)
    train = sample(cfg.distribution, cfg.n_train, seed=cfg.seed)
    test = sample(cfg.distribution, cfg.n_test, seed=cfg.seed + 1)
    train_path = os.path.join(cfg.output_dir, "train.csv")
    test_path = os.path.join(cfg.output_dir, "test.csv")
    write_dataset_csv(train, train_path)
    write_dataset_csv(test, test_path)
    _say(args, f"wrote {train_path} ({cfg.n_train} rows) and {test_path} ({cfg.n_test} rows)")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    os.makedirs(cfg.output_dir, exist_ok=True)
    spec = cfg.distribution
    solver = _solver_config(cfg)
    population = cfg.exact_population and cfg.solver == "exact"
    if cfg.exact_population and cfg.solver != "exact":
        raise ConfigError("exact_population: requires solver = exact")
    if population:
        data = _population_spec(cfg)
        test = None
        metric_spec = data
    else:
        data = sample(spec, cfg.n_train, seed=cfg.seed)
        test = sample(spec, cfg.n_test, seed=cfg.seed + 1)
        metric_spec = spec
    game_cfg = GameConfig(eps=cfg.eps, rounds=cfg.rounds, solver=solver)
    mask = nonrobust_mask(metric_spec, cfg.eps)
    mu = metric_spec.mu

    if isinstance(spec.features[0], TwoPoint):
        exact = None if spec.dim <= 13 else False
        condition = theorem_conditions(metric_spec, cfg.eps, cfg.lam, exact=exact).to_dict()
    else:
        condition = None

    runners = {"standard": run_standard, "at": run_at, "oat": run_oat}
    trajectories = []
    entries = []
    for method in cfg.methods():
        _say(args, f"running {method} ...")
        if method == "ne":
            _, _, traj = run_ne(data, metric_spec, game_cfg, test=test)
        else:
            traj = runners[method](data, metric_spec, game_cfg, test=test)
        if traj.error is not None:
            _say(args, f"solver failure in {method}: {traj.error}")
            return EXIT_SOLVER
        write_trajectory_csv(traj, os.path.join(cfg.output_dir, f"trajectory_{method}.csv"))
        write_weights_table_csv(traj.final_weights, mu, mask,
                                os.path.join(cfg.output_dir, f"weights_{method}.csv"))
        entries.append(summary_entry(traj, condition))
        trajectories.append(traj)

    write_json(os.path.join(cfg.output_dir, "summary.json"), entries)
    if cfg.emit_plots:
        render_deltaw_figure(trajectories, os.path.join(cfg.output_dir, "fig_deltaw.svg"))
        render_acc_figure(trajectories, os.path.join(cfg.output_dir, "fig_acc.svg"))
        render_weights_figure(trajectories, mask, os.path.join(cfg.output_dir, "fig_weights.svg"))
    _say(args, f"artifacts in {cfg.output_dir}")
    return EXIT_OK


def cmd_verify(args) -> int:
    out_dir = args.out if args.out is not None else "."
    if args.target == "builtin":
        seed = args.seed if args.seed is not None else None
        results = builtin_suite() if seed is None else builtin_suite(seed)
    else:
        cfg = load_config(args.target)
        results = config_suite(cfg, seed=args.seed)
        out_dir = args.out if args.out is not None else cfg.output_dir
    os.makedirs(out_dir, exist_ok=True)
    for r in results:
        _say(args, f"[{r.status.upper():4s}] {r.name} ({r.seconds:.2f}s) {r.detail}")
    passed = all_passed(results)
    write_json(os.path.join(out_dir, "verify.json"),
               {"passed": passed, "checks": [r.to_dict() for r in results]})
    _say(args, f"verification {'passed' if passed else 'FAILED'}; report in {out_dir}/verify.json")
    return EXIT_OK if passed else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="slar",
                                     description="linear adversarial-robustness game lab")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", type=str, default=None, help="override the output directory")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")

    p_gen = sub.add_parser("gen", help="write train/test CSVs for a config")
    p_gen.add_argument("config")
    common(p_gen)
    p_gen.set_defaults(func=cmd_gen)

    p_run = sub.add_parser("run", help="run the configured methods and emit artifacts")
    p_run.add_argument("config")
    common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_ver = sub.add_parser("verify", help="run the verification suite")
    p_ver.add_argument("target", nargs="?", default="builtin",
                       help="a config path or 'builtin' (default)")
    common(p_ver)
    p_ver.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as err:
        print(f"solver error: {err}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
