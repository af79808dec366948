import numpy as np
import pytest

from slar.dist import DiscreteSymmetric, DistributionSpec, TwoPoint, nonrobust_mask, paper_distribution, sample
from slar.game import GameConfig, run_at, run_ne, run_oat, run_standard, verify_ne
from slar.model import Weights, ne_plan, nonrobust_mass, worst_case_plan
from slar.oracle import step_lower_bound_check, sign_flip_check
from slar.solve import ExactBR, OptimizerConfig, Stochastic, fit_oat


def _exact_cfg(eps, lam, rounds=1, tol=1e-10):
    return GameConfig(eps=eps, rounds=rounds,
                      solver=OptimizerConfig(method=ExactBR(tolerance=tol), lam=lam))


class TestAlternatingPlay:
    def test_zero_budget_freezes_after_first_round(self, flip_spec):
        spec, _, lam = flip_spec
        traj = run_at(spec, spec, _exact_cfg(eps=0.0, lam=lam, rounds=4))
        assert traj.error is None
        w1 = traj.records[0].w
        for r in traj.records[1:]:
            assert np.max(np.abs(r.w - w1)) < 1e-5
            assert np.max(np.abs(r.v)) == 0.0

    def test_sign_flips_on_nonrobust_coordinates(self, flip_spec):
        spec, eps, lam = flip_spec
        traj = run_at(spec, spec, _exact_cfg(eps, lam, rounds=8, tol=1e-8))
        ws = [np.zeros(spec.dim)] + [r.w for r in traj.records]
        rep = sign_flip_check(ws, nonrobust_mask(spec, eps), weight_tol=1e-5)
        assert rep.passed and rep.checked > 0

    def test_step_lower_bound_every_round(self, flip_spec):
        spec, eps, lam = flip_spec
        traj = run_at(spec, spec, _exact_cfg(eps, lam, rounds=8, tol=1e-8))
        ws = [np.zeros(spec.dim)] + [r.w for r in traj.records]
        rep = step_lower_bound_check(ws, nonrobust_mask(spec, eps), tol=1e-8)
        assert rep.passed

    def test_round_one_equals_standard_training(self, flip_spec):
        # zero start makes the first adversary move the zero perturbation
        spec, eps, lam = flip_spec
        at = run_at(spec, spec, _exact_cfg(eps, lam, rounds=1, tol=1e-12))
        std = run_standard(spec, spec, _exact_cfg(eps, lam, tol=1e-12))
        assert np.max(np.abs(at.records[0].w - std.records[0].w)) < 1e-5

    def test_solver_failure_marks_trajectory(self, flip_spec):
        spec, eps, lam = flip_spec
        cfg = GameConfig(eps=eps, rounds=3,
                         solver=OptimizerConfig(method=ExactBR(tolerance=1e-14, max_sweeps=1), lam=lam))
        traj = run_at(spec, spec, cfg)
        assert traj.error is not None
        assert len(traj.records) == 0

    def test_stochastic_needs_dataset(self, flip_spec):
        spec, eps, lam = flip_spec
        cfg = GameConfig(eps=eps, rounds=2,
                         solver=OptimizerConfig(method=Stochastic(), lam=lam))
        with pytest.raises(TypeError):
            run_at(spec, spec, cfg)

    def test_records_carry_population_metrics(self, flip_spec):
        spec, eps, lam = flip_spec
        traj = run_at(spec, spec, _exact_cfg(eps, lam, rounds=2))
        r = traj.records[-1]
        assert 0.0 <= r.std_acc_train <= 1.0
        assert r.std_acc_test == r.std_acc_train  # population serves both roles
        assert r.delta_w_norm >= 0.0


class TestStandardTraining:
    def test_zero_mean_weak_features_get_zero_weight(self):
        spec = DistributionSpec((
            TwoPoint(0.75),
            DiscreteSymmetric((-0.2, 0.2), (0.5, 0.5)),  # mean 0
            DiscreteSymmetric((-0.1, 0.1), (0.5, 0.5)),  # mean 0
        ))
        traj = run_standard(spec, spec, _exact_cfg(eps=0.05, lam=0.1, tol=1e-12))
        w = traj.records[0].w
        assert np.max(np.abs(w[1:])) < 1e-5
        assert w[0] > 0.1

    def test_reliance_inequality_under_condition(self):
        # fixed spec whose plain-training condition holds (threshold ~ 0.75)
        feats = [TwoPoint(0.55)] + [DiscreteSymmetric((0.28, 0.32), (0.5, 0.5))] * 12
        spec = DistributionSpec(tuple(feats))
        lam = 0.4
        traj = run_standard(spec, spec, _exact_cfg(eps=0.0, lam=lam, tol=1e-12))
        w = traj.records[0].w
        mu = spec.mu
        assert w[0] <= float(np.dot(w[1:], mu[1:])) + 1e-8
        tail_mass = float(w[1:] @ w[1:]) / float(w @ w)
        assert tail_mass >= 1.0 / (1.0 + float(mu[1:] @ mu[1:])) - 1e-8

    def test_single_record_for_exact(self, flip_spec):
        spec, eps, lam = flip_spec
        traj = run_standard(spec, spec, _exact_cfg(eps, lam, rounds=10))
        assert len(traj.records) == 1


class TestOAT:
    def test_exact_solution_is_robust(self, flip_spec):
        spec, eps, lam = flip_spec
        traj = run_oat(spec, spec, _exact_cfg(eps, lam, tol=1e-12))
        assert traj.records[-1].nonrobust_mass <= 1e-6

    def test_stochastic_records_per_epoch(self):
        spec = paper_distribution(20, 0.7, 0.02, 0.05)
        data = sample(spec, 400, seed=5)
        test = sample(spec, 100, seed=6)
        cfg = GameConfig(eps=0.05, rounds=6,
                         solver=OptimizerConfig(method=Stochastic(batch_size=100, seed=2), lam=0.01))
        traj = run_oat(data, spec, cfg, test=test)
        assert len(traj.records) == 6
        assert all(np.isfinite(r.objective) for r in traj.records)


class TestEquilibrium:
    def test_run_ne_is_robust_and_verifies(self, flip_spec):
        spec, eps, lam = flip_spec
        plan, weights, traj = run_ne(spec, spec, _exact_cfg(eps, lam, tol=1e-12))
        assert nonrobust_mass(weights, spec, eps) <= 1e-6
        rep = verify_ne(plan, weights, spec, eps, lam, tol=1e-5)
        assert rep.passed

    def test_two_solver_starts_agree(self, flip_spec):
        spec, eps, lam = flip_spec
        cfg_a = GameConfig(eps=eps, rounds=1,
                           solver=OptimizerConfig(method=ExactBR(tolerance=1e-12), lam=lam))
        cfg_b = GameConfig(eps=eps, rounds=1,
                           solver=OptimizerConfig(method=ExactBR(tolerance=1e-12, init_seed=8), lam=lam))
        _, wa, _ = run_ne(spec, spec, cfg_a)
        _, wb, _ = run_ne(spec, spec, cfg_b)
        assert np.linalg.norm(wa.w - wb.w) <= 1e-4

    def test_mid_trajectory_iterate_fails_column_check(self, flip_spec):
        spec, eps, lam = flip_spec
        traj = run_at(spec, spec, _exact_cfg(eps, lam, rounds=4, tol=1e-8))
        w_mid = Weights(w=traj.records[1].w, lam=lam)
        rep = verify_ne(worst_case_plan(w_mid, eps), w_mid, spec, eps, lam, tol=1e-5)
        assert rep.row_ok           # the worst-case plan is always row-optimal
        assert not rep.col_ok       # but the next best response moves the model

    def test_zero_pair_fails_when_zero_is_not_optimal(self, flip_spec):
        spec, eps, lam = flip_spec
        w0 = Weights(w=np.zeros(spec.dim), lam=lam)
        plan0 = worst_case_plan(w0, eps)
        rep = verify_ne(plan0, w0, spec, eps, lam, tol=1e-5)
        assert not rep.passed

    def test_oat_and_ne_agree_on_robust_coordinates(self, flip_spec):
        spec, eps, lam = flip_spec
        _, w_ne, _ = run_ne(spec, spec, _exact_cfg(eps, lam, tol=1e-12))
        w_oat = fit_oat(spec, eps, OptimizerConfig(method=ExactBR(tolerance=1e-12), lam=lam))
        robust = ~nonrobust_mask(spec, eps)
        assert np.max(np.abs(w_ne.w[robust] - w_oat.w[robust])) < 1e-5

    def test_plan_from_estimated_means(self):
        spec = paper_distribution(5, 0.7, 0.05, 0.05)
        data = sample(spec, 20_000, seed=31)
        cfg = _exact_cfg(eps=0.1, lam=0.05, tol=1e-10)
        plan, weights, traj = run_ne(data, None, cfg)
        assert "mean_estimation_error" in traj.meta
        exact_plan = ne_plan(spec, 0.1)
        # estimated shifts track the exact construction at sampling accuracy
        assert np.max(np.abs(plan.v - exact_plan.v)) < 5 * traj.meta["mean_estimation_error"] + 1e-3


class TestGameConfigValidation:
    def test_bad_rounds(self):
        with pytest.raises(ValueError):
            GameConfig(eps=0.1, rounds=0, solver=OptimizerConfig(method=ExactBR(), lam=0.1))

    def test_bad_eps(self):
        with pytest.raises(ValueError):
            GameConfig(eps=-0.1, rounds=1, solver=OptimizerConfig(method=ExactBR(), lam=0.1))
