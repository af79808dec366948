import hashlib
import json
import os

from slar.cli import EXIT_CONFIG, EXIT_IO, EXIT_OK, EXIT_SOLVER, main

SMALL_CFG = """
distribution.d = 30
distribution.p = 0.7
distribution.mu = 0.02
distribution.sigma = 0.02
n_train = 300
n_test = 150
eps = 0.04
lambda = 0.01
method = all
rounds = 5
solver = sgd
solver.sgd.lr = 0.01
solver.sgd.batch = 50
solver.sgd.epochs = 1
seed = 12
emit_plots = true
"""

EXACT_NE_CFG = """
feature.1.kind = twopoint
feature.1.p = 0.65
feature.2.kind = gaussian
feature.2.mu = 0.02
feature.2.sigma = 0.05
feature.3.kind = discrete
feature.3.values = -0.02,0.06
feature.3.probs = 0.5,0.5
feature.4.kind = discrete
feature.4.values = 0.2,0.4
feature.4.probs = 0.5,0.5
n_train = 200
n_test = 100
eps = 0.05
lambda = 0.02
method = ne
rounds = 1
solver = exact
solver.exact.tolerance = 1e-12
exact_population = true
emit_plots = false
seed = 4
"""


def _write(tmp_path, text, name="exp.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def _hash_dir(path, suffix=".csv"):
    out = {}
    for name in sorted(os.listdir(path)):
        if name.endswith(suffix):
            with open(os.path.join(path, name), "rb") as fh:
                out[name] = hashlib.sha256(fh.read()).hexdigest()
    return out


class TestGen:
    def test_writes_train_and_test(self, tmp_path):
        cfg = _write(tmp_path, SMALL_CFG)
        out = str(tmp_path / "g")
        assert main(["gen", cfg, "--out", out, "--quiet"]) == EXIT_OK
        train = (tmp_path / "g" / "train.csv").read_text().splitlines()
        assert train[0] == "y," + ",".join(f"x{j}" for j in range(1, 32))
        assert len(train) == 301
        test = (tmp_path / "g" / "test.csv").read_text().splitlines()
        assert len(test) == 151

    def test_deterministic_files(self, tmp_path):
        cfg = _write(tmp_path, SMALL_CFG)
        a, b = str(tmp_path / "a"), str(tmp_path / "b")
        assert main(["gen", cfg, "--out", a, "--quiet"]) == EXIT_OK
        assert main(["gen", cfg, "--out", b, "--quiet"]) == EXIT_OK
        assert _hash_dir(a) == _hash_dir(b)

    def test_zero_rows_is_config_error(self, tmp_path):
        cfg = _write(tmp_path, "n_train = 0\n")
        assert main(["gen", cfg, "--quiet"]) == EXIT_CONFIG

    def test_missing_config_is_config_error(self, tmp_path):
        assert main(["gen", str(tmp_path / "missing.cfg"), "--quiet"]) == EXIT_CONFIG


class TestRun:
    def test_all_methods_emit_artifacts(self, tmp_path):
        cfg = _write(tmp_path, SMALL_CFG)
        out = str(tmp_path / "r")
        assert main(["run", cfg, "--out", out, "--quiet"]) == EXIT_OK
        names = sorted(os.listdir(out))
        for m in ("standard", "at", "oat", "ne"):
            assert f"trajectory_{m}.csv" in names
            assert f"weights_{m}.csv" in names
        for fig in ("fig_deltaw.svg", "fig_acc.svg", "fig_weights.svg"):
            assert fig in names
        assert "summary.json" in names

    def test_summary_schema(self, tmp_path):
        cfg = _write(tmp_path, SMALL_CFG)
        out = str(tmp_path / "s")
        assert main(["run", cfg, "--out", out, "--quiet"]) == EXIT_OK
        entries = json.load(open(os.path.join(out, "summary.json")))
        assert [e["method"] for e in entries] == ["standard", "at", "oat", "ne"]
        keys = {"method", "std_acc_train", "std_acc_test", "robust_acc_test",
                "nonrobust_mass", "deltaw_mean_tail", "deltaw_min_tail", "condition_report"}
        for e in entries:
            assert set(e) == keys
            assert 0.0 <= e["std_acc_test"] <= 1.0
            assert e["condition_report"]["mu_prime_norm"] > 0

    def test_trajectory_csv_header_and_length(self, tmp_path):
        cfg = _write(tmp_path, SMALL_CFG)
        out = str(tmp_path / "t")
        assert main(["run", cfg, "--out", out, "--quiet"]) == EXIT_OK
        lines = (tmp_path / "t" / "trajectory_at.csv").read_text().splitlines()
        assert lines[0] == ("t,delta_w_norm,w_norm,nonrobust_mass,"
                            "std_acc_train,std_acc_test,robust_acc_test,objective")
        assert len(lines) == 6  # header + 5 rounds

    def test_weights_csv_flags_robustness(self, tmp_path):
        cfg = _write(tmp_path, SMALL_CFG)
        out = str(tmp_path / "w")
        assert main(["run", cfg, "--out", out, "--quiet"]) == EXIT_OK
        lines = (tmp_path / "w" / "weights_oat.csv").read_text().splitlines()
        assert lines[0] == "index,mu_i,is_robust,w_i"
        first = lines[1].split(",")
        assert first[2] == "1"  # the strong feature is robust at this budget
        weak = lines[2].split(",")
        assert weak[2] == "0"

    def test_exact_population_equilibrium(self, tmp_path):
        cfg = _write(tmp_path, EXACT_NE_CFG)
        out = str(tmp_path / "ne")
        assert main(["run", cfg, "--out", out, "--quiet"]) == EXIT_OK
        rows = (tmp_path / "ne" / "weights_ne.csv").read_text().splitlines()[1:]
        for row in rows:
            idx, mu_i, is_robust, w_i = row.split(",")
            if is_robust == "0":
                assert abs(float(w_i)) <= 1e-6

    def test_seed_override_changes_artifacts(self, tmp_path):
        cfg = _write(tmp_path, SMALL_CFG)
        a, b = str(tmp_path / "sa"), str(tmp_path / "sb")
        assert main(["run", cfg, "--out", a, "--quiet"]) == EXIT_OK
        assert main(["run", cfg, "--out", b, "--seed", "99", "--quiet"]) == EXIT_OK
        assert _hash_dir(a) != _hash_dir(b)

    def test_unreachable_solver_tolerance_is_solver_error(self, tmp_path):
        text = EXACT_NE_CFG.replace("solver.exact.tolerance = 1e-12",
                                    "solver.exact.tolerance = 1e-15\n"
                                    "solver.exact.max_iters = 1")
        cfg = _write(tmp_path, text)
        assert main(["run", cfg, "--out", str(tmp_path / "sf"), "--quiet"]) == EXIT_SOLVER

    def test_unwritable_output_is_io_error(self, tmp_path):
        cfg = _write(tmp_path, SMALL_CFG)
        blocker = tmp_path / "blocker"
        blocker.write_text("a file, not a directory")
        out = str(blocker / "sub")
        assert main(["gen", cfg, "--out", out, "--quiet"]) == EXIT_IO


class TestVerify:
    def test_config_suite_writes_report(self, tmp_path):
        cfg = _write(tmp_path, EXACT_NE_CFG)
        out = str(tmp_path / "v")
        code = main(["verify", cfg, "--out", out, "--quiet"])
        report = json.load(open(os.path.join(out, "verify.json")))
        assert code == EXIT_OK
        assert report["passed"] is True
        names = {c["name"] for c in report["checks"]}
        assert "config_condition_report" in names
        assert "config_equilibrium" in names
        statuses = {c["status"] for c in report["checks"]}
        assert statuses <= {"pass", "skip"}

    def test_builtin_suite_passes_quickly(self, tmp_path):
        import time

        out = str(tmp_path / "vb")
        start = time.perf_counter()
        code = main(["verify", "builtin", "--out", out, "--quiet"])
        elapsed = time.perf_counter() - start
        assert code == EXIT_OK
        assert elapsed < 300.0
        report = json.load(open(os.path.join(out, "verify.json")))
        assert report["passed"] is True
        for check in report["checks"]:
            assert check["inputs_digest"]
            assert check["status"] in ("pass", "skip")

    def test_failed_condition_gates_but_does_not_fail(self, tmp_path):
        # a nearly-deterministic strong feature pushes p above every
        # threshold; the condition report flags it and the theorem checks
        # that need no condition still run
        text = EXACT_NE_CFG.replace("feature.1.p = 0.65", "feature.1.p = 0.97")
        cfg = _write(tmp_path, text)
        out = str(tmp_path / "gate")
        code = main(["verify", cfg, "--out", out, "--quiet"])
        assert code == EXIT_OK
        report = json.load(open(os.path.join(out, "verify.json")))
        cond = next(c for c in report["checks"] if c["name"] == "config_condition_report")
        assert cond["margins"]["holds_at"] is False
        assert all(c["status"] in ("pass", "skip") for c in report["checks"])
