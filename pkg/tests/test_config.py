import numpy as np
import pytest

from slar.config import ConfigError, load_config, parse_config, spec_to_config_lines
from slar.dist import DiscreteSymmetric, DistributionSpec, Gaussian, TwoPoint

PAPER_CFG = """
# experiment parameters
distribution.d = 2000
distribution.p = 0.7
distribution.mu = 0.01
distribution.sigma = 0.01
n_train = 10000
n_test = 1000
eps = 0.02
lambda = 0.01
method = all
rounds = 50
solver = sgd
solver.sgd.lr = 0.01
solver.sgd.batch = 200
solver.sgd.epochs = 1
seed = 0
output_dir = out
emit_plots = true
"""


class TestParsing:
    def test_paper_config(self):
        cfg = parse_config(PAPER_CFG)
        assert cfg.distribution.dim == 2001
        assert cfg.eps == 0.02 and cfg.lam == 0.01
        assert cfg.methods() == ["standard", "at", "oat", "ne"]
        assert cfg.sgd_batch == 200

    def test_defaults_match_paper_run(self):
        cfg = parse_config("")
        assert cfg.distribution.dim == 2001
        assert cfg.n_train == 10000 and cfg.n_test == 1000
        assert cfg.rounds == 50 and cfg.solver == "sgd"

    def test_comments_and_blanks_ignored(self):
        cfg = parse_config("# a comment\n\n  eps = 0.05  # trailing\n")
        assert cfg.eps == 0.05

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config("nonsense = 1\n")

    def test_duplicate_key_rejected(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config("eps = 0.1\neps = 0.2\n")

    def test_bad_number(self):
        with pytest.raises(ConfigError, match="eps"):
            parse_config("eps = lots\n")

    def test_bad_method(self):
        with pytest.raises(ConfigError, match="method"):
            parse_config("method = magic\n")

    @pytest.mark.parametrize("line,field", [
        ("n_train = 0", "n_train"),
        ("rounds = 0", "rounds"),
        ("lambda = 0", "lambda"),
        ("solver.sgd.batch = 0", "solver.sgd.batch"),
        ("seed = -1", "seed"),
    ])
    def test_range_validation(self, line, field):
        with pytest.raises(ConfigError, match=field.replace(".", r"\.")):
            parse_config(line + "\n")


class TestExplicitFeatures:
    def test_feature_list(self):
        text = """
        feature.1.kind = twopoint
        feature.1.p = 0.7
        feature.2.kind = gaussian
        feature.2.mu = 0.01
        feature.2.sigma = 0.02
        feature.3.kind = discrete
        feature.3.values = -0.1,0.3
        feature.3.probs = 0.5,0.5
        """
        cfg = parse_config(text)
        spec = cfg.distribution
        assert isinstance(spec.features[0], TwoPoint)
        assert isinstance(spec.features[1], Gaussian)
        assert isinstance(spec.features[2], DiscreteSymmetric)
        assert np.allclose(spec.mu, [0.4, 0.01, 0.1])

    def test_gapped_indices_rejected(self):
        with pytest.raises(ConfigError, match="indices"):
            parse_config("feature.1.kind = twopoint\nfeature.1.p = 0.7\n"
                         "feature.3.kind = twopoint\nfeature.3.p = 0.6\n")

    def test_missing_field_rejected(self):
        with pytest.raises(ConfigError, match="feature.1"):
            parse_config("feature.1.kind = gaussian\nfeature.1.mu = 0.1\n")

    def test_roundtrip_through_config_text(self):
        spec = DistributionSpec((
            TwoPoint(0.7),
            Gaussian(mu=0.01, sigma=0.02),
            DiscreteSymmetric(values=(-0.125, 0.375), probs=(0.25, 0.75)),
        ))
        cfg = parse_config(spec_to_config_lines(spec))
        back = cfg.distribution
        assert back == spec


class TestLoading:
    def test_load_from_file(self, tmp_path):
        path = tmp_path / "exp.cfg"
        path.write_text(PAPER_CFG)
        cfg = load_config(path)
        assert cfg.n_train == 10000

    def test_missing_file_is_config_error(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "nope.cfg")
