import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from modelavg.config import InitKind, RunConfig, parse_config, parse_flags, read_config_file
from modelavg.errors import ConfigError
from modelavg.nnet import Activation
from modelavg.optim import ScheduleKind
from modelavg.parallel import OptimizerKind


# -- helpers ----------------------------------------------------------------

def _write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return path


def _as_flags(values):
    out = []
    for key, value in values.items():
        out.extend([f"--{key}", value])
    return out


# -- defaults / precedence --------------------------------------------------------

def test_empty_file_with_synthetic_flag_gives_defaults(tmp_path):
    config = parse_config(_write(tmp_path, "# nothing here\n\n"), ["--synthetic"])
    assert config == RunConfig(synthetic=True)
    assert config.synthetic_classes == 10
    assert config.synthetic_dim == 64
    assert config.hidden_layers == 2
    assert config.hidden_dim == 128
    assert config.activation is Activation.SIGMOID
    assert config.optimizer is OptimizerKind.NGSGD
    assert config.init is InitKind.RBM
    assert config.lr_init == 0.32
    assert config.lr_schedule is ScheduleKind.EXPONENTIAL
    assert config.epochs == 15
    assert config.minibatch == 128
    assert config.workers == 1
    assert config.avg_frequency == 10
    assert config.cv_fraction == 0.10
    assert config.scale_lr is True
    assert config.metrics_path == "metrics.csv"
    assert config.checkpoint_path == "model.bin"


def test_flag_overrides_file(tmp_path):
    path = _write(tmp_path, "synthetic = true\nworkers = 16\n")
    assert parse_config(path).workers == 16
    assert parse_config(path, ["--workers", "8"]).workers == 8
    assert parse_config(path, ["--workers=4"]).workers == 4


def test_mapping_overrides(tmp_path):
    path = _write(tmp_path, "synthetic = true\n")
    config = parse_config(path, {"avg-frequency": "20", "optimizer": OptimizerKind.SGD})
    assert config.avg_frequency == 20
    assert config.optimizer is OptimizerKind.SGD


@given(file_workers=st.integers(1, 64), flag_workers=st.one_of(st.none(), st.integers(1, 64)))
@settings(max_examples=30)
def test_precedence_property(file_workers, flag_workers):
    overrides = {"synthetic": "true", "workers": str(file_workers)}
    flags = [] if flag_workers is None else ["--workers", str(flag_workers)]
    config = parse_config(None, [*_as_flags(overrides), *flags])
    assert config.workers == (file_workers if flag_workers is None else flag_workers)


def test_file_parsing_details(tmp_path):
    path = _write(
        tmp_path,
        "# experiment\n"
        "data_csv = data/train.csv   # inline comment\n"
        "hidden-layers = 3\n"
        "activation = TANH\n"
        "scale_lr = no\n"
        "pretrain_checkpoint_path = none\n",
    )
    settings = read_config_file(path)
    assert settings == {
        "data_csv": "data/train.csv",
        "hidden_layers": 3,
        "activation": Activation.TANH,
        "scale_lr": False,
        "pretrain_checkpoint_path": None,
    }


def test_describe_parses_back(tmp_path):
    config = RunConfig(synthetic=True, workers=8, lr_init=0.05, activation="tanh", init_checkpoint_path="m.bin")
    path = _write(tmp_path, config.describe())
    assert parse_config(path) == config


def test_replace_parses_strings():
    config = RunConfig(synthetic=True)
    assert config.replace("avg_frequency", "20").avg_frequency == 20
    assert config.replace("optimizer", "sgd").optimizer is OptimizerKind.SGD
    assert config.replace("workers", 4).workers == 4
    assert config.workers == 1


def test_layer_dims():
    assert RunConfig(synthetic=True, hidden_layers=2, hidden_dim=16).layer_dims(64, 10) == (64, 16, 16, 10)
    assert RunConfig(synthetic=True, hidden_layers=0).layer_dims(5, 3) == (5, 3)


# -- errors ---------------------------------------------------------------------

class TestConfigErrors:
    def test_type_error_names_key_and_line(self, tmp_path):
        path = _write(tmp_path, "synthetic = true\navg_frequency = ten\n")
        with pytest.raises(ConfigError) as info:
            parse_config(path)
        assert info.value.key == "avg_frequency"
        assert info.value.line == 2
        assert "'avg_frequency'" in str(info.value)

    def test_unknown_key_in_file(self, tmp_path):
        path = _write(tmp_path, "synthetic = true\nlearning_rate = 0.1\n")
        with pytest.raises(ConfigError) as info:
            parse_config(path)
        assert (info.value.key, info.value.line) == ("learning_rate", 2)

    def test_unknown_flag(self):
        with pytest.raises(ConfigError) as info:
            parse_config(None, ["--synthetic", "--bogus", "1"])
        assert info.value.key == "bogus"

    def test_missing_data_source(self, tmp_path):
        with pytest.raises(ConfigError) as info:
            parse_config(_write(tmp_path, ""))
        assert info.value.key == "data_csv"

    def test_two_data_sources(self):
        with pytest.raises(ConfigError) as info:
            RunConfig(synthetic=True, data_csv="x.csv")
        assert info.value.key == "data_csv"

    def test_line_without_equals(self, tmp_path):
        with pytest.raises(ConfigError) as info:
            parse_config(_write(tmp_path, "synthetic true\n"))
        assert info.value.line == 1

    def test_duplicate_key(self, tmp_path):
        with pytest.raises(ConfigError) as info:
            parse_config(_write(tmp_path, "synthetic = true\nepochs = 1\nepochs = 2\n"))
        assert (info.value.key, info.value.line) == ("epochs", 3)

    def test_bad_enum(self):
        with pytest.raises(ConfigError, match="sgd, ngsgd"):
            parse_config(None, ["--synthetic", "--optimizer", "adam"])

    def test_bad_bool(self):
        with pytest.raises(ConfigError) as info:
            parse_config(None, ["--synthetic", "maybe"])
        assert info.value.key == "synthetic"

    def test_flag_without_value(self):
        with pytest.raises(ConfigError) as info:
            parse_flags(["--workers"])
        assert info.value.key == "workers"

    @pytest.mark.parametrize(
        "key, value",
        [
            ("workers", 0),
            ("minibatch", 0),
            ("epochs", -1),
            ("avg_frequency", -2),
            ("lr_init", 0.0),
            ("cv_fraction", 1.0),
            ("ng_decay", 1.5),
            ("synthetic_separation", -1.0),
            ("metrics_path", ""),
        ],
    )
    def test_out_of_range_values(self, key, value):
        with pytest.raises(ConfigError) as info:
            RunConfig(synthetic=True).replace(key, value)
        assert info.value.key == key
