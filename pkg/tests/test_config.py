import pytest

from convfilter.config import ConfigError, RunConfig, dump_config, load_config, parse_config, parse_taus
from convfilter.synth import PROFILES


def test_defaults_when_empty():
    assert parse_config("") == RunConfig()
    assert load_config(None) == RunConfig()


def test_values_are_typed():
    cfg = parse_config("[train]\nlearning_rate = 0.01\nmax_epochs = 3\nno_hierarchy = yes\n"
                       "[features]\ntext_dim = 16\n[paths]\nfigures = off\n")
    assert cfg.train.learning_rate == 0.01 and cfg.train.max_epochs == 3 and cfg.train.no_hierarchy
    assert cfg.features.text_dim == 16 and cfg.paths.figures is False


def test_unknown_key_and_section():
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config("[train]\nlearning_rat = 0.1\n")
    with pytest.raises(ConfigError, match="unknown section"):
        parse_config("[model]\nx = 1\n")


def test_bad_values():
    with pytest.raises(ConfigError):
        parse_config("[train]\nmax_epochs = many\n")
    with pytest.raises(ConfigError):
        parse_config("[train]\nbatch_size = 0\n")
    with pytest.raises(ConfigError):
        parse_config("[paths]\nfigures = maybe\n")


def test_profile_base():
    cfg = parse_config("[profile]\nbase = clean\nmean_len = 30\n")
    assert cfg.profile.decoy_fraction == PROFILES["clean"].decoy_fraction
    assert cfg.profile.mean_len == 30.0
    with pytest.raises(ConfigError):
        parse_config("[profile]\nbase = nowhere\n")


def test_flag_beats_file_beats_default():
    cfg = parse_config("[train]\nseed = 4\nhidden_dim = 8\n")
    cfg = cfg.override("train", seed=9, hidden_dim=None)
    assert cfg.train.seed == 9 and cfg.train.hidden_dim == 8 and cfg.train.patience == 5
    with pytest.raises(ConfigError):
        cfg.override("train", batch_size=0)


def test_dump_round_trip():
    cfg = parse_config("[train]\nseed = 4\n[filter]\nmode = mr\ntau = 0.3\n")
    assert parse_config(dump_config(cfg)) == cfg


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "none.ini")


def test_taus():
    assert parse_taus("0:1:0.25") == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert len(parse_taus("0:1:0.05")) == 21
    assert parse_taus("0.1, 0.9") == [0.1, 0.9]
    for bad in ("0:1:0", "0:2:1", "", "a,b"):
        with pytest.raises(ConfigError):
            parse_taus(bad)
