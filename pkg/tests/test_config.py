import pytest
from pydantic import ValidationError

from glove.config import (
    RunConfig,
    config_hash,
    dump_config,
    get_settings,
    load_run_config,
    parse_config_text,
)


def test_settings_read_environment(tmp_path):
    settings = get_settings()
    assert settings.run_root == tmp_path / "runs"
    assert settings.run_root.is_dir()
    assert settings.log_level == "WARNING"


def test_config_file_and_overrides(tmp_path):
    path = tmp_path / "run.txt"
    path.write_text(
        "# window settings\nwindow.size = 50\nmfcc.n_mels = 20\ntrain.schedule.T0 = 5\n",
        encoding="utf-8",
    )
    cfg = load_run_config(path, overrides=["window.size=75"], extra={"seed": 11, "knn.k": None})
    assert cfg.window.size == 75
    assert cfg.mfcc.n_mels == 20
    assert cfg.train.schedule is not None and cfg.train.schedule.T0 == 5
    assert cfg.seed == 11
    assert cfg.knn.k == 5


def test_unknown_keys_rejected():
    with pytest.raises(ValidationError):
        load_run_config(overrides=["window.sizee=50"])
    with pytest.raises(ValidationError):
        load_run_config(overrides=["bogus.key=1"])


def test_invariants_enforced():
    with pytest.raises(ValidationError):
        load_run_config(overrides=["mfcc.n_fft=16"])
    with pytest.raises(ValidationError):
        load_run_config(overrides=["mfcc.f_max=60"])
    with pytest.raises(ValidationError):
        load_run_config(overrides=["augment.noise_p=1.5"])
    with pytest.raises(ValidationError):
        load_run_config(overrides=["split.train_frac=0.8"])
    with pytest.raises(ValidationError):
        load_run_config(overrides=["train.early_stop_patience=500"])


def test_malformed_line_is_value_error():
    with pytest.raises(ValueError):
        parse_config_text("window.size 50\n")


def test_echo_feeds_back_to_same_config(tmp_path):
    cfg = load_run_config(overrides=["window.size=100", "ablation.windows=50,100", "seed=3"])
    echo = tmp_path / "config.txt"
    echo.write_text(dump_config(cfg), encoding="utf-8")
    again = load_run_config(echo)
    assert again == cfg
    assert dump_config(again) == dump_config(cfg)
    assert again.simplenn.schedule is None


def test_config_hash_tracks_only_named_sections():
    base = RunConfig()
    changed = load_run_config(overrides=["mfcc.n_mels=20"])
    assert config_hash(base, ("seed", "window")) == config_hash(changed, ("seed", "window"))
    assert config_hash(base, ("mfcc",)) != config_hash(changed, ("mfcc",))


def test_simplenn_defaults():
    cfg = RunConfig()
    assert cfg.simplenn.max_epochs == 200
    assert cfg.simplenn.early_stop_patience == 20
    assert cfg.simplenn.optimizer_kind == "adam"
    assert cfg.simplenn.loss_kind == "cross_entropy"
    assert cfg.train.optimizer.weight_decay == pytest.approx(1e-4)
