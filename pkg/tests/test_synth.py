import numpy as np

from glove.baselines import knn_cross_validate
from glove.config import KnnConfig, SynthConfig
from glove.data import load_corpus
from glove.labels import ClassLabel, SYMBOLS
from glove.preprocess import segment_all
from glove.synth import (
    PATTERNS,
    biphasic_pulse,
    directory_name,
    generate_corpus,
    sign_templates,
    synth_config,
    synth_recording,
    write_corpus,
)


def test_patterns_are_distinct():
    assert set(PATTERNS) == set(SYMBOLS)
    assert len(set(PATTERNS.values())) == len(SYMBOLS)
    periods = [t.period_s for t in sign_templates()]
    assert len(set(periods)) == len(periods)


def test_noiseless_digit_one_pulses_only_the_index_finger():
    template = sign_templates()[ClassLabel("1").index]
    cfg = synth_config(noise_sigma=0.0)
    rec = synth_recording(template, cfg, seed=5, index=0)
    assert cfg.min_length <= rec.n_frames <= cfg.max_length
    others = np.delete(rec.samples, 1, axis=1)
    assert np.all(others == 0.0)
    index = rec.samples[:, 1]
    assert index.max() > 0.5
    assert index.min() < 0.0
    assert np.abs(index).max() <= cfg.amplitude_bound


def test_biphasic_pulse_shape():
    t = np.arange(40, dtype=float)
    pulse = biphasic_pulse(t, center=10.0, amplitude=2.0, width=2.0, undershoot=0.5)
    assert pulse[10] == np.max(pulse)
    assert pulse[10] < 2.0 + 1e-12
    assert pulse.min() < 0 and pulse.argmin() > 10


def test_corpus_is_deterministic_per_seed():
    cfg = synth_config(recordings_per_class=3, min_length=60, max_length=90)
    first = generate_corpus(cfg, seed=9)
    second = generate_corpus(cfg, seed=9)
    other = generate_corpus(cfg, seed=10)
    assert len(first) == 33
    assert [r.id for r in first] == [r.id for r in second]
    assert all(np.array_equal(a.samples, b.samples) for a, b in zip(first, second))
    assert not all(np.array_equal(a.samples, b.samples) for a, b in zip(first, other))


def test_recordings_do_not_depend_on_corpus_size():
    small = generate_corpus(synth_config(recordings_per_class=3), seed=2)
    large = generate_corpus(synth_config(recordings_per_class=5), seed=2)
    by_id = {r.id: r for r in large}
    for rec in small:
        assert np.array_equal(rec.samples, by_id[rec.id].samples)


def test_written_corpus_loads_back(tmp_path):
    cfg = synth_config("calibrated", recordings_per_class=3, min_length=50, max_length=80)
    recordings = generate_corpus(cfg, seed=4)
    manifest = write_corpus(recordings, tmp_path / "corpus")
    assert manifest.name == "manifest.csv"
    assert (tmp_path / "corpus" / directory_name(ClassLabel("A"))).is_dir()
    loaded, summary = load_corpus(tmp_path / "corpus")
    assert summary.recordings == 33
    assert summary.dropped == []
    original = {r.id: r for r in recordings}
    for rec in loaded:
        assert rec.label == original[rec.id].label
        assert np.array_equal(rec.samples, original[rec.id].samples)


def test_default_corpus_is_separable_for_nearest_neighbour():
    windows = segment_all(generate_corpus(SynthConfig(), seed=7), 50)
    cv = knn_cross_validate(windows, cfg=KnnConfig(k=1), seed=0)
    assert cv.mean_accuracy >= 0.95


def test_lengths_cover_the_configured_range():
    cfg = SynthConfig()
    lengths = np.array([rec.n_frames for rec in generate_corpus(cfg, seed=7)])
    assert lengths.min() >= cfg.min_length
    assert lengths.max() <= cfg.max_length
    assert lengths.min() < cfg.min_length + 30
    assert lengths.max() > cfg.max_length - 30
    # roughly uniform: each third of the range gets a fair share
    thirds = np.histogram(lengths, bins=3, range=(cfg.min_length, cfg.max_length + 1))[0]
    assert thirds.min() > len(lengths) / 6


def test_samples_stay_within_amplitude_bound_plus_noise():
    for preset in ("default", "calibrated"):
        cfg = synth_config(preset, recordings_per_class=5)
        limit = cfg.amplitude_bound + 6.0 * cfg.noise_sigma
        for rec in generate_corpus(cfg, seed=11):
            assert np.abs(rec.samples).max() <= limit
