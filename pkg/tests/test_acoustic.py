import numpy as np
import pytest

from headmotion import acoustic
from headmotion.acoustic import (
    FeatureNormalizer,
    FeatureSequence,
    MelSpectrogram,
    Waveform,
    featurize,
    fit_normalizer,
    mel_center_frequencies,
    mel_spectrogram,
)

SR = 16000


def tone(freq, seconds=1.0, amp=0.5):
    t = np.arange(int(SR * seconds)) / SR
    return Waveform(amp * np.sin(2 * np.pi * freq * t))


def test_ten_seconds_gives_250_frames(rng):
    spec = mel_spectrogram(Waveform(rng.standard_normal(10 * SR) * 0.1))
    assert spec.frames.shape == (250, 64)
    assert np.all(spec.frames >= 0)


def test_partial_trailing_window_dropped():
    assert len(mel_spectrogram(Waveform(np.zeros(640 * 3 + 639)))) == 3


def test_silence_is_zero():
    assert np.all(mel_spectrogram(Waveform(np.zeros(SR))).frames == 0.0)


@pytest.mark.parametrize("freq", [1000.0, 440.0, 2500.0, 5000.0])
def test_tone_peaks_in_nearest_band(freq):
    centers = mel_center_frequencies()
    expected = int(np.argmin(np.abs(centers - freq)))
    spec = mel_spectrogram(tone(freq))
    assert np.all(np.argmax(spec.frames, axis=1) == expected)


def test_filterbank_centres_span_band():
    c = mel_center_frequencies()
    assert c.shape == (64,) and 0 < c[0] < c[-1] < 8000
    assert np.all(np.diff(acoustic.hz_to_mel(c)) > 0)
    fb = acoustic.mel_filterbank()
    assert fb.shape == (64, 513) and fb.min() >= 0 and fb.max() <= 1


def test_wrong_rate_and_short_audio():
    with pytest.raises(ValueError, match="16000"):
        mel_spectrogram(Waveform(np.zeros(SR), sample_rate=8000))
    with pytest.raises(ValueError, match="window"):
        mel_spectrogram(Waveform(np.zeros(639)))


def test_deterministic(rng):
    w = Waveform(rng.standard_normal(SR))
    assert np.array_equal(mel_spectrogram(w).frames, mel_spectrogram(w).frames)


def test_normalizer_constant_and_symmetric():
    c = np.arange(64, dtype=float)
    n = fit_normalizer([MelSpectrogram(np.tile(c, (10, 1)))])
    np.testing.assert_array_equal(n.mean, c)
    np.testing.assert_array_equal(n.std, 1e-8)
    n = fit_normalizer([MelSpectrogram(np.array([[-1.0] * 64, [1.0] * 64]))])
    np.testing.assert_allclose(n.mean, 0, atol=0)
    np.testing.assert_allclose(n.std, 1, atol=0)


def test_normalizer_recovers_known_moments():
    rng = np.random.default_rng(5)
    mu = rng.uniform(-3, 3, 64)
    sigma = rng.uniform(0.5, 2, 64)
    z = rng.standard_normal((4000, 64))
    z = (z - z.mean(0)) / z.std(0)  # exact sample moments
    frames = mu + sigma * z
    n = fit_normalizer([MelSpectrogram(frames[:1000]), MelSpectrogram(frames[1000:])])
    np.testing.assert_allclose(n.mean, mu, atol=1e-6)
    np.testing.assert_allclose(n.std, sigma, atol=1e-6)


def test_normalizer_empty():
    with pytest.raises(ValueError):
        fit_normalizer([])


def test_featurize_ramp():
    n = FeatureNormalizer(np.zeros(64), np.ones(64))
    spec = MelSpectrogram(np.tile(np.arange(4.0)[:, None], (1, 64)))
    f = featurize(spec, n)
    assert f.frames.shape == (4, 128)
    np.testing.assert_array_equal(f.frames[:, 0], [0, 1, 1, 1])
    np.testing.assert_array_equal(f.frames[:, 64], [0, 1, 0, 0])


def test_featurize_constant_is_zero(rng):
    n = FeatureNormalizer(rng.standard_normal(64), rng.uniform(0.5, 1, 64))
    f = featurize(MelSpectrogram(np.tile(rng.standard_normal(64), (9, 1))), n)
    assert np.all(f.frames == 0)


def test_featurize_static_mode():
    n = FeatureNormalizer(np.zeros(64), np.full(64, 2.0))
    f = featurize(MelSpectrogram(np.tile(np.arange(3.0)[:, None], (1, 64))), n, mode="static")
    np.testing.assert_array_equal(f.frames[:, 0], [0, 0.5, 1.0])
    np.testing.assert_array_equal(f.frames[:, 64], [0, 0.5, 0.5])


def test_featurize_width_mismatch():
    with pytest.raises(ValueError, match="bins"):
        featurize(MelSpectrogram(np.zeros((3, 32))), FeatureNormalizer(np.zeros(64), np.ones(64)))


def test_translation_invariance_with_refit(rng):
    specs = [MelSpectrogram(rng.uniform(0, 3, (20, 64))) for _ in range(3)]
    shift = rng.uniform(-1, 1, 64)
    shifted = [MelSpectrogram(s.frames + shift) for s in specs]
    a = featurize(specs[0], fit_normalizer(specs))
    b = featurize(shifted[0], fit_normalizer(shifted))
    np.testing.assert_allclose(a.frames, b.frames, atol=1e-9)


def test_constant_audio_gives_zero_features():
    w = Waveform(np.full(10 * SR, 0.25))
    spec = mel_spectrogram(w)
    f = featurize(spec, fit_normalizer([spec]))
    assert f.frames.shape == (250, 128)
    assert np.all(f.frames == 0)


def test_feature_file_roundtrip(tmp_path, rng):
    f = FeatureSequence(rng.standard_normal((5, 128)).astype(np.float32))
    acoustic.write_features(tmp_path / "a.hmf", f)
    raw = (tmp_path / "a.hmf").read_bytes()
    assert raw[:4] == b"HMF1" and len(raw) == 12 + 5 * 128 * 4
    assert int.from_bytes(raw[4:8], "little") == 5 and int.from_bytes(raw[8:12], "little") == 128
    np.testing.assert_array_equal(acoustic.read_features(tmp_path / "a.hmf").frames, f.frames)
    with pytest.raises(ValueError, match="magic"):
        (tmp_path / "b.hmf").write_bytes(b"XXXX" + raw[4:])
        acoustic.read_features(tmp_path / "b.hmf")
    acoustic.write_features_csv(tmp_path / "a.csv", f)
    assert (tmp_path / "a.csv").read_text().startswith("f0,f1,")


def test_normalizer_json_roundtrip(tmp_path, rng):
    n = FeatureNormalizer(rng.standard_normal(64), rng.uniform(0.1, 1, 64))
    n.save(tmp_path / "n.json")
    m = FeatureNormalizer.load(tmp_path / "n.json")
    np.testing.assert_array_equal(m.mean, n.mean)
    np.testing.assert_array_equal(m.std, n.std)


def test_wav_roundtrip(tmp_path, rng):
    w = Waveform(rng.uniform(-0.5, 0.5, 1000))
    acoustic.write_wav(tmp_path / "a.wav", w)
    back = acoustic.read_wav(tmp_path / "a.wav")
    assert back.sample_rate == SR
    np.testing.assert_allclose(back.samples, w.samples, atol=1 / 32768 * 1.01)
