"""Acceptance criteria, one test per criterion; a PASS/FAIL line each is printed in the summary."""

import hashlib
import math
import shutil
import time
from pathlib import Path

import numpy as np
import pytest
import scipy.linalg
from scipy.special import expit, logit

from headmotion import dataset
from headmotion.acoustic import (
    FeatureSequence,
    Waveform,
    featurize,
    fit_normalizer,
    mel_center_frequencies,
    mel_spectrogram,
)
from headmotion.cli import main
from headmotion.diversity import NnHistogram, diversity_score, entropy_upper_bound, fit_nn_index, shannon_index
from headmotion.metrics import dtw, frechet_discrete, frechet_gaussian, gaussian_frechet, mae
from headmotion.motion import PoseSequence, mirror, read_pose_csv
from headmotion.perceptual import bootstrap_ci, logistic_regression
from headmotion.seqmodel import ModelConfig, forward_array, generate_k_samples
from headmotion.trainer import Example, TrainConfig, gradient_check, train
from oracles import dtw_bruteforce, entropy_bits, frechet_bruteforce

from test_cli import rows


@pytest.mark.criterion("Gradient oracle")
def test_gradient_oracle(criterion):
    start = time.perf_counter()
    errs = {}
    for stochastic in (False, True):
        mc = ModelConfig(num_layers=2, hidden_size=8, stochastic=stochastic)
        errs["stochastic" if stochastic else "deterministic"] = gradient_check(mc, seed=0, T=10, h=1e-5)
    elapsed = time.perf_counter() - start
    criterion(", ".join(f"{k} {v:.3g}" for k, v in errs.items()) + f", {elapsed:.1f}s")
    assert elapsed < 60
    for name, err in errs.items():
        assert err < 1e-4, f"{name}: max relative error {err:.3g}"


def _synthetic_examples(n, seconds, seed):
    rng = np.random.default_rng(seed)
    clips = [dataset.synthesize_video(rng, seconds) for _ in range(n)]
    specs = [mel_spectrogram(w) for w, _ in clips]
    norm = fit_normalizer(specs)
    return [Example(featurize(s, norm).frames, p - p.mean(axis=0)) for s, (_, p) in zip(specs, clips)]


@pytest.mark.criterion("Overfit check")
def test_overfit(criterion):
    data = _synthetic_examples(4, 2.0, seed=0)
    assert all(ex.features.shape == (50, 128) for ex in data)
    start = time.perf_counter()
    _, hist = train(TrainConfig(learning_rate=0.001, epochs=500, seed=0), ModelConfig(), data)
    elapsed = time.perf_counter() - start
    best = min(hist.train_loss)
    criterion(f"min train L1 {best:.4f} at epoch {int(np.argmin(hist.train_loss))}, {elapsed:.0f}s")
    assert best < 0.01
    assert elapsed < 300


@pytest.mark.criterion("DTW and discrete-Frechet oracles")
def test_alignment_oracles(criterion):
    rng = np.random.default_rng(0)
    mismatches = 0
    for _ in range(100):
        a = rng.uniform(-1, 1, (int(rng.integers(1, 7)), 3))
        b = rng.uniform(-1, 1, (int(rng.integers(1, 7)), 3))
        mismatches += dtw(a, b) != dtw_bruteforce(a, b)
        mismatches += frechet_discrete(a, b) != frechet_bruteforce(a, b)
    criterion(f"{mismatches} mismatches over 100 pairs")
    assert mismatches == 0


@pytest.mark.criterion("Gaussian Frechet")
def test_gaussian_frechet(criterion):
    rng = np.random.default_rng(0)
    worst_identity = max(frechet_gaussian(s, s) for s in (rng.standard_normal((250, 3)) for _ in range(20)))
    worst = 0.0
    for _ in range(100):
        A, B = rng.standard_normal((3, 3)), rng.standard_normal((3, 3))
        ca, cb = A @ A.T + 0.05 * np.eye(3), B @ B.T + 0.05 * np.eye(3)
        mu_a, mu_b = rng.standard_normal(3), rng.standard_normal(3)
        ref = float(np.sum((mu_a - mu_b) ** 2) + np.trace(ca + cb - 2 * scipy.linalg.sqrtm(ca @ cb).real))
        worst = max(worst, abs(gaussian_frechet(mu_a, ca, mu_b, cb) - ref))
    criterion(f"identity {worst_identity:.2g}, closed form {worst:.2g}")
    assert worst_identity < 1e-10
    assert worst < 1e-8


@pytest.mark.criterion("Mirror-MAE identity")
def test_mirror_mae(criterion):
    rng = np.random.default_rng(0)
    worst = 0.0
    for i in range(100):
        s = PoseSequence(rng.uniform(-1.5, 1.5, (int(rng.integers(1, 300)), 3)))
        axis = i % 3
        m = mirror(s, axis)
        assert mirror(m, axis) == s
        worst = max(worst, abs(mae(m, s) - 2.0 / 3.0 * np.mean(np.abs(s.frames[:, axis]))))
    criterion(f"max deviation {worst:.2g}")
    assert worst < 1e-12


def _diversity_pair(seed, tmp):
    """Train deterministic and noise-conditioned models identically; score test predictions."""
    videos = dataset.generate_synthetic_corpus(12, seed, tmp / f"corpus{seed}", 30, 40)
    m = dataset.build_manifest(videos, tmp / f"data{seed}", seed=seed)
    cache = {}
    specs = {u["utterance_id"]: mel_spectrogram(dataset.utterance_audio(m, u, cache)) for u in m.utterances}
    norm = fit_normalizer([specs[u["utterance_id"]] for u in m.utterances_in("train")])
    root = tmp / f"data{seed}"

    def examples(split):
        return [Example(featurize(specs[u["utterance_id"]], norm).frames,
                        read_pose_csv(root / u["pose"]).frames) for u in m.utterances_in(split)]

    tr, va, te = examples("train"), examples("val"), examples("test")
    cfg = TrainConfig(epochs=3, seed=seed)
    det, _ = train(cfg, ModelConfig(num_layers=1, hidden_size=16), tr, va)
    sto, _ = train(cfg, ModelConfig(num_layers=1, hidden_size=16, stochastic=True), tr, va)
    index = fit_nn_index([PoseSequence(ex.poses) for ex in tr])
    det_preds = [PoseSequence(forward_array(det, ex.features)) for ex in te]
    sto_preds = [s for i, ex in enumerate(te) for s in generate_k_samples(sto, FeatureSequence(ex.features), 10, seed + i)]
    return diversity_score(index, det_preds), diversity_score(index, sto_preds)


@pytest.mark.criterion("Shannon/diversity")
def test_shannon_diversity(criterion, tmp_path):
    rng = np.random.default_rng(0)
    for _ in range(1000):
        counts = rng.integers(0, 20, size=int(rng.integers(1, 40)))
        if counts.sum() == 0:
            counts[0] = 1
        h = NnHistogram(counts)
        H = shannon_index(h)
        assert 0.0 <= H <= entropy_upper_bound(h) + 1e-12
        assert H == pytest.approx(entropy_bits(counts.tolist()), abs=1e-12)
    for m_bins in (1, 2, 7, 64):
        train_set = [np.full((5, 3), v) for v in np.linspace(-0.5, 0.5, m_bins)]
        index = fit_nn_index(train_set)
        assert diversity_score(index, train_set * 3) == pytest.approx(math.log2(m_bins), abs=1e-12)
        assert diversity_score(index, [train_set[0]] * 4) == 0.0

    results = [_diversity_pair(seed, tmp_path) for seed in (0, 1, 2)]
    criterion("det vs stoch bits: " + ", ".join(f"{d:.2f}<{s:.2f}" for d, s in results))
    for d, s in results:
        assert s > d


def _simulate_clusters(rng, n_clusters=200, per=15, b0=0.5, b1=1.0):
    x = np.tile(np.arange(per) % 2, n_clusters).astype(float)
    y = rng.random(x.size) < expit(b0 + b1 * x)
    clusters = np.repeat(np.arange(n_clusters), per)
    return y.astype(int), np.column_stack([np.ones_like(x), x]), clusters


@pytest.mark.criterion("Statistics")
def test_statistics(criterion):
    rng = np.random.default_rng(0)
    covered = np.zeros(2, dtype=int)
    for rep in range(100):
        y, X, cl = _simulate_clusters(rng)
        res = logistic_regression(y, X, cl, names=["b0", "b1"], replicates=1000, seed=rep)
        for j, truth in enumerate((0.5, 1.0)):
            c = res.contrasts[j]
            covered[j] += c.ci_low <= truth <= c.ci_high

    y = rng.binomial(1, 0.62, 3000)
    fit = logistic_regression(y, np.ones((y.size, 1)), np.arange(y.size) % 200, replicates=200)
    intercept_err = abs(fit.contrasts[0].estimate - logit(y.mean()))

    v = np.random.default_rng(1).standard_normal(107)
    lo, hi = bootstrap_ci(v, replicates=10_000, seed=0)
    width, normal = hi - lo, 2 * 1.96 / math.sqrt(107)
    criterion(f"coverage b0 {covered[0]}/100, b1 {covered[1]}/100; intercept error {intercept_err:.1g}; "
              f"CI width {width:.3f} vs {normal:.3f}")
    assert covered.min() >= 90
    assert intercept_err < 1e-12
    assert abs(width / normal - 1) <= 0.2


def _tree_hash(root: Path) -> dict:
    return {str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*")) if p.is_file()}


PIPELINE_ARGV = ["--videos", "16", "--seed", "0", "--k", "10", "--epochs", "3", "--layers", "1",
                 "--hidden", "16", "--replicates", "10000"]


@pytest.mark.slow
@pytest.mark.criterion("Pipeline shape reproduction")
def test_pipeline(criterion, tmp_path):
    out = tmp_path / "run"
    start = time.perf_counter()
    assert main(["pipeline", "--out", str(out), *PIPELINE_ARGV]) == 0
    elapsed = time.perf_counter() - start
    first = _tree_hash(out)
    shutil.rmtree(out)
    assert main(["pipeline", "--out", str(out), *PIPELINE_ARGV]) == 0
    second = _tree_hash(out)
    differing = sorted(k for k in set(first) | set(second) if first.get(k) != second.get(k))

    report = out / "report"
    header = rows(report / "figure1.csv")[0]
    per_axis = {a: [c for c in header if c.endswith("_" + a) and c != "time"] for a in "xyz"}
    fig2 = rows(report / "figure2.csv")
    means = [float(r[1]) for r in fig2[1:] if r[0] != "det"]
    t1 = rows(report / "table1.csv")
    criterion(f"{len(first)} files, {len(differing)} differ; first run {elapsed:.0f}s")

    for a, cols in per_axis.items():
        assert cols == [f"gt_{a}"] + [f"sample_{i}_{a}" for i in range(10)]
    assert [r[0] for r in fig2[1:]] == ["det"] + [str(g) for g in range(10)]
    assert all(b >= a for a, b in zip(means, means[1:]))
    assert t1[0] == ["contrast", "estimate", "std_error", "z", "p"] and len(t1) == 11
    assert not differing, differing[:5]
    assert elapsed < 15 * 60


@pytest.mark.criterion("Feature front-end")
def test_feature_front_end(criterion):
    sr = 16000
    t = np.arange(10 * sr) / sr
    speech_like = Waveform(0.3 * np.random.default_rng(0).standard_normal(t.size))
    spec = mel_spectrogram(speech_like)
    feats = featurize(spec, fit_normalizer([spec]))
    tone_spec = mel_spectrogram(Waveform(0.5 * np.sin(2 * np.pi * 1000 * t)))
    band = int(np.argmin(np.abs(mel_center_frequencies() - 1000.0)))
    peaks = np.argmax(tone_spec.frames, axis=1)
    const = mel_spectrogram(Waveform(np.full(t.size, 0.2)))
    const_feats = featurize(const, fit_normalizer([const]))
    criterion(f"shape {feats.frames.shape}, tone peak band {np.bincount(peaks).argmax()} (expected {band})")
    assert feats.frames.shape == (250, 128)
    assert np.all(peaks == band)
    assert const_feats.frames.shape == (250, 128) and np.all(const_feats.frames == 0)
