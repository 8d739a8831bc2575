"""Log-mel front end and the 128-wide temporal-difference features.

Frames are 40 ms long with a 40 ms hop, so feature frame ``t`` covers the
same interval as pose frame ``t`` at 25 fps.
"""

from __future__ import annotations

import json
import struct
import wave
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.signal import get_window

SAMPLE_RATE = 16000
WIN_LENGTH = 640  # 40 ms at 16 kHz
HOP_LENGTH = 640
N_FFT = 1024
N_MELS = 64
FMIN = 0.0
FMAX = 8000.0
STD_FLOOR = 1e-8
FEATURE_DIM = 2 * N_MELS

FEATURE_MAGIC = b"HMF1"


@dataclass(frozen=True, eq=False)
class Waveform:
    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim != 1 or s.size == 0:
            raise ValueError("waveform must be a nonempty mono signal")
        if not np.all(np.isfinite(s)):
            raise ValueError("waveform samples must be finite")
        object.__setattr__(self, "samples", s)

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True, eq=False)
class MelSpectrogram:
    """(T, 64) log(1 + mel magnitude) frames at 25 frames per second."""

    frames: np.ndarray
    frame_rate: int = 25

    def __len__(self):
        return self.frames.shape[0]


@dataclass(frozen=True)
class FeatureNormalizer:
    mean: np.ndarray
    std: np.ndarray

    def to_json(self) -> str:
        return json.dumps({"mean": self.mean.tolist(), "std": self.std.tolist()}, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "FeatureNormalizer":
        doc = json.loads(text)
        mean = np.asarray(doc["mean"], dtype=np.float64)
        std = np.asarray(doc["std"], dtype=np.float64)
        if mean.shape != std.shape or mean.ndim != 1:
            raise ValueError("normalizer mean/std must be equal-length vectors")
        if np.any(std <= 0):
            raise ValueError("normalizer std must be positive")
        return cls(mean, std)

    def save(self, path):
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "FeatureNormalizer":
        return cls.from_json(Path(path).read_text())


@dataclass(frozen=True, eq=False)
class FeatureSequence:
    """(T, 128) model input frames."""

    frames: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.frames, dtype=np.float64)
        if f.ndim != 2 or f.shape[0] < 1:
            raise ValueError(f"features must be a nonempty (T, D) array, got {f.shape}")
        if not np.all(np.isfinite(f)):
            raise ValueError("features must be finite")
        object.__setattr__(self, "frames", f)

    def __len__(self):
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]


# --- mel filterbank ---

def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_center_frequencies(n_mels: int = N_MELS, fmin: float = FMIN, fmax: float = FMAX) -> np.ndarray:
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    return edges[1:-1]


def mel_filterbank(n_mels: int = N_MELS, n_fft: int = N_FFT, sr: int = SAMPLE_RATE,
                   fmin: float = FMIN, fmax: float = FMAX) -> np.ndarray:
    """Triangular HTK-mel filters, shape (n_mels, n_fft // 2 + 1), unit peak."""
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    freqs = np.fft.rfftfreq(n_fft, d=1.0 / sr)
    lower, center, upper = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs[None, :] - lower) / (center - lower)
    falling = (upper - freqs[None, :]) / (upper - center)
    return np.maximum(0.0, np.minimum(rising, falling))


_FILTERBANK = mel_filterbank()
_WINDOW = get_window("hann", WIN_LENGTH, fftbins=True)


def mel_spectrogram(w: Waveform) -> MelSpectrogram:
    if w.sample_rate != SAMPLE_RATE:
        raise ValueError(f"expected {SAMPLE_RATE} Hz audio, got {w.sample_rate} Hz")
    n_frames = (w.samples.size - WIN_LENGTH) // HOP_LENGTH + 1 if w.samples.size >= WIN_LENGTH else 0
    if n_frames < 1:
        raise ValueError("audio shorter than one 40 ms analysis window")
    frames = w.samples[: n_frames * HOP_LENGTH].reshape(n_frames, WIN_LENGTH)
    spectrum = np.abs(np.fft.rfft(frames * _WINDOW, n=N_FFT, axis=1))
    energies = spectrum @ _FILTERBANK.T
    return MelSpectrogram(np.log1p(energies))


def fit_normalizer(spectrograms: Sequence[MelSpectrogram]) -> FeatureNormalizer:
    if not spectrograms:
        raise ValueError("cannot fit a normalizer on an empty corpus")
    total = None
    count = 0
    for s in spectrograms:
        part = s.frames.sum(axis=0)
        total = part if total is None else total + part
        count += len(s)
    mean = total / count
    sq = None
    for s in spectrograms:
        part = ((s.frames - mean) ** 2).sum(axis=0)
        sq = part if sq is None else sq + part
    std = np.maximum(np.sqrt(sq / count), STD_FLOOR)
    return FeatureNormalizer(mean, std)


def _diff0(a: np.ndarray) -> np.ndarray:
    d = np.zeros_like(a)
    d[1:] = a[1:] - a[:-1]
    return d


def featurize(s: MelSpectrogram, n: FeatureNormalizer, mode: str = "delta") -> FeatureSequence:
    """Z-score each mel bin, then stack temporal differences.

    ``mode="delta"`` gives ``[delta, delta-delta]``; ``mode="static"`` gives
    ``[z, delta]``. Both are 128 wide for 64 bins.
    """
    if s.frames.shape[1] != n.mean.shape[0]:
        raise ValueError(f"spectrogram has {s.frames.shape[1]} bins, normalizer has {n.mean.shape[0]}")
    z = (s.frames - n.mean) / n.std
    delta = _diff0(z)
    if mode == "delta":
        return FeatureSequence(np.concatenate([delta, _diff0(delta)], axis=1))
    if mode == "static":
        return FeatureSequence(np.concatenate([z, delta], axis=1))
    raise ValueError(f"unknown feature mode {mode!r}")


# --- file formats ---

def read_wav(path) -> Waveform:
    with wave.open(str(path), "rb") as wf:
        if wf.getnchannels() != 1 or wf.getsampwidth() != 2:
            raise ValueError(f"{path}: expected 16-bit PCM mono WAV")
        rate = wf.getframerate()
        data = wf.readframes(wf.getnframes())
    samples = np.frombuffer(data, dtype="<i2").astype(np.float64) / 32768.0
    if rate != SAMPLE_RATE:
        raise ValueError(f"{path}: expected {SAMPLE_RATE} Hz audio, got {rate} Hz")
    return Waveform(samples, rate)


def write_wav(path, w: Waveform) -> None:
    pcm = np.clip(np.round(w.samples * 32767.0), -32768, 32767).astype("<i2")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(w.sample_rate)
        wf.writeframes(pcm.tobytes())


def write_features(path, f: FeatureSequence) -> None:
    T, D = f.frames.shape
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(FEATURE_MAGIC + struct.pack("<II", T, D))
        fh.write(f.frames.astype("<f4").tobytes(order="C"))


def read_features(path) -> FeatureSequence:
    raw = Path(path).read_bytes()
    if raw[:4] != FEATURE_MAGIC:
        raise ValueError(f"{path}: not a feature file (bad magic)")
    T, D = struct.unpack("<II", raw[4:12])
    body = raw[12:]
    if len(body) != T * D * 4:
        raise ValueError(f"{path}: truncated feature file")
    return FeatureSequence(np.frombuffer(body, dtype="<f4").reshape(T, D).astype(np.float64))


def write_features_csv(path, f: FeatureSequence) -> None:
    np.savetxt(path, f.frames, delimiter=",", fmt="%.8g",
               header=",".join(f"f{i}" for i in range(f.dim)), comments="")
