"""Corpus manifests, video-level splits, 10-second segmentation and a synthetic corpus."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .acoustic import HOP_LENGTH, SAMPLE_RATE, Waveform, read_wav, write_wav
from .motion import FPS, UTTERANCE_FRAMES, PoseSequence, read_pose_array, write_pose_csv

MANIFEST_VERSION = 1
SPLITS = ("train", "val", "test")
DEFAULT_FRACTIONS = (0.75, 0.125, 0.125)


@dataclass
class VideoEntry:
    video_id: str
    audio: str
    pose: str
    duration: float
    split: Optional[str] = None

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError(f"video {self.video_id}: duration must be positive")
        if self.split is not None and self.split not in SPLITS:
            raise ValueError(f"video {self.video_id}: unknown split {self.split!r}")


@dataclass
class Utterance:
    utterance_id: str
    video_id: str
    start_frame: int
    poses: PoseSequence
    split: Optional[str] = None

    @property
    def sample_range(self) -> Tuple[int, int]:
        start = self.start_frame * HOP_LENGTH
        return start, start + UTTERANCE_FRAMES * HOP_LENGTH


@dataclass
class Manifest:
    videos: List[VideoEntry]
    utterances: List[dict] = field(default_factory=list)
    fractions: Tuple[float, float, float] = DEFAULT_FRACTIONS
    seed: int = 0
    mean_poses: Dict[str, List[float]] = field(default_factory=dict)
    version: int = MANIFEST_VERSION

    def split_of(self, video_id: str) -> Optional[str]:
        for v in self.videos:
            if v.video_id == video_id:
                return v.split
        raise KeyError(video_id)

    def videos_in(self, split: str) -> List[VideoEntry]:
        return [v for v in self.videos if v.split == split]

    def utterances_in(self, split: str) -> List[dict]:
        return [u for u in self.utterances if u["split"] == split]

    def to_json(self) -> str:
        doc = {
            "version": self.version,
            "fractions": list(self.fractions),
            "seed": self.seed,
            "videos": [asdict(v) for v in self.videos],
            "mean_poses": self.mean_poses,
            "utterances": self.utterances,
        }
        return json.dumps(doc, indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Manifest":
        doc = json.loads(text)
        if doc.get("version") != MANIFEST_VERSION:
            raise ValueError(f"unsupported manifest version {doc.get('version')!r}")
        ids = [u["utterance_id"] for u in doc["utterances"]]
        if len(ids) != len(set(ids)):
            raise ValueError("manifest has duplicate utterance ids")
        return cls(
            videos=[VideoEntry(**v) for v in doc["videos"]],
            utterances=doc["utterances"],
            fractions=tuple(doc["fractions"]),
            seed=doc["seed"],
            mean_poses=doc.get("mean_poses", {}),
        )

    def save(self, path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "Manifest":
        return cls.from_json(Path(path).read_text())


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split_videos(videos: Sequence[VideoEntry], fractions=DEFAULT_FRACTIONS, seed: int = 0) -> Manifest:
    """Seeded shuffle of whole videos, then contiguous train/val/test blocks."""
    if len(videos) < 3:
        raise ValueError("need at least 3 videos to split into train/val/test")
    if len(fractions) != 3 or abs(sum(fractions) - 1.0) > 1e-9 or min(fractions) < 0:
        raise ValueError("fractions must be three nonnegative numbers summing to 1")
    n = len(videos)
    n_val = _round_half_up(n * fractions[1])
    n_test = _round_half_up(n * fractions[2])
    n_train = n - n_val - n_test
    order = np.random.default_rng(seed).permutation(n)
    labels = ["train"] * n_train + ["val"] * n_val + ["test"] * n_test
    out = [VideoEntry(**{**asdict(v), "split": None}) for v in videos]
    for pos, i in enumerate(order):
        out[i].split = labels[pos]
    return Manifest(videos=out, fractions=tuple(fractions), seed=seed)


def segment_windows(poses: np.ndarray) -> List[int]:
    """Start frames of consecutive 250-frame windows whose poses are all present."""
    starts = []
    for k in range(poses.shape[0] // UTTERANCE_FRAMES):
        start = k * UTTERANCE_FRAMES
        if np.all(np.isfinite(poses[start:start + UTTERANCE_FRAMES])):
            starts.append(start)
    return starts


def segment_utterances(video: VideoEntry, poses: Optional[np.ndarray] = None,
                       normalize: bool = True) -> List[Utterance]:
    """Non-overlapping 10 s windows from frame 0; windows with a missing pose are dropped.

    Poses are centred on the mean over all retained frames of the video.
    """
    if poses is None:
        try:
            poses = read_pose_array(video.pose)
        except (OSError, ValueError) as exc:
            raise ValueError(f"cannot read pose file for video {video.video_id}: {exc}") from exc
    starts = segment_windows(poses)
    if not starts:
        return []
    retained = np.concatenate([poses[s:s + UTTERANCE_FRAMES] for s in starts])
    mean = retained.mean(axis=0) if normalize else np.zeros(3)
    return [
        Utterance(f"{video.video_id}_{s // UTTERANCE_FRAMES:03d}", video.video_id, s,
                  PoseSequence(poses[s:s + UTTERANCE_FRAMES] - mean), video.split)
        for s in starts
    ]


def build_manifest(videos: Sequence[VideoEntry], out_dir, fractions=DEFAULT_FRACTIONS, seed: int = 0) -> Manifest:
    """Split, segment and write normalized utterance poses under ``out_dir/poses``."""
    out_dir = Path(out_dir)
    manifest = split_videos(videos, fractions, seed)
    for v in manifest.videos:
        poses = read_pose_array(v.pose)
        utts = segment_utterances(v, poses)
        if utts:
            retained = np.concatenate([poses[u.start_frame:u.start_frame + UTTERANCE_FRAMES] for u in utts])
            manifest.mean_poses[v.video_id] = retained.mean(axis=0).tolist()
        for u in utts:
            rel = f"poses/{u.utterance_id}.csv"
            write_pose_csv(out_dir / rel, u.poses)
            manifest.utterances.append({
                "utterance_id": u.utterance_id,
                "video_id": v.video_id,
                "start_frame": u.start_frame,
                "split": v.split,
                "pose": rel,
            })
    manifest.save(out_dir / "manifest.json")
    return manifest


def utterance_audio(manifest: Manifest, entry: dict, cache: Optional[dict] = None) -> Waveform:
    video = next(v for v in manifest.videos if v.video_id == entry["video_id"])
    if cache is not None and video.video_id in cache:
        w = cache[video.video_id]
    else:
        w = read_wav(video.audio)
        if cache is not None:
            cache[video.video_id] = w
    start = entry["start_frame"] * HOP_LENGTH
    stop = start + UTTERANCE_FRAMES * HOP_LENGTH
    if w.samples.size < stop:
        raise ValueError(f"audio for {entry['utterance_id']} is shorter than its pose track")
    return Waveform(w.samples[start:stop], w.sample_rate)


# --- synthetic corpus ---

def _smooth_envelope(rng, t: np.ndarray) -> np.ndarray:
    """Positive syllable-rate envelope in [0, 1]: slow phrase contour times 2-6 Hz bursts."""
    phrase = np.zeros_like(t)
    for _ in range(3):
        f = rng.uniform(0.05, 0.3)
        phrase += rng.uniform(0.5, 1.0) * np.sin(2 * np.pi * f * t + rng.uniform(0, 2 * np.pi))
    phrase = 1.0 / (1.0 + np.exp(-1.5 * phrase))
    syll = np.zeros_like(t)
    for _ in range(2):
        f = rng.uniform(2.0, 6.0)
        syll += np.sin(2 * np.pi * f * t + rng.uniform(0, 2 * np.pi))
    syll = 0.5 + 0.25 * syll
    return np.clip(phrase * syll, 0.0, 1.0)


def synthesize_video(rng, duration: float) -> Tuple[Waveform, np.ndarray]:
    n_frames = int(round(duration * FPS))
    n_samples = n_frames * HOP_LENGTH
    t_audio = np.arange(n_samples) / SAMPLE_RATE
    env = _smooth_envelope(rng, t_audio)

    noise = rng.standard_normal(n_samples)
    spec = np.fft.rfft(noise)
    freqs = np.fft.rfftfreq(n_samples, 1.0 / SAMPLE_RATE)
    lo, hi = rng.uniform(150, 400), rng.uniform(2500, 5000)
    spec[(freqs < lo) | (freqs > hi)] = 0.0
    band = np.fft.irfft(spec, n=n_samples)
    band /= np.max(np.abs(band)) + 1e-12
    tones = np.zeros(n_samples)
    for _ in range(3):
        f0 = rng.uniform(120, 1800)
        tones += rng.uniform(0.2, 0.5) * np.sin(2 * np.pi * f0 * t_audio + rng.uniform(0, 2 * np.pi))
    audio = env * (0.35 * band + 0.4 * tones / 3.0)
    audio = 0.9 * audio / (np.max(np.abs(audio)) + 1e-12)

    # frame-rate envelope drives the motion so speech and pose are statistically linked
    env_frames = env.reshape(n_frames, HOP_LENGTH).mean(axis=1)
    t = np.arange(n_frames) / FPS
    smooth = np.convolve(env_frames - env_frames.mean(), np.ones(5) / 5, mode="same")
    poses = np.zeros((n_frames, 3))
    offset = rng.uniform(-0.2, 0.2, size=3)
    for axis in range(3):
        drift = np.zeros(n_frames)
        for _ in range(3):
            f = rng.uniform(0.1, 1.0)
            drift += rng.uniform(0.01, 0.04) * np.sin(2 * np.pi * f * t + rng.uniform(0, 2 * np.pi))
        gain = rng.uniform(0.3, 0.6) * (1 if axis != 1 else -1)
        poses[:, axis] = offset[axis] + gain * smooth + drift * (0.5 + env_frames)
    return Waveform(audio, SAMPLE_RATE), np.clip(poses, -1.0, 1.0)


def generate_synthetic_corpus(n_videos: int, seed: int, out_dir, min_seconds: int = 30,
                              max_seconds: int = 60, gap_probability: float = 0.25) -> List[VideoEntry]:
    """Write ``audio/<id>.wav`` and ``poses/<id>.csv`` per video plus ``corpus.json``.

    Some videos get a short run of missing pose frames so segmentation has
    windows to drop.
    """
    if n_videos < 1:
        raise ValueError("n_videos must be >= 1")
    out_dir = Path(out_dir)
    rng = np.random.default_rng(seed)
    videos = []
    for i in range(n_videos):
        vid = f"video_{i:03d}"
        vrng = np.random.default_rng([seed, i])
        duration = float(rng.integers(min_seconds, max_seconds + 1))
        wav, poses = synthesize_video(vrng, duration)
        if vrng.random() < gap_probability:
            start = int(vrng.integers(0, poses.shape[0] - 10))
            poses[start:start + int(vrng.integers(1, 10))] = np.nan
        audio_rel, pose_rel = f"audio/{vid}.wav", f"poses/{vid}.csv"
        write_wav(out_dir / audio_rel, wav)
        write_pose_csv(out_dir / pose_rel, poses)
        videos.append(VideoEntry(vid, str(out_dir / audio_rel), str(out_dir / pose_rel), duration))
    (out_dir / "corpus.json").write_text(json.dumps(
        {"seed": seed, "videos": [{**asdict(v), "audio": f"audio/{v.video_id}.wav",
                                   "pose": f"poses/{v.video_id}.csv"} for v in videos]},
        indent=1, sort_keys=True))
    return videos


def load_corpus(corpus_dir) -> List[VideoEntry]:
    corpus_dir = Path(corpus_dir)
    doc = json.loads((corpus_dir / "corpus.json").read_text())
    out = []
    for v in doc["videos"]:
        v = dict(v)
        v["audio"] = str(corpus_dir / v["audio"])
        v["pose"] = str(corpus_dir / v["pose"])
        v["split"] = None
        out.append(VideoEntry(**v))
    return out
