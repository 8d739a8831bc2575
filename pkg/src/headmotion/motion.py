"""Head pose sequences, per-video normalization and axis mirroring."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

FPS = 25
UTTERANCE_FRAMES = 250


class PoseFrame(NamedTuple):
    """Rotation parameters (radians) about the x, y and z axes."""

    rx: float
    ry: float
    rz: float


class Axis(enum.IntEnum):
    X = 0
    Y = 1
    Z = 2

    @classmethod
    def parse(cls, value: "str | int | Axis") -> "Axis":
        if isinstance(value, Axis):
            return value
        if isinstance(value, int):
            return cls(value)
        try:
            return cls[value.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown axis {value!r}; expected one of x, y, z") from None


@dataclass(frozen=True, eq=False)
class PoseSequence:
    """A (T, 3) array of head rotations sampled at 25 fps.

    The array is copied and made read-only on construction.
    """

    frames: np.ndarray
    fps: int = FPS

    def __post_init__(self):
        arr = np.array(self.frames, dtype=np.float64, copy=True)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise ValueError(f"pose frames must have shape (T, 3), got {arr.shape}")
        if arr.shape[0] < 1:
            raise ValueError("pose sequence needs at least one frame")
        if self.fps != FPS:
            raise ValueError(f"pose sequences must be sampled at {FPS} fps, got {self.fps}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("pose frames must be finite")
        if np.any(np.abs(arr) >= math.pi):
            raise ValueError("pose components must lie in (-pi, pi)")
        arr.setflags(write=False)
        object.__setattr__(self, "frames", arr)

    def __len__(self) -> int:
        return self.frames.shape[0]

    def __getitem__(self, t: int) -> PoseFrame:
        return PoseFrame(*map(float, self.frames[t]))

    def __eq__(self, other):
        if not isinstance(other, PoseSequence):
            return NotImplemented
        return self.fps == other.fps and np.array_equal(self.frames, other.frames)

    __hash__ = None  # type: ignore[assignment]

    @property
    def duration(self) -> float:
        return len(self) / self.fps


def compute_mean_pose(sequences: Sequence[PoseSequence]) -> PoseFrame:
    """Component-wise mean over every frame of every sequence (one video)."""
    if not sequences:
        raise ValueError("no frames")
    stacked = np.concatenate([s.frames for s in sequences], axis=0)
    return PoseFrame(*map(float, stacked.mean(axis=0)))


def normalize_poses(seq: PoseSequence, mean: PoseFrame) -> PoseSequence:
    return PoseSequence(seq.frames - np.asarray(mean, dtype=np.float64), fps=seq.fps)


def mirror(seq: PoseSequence, axis: "Axis | str | int") -> PoseSequence:
    """Negate one rotation component in every frame."""
    axis = Axis.parse(axis)
    out = seq.frames.copy()
    out[:, axis] = -out[:, axis]
    return PoseSequence(out, fps=seq.fps)


# --- pose CSV: header ``frame,rx,ry,rz``, 0-based contiguous frame indices ---

POSE_HEADER = ["frame", "rx", "ry", "rz"]


def read_pose_array(path: "str | Path") -> np.ndarray:
    """Read a pose CSV into a (T, 3) array; empty or ``nan`` fields become NaN.

    Missing values mark frames where no head pose could be extracted.
    """
    path = Path(path)
    rows = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != POSE_HEADER:
            raise ValueError(f"{path}: expected header {','.join(POSE_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
            if int(row[0]) != len(rows):
                raise ValueError(f"{path}:{lineno}: frame indices must be 0-based and contiguous")
            rows.append([float(v) if v.strip() else math.nan for v in row[1:]])
    if not rows:
        raise ValueError(f"{path}: no frames")
    return np.asarray(rows, dtype=np.float64)


def read_pose_csv(path: "str | Path") -> PoseSequence:
    return PoseSequence(read_pose_array(path))


def write_pose_csv(path: "str | Path", poses: "PoseSequence | np.ndarray") -> None:
    frames = poses.frames if isinstance(poses, PoseSequence) else np.asarray(poses)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(POSE_HEADER)
        for t, (x, y, z) in enumerate(frames):
            writer.writerow([t] + ["" if math.isnan(v) else repr(float(v)) for v in (x, y, z)])
