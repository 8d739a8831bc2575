"""Nearest-neighbour ID histogram entropy as a diversity score.

Each generated sequence is assigned the ID of its nearest training sequence
(flattened Euclidean distance, exact linear scan, lowest ID on ties). The
score is the base-2 Shannon entropy of the resulting ID histogram.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .motion import PoseSequence

_CHUNK_ELEMS = 1 << 23


@dataclass(frozen=True, eq=False)
class NnIndex:
    vectors: np.ndarray  # (n, T*3); row i is training sequence ID i
    seq_len: int

    def __len__(self):
        return self.vectors.shape[0]


@dataclass(frozen=True, eq=False)
class NnHistogram:
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["train_id", "count"])
            for i, c in enumerate(self.counts):
                w.writerow([i, int(c)])


def _flatten(seqs: Sequence[PoseSequence], seq_len: int) -> np.ndarray:
    rows = []
    for s in seqs:
        frames = s.frames if isinstance(s, PoseSequence) else np.asarray(s, dtype=np.float64)
        if frames.shape[0] != seq_len:
            raise ValueError(f"sequence length {frames.shape[0]} does not match index length {seq_len}")
        rows.append(frames.reshape(-1))
    return np.asarray(rows, dtype=np.float64)


def fit_nn_index(train: Sequence[PoseSequence]) -> NnIndex:
    if not train:
        raise ValueError("cannot fit a nearest-neighbour index on an empty corpus")
    seq_len = len(train[0])
    return NnIndex(_flatten(train, seq_len), seq_len)


def nearest_ids(index: NnIndex, preds: Sequence[PoseSequence]) -> np.ndarray:
    Q = _flatten(preds, index.seq_len)
    if Q.size == 0:
        return np.zeros(0, dtype=np.int64)
    out = np.empty(Q.shape[0], dtype=np.int64)
    step = max(1, _CHUNK_ELEMS // index.vectors.size)
    for start in range(0, Q.shape[0], step):
        q = Q[start:start + step]
        # direct differences, not the |a|^2+|b|^2-2ab expansion, so exact ties stay ties
        d2 = ((q[:, None, :] - index.vectors[None, :, :]) ** 2).sum(axis=2)
        out[start:start + len(q)] = np.argmin(d2, axis=1)
    return out


def classify(index: NnIndex, preds: Sequence[PoseSequence]) -> NnHistogram:
    ids = nearest_ids(index, preds)
    return NnHistogram(np.bincount(ids, minlength=len(index)))


def shannon_index(h: "NnHistogram | Sequence[int]") -> float:
    counts = np.asarray(h.counts if isinstance(h, NnHistogram) else h, dtype=np.float64)
    total = counts.sum()
    if total < 1:
        raise ValueError("empty histogram")
    p = counts[counts > 0] / total
    return float(max(0.0, -np.sum(p * np.log2(p))))


def diversity_score(index: NnIndex, preds: Sequence[PoseSequence]) -> float:
    return shannon_index(classify(index, preds))


def entropy_upper_bound(h: NnHistogram) -> float:
    return math.log2(min(h.total, len(h.counts)))
