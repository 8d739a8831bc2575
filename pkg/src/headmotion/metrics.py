"""Objective distances between pose sequences and Pearson correlation."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Sequence

import numpy as np
from scipy import stats

from .motion import PoseSequence

METRIC_COLUMNS = ("mae", "dtw", "fd_gaussian", "fd_discrete")


@dataclass(frozen=True)
class MetricReport:
    utterance_id: str
    variant: str
    mae: float
    dtw: float
    frechet_gaussian: float
    frechet_discrete: float

    def __post_init__(self):
        for name in ("mae", "dtw", "frechet_gaussian", "frechet_discrete"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and nonnegative, got {v}")

    def value(self, metric: str) -> float:
        return {
            "mae": self.mae,
            "dtw": self.dtw,
            "fd_gaussian": self.frechet_gaussian,
            "fd_discrete": self.frechet_discrete,
        }[metric]


@dataclass(frozen=True)
class CorrelationResult:
    r: float
    p: float
    n: int


def _frames(s) -> np.ndarray:
    a = s.frames if isinstance(s, PoseSequence) else np.asarray(s, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    return a


def mae(a, b) -> float:
    a, b = _frames(a), _frames(b)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape[0]} vs {b.shape[0]} frames")
    return float(np.mean(np.abs(a - b)))


def _cost_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if len(a) == 0 or len(b) == 0:
        raise ValueError("empty sequence")
    return np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2))


def dtw(a, b) -> float:
    """Unnormalized DTW with steps (1,0), (0,1), (1,1) and Euclidean frame cost."""
    cost = _cost_matrix(_frames(a), _frames(b)).tolist()
    n, m = len(cost), len(cost[0])
    prev = [math.inf] * m
    acc = 0.0
    for j in range(m):
        acc += cost[0][j]
        prev[j] = acc
    for i in range(1, n):
        row = cost[i]
        cur = [0.0] * m
        cur[0] = prev[0] + row[0]
        for j in range(1, m):
            best = prev[j - 1]
            if prev[j] < best:
                best = prev[j]
            if cur[j - 1] < best:
                best = cur[j - 1]
            cur[j] = row[j] + best
        prev = cur
    return float(prev[-1])


def frechet_discrete(a, b) -> float:
    """Discrete Fréchet (coupling) distance with Euclidean frame cost."""
    cost = _cost_matrix(_frames(a), _frames(b)).tolist()
    n, m = len(cost), len(cost[0])
    prev = [0.0] * m
    prev[0] = cost[0][0]
    for j in range(1, m):
        prev[j] = max(prev[j - 1], cost[0][j])
    for i in range(1, n):
        row = cost[i]
        cur = [0.0] * m
        cur[0] = max(prev[0], row[0])
        for j in range(1, m):
            cur[j] = max(row[j], min(prev[j - 1], prev[j], cur[j - 1]))
        prev = cur
    return float(prev[-1])


def _sqrt_psd(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh((m + m.T) / 2)
    return (v * np.sqrt(np.maximum(w, 0.0))) @ v.T


def gaussian_frechet(mu_a, cov_a, mu_b, cov_b) -> float:
    """||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2)).

    The trace of the cross term is computed as Tr((A^1/2 B A^1/2)^1/2),
    which only needs symmetric eigendecompositions.
    """
    mu_a, mu_b = np.asarray(mu_a, float), np.asarray(mu_b, float)
    cov_a, cov_b = np.atleast_2d(cov_a), np.atleast_2d(cov_b)
    root_a = _sqrt_psd(cov_a)
    inner = root_a @ cov_b @ root_a
    w = np.linalg.eigvalsh((inner + inner.T) / 2)
    cross = float(np.sum(np.sqrt(np.maximum(w, 0.0))))
    value = float(np.sum((mu_a - mu_b) ** 2) + np.trace(cov_a) + np.trace(cov_b) - 2.0 * cross)
    return max(value, 0.0)


def frechet_gaussian(a, b) -> float:
    a, b = _frames(a), _frames(b)
    if len(a) < 2 or len(b) < 2:
        raise ValueError("Gaussian Fréchet distance needs at least 2 frames per sequence")
    return gaussian_frechet(a.mean(axis=0), np.cov(a, rowvar=False, ddof=1),
                            b.mean(axis=0), np.cov(b, rowvar=False, ddof=1))


def pearson(x: Sequence[float], y: Sequence[float]) -> CorrelationResult:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("pearson needs two equal-length 1-D samples")
    n = x.size
    if n < 3:
        raise ValueError("pearson needs at least 3 observations")
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise ValueError("degenerate input")
    r = float(np.clip((dx @ dy) / math.sqrt(sxx * syy), -1.0, 1.0))
    if abs(r) == 1.0:
        p = 0.0
    else:
        t = r * math.sqrt((n - 2) / (1.0 - r * r))
        p = float(2.0 * stats.t.sf(abs(t), df=n - 2))
    return CorrelationResult(r, min(max(p, 0.0), 1.0), n)


def evaluate_pair(utterance_id: str, variant: str, reference: PoseSequence, pred: PoseSequence) -> MetricReport:
    return MetricReport(
        utterance_id=utterance_id,
        variant=variant,
        mae=mae(reference, pred),
        dtw=dtw(reference, pred),
        frechet_gaussian=frechet_gaussian(reference, pred),
        frechet_discrete=frechet_discrete(reference, pred),
    )


def write_reports(path, reports: Iterable[MetricReport]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["utterance_id", "variant", *METRIC_COLUMNS])
        for r in reports:
            w.writerow([r.utterance_id, r.variant, repr(r.mae), repr(r.dtw),
                        repr(r.frechet_gaussian), repr(r.frechet_discrete)])


def read_reports(path) -> List[MetricReport]:
    out = []
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(MetricReport(row["utterance_id"], row["variant"], float(row["mae"]),
                                    float(row["dtw"]), float(row["fd_gaussian"]), float(row["fd_discrete"])))
    return out
