"""Forced-choice rating analysis.

A rating records whether a rater found the ground-truth clip (``1``) or the
generated clip (``0``) more natural.  Averaging per (utterance, variant)
gives a perceptual score in [0, 1]; 0.5 means the two are indistinguishable
and lower is better for the generator.

The regression is a fixed-effects logistic model fitted by IRLS, with
standard errors from a cluster bootstrap over utterances standing in for
random effects.
"""

from __future__ import annotations

import csv
import math
import re
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from .metrics import METRIC_COLUMNS, CorrelationResult, MetricReport, pearson

CHOICES = ("ground_truth", "generated")
DETERMINISTIC = "deterministic"
N_SAMPLES = 10
_SAMPLE_RE = re.compile(r"^sample_(\d+)$")
_MIRROR_RE = re.compile(r"^mirrored_[xyz]$")


class SeparationError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class AnnotationRecord:
    utterance_id: str
    variant_id: str
    rater_id: str
    choice: str

    def __post_init__(self):
        if self.choice not in CHOICES:
            raise ValueError(f"choice must be one of {CHOICES}, got {self.choice!r}")
        if not (self.variant_id == DETERMINISTIC or _SAMPLE_RE.match(self.variant_id)
                or _MIRROR_RE.match(self.variant_id)):
            raise ValueError(f"unknown variant id {self.variant_id!r}")

    @property
    def outcome(self) -> int:
        return 1 if self.choice == "ground_truth" else 0


@dataclass(frozen=True)
class PerceptualScore:
    utterance_id: str
    variant_id: str
    score: float
    n_raters: int

    @property
    def key(self) -> Tuple[str, str]:
        return self.utterance_id, self.variant_id


@dataclass(frozen=True)
class QualityGroup:
    index: int
    members: Tuple[Tuple[str, str], ...]


@dataclass(frozen=True)
class ContrastEstimate:
    name: str
    estimate: float
    std_error: float
    z: float
    p: float
    ci_low: float
    ci_high: float


@dataclass(frozen=True)
class RegressionResult:
    contrasts: Tuple[ContrastEstimate, ...]
    n_obs: int
    n_clusters: int
    replicates: int
    iterations: int

    def __getitem__(self, name: str) -> ContrastEstimate:
        for c in self.contrasts:
            if c.name == name:
                return c
        raise KeyError(name)


# --- ingestion ---

def read_annotations(path) -> List[AnnotationRecord]:
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        expected = ["utterance_id", "variant_id", "rater_id", "choice"]
        if reader.fieldnames != expected:
            raise ValueError(f"{path}: expected header {','.join(expected)}")
        return [AnnotationRecord(r["utterance_id"], r["variant_id"], r["rater_id"], r["choice"].strip())
                for r in reader]


def write_annotations(path, records: Iterable[AnnotationRecord]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["utterance_id", "variant_id", "rater_id", "choice"])
        for r in records:
            w.writerow([r.utterance_id, r.variant_id, r.rater_id, r.choice])


def aggregate_scores(records: Iterable[AnnotationRecord]) -> List[PerceptualScore]:
    """Fraction of ground-truth choices per (utterance, variant), sorted by key."""
    seen = set()
    tallies: Dict[Tuple[str, str], List[int]] = defaultdict(lambda: [0, 0])
    for r in records:
        key = (r.utterance_id, r.variant_id, r.rater_id)
        if key in seen:
            raise ValueError(f"duplicate rating for utterance={key[0]} variant={key[1]} rater={key[2]}")
        seen.add(key)
        t = tallies[(r.utterance_id, r.variant_id)]
        t[0] += r.outcome
        t[1] += 1
    return [PerceptualScore(u, v, gt / n, n) for (u, v), (gt, n) in sorted(tallies.items())]


def write_scores(path, scores: Iterable[PerceptualScore]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["utterance_id", "variant_id", "score", "n_raters"])
        for s in scores:
            w.writerow([s.utterance_id, s.variant_id, repr(s.score), s.n_raters])


def read_scores(path) -> List[PerceptualScore]:
    with Path(path).open(newline="") as fh:
        return [PerceptualScore(r["utterance_id"], r["variant_id"], float(r["score"]), int(r["n_raters"]))
                for r in csv.DictReader(fh)]


# --- ranking ---

def rank_and_group(scores: Iterable[PerceptualScore], n_samples: int = N_SAMPLES) -> List[QualityGroup]:
    """Group g holds each utterance's (g+1)-th most natural sample (lowest score first).

    Ties are broken by sample index.  Non-sample variants are ignored.
    """
    by_utt: Dict[str, Dict[int, float]] = defaultdict(dict)
    for s in scores:
        m = _SAMPLE_RE.match(s.variant_id)
        if m:
            by_utt[s.utterance_id][int(m.group(1))] = s.score
    members: List[List[Tuple[str, str]]] = [[] for _ in range(n_samples)]
    for utt in sorted(by_utt):
        samples = by_utt[utt]
        for i in range(n_samples):
            if i not in samples:
                raise ValueError(f"missing variant sample_{i} for utterance {utt}")
        if len(samples) != n_samples:
            extra = sorted(set(samples) - set(range(n_samples)))
            raise ValueError(f"utterance {utt} has unexpected variants {['sample_%d' % i for i in extra]}")
        order = sorted(range(n_samples), key=lambda i: (samples[i], i))
        for g, i in enumerate(order):
            members[g].append((utt, f"sample_{i}"))
    return [QualityGroup(g, tuple(m)) for g, m in enumerate(members)]


# --- design matrices ---

def sliding_difference_design(levels: Sequence) -> np.ndarray:
    """Backward-difference contrast matrix, shape (k, k-1).

    With an intercept column, coefficient j estimates level j+1 minus level j.
    """
    k = len(levels)
    if k < 2:
        raise ValueError("sliding difference coding needs at least 2 levels")
    C = np.empty((k, k - 1))
    for j in range(k - 1):
        C[: j + 1, j] = -(k - j - 1) / k
        C[j + 1:, j] = (j + 1) / k
    return C


def design_rows(labels: Sequence, levels: Sequence, coding: str = "sliding") -> np.ndarray:
    """Model matrix for level labels: ``sliding`` (intercept + contrasts) or ``cell`` (one indicator per level)."""
    pos = {lvl: i for i, lvl in enumerate(levels)}
    try:
        idx = np.array([pos[l] for l in labels], dtype=np.int64)
    except KeyError as exc:
        raise ValueError(f"label {exc.args[0]!r} is not a declared level") from None
    if coding == "cell":
        return np.eye(len(levels))[idx]
    if coding == "sliding":
        C = sliding_difference_design(levels)
        return np.column_stack([np.ones(len(idx)), C[idx]])
    raise ValueError(f"unknown coding {coding!r}")


# --- logistic regression ---

def _collapse(y, X, clusters):
    """Merge rows sharing (cluster, design row) into binomial counts."""
    y = np.asarray(y, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if not (len(y) == len(X) == len(clusters)):
        raise ValueError("outcomes, design rows and cluster ids must be aligned")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("outcomes must be binary")
    cluster_names, cluster_idx = np.unique(np.asarray(clusters, dtype=object).astype(str), return_inverse=True)
    keyed = np.column_stack([cluster_idx.astype(np.float64), X])
    uniq, inverse = np.unique(keyed, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    successes = np.bincount(inverse, weights=y, minlength=len(uniq))
    trials = np.bincount(inverse, minlength=len(uniq)).astype(np.float64)
    return uniq[:, 1:], successes, trials, uniq[:, 0].astype(np.int64), len(cluster_names)


def _irls(X, s, n, tol=1e-10, max_iter=100, beta0=None):
    """Newton/IRLS for binomial counts; raises on separation or non-convergence."""
    p = X.shape[1]
    beta = np.zeros(p) if beta0 is None else beta0.copy()
    for it in range(1, max_iter + 1):
        eta = X @ beta
        mu = 1.0 / (1.0 + np.exp(-eta))
        w = n * mu * (1.0 - mu)
        H = (X * w[:, None]).T @ X
        score = X.T @ (s - n * mu)
        try:
            delta = np.linalg.solve(H, score)
        except np.linalg.LinAlgError:
            raise SeparationError("separation detected (singular information matrix)") from None
        beta = beta + delta
        if not np.all(np.isfinite(beta)):
            raise SeparationError("separation detected")
        if np.max(np.abs(delta)) < tol:
            return beta, it
    if np.max(np.abs(X @ beta)) > 15:
        raise SeparationError("separation detected")
    raise ConvergenceError(f"IRLS did not converge after {max_iter} iterations")


def _irls_batched(X, S, N, beta0, tol=1e-10, max_iter=100):
    """Newton iterations for many weightings at once; returns (R, p) with NaN rows for failures."""
    R, p = S.shape[0], X.shape[1]
    beta = np.tile(beta0, (R, 1))
    active = np.ones(R, dtype=bool)
    ok = np.zeros(R, dtype=bool)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        b = beta[idx]
        eta = b @ X.T
        mu = 1.0 / (1.0 + np.exp(-eta))
        w = N[idx] * mu * (1.0 - mu)
        H = np.matmul((X[None, :, :] * w[:, :, None]).transpose(0, 2, 1), X[None, :, :])
        g = (S[idx] - N[idx] * mu) @ X
        det_ok = np.linalg.cond(H) < 1e12
        delta = np.zeros_like(b)
        if det_ok.any():
            delta[det_ok] = np.linalg.solve(H[det_ok], g[det_ok][:, :, None])[:, :, 0]
        b = b + delta
        beta[idx] = b
        bad = ~det_ok | ~np.all(np.isfinite(b), axis=1) | (np.max(np.abs(b), axis=1) > 30)
        done = ~bad & (np.max(np.abs(delta), axis=1) < tol)
        ok[idx[done]] = True
        active[idx[done | bad]] = False
    beta[~ok] = np.nan
    return beta


def logistic_regression(outcomes: Sequence[int], design: np.ndarray, cluster_ids: Sequence,
                        names: Optional[Sequence[str]] = None, replicates: int = 10_000,
                        seed: int = 0, level: float = 0.95, tol: float = 1e-10,
                        max_iter: int = 100, chunk: int = 500) -> RegressionResult:
    """Maximum-likelihood logistic fit with cluster-bootstrap inference.

    Standard errors are the bootstrap standard deviation of each coefficient,
    ``z = estimate / std_error`` and ``p`` is two-sided normal.  Bootstrap
    replicates that separate or fail to converge are dropped.
    """
    Xc, s, n, cl, n_clusters = _collapse(outcomes, design, cluster_ids)
    if n_clusters < 2:
        raise ValueError("cluster bootstrap needs at least 2 clusters")
    if s.sum() == 0 or s.sum() == n.sum():
        raise SeparationError("separation detected")
    beta, iterations = _irls(Xc, s, n, tol=tol, max_iter=max_iter)
    p = Xc.shape[1]
    names = list(names) if names is not None else [f"b{i}" for i in range(p)]
    if len(names) != p:
        raise ValueError(f"{len(names)} names for {p} coefficients")

    rng = np.random.default_rng(seed)
    draws = []
    for start in range(0, replicates, chunk):
        r = min(chunk, replicates - start)
        counts = rng.multinomial(n_clusters, np.full(n_clusters, 1.0 / n_clusters), size=r).astype(np.float64)
        wts = counts[:, cl]
        draws.append(_irls_batched(Xc, wts * s, wts * n, beta, tol=1e-8, max_iter=max_iter))
    boot = np.concatenate(draws, axis=0) if draws else np.empty((0, p))
    boot = boot[np.all(np.isfinite(boot), axis=1)]
    if len(boot) < 2:
        raise ConvergenceError("too few successful bootstrap replicates")
    se = boot.std(axis=0, ddof=1)
    alpha = 1.0 - level
    lo, hi = np.quantile(boot, [alpha / 2, 1 - alpha / 2], axis=0)
    contrasts = []
    for i, name in enumerate(names):
        z = beta[i] / se[i] if se[i] > 0 else (0.0 if beta[i] == 0 else math.copysign(math.inf, beta[i]))
        pval = float(2.0 * stats.norm.sf(abs(z)))
        contrasts.append(ContrastEstimate(name, float(beta[i]), float(se[i]), float(z), pval,
                                          float(lo[i]), float(hi[i])))
    return RegressionResult(tuple(contrasts), int(n.sum()), n_clusters, len(boot), iterations)


def bootstrap_ci(values: Sequence[float], level: float = 0.95, replicates: int = 10_000,
                 seed: int = 0) -> Tuple[float, float]:
    """Percentile bootstrap interval for the mean."""
    v = np.asarray(values, dtype=np.float64)
    if v.size < 2:
        raise ValueError("bootstrap needs at least 2 values")
    if np.all(v == v[0]):
        return float(v[0]), float(v[0])
    rng = np.random.default_rng(seed)
    means = v[rng.integers(0, v.size, size=(replicates, v.size))].mean(axis=1)
    alpha = 1.0 - level
    lo, hi = np.quantile(means, [alpha / 2, 1 - alpha / 2])
    return float(lo), float(hi)


# --- metric correlation ---

def correlate_with_metrics(scores: Sequence[PerceptualScore], reports: Sequence[MetricReport],
                           metrics: Sequence[str] = METRIC_COLUMNS) -> Dict[str, CorrelationResult]:
    by_key = {s.key: s.score for s in scores}
    rep = {(r.utterance_id, r.variant): r for r in reports}
    unmatched = sorted(set(by_key) ^ set(rep))
    if unmatched:
        shown = ", ".join(f"{u}/{v}" for u, v in unmatched[:10])
        more = f" (+{len(unmatched) - 10} more)" if len(unmatched) > 10 else ""
        raise ValueError(f"unmatched (utterance, variant) keys: {shown}{more}")
    keys = sorted(by_key)
    y = [by_key[k] for k in keys]
    return {m: pearson(y, [rep[k].value(m) for k in keys]) for m in metrics}


# --- full analysis ---

def level_of(variant_id: str, group_of: Mapping[Tuple[str, str], int], utterance_id: str) -> Optional[str]:
    if variant_id == DETERMINISTIC:
        return "det"
    g = group_of.get((utterance_id, variant_id))
    return None if g is None else str(g)


@dataclass
class AnalysisTables:
    contrasts: RegressionResult
    vs_chance: RegressionResult
    group_means: List[Tuple[str, float, float, float]]
    mirrored_means: List[Tuple[str, float, float, float]]
    mirrored_vs_chance: Optional[RegressionResult]
    per_utterance: Dict[str, List[float]]
    groups: List[QualityGroup]


def _contrast_names(levels: Sequence[str]) -> List[str]:
    names = ["(Intercept)"]
    for prev, cur in zip(levels[:-1], levels[1:]):
        a = "det." if prev == "det" else prev
        names.append(f"Group {cur} vs. {a}")
    return names


def analyze(records: Sequence[AnnotationRecord], replicates: int = 10_000, seed: int = 0,
            ci_replicates: int = 10_000) -> AnalysisTables:
    """Group ranking, sliding-difference contrasts, per-level tests against 0.5 and bootstrap CIs."""
    scores = aggregate_scores(records)
    groups = rank_and_group(scores)
    group_of = {m: g.index for g in groups for m in g.members}
    has_det = any(s.variant_id == DETERMINISTIC for s in scores)
    levels = (["det"] if has_det else []) + [str(g) for g in range(len(groups))]

    y, labels, clusters = [], [], []
    for r in records:
        lvl = level_of(r.variant_id, group_of, r.utterance_id)
        if lvl is None:
            continue
        y.append(r.outcome)
        labels.append(lvl)
        clusters.append(r.utterance_id)

    contrasts = logistic_regression(y, design_rows(labels, levels, "sliding"), clusters,
                                    names=_contrast_names(levels), replicates=replicates, seed=seed)
    vs_chance = logistic_regression(y, design_rows(labels, levels, "cell"), clusters,
                                    names=[f"{l} vs. 0.5" for l in levels], replicates=replicates, seed=seed)

    per_utt: Dict[str, List[float]] = defaultdict(list)
    for s in scores:
        lvl = level_of(s.variant_id, group_of, s.utterance_id)
        if lvl is not None:
            per_utt[lvl].append(s.score)
        elif _MIRROR_RE.match(s.variant_id):
            per_utt[s.variant_id].append(s.score)

    def summarize(names):
        rows = []
        for i, lvl in enumerate(names):
            vals = per_utt[lvl]
            lo, hi = bootstrap_ci(vals, replicates=ci_replicates, seed=seed + i) if len(vals) >= 2 else (math.nan, math.nan)
            rows.append((lvl, float(np.mean(vals)), lo, hi))
        return rows

    mirror_levels = sorted(v for v in per_utt if _MIRROR_RE.match(v))
    mirrored_vs_chance = None
    if mirror_levels:
        my, ml, mc = [], [], []
        for r in records:
            if _MIRROR_RE.match(r.variant_id):
                my.append(r.outcome)
                ml.append(r.variant_id)
                mc.append(r.utterance_id)
        mirrored_vs_chance = logistic_regression(
            my, np.ones((len(my), 1)), mc, names=["mirrored vs. 0.5"], replicates=replicates, seed=seed)
    return AnalysisTables(contrasts, vs_chance, summarize(levels), summarize(mirror_levels),
                          mirrored_vs_chance, dict(per_utt), groups)


# --- simulated raters for synthetic corpora ---

def _speed(frames: np.ndarray) -> float:
    return float(np.mean(np.abs(np.diff(frames, axis=0)))) + 1e-6


def simulate_annotations(pairs: Mapping[Tuple[str, str], Tuple[np.ndarray, np.ndarray]],
                         n_raters: int = 15, seed: int = 0, slope: float = 2.0,
                         utterance_sd: float = 0.3) -> List[AnnotationRecord]:
    """Simulated forced-choice raters for (utterance, variant) -> (ground truth, generated) pose pairs.

    A rater prefers the ground truth with probability
    ``sigmoid(slope * tanh|log(speed_gen / speed_gt)| + u_utt)``: raters react to
    how lively the motion is, not to where it points, so a mirrored clip
    scores near 0.5 despite its large MAE.
    """
    rng = np.random.default_rng(seed)
    utt_effect = {u: rng.normal(0.0, utterance_sd) for u in sorted({u for u, _ in pairs})}
    out = []
    for (utt, variant) in sorted(pairs):
        gt, gen = pairs[(utt, variant)]
        gap = abs(math.log(_speed(np.asarray(gen)) / _speed(np.asarray(gt))))
        prob = 1.0 / (1.0 + math.exp(-(slope * math.tanh(gap) + utt_effect[utt])))
        for k in range(n_raters):
            choice = "ground_truth" if rng.random() < prob else "generated"
            out.append(AnnotationRecord(utt, variant, f"rater_{k:02d}", choice))
    return out
