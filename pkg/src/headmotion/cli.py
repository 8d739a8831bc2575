"""Command-line entry point: ``headmotion <subcommand> ...``.

Every subcommand writes into ``--out DIR`` and drops a ``config.json`` with
the exact arguments used.  Exit status is 0 on success, 1 on a domain error
(one-line diagnostic on stderr) and 2 on bad usage.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import acoustic, dataset, diversity, metrics, perceptual, plotting, seqmodel, trainer
from .motion import Axis, PoseSequence, mirror, read_pose_csv, write_pose_csv

logger = logging.getLogger("headmotion")

# per-stage seed offsets used by ``pipeline``: derive_seed(--seed, STAGE)
STAGES = {"corpus": 0, "split": 1, "train_det": 2, "train_stoch": 3, "sample": 4,
          "annotations": 5, "analysis": 6}


class CliError(Exception):
    pass


# --- helpers ---

def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_config(out: Path, args) -> None:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    (out / "config.json").write_text(json.dumps(cfg, indent=1, sort_keys=True, default=str) + "\n")


def _manifest(args) -> tuple:
    path = Path(args.manifest)
    if path.is_dir():
        path = path / "manifest.json"
    return dataset.Manifest.load(path), path.parent


def _utterances(manifest: dataset.Manifest, split: str) -> List[dict]:
    utts = manifest.utterances_in(split)
    if not utts:
        raise CliError(f"no utterances in split {split!r}")
    return utts


def _examples(manifest, root: Path, features_dir: Path, split: str) -> List[trainer.Example]:
    out = []
    for u in manifest.utterances_in(split):
        feats = acoustic.read_features(features_dir / f"{u['utterance_id']}.hmf")
        poses = read_pose_csv(root / u["pose"])
        out.append(trainer.Example(feats.frames, poses.frames))
    return out


def _load_predictions(pred_dir: Path, utterances: Sequence[dict]) -> Dict[tuple, PoseSequence]:
    preds = {}
    for u in utterances:
        d = pred_dir / u["utterance_id"]
        if not d.is_dir():
            continue
        for f in sorted(d.glob("*.csv")):
            preds[(u["utterance_id"], f.stem)] = read_pose_csv(f)
    return preds


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


# --- subcommands ---

def cmd_synth_data(args) -> None:
    out = _out_dir(args)
    videos = dataset.generate_synthetic_corpus(args.videos, args.seed, out, args.min_seconds, args.max_seconds)
    _write_config(out, args)
    print(f"wrote {len(videos)} synthetic videos to {out}")


def cmd_segment(args) -> None:
    out = _out_dir(args)
    videos = dataset.load_corpus(args.corpus)
    manifest = dataset.build_manifest(videos, out, seed=args.seed)
    _write_config(out, args)
    counts = {s: len(manifest.utterances_in(s)) for s in dataset.SPLITS}
    print("utterances: " + ", ".join(f"{s}={n}" for s, n in counts.items()))


def cmd_fit_normalizer(args) -> None:
    out = _out_dir(args)
    manifest, _ = _manifest(args)
    cache: dict = {}
    specs = [acoustic.mel_spectrogram(dataset.utterance_audio(manifest, u, cache))
             for u in _utterances(manifest, "train")]
    acoustic.fit_normalizer(specs).save(out / "normalizer.json")
    _write_config(out, args)


def cmd_extract_features(args) -> None:
    out = _out_dir(args)
    manifest, _ = _manifest(args)
    norm = acoustic.FeatureNormalizer.load(args.normalizer)
    cache: dict = {}
    for u in manifest.utterances:
        spec = acoustic.mel_spectrogram(dataset.utterance_audio(manifest, u, cache))
        feats = acoustic.featurize(spec, norm, mode=args.mode)
        if len(feats) != dataset.UTTERANCE_FRAMES:
            raise CliError(f"{u['utterance_id']}: {len(feats)} feature frames, expected {dataset.UTTERANCE_FRAMES}")
        acoustic.write_features(out / f"{u['utterance_id']}.hmf", feats)
        if args.csv:
            acoustic.write_features_csv(out / f"{u['utterance_id']}.csv", feats)
    _write_config(out, args)


def cmd_train(args) -> None:
    out = _out_dir(args)
    manifest, root = _manifest(args)
    features = Path(args.features)
    train_data = _examples(manifest, root, features, "train")
    val_data = _examples(manifest, root, features, "val")
    cfg = trainer.TrainConfig(learning_rate=args.lr, epochs=args.epochs, seed=args.seed,
                              clip_norm=5.0 if args.clip else None)
    if args.sweep:
        mc, params, results = trainer.hyperparameter_sweep(cfg, train_data, val_data, stochastic=args.stochastic)
        _write_csv(out / "sweep.csv", ["layers", "hidden", "val_loss"],
                   [(c.num_layers, c.hidden_size, v) for c, v in results])
        _, history = trainer.train(cfg, mc, train_data, val_data)
    else:
        mc = seqmodel.ModelConfig(num_layers=args.layers, hidden_size=args.hidden, stochastic=args.stochastic)
        params, history = trainer.train(cfg, mc, train_data, val_data)
    params.save(out / "checkpoint.json")
    (out / "history.csv").write_text(history.to_csv())
    _write_config(out, args)
    print(f"trained {'stochastic' if mc.stochastic else 'deterministic'} model "
          f"({mc.num_layers} layers, {mc.hidden_size} hidden); best epoch {history.best_epoch}")


def cmd_predict(args) -> None:
    out = _out_dir(args)
    params = seqmodel.ModelParams.load(args.checkpoint)
    if params.config.stochastic:
        raise CliError("model is stochastic; use `sample`")
    manifest, _ = _manifest(args)
    for u in _utterances(manifest, args.split):
        feats = acoustic.read_features(Path(args.features) / f"{u['utterance_id']}.hmf")
        write_pose_csv(out / u["utterance_id"] / "deterministic.csv", seqmodel.forward_deterministic(params, feats))
    _write_config(out, args)


def cmd_sample(args) -> None:
    params = seqmodel.ModelParams.load(args.checkpoint)
    if not params.config.stochastic:
        raise CliError("model not stochastic")
    out = _out_dir(args)
    manifest, _ = _manifest(args)
    for n, u in enumerate(_utterances(manifest, args.split)):
        feats = acoustic.read_features(Path(args.features) / f"{u['utterance_id']}.hmf")
        samples = seqmodel.generate_k_samples(params, feats, args.k, seed=seqmodel.derive_seed(args.seed, n))
        for i, s in enumerate(samples):
            write_pose_csv(out / u["utterance_id"] / f"sample_{i}.csv", s)
    _write_config(out, args)


def cmd_mirror(args) -> None:
    out = _out_dir(args)
    manifest, root = _manifest(args)
    axes = list(Axis) if args.axis == "all" else [Axis.parse(args.axis)]
    for u in _utterances(manifest, args.split):
        poses = read_pose_csv(root / u["pose"])
        for a in axes:
            write_pose_csv(out / u["utterance_id"] / f"mirrored_{a.name.lower()}.csv", mirror(poses, a))
    _write_config(out, args)


def cmd_evaluate(args) -> None:
    out = _out_dir(args)
    manifest, root = _manifest(args)
    utts = _utterances(manifest, args.split)
    reports = []
    for pred_dir in args.predictions:
        preds = _load_predictions(Path(pred_dir), utts)
        for (utt, variant), seq in sorted(preds.items()):
            gt = read_pose_csv(root / next(u["pose"] for u in utts if u["utterance_id"] == utt))
            reports.append(metrics.evaluate_pair(utt, variant, gt, seq))
    if not reports:
        raise CliError("no predictions found")
    reports.sort(key=lambda r: (r.utterance_id, r.variant))
    metrics.write_reports(out / "metrics.csv", reports)
    _write_config(out, args)


def _select_variants(preds: Dict[tuple, PoseSequence], which: str) -> List[PoseSequence]:
    if which == "samples":
        keep = [k for k in preds if k[1].startswith("sample_")]
    else:
        keep = [k for k in preds if k[1] == which]
    return [preds[k] for k in sorted(keep)]


def cmd_diversity(args) -> None:
    out = _out_dir(args)
    manifest, root = _manifest(args)
    train = [read_pose_csv(root / u["pose"]) for u in _utterances(manifest, "train")]
    index = diversity.fit_nn_index(train)
    preds = _load_predictions(Path(args.predictions), _utterances(manifest, args.split))
    selected = _select_variants(preds, args.variants)
    if not selected:
        raise CliError(f"no predictions for variants {args.variants!r}")
    hist = diversity.classify(index, selected)
    score = diversity.shannon_index(hist)
    hist.to_csv(out / "histogram.csv")
    report = {"variants": args.variants, "diversity_bits": score, "n_predictions": hist.total,
              "index_size": len(index)}
    (out / "report.json").write_text(json.dumps(report, indent=1, sort_keys=True) + "\n")
    _write_config(out, args)
    print(f"diversity ({args.variants}): {score:.4f} bits over {hist.total} predictions")


def cmd_synth_annotations(args) -> None:
    out = _out_dir(args)
    manifest, root = _manifest(args)
    utts = _utterances(manifest, args.split)
    pairs = {}
    for pred_dir in args.predictions:
        for (utt, variant), seq in _load_predictions(Path(pred_dir), utts).items():
            gt = read_pose_csv(root / next(u["pose"] for u in utts if u["utterance_id"] == utt))
            pairs[(utt, variant)] = (gt.frames, seq.frames)
    if not pairs:
        raise CliError("no predictions found")
    records = perceptual.simulate_annotations(pairs, n_raters=args.raters, seed=args.seed)
    perceptual.write_annotations(out / "annotations.csv", records)
    _write_config(out, args)


def cmd_ingest(args) -> None:
    out = _out_dir(args)
    records = perceptual.read_annotations(args.annotations)
    perceptual.write_scores(out / "scores.csv", perceptual.aggregate_scores(records))
    _write_config(out, args)


def _contrast_rows(result: perceptual.RegressionResult, skip_intercept: bool = False):
    return [(c.name, c.estimate, c.std_error, c.z, c.p) for c in result.contrasts
            if not (skip_intercept and c.name == "(Intercept)")]


def cmd_analyze(args) -> None:
    out = _out_dir(args)
    records = perceptual.read_annotations(args.annotations)
    tables = perceptual.analyze(records, replicates=args.replicates, seed=args.seed,
                                ci_replicates=args.ci_replicates)
    header = ["contrast", "estimate", "std_error", "z", "p"]
    _write_csv(out / "table1.csv", header, _contrast_rows(tables.contrasts, skip_intercept=True))
    _write_csv(out / "levels_vs_chance.csv", header, _contrast_rows(tables.vs_chance))
    _write_csv(out / "figure2.csv", ["group", "mean_score", "ci_low", "ci_high"], tables.group_means)
    _write_csv(out / "figure2_points.csv", ["group", "score"],
               [(g, s) for g, *_ in tables.group_means for s in tables.per_utterance[g]])
    group_rows = [(g.index, u, v) for g in tables.groups for u, v in g.members]
    _write_csv(out / "groups.csv", ["group", "utterance_id", "variant_id"], group_rows)
    plotting.plot_group_means(tables.group_means, tables.per_utterance, out / "figure2.png")
    if tables.mirrored_means:
        _write_csv(out / "figure3.csv", ["group", "mean_score", "ci_low", "ci_high"], tables.mirrored_means)
        _write_csv(out / "mirrored_vs_chance.csv", header, _contrast_rows(tables.mirrored_vs_chance))
        plotting.plot_group_means(tables.mirrored_means, tables.per_utterance, out / "figure3.png",
                                  xlabel="mirrored axis")

    if args.metrics:
        scores = [s for s in perceptual.aggregate_scores(records)
                  if s.variant_id == perceptual.DETERMINISTIC or s.variant_id.startswith("sample_")]
        keys = {s.key for s in scores}
        reports = [r for r in metrics.read_reports(args.metrics) if (r.utterance_id, r.variant) in keys]
        corr = perceptual.correlate_with_metrics(scores, reports)
        _write_csv(out / "correlations.csv", ["metric", "r", "p"], [(m, c.r, c.p) for m, c in corr.items()])
        cols = {m: [r.value(m) for r in sorted(reports, key=lambda r: (r.utterance_id, r.variant))]
                for m in metrics.METRIC_COLUMNS}
        pairs = [(a, b) for i, a in enumerate(metrics.METRIC_COLUMNS) for b in metrics.METRIC_COLUMNS[i + 1:]]
        _write_csv(out / "metric_pairs.csv", ["pair", "r", "p"],
                   [(f"{a}~{b}", *(lambda c: (c.r, c.p))(metrics.pearson(cols[a], cols[b]))) for a, b in pairs])
    _write_config(out, args)
    for c in tables.contrasts.contrasts:
        if c.name != "(Intercept)":
            print(f"{c.name:>18}: estimate={c.estimate:+.3f} se={c.std_error:.3f} z={c.z:+.2f} p={c.p:.4f}")


def cmd_grad_check(args) -> None:
    variants = [False, True] if args.both else [args.stochastic]
    results = []
    for stochastic in variants:
        mc = seqmodel.ModelConfig(num_layers=args.layers, hidden_size=args.hidden, stochastic=stochastic)
        err = trainer.gradient_check(mc, seed=args.seed, T=args.frames)
        results.append(err)
        print(f"{'stochastic' if stochastic else 'deterministic'}: max relative error {err:.3e}")
    if args.out:
        out = _out_dir(args)
        _write_csv(out / "grad_check.csv", ["variant", "max_relative_error"],
                   [("stochastic" if s else "deterministic", e) for s, e in zip(variants, results)])
        _write_config(out, args)
    if max(results) >= args.tolerance:
        raise CliError(f"gradient check failed: {max(results):.3e} >= {args.tolerance:g}")


def cmd_plot_data(args) -> None:
    out = _out_dir(args)
    manifest, root = _manifest(args)
    utts = _utterances(manifest, args.split)
    entry = utts[0] if args.utterance is None else next(
        (u for u in utts if u["utterance_id"] == args.utterance), None)
    if entry is None:
        raise CliError(f"utterance {args.utterance!r} not in split {args.split!r}")
    gt = read_pose_csv(root / entry["pose"]).frames
    preds = _load_predictions(Path(args.predictions), [entry])
    samples = [preds[(entry["utterance_id"], f"sample_{i}")].frames for i in range(args.k)
               if (entry["utterance_id"], f"sample_{i}") in preds]
    if len(samples) != args.k:
        raise CliError(f"expected {args.k} samples for {entry['utterance_id']}, found {len(samples)}")
    header = ["frame", "time"]
    for a in "xyz":
        header += [f"gt_{a}"] + [f"sample_{i}_{a}" for i in range(args.k)]
    rows = []
    for t in range(gt.shape[0]):
        row = [t, t / 25.0]
        for a in range(3):
            row += [float(gt[t, a])] + [float(s[t, a]) for s in samples]
        rows.append(row)
    _write_csv(out / "figure1.csv", header, rows)
    plotting.plot_trajectories(gt, samples, out / "figure1.png", title=entry["utterance_id"])
    if args.annotations:
        tables = perceptual.analyze(perceptual.read_annotations(args.annotations), replicates=args.replicates,
                                    seed=args.seed, ci_replicates=args.replicates)
        _write_csv(out / "figure2.csv", ["group", "mean_score", "ci_low", "ci_high"], tables.group_means)
        plotting.plot_group_means(tables.group_means, tables.per_utterance, out / "figure2.png")
        if tables.mirrored_means:
            _write_csv(out / "figure3.csv", ["group", "mean_score", "ci_low", "ci_high"], tables.mirrored_means)
            plotting.plot_group_means(tables.mirrored_means, tables.per_utterance, out / "figure3.png",
                                      xlabel="mirrored axis")
    _write_config(out, args)


def cmd_pipeline(args) -> None:
    """synth-data → segment → features → train (det + stoch) → sample/mirror → evaluate → diversity → analyze."""
    out = _out_dir(args)
    s = {name: seqmodel.derive_seed(args.seed, k) % (2**31) for name, k in STAGES.items()}
    p = lambda *parts: str(out.joinpath(*parts))  # noqa: E731
    model = ["--epochs", str(args.epochs), "--layers", str(args.layers), "--hidden", str(args.hidden)]
    steps = [
        ["synth-data", "--out", p("corpus"), "--videos", str(args.videos), "--seed", str(s["corpus"]),
         "--min-seconds", str(args.min_seconds), "--max-seconds", str(args.max_seconds)],
        ["segment", "--corpus", p("corpus"), "--out", p("data"), "--seed", str(s["split"])],
        ["fit-normalizer", "--manifest", p("data"), "--out", p("normalizer")],
        ["extract-features", "--manifest", p("data"), "--normalizer", p("normalizer", "normalizer.json"),
         "--out", p("features")],
        ["train", "--manifest", p("data"), "--features", p("features"), "--out", p("model_det"),
         "--seed", str(s["train_det"]), *model],
        ["train", "--manifest", p("data"), "--features", p("features"), "--out", p("model_stoch"),
         "--stochastic", "--seed", str(s["train_stoch"]), *model],
        ["predict", "--checkpoint", p("model_det", "checkpoint.json"), "--manifest", p("data"),
         "--features", p("features"), "--out", p("predictions")],
        ["sample", "--checkpoint", p("model_stoch", "checkpoint.json"), "--manifest", p("data"),
         "--features", p("features"), "--k", str(args.k), "--seed", str(s["sample"]), "--out", p("predictions")],
        ["mirror", "--manifest", p("data"), "--axis", "all", "--out", p("predictions")],
        ["evaluate", "--manifest", p("data"), "--predictions", p("predictions"), "--out", p("metrics")],
        ["diversity", "--manifest", p("data"), "--predictions", p("predictions"), "--variants", "deterministic",
         "--out", p("diversity_det")],
        ["diversity", "--manifest", p("data"), "--predictions", p("predictions"), "--variants", "samples",
         "--out", p("diversity_stoch")],
        ["synth-annotations", "--manifest", p("data"), "--predictions", p("predictions"),
         "--seed", str(s["annotations"]), "--out", p("annotations")],
        ["ingest-annotations", "--annotations", p("annotations", "annotations.csv"), "--out", p("scores")],
        ["analyze", "--annotations", p("annotations", "annotations.csv"), "--metrics", p("metrics", "metrics.csv"),
         "--replicates", str(args.replicates), "--ci-replicates", str(args.replicates),
         "--seed", str(s["analysis"]), "--out", p("report")],
        ["plot-data", "--manifest", p("data"), "--predictions", p("predictions"), "--k", str(args.k),
         "--out", p("report")],
    ]
    _write_config(out, args)
    for argv in steps:
        logger.info("pipeline: %s", " ".join(argv))
        code = main(argv)
        if code != 0:
            raise CliError(f"pipeline step `{argv[0]}` failed with exit code {code}")


# --- parser ---

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="headmotion", description="Speech-driven head motion workbench")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(func=func)
        return sp

    def model_flags(sp):
        sp.add_argument("--epochs", type=int, default=50)
        sp.add_argument("--layers", type=int, default=2, choices=(1, 2, 3))
        sp.add_argument("--hidden", type=int, default=64)

    sp = add("synth-data", cmd_synth_data, "write a synthetic audio + pose corpus")
    sp.add_argument("--out", required=True)
    sp.add_argument("--videos", type=int, default=16)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--min-seconds", type=int, default=30)
    sp.add_argument("--max-seconds", type=int, default=60)

    sp = add("segment", cmd_segment, "split videos and cut 10 s utterances")
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=0)

    sp = add("fit-normalizer", cmd_fit_normalizer, "fit per-bin z-score statistics on the training split")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--out", required=True)

    sp = add("extract-features", cmd_extract_features, "write 128-wide feature files per utterance")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--normalizer", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--mode", choices=("delta", "static"), default="delta")
    sp.add_argument("--csv", action="store_true", help="also write CSV copies for debugging")

    sp = add("train", cmd_train, "train a deterministic or noise-conditioned model")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--features", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--stochastic", action="store_true")
    sp.add_argument("--sweep", action="store_true", help="search layers {1,2,3} x hidden {16,32,64}")
    sp.add_argument("--lr", type=float, default=0.001)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--clip", action="store_true", help="clip gradient norm at 5.0")
    model_flags(sp)

    for name, func, help_ in (("predict", cmd_predict, "run a deterministic checkpoint"),
                              ("sample", cmd_sample, "draw k noise-conditioned samples per utterance")):
        sp = add(name, func, help_)
        sp.add_argument("--checkpoint", required=True)
        sp.add_argument("--manifest", required=True)
        sp.add_argument("--features", required=True)
        sp.add_argument("--split", default="test", choices=dataset.SPLITS)
        sp.add_argument("--out", required=True)
        if name == "sample":
            sp.add_argument("--k", type=int, default=10)
            sp.add_argument("--seed", type=int, default=0)

    sp = add("mirror", cmd_mirror, "write ground-truth poses mirrored about an axis")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--axis", required=True, choices=("x", "y", "z", "all"))
    sp.add_argument("--split", default="test", choices=dataset.SPLITS)
    sp.add_argument("--out", required=True)

    sp = add("evaluate", cmd_evaluate, "MAE, DTW and both Fréchet distances against ground truth")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--predictions", required=True, nargs="+")
    sp.add_argument("--split", default="test", choices=dataset.SPLITS)
    sp.add_argument("--out", required=True)

    sp = add("diversity", cmd_diversity, "nearest-neighbour Shannon index of predictions")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--predictions", required=True)
    sp.add_argument("--variants", default="samples", help="'samples' or a variant id such as 'deterministic'")
    sp.add_argument("--split", default="test", choices=dataset.SPLITS)
    sp.add_argument("--out", required=True)

    sp = add("synth-annotations", cmd_synth_annotations, "simulate forced-choice raters")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--predictions", required=True, nargs="+")
    sp.add_argument("--raters", type=int, default=15)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--split", default="test", choices=dataset.SPLITS)
    sp.add_argument("--out", required=True)

    sp = add("ingest-annotations", cmd_ingest, "average ratings into perceptual scores")
    sp.add_argument("--annotations", required=True)
    sp.add_argument("--out", required=True)

    sp = add("analyze", cmd_analyze, "ranking, regression contrasts, bootstrap CIs, metric correlations")
    sp.add_argument("--annotations", required=True)
    sp.add_argument("--metrics", default=None)
    sp.add_argument("--replicates", type=int, default=10_000)
    sp.add_argument("--ci-replicates", type=int, default=10_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)

    sp = add("grad-check", cmd_grad_check, "compare BPTT gradients with central finite differences")
    sp.add_argument("--layers", type=int, default=2)
    sp.add_argument("--hidden", type=int, default=8)
    sp.add_argument("--frames", type=int, default=10)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--stochastic", action="store_true")
    sp.add_argument("--both", action="store_true", help="check deterministic and stochastic configs")
    sp.add_argument("--tolerance", type=float, default=1e-4)
    sp.add_argument("--out", default=None)

    sp = add("plot-data", cmd_plot_data, "trajectory and group-mean tables plus rendered figures")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--predictions", required=True)
    sp.add_argument("--utterance", default=None)
    sp.add_argument("--k", type=int, default=10)
    sp.add_argument("--split", default="test", choices=dataset.SPLITS)
    sp.add_argument("--annotations", default=None)
    sp.add_argument("--replicates", type=int, default=10_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)

    sp = add("pipeline", cmd_pipeline, "run the whole synthetic experiment end to end")
    sp.add_argument("--out", required=True)
    sp.add_argument("--videos", type=int, default=16)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--k", type=int, default=10)
    sp.add_argument("--replicates", type=int, default=10_000)
    sp.add_argument("--min-seconds", type=int, default=30)
    sp.add_argument("--max-seconds", type=int, default=60)
    model_flags(sp)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (CliError, ValueError, RuntimeError, OSError, KeyError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"error: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
