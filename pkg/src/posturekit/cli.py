"""Command-line surface: simulate, segment, train, predict, evaluate, cv,
features dump.

Exit codes: 0 success, 2 usage error, 3 data error. Data errors are emitted
as JSON lines on stderr so batch drivers can parse failures.
"""

from __future__ import annotations

import concurrent.futures
import dataclasses
import functools
import json
import logging
import re
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from . import forest as forest_mod
from . import nonwear as nonwear_mod
from .config import AppConfig, load_config
from .core import DailyFile, DataError, PostureLabel, Segment, grid_to_runs, labels_to_grid
from .features import FEATURE_NAMES, MIN_SEGMENT_SAMPLES, extract
from .forest import MODEL_FORMAT_VERSION, ForestConfig, load_model, save_model
from .ingest import (
    extract_bout_tuples,
    read_accel_csv,
    read_event_csv,
    write_accel_csv,
    write_event_csv,
)
from .metrics import (
    Ecdf,
    bout_length_ecdf,
    confusion,
    ks_two_sample,
    rates,
    sit_to_step_error,
    total_sitting_time,
)
from .pipeline import (
    PostConfig,
    cv_stage1,
    cv_stage2,
    predict_daily,
    training_samples,
)
from .changepoint import detect_daily
from .postprocess import long_stand_fraction
from .simulate import SimConfig, simulate_cohort

log = logging.getLogger("posturekit")

_EPOCH_RE = re.compile(r"^(?P<pid>.+)_e(?P<epoch>\d+)_accel\.csv$")


def _emit_data_error(message: str) -> None:
    sys.stderr.write(json.dumps({"kind": "data", "error": message}) + "\n")


def _data_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except DataError as exc:
            _emit_data_error(str(exc))
            sys.exit(3)
        except FileNotFoundError as exc:
            _emit_data_error(f"file not found: {exc.filename}")
            sys.exit(3)

    return wrapper


_config_options = [
    click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
                 default=None, help="YAML config file."),
    click.option("--set", "overrides", multiple=True, metavar="SECTION.KEY=VALUE",
                 help="Override a config key (repeatable)."),
]


def _with_config(fn):
    for opt in reversed(_config_options):
        fn = opt(fn)
    return fn


def _app_config(config_path, overrides) -> AppConfig:
    try:
        return load_config(config_path, tuple(overrides))
    except DataError as exc:
        raise click.UsageError(str(exc)) from exc


@click.group()
@click.version_option(
    __version__, message=f"posturekit %(version)s (model format v{MODEL_FORMAT_VERSION})"
)
@click.option("-v", "--verbose", count=True, help="-v info, -vv debug.")
def main(verbose: int):
    """Posture classification for hip-worn triaxial accelerometer data."""
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbose, logging.DEBUG)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@click.option("--participants", type=int, default=1, show_default=True)
@click.option("--epochs", type=int, default=1, show_default=True)
@click.option("--duration-s", type=float, default=3600.0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--sample-rate", type=float, default=30.0, show_default=True)
@_data_errors
def simulate(out_dir, participants, epochs, duration_s, seed, sample_rate):
    """Write a ground-truthed synthetic corpus (accel + truth CSV per epoch)."""
    cfg = SimConfig(seed=seed, duration_s=duration_s, sample_rate_hz=sample_rate)
    files, params = simulate_cohort(cfg, participants, epochs)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for d in files:
        stem = f"{d.participant_id}_e{d.epoch_index:02d}"
        write_accel_csv(out / f"{stem}_accel.csv", d.series)
        write_event_csv(out / f"{stem}_truth.csv", d.truth)
        log.info("wrote epoch %s (%.0f s)", stem, d.series.duration_s)
    manifest = {
        "seed": seed,
        "duration_s": duration_s,
        "sample_rate_hz": sample_rate,
        "participants": participants,
        "epochs_per_participant": epochs,
        "epochs": params,
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    click.echo(f"wrote {len(files)} epochs to {out}")


def _wear_epochs(d: DailyFile, cfg: AppConfig) -> list[DailyFile]:
    """Split one recording at detected non-wear; short series pass through."""
    try:
        counts = nonwear_mod.minute_counts(d.series)
    except DataError:
        return [d]
    intervals = nonwear_mod.detect_nonwear(
        counts,
        window_min=cfg.nonwear.window_min,
        tolerance_min=cfg.nonwear.tolerance_min,
        guard_min=cfg.nonwear.guard_min,
        epsilon=cfg.nonwear.epsilon,
    )
    return nonwear_mod.remove_nonwear(d, intervals)


@main.command()
@click.option("--accel", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
@_with_config
@_data_errors
def segment(accel, out_path, config_path, overrides):
    """Run non-wear removal + changepoint detection; emit a changepoint CSV."""
    cfg = _app_config(config_path, overrides)
    series = read_accel_csv(accel)
    base = DailyFile(Path(accel).stem, 1, series)
    cuts = set()
    for epoch in _wear_epochs(base, cfg):
        offset = series.index_at(epoch.series.start_time)
        for seg in detect_daily(epoch, cfg.cpd):
            cuts.add(offset + seg.start_idx)
        cuts.add(offset + epoch.series.n_samples)
    with open(out_path, "w") as fh:
        fh.write("index,time\n")
        for idx in sorted(cuts):
            fh.write(f"{idx},{series.time_at(idx):.4f}\n")
    click.echo(f"wrote {len(cuts)} changepoints to {out_path}")


def _load_corpus(corpus_dir, require_truth=True) -> list[DailyFile]:
    out = []
    corpus = Path(corpus_dir)
    for accel_path in sorted(corpus.glob("*_accel.csv")):
        m = _EPOCH_RE.match(accel_path.name)
        if not m:
            continue
        truth_path = corpus / f"{m['pid']}_e{m['epoch']}_truth.csv"
        truth = None
        if truth_path.exists():
            truth = read_event_csv(truth_path)
        elif require_truth:
            raise DataError(f"missing truth file for {accel_path.name}")
        series = read_accel_csv(accel_path)
        out.append(DailyFile(m["pid"], int(m["epoch"]), series, truth))
    if not out:
        raise DataError(f"no corpus epochs found in {corpus_dir}")
    return out


@main.command()
@click.option("--corpus", "corpus_dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--model", "model_path", type=click.Path(dir_okay=False), required=True)
@click.option("--seed", type=int, default=None, help="Override forest.seed.")
@click.option("--holdout/--no-holdout", default=False, show_default=True,
              help="Hold out 1/3 of participants and report test error rates.")
@_with_config
@_data_errors
def train(corpus_dir, model_path, seed, holdout, config_path, overrides):
    """Train the stage-1 forest on ground-truth bouts and persist the model."""
    cfg = _app_config(config_path, overrides)
    fcfg = cfg.forest if seed is None else ForestConfig(
        seed=seed, trees=cfg.forest.trees, mtry=cfg.forest.mtry,
        max_depth=cfg.forest.max_depth, min_leaf=cfg.forest.min_leaf,
    )
    files = _load_corpus(corpus_dir)
    samples, ids = training_samples(files)
    summary = {"n_samples": len(samples), "n_participants": len(set(ids))}

    if holdout:
        pairs = list(zip(samples, ids))
        train_pairs, test_pairs = forest_mod.split_by_participant(
            pairs, ids, seed=fcfg.seed
        )
        model = forest_mod.train([s for s, _ in train_pairs], fcfg)
        x_test = np.vstack([s[0].values for s, _ in test_pairs])
        y_test = np.array([s[1] for s, _ in test_pairs])
        y_pred, _ = forest_mod.predict_batch(model, x_test)
        summary["holdout"] = forest_mod.error_rates(y_test, y_pred)
        summary["holdout"]["n_test_samples"] = len(y_test)
    else:
        model = forest_mod.train(samples, fcfg)

    save_model(model, model_path)
    summary["oob_accuracy"] = model.oob_accuracy
    fractions = [
        f for f in (long_stand_fraction(d.truth) for d in files if d.truth) if f is not None
    ]
    summary["truth_stand_over_3min_fraction"] = (
        float(np.mean(fractions)) if fractions else None
    )
    summary["model"] = str(model_path)
    click.echo(json.dumps(summary, indent=2, sort_keys=True))


def _predict_one(accel_path: str, model_path: str, cfg: AppConfig, out_dir: str) -> list[str]:
    series = read_accel_csv(accel_path)
    stem = Path(accel_path).stem
    if stem.endswith("_accel"):
        stem = stem[: -len("_accel")]
    model = load_model(model_path)
    base = DailyFile(stem, 1, series)
    epochs = _wear_epochs(base, cfg)
    written = []
    for d in epochs:
        events = predict_daily(d, model, cfg.cpd, cfg.stage2, cfg.post)
        suffix = "" if len(epochs) == 1 else f"_e{d.epoch_index:02d}"
        path = Path(out_dir) / f"{stem}{suffix}_pred.csv"
        write_event_csv(path, events)
        written.append(str(path))
    return written


@main.command()
@click.option("--accel", "accel_paths", type=click.Path(exists=True, dir_okay=False),
              multiple=True, required=True, help="Accel CSV (repeatable).")
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@click.option("--jobs", type=int, default=None, help="Parallel workers (default io.jobs).")
@_with_config
@_data_errors
def predict(accel_paths, model_path, out_dir, jobs, config_path, overrides):
    """Full pipeline per file: segment, classify, correct; emit event CSVs."""
    cfg = _app_config(config_path, overrides)
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    n_jobs = jobs if jobs is not None else cfg.io.jobs
    if n_jobs > 1 and len(accel_paths) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(
                _predict_worker,
                [(p, model_path, cfg, out_dir) for p in accel_paths],
            ))
    else:
        results = [_predict_one(p, model_path, cfg, out_dir) for p in accel_paths]
    for written in results:
        for path in written:
            click.echo(path)


def _predict_worker(args):
    return _predict_one(*args)


def _participant_key(stem: str) -> str:
    m = re.match(r"^(?P<pid>.+)_e\d+$", stem)
    return m["pid"] if m else stem


def _pair_stem(path: str) -> str:
    stem = Path(path).stem
    for suffix in ("_pred", "_truth", "_accel"):
        if stem.endswith(suffix):
            return stem[: -len(suffix)]
    return stem


@main.command()
@click.option("--pred", "pred_paths", type=click.Path(exists=True, dir_okay=False),
              multiple=True, required=True, help="Predicted event CSV (repeatable).")
@click.option("--truth", "truth_paths", type=click.Path(exists=True, dir_okay=False),
              multiple=True, required=True, help="Truth event CSV (repeatable, same order).")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@click.option("--figures/--no-figures", default=True, show_default=True)
@_with_config
@_data_errors
def evaluate(pred_paths, truth_paths, out_dir, figures, config_path, overrides):
    """Score predictions against truth; emit CSVs, a JSON summary, and figures."""
    cfg = _app_config(config_path, overrides)
    if len(pred_paths) != len(truth_paths):
        raise click.UsageError("--pred and --truth must be given the same number of times")
    res = cfg.io.resolution_s
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    total_cm = None
    sit_errors = []
    by_participant: dict[str, dict] = {}
    pred_durations, truth_durations = [], []
    for pred_path, truth_path in zip(pred_paths, truth_paths):
        pred_log = read_event_csv(pred_path)
        truth_log = read_event_csv(truth_path)
        pred_grid = labels_to_grid(pred_log, res)
        truth_grid = labels_to_grid(truth_log, res)
        n = min(len(pred_grid), len(truth_grid))
        cm = confusion(pred_grid[:n], truth_grid[:n])
        total_cm = cm if total_cm is None else total_cm + cm

        pred_segs = [
            Segment(a, b, PostureLabel(v)) for a, b, v in grid_to_runs(pred_grid[:n])
        ]
        err = sit_to_step_error(pred_segs, truth_grid[:n])
        if err is not None:
            sit_errors.append(err)

        key = _participant_key(_pair_stem(pred_path))
        entry = by_participant.setdefault(
            key, {"participant": key, "pred_sit_s": 0.0, "true_sit_s": 0.0}
        )
        entry["pred_sit_s"] += total_sitting_time(pred_log)
        entry["true_sit_s"] += total_sitting_time(truth_log)

        for ev in pred_log.events:
            if ev.label == PostureLabel.SIT and ev.duration_s > 180.0:
                pred_durations.append(ev.duration_s)
        for ev in truth_log.events:
            if ev.label == PostureLabel.SIT and ev.duration_s > 180.0:
                truth_durations.append(ev.duration_s)

    rate_map = rates(total_cm)
    ks = None
    if pred_durations and truth_durations:
        ks = ks_two_sample(Ecdf(np.array(pred_durations)), Ecdf(np.array(truth_durations)))

    participants = sorted(by_participant.values(), key=lambda r: r["participant"])
    for row in participants:
        row["rel_error"] = (
            (row["pred_sit_s"] - row["true_sit_s"]) / row["true_sit_s"]
            if row["true_sit_s"] > 0 else None
        )

    _write_confusion_csv(out / "confusion.csv", total_cm, res)
    with open(out / "totals.csv", "w") as fh:
        fh.write("participant,pred_sit_s,true_sit_s,rel_error\n")
        for r in participants:
            rel = "" if r["rel_error"] is None else f"{r['rel_error']:.6f}"
            fh.write(f"{r['participant']},{r['pred_sit_s']:.1f},{r['true_sit_s']:.1f},{rel}\n")
    _write_ecdf_csv(out / "ecdf.csv", pred_durations, truth_durations)

    summary = {
        "files": len(pred_paths),
        "resolution_s": res,
        "confusion": {"tp": total_cm.tp, "fp": total_cm.fp,
                      "fn": total_cm.fn, "tn": total_cm.tn},
        "rates": rate_map,
        "sit_to_step_error_mean": float(np.mean(sit_errors)) if sit_errors else None,
        "ks": {"d": ks[0], "p": ks[1]} if ks else None,
        "per_participant": participants,
    }
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)

    if figures:
        from . import report

        if ks is not None:
            report.save_ecdf_figure(
                Ecdf(np.array(pred_durations)), Ecdf(np.array(truth_durations)),
                out / "ecdf_comparison.png", ks=ks,
            )
        if participants:
            report.save_totals_figure(participants, out / "sitting_totals.png")
    click.echo(json.dumps({k: summary[k] for k in ("rates", "ks")}, sort_keys=True))


def _write_confusion_csv(path, cm, resolution_s: float) -> None:
    to_s = resolution_s
    with open(path, "w") as fh:
        fh.write("prediction,sitting_truth_s,non_sitting_truth_s,total_s\n")
        fh.write(f"sitting,{cm.tp * to_s:.1f},{cm.fp * to_s:.1f},{(cm.tp + cm.fp) * to_s:.1f}\n")
        fh.write(f"non_sitting,{cm.fn * to_s:.1f},{cm.tn * to_s:.1f},{(cm.fn + cm.tn) * to_s:.1f}\n")
        fh.write(
            f"total,{(cm.tp + cm.fn) * to_s:.1f},{(cm.fp + cm.tn) * to_s:.1f},"
            f"{(cm.tp + cm.fp + cm.fn + cm.tn) * to_s:.1f}\n"
        )


def _write_ecdf_csv(path, pred_durations, truth_durations) -> None:
    with open(path, "w") as fh:
        fh.write("source,duration_s,cum_fraction\n")
        for name, durations in (("pred", pred_durations), ("truth", truth_durations)):
            if not durations:
                continue
            ecdf = Ecdf(np.array(durations))
            for x in ecdf.points:
                fh.write(f"{name},{x:.1f},{float(ecdf(x)):.6f}\n")


@main.command()
@click.option("--corpus", "corpus_dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
@click.option("--window-widths", default="1800", show_default=True,
              help="Comma-separated window widths (samples).")
@click.option("--min-seg-lens", default="450", show_default=True,
              help="Comma-separated minimum segment lengths (samples).")
@click.option("--alphas", default="0.05", show_default=True)
@click.option("--stand-thresholds", default="600", show_default=True,
              help="Comma-separated stand thresholds (seconds).")
@_with_config
@_data_errors
def cv(corpus_dir, out_path, window_widths, min_seg_lens, alphas, stand_thresholds,
       config_path, overrides):
    """Leave-one-participant-out grid search for the pipeline tunables."""
    cfg = _app_config(config_path, overrides)

    def parse(text, cast):
        try:
            return [cast(v) for v in text.split(",") if v.strip()]
        except ValueError:
            raise click.UsageError(f"bad grid value in {text!r}") from None

    wws = parse(window_widths, int)
    msls = parse(min_seg_lens, int)
    for ww in wws:
        for msl in msls:
            if ww < 2 * msl:
                raise click.UsageError(
                    f"invalid grid cell: window_width {ww} < 2 * min_seg_len {msl}"
                )
    files = _load_corpus(corpus_dir)
    stage1 = cv_stage1(files, wws, msls, cfg.cpd, cfg.forest)
    best_cpd = dataclasses.replace(
        cfg.cpd,
        window_width=int(stage1["best"]["window_width"]),
        min_seg_len=int(stage1["best"]["min_seg_len"]),
    )
    stage2 = cv_stage2(
        files, parse(alphas, float), parse(stand_thresholds, float),
        best_cpd, cfg.forest, cfg.io.resolution_s,
    )
    doc = {"stage1": stage1, "stage2": stage2}
    with open(out_path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
    click.echo(json.dumps({"best_stage1": stage1["best"], "best_stage2": stage2["best"]},
                          sort_keys=True))


@main.group()
def features():
    """Feature-extraction utilities."""


@features.command("dump")
@click.option("--accel", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--truth", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Segment by ground-truth bouts instead of changepoints.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
@_with_config
@_data_errors
def features_dump(accel, truth, out_path, config_path, overrides):
    """Emit a per-segment feature CSV with the 23 frozen feature columns."""
    cfg = _app_config(config_path, overrides)
    series = read_accel_csv(accel)
    if truth is not None:
        d = DailyFile(Path(accel).stem, 1, series, read_event_csv(truth))
        segments = [seg.with_label(lab) for seg, lab in extract_bout_tuples(d)]
    else:
        d = DailyFile(Path(accel).stem, 1, series)
        segments = detect_daily(d, cfg.cpd)
    n_skipped = 0
    with open(out_path, "w") as fh:
        fh.write("start_idx,end_idx,label," + ",".join(FEATURE_NAMES) + "\n")
        for seg in segments:
            if seg.n_samples < MIN_SEGMENT_SAMPLES:
                n_skipped += 1
                continue
            fv = extract(series, seg)
            lab = "" if seg.label is None else str(int(seg.label))
            vals = ",".join(f"{v:.9g}" for v in fv.values)
            fh.write(f"{seg.start_idx},{seg.end_idx},{lab},{vals}\n")
    if n_skipped:
        log.info("skipped %d segments below %d samples", n_skipped, MIN_SEGMENT_SAMPLES)
    click.echo(f"wrote features for {len(segments) - n_skipped} segments to {out_path}")


if __name__ == "__main__":
    main()
