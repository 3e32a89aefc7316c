"""End-to-end orchestration: training-sample assembly, per-file prediction,
and the leave-one-participant-out cross-validation grids.

The per-file prediction path is split in two so the cross-validation can
reuse the expensive part (segmentation + features + forest votes) while
re-running the cheap stage-2/postprocess tail per grid cell.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import forest as forest_mod
from . import stage2 as stage2_mod
from .changepoint import CpdConfig, choose_axis, detect_daily
from .core import DailyFile, DataError, EventLog, PostureLabel, Segment, labels_to_grid
from .features import MIN_SEGMENT_SAMPLES, FeatureVector, extract
from .forest import ForestConfig, ForestModel, StepClass
from .metrics import confusion, rates, sit_to_step_error
from .postprocess import bouts_to_events, finalize_bouts
from .stage2 import Stage2Config


@dataclass(frozen=True)
class PostConfig:
    stand_threshold_s: float = 600.0
    min_bout_samples: int = MIN_SEGMENT_SAMPLES


def truth_sample_grid(d: DailyFile) -> np.ndarray:
    """Per-sample true labels aligned with the series index space."""
    if d.truth is None:
        raise DataError("no ground truth")
    grid = labels_to_grid(d.truth, 1.0 / d.series.sample_rate_hz)
    t_n = d.series.n_samples
    if len(grid) > t_n:
        grid = grid[:t_n]
    elif len(grid) < t_n:
        grid = np.concatenate([grid, np.repeat(grid[-1], t_n - len(grid))])
    return grid


def training_samples(
    files: Sequence[DailyFile],
) -> Tuple[List[Tuple[FeatureVector, int]], List[str]]:
    """(feature, step-class) pairs from true bouts, with participant ids.

    Bouts shorter than the feature floor are skipped; labels collapse to
    stepping vs non-stepping for the stage-1 forest.
    """
    from .ingest import extract_bout_tuples

    samples: List[Tuple[FeatureVector, int]] = []
    ids: List[str] = []
    for d in files:
        for seg, label in extract_bout_tuples(d):
            if seg.n_samples < MIN_SEGMENT_SAMPLES:
                continue
            fv = extract(d.series, seg)
            cls = int(StepClass.STEP if label == PostureLabel.STEP else StepClass.NONSTEP)
            samples.append((fv, cls))
            ids.append(d.participant_id)
    return samples, ids


@dataclass
class ScoredSegments:
    """Stage-1 output for one daily file, reusable across stage-2 settings."""

    segments: List[Segment]
    axis: str
    step_mask: List[Optional[bool]]  # None for segments too short to classify
    probabilities: List[Optional[float]]


def score_segments(d: DailyFile, model: ForestModel, cpd: CpdConfig) -> ScoredSegments:
    """Changepoint segmentation plus forest step votes for one daily file."""
    axis = choose_axis(d.series, cpd)
    segments = detect_daily(d, replace(cpd, axis=axis))
    feats, feat_idx = [], []
    for i, seg in enumerate(segments):
        if seg.n_samples >= MIN_SEGMENT_SAMPLES:
            feats.append(extract(d.series, seg).values)
            feat_idx.append(i)
    step_mask: List[Optional[bool]] = [None] * len(segments)
    probs: List[Optional[float]] = [None] * len(segments)
    if feats:
        cls, prob = forest_mod.predict_batch(model, np.vstack(feats))
        for i, c, p in zip(feat_idx, cls, prob):
            step_mask[i] = bool(c == int(StepClass.STEP))
            probs[i] = float(p)
    return ScoredSegments(segments, axis, step_mask, probs)


def finalize(
    d: DailyFile,
    scored: ScoredSegments,
    stage2_cfg: Stage2Config = Stage2Config(),
    post_cfg: PostConfig = PostConfig(),
) -> Tuple[EventLog, List[Segment]]:
    """Stage-2 labeling plus postprocess; returns (event log, labeled bouts)."""
    classifiable = [i for i, m in enumerate(scored.step_mask) if m is not None]
    labeled: List[Segment] = list(scored.segments)
    if classifiable:
        sub_segments = [scored.segments[i] for i in classifiable]
        sub_mask = [scored.step_mask[i] for i in classifiable]
        sub_labeled = stage2_mod.classify_daily(
            sub_segments, sub_mask, d.series, scored.axis, stage2_cfg
        )
        for i, seg in zip(classifiable, sub_labeled):
            labeled[i] = seg
    else:
        raise DataError("no classifiable segments in daily file")
    bouts = finalize_bouts(
        labeled, d.series.sample_rate_hz,
        stand_threshold_s=post_cfg.stand_threshold_s,
        min_len_samples=post_cfg.min_bout_samples,
    )
    return bouts_to_events(bouts, d.series), bouts


def predict_daily(
    d: DailyFile,
    model: ForestModel,
    cpd: CpdConfig = CpdConfig(),
    stage2_cfg: Stage2Config = Stage2Config(),
    post_cfg: PostConfig = PostConfig(),
) -> EventLog:
    """Full pipeline for one daily file: segment, classify, correct, export."""
    scored = score_segments(d, model, cpd)
    events, _ = finalize(d, scored, stage2_cfg, post_cfg)
    return events


def file_sit_to_step_error(
    d: DailyFile, scored: ScoredSegments
) -> Optional[float]:
    """Eq.-style stage-1 contamination for one file (None without step bouts)."""
    truth = truth_sample_grid(d)
    pred = [
        seg.with_label(PostureLabel.STEP if m else PostureLabel.STAND)
        for seg, m in zip(scored.segments, scored.step_mask)
        if m is not None
    ]
    return sit_to_step_error(pred, truth)


def file_balanced_accuracy(d: DailyFile, events: EventLog, resolution_s: float = 0.1) -> Optional[float]:
    truth_grid = labels_to_grid(d.truth, resolution_s)
    pred_grid = labels_to_grid(events, resolution_s)
    n = min(len(truth_grid), len(pred_grid))
    cm = confusion(pred_grid[:n], truth_grid[:n])
    return rates(cm)["balanced_accuracy"]


def _loocv_folds(files: Sequence[DailyFile]) -> List[Tuple[str, List[DailyFile], List[DailyFile]]]:
    ids = sorted({d.participant_id for d in files})
    if len(ids) < 2:
        raise DataError("cross-validation needs at least two participants")
    folds = []
    for held in ids:
        train_files = [d for d in files if d.participant_id != held]
        test_files = [d for d in files if d.participant_id == held]
        folds.append((held, train_files, test_files))
    return folds


def cv_stage1(
    files: Sequence[DailyFile],
    window_widths: Sequence[int],
    min_seg_lens: Sequence[int],
    base_cpd: CpdConfig = CpdConfig(),
    forest_cfg: ForestConfig = ForestConfig(),
) -> Dict:
    """LOOCV grid over (window_width, min_seg_len) minimizing mean sit-to-step error.

    The forest is trained once per fold (it does not depend on the grid cell);
    files with zero predicted stepping bouts are skipped in the mean.
    """
    cells = []
    for ww in window_widths:
        for msl in min_seg_lens:
            cells.append(replace(base_cpd, window_width=int(ww), min_seg_len=int(msl)))

    fold_models = []
    for held, train_files, test_files in _loocv_folds(files):
        samples, _ = training_samples(train_files)
        fold_models.append((forest_mod.train(samples, forest_cfg), test_files))

    grid = []
    for cell in cells:
        errors = []
        for model, test_files in fold_models:
            for d in test_files:
                err = file_sit_to_step_error(d, score_segments(d, model, cell))
                if err is not None:
                    errors.append(err)
        grid.append({
            "window_width": cell.window_width,
            "min_seg_len": cell.min_seg_len,
            "mean_sit_to_step_error": float(np.mean(errors)) if errors else None,
            "files_scored": len(errors),
        })
    scored_cells = [g for g in grid if g["mean_sit_to_step_error"] is not None]
    if not scored_cells:
        raise DataError("no grid cell produced any stepping bouts")
    best = min(scored_cells, key=lambda g: g["mean_sit_to_step_error"])
    return {"grid": grid, "best": best}


def cv_stage2(
    files: Sequence[DailyFile],
    alphas: Sequence[float],
    stand_thresholds_s: Sequence[float],
    cpd: CpdConfig = CpdConfig(),
    forest_cfg: ForestConfig = ForestConfig(),
    resolution_s: float = 0.1,
) -> Dict:
    """LOOCV grid over (alpha, stand threshold) maximizing mean balanced accuracy."""
    scored_by_file = []
    for held, train_files, test_files in _loocv_folds(files):
        samples, _ = training_samples(train_files)
        model = forest_mod.train(samples, forest_cfg)
        for d in test_files:
            scored_by_file.append((d, score_segments(d, model, cpd)))

    grid = []
    for alpha in alphas:
        for thr in stand_thresholds_s:
            accs = []
            for d, scored in scored_by_file:
                events, _ = finalize(
                    d, scored,
                    Stage2Config(alpha=float(alpha)),
                    PostConfig(stand_threshold_s=float(thr)),
                )
                acc = file_balanced_accuracy(d, events, resolution_s)
                if acc is not None:
                    accs.append(acc)
            grid.append({
                "alpha": float(alpha),
                "stand_threshold_s": float(thr),
                "mean_balanced_accuracy": float(np.mean(accs)) if accs else None,
            })
    scored_cells = [g for g in grid if g["mean_balanced_accuracy"] is not None]
    if not scored_cells:
        raise DataError("no grid cell could be scored")
    best = max(scored_cells, key=lambda g: g["mean_balanced_accuracy"])
    return {"grid": grid, "best": best}
