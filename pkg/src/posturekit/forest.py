"""Random forest for stage-1 stepping vs non-stepping discrimination.

Implemented in-repo so the persisted model is a plain, versioned container of
node arrays (no pickled estimator objects). Each of the trees is grown on a
class-balanced bootstrap (majority class downsampled to the minority count
before resampling), with Gini-impurity axis-aligned splits and mtry features
tried per node. Training canonicalizes sample order first, so forests are
identical under any permutation of the input samples.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .core import DataError
from .features import FEATURE_NAMES, FeatureVector

MODEL_FORMAT = "posturekit-forest"
MODEL_FORMAT_VERSION = 1


class StepClass(IntEnum):
    NONSTEP = 0
    STEP = 1


@dataclass(frozen=True)
class ForestConfig:
    seed: int = 0
    trees: int = 500
    mtry: Optional[int] = None  # None -> ceil(sqrt(n_features))
    max_depth: Optional[int] = None
    min_leaf: int = 5

    def resolved_mtry(self, n_features: int) -> int:
        return self.mtry if self.mtry is not None else math.ceil(math.sqrt(n_features))


@dataclass
class Tree:
    """Flat node arrays; ``feature == -1`` marks leaves, counts are per class."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray  # (n_nodes, 2)

    def predict_class(self, x_rows: np.ndarray) -> np.ndarray:
        node = np.zeros(len(x_rows), dtype=np.int64)
        while True:
            at_leaf = self.feature[node] < 0
            if at_leaf.all():
                break
            feat = np.where(at_leaf, 0, self.feature[node])
            go_left = x_rows[np.arange(len(x_rows)), feat] <= self.threshold[node]
            nxt = np.where(go_left, self.left[node], self.right[node])
            node = np.where(at_leaf, node, nxt)
        cnt = self.counts[node]
        # Leaf ties vote for the non-stepping class (conservative).
        return (cnt[:, 1] > cnt[:, 0]).astype(np.int64)


@dataclass
class ForestModel:
    trees: List[Tree]
    feature_names: Tuple[str, ...]
    classes: Tuple[str, str]
    train_config: ForestConfig
    oob_accuracy: Optional[float] = None


def _gini_best_split(xf: np.ndarray, y: np.ndarray, min_leaf: int):
    """Best (threshold, weighted gini) for one feature column, or None."""
    order = np.argsort(xf, kind="stable")
    xs, ys = xf[order], y[order]
    m = len(ys)
    cum1 = np.cumsum(ys)
    total1 = cum1[-1]
    pos = np.arange(min_leaf - 1, m - min_leaf)  # split after index pos
    if len(pos) == 0:
        return None
    valid = xs[pos] < xs[pos + 1]
    if not valid.any():
        return None
    pos = pos[valid]
    n_l = pos + 1.0
    n_r = m - n_l
    c1_l = cum1[pos]
    c1_r = total1 - c1_l
    gini_l = 1.0 - (c1_l**2 + (n_l - c1_l) ** 2) / n_l**2
    gini_r = 1.0 - (c1_r**2 + (n_r - c1_r) ** 2) / n_r**2
    weighted = (n_l * gini_l + n_r * gini_r) / m
    best = int(np.argmin(weighted))
    thr = 0.5 * (xs[pos[best]] + xs[pos[best] + 1])
    return thr, float(weighted[best])


def _grow_tree(x_rows: np.ndarray, y: np.ndarray, cfg: ForestConfig, rng) -> Tree:
    mtry = cfg.resolved_mtry(x_rows.shape[1])
    feature, threshold, left, right, counts = [], [], [], [], []

    def node_gini(yv):
        p1 = yv.mean()
        return 1.0 - p1 * p1 - (1.0 - p1) ** 2

    def build(idx: np.ndarray, depth: int) -> int:
        node_id = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        yv = y[idx]
        counts.append([int((yv == 0).sum()), int((yv == 1).sum())])

        if (
            len(idx) < 2 * cfg.min_leaf
            or yv.min() == yv.max()
            or (cfg.max_depth is not None and depth >= cfg.max_depth)
        ):
            return node_id
        feats = rng.choice(x_rows.shape[1], size=mtry, replace=False)
        parent = node_gini(yv)
        best = None
        for fi in feats:
            res = _gini_best_split(x_rows[idx, fi], yv, cfg.min_leaf)
            if res is None:
                continue
            thr, g = res
            if best is None or g < best[2] - 1e-15:
                best = (int(fi), thr, g)
        if best is None or best[2] >= parent - 1e-12:
            return node_id
        fi, thr, _ = best
        go_left = x_rows[idx, fi] <= thr
        feature[node_id] = fi
        threshold[node_id] = thr
        left[node_id] = build(idx[go_left], depth + 1)
        right[node_id] = build(idx[~go_left], depth + 1)
        return node_id

    build(np.arange(len(y)), 0)
    return Tree(
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=float),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(counts, dtype=np.int64),
    )


def _canonical_order(x_rows: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.lexsort(np.vstack([y[None, :], x_rows.T[::-1]]))


def train(
    samples: Sequence[Tuple[FeatureVector, int]],
    cfg: ForestConfig = ForestConfig(),
) -> ForestModel:
    """Train the balanced-bootstrap forest; deterministic given cfg.seed."""
    if len(samples) < 50:
        raise DataError("need at least 50 training samples")
    x_rows = np.array([fv.values for fv, _ in samples], dtype=float)
    y = np.array([int(c) for _, c in samples], dtype=np.int64)
    if len(np.unique(y)) < 2:
        raise DataError("degenerate training set")

    order = _canonical_order(x_rows, y)
    x_rows, y = x_rows[order], y[order]
    idx0 = np.flatnonzero(y == 0)
    idx1 = np.flatnonzero(y == 1)
    n_min = min(len(idx0), len(idx1))

    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.trees)
    trees: List[Tree] = []
    oob_votes = np.zeros((len(y), 2), dtype=np.int64)
    for ss in seeds:
        rng = np.random.default_rng(ss)
        boot = np.concatenate([
            rng.choice(idx0, size=n_min, replace=True),
            rng.choice(idx1, size=n_min, replace=True),
        ])
        tree = _grow_tree(x_rows[boot], y[boot], cfg, rng)
        trees.append(tree)
        oob = np.setdiff1d(np.arange(len(y)), boot, assume_unique=False)
        if len(oob):
            pred = tree.predict_class(x_rows[oob])
            oob_votes[oob, 0] += pred == 0
            oob_votes[oob, 1] += pred == 1

    voted = oob_votes.sum(axis=1) > 0
    oob_acc = None
    if voted.any():
        # Aggregate OOB vote with the same NonStep tie rule as predict().
        oob_pred = (oob_votes[voted, 1] > oob_votes[voted, 0]).astype(np.int64)
        oob_acc = float((oob_pred == y[voted]).mean())

    return ForestModel(
        trees=trees,
        feature_names=FEATURE_NAMES,
        classes=("nonstep", "step"),
        train_config=cfg,
        oob_accuracy=oob_acc,
    )


def predict_batch(model: ForestModel, x_rows: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(classes, probabilities) for a feature matrix; prob = agreeing-tree fraction."""
    x_rows = np.asarray(x_rows, dtype=float)
    if not np.all(np.isfinite(x_rows)):
        raise DataError("non-finite feature value")
    votes = np.zeros((len(x_rows), 2), dtype=np.int64)
    for tree in model.trees:
        pred = tree.predict_class(x_rows)
        votes[:, 0] += pred == 0
        votes[:, 1] += pred == 1
    cls = (votes[:, 1] > votes[:, 0]).astype(np.int64)  # tie -> NonStep
    prob = votes[np.arange(len(x_rows)), cls] / len(model.trees)
    return cls, prob


def predict(model: ForestModel, fv: FeatureVector) -> Tuple[StepClass, float]:
    cls, prob = predict_batch(model, fv.values[None, :])
    return StepClass(int(cls[0])), float(prob[0])


def split_by_participant(
    samples: Sequence,
    participant_ids: Sequence[str],
    ratio: Tuple[int, int] = (2, 1),
    seed: int = 0,
) -> Tuple[list, list]:
    """Partition samples into train/test by participant (never by sample)."""
    if len(samples) != len(participant_ids):
        raise DataError("samples and participant_ids must align")
    ids = sorted(set(participant_ids))
    if len(ids) < 3:
        raise DataError("insufficient participants")
    rng = np.random.default_rng(seed)
    perm = [ids[i] for i in rng.permutation(len(ids))]
    n_train = int(round(len(ids) * ratio[0] / (ratio[0] + ratio[1])))
    n_train = max(1, min(len(ids) - 1, n_train))
    train_ids = set(perm[:n_train])
    train_set = [s for s, p in zip(samples, participant_ids) if p in train_ids]
    test_set = [s for s, p in zip(samples, participant_ids) if p not in train_ids]
    return train_set, test_set


def error_rates(y_true: np.ndarray, y_pred: np.ndarray) -> dict:
    """Stage-1 bout error decomposition."""
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    out = {}
    n_nonstep = int((y_true == 0).sum())
    n_step = int((y_true == 1).sum())
    out["nonstep_to_step"] = (
        float(((y_true == 0) & (y_pred == 1)).sum() / n_nonstep) if n_nonstep else None
    )
    out["step_to_nonstep"] = (
        float(((y_true == 1) & (y_pred == 0)).sum() / n_step) if n_step else None
    )
    out["accuracy"] = float((y_true == y_pred).mean()) if len(y_true) else None
    return out


def save_model(model: ForestModel, path) -> None:
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_FORMAT_VERSION,
        "train_config": {
            "seed": model.train_config.seed,
            "trees": model.train_config.trees,
            "mtry": model.train_config.mtry,
            "max_depth": model.train_config.max_depth,
            "min_leaf": model.train_config.min_leaf,
        },
        "feature_names": list(model.feature_names),
        "classes": list(model.classes),
        "oob_accuracy": model.oob_accuracy,
        "trees": [
            {
                "feature": t.feature.tolist(),
                "threshold": t.threshold.tolist(),
                "left": t.left.tolist(),
                "right": t.right.tolist(),
                "counts": t.counts.tolist(),
            }
            for t in model.trees
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_model(path) -> ForestModel:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != MODEL_FORMAT:
        raise DataError("not a posturekit forest model file")
    if doc.get("version") != MODEL_FORMAT_VERSION:
        raise DataError(
            f"unsupported model version {doc.get('version')!r} "
            f"(expected {MODEL_FORMAT_VERSION})"
        )
    if tuple(doc.get("feature_names", ())) != FEATURE_NAMES:
        raise DataError("model feature names do not match the frozen feature order")
    cfg = ForestConfig(**doc["train_config"])
    trees = [
        Tree(
            np.array(t["feature"], dtype=np.int64),
            np.array(t["threshold"], dtype=float),
            np.array(t["left"], dtype=np.int64),
            np.array(t["right"], dtype=np.int64),
            np.array(t["counts"], dtype=np.int64),
        )
        for t in doc["trees"]
    ]
    return ForestModel(
        trees=trees,
        feature_names=FEATURE_NAMES,
        classes=tuple(doc["classes"]),
        train_config=cfg,
        oob_accuracy=doc.get("oob_accuracy"),
    )
