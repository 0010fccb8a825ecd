"""Classification, cross-validation, feature ranking/selection and the flat
transformation ensemble.

Every classifier follows the same small protocol: ``fit(ds)`` returns the
fitted object and ``predict(x)`` returns a class label. Classifiers that mix
feature columns z-score them with training statistics only; columns that are
more than 20% MISSING on the training data are dropped and remaining gaps
are filled with the training median.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from ._parallel import pmap
from ._split import best_accuracy, encode_labels
from .core import FeatureMatrix, LabeledDataset
from .dictionary import SymbolicParams, bag_of_patterns, histogram_distance
from .distances import DistanceSpec, cross_matrix
from .errors import AllMissingError, NoMembersError, SingleClassError
from .features import STANDARD_22, FeatureSpec, extract_features, extract_vector
from .intervals import train_forest
from .shapelets import apply_shapelets, shapelet_transform

logger = logging.getLogger(__name__)

MAX_MISSING_FRACTION = 0.2

REPRESENTATIONS = (
    "time-domain-euclid",
    "time-domain-dtw",
    "global-features",
    "shapelet-transform",
    "interval-forest",
    "bag-of-patterns",
)


# --- nearest neighbour core -----------------------------------------------


def _vote(labels: Sequence[str]) -> str:
    counts = Counter(labels)
    top = max(counts.values())
    return min(lab for lab, c in counts.items() if c == top)


def _knn_from_distances(distances: np.ndarray, labels: Sequence[str], k: int) -> str:
    # stable sort: equal distances keep training order
    order = np.argsort(distances, kind="stable")[:k]
    return _vote([labels[i] for i in order])


def knn_classify(train: LabeledDataset, x, spec: DistanceSpec, k: int = 1) -> str:
    """Majority label among the k nearest training series.

    Distance ties favour the earlier training series; vote ties the
    lexicographically smallest label.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    d = cross_matrix([x], train.series, spec)[0]
    return _knn_from_distances(d, train.labels, min(k, len(train)))


class ColumnPrep:
    """Train-fold column filtering, median imputation and z-scoring."""

    def fit(self, values: np.ndarray, columns: Sequence[str] = ()):
        values = np.asarray(values, dtype=float)
        missing = np.isnan(values).mean(axis=0) if values.size else np.zeros(values.shape[1])
        self.keep = np.flatnonzero(missing <= MAX_MISSING_FRACTION)
        dropped = [columns[i] if columns else i for i in np.flatnonzero(missing > MAX_MISSING_FRACTION)]
        if dropped:
            logger.info("dropping columns with > %.0f%% MISSING: %s", 100 * MAX_MISSING_FRACTION, dropped)
        if self.keep.size == 0:
            raise AllMissingError("every feature column exceeds the MISSING limit")
        kept = values[:, self.keep]
        self.median = np.nanmedian(kept, axis=0) if kept.shape[0] else np.zeros(kept.shape[1])
        self.median = np.where(np.isnan(self.median), 0.0, self.median)
        filled = self._impute(kept)
        self.mean = filled.mean(axis=0)
        sd = filled.std(axis=0, ddof=1) if filled.shape[0] > 1 else np.zeros(filled.shape[1])
        self.scale = np.where(sd > 0, sd, 1.0)
        return self

    def _impute(self, kept: np.ndarray) -> np.ndarray:
        holes = np.isnan(kept)
        if holes.any():
            logger.info("imputing %d MISSING cells with training medians", int(holes.sum()))
            kept = np.where(holes, self.median, kept)
        return kept

    def transform(self, values: np.ndarray) -> np.ndarray:
        kept = np.atleast_2d(np.asarray(values, dtype=float))[:, self.keep]
        return (self._impute(kept) - self.mean) / self.scale


def _nearest(train_rows: np.ndarray, labels, row: np.ndarray) -> str:
    d = np.sqrt(np.sum((train_rows - row) ** 2, axis=1))
    return _knn_from_distances(d, labels, 1)


# --- classifiers ----------------------------------------------------------


class KNNClassifier:
    def __init__(self, spec: DistanceSpec | None = None, k: int = 1):
        self.spec = spec or DistanceSpec("euclidean")
        self.k = k

    def fit(self, ds: LabeledDataset):
        self.train_ = ds
        self.reps_ = [self.spec.prepare(x) for x in ds.series]
        return self

    def predict(self, x) -> str:
        rep = self.spec.prepare(x)
        d = np.array([self.spec.between(rep, r) for r in self.reps_])
        return _knn_from_distances(d, self.train_.labels, min(self.k, len(self.reps_)))


class _MatrixNN:
    """1-NN on z-scored feature rows."""

    def _fit_matrix(self, fm: FeatureMatrix, labels):
        self.prep_ = ColumnPrep().fit(fm.values, fm.columns)
        self.rows_ = self.prep_.transform(fm.values)
        self.labels_ = tuple(labels)

    def _predict_row(self, values) -> str:
        return _nearest(self.rows_, self.labels_, self.prep_.transform(values)[0])


class GlobalFeatureClassifier(_MatrixNN):
    def __init__(self, specs: Sequence[FeatureSpec] = STANDARD_22):
        self.specs = tuple(specs)

    def fit(self, ds):
        self._fit_matrix(extract_features(ds, self.specs), ds.labels)
        return self

    def predict(self, x) -> str:
        return self._predict_row(extract_vector(x, self.specs).values)


class ShapeletClassifier(_MatrixNN):
    def __init__(self, k: int = 3, l_min: int | None = None, l_max: int | None = None, stride: int = 1, normalize: bool = False):
        self.k, self.l_min, self.l_max, self.stride, self.normalize = k, l_min, l_max, stride, normalize

    def fit(self, ds):
        shortest = min(len(s) for s in ds.series)
        l_min = self.l_min or max(3, shortest // 10)
        l_max = self.l_max or l_min
        st = shapelet_transform(ds, self.k, l_min, l_max, self.stride, self.normalize)
        self.shapelets_ = st.shapelets
        self._fit_matrix(st.features, ds.labels)
        return self

    def predict(self, x) -> str:
        ds = LabeledDataset((x,), ("?",))
        return self._predict_row(apply_shapelets(self.shapelets_, ds, self.normalize).values)


class ForestClassifier:
    def __init__(self, n_trees: int = 100, seed: int = 0):
        self.n_trees, self.seed = n_trees, seed

    def fit(self, ds):
        self.forest_ = train_forest(ds, self.n_trees, self.seed)
        return self

    def predict(self, x) -> str:
        return self.forest_.predict(x)


class BagOfPatternsClassifier:
    def __init__(self, params: SymbolicParams | None = None, numerosity_reduction: bool = True):
        self.params = params
        self.numerosity_reduction = numerosity_reduction

    def fit(self, ds):
        self.params_ = self.params
        if self.params_ is None:
            n = min(len(s) for s in ds.series)
            w = max(4, (n // 5) // 4 * 4)
            if w > n:
                w = n // 4 * 4
            self.params_ = SymbolicParams(w=w, l=4, a=4)
        self.hists_ = [bag_of_patterns(s, self.params_, self.numerosity_reduction) for s in ds.series]
        self.labels_ = ds.labels
        return self

    def predict(self, x) -> str:
        h = bag_of_patterns(x, self.params_, self.numerosity_reduction)
        d = np.array([histogram_distance(h, t) for t in self.hists_])
        return _knn_from_distances(d, self.labels_, 1)


def make_classifier(config):
    """Build an unfitted classifier from a config mapping, a representation
    name, or a zero-argument factory."""
    if callable(config) and not isinstance(config, Mapping):
        return config()
    if isinstance(config, str):
        config = {"method": config}
    cfg = dict(config)
    method = cfg.pop("method", "knn")
    if method in ("knn", "time-domain-euclid", "time-domain-dtw"):
        kind = {"time-domain-euclid": "euclidean", "time-domain-dtw": "dtw"}.get(method, cfg.get("distance", "euclidean"))
        spec = DistanceSpec(kind, window=cfg.get("window"),
                            feature_specs=STANDARD_22 if kind == "feature" else None)
        return KNNClassifier(spec, cfg.get("k", 1))
    if method in ("features", "global-features"):
        return GlobalFeatureClassifier(cfg.get("specs", STANDARD_22))
    if method in ("shapelet", "shapelet-transform"):
        return ShapeletClassifier(cfg.get("k", 3), cfg.get("l_min"), cfg.get("l_max"), cfg.get("stride", 1), cfg.get("normalize", False))
    if method in ("forest", "interval-forest", "tsf"):
        return ForestClassifier(cfg.get("n_trees", 100), cfg.get("seed", 0))
    if method in ("bop", "bag-of-patterns"):
        params = None
        if "w" in cfg:
            params = SymbolicParams(cfg["w"], cfg.get("l", 4), cfg.get("a", 4))
        return BagOfPatternsClassifier(params, cfg.get("numerosity_reduction", True))
    raise ValueError(f"unknown classifier method {method!r}")


# --- validation -----------------------------------------------------------


@dataclass(frozen=True)
class Split:
    train: tuple
    test: tuple
    fold: int
    seed: int


def stratified_splits(labels: Sequence[str], folds: int, seed: int = 0) -> list:
    """Stratified k-fold splits: each class is shuffled and dealt round-robin."""
    labels = list(labels)
    if folds < 2:
        raise ValueError("folds must be >= 2")
    if len(labels) < folds:
        raise ValueError(f"{len(labels)} items cannot fill {folds} folds")
    rng = np.random.default_rng(seed)
    assignment = np.empty(len(labels), dtype=int)
    position = 0
    for cls in sorted(set(labels)):
        members = np.array([i for i, lab in enumerate(labels) if lab == cls])
        for i in rng.permutation(members):
            assignment[i] = position % folds
            position += 1
    splits = []
    for f in range(folds):
        test = tuple(int(i) for i in np.flatnonzero(assignment == f))
        train = tuple(int(i) for i in np.flatnonzero(assignment != f))
        splits.append(Split(train, test, f, seed))
    return splits


@dataclass(frozen=True)
class CVResult:
    accuracy: float
    fold_accuracies: tuple
    confusion: np.ndarray  # rows: true class, columns: predicted class
    classes: tuple
    splits: tuple = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "fold_accuracies": list(self.fold_accuracies),
            "classes": list(self.classes),
            "confusion": self.confusion.tolist(),
        }


def cross_validate(ds: LabeledDataset, config, folds: int = 5, seed: int = 0) -> CVResult:
    """Stratified k-fold accuracy (mean over folds) and pooled confusion matrix."""
    classes = ds.classes
    if len(classes) < 2:
        raise SingleClassError("cross-validation needs at least two classes")
    splits = stratified_splits(ds.labels, folds, seed)

    def run(split):
        model = make_classifier(config).fit(ds.subset(split.train))
        return [model.predict(ds.series[i]) for i in split.test]

    predictions = pmap(run, splits)
    index = {c: i for i, c in enumerate(classes)}
    confusion = np.zeros((len(classes), len(classes)), dtype=int)
    fold_acc = []
    for split, preds in zip(splits, predictions):
        hits = 0
        for i, p in zip(split.test, preds):
            truth = ds.labels[i]
            hits += p == truth
            if p in index:
                confusion[index[truth], index[p]] += 1
        fold_acc.append(hits / len(split.test))
    return CVResult(float(np.mean(fold_acc)), tuple(fold_acc), confusion, classes, tuple(splits))


# --- feature ranking and selection ---------------------------------------


@dataclass(frozen=True)
class RankedFeature:
    name: str
    score: float
    coverage: float  # fraction of rows that were not MISSING
    rank: int = 0  # competition rank: 1 + number of strictly better scores


def rank_features(fm: FeatureMatrix, labels: Sequence[str]) -> list:
    """Score each feature by the best accuracy of a single threshold on it.

    Each side of the threshold predicts its majority class. MISSING rows are
    skipped per column. Sorted by descending score, then name; features with
    equal scores share the same ``rank``.
    """
    labels = [str(lab) for lab in labels]
    if len(labels) != fm.shape[0]:
        raise ValueError("labels must align with matrix rows")
    if len(set(labels)) < 2:
        raise SingleClassError("feature ranking needs at least two classes")
    ranked = []
    for j, name in enumerate(fm.columns):
        col = fm.values[:, j]
        ok = ~np.isnan(col)
        if not ok.any():
            logger.info("feature %s is MISSING everywhere; not ranked", name)
            continue
        codes, classes = encode_labels([lab for lab, keep in zip(labels, ok) if keep])
        score = best_accuracy(col[ok], codes, len(classes))
        ranked.append(RankedFeature(name, score, float(ok.mean())))
    ranked.sort(key=lambda r: (-r.score, r.name))
    for i, r in enumerate(ranked):
        tied = i > 0 and r.score == ranked[i - 1].score
        ranked[i] = replace(r, rank=ranked[i - 1].rank if tied else i + 1)
    return ranked


def _centroid_cv_accuracy(values: np.ndarray, labels: Sequence[str], splits) -> float:
    accs = []
    for split in splits:
        tr, te = list(split.train), list(split.test)
        prep = ColumnPrep().fit(values[tr])
        x_tr = prep.transform(values[tr])
        y_tr = [labels[i] for i in tr]
        classes = sorted(set(y_tr))
        centroids = np.array([x_tr[[k for k, y in enumerate(y_tr) if y == c]].mean(axis=0) for c in classes])
        x_te = prep.transform(values[te])
        d = np.sum((x_te[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
        preds = [classes[int(i)] for i in np.argmin(d, axis=1)]
        accs.append(np.mean([p == labels[i] for p, i in zip(preds, te)]))
    return float(np.mean(accs))


def greedy_select(fm: FeatureMatrix, labels: Sequence[str], max_features: int = 5, folds: int = 5, seed: int = 0) -> list:
    """Forward selection maximizing cross-validated nearest-centroid accuracy.

    Stops at ``max_features`` or when the best addition improves accuracy by
    no more than 1e-6. Candidate ties go to the alphabetically first name.
    """
    labels = [str(lab) for lab in labels]
    if len(set(labels)) < 2:
        raise SingleClassError("feature selection needs at least two classes")
    splits = stratified_splits(labels, folds, seed)
    selected: list = []
    current = 0.0
    remaining = sorted(fm.columns)
    while len(selected) < max_features and remaining:
        best_name, best_acc = None, -math.inf
        for name in remaining:
            cols = [fm.columns.index(c) for c in selected + [name]]
            try:
                acc = _centroid_cv_accuracy(fm.values[:, cols], labels, splits)
            except AllMissingError:
                continue
            if acc > best_acc:
                best_name, best_acc = name, acc
        if best_name is None or best_acc <= current + 1e-6:
            break
        selected.append(best_name)
        remaining.remove(best_name)
        current = best_acc
    return selected


def distance_feature_matrix(ds: LabeledDataset, refs: LabeledDataset, spec: DistanceSpec) -> FeatureMatrix:
    """Represent each series by its distances to the reference series."""
    return FeatureMatrix(ds.ids, refs.ids, cross_matrix(ds.series, refs.series, spec))


# --- flat ensemble --------------------------------------------------------


@dataclass
class EnsembleMember:
    name: str
    representation: str
    weight: float
    model: object = None

    def __post_init__(self):
        if not self.weight >= 0:
            raise ValueError("member weights must be nonnegative")


@dataclass(frozen=True)
class EnsembleVote:
    label: str
    shares: dict


def fit_ensemble(
    ds: LabeledDataset,
    representations: Sequence[str] = REPRESENTATIONS,
    folds: int = 5,
    seed: int = 0,
    configs: Mapping | None = None,
) -> list:
    """Weight each representation by its training CV accuracy and fit it on all of ``ds``."""
    configs = dict(configs or {})
    members = []
    for rep in representations:
        cfg = {"method": rep, **configs.get(rep, {})}
        acc = cross_validate(ds, cfg, folds, seed).accuracy
        members.append(EnsembleMember(rep, rep, acc, make_classifier(cfg).fit(ds)))
    return members


def ensemble_predict(members: Sequence[EnsembleMember], x) -> EnsembleVote:
    """Weighted vote; shares are normalized to sum to 1, ties go to the smallest label."""
    if not members:
        raise NoMembersError("ensemble has no members")
    totals: dict = {}
    for m in members:
        totals.setdefault(m.model.predict(x), []).append(m.weight)
    sums = {lab: math.fsum(ws) for lab, ws in totals.items()}
    grand = math.fsum(sums.values())
    if grand <= 0:
        raise NoMembersError("no ensemble member has positive weight")
    top = max(sums.values())
    label = min(lab for lab, s in sums.items() if s == top)
    return EnsembleVote(label, {lab: sums[lab] / grand for lab in sorted(sums)})
