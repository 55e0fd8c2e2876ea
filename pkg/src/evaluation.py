"""
KAR Learner - Metrics, stratified cross-validation and hidden-size selection
"""
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from src.data import Dataset
from src.errors import ClassTooSmall, ShapeMismatch
from src.network import NetworkSpec, predict
from src.report import CVReportGenerator
from src.trainer import TrainConfig, train

logger = logging.getLogger(__name__)

HIDDEN_GRID = (1, 2, 3, 5, 10, 20, 30, 50, 80, 100, 200, 500)

# width multipliers of h for the hidden layers; the output layer q is appended
STRUCTURE_RULES = {
    "two_layer_h": (1,),
    "three_layer_2h_h": (2, 1),
    "four_layer_4h_2h_h": (4, 2, 1),
}
LAYERS_TO_RULE = {2: "two_layer_h", 3: "three_layer_2h_h", 4: "four_layer_4h_2h_h"}

SCORE_TIE_TOLERANCE = 1e-9


def structure_widths(rule: str, h: int, q: int) -> Tuple[int, ...]:
    """[h, q], [2h, h, q] or [4h, 2h, h, q]"""
    if rule not in STRUCTURE_RULES:
        raise ValueError(f"unknown structure rule {rule!r}, expected one of {sorted(STRUCTURE_RULES)}")
    return tuple(mult * h for mult in STRUCTURE_RULES[rule]) + (q,)


@dataclass(frozen=True)
class CVConfig:
    outer_folds: int = 10
    trials: int = 10
    inner_folds: int = 10
    hidden_grid: Tuple[int, ...] = HIDDEN_GRID
    structure_rule: str = "two_layer_h"
    seed: int = 0
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if self.outer_folds < 2 or self.inner_folds < 2:
            raise ValueError("outer_folds and inner_folds must be >= 2")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        grid = tuple(int(h) for h in self.hidden_grid)
        if not grid or any(h < 1 for h in grid) or list(grid) != sorted(set(grid)):
            raise ValueError(f"hidden_grid must be non-empty, positive and strictly ascending, got {grid}")
        object.__setattr__(self, "hidden_grid", grid)
        structure_widths(self.structure_rule, 1, 1)


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def predict_labels(Y_hat) -> np.ndarray:
    """argmax per row (lowest index wins ties); a single output column is thresholded at 0.5"""
    Y_hat = np.asarray(Y_hat, dtype=np.float64)
    if Y_hat.ndim == 1:
        Y_hat = Y_hat.reshape(-1, 1)
    if Y_hat.shape[1] == 1:
        return (Y_hat[:, 0] >= 0.5).astype(np.int64)
    return np.argmax(Y_hat, axis=1)


def accuracy(Y_hat, labels) -> float:
    """Percentage of rows whose predicted class equals the label"""
    predicted = predict_labels(Y_hat)
    labels = np.asarray(labels).ravel()
    if predicted.shape[0] != labels.shape[0]:
        raise ShapeMismatch(f"{predicted.shape[0]} predictions for {labels.shape[0]} labels")
    return 100.0 * float(np.count_nonzero(predicted == labels)) / labels.shape[0]


def mse(Y_hat, Y) -> float:
    """Mean squared elementwise residual, sse / (m q)"""
    Y_hat = np.asarray(Y_hat, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if Y_hat.shape != Y.shape:
        raise ShapeMismatch(f"prediction shape {Y_hat.shape} differs from target shape {Y.shape}")
    return float(np.mean((Y_hat - Y) ** 2))


# ---------------------------------------------------------------------------
# Folding and seeds
# ---------------------------------------------------------------------------

def derive_seed(master: int, *keys: int) -> int:
    """Independent 64-bit seed for the run identified by keys"""
    return int(np.random.SeedSequence([master, *keys]).generate_state(1, np.uint64)[0])


def stratified_kfold(labels, k: int, seed: int) -> np.ndarray:
    """
    Assign every row to one of k folds, class by class.

    Each class is shuffled and dealt round-robin, continuing where the previous
    class stopped, so per-class counts across folds differ by at most one.

    Returns:
        fold index per row

    Raises:
        ClassTooSmall: a class has fewer than k members
    """
    if k < 2:
        raise ValueError(f"need at least 2 folds, got {k}")
    labels = np.asarray(labels).ravel()
    classes, counts = np.unique(labels, return_counts=True)
    for label, count in zip(classes, counts):
        if count < k:
            raise ClassTooSmall(label.item() if hasattr(label, "item") else label, int(count), k)

    rng = np.random.default_rng(seed)
    folds = np.empty(labels.shape[0], dtype=np.int64)
    offset = 0
    for label in classes:
        members = np.flatnonzero(labels == label)
        rng.shuffle(members)
        folds[members] = (offset + np.arange(members.size)) % k
        offset = (offset + members.size) % k
    return folds


# ---------------------------------------------------------------------------
# Model selection
# ---------------------------------------------------------------------------

def _fit_and_score(train_set: Dataset, test_set: Dataset, widths: Tuple[int, ...],
                   cfg: TrainConfig) -> Tuple[float, float]:
    spec = NetworkSpec.build(train_set.d, widths)
    W, _ = train(train_set.X, train_set.Y, spec, cfg)
    train_acc = accuracy(predict(spec, W, train_set.X), train_set.labels)
    test_acc = accuracy(predict(spec, W, test_set.X), test_set.labels)
    return train_acc, test_acc


def select_hidden_scores(train_set: Dataset, cfg: CVConfig, seed: int) -> Dict[int, float]:
    """Mean inner-fold accuracy for every h in the grid"""
    folds = stratified_kfold(train_set.labels, cfg.inner_folds, derive_seed(seed, 0))
    scores = {}
    for h in cfg.hidden_grid:
        widths = structure_widths(cfg.structure_rule, h, train_set.q)
        fold_scores = []
        for fold in range(cfg.inner_folds):
            held_out = folds == fold
            run_cfg = replace(cfg.train, seed=derive_seed(seed, h, fold + 1))
            _, acc = _fit_and_score(train_set.subset(np.flatnonzero(~held_out)),
                                    train_set.subset(np.flatnonzero(held_out)), widths, run_cfg)
            fold_scores.append(acc)
        scores[h] = float(np.mean(fold_scores))
        logger.debug("inner CV h=%d: %.2f%%", h, scores[h])
    return scores


def choose_hidden(scores: Dict[int, float]) -> int:
    """Best mean score; ties go to the smaller h"""
    best = max(scores.values())
    return min(h for h, score in scores.items() if score >= best - SCORE_TIE_TOLERANCE)


def select_hidden(train_set: Dataset, cfg: CVConfig, seed: Optional[int] = None) -> int:
    """
    Pick the hidden size by inner k-fold cross-validation on train_set only.

    Args:
        train_set: the outer training portion
        cfg: grid, structure rule, inner fold count
        seed: master seed for the inner folds and trainings

    Returns:
        chosen h
    """
    if len(cfg.hidden_grid) == 1:
        return cfg.hidden_grid[0]
    seed = cfg.seed if seed is None else seed
    scores = select_hidden_scores(train_set, cfg, seed)
    h = choose_hidden(scores)
    logger.info("Selected h=%d (inner accuracy %.2f%%) among %s", h, scores[h],
                ", ".join(f"{k}:{v:.2f}" for k, v in scores.items()))
    return h


# ---------------------------------------------------------------------------
# Cross-validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FoldResult:
    trial: int
    fold: int
    h: int
    accuracy: float
    train_accuracy: float
    seed: int
    n_train: int
    n_test: int
    runtime: float


@dataclass
class CVReport:
    """Per-run accuracies of a cross-validation benchmark, keyed by (trial, fold)"""
    dataset: str
    structure_rule: str
    seed: int
    results: List[FoldResult]
    selection: str = "fixed"

    def __post_init__(self):
        self.results = sorted(self.results, key=lambda r: (r.trial, r.fold))

    @property
    def accuracies(self) -> np.ndarray:
        return np.array([r.accuracy for r in self.results])

    @property
    def mean(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def std(self) -> float:
        """Sample standard deviation over all runs (0 for a single run)"""
        acc = self.accuracies
        return float(np.std(acc, ddof=1)) if acc.size > 1 else 0.0

    @property
    def chosen_h(self) -> Dict[Tuple[int, int], int]:
        return {(r.trial, r.fold): r.h for r in self.results}

    def trial_means(self) -> Dict[int, float]:
        trials = sorted({r.trial for r in self.results})
        return {t: float(np.mean([r.accuracy for r in self.results if r.trial == t])) for t in trials}

    def to_frame(self) -> pd.DataFrame:
        """One row per (trial, fold)"""
        return pd.DataFrame([
            {
                "trial": r.trial, "fold": r.fold, "h": r.h,
                "accuracy": r.accuracy, "train_accuracy": r.train_accuracy,
                "seed": r.seed, "n_train": r.n_train, "n_test": r.n_test,
            }
            for r in self.results
        ])

    def to_record(self) -> str:
        """key = value summary; runtimes are left out so records compare across runs"""
        hs = sorted({r.h for r in self.results})
        entries = {
            "dataset": self.dataset,
            "structure_rule": self.structure_rule,
            "seed": self.seed,
            "selection": self.selection,
            "runs": len(self.results),
            "trials": len({r.trial for r in self.results}),
            "folds": len({r.fold for r in self.results}),
            "chosen_h": ",".join(str(h) for h in hs),
            "mean_accuracy": repr(self.mean),
            "std_accuracy": repr(self.std),
        }
        return "".join(f"{key} = {value}\n" for key, value in entries.items())

    def summary_lines(self) -> List[str]:
        """Summary plus the published comparison rows for this dataset"""
        return CVReportGenerator(self).summary_lines()


def _run_fold(dataset: Dataset, trial: int, fold: int, train_idx: np.ndarray, test_idx: np.ndarray,
              h: Optional[int], cfg: CVConfig) -> FoldResult:
    started = time.perf_counter()
    run_seed = derive_seed(cfg.seed, trial + 1, fold + 1)
    train_set = dataset.subset(train_idx)
    if h is None:
        h = select_hidden(train_set, cfg, run_seed)
    widths = structure_widths(cfg.structure_rule, h, dataset.q)
    train_acc, test_acc = _fit_and_score(train_set, dataset.subset(test_idx), widths,
                                         replace(cfg.train, seed=run_seed))
    logger.debug("trial %d fold %d h=%d: %.2f%%", trial, fold, h, test_acc)
    return FoldResult(trial, fold, h, test_acc, train_acc, run_seed,
                      len(train_idx), len(test_idx), time.perf_counter() - started)


def outer_splits(dataset: Dataset, cfg: CVConfig) -> List[Tuple[int, int, np.ndarray, np.ndarray]]:
    """(trial, fold, train indices, test indices) for every outer run"""
    splits = []
    for trial in range(cfg.trials):
        folds = stratified_kfold(dataset.labels, cfg.outer_folds, derive_seed(cfg.seed, trial + 1))
        for fold in range(cfg.outer_folds):
            splits.append((trial, fold, np.flatnonzero(folds != fold), np.flatnonzero(folds == fold)))
    return splits


def cross_validate(dataset: Dataset, cfg: Optional[CVConfig] = None, fixed_h: Optional[int] = None,
                   reselect_per_fold: bool = False, workers: int = 1) -> CVReport:
    """
    trials x outer_folds stratified train/test runs.

    The hidden size is fixed_h when given; otherwise it is selected once on the
    training portion of the first run and reused, or re-selected inside every
    run when reselect_per_fold is set.

    Args:
        dataset: classification dataset
        cfg: fold counts, grid, structure rule, master seed
        fixed_h: skip model selection
        reselect_per_fold: run the inner loop inside every outer run
        workers: processes for the outer runs (1 runs inline)

    Returns:
        CVReport with one FoldResult per (trial, fold)
    """
    cfg = cfg or CVConfig()
    if not dataset.is_classification:
        raise ValueError("cross_validate needs a labelled dataset")
    try:
        splits = outer_splits(dataset, cfg)
    except ClassTooSmall as e:
        if not dataset.class_names:
            raise
        raise ClassTooSmall(dataset.class_names[e.label], e.count, e.k) from e

    if fixed_h is not None:
        h, selection = int(fixed_h), "fixed"
    elif reselect_per_fold:
        h, selection = None, "per_fold"
    else:
        _, _, first_train, _ = splits[0]
        h = select_hidden(dataset.subset(first_train), cfg, derive_seed(cfg.seed, 0))
        selection = "once"

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_fold, dataset, trial, fold, tr, te, h, cfg)
                       for trial, fold, tr, te in splits]
            results = [f.result() for f in futures]
    else:
        results = [_run_fold(dataset, trial, fold, tr, te, h, cfg) for trial, fold, tr, te in splits]

    report = CVReport(str(dataset.meta.get("source", "dataset")), cfg.structure_rule, cfg.seed,
                      results, selection)
    logger.info("%s %s: %.2f%% +/- %.2f over %d runs", report.dataset, cfg.structure_rule,
                report.mean, report.std, len(results))
    return report
