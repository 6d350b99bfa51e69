"""Misclassification filters: biased, ensemble-threshold and adaptive (greedy forward selection)."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .datakit import CVProtocol, Dataset, stratified_folds, stratified_holdout
from .learners import LearnerSpec, accuracy, fit, out_of_fold_predictions

log = logging.getLogger(__name__)

PAPER_CV_FOLDS = (2, 3, 4, 5)
PAPER_THRESHOLDS = (0.5, 0.7, 0.9)


@dataclass(frozen=True)
class FlagMode:
    """How misclassification flags are produced.

    ``train-on-all`` fits each learner on the whole set and flags its own
    resubstitution errors; ``cross-validated`` flags each instance from an
    out-of-fold prediction over ``folds`` stratified folds.
    """

    variant: str = "train-on-all"
    folds: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.variant not in ("train-on-all", "cross-validated"):
            raise ValueError(f"unknown flag mode {self.variant!r}")
        if self.variant == "cross-validated" and self.folds < 2:
            raise ValueError("cross-validated flagging needs folds >= 2")

    @classmethod
    def train_on_all(cls) -> "FlagMode":
        return cls("train-on-all")

    @classmethod
    def cross_validated(cls, folds: int, seed: int = 0, strict: bool = True) -> "FlagMode":
        if strict and folds not in PAPER_CV_FOLDS:
            raise ValueError(f"folds must be one of {PAPER_CV_FOLDS} (pass strict=False to go beyond)")
        return cls("cross-validated", folds, seed)

    @classmethod
    def parse(cls, text: str, seed: int = 0) -> "FlagMode":
        """``all`` / ``train-on-all`` or ``cv:<folds>``."""
        text = text.strip().lower()
        if text in ("all", "train-on-all"):
            return cls.train_on_all()
        if text.startswith("cv:"):
            return cls.cross_validated(int(text[3:]), seed, strict=False)
        raise ValueError(f"bad flag mode {text!r}; use 'all' or 'cv:<folds>'")

    def with_seed(self, seed: int) -> "FlagMode":
        return FlagMode(self.variant, self.folds, seed) if self.variant == "cross-validated" else self

    @property
    def label(self) -> str:
        return "all" if self.variant == "train-on-all" else f"cv:{self.folds}"


@dataclass(frozen=True, eq=False)
class MisclassificationMatrix:
    learner_ids: tuple[str, ...]
    flags: np.ndarray  # (learners, instances), True = misclassified

    def __post_init__(self):
        flags = np.array(self.flags, dtype=bool)
        if flags.ndim != 2 or flags.shape[0] != len(self.learner_ids):
            raise ValueError("flag grid must be learners x instances")
        flags.setflags(write=False)
        object.__setattr__(self, "learner_ids", tuple(self.learner_ids))
        object.__setattr__(self, "flags", flags)

    @property
    def n_instances(self) -> int:
        return self.flags.shape[1]

    def misclassified_fraction(self) -> np.ndarray:
        return self.flags.sum(axis=0) / self.flags.shape[0]

    def rows(self, which: Sequence[int]) -> "MisclassificationMatrix":
        which = list(which)
        return MisclassificationMatrix(tuple(self.learner_ids[i] for i in which), self.flags[which])


@dataclass(frozen=True, eq=False)
class FilterOutcome:
    kept: np.ndarray
    removed: np.ndarray
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        kept = np.asarray(self.kept, dtype=np.int64)
        removed = np.asarray(self.removed, dtype=np.int64)
        if np.intersect1d(kept, removed).size:
            raise ValueError("kept and removed overlap")
        object.__setattr__(self, "kept", kept)
        object.__setattr__(self, "removed", removed)

    @classmethod
    def from_mask(cls, removed_mask: np.ndarray, config: dict) -> "FilterOutcome":
        removed_mask = np.asarray(removed_mask, dtype=bool)
        return cls(np.flatnonzero(~removed_mask), np.flatnonzero(removed_mask), config)


@dataclass(frozen=True)
class AdaptiveSearchTrace:
    chosen: tuple[str, ...]  # labels of the accepted filter learners, in acceptance order
    chosen_index: tuple[int, ...]  # their positions in the candidate list
    accuracies: tuple[float, ...]  # validation accuracy with F = {} and after each acceptance
    threshold: float
    validation_size: int = 0


def flag_misclassified(specs: Sequence[LearnerSpec], dataset: Dataset, mode: FlagMode = FlagMode()) -> MisclassificationMatrix:
    if not specs:
        raise ValueError("need at least one learner spec")
    flags = np.zeros((len(specs), len(dataset)), dtype=bool)
    if mode.variant == "train-on-all":
        for r, spec in enumerate(specs):
            flags[r] = fit(spec, dataset).predict(dataset.X) != dataset.y
    else:
        plan = stratified_folds(dataset, mode.folds, mode.seed)
        flags[:] = out_of_fold_predictions(specs, dataset, plan) != dataset.y
    return MisclassificationMatrix(tuple(s.label for s in specs), flags)


def ensemble_filter(matrix: MisclassificationMatrix, threshold: float) -> FilterOutcome:
    """Remove instances misclassified by at least ``threshold`` of the learners."""
    if not 0 < threshold <= 1:
        raise ValueError(f"threshold {threshold} outside (0, 1]")
    if matrix.flags.shape[0] == 0:
        raise ValueError("matrix has no learners")
    removed = matrix.misclassified_fraction() >= threshold
    return FilterOutcome.from_mask(removed, {"filter": "ensemble", "threshold": threshold,
                                             "learners": list(matrix.learner_ids)})


def biased_filter(spec: LearnerSpec, dataset: Dataset, mode: FlagMode = FlagMode()) -> FilterOutcome:
    matrix = flag_misclassified([spec], dataset, mode)
    return FilterOutcome.from_mask(matrix.flags[0], {"filter": "biased", "learner": spec.label,
                                                     "flag_mode": mode.label})


def apply_outcome(dataset: Dataset, outcome: FilterOutcome) -> tuple[Dataset, bool]:
    """Return the kept instances, or the untouched dataset when filtering is degenerate.

    Degenerate means fewer than two instances survive or a class present
    before filtering disappears. The flag tells the caller a fallback happened.
    """
    if outcome.removed.size == 0:
        return dataset, False
    kept = outcome.kept
    before = np.unique(dataset.y)
    if kept.size < 2 or np.setdiff1d(before, np.unique(dataset.y[kept])).size:
        log.warning("filter on %s is degenerate (%d kept); using unfiltered data", dataset.name, kept.size)
        return dataset, True
    return dataset.subset(kept), False


def _split_for_validation(dataset: Dataset, fraction: float, seed: int, retries: int = 10):
    present = np.unique(dataset.y)
    for attempt in range(retries + 1):
        train, valid = stratified_holdout(dataset, fraction, seed + attempt)
        if (np.array_equal(np.unique(dataset.y[train]), present)
                and np.array_equal(np.unique(dataset.y[valid]), present)):
            return train, valid
    raise ValueError(f"{dataset.name}: no validation split with every class after {retries} retries")


def adaptive_filter(candidates: Sequence[LearnerSpec], target: LearnerSpec, dataset: Dataset,
                    threshold: float = 0.5, mode: FlagMode | None = None,
                    validation_fraction: float = 0.2, seed: int = 0) -> AdaptiveSearchTrace:
    """Greedy forward selection of a filter set, scored by the target's validation accuracy.

    The training part of a stratified holdout is flagged once per candidate
    (flags do not depend on which other learners are in the set), so each
    evaluation only re-thresholds, refits the target and scores it on the
    holdout. Each pass adds the candidate with the best strictly-improving
    accuracy; ties keep the earlier candidate. The search stops when no
    candidate improves.
    """
    if not candidates:
        raise ValueError("need at least one candidate")
    if not 0 < validation_fraction < 1:
        raise ValueError("validation_fraction must be in (0, 1)")
    mode = mode or FlagMode.cross_validated(5, seed)
    train_idx, valid_idx = _split_for_validation(dataset, validation_fraction, seed)
    train, valid = dataset.subset(train_idx), dataset.subset(valid_idx)
    matrix = flag_misclassified(candidates, train, mode)

    def run_la(members: list[int]) -> float:
        data = train
        if members:
            data, _ = apply_outcome(train, ensemble_filter(matrix.rows(members), threshold))
        return accuracy(fit(target, data), valid)

    chosen: list[int] = []
    remaining = list(range(len(candidates)))
    curr = run_la([])
    accuracies = [curr]
    while remaining:
        best_acc, best = curr, None
        for g in remaining:
            acc = run_la(chosen + [g])
            if acc > best_acc:
                best_acc, best = acc, g
        if best is None:
            break
        remaining.remove(best)
        chosen.append(best)
        curr = best_acc
        accuracies.append(curr)
    return AdaptiveSearchTrace(tuple(candidates[i].label for i in chosen), tuple(chosen),
                               tuple(accuracies), threshold, int(valid_idx.size))


def threshold_scores(matrix: MisclassificationMatrix, thresholds: Iterable[float], target: LearnerSpec,
                     dataset: Dataset, protocol: CVProtocol = CVProtocol()) -> dict[float, float]:
    """Mean cross-validated accuracy of ``target`` trained on data filtered at each threshold.

    ``matrix`` holds precomputed flags for every instance of ``dataset``;
    within each fold only training instances are removed and the test fold
    is scored untouched.
    """
    thresholds = sorted(set(thresholds))
    if not thresholds:
        raise ValueError("empty threshold set")
    if matrix.n_instances != len(dataset):
        raise ValueError("matrix does not match dataset size")
    removed = {t: ensemble_filter(matrix, t).removed for t in thresholds}
    scores = {t: [] for t in thresholds}
    for plan in protocol.plans(dataset):
        for f in range(plan.fold_count):
            train_idx, test = plan.train_indices(f), dataset.subset(plan.test_indices(f))
            train = dataset.subset(train_idx)
            for t in thresholds:
                drop = np.isin(train_idx, removed[t])
                data, _ = apply_outcome(train, FilterOutcome.from_mask(drop, {}))
                scores[t].append(accuracy(fit(target, data), test))
    return {t: float(np.mean(v)) for t, v in scores.items()}


def select_best_threshold(matrix: MisclassificationMatrix, thresholds: Iterable[float] = PAPER_THRESHOLDS,
                          target: LearnerSpec | None = None, dataset: Dataset | None = None,
                          protocol: CVProtocol = CVProtocol()) -> tuple[float, float]:
    """Optimistic threshold choice: the best mean CV accuracy, ties to the larger threshold."""
    if target is None or dataset is None:
        raise ValueError("target and dataset are required")
    scores = threshold_scores(matrix, thresholds, target, dataset, protocol)
    best = max(scores, key=lambda t: (scores[t], t))
    return best, scores[best]
