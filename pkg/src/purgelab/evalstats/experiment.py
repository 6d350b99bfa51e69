"""Repeated cross-validation grids over (dataset, learner, filter condition).

Every (dataset, repeat, fold) triple is one independent task. Its fold plan
comes from ``derive_seed(master, dataset, repeat)`` (the same plans
:class:`~purgelab.datakit.CVProtocol` builds) and any randomness inside a
condition is seeded from ``derive_seed(master, dataset, repeat, fold, family)``
where ``family`` is the condition kind, so the thresholds of one filter
family share their misclassification flags. Filters only ever see the
training partition of the fold.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from ..datakit import Dataset, stratified_folds
from ..filters import (FlagMode, FilterOutcome, adaptive_filter, apply_outcome, ensemble_filter,
                       flag_misclassified)
from ..learners import LearnerSpec, accuracy, builtin_specs, fit
from ..learners.base import notify
from ..rng import derive_seed
from .voting import voting_fit

log = logging.getLogger(__name__)

VOTE = "vote"  # learner column used for the learner-free voting conditions
KINDS = ("none", "biased", "ensemble", "adaptive", "voting", "fvoting")
THRESHOLD_KINDS = ("ensemble", "adaptive", "fvoting")
DEFAULT_THRESHOLD = 0.5


@dataclass(frozen=True)
class Condition:
    """A training condition.

    ``ensemble``, ``adaptive`` and ``fvoting`` (voting ensemble trained on
    ensemble-filtered data) carry a threshold; a bare name means 0.5.
    """

    kind: str
    threshold: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown condition {self.kind!r}; expected one of {KINDS}")
        if self.kind in THRESHOLD_KINDS:
            t = DEFAULT_THRESHOLD if self.threshold is None else float(self.threshold)
            if not 0 < t <= 1:
                raise ValueError(f"threshold {t} outside (0, 1]")
            object.__setattr__(self, "threshold", t)
        elif self.threshold is not None:
            raise ValueError(f"condition {self.kind!r} takes no threshold")

    @classmethod
    def parse(cls, text: str) -> "Condition":
        kind, _, t = text.strip().partition(":")
        return cls(kind, float(t) if t else None)

    @property
    def id(self) -> str:
        return self.kind if self.threshold is None else f"{self.kind}:{self.threshold:g}"

    @property
    def learner_free(self) -> bool:
        return self.kind in ("voting", "fvoting")


@dataclass(frozen=True)
class ExperimentPlan:
    datasets: tuple[Dataset, ...]
    learners: tuple[LearnerSpec, ...]
    conditions: tuple[Condition, ...] = (Condition("none"),)
    repeats: int = 5
    folds: int = 10
    seed: int = 0
    filter_learners: tuple[LearnerSpec, ...] = field(default_factory=lambda: tuple(builtin_specs(0)))
    flag_mode: FlagMode = FlagMode()
    adaptive_folds: int = 5
    validation_fraction: float = 0.2

    def __post_init__(self):
        for name in ("datasets", "learners", "conditions", "filter_learners"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if not self.datasets:
            raise ValueError("plan needs at least one dataset")
        if not self.conditions:
            raise ValueError("plan needs at least one condition")
        if not self.learners and not all(c.learner_free for c in self.conditions):
            raise ValueError("plan needs at least one learner")
        if self.repeats < 1 or self.folds < 2:
            raise ValueError("plan needs repeats >= 1 and folds >= 2")
        if len({d.name for d in self.datasets}) != len(self.datasets):
            raise ValueError("dataset names must be unique")
        if len({c.id for c in self.conditions}) != len(self.conditions):
            raise ValueError("duplicate conditions")
        if not self.filter_learners and any(c.kind != "none" and c.kind != "biased" for c in self.conditions):
            raise ValueError("filter conditions need filter learners")

    def cell_keys(self) -> list[tuple[str, str, str, int, int]]:
        """Every planned (dataset, learner, condition, repeat, fold), sorted."""
        keys = []
        for ds in self.datasets:
            for c in self.conditions:
                names = [VOTE] if c.learner_free else [s.label for s in self.learners]
                for name in names:
                    for r in range(self.repeats):
                        for f in range(self.folds):
                            keys.append((ds.name, name, c.id, r, f))
        return sorted(keys)


@dataclass(frozen=True)
class Cell:
    dataset: str
    learner: str
    condition: str
    repeat: int
    fold: int
    accuracy: float  # NaN when the cell failed
    error: str = ""

    @property
    def key(self):
        return (self.dataset, self.learner, self.condition, self.repeat, self.fold)


@dataclass(frozen=True)
class ExperimentResult:
    plan_summary: dict
    cells: tuple[Cell, ...]
    warnings: tuple[str, ...] = ()

    def cell_map(self) -> dict:
        return {c.key: c for c in self.cells}

    def conditions(self) -> list[str]:
        return sorted({c.condition for c in self.cells})

    def learners(self) -> list[str]:
        return sorted({c.learner for c in self.cells})

    def datasets(self) -> list[str]:
        return sorted({c.dataset for c in self.cells})

    def failed_cells(self) -> list[Cell]:
        return [c for c in self.cells if c.error]

    def failed_conditions(self) -> list[tuple[str, str]]:
        """(learner, condition) pairs in which every cell failed."""
        status: dict[tuple[str, str], bool] = {}
        for c in self.cells:
            k = (c.learner, c.condition)
            status[k] = status.get(k, False) or not c.error
        return sorted(k for k, ok in status.items() if not ok)


class _FoldContext:
    """Shared state of one (dataset, repeat, fold) task."""

    def __init__(self, plan: ExperimentPlan, ds: Dataset, repeat: int, fold: int, train: Dataset):
        self.plan, self.ds, self.repeat, self.fold, self.train = plan, ds, repeat, fold, train
        self._matrices: dict = {}
        self.warnings: list[str] = []

    def seed(self, family: str) -> int:
        return derive_seed(self.plan.seed, self.ds.name, self.repeat, self.fold, family)

    def flags(self, specs, family: str):
        mode = self.plan.flag_mode.with_seed(self.seed(family))
        key = (tuple(s.label for s in specs), mode)
        if key not in self._matrices:
            self._matrices[key] = flag_misclassified(specs, self.train, mode)
        return self._matrices[key]

    def filtered(self, outcome: FilterOutcome, what: str) -> Dataset:
        data, fell_back = apply_outcome(self.train, outcome)
        if fell_back:
            self.warnings.append(f"{self.ds.name} repeat {self.repeat} fold {self.fold} {what}: "
                                 f"degenerate filter, trained on unfiltered data")
        return data


def _train_and_score(ctx: _FoldContext, cond: Condition, spec: LearnerSpec | None, test: Dataset) -> float:
    plan, train = ctx.plan, ctx.train
    kind = cond.kind
    if kind == "none":
        return accuracy(fit(spec, train), test)
    if kind == "biased":
        matrix = ctx.flags([spec], "biased")
        return accuracy(fit(spec, ctx.filtered(FilterOutcome.from_mask(matrix.flags[0], {}), f"biased/{spec.label}")), test)
    if kind == "ensemble":
        matrix = ctx.flags(plan.filter_learners, "ensemble")
        data = ctx.filtered(ensemble_filter(matrix, cond.threshold), f"{cond.id}/{spec.label}")
        return accuracy(fit(spec, data), test)
    if kind == "adaptive":
        seed = derive_seed(ctx.seed("adaptive"), spec.label)
        mode = FlagMode.cross_validated(plan.adaptive_folds, seed, strict=False)
        trace = adaptive_filter(plan.filter_learners, spec, train, cond.threshold, mode,
                                plan.validation_fraction, seed)
        data = train
        if trace.chosen_index:
            members = [plan.filter_learners[i] for i in trace.chosen_index]
            matrix = flag_misclassified(members, train, mode)
            data = ctx.filtered(ensemble_filter(matrix, cond.threshold), f"{cond.id}/{spec.label}")
        return accuracy(fit(spec, data), test)
    if kind == "voting":
        return accuracy(voting_fit(plan.filter_learners, train), test)
    if kind == "fvoting":
        matrix = ctx.flags(plan.filter_learners, "ensemble")
        data = ctx.filtered(ensemble_filter(matrix, cond.threshold), cond.id)
        return accuracy(voting_fit(plan.filter_learners, data), test)
    raise AssertionError(kind)


def _run_task(plan: ExperimentPlan, d_index: int, repeat: int, fold: int) -> tuple[list[Cell], list[str]]:
    ds = plan.datasets[d_index]
    fold_plan = stratified_folds(ds, plan.folds, derive_seed(plan.seed, ds.name, repeat))
    train = ds.subset(fold_plan.train_indices(fold))
    test = ds.subset(fold_plan.test_indices(fold))
    notify("task", ds.name, repeat, fold, test.origin)
    ctx = _FoldContext(plan, ds, repeat, fold, train)
    cells = []
    for cond in plan.conditions:
        targets = [None] if cond.learner_free else list(plan.learners)
        for spec in targets:
            name = VOTE if spec is None else spec.label
            try:
                acc, err = _train_and_score(ctx, cond, spec, test), ""
            except Exception as exc:  # recorded per cell; the grid keeps going
                log.warning("cell %s/%s/%s r%d f%d failed: %s", ds.name, name, cond.id, repeat, fold, exc)
                acc, err = float("nan"), f"{type(exc).__name__}: {exc}"
            cells.append(Cell(ds.name, name, cond.id, repeat, fold, acc, err))
    return cells, ctx.warnings


def _run_task_packed(args):
    return _run_task(*args)


def run_experiment(plan: ExperimentPlan, jobs: int = 1) -> ExperimentResult:
    """Run the full grid; ``jobs`` > 1 spreads tasks over worker processes.

    The result does not depend on ``jobs``: every task is seeded from its
    own coordinates and cells are sorted before they are returned.
    """
    if jobs < 1:
        raise ValueError("jobs must be >= 1")
    tasks = [(plan, d, r, f) for d in range(len(plan.datasets))
             for r in range(plan.repeats) for f in range(plan.folds)]
    if jobs == 1:
        outputs = [_run_task_packed(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outputs = list(pool.map(_run_task_packed, tasks))
    cells = sorted((c for out, _ in outputs for c in out), key=lambda c: c.key)
    warnings = [w for _, ws in outputs for w in ws]
    if len(cells) != len(plan.cell_keys()):
        raise AssertionError("incomplete grid")
    return ExperimentResult(plan_summary(plan), tuple(cells), tuple(warnings))


def plan_summary(plan: ExperimentPlan) -> dict:
    return {
        "datasets": [d.name for d in plan.datasets],
        "learners": [s.label for s in plan.learners],
        "conditions": [c.id for c in plan.conditions],
        "filter_learners": [s.label for s in plan.filter_learners],
        "flag_mode": plan.flag_mode.label,
        "repeats": plan.repeats,
        "folds": plan.folds,
        "seed": plan.seed,
    }
