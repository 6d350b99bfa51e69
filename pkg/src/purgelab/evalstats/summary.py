"""Aggregation of grid results into per-learner comparison tables, plus CSV/JSON output."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .experiment import THRESHOLD_KINDS, VOTE, ExperimentResult
from .wilcoxon import WilcoxonResult, wilcoxon_signed_ranks

RESULTS_SCHEMA = "purgelab.results/1"
SUMMARY_SCHEMA = "purgelab.summary/1"
EQUAL_TOLERANCE = 1e-9
CSV_COLUMNS = ("schema", "dataset", "learner", "condition", "repeat", "fold", "accuracy", "error")


@dataclass(frozen=True)
class SummaryRow:
    learner: str
    baseline_mean: float
    comparison_mean: float
    greater: int  # datasets where the comparison beats the baseline
    equal: int
    less: int
    n_datasets: int
    wilcoxon: WilcoxonResult

    @property
    def p_value(self) -> float:
        return self.wilcoxon.p_two_sided


@dataclass(frozen=True)
class SummaryTable:
    baseline: str
    comparison: str
    rows: tuple[SummaryRow, ...]

    def text(self) -> str:
        head = f"{self.comparison} vs {self.baseline}"
        lines = [head, f"{'learner':<24}{'baseline':>10}{'compare':>10}{'>':>5}{'=':>5}{'<':>5}{'p':>10}"]
        for r in self.rows:
            lines.append(f"{r.learner:<24}{r.baseline_mean:>10.4f}{r.comparison_mean:>10.4f}"
                         f"{r.greater:>5}{r.equal:>5}{r.less:>5}{r.p_value:>10.4g}")
        return "\n".join(lines) + "\n"


def _cell_means(result: ExperimentResult) -> dict[tuple[str, str, str], float]:
    """(dataset, learner, condition) -> mean accuracy over successful repeats and folds."""
    acc: dict[tuple[str, str, str], list[float]] = {}
    for c in result.cells:
        if not c.error:
            acc.setdefault((c.dataset, c.learner, c.condition), []).append(c.accuracy)
    return {k: float(np.mean(v)) for k, v in acc.items()}


def _family(result: ExperimentResult, kind: str) -> list[str]:
    return [c for c in result.conditions() if c.partition(":")[0] == kind and ":" in c]


def dataset_means(result: ExperimentResult, learner: str, condition: str, _means=None) -> dict[str, float]:
    """Per-dataset mean accuracy of ``learner`` under ``condition``.

    Voting conditions have no per-learner cells, so their values are shared
    by every learner. ``<kind>:max`` (for a thresholded kind) takes, per
    dataset, the best threshold in hindsight, an optimistic reference.
    """
    means = _means if _means is not None else _cell_means(result)
    kind, _, arg = condition.partition(":")
    if arg == "max":
        if kind not in THRESHOLD_KINDS:
            raise KeyError(f"{condition!r}: only thresholded conditions have a max")
        members = _family(result, kind)
        if not members:
            raise KeyError(f"condition {condition!r} has no thresholds in the result")
        best: dict[str, float] = {}
        for m in members:
            for ds, v in dataset_means(result, learner, m, means).items():
                best[ds] = max(best.get(ds, -math.inf), v)
        return best
    if condition not in result.conditions():
        raise KeyError(f"condition {condition!r} not in the result")
    present = {(l, c) for (_, l, c) in means}
    owner = learner if (learner, condition) in present or (VOTE, condition) not in present else VOTE
    return {ds: v for (ds, l, c), v in means.items() if l == owner and c == condition}


def _is_learner_free(result: ExperimentResult, condition: str) -> bool:
    kind = condition.partition(":")[0]
    return kind in ("voting", "fvoting")


def summarize(result: ExperimentResult, baseline: str, comparison: str,
              tolerance: float = EQUAL_TOLERANCE) -> SummaryTable:
    """Per learner: mean accuracies, Wilcoxon p over per-dataset means and greater/equal/less counts.

    Only datasets where both conditions produced at least one successful
    cell are paired.
    """
    means = _cell_means(result)
    for cond in (baseline, comparison):
        dataset_means(result, VOTE, cond, means)  # raises for unknown conditions
    if _is_learner_free(result, baseline) and _is_learner_free(result, comparison):
        learners = [VOTE]
    else:
        learners = [l for l in result.learners() if l != VOTE]
    rows = []
    for learner in learners:
        base = dataset_means(result, learner, baseline, means)
        comp = dataset_means(result, learner, comparison, means)
        shared = sorted(set(base) & set(comp))
        if not shared:
            continue
        a = np.array([comp[d] for d in shared])
        b = np.array([base[d] for d in shared])
        diff = a - b
        rows.append(SummaryRow(
            learner, float(np.mean(b)), float(np.mean(a)),
            int(np.sum(diff > tolerance)), int(np.sum(np.abs(diff) <= tolerance)), int(np.sum(diff < -tolerance)),
            len(shared), wilcoxon_signed_ranks(a, b)))
    return SummaryTable(baseline, comparison, tuple(rows))


def default_comparisons(result: ExperimentResult) -> list[tuple[str, str]]:
    """Each condition against ``none`` (and ``fvoting`` against ``voting``), plus the ``max`` references."""
    conds = result.conditions()
    pairs = []
    if "none" in conds:
        for c in conds:
            if c != "none" and not _is_learner_free(result, c):
                pairs.append(("none", c))
        for kind in ("ensemble", "adaptive"):
            if _family(result, kind):
                pairs.append(("none", f"{kind}:max"))
    if "voting" in conds:
        for c in _family(result, "fvoting"):
            pairs.append(("voting", c))
        if _family(result, "fvoting"):
            pairs.append(("voting", "fvoting:max"))
    return pairs


def _fmt(x: float) -> str:
    return "" if math.isnan(x) else repr(float(x))


def results_csv(result: ExperimentResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for c in result.cells:
        w.writerow([RESULTS_SCHEMA, c.dataset, c.learner, c.condition, c.repeat, c.fold, _fmt(c.accuracy), c.error])
    return buf.getvalue()


def _clean(x):
    return None if isinstance(x, float) and math.isnan(x) else x


def summary_json(result: ExperimentResult, comparisons: list[tuple[str, str]] | None = None) -> str:
    means = _cell_means(result)
    per_dataset: dict = {}
    for (ds, l, c), v in sorted(means.items()):
        per_dataset.setdefault(ds, {}).setdefault(l, {})[c] = v
    overall: dict = {}
    for l in result.learners():
        for c in result.conditions():
            vals = [means[(ds, l, c)] for ds in result.datasets() if (ds, l, c) in means]
            if vals:
                overall.setdefault(l, {})[c] = float(np.mean(vals))
    tables = []
    for base, comp in (default_comparisons(result) if comparisons is None else comparisons):
        t = summarize(result, base, comp)
        tables.append({"baseline": base, "comparison": comp,
                       "rows": [{**{k: v for k, v in asdict(r).items() if k != "wilcoxon"},
                                 "wilcoxon": asdict(r.wilcoxon)} for r in t.rows]})
    doc = {
        "schema": SUMMARY_SCHEMA,
        "plan": result.plan_summary,
        "mean_accuracy": overall,
        "per_dataset_mean_accuracy": per_dataset,
        "comparisons": tables,
        "warnings": list(result.warnings),
        "failed_cells": [{"dataset": c.dataset, "learner": c.learner, "condition": c.condition,
                          "repeat": c.repeat, "fold": c.fold, "error": c.error} for c in result.failed_cells()],
        "failed_conditions": [{"learner": l, "condition": c} for l, c in result.failed_conditions()],
    }
    return json.dumps(doc, sort_keys=True, indent=2, default=_clean, allow_nan=False) + "\n"
