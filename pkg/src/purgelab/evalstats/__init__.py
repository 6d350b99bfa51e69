"""Experiment grids, the voting ensemble and signed-ranks statistics."""
from .experiment import (VOTE, Cell, Condition, ExperimentPlan, ExperimentResult, plan_summary,
                         run_experiment)
from .summary import (RESULTS_SCHEMA, SUMMARY_SCHEMA, SummaryRow, SummaryTable, dataset_means,
                      default_comparisons, results_csv, summarize, summary_json)
from .voting import VotingEnsemble, voting_fit
from .wilcoxon import WilcoxonResult, average_ranks, signed_ranks, wilcoxon_signed_ranks

__all__ = [
    "VOTE", "Cell", "Condition", "ExperimentPlan", "ExperimentResult", "RESULTS_SCHEMA", "SUMMARY_SCHEMA",
    "SummaryRow", "SummaryTable", "VotingEnsemble", "WilcoxonResult", "average_ranks", "dataset_means",
    "default_comparisons", "plan_summary", "results_csv", "run_experiment", "signed_ranks", "summarize",
    "summary_json", "voting_fit", "wilcoxon_signed_ranks",
]
