"""Wilcoxon signed-ranks test for paired samples.

Zero differences follow Demsar's recommendation: their ranks are split
evenly between the positive and negative sums, and if there is an odd number
of zeros one of them is dropped first. Absolute differences are compared
after rounding to 12 decimals so float noise does not break ties.

With at most ``EXACT_LIMIT`` effective pairs the two-sided p-value is exact:
the share of the 2^m sign assignments of the m non-zero ranks whose rank sum
lies at least as far from its null mean as the observed one. Beyond that a
normal approximation is used with the exact null variance of the tied,
zero-split ranks and a 0.5 continuity correction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EXACT_LIMIT = 25
DECIMALS = 12


@dataclass(frozen=True)
class WilcoxonResult:
    n_effective: int
    w_plus: float
    w_minus: float
    p_two_sided: float
    method: str  # "exact" or "normal-approximation"


def average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing their mean rank."""
    values = np.asarray(values, dtype=float)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size)
    sorted_vals = values[order]
    start = 0
    while start < values.size:
        stop = start + 1
        while stop < values.size and sorted_vals[stop] == sorted_vals[start]:
            stop += 1
        ranks[order[start:stop]] = (start + 1 + stop) / 2.0
        start = stop
    return ranks


def signed_ranks(a, b) -> tuple[np.ndarray, np.ndarray]:
    """Ranks and signs (+1, -1, 0) of the effective paired differences."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("samples must be 1-D and of equal length")
    if a.size == 0:
        raise ValueError("empty samples")
    d = np.round(a - b, DECIMALS)
    zeros = np.flatnonzero(d == 0)
    if zeros.size % 2 == 1:
        d = np.delete(d, zeros[0])
    return average_ranks(np.abs(d)), np.sign(d)


def _exact_tail(doubled: list[int], observed: int) -> float:
    """P(|sum of +-r| >= observed) over all sign assignments of integer ranks."""
    total = sum(doubled)
    counts = {0: 1}
    for r in doubled:
        nxt = dict(counts)
        for s, c in counts.items():
            nxt[s + r] = nxt.get(s + r, 0) + c
        counts = nxt
    # a positive subset summing to s gives a signed sum of 2s - total
    hits = sum(c for s, c in counts.items() if abs(2 * s - total) >= observed)
    return hits / 2 ** len(doubled)


def wilcoxon_signed_ranks(a, b, exact_limit: int = EXACT_LIMIT) -> WilcoxonResult:
    ranks, signs = signed_ranks(a, b)
    n = ranks.size
    zero_half = ranks[signs == 0].sum() / 2.0
    w_plus = float(ranks[signs > 0].sum() + zero_half)
    w_minus = float(ranks[signs < 0].sum() + zero_half)
    nonzero = ranks[signs != 0]
    if nonzero.size == 0:
        return WilcoxonResult(n, w_plus, w_minus, 1.0, "exact" if n <= exact_limit else "normal-approximation")
    if n <= exact_limit:
        doubled = [int(round(2 * r)) for r in nonzero]
        observed = int(round(2 * abs(w_plus - w_minus)))
        # w_plus - w_minus equals the signed sum of the non-zero ranks
        return WilcoxonResult(n, w_plus, w_minus, min(1.0, _exact_tail(doubled, observed)), "exact")
    sigma = math.sqrt(float(np.sum(nonzero ** 2)) / 4.0)
    z = max(abs(w_plus - n * (n + 1) / 4.0) - 0.5, 0.0) / sigma
    p = math.erfc(z / math.sqrt(2.0))
    return WilcoxonResult(n, w_plus, w_minus, min(1.0, p), "normal-approximation")
