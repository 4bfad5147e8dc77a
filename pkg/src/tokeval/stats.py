"""Paired significance tests and correlation."""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Hashable, Mapping, Sequence

import numpy as np
from scipy.special import gammaincc

EXACT_THRESHOLD = 25
SIGNIFICANCE = 0.05
METHODS = ("auto", "chi2_corrected", "exact_binomial")


class StatsError(ValueError):
    pass


@dataclass(frozen=True)
class McNemarResult:
    b: int
    c: int
    statistic: float
    p_raw: float
    p_adjusted: float
    method: str

    @property
    def significant(self) -> bool:
        return self.p_adjusted < SIGNIFICANCE


def chi2_sf_1dof(x: float) -> float:
    """Upper tail of chi-square with one degree of freedom, Q(1/2, x/2)."""
    if x <= 0:
        return 1.0
    return float(gammaincc(0.5, x / 2.0))


def exact_binomial_p(b: int, c: int) -> float:
    """Two-sided sign test p-value for b successes out of b + c at p = 1/2."""
    n = b + c
    if n == 0:
        return 1.0
    k = min(b, c)
    tail = sum(math.comb(n, i) for i in range(k + 1))
    return min(1.0, 2.0 * tail / 2.0**n)


def discordant_counts(gold: Sequence, preds_a: Sequence, preds_b: Sequence) -> tuple[int, int]:
    if not (len(gold) == len(preds_a) == len(preds_b)):
        raise StatsError(f"length mismatch: gold={len(gold)} a={len(preds_a)} b={len(preds_b)}")
    if len(gold) == 0:
        raise StatsError("no predictions to compare")
    b = c = 0
    for g, pa, pb in zip(gold, preds_a, preds_b):
        ok_a = pa == g
        ok_b = pb == g
        if ok_a and not ok_b:
            b += 1
        elif ok_b and not ok_a:
            c += 1
    return b, c


def mcnemar_from_counts(b: int, c: int, m: int = 1, method: str = "auto") -> McNemarResult:
    if b < 0 or c < 0:
        raise StatsError("discordant counts must be non-negative")
    if method not in METHODS:
        raise StatsError(f"unknown McNemar method {method!r}")
    if method == "auto":
        method = "chi2_corrected" if b + c >= EXACT_THRESHOLD else "exact_binomial"
    # the corrected chi-square statistic is reported for both methods
    stat = max(abs(b - c) - 1, 0) ** 2 / (b + c) if b + c else 0.0
    if b + c == 0:
        p = 1.0
    elif method == "chi2_corrected":
        p = chi2_sf_1dof(stat)
    else:
        p = exact_binomial_p(b, c)
    return McNemarResult(b, c, float(stat), p, bonferroni(p, m), method)


def mcnemar(gold: Sequence, preds_a: Sequence, preds_b: Sequence, m: int = 1,
            method: str = "auto") -> McNemarResult:
    """McNemar's test on two prediction lists over the same items.

    ``b`` counts items A gets right and B wrong, ``c`` the reverse. Seed runs
    can be pooled by concatenating their predictions (and gold).
    """
    b, c = discordant_counts(gold, preds_a, preds_b)
    return mcnemar_from_counts(b, c, m, method)


def bonferroni(p: float, m: int) -> float:
    if not 0.0 <= p <= 1.0:
        raise StatsError(f"p-value must lie in [0, 1], got {p!r}")
    if m < 1 or int(m) != m:
        raise StatsError(f"number of tests must be a positive integer, got {m!r}")
    return min(1.0, m * p)


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise StatsError(f"pearson needs two equal-length vectors, got {x.shape} and {y.shape}")
    if x.size < 2:
        raise StatsError("pearson needs at least two points")
    dx = x - x.mean()
    dy = y - y.mean()
    sx = math.sqrt(float(dx @ dx))
    sy = math.sqrt(float(dy @ dy))
    if sx == 0 or sy == 0:
        raise StatsError("pearson is undefined for a constant vector")
    r = float((dx / sx) @ (dy / sy))
    return max(-1.0, min(1.0, r))


def pairwise_mcnemar(gold: Sequence, predictions: Mapping[Hashable, Sequence], m: int | None = None,
                     method: str = "auto") -> dict[tuple, McNemarResult]:
    """McNemar for every unordered pair of systems, keyed ``(name_a, name_b)`` in input order.

    ``m`` defaults to the number of pairs.
    """
    names = list(predictions)
    pairs = list(combinations(names, 2))
    if m is None:
        m = max(1, len(pairs))
    return {(a, b): mcnemar(gold, predictions[a], predictions[b], m=m, method=method)
            for a, b in pairs}


def accuracy(gold: Sequence, preds: Sequence) -> float:
    if len(gold) != len(preds) or not gold:
        raise StatsError("accuracy needs equal-length, non-empty sequences")
    return sum(g == p for g, p in zip(gold, preds)) / len(gold)
