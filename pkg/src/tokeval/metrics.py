"""Task-agnostic intrinsic measures over a tokenizer's unigram token distribution.

Entropies are in nats. Efficiency divides by ``ln V`` so the log base cancels.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import asdict, dataclass
from typing import Iterable, Mapping

import numpy as np

from .bpe import TokenizerModel

DEFAULT_ALPHA = 2.5
NORMALIZERS = ("full_vocab", "observed_vocab")


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class TokenDistribution:
    counts: Mapping[int, int]
    vocab_size_reference: int

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    @property
    def observed_types(self) -> int:
        return sum(1 for c in self.counts.values() if c > 0)

    def probabilities(self) -> np.ndarray:
        c = np.array([v for v in self.counts.values() if v > 0], dtype=np.float64)
        if c.size == 0:
            raise MetricError("token distribution is empty")
        return c / c.sum()

    @classmethod
    def from_probabilities(cls, probs: Iterable[float], vocab_size_reference: int | None = None,
                           scale: int = 10**12) -> "TokenDistribution":
        """Build from probabilities by scaling to integer counts (test helper)."""
        probs = list(probs)
        counts = {i: round(p * scale) for i, p in enumerate(probs)}
        return cls(counts, vocab_size_reference or len(probs))


@dataclass(frozen=True)
class MetricReport:
    corpus_token_count: int
    shannon_entropy: float
    renyi_entropy: float
    renyi_efficiency: float
    renyi_efficiency_observed: float
    alpha: float
    normalizer: str
    vocabulary_coverage: float
    observed_types: int
    vocab_size: int

    def as_dict(self) -> dict:
        return asdict(self)


def token_distribution(model: TokenizerModel, corpus: Iterable[str]) -> TokenDistribution:
    counts: Counter = Counter()
    for doc in corpus:
        counts.update(model.encode(doc))
    return TokenDistribution(dict(sorted(counts.items())), model.vocab_size)


def corpus_token_count(dist: TokenDistribution) -> int:
    return dist.total


def shannon_entropy(dist: TokenDistribution) -> float:
    p = dist.probabilities()
    return float(-np.sum(p * np.log(p)))


def _check_alpha(alpha: float) -> None:
    if not (alpha > 0) or alpha == 1 or not math.isfinite(alpha):
        raise MetricError(f"alpha must be a positive real other than 1, got {alpha!r}")


def renyi_entropy(dist: TokenDistribution, alpha: float = DEFAULT_ALPHA) -> float:
    """H_a = ln(sum p_i^a) / (1 - a)."""
    _check_alpha(alpha)
    p = dist.probabilities()
    # log-sum-exp keeps large alpha from underflowing
    logs = alpha * np.log(p)
    m = logs.max()
    log_sum = m + math.log(float(np.sum(np.exp(logs - m))))
    return float(log_sum / (1.0 - alpha))


def renyi_efficiency(dist: TokenDistribution, alpha: float = DEFAULT_ALPHA,
                     normalizer: str = "full_vocab") -> float:
    if normalizer == "full_vocab":
        v = dist.vocab_size_reference
    elif normalizer == "observed_vocab":
        v = dist.observed_types
    else:
        raise MetricError(f"unknown normalizer {normalizer!r}; expected one of {NORMALIZERS}")
    if v < 2:
        raise MetricError(f"normalizer size must be at least 2, got {v}")
    return renyi_entropy(dist, alpha) / math.log(v)


def vocabulary_coverage(model: TokenizerModel, corpus: Iterable[str] | TokenDistribution) -> float:
    """Fraction of the vocabulary that occurs at least once in the corpus."""
    dist = corpus if isinstance(corpus, TokenDistribution) else token_distribution(model, corpus)
    return dist.observed_types / model.vocab_size


def metric_report(model: TokenizerModel, corpus: Iterable[str], alpha: float = DEFAULT_ALPHA,
                  normalizer: str = "full_vocab") -> MetricReport:
    dist = token_distribution(model, corpus)
    if dist.total == 0:
        raise MetricError("reference corpus produced no tokens")
    observed = (renyi_efficiency(dist, alpha, "observed_vocab")
                if dist.observed_types >= 2 else float("nan"))
    return MetricReport(
        corpus_token_count=corpus_token_count(dist),
        shannon_entropy=shannon_entropy(dist),
        renyi_entropy=renyi_entropy(dist, alpha),
        renyi_efficiency=renyi_efficiency(dist, alpha, normalizer),
        renyi_efficiency_observed=observed,
        alpha=alpha,
        normalizer=normalizer,
        vocabulary_coverage=vocabulary_coverage(model, dist),
        observed_types=dist.observed_types,
        vocab_size=model.vocab_size,
    )
