"""Byte-level BPE: training, encoding, decoding and model files."""
from __future__ import annotations

import heapq
import json
import os
from collections import Counter, defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .corpus import Corpus
from .pretokenize import PreTokenizerSpec, get_spec, split_text

MODEL_VERSION = 1
N_BYTES = 256

Pair = tuple[int, int]


class ModelError(ValueError):
    """Raised for invalid models or model files."""


@dataclass(frozen=True)
class TokenizerModel:
    """A pre-tokenizer plus an ordered merge list.

    Ids 0..255 are the single bytes; merge ``i`` creates id ``256 + i``.
    ``requested_vocab_size`` is what training was asked for, which can exceed
    ``vocab_size`` when the corpus ran out of repeated pairs.
    """

    spec: PreTokenizerSpec
    merges: tuple[Pair, ...] = ()
    requested_vocab_size: int | None = None
    vocab: tuple[bytes, ...] = field(init=False, repr=False, compare=False)
    ranks: dict = field(init=False, repr=False, compare=False)
    _cache: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        spec = get_spec(self.spec)
        merges = tuple((int(a), int(b)) for a, b in self.merges)
        vocab = [bytes([i]) for i in range(N_BYTES)]
        ranks = {}
        for rank, (a, b) in enumerate(merges):
            new_id = N_BYTES + rank
            if not (0 <= a < new_id and 0 <= b < new_id):
                raise ModelError(f"merge {rank} references an id not yet created: ({a}, {b})")
            if (a, b) in ranks:
                raise ModelError(f"merge {rank} duplicates pair ({a}, {b})")
            ranks[(a, b)] = rank
            vocab.append(vocab[a] + vocab[b])
        object.__setattr__(self, "spec", spec)
        object.__setattr__(self, "merges", merges)
        object.__setattr__(self, "vocab", tuple(vocab))
        object.__setattr__(self, "ranks", ranks)
        object.__setattr__(self, "_cache", {})

    @property
    def vocab_size(self) -> int:
        return N_BYTES + len(self.merges)

    def truncated(self, n_merges: int) -> "TokenizerModel":
        """The model after only its first ``n_merges`` merges."""
        return TokenizerModel(self.spec, self.merges[:n_merges], self.requested_vocab_size)

    def encode_pretoken(self, piece: bytes) -> tuple[int, ...]:
        cached = self._cache.get(piece)
        if cached is None:
            cached = _apply_merges(list(piece), self.ranks)
            self._cache[piece] = cached
        return cached

    def encode(self, text: str) -> list[int]:
        ids: list[int] = []
        for piece in split_text(self.spec, text):
            ids.extend(self.encode_pretoken(piece.encode("utf-8")))
        return ids

    def decode_bytes(self, ids: Iterable[int]) -> bytes:
        vocab = self.vocab
        n = len(vocab)
        parts = []
        for i in ids:
            if not 0 <= i < n:
                raise ModelError(f"token id {i} out of range for vocabulary of size {n}")
            parts.append(vocab[i])
        return b"".join(parts)

    def decode(self, ids: Iterable[int]) -> str:
        return self.decode_bytes(ids).decode("utf-8")

    def token_str(self, token_id: int) -> str:
        return render_token(self.vocab[token_id])


def _apply_merges(ids: list[int], ranks: dict) -> tuple[int, ...]:
    # Repeatedly merge every occurrence of the lowest-ranked adjacent pair.
    while len(ids) > 1:
        best = None
        best_rank = None
        for pair in zip(ids, ids[1:]):
            r = ranks.get(pair)
            if r is not None and (best_rank is None or r < best_rank):
                best, best_rank = pair, r
        if best is None:
            break
        ids = merge_pair(ids, best, N_BYTES + best_rank)
    return tuple(ids)


def merge_pair(ids: Sequence[int], pair: Pair, new_id: int) -> list[int]:
    """Replace non-overlapping occurrences of ``pair``, scanning left to right."""
    out = []
    i = 0
    n = len(ids)
    a, b = pair
    while i < n:
        if i + 1 < n and ids[i] == a and ids[i + 1] == b:
            out.append(new_id)
            i += 2
        else:
            out.append(ids[i])
            i += 1
    return out


def render_token(raw: bytes) -> str:
    """Readable form of a token: spaces shown as ``_``, control bytes escaped."""
    text = raw.decode("utf-8", errors="backslashreplace")
    text = text.replace(" ", "_").replace("\n", "\\n").replace("\t", "\\t").replace("\r", "\\r")
    return text


def _count_chunk(args) -> Counter:
    spec_name, docs = args
    counts: Counter = Counter()
    for doc in docs:
        counts.update(split_text(spec_name, doc))
    return counts


def pretoken_counts(corpus: Corpus | Iterable[str], spec: PreTokenizerSpec | str,
                    threads: int = 1, chunk_docs: int = 2000) -> Counter:
    """Frequency table of pre-token byte strings over a corpus."""
    spec = get_spec(spec)
    docs = list(corpus)
    counts: Counter = Counter()
    if threads > 1 and len(docs) > chunk_docs:
        chunks = [(spec.name, docs[i:i + chunk_docs]) for i in range(0, len(docs), chunk_docs)]
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for part in pool.map(_count_chunk, chunks):
                counts.update(part)
    else:
        counts = _count_chunk((spec.name, docs))
    return Counter({piece.encode("utf-8"): n for piece, n in counts.items()})


def train(corpus: Corpus | Iterable[str], spec: PreTokenizerSpec | str, vocab_size: int,
          threads: int = 1) -> TokenizerModel:
    """Fit a BPE model.

    Each step merges the most frequent adjacent pair; ties go to the pair whose
    left token bytes sort first, then right token bytes. Pairs seen only once
    are never merged, so training may stop short of ``vocab_size``.
    """
    spec = get_spec(spec)
    if vocab_size < N_BYTES:
        raise ValueError(f"vocab_size must be at least {N_BYTES}, got {vocab_size}")
    docs = list(corpus)
    if not docs:
        raise ValueError("cannot train on an empty corpus")

    table = pretoken_counts(docs, spec, threads=threads)
    # sorted for a stable word order; results do not depend on it
    words = [list(piece) for piece in sorted(table)]
    freqs = [table[piece] for piece in sorted(table)]

    vocab = [bytes([i]) for i in range(N_BYTES)]
    pair_counts: dict[Pair, int] = defaultdict(int)
    where: dict[Pair, set[int]] = defaultdict(set)
    for idx, (w, f) in enumerate(zip(words, freqs)):
        for pair in zip(w, w[1:]):
            pair_counts[pair] += f
            where[pair].add(idx)

    heap = [(-c, vocab[a], vocab[b], a, b) for (a, b), c in pair_counts.items()]
    heapq.heapify(heap)

    merges: list[Pair] = []
    target = vocab_size - N_BYTES
    while len(merges) < target and heap:
        neg, _, _, a, b = heapq.heappop(heap)
        pair = (a, b)
        if pair_counts.get(pair, 0) != -neg:
            continue  # stale entry
        if -neg < 2:
            break
        new_id = N_BYTES + len(merges)
        merges.append(pair)
        vocab.append(vocab[a] + vocab[b])

        touched: set[Pair] = set()
        for idx in sorted(where.pop(pair)):
            w = words[idx]
            f = freqs[idx]
            if len(w) < 2:
                continue
            for p in zip(w, w[1:]):
                pair_counts[p] -= f
                touched.add(p)
            w = merge_pair(w, pair, new_id)
            words[idx] = w
            for p in zip(w, w[1:]):
                pair_counts[p] += f
                where[p].add(idx)
                touched.add(p)
        for p in touched:
            c = pair_counts[p]
            if c <= 0:
                del pair_counts[p]
                where.pop(p, None)
            elif p != pair:
                heapq.heappush(heap, (-c, vocab[p[0]], vocab[p[1]], p[0], p[1]))
        pair_counts.pop(pair, None)

    return TokenizerModel(spec, tuple(merges), requested_vocab_size=vocab_size)


def model_to_json(model: TokenizerModel) -> str:
    head = {
        "version": MODEL_VERSION,
        "pretokenizer": model.spec.name,
        "requested_vocab_size": model.requested_vocab_size,
        "achieved_vocab_size": model.vocab_size,
    }
    lines = ["{"]
    for key, value in head.items():
        lines.append(f"  {json.dumps(key)}: {json.dumps(value)},")
    if model.merges:
        lines.append('  "merges": [')
        body = [f"    [{a}, {b}]" for a, b in model.merges]
        lines.append(",\n".join(body))
        lines.append("  ]")
    else:
        lines.append('  "merges": []')
    lines.append("}")
    return "\n".join(lines) + "\n"


def model_from_json(text: str) -> TokenizerModel:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"model file is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ModelError("model file must contain a JSON object")
    version = data.get("version")
    if version != MODEL_VERSION:
        raise ModelError(f"unsupported model version {version!r} (expected {MODEL_VERSION})")
    try:
        spec = get_spec(data["pretokenizer"])
        merges = data["merges"]
    except KeyError as exc:
        raise ModelError(f"model file is missing field {exc}") from None
    except ValueError as exc:
        raise ModelError(str(exc)) from None
    if not isinstance(merges, list) or not all(
            isinstance(m, list) and len(m) == 2 and all(type(x) is int for x in m) for m in merges):
        raise ModelError("merges must be a list of [left_id, right_id] integer pairs")
    model = TokenizerModel(spec, tuple(tuple(m) for m in merges), data.get("requested_vocab_size"))
    achieved = data.get("achieved_vocab_size", model.vocab_size)
    if achieved != model.vocab_size:
        raise ModelError(f"achieved_vocab_size {achieved} does not match {len(merges)} merges")
    return model


def save_model(model: TokenizerModel, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(model_to_json(model))


def load_model(path: str | os.PathLike) -> TokenizerModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_json(fh.read())
