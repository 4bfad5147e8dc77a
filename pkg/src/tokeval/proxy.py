"""Task-aware proxy: logistic regression over binary bag-of-token features.

A tokenizer is scored by how well a sparse L1 logistic regression, using its
tokens as presence features, predicts a task's labels. Sentence-pair tasks
use token combinations across the two texts:

``cartesian``
    one feature per (token in text_a, token in text_b) pair.
``shared_disjoint``
    ``both(t)`` for tokens in both texts, ``xor(t)`` for tokens in exactly one.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .bpe import TokenizerModel, render_token
from .solver import DEFAULT_C, DEFAULT_MAX_ITER, DEFAULT_TOL, LogRegFit, train_logreg

TASK_KINDS = ("binary", "multiclass", "multilabel")
PAIR_MODES = ("none", "cartesian", "shared_disjoint")
DEFAULT_MAX_FEATURES = 5_000_000
TSV_HEADER = ("text_a", "text_b", "labels")


class TaskError(ValueError):
    """Raised for malformed task data or inconsistent proxy settings."""


@dataclass(frozen=True)
class Instance:
    text_a: str
    text_b: str | None
    labels: tuple[str, ...]


@dataclass
class TaskDataset:
    instances: list[Instance]
    label_space: tuple[str, ...]
    task_kind: str
    pair_mode: str = "none"

    def __post_init__(self):
        if self.task_kind not in TASK_KINDS:
            raise TaskError(f"unknown task kind {self.task_kind!r}")
        if self.pair_mode not in PAIR_MODES:
            raise TaskError(f"unknown pair mode {self.pair_mode!r}")
        if self.task_kind != "multilabel":
            for i, inst in enumerate(self.instances):
                if len(inst.labels) != 1:
                    raise TaskError(f"instance {i}: {self.task_kind} tasks need exactly one label")
        has_b = [inst.text_b is not None for inst in self.instances]
        if self.pair_mode == "none" and any(has_b):
            raise TaskError("instances carry text_b but pair mode is 'none'")
        if self.pair_mode != "none" and not all(has_b):
            raise TaskError(f"pair mode {self.pair_mode!r} needs text_b on every instance")

    def __len__(self) -> int:
        return len(self.instances)

    def texts(self) -> list[str]:
        out = []
        for inst in self.instances:
            out.append(inst.text_a)
            if inst.text_b is not None:
                out.append(inst.text_b)
        return out

    def with_label_space(self, label_space: Sequence[str], task_kind: str | None = None) -> "TaskDataset":
        return TaskDataset(self.instances, tuple(label_space), task_kind or self.task_kind, self.pair_mode)


def escape_field(text: str) -> str:
    return (text.replace("\\", "\\\\").replace("\t", "\\t")
            .replace("\n", "\\n").replace("\r", "\\r"))


def unescape_field(text: str) -> str:
    if "\\" not in text:
        return text
    out = []
    i = 0
    mapping = {"n": "\n", "t": "\t", "r": "\r", "\\": "\\"}
    while i < len(text):
        ch = text[i]
        if ch == "\\" and i + 1 < len(text) and text[i + 1] in mapping:
            out.append(mapping[text[i + 1]])
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def infer_task_kind(instances: Sequence[Instance]) -> str:
    if any(len(inst.labels) != 1 for inst in instances):
        return "multilabel"
    n_labels = len({inst.labels[0] for inst in instances})
    return "binary" if n_labels <= 2 else "multiclass"


def parse_task(lines: Iterable[str], task_kind: str = "auto", pair_mode: str = "auto",
               source: str = "<task>") -> TaskDataset:
    it = iter(lines)
    header = next(it, None)
    if header is None or tuple(header.rstrip("\r\n").split("\t")) != TSV_HEADER:
        raise TaskError(f"{source}: expected header 'text_a<TAB>text_b<TAB>labels'")
    instances = []
    for lineno, line in enumerate(it, start=2):
        line = line.rstrip("\n")
        if line.endswith("\r"):
            line = line[:-1]
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise TaskError(f"{source}:{lineno}: expected 3 tab-separated fields, got {len(parts)}")
        a, b, labels = parts
        label_list = tuple(unescape_field(x) for x in labels.split(",") if x != "")
        instances.append(Instance(unescape_field(a), unescape_field(b) if b else None, label_list))
    if task_kind == "auto":
        task_kind = infer_task_kind(instances)
    if pair_mode == "auto":
        pair_mode = "cartesian" if instances and all(i.text_b is not None for i in instances) else "none"
    label_space = tuple(sorted({lab for inst in instances for lab in inst.labels}))
    return TaskDataset(instances, label_space, task_kind, pair_mode)


def load_task(path: str | os.PathLike, task_kind: str = "auto", pair_mode: str = "auto") -> TaskDataset:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_task(fh, task_kind, pair_mode, source=os.fspath(path))


def format_task(dataset: TaskDataset) -> str:
    rows = ["\t".join(TSV_HEADER)]
    for inst in dataset.instances:
        b = escape_field(inst.text_b) if inst.text_b is not None else ""
        labels = ",".join(escape_field(x) for x in inst.labels)
        rows.append(f"{escape_field(inst.text_a)}\t{b}\t{labels}")
    return "\n".join(rows) + "\n"


def save_task(dataset: TaskDataset, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_task(dataset))


# Feature keys: ("u", t), ("p", ta, tb), ("both", t), ("xor", t)
FeatureKey = tuple


@dataclass
class FeatureSpace:
    index: dict[Hashable, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.index)

    def keys(self) -> list:
        return list(self.index)

    def name(self, key: FeatureKey, model: TokenizerModel | None = None) -> str:
        show = (lambda t: render_token(model.vocab[t])) if model is not None else str
        kind, *toks = key
        if kind == "u":
            return show(toks[0])
        if kind == "p":
            return f"{show(toks[0])}|{show(toks[1])}"
        return f"{kind}({show(toks[0])})"


def instance_keys(model: TokenizerModel, inst: Instance, pair_mode: str) -> list[FeatureKey]:
    """Sorted, de-duplicated feature keys present in one instance."""
    a = set(model.encode(inst.text_a))
    if pair_mode == "none":
        return [("u", t) for t in sorted(a)]
    if inst.text_b is None:
        raise TaskError(f"pair mode {pair_mode!r} needs text_b")
    b = set(model.encode(inst.text_b))
    if pair_mode == "cartesian":
        return [("p", ta, tb) for ta in sorted(a) for tb in sorted(b)]
    if pair_mode == "shared_disjoint":
        both = [("both", t) for t in sorted(a & b)]
        return both + [("xor", t) for t in sorted(a ^ b)]
    raise TaskError(f"unknown pair mode {pair_mode!r}")


def featurize(model: TokenizerModel, dataset: TaskDataset, space: FeatureSpace | None = None,
              max_features: int = DEFAULT_MAX_FEATURES) -> tuple[FeatureSpace, sp.csr_matrix]:
    """Binary presence matrix for ``dataset``.

    With ``space=None`` a new feature space is built from this dataset (use the
    training split). With an existing space, unseen features are dropped.
    """
    per_instance = [instance_keys(model, inst, dataset.pair_mode) for inst in dataset.instances]
    building = space is None
    if building:
        space = FeatureSpace()
    index = space.index
    indptr = [0]
    indices: list[int] = []
    for keys in per_instance:
        row = []
        for key in keys:
            j = index.get(key)
            if j is None:
                if not building:
                    continue
                j = len(index)
                if j >= max_features:
                    hint = (" use pair mode 'shared_disjoint' for long texts"
                            if dataset.pair_mode == "cartesian" else "")
                    raise TaskError(f"feature space exceeds the cap of {max_features} features;{hint}")
                index[key] = j
            row.append(j)
        row.sort()
        indices.extend(row)
        indptr.append(len(indices))
    data = np.ones(len(indices), dtype=np.float64)
    X = sp.csr_matrix((data, np.array(indices, dtype=np.int64), np.array(indptr, dtype=np.int64)),
                      shape=(len(per_instance), len(space)))
    return space, X


def label_matrix(dataset: TaskDataset, label_space: Sequence[str]) -> np.ndarray:
    pos = {lab: k for k, lab in enumerate(label_space)}
    Y = np.zeros((len(dataset), len(label_space)), dtype=bool)
    for i, inst in enumerate(dataset.instances):
        for lab in inst.labels:
            k = pos.get(lab)
            if k is not None:
                Y[i, k] = True
    return Y


@dataclass
class ProxyModel:
    space: FeatureSpace
    label_space: tuple[str, ...]
    task_kind: str
    pair_mode: str
    C: float
    classifiers: list[LogRegFit]
    # labels each classifier scores; binary tasks have one classifier for label_space[1]
    classifier_labels: tuple[str, ...]

    def scores(self, X) -> np.ndarray:
        cols = [clf.decision_function(X) for clf in self.classifiers]
        return np.column_stack(cols) if cols else np.zeros((X.shape[0], 0))

    @property
    def n_features(self) -> int:
        return len(self.space)


def _constant_fit(n_features: int, positive: bool, C: float) -> LogRegFit:
    # label never or always present in training: no weights, sign-only intercept
    return LogRegFit(coef=np.zeros(n_features), intercept=1.0 if positive else -1.0, C=C,
                     n_iter=0, objective=float("nan"), converged=True)


def train_proxy(model: TokenizerModel, train: TaskDataset, C: float = DEFAULT_C,
                tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                max_features: int = DEFAULT_MAX_FEATURES, threads: int = 1) -> ProxyModel:
    if len(train) == 0:
        raise TaskError("training set is empty")
    label_space = tuple(train.label_space)
    if len(label_space) < 2 and train.task_kind != "multilabel":
        raise TaskError("training labels need at least two distinct classes")
    if train.task_kind == "binary" and len(label_space) != 2:
        raise TaskError(f"binary task needs exactly two labels, got {len(label_space)}")
    space, X = featurize(model, train, max_features=max_features)
    Y = label_matrix(train, label_space)
    if train.task_kind == "binary":
        targets = [label_space[1]]
        columns = [Y[:, 1]]
    else:
        targets = list(label_space)
        columns = [Y[:, k] for k in range(len(label_space))]

    def fit(col: np.ndarray) -> LogRegFit:
        n_pos = int(col.sum())
        if train.task_kind == "multilabel" and n_pos in (0, len(col)):
            return _constant_fit(X.shape[1], n_pos > 0, C)
        return train_logreg(X, col, C=C, tol=tol, max_iter=max_iter)

    if threads > 1 and len(columns) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            fits = list(pool.map(fit, columns))
    else:
        fits = [fit(col) for col in columns]
    return ProxyModel(space, label_space, train.task_kind, train.pair_mode, C, fits, tuple(targets))


def predict(proxy: ProxyModel, model: TokenizerModel, dataset: TaskDataset) -> list[tuple[str, ...]]:
    """Predicted label tuples, one per instance."""
    if dataset.pair_mode != proxy.pair_mode:
        raise TaskError(f"eval pair mode {dataset.pair_mode!r} differs from training {proxy.pair_mode!r}")
    _, X = featurize(model, dataset, space=proxy.space)
    S = proxy.scores(X)
    labels = proxy.label_space
    if proxy.task_kind == "binary":
        return [(labels[1],) if s > 0 else (labels[0],) for s in S[:, 0]]
    if proxy.task_kind == "multiclass":
        # argmax takes the first maximum, so ties go to the lowest label index
        return [(labels[k],) for k in np.argmax(S, axis=1)]
    return [tuple(labels[k] for k in np.flatnonzero(row > 0)) for row in S]


def f1_scores(gold: np.ndarray, pred: np.ndarray) -> tuple[float, float]:
    """Macro and micro F1 over label columns; empty classes score 0."""
    tp = np.sum(gold & pred, axis=0).astype(float)
    fp = np.sum(~gold & pred, axis=0).astype(float)
    fn = np.sum(gold & ~pred, axis=0).astype(float)
    denom = 2 * tp + fp + fn
    per_label = np.divide(2 * tp, denom, out=np.zeros_like(tp), where=denom > 0)
    macro = float(per_label.mean()) if per_label.size else 0.0
    total = 2 * tp.sum() + fp.sum() + fn.sum()
    micro = float(2 * tp.sum() / total) if total > 0 else 0.0
    return macro, micro


@dataclass
class EvalReport:
    metric: str
    value: float
    n_instances: int
    predictions: list[tuple[str, ...]] = field(repr=False, default_factory=list)

    def as_dict(self) -> dict:
        return {"metric": self.metric, "value": self.value, "n_instances": self.n_instances}


def evaluate_proxy(proxy: ProxyModel, model: TokenizerModel, dataset: TaskDataset,
                   average: str = "macro") -> EvalReport:
    """Accuracy for binary/multiclass, F1 (macro by default) for multilabel."""
    if len(dataset) == 0:
        raise TaskError("evaluation set is empty")
    preds = predict(proxy, model, dataset)
    if proxy.task_kind in ("binary", "multiclass"):
        correct = sum(p == inst.labels for p, inst in zip(preds, dataset.instances))
        return EvalReport("accuracy", correct / len(dataset), len(dataset), preds)
    if average not in ("macro", "micro"):
        raise TaskError(f"unknown F1 average {average!r}")
    gold = label_matrix(dataset, proxy.label_space)
    pos = {lab: k for k, lab in enumerate(proxy.label_space)}
    P = np.zeros_like(gold)
    for i, labs in enumerate(preds):
        for lab in labs:
            P[i, pos[lab]] = True
    macro, micro = f1_scores(gold, P)
    value = macro if average == "macro" else micro
    return EvalReport(f"{average}_f1", value, len(dataset), preds)
