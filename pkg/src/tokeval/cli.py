"""Command-line entry point.

    tokeval fit       --corpus c.txt --pretokenizer gpt2 --vocab-size 32000 --out m.json
    tokeval encode    --model m.json --corpus c.txt --out ids.txt
    tokeval stats     --model m.json --corpus eval.txt --alpha 2.5 --report stats
    tokeval proxy     --model m.json --train t.tsv --eval d.tsv --c 0.4 --report proxy
    tokeval mcnemar   --gold gold.txt --pred gpt2=a.txt --pred ws=b.txt --report sig
    tokeval correlate --table scores.tsv --target bert --report corr

Exit codes: 0 success, 1 data error, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import os
import sys
from collections import OrderedDict

from . import __version__
from .bpe import ModelError, load_model, save_model, train
from .corpus import FORMATS, Corpus, CorpusError, load_corpus, word_count
from .metrics import DEFAULT_ALPHA, NORMALIZERS, MetricError, metric_report
from .pretokenize import NAMES
from .proxy import PAIR_MODES, TASK_KINDS, TaskError, evaluate_proxy, load_task, train_proxy
from .report import write_report
from .solver import DEFAULT_C, DEFAULT_MAX_ITER, DEFAULT_TOL, SolverError
from .stats import METHODS, StatsError, accuracy, pairwise_mcnemar, pearson

THREADS_ENV = "TOKEVAL_THREADS"
DATA_ERRORS = (CorpusError, ModelError, TaskError, MetricError, SolverError, StatsError,
               OSError, UnicodeDecodeError, ValueError)


class UsageError(Exception):
    pass


def resolve_threads(flag: int | None) -> int:
    if flag is not None:
        if flag < 1:
            raise UsageError("--threads must be at least 1")
        return flag
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            n = int(env)
        except ValueError:
            raise UsageError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
        if n >= 1:
            return n
    return os.cpu_count() or 1


def run_config(args: argparse.Namespace) -> dict:
    # thread count only changes speed, so it is left out to keep reports byte-identical
    skip = {"func", "threads"}
    cfg = OrderedDict(subcommand=args.command, version=__version__)
    for key in sorted(vars(args)):
        if key not in skip and key != "command":
            cfg[key] = getattr(args, key)
    return cfg


def _load_texts(args) -> Corpus:
    return load_corpus(args.corpus, fmt=args.corpus_format, lossy=args.lossy)


def cmd_fit(args) -> int:
    corpus = _load_texts(args)
    model = train(corpus, args.pretokenizer, args.vocab_size, threads=args.threads)
    save_model(model, args.out)
    results = OrderedDict(
        pretokenizer=model.spec.name,
        requested_vocab_size=args.vocab_size,
        achieved_vocab_size=model.vocab_size,
        n_merges=len(model.merges),
        n_documents=len(corpus),
        word_count=word_count(corpus),
        model_file=args.out,
    )
    if model.vocab_size < args.vocab_size:
        print(f"note: training stopped at {model.vocab_size} tokens (no pair occurs twice)",
              file=sys.stderr)
    if args.report:
        write_report(args.report, run_config(args), results)
    return 0


def cmd_encode(args) -> int:
    model = load_model(args.model)
    corpus = _load_texts(args)
    lines = []
    total = 0
    for doc in corpus:
        ids = model.encode(doc)
        total += len(ids)
        if args.tokens:
            lines.append(" ".join(model.token_str(i) for i in ids))
        else:
            lines.append(" ".join(map(str, ids)))
    text = "".join(line + "\n" for line in lines)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.report:
        results = OrderedDict(n_documents=len(corpus), corpus_token_count=total,
                              vocab_size=model.vocab_size)
        write_report(args.report, run_config(args), results)
    return 0


def cmd_stats(args) -> int:
    model = load_model(args.model)
    if args.task:
        texts = load_task(args.task).texts()
    else:
        texts = list(_load_texts(args))
    rep = metric_report(model, texts, alpha=args.alpha, normalizer=args.normalizer)
    write_report(args.report, run_config(args), rep.as_dict())
    return 0


def cmd_proxy(args) -> int:
    model = load_model(args.model)
    train_set = load_task(args.train, task_kind=args.task_kind, pair_mode="auto")
    eval_set = load_task(args.eval, task_kind=train_set.task_kind, pair_mode="auto")
    if args.pair_mode != "auto":
        has_pairs = train_set.pair_mode != "none"
        if args.pair_mode != "none" and not has_pairs:
            raise UsageError(f"--pair-mode {args.pair_mode} given but the training data has no text_b")
        if args.pair_mode == "none" and has_pairs:
            raise UsageError("--pair-mode none given but the training data has text_b")
        train_set.pair_mode = eval_set.pair_mode = args.pair_mode
    if eval_set.pair_mode != train_set.pair_mode:
        raise TaskError("train and eval files disagree on whether text_b is present")
    proxy = train_proxy(model, train_set, C=args.c, tol=args.tol, max_iter=args.max_iter,
                        max_features=args.max_features, threads=args.threads)
    ev = evaluate_proxy(proxy, model, eval_set, average=args.f1_average)
    results = OrderedDict(
        metric=ev.metric,
        value=ev.value,
        n_train=len(train_set),
        n_eval=ev.n_instances,
        task_kind=proxy.task_kind,
        pair_mode=proxy.pair_mode,
        n_labels=len(proxy.label_space),
        n_classifiers=len(proxy.classifiers),
        n_features=proxy.n_features,
        nonzero_weights=int(sum((clf.coef != 0).sum() for clf in proxy.classifiers)),
        max_solver_iterations=max(clf.n_iter for clf in proxy.classifiers),
        all_converged=all(clf.converged for clf in proxy.classifiers),
    )
    if args.predictions:
        with open(args.predictions, "w", encoding="utf-8", newline="") as fh:
            for labs in ev.predictions:
                fh.write(",".join(labs) + "\n")
    write_report(args.report, run_config(args), results)
    return 0


def _read_labels(path: str) -> list[str]:
    with open(path, encoding="utf-8", newline="") as fh:
        return [line.rstrip("\r\n") for line in fh]


def cmd_mcnemar(args) -> int:
    gold_one = _read_labels(args.gold)
    runs: "OrderedDict[str, list[list[str]]]" = OrderedDict()
    for spec in args.pred:
        name, sep, path = spec.partition("=")
        if not sep or not name or not path:
            raise UsageError(f"--pred expects NAME=PATH, got {spec!r}")
        runs.setdefault(name, []).append(_read_labels(path))
    if len(runs) < 2:
        raise UsageError("mcnemar needs predictions from at least two systems")
    n_seeds = {len(v) for v in runs.values()}
    if len(n_seeds) != 1:
        raise UsageError("every system must supply the same number of --pred files (seeds)")
    seeds = n_seeds.pop()
    gold = gold_one * seeds
    preds = OrderedDict((name, [lab for run in files for lab in run]) for name, files in runs.items())
    for name, p in preds.items():
        if len(p) != len(gold):
            raise StatsError(f"{name}: {len(p)} predictions for {len(gold)} gold labels")

    acc = {name: accuracy(gold, p) for name, p in preds.items()}
    names = list(preds)
    if args.sort_by == "accuracy":
        # stable sort keeps input order among equal accuracies
        names.sort(key=lambda n: -acc[n])
    ordered = OrderedDict((n, preds[n]) for n in names)
    n_pairs = len(names) * (len(names) - 1) // 2
    m = args.bonferroni_m if args.bonferroni_m is not None else n_pairs
    results = pairwise_mcnemar(gold, ordered, m=m, method=args.method)

    # cell (row, col): adjusted p below the diagonal, raw p above it
    rows = []
    for i, a in enumerate(names):
        row = OrderedDict(system=a, accuracy=acc[a])
        for j, b in enumerate(names):
            if i == j:
                row[b] = None
            elif i > j:
                row[b] = results[(b, a)].p_adjusted
            else:
                row[b] = results[(a, b)].p_raw
        rows.append(row)
    pairs = [OrderedDict(system_a=a, system_b=b, b=r.b, c=r.c, statistic=r.statistic,
                         method=r.method, p_raw=r.p_raw, p_adjusted=r.p_adjusted,
                         significant=r.significant)
             for (a, b), r in results.items()]
    config = run_config(args)
    config["bonferroni_m_resolved"] = m
    config["seeds"] = seeds
    config["order"] = "accuracy_desc" if args.sort_by == "accuracy" else "input"
    config["layout"] = "lower=p_adjusted upper=p_raw"
    write_report(args.report, config, {"accuracy": acc, "pairs": pairs},
                 rows=rows, columns=["system", "accuracy", *names])
    return 0


def cmd_correlate(args) -> int:
    with open(args.table, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader((line for line in fh if not line.startswith("#")), delimiter="\t")
        table = list(reader)
        fields = reader.fieldnames or []
    if args.target not in fields:
        raise UsageError(f"target column {args.target!r} not in table columns {fields}")
    columns = args.columns or [f for f in fields if f != args.target and f not in args.exclude]

    def numeric(col):
        try:
            return [float(r[col]) for r in table]
        except (TypeError, ValueError):
            return None

    y = numeric(args.target)
    if y is None:
        raise StatsError(f"target column {args.target!r} is not numeric")
    rows = []
    for col in columns:
        if col not in fields:
            raise UsageError(f"column {col!r} not in table")
        x = numeric(col)
        if x is None:
            if args.columns:
                raise StatsError(f"column {col!r} is not numeric")
            continue
        rows.append(OrderedDict(column=col, target=args.target, n=len(x), pearson_r=pearson(x, y)))
    write_report(args.report, run_config(args), rows, rows=rows,
                 columns=["column", "target", "n", "pearson_r"])
    return 0


def _add_corpus_args(p, required=True):
    p.add_argument("--corpus", required=required, help="corpus file")
    p.add_argument("--corpus-format", choices=FORMATS, default="lines",
                   help="'lines' (one document per line) or 'records' (length-framed)")
    p.add_argument("--lossy", action="store_true",
                   help="replace invalid UTF-8 instead of failing")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=None,
                        help=f"worker count (default: ${THREADS_ENV}, else CPU count)")
    common.add_argument("--seed", type=int, default=0,
                        help="seed for randomized steps (echoed into reports)")

    parser = argparse.ArgumentParser(prog="tokeval", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"tokeval {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", parents=[common], help="train a BPE tokenizer")
    _add_corpus_args(p)
    p.add_argument("--pretokenizer", choices=NAMES, default="gpt2")
    p.add_argument("--vocab-size", type=int, default=32000)
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--report", help="report path prefix")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("encode", parents=[common], help="encode a corpus to token ids")
    p.add_argument("--model", required=True)
    _add_corpus_args(p)
    p.add_argument("--out", help="output file (default stdout)")
    p.add_argument("--tokens", action="store_true", help="write readable tokens instead of ids")
    p.add_argument("--report", help="report path prefix")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("stats", parents=[common], help="intrinsic metrics on a reference corpus")
    p.add_argument("--model", required=True)
    _add_corpus_args(p, required=False)
    p.add_argument("--task", help="use the texts of a task TSV instead of --corpus")
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--normalizer", choices=NORMALIZERS, default="full_vocab")
    p.add_argument("--report", help="report path prefix (default: TSV on stdout)")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("proxy", parents=[common], help="logistic-regression proxy measure")
    p.add_argument("--model", required=True)
    p.add_argument("--train", required=True, help="training task TSV")
    p.add_argument("--eval", required=True, help="evaluation task TSV")
    p.add_argument("--pair-mode", choices=("auto", *PAIR_MODES), default="auto")
    p.add_argument("--task-kind", choices=("auto", *TASK_KINDS), default="auto")
    p.add_argument("--c", type=float, default=DEFAULT_C, help="inverse regularization strength")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)
    p.add_argument("--max-features", type=int, default=5_000_000)
    p.add_argument("--f1-average", choices=("macro", "micro"), default="macro")
    p.add_argument("--predictions", help="write predicted labels, one line per eval instance")
    p.add_argument("--report", help="report path prefix (default: TSV on stdout)")
    p.set_defaults(func=cmd_proxy)

    p = sub.add_parser("mcnemar", parents=[common], help="pairwise McNemar tests")
    p.add_argument("--gold", required=True, help="gold labels, one per line")
    p.add_argument("--pred", action="append", required=True, metavar="NAME=PATH",
                   help="predictions; repeat a NAME to pool seeds")
    p.add_argument("--bonferroni-m", type=int, default=None,
                   help="number of tests for the correction (default: number of pairs)")
    p.add_argument("--method", choices=METHODS, default="auto")
    p.add_argument("--sort-by", choices=("accuracy", "input"), default="accuracy")
    p.add_argument("--report", help="report path prefix (default: TSV on stdout)")
    p.set_defaults(func=cmd_mcnemar)

    p = sub.add_parser("correlate", parents=[common], help="Pearson correlation against a target column")
    p.add_argument("--table", required=True, help="TSV with a header row")
    p.add_argument("--target", required=True)
    p.add_argument("--columns", nargs="+", help="columns to correlate (default: all numeric)")
    p.add_argument("--exclude", nargs="*", default=[])
    p.add_argument("--report", help="report path prefix (default: TSV on stdout)")
    p.set_defaults(func=cmd_correlate)
    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.threads = resolve_threads(args.threads)
        if args.command == "stats" and not (args.corpus or args.task):
            raise UsageError("stats needs --corpus or --task")
        return args.func(args)
    except UsageError as exc:
        print(f"tokeval {args.command}: usage error: {exc}", file=sys.stderr)
        return 2
    except DATA_ERRORS as exc:
        print(f"tokeval {args.command}: error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
