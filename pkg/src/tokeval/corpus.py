"""Text corpora for tokenizer fitting and metric reference.

Two on-disk formats are supported:

``lines``
    newline-delimited, one document per line.
``records``
    length-framed, each record is ``<decimal byte length>\\n<payload>\\n``.
    Payloads may contain newlines.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

FORMATS = ("lines", "records")


class CorpusError(ValueError):
    """Raised for unreadable or malformed corpus files."""


@dataclass(frozen=True)
class Corpus:
    documents: tuple[str, ...]
    source_name: str = ""

    def __post_init__(self):
        if not isinstance(self.documents, tuple):
            object.__setattr__(self, "documents", tuple(self.documents))

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self) -> Iterator[str]:
        return iter(self.documents)

    @classmethod
    def from_texts(cls, texts: Iterable[str], source_name: str = "") -> "Corpus":
        return cls(tuple(texts), source_name)


def _decode(raw: bytes, lossy: bool, where: str) -> str:
    try:
        return raw.decode("utf-8", errors="replace" if lossy else "strict")
    except UnicodeDecodeError as exc:
        raise CorpusError(f"{where}: invalid UTF-8 at byte {exc.start}") from exc


def _split_records(data: bytes, where: str) -> list[bytes]:
    records = []
    pos = 0
    while pos < len(data):
        nl = data.find(b"\n", pos)
        if nl < 0:
            raise CorpusError(f"{where}: record header at byte {pos} is not newline-terminated")
        header = data[pos:nl]
        if not header.isdigit():
            raise CorpusError(f"{where}: bad record length {header[:20]!r} at byte {pos}")
        length = int(header)
        start = nl + 1
        end = start + length
        if end >= len(data):
            raise CorpusError(f"{where}: record at byte {pos} is truncated")
        if data[end:end + 1] != b"\n":
            raise CorpusError(f"{where}: record at byte {pos} is not followed by a newline")
        records.append(data[start:end])
        pos = end + 1
    return records


def parse_corpus(data: bytes, fmt: str = "lines", lossy: bool = False,
                 source_name: str = "") -> Corpus:
    where = source_name or "<bytes>"
    if fmt == "lines":
        if not data:
            return Corpus((), source_name)
        chunks = data.split(b"\n")
        if data.endswith(b"\n"):
            chunks.pop()
    elif fmt == "records":
        chunks = _split_records(data, where)
    else:
        raise CorpusError(f"unknown corpus format {fmt!r}; expected one of {FORMATS}")
    return Corpus(tuple(_decode(c, lossy, where) for c in chunks), source_name)


def load_corpus(path: str | os.PathLike, fmt: str = "lines", lossy: bool = False) -> Corpus:
    """Read a corpus file. Documents keep file order; nothing is normalized."""
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except FileNotFoundError as exc:
        raise CorpusError(f"corpus file not found: {path}") from exc
    return parse_corpus(data, fmt, lossy, source_name=os.fspath(path))


def serialize_corpus(documents: Sequence[str], fmt: str = "lines") -> bytes:
    if fmt == "lines":
        for doc in documents:
            if "\n" in doc:
                raise CorpusError("a 'lines' corpus cannot hold documents containing newlines")
        return b"".join(doc.encode("utf-8") + b"\n" for doc in documents)
    if fmt == "records":
        out = []
        for doc in documents:
            payload = doc.encode("utf-8")
            out.append(b"%d\n%s\n" % (len(payload), payload))
        return b"".join(out)
    raise CorpusError(f"unknown corpus format {fmt!r}; expected one of {FORMATS}")


def save_corpus(corpus: Corpus | Sequence[str], path: str | os.PathLike, fmt: str = "lines") -> None:
    docs = corpus.documents if isinstance(corpus, Corpus) else corpus
    with open(path, "wb") as fh:
        fh.write(serialize_corpus(docs, fmt))


def word_count(corpus: Corpus | Iterable[str]) -> int:
    """Number of whitespace-separated words over all documents."""
    return sum(len(doc.split()) for doc in corpus)
