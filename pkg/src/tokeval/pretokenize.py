"""Pre-tokenizers: split text into word-like units that BPE merges never cross.

Five rules are supported, selected by name::

    no      whole text is one pre-token
    ws      whitespace runs isolated from everything else
    _ws     whitespace runs are delimiters merged into the following segment,
            so a single word-leading space stays attached to its word
    gpt2    GPT-2 split pattern
    llama3  Llama 3 split pattern (case-insensitive contractions, 3-digit chunks)

All rules tile their input: concatenating the pieces gives back the text.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import regex

WS_PATTERN = r"\s+"
LEADING_WS_PATTERN = r"\s+(?!\S)|\s+"
GPT2_PATTERN = r"'s|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+"
LLAMA3_PATTERN = (
    r"(?i:'s|'t|'re|'ve|'m|'ll|'d)|[^\r\n\p{L}\p{N}]?\p{L}+|\p{N}{1,3}"
    r"| ?[^\s\p{L}\p{N}]+[\r\n]*|\s*[\r\n]+|\s+(?!\S)|\s+"
)


class Kind(str, enum.Enum):
    NO = "no"
    WS = "ws"
    LEADING_WS = "_ws"
    GPT2 = "gpt2"
    LLAMA3 = "llama3"


class Behavior(str, enum.Enum):
    WHOLE = "whole-text"
    ISOLATED = "isolated-matches"
    MERGED_WITH_NEXT = "delimiter-merged-with-next"


@dataclass(frozen=True)
class PreTokenizerSpec:
    kind: Kind
    pattern: str
    behavior: Behavior

    @property
    def name(self) -> str:
        return self.kind.value

    @property
    def compiled(self) -> "regex.Pattern[str] | None":
        return _compile(self.pattern) if self.pattern else None


class PreToken(NamedTuple):
    bytes: bytes
    start_offset: int


_SPECS = {
    Kind.NO: PreTokenizerSpec(Kind.NO, "", Behavior.WHOLE),
    Kind.WS: PreTokenizerSpec(Kind.WS, WS_PATTERN, Behavior.ISOLATED),
    Kind.LEADING_WS: PreTokenizerSpec(Kind.LEADING_WS, LEADING_WS_PATTERN, Behavior.MERGED_WITH_NEXT),
    Kind.GPT2: PreTokenizerSpec(Kind.GPT2, GPT2_PATTERN, Behavior.ISOLATED),
    Kind.LLAMA3: PreTokenizerSpec(Kind.LLAMA3, LLAMA3_PATTERN, Behavior.ISOLATED),
}

NAMES = tuple(k.value for k in Kind)


@lru_cache(maxsize=None)
def _compile(pattern: str) -> "regex.Pattern[str]":
    return regex.compile(pattern)


def get_spec(name: "str | Kind | PreTokenizerSpec") -> PreTokenizerSpec:
    """Look up a pre-tokenizer by name ("no", "ws", "_ws", "gpt2", "llama3")."""
    if isinstance(name, PreTokenizerSpec):
        return name
    try:
        return _SPECS[Kind(name)]
    except ValueError:
        raise ValueError(f"unknown pre-tokenizer {name!r}; expected one of {NAMES}") from None


def _isolated(pat: "regex.Pattern[str]", text: str) -> list[str]:
    pieces = []
    pos = 0
    for m in pat.finditer(text):
        if m.start() > pos:
            pieces.append(text[pos:m.start()])
        pieces.append(m.group())
        pos = m.end()
    if pos < len(text):
        pieces.append(text[pos:])
    return pieces


def _merged_with_next(pat: "regex.Pattern[str]", text: str) -> list[str]:
    spans: list[tuple[str, bool]] = []
    pos = 0
    for m in pat.finditer(text):
        if m.start() > pos:
            spans.append((text[pos:m.start()], False))
        spans.append((m.group(), True))
        pos = m.end()
    if pos < len(text):
        spans.append((text[pos:], False))

    # A delimiter joins the segment after it unless that segment is itself a delimiter.
    out: list[str] = []
    next_is_match = False
    for piece, is_match in reversed(spans):
        if is_match and out and not next_is_match:
            out[-1] = piece + out[-1]
        else:
            out.append(piece)
        next_is_match = is_match
    out.reverse()
    return out


def split_text(spec: "PreTokenizerSpec | str", text: str) -> list[str]:
    """Pre-tokenize ``text`` and return the pieces as strings."""
    spec = get_spec(spec)
    if not text:
        return []
    if spec.behavior is Behavior.WHOLE:
        return [text]
    if spec.behavior is Behavior.ISOLATED:
        return _isolated(spec.compiled, text)
    return _merged_with_next(spec.compiled, text)


def pretokenize(spec: "PreTokenizerSpec | str", text: "str | bytes") -> list[PreToken]:
    """Split text into pre-tokens carrying their UTF-8 bytes and byte offsets.

    Raises UnicodeDecodeError when given bytes that are not valid UTF-8.
    """
    if isinstance(text, (bytes, bytearray)):
        text = bytes(text).decode("utf-8")
    tokens = []
    offset = 0
    for piece in split_text(spec, text):
        raw = piece.encode("utf-8")
        tokens.append(PreToken(raw, offset))
        offset += len(raw)
    return tokens
