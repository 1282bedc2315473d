"""The ``cfd1`` digit-stream text format.

An optional first token ``h=<int>`` gives the head term; the remaining tokens
are positive decimal digits separated by whitespace or commas.  Lines whose
first non-blank character is ``#`` are comments.
"""
from __future__ import annotations

import re
from typing import Iterable, Iterator, TextIO

from .cf_core import CFString
from .errors import FormatError

_SPLIT = re.compile(r"[\s,]+")


def _tokens(lines: Iterable[str]) -> Iterator[tuple[int, str]]:
    for lineno, line in enumerate(lines, 1):
        if line.lstrip().startswith("#"):
            continue
        for tok in _SPLIT.split(line.strip()):
            if tok:
                yield lineno, tok


def iter_stream(lines: Iterable[str]) -> tuple[int, Iterator[int]]:
    """Return ``(head, digits)``; digits are parsed lazily.

    The head token is looked for eagerly, so a missing ``h=`` costs one
    token of lookahead and nothing more.
    """
    toks = _tokens(lines)
    first = next(toks, None)
    head = 0
    pending = []
    if first is not None:
        lineno, tok = first
        if tok.startswith("h="):
            head = _int(tok[2:], lineno, allow_any=True)
        else:
            pending.append(first)

    def digits():
        for lineno, tok in pending:
            yield _int(tok, lineno)
        for lineno, tok in toks:
            if tok.startswith("h="):
                raise FormatError(f"line {lineno}: head token {tok!r} must come first")
            yield _int(tok, lineno)

    return head, digits()


def _int(tok: str, lineno: int, allow_any: bool = False) -> int:
    try:
        v = int(tok)
    except ValueError:
        raise FormatError(f"line {lineno}: not an integer: {tok!r}") from None
    if not allow_any and v < 1:
        raise FormatError(f"line {lineno}: digits must be >= 1, got {v}")
    return v


def parse(text: str) -> CFString:
    head, digits = iter_stream(text.splitlines())
    return CFString(head, tuple(digits))


def read(fh: TextIO) -> CFString:
    return parse(fh.read())


def format(s: CFString, per_line: int = 20) -> str:
    toks = [f"h={s.head}", *map(str, s.tail)]
    lines = [" ".join(toks[i : i + per_line]) for i in range(0, len(toks), per_line)]
    return "\n".join(lines) + "\n"
