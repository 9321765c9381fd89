"""Reader and writer for the UAI text formats.

Model files carry a preamble (``MARKOV`` or ``BAYES``), variable count,
cardinalities, factor count, one scope line per factor, then each factor's
table as an entry count followed by that many probabilities in row-major
order (last scope variable fastest).  Tables are converted to natural-log
space on parse; zero probabilities become ``-inf``.

Evidence files hold an observation count followed by variable/value pairs.

Both readers are whitespace-tolerant: any run of blanks or newlines
separates tokens.
"""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .errors import ModelError, ParseError
from .model import Factor, GraphicalModel


class _Tokens:
    """Token stream that remembers the source line of each token."""

    def __init__(self, text: str):
        self.items: list[tuple[str, int]] = []
        for ln, line in enumerate(text.splitlines(), start=1):
            for tok in line.split():
                self.items.append((tok, ln))
        self.pos = 0
        self.last_line = 1

    def next(self, what: str) -> str:
        if self.pos >= len(self.items):
            raise ParseError(f"unexpected end of file while reading {what}", self.last_line)
        tok, ln = self.items[self.pos]
        self.pos += 1
        self.last_line = ln
        return tok

    def next_int(self, what: str, minimum: int = 0) -> int:
        tok = self.next(what)
        try:
            val = int(tok)
        except ValueError:
            raise ParseError(f"expected integer for {what}, got {tok!r}", self.last_line)
        if val < minimum:
            raise ParseError(f"{what} must be >= {minimum}, got {val}", self.last_line)
        return val

    def next_float(self, what: str) -> float:
        tok = self.next(what)
        try:
            val = float(tok)
        except ValueError:
            raise ParseError(f"expected number for {what}, got {tok!r}", self.last_line)
        return val

    def done(self) -> bool:
        return self.pos >= len(self.items)


def parse_uai(text: str) -> GraphicalModel:
    """Parse a UAI model file into log-space factors."""
    toks = _Tokens(text)
    preamble = toks.next("preamble")
    if preamble not in ("MARKOV", "BAYES"):
        raise ParseError(
            f"unsupported preamble {preamble!r}, expected MARKOV or BAYES", toks.last_line
        )
    num_vars = toks.next_int("variable count", minimum=1)
    cards = np.empty(num_vars, dtype=np.int64)
    for i in range(num_vars):
        cards[i] = toks.next_int(f"cardinality of variable {i}", minimum=1)
    num_factors = toks.next_int("factor count", minimum=0)

    scopes: list[tuple[int, ...]] = []
    for fi in range(num_factors):
        k = toks.next_int(f"scope size of factor {fi}", minimum=1)
        scope = []
        for _ in range(k):
            v = toks.next_int(f"scope variable of factor {fi}")
            if v >= num_vars:
                raise ParseError(
                    f"factor {fi} references variable {v}, model has {num_vars}",
                    toks.last_line,
                )
            scope.append(v)
        if len(set(scope)) != len(scope):
            raise ParseError(f"factor {fi} repeats a variable in its scope", toks.last_line)
        scopes.append(tuple(scope))

    factors: list[Factor] = []
    for fi, scope in enumerate(scopes):
        expect = 1
        for v in scope:
            expect *= int(cards[v])
        count = toks.next_int(f"table size of factor {fi}", minimum=1)
        if count != expect:
            raise ParseError(
                f"factor {fi} table size {count} does not match scope product {expect}",
                toks.last_line,
            )
        table = np.empty(count, dtype=np.float64)
        for j in range(count):
            p = toks.next_float(f"entry {j} of factor {fi}")
            if math.isnan(p) or math.isinf(p) or p < 0.0:
                raise ParseError(
                    f"factor {fi} entry {j} is not a probability: {p}", toks.last_line
                )
            table[j] = -math.inf if p == 0.0 else math.log(p)
        factors.append(Factor.from_log_table(scope, cards, table))

    if not toks.done():
        tok, ln = toks.items[toks.pos]
        raise ParseError(f"trailing content starting at {tok!r}", ln)
    try:
        return GraphicalModel(num_vars=num_vars, cardinalities=cards, factors=factors)
    except ModelError as e:
        raise ParseError(str(e)) from e


def parse_uai_file(path: str | Path) -> GraphicalModel:
    return parse_uai(Path(path).read_text())


def serialize_uai(model: GraphicalModel, preamble: str = "MARKOV") -> str:
    """Write a model back to UAI text; tables leave log space via exp."""
    if preamble not in ("MARKOV", "BAYES"):
        raise ValueError(f"unsupported preamble {preamble!r}")
    out: list[str] = [preamble, str(model.num_vars)]
    out.append(" ".join(str(int(c)) for c in model.cardinalities))
    out.append(str(len(model.factors)))
    for f in model.factors:
        out.append(" ".join([str(len(f.scope))] + [str(v) for v in f.scope]))
    for f in model.factors:
        out.append(str(f.log_table.size))
        probs = np.exp(f.log_table)
        out.append(" ".join(format(p, ".17g") for p in probs))
    return "\n".join(out) + "\n"


def serialize_uai_file(path: str | Path, model: GraphicalModel, preamble: str = "MARKOV") -> None:
    Path(path).write_text(serialize_uai(model, preamble))


def parse_evidence(text: str) -> dict[int, int]:
    """Parse an evidence file: a count then variable/value pairs."""
    toks = _Tokens(text)
    if toks.done():
        return {}
    n = toks.next_int("evidence count")
    ev: dict[int, int] = {}
    for i in range(n):
        v = toks.next_int(f"evidence variable {i}")
        val = toks.next_int(f"evidence value {i}")
        if v in ev:
            raise ParseError(f"evidence repeats variable {v}", toks.last_line)
        ev[v] = val
    if not toks.done():
        tok, ln = toks.items[toks.pos]
        raise ParseError(f"trailing content starting at {tok!r}", ln)
    return ev


def parse_evidence_file(path: str | Path) -> dict[int, int]:
    return parse_evidence(Path(path).read_text())
