"""A small expression language for information measures.

Grammar (whitespace-insensitive)::

    expr    := atom (('+' | '-') atom)*
    atom    := measure | '(' expr ')'
    measure := 'H' '(' list ['|' list] ')'
             | 'I' '(' list ';' list ['|' list] ')'
             | 'I' '(' list '->' sig ['||' clist] ['|' list] ['@' delay] ')'
    list    := sig (',' sig)*
    clist   := csig (',' csig)*
    csig    := sig ['[' delay ']']
    sig     := NAME ['^' (NAME | INT)]
    delay   := INT | 'loop'

Superscripts are accepted and ignored: sequences always span the horizon.
``||`` conditions causally on prefixes (default delay 0), ``|`` on whole
sequences. The source delay after ``@`` defaults to ``loop``, i.e. the
composite delay along the loop from each source to the destination.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

from .dist import DistributionError
from .measures import (CAUSAL, FULL, ConditioningTerm, SourceTerm, directed_info, loop_delay,
                       seq_entropy, seq_mutual_info)
from .system import TrajectoryDistribution

LOOP = "loop"
Delay = Union[int, str]


class QuerySyntaxError(ValueError):
    def __init__(self, text: str, position: int, expected):
        self.text, self.position = text, position
        self.expected = sorted(set(expected))
        found = text[position:position + 8] or "end of input"
        super().__init__(f"syntax error at position {position}: expected one of "
                         f"{', '.join(self.expected)}; found {found!r}")

    def caret(self) -> str:
        return f"{self.text}\n{' ' * self.position}^"


class QueryEvalError(ValueError):
    pass


@dataclass(frozen=True)
class Entropy:
    vars: tuple[str, ...]
    given: tuple[str, ...] = ()


@dataclass(frozen=True)
class MutualInfo:
    a: tuple[str, ...]
    b: tuple[str, ...]
    given: tuple[str, ...] = ()


@dataclass(frozen=True)
class CondItem:
    signal: str
    delay: Delay = 0


@dataclass(frozen=True)
class DirectedInfo:
    sources: tuple[str, ...]
    dst: str
    causal: tuple[CondItem, ...] = ()
    full: tuple[str, ...] = ()
    delay: Delay = LOOP


@dataclass(frozen=True)
class Sum:
    left: "MeasureExpr"
    right: "MeasureExpr"


@dataclass(frozen=True)
class Difference:
    left: "MeasureExpr"
    right: "MeasureExpr"


MeasureExpr = Union[Entropy, MutualInfo, DirectedInfo, Sum, Difference]

_TOKEN = re.compile(r"\s*(?:(?P<arrow>->)|(?P<bars>\|\|)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
                    r"|(?P<int>\d+)|(?P<punct>[()\[\];,|@^+\-]))")


def _tokenize(text: str):
    toks, pos = [], 0
    while True:
        m = _TOKEN.match(text, pos)
        if not m:
            rest = text[pos:]
            if rest.strip():
                raise QuerySyntaxError(text, len(text) - len(rest.lstrip()), ["token"])
            toks.append(("end", "", len(text)))
            return toks
        kind = m.lastgroup
        value = m.group(kind)
        toks.append((kind, value, m.start(kind)))
        pos = m.end()


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    @property
    def tok(self):
        return self.toks[self.i]

    def fail(self, *expected):
        raise QuerySyntaxError(self.text, self.tok[2], expected)

    def expect(self, value):
        if self.tok[1] != value or self.tok[0] == "end":
            self.fail(repr(value))
        self.i += 1

    def accept(self, value) -> bool:
        if self.tok[1] == value and self.tok[0] != "end":
            self.i += 1
            return True
        return False

    def parse(self) -> MeasureExpr:
        e = self.expr()
        if self.tok[0] != "end":
            self.fail("'+'", "'-'", "end of input")
        return e

    def expr(self):
        node = self.atom()
        while self.tok[1] in ("+", "-") and self.tok[0] == "punct":
            op = self.tok[1]
            self.i += 1
            rhs = self.atom()
            node = Sum(node, rhs) if op == "+" else Difference(node, rhs)
        return node

    def atom(self):
        kind, val, _ = self.tok
        if kind == "punct" and val == "(":
            self.i += 1
            node = self.expr()
            self.expect(")")
            return node
        if kind == "name" and val == "H":
            self.i += 1
            self.expect("(")
            vars_ = self.siglist()
            given = self.siglist() if self.accept("|") else ()
            self.expect(")")
            return Entropy(vars_, given)
        if kind == "name" and val == "I":
            self.i += 1
            self.expect("(")
            first = self.siglist()
            if self.accept(";"):
                second = self.siglist()
                given = self.siglist() if self.accept("|") else ()
                self.expect(")")
                return MutualInfo(first, second, given)
            if self.tok[0] == "arrow":
                self.i += 1
                dst = self.sig()
                causal = ()
                if self.tok[0] == "bars":
                    self.i += 1
                    causal = self.condlist()
                full = self.siglist() if self.accept("|") else ()
                delay = self.delay() if self.accept("@") else LOOP
                self.expect(")")
                return DirectedInfo(first, dst, causal, full, delay)
            self.fail("';'", "'->'", "','")
        self.fail("'H('", "'I('", "'('")

    def sig(self) -> str:
        kind, val, _ = self.tok
        if kind != "name" or val == LOOP:
            self.fail("signal name")
        self.i += 1
        if self.accept("^"):
            if self.tok[0] not in ("name", "int"):
                self.fail("superscript")
            self.i += 1
        return val

    def siglist(self) -> tuple[str, ...]:
        out = [self.sig()]
        while self.accept(","):
            out.append(self.sig())
        return tuple(out)

    def condlist(self) -> tuple[CondItem, ...]:
        out = []
        while True:
            name = self.sig()
            delay: Delay = 0
            if self.accept("["):
                delay = self.delay()
                self.expect("]")
            out.append(CondItem(name, delay))
            if not self.accept(","):
                return tuple(out)

    def delay(self) -> Delay:
        kind, val, _ = self.tok
        if kind == "int":
            self.i += 1
            return int(val)
        if kind == "name" and val == LOOP:
            self.i += 1
            return LOOP
        self.fail("integer delay", "'loop'")


def parse(text: str) -> MeasureExpr:
    """Parse an expression such as ``"I(x -> y || q) - I(r ; y | u)"``."""
    return _Parser(text).parse()


def _delay_text(d: Delay) -> str:
    return str(d)


def format(expr: MeasureExpr) -> str:  # noqa: A001 - mirrors parse
    """Canonical text; ``parse(format(e)) == e``."""
    if isinstance(expr, Entropy):
        given = f" | {','.join(expr.given)}" if expr.given else ""
        return f"H({','.join(expr.vars)}{given})"
    if isinstance(expr, MutualInfo):
        given = f" | {','.join(expr.given)}" if expr.given else ""
        return f"I({','.join(expr.a)} ; {','.join(expr.b)}{given})"
    if isinstance(expr, DirectedInfo):
        text = f"I({','.join(expr.sources)} -> {expr.dst}"
        if expr.causal:
            items = [c.signal if c.delay == 0 else f"{c.signal}[{_delay_text(c.delay)}]" for c in expr.causal]
            text += f" || {','.join(items)}"
        if expr.full:
            text += f" | {','.join(expr.full)}"
        if expr.delay != LOOP:
            text += f" @{_delay_text(expr.delay)}"
        return text + ")"
    if isinstance(expr, (Sum, Difference)):
        op = "+" if isinstance(expr, Sum) else "-"
        right = format(expr.right)
        if isinstance(expr.right, (Sum, Difference)):
            right = f"({right})"
        return f"{format(expr.left)} {op} {right}"
    raise TypeError(f"not a measure expression: {expr!r}")


def _resolve(traj: TrajectoryDistribution, names) -> None:
    for n in names:
        if n not in traj.signals:
            raise QueryEvalError(f"unknown signal {n!r}; available: {','.join(traj.signals)}")


def _schedule(traj, src, dst, delay: Delay):
    if delay == LOOP:
        if traj.spec is None:
            raise QueryEvalError("delay 'loop' needs a system; give an explicit delay")
        try:
            return loop_delay(traj.spec, src, dst)
        except ValueError as err:
            raise QueryEvalError(str(err)) from None
    return delay


def evaluate(expr: MeasureExpr | str, traj: TrajectoryDistribution) -> float:
    """Value in bits of ``expr`` on ``traj``."""
    if isinstance(expr, str):
        expr = parse(expr)
    try:
        if isinstance(expr, Sum):
            return evaluate(expr.left, traj) + evaluate(expr.right, traj)
        if isinstance(expr, Difference):
            return evaluate(expr.left, traj) - evaluate(expr.right, traj)
        if isinstance(expr, Entropy):
            _resolve(traj, expr.vars + expr.given)
            return seq_entropy(traj, list(expr.vars), list(expr.given))
        if isinstance(expr, MutualInfo):
            _resolve(traj, expr.a + expr.b + expr.given)
            return seq_mutual_info(traj, list(expr.a), list(expr.b), list(expr.given))
        if isinstance(expr, DirectedInfo):
            _resolve(traj, expr.sources + (expr.dst,) + tuple(c.signal for c in expr.causal) + expr.full)
            srcs = [SourceTerm(s, _schedule(traj, s, expr.dst, expr.delay)) for s in expr.sources]
            cond = [ConditioningTerm(c.signal, CAUSAL, _schedule(traj, c.signal, expr.dst, c.delay))
                    for c in expr.causal]
            cond += [ConditioningTerm(s, FULL) for s in expr.full]
            return directed_info(traj, expr.dst, srcs, cond)
    except DistributionError as err:
        raise QueryEvalError(str(err)) from None
    raise TypeError(f"not a measure expression: {expr!r}")
