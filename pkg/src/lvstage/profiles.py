"""Growth-rate and initial-history profiles.

A tiny expression language over ``x``::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := NUMBER | 'x' | ('cos' | 'sin' | 'exp') '(' expr ')'
            | '-' factor | '(' expr ')'

plus tabulated profiles (linear interpolation between samples).
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import MplusViolation, ProfileSyntaxError, UnknownIdentifierError, ValidationError
from .grid import Grid

FUNCTIONS = {"cos": np.cos, "sin": np.sin, "exp": np.exp}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/()]))"
)


class Profile:
    """Base class; subclasses implement ``__call__(x) -> array``."""

    def __call__(self, x):
        raise NotImplementedError


@dataclass(frozen=True)
class Num(Profile):
    value: float

    def __call__(self, x):
        return np.full(np.shape(x), self.value, dtype=float)

    def __str__(self):
        return repr(float(self.value))


@dataclass(frozen=True)
class Var(Profile):
    def __call__(self, x):
        return np.array(x, dtype=float)

    def __str__(self):
        return "x"


@dataclass(frozen=True)
class Neg(Profile):
    operand: Profile

    def __call__(self, x):
        return -self.operand(x)

    def __str__(self):
        return f"(-{self.operand})"


@dataclass(frozen=True)
class BinOp(Profile):
    op: str
    left: Profile
    right: Profile

    def __call__(self, x):
        a, b = self.left(x), self.right(x)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        return a / b

    def __str__(self):
        return f"({self.left} {self.op} {self.right})"


@dataclass(frozen=True)
class Call(Profile):
    func: str
    arg: Profile

    def __call__(self, x):
        return FUNCTIONS[self.func](self.arg(x))

    def __str__(self):
        return f"{self.func}({self.arg})"


@dataclass(frozen=True)
class Tabulated(Profile):
    """Piecewise-linear profile through ``(xs[i], ys[i])``; constant beyond the ends."""

    xs: tuple
    ys: tuple

    def __post_init__(self):
        if len(self.xs) != len(self.ys) or len(self.xs) < 2:
            raise ValidationError("tabulated profile needs >= 2 matching (x, y) samples")
        if np.any(np.diff(self.xs) <= 0):
            raise ValidationError("tabulated profile abscissae must be strictly increasing")

    def __call__(self, x):
        return np.interp(x, self.xs, self.ys)

    def __str__(self):
        pairs = ", ".join(f"{a!r}:{b!r}" for a, b in zip(self.xs, self.ys))
        return f"table({pairs})"


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = self._tokenize(text)
        self.i = 0

    @staticmethod
    def _tokenize(text):
        tokens, pos = [], 0
        while pos < len(text):
            if text[pos:].strip() == "":
                break
            m = _TOKEN.match(text, pos)
            if m is None or m.end() == pos:
                bad = pos + len(text[pos:]) - len(text[pos:].lstrip())
                raise ProfileSyntaxError(f"unexpected character {text[bad]!r}", bad)
            kind = m.lastgroup
            tokens.append((kind, m.group(kind), m.start(kind)))
            pos = m.end()
        tokens.append(("end", "", len(text)))
        return tokens

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, pos = self.take()
        if text != value or kind == "end":
            what = "end of input" if kind == "end" else repr(text)
            raise ProfileSyntaxError(f"expected {value!r}, found {what}", pos)

    def parse(self):
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ProfileSyntaxError(f"unexpected {text!r}", pos)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.factor())
        return node

    def factor(self):
        kind, text, pos = self.take()
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            if text == "x":
                return Var()
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(text, arg)
            raise UnknownIdentifierError(f"unknown identifier {text!r}", pos)
        if text == "-" and kind == "op":
            return Neg(self.factor())
        if text == "(" and kind == "op":
            node = self.expr()
            self.expect(")")
            return node
        what = "end of input" if kind == "end" else repr(text)
        raise ProfileSyntaxError(f"unexpected {what}", pos)


def parse_profile(text: str) -> Profile:
    """Parse an expression such as ``"1 + 0.5*cos(x)"``."""
    if not isinstance(text, str) or not text.strip():
        raise ProfileSyntaxError("empty expression", 0)
    return _Parser(text).parse()


def as_profile(source) -> Profile:
    """Accept a Profile, an expression string or a number."""
    if isinstance(source, Profile):
        return source
    if isinstance(source, str):
        return parse_profile(source)
    if isinstance(source, (int, float, np.floating)):
        return Num(float(source))
    raise ValidationError(f"cannot interpret {source!r} as a profile")


def sample(profile, grid: Grid, mplus: str | None = None) -> np.ndarray:
    """Evaluate ``profile`` at the grid nodes.

    ``mplus="strict"`` demands min > 0 (raises MplusViolation); ``"relaxed"``
    only demands min >= 0 and warns when a node is exactly zero.
    """
    values = np.asarray(as_profile(profile)(grid.x), dtype=float)
    if values.shape != (grid.n,):
        values = np.broadcast_to(values, (grid.n,)).copy()
    bad = ~np.isfinite(values)
    if bad.any():
        raise ValidationError(f"profile is not finite at nodes {np.flatnonzero(bad)[:5].tolist()}")
    if mplus == "strict":
        nodes = np.flatnonzero(values <= 0)
        if nodes.size:
            raise MplusViolation(nodes, values[nodes])
    elif mplus == "relaxed":
        nodes = np.flatnonzero(values < 0)
        if nodes.size:
            raise MplusViolation(nodes, values[nodes])
        if np.any(values == 0):
            warnings.warn(
                "growth profile vanishes at some nodes; strict positivity is relaxed",
                stacklevel=2,
            )
    elif mplus is not None:
        raise ValidationError(f"unknown mplus mode {mplus!r}")
    return values
