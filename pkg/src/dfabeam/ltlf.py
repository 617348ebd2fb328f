"""Linear temporal logic over finite traces: syntax, parsing and evaluation.

Formulas are immutable trees built from the core operators (true, atoms,
negation, conjunction, next, until) plus the usual derived ones (or,
weak next, release, eventually, always).  Direct trace evaluation here is
the ground truth that the automaton compiler is checked against.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Collection, Iterable, Sequence

__all__ = [
    "Formula", "Top", "Atom", "Not", "And", "Or", "Next", "WeakNext",
    "Until", "Release", "Eventually", "Always",
    "ParseError", "UndeclaredAtomError",
    "parse_formula", "to_text", "desugar", "eval_trace", "atoms_of",
    "random_formula", "validate_atom_name", "make_trace",
    "trace_to_json", "trace_from_json", "one_hot_trace",
]

# Lowercase identifiers, with `noMatch` allowed as the one reserved exception.
_ATOM_RE = re.compile(r"[a-z][a-z0-9_]*")
_RESERVED_OK = frozenset({"noMatch"})


@dataclass(frozen=True)
class Formula:
    """Base class for formula nodes."""

    def __str__(self) -> str:
        return to_text(self)


@dataclass(frozen=True)
class Top(Formula):
    pass


@dataclass(frozen=True)
class Atom(Formula):
    name: str


@dataclass(frozen=True)
class Not(Formula):
    operand: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Next(Formula):
    operand: Formula


@dataclass(frozen=True)
class WeakNext(Formula):
    operand: Formula


@dataclass(frozen=True)
class Until(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Release(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Eventually(Formula):
    operand: Formula


@dataclass(frozen=True)
class Always(Formula):
    operand: Formula


class ParseError(ValueError):
    """Syntax error, with the character offset where parsing failed."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at offset {position})")
        self.position = position


class UndeclaredAtomError(ParseError):
    """An atom that is not part of the declared alphabet."""

    def __init__(self, name: str, position: int):
        ParseError.__init__(self, f"undeclared atom {name!r}", position)
        self.atom = name


def validate_atom_name(name: str) -> str:
    if name in _RESERVED_OK or _ATOM_RE.fullmatch(name):
        return name
    raise ValueError(f"invalid atom name {name!r}")


# ---------------------------------------------------------------------------
# Parsing.  Grammar (loosest binding first):
#
#   implies := or ('->' implies)?
#   or      := and ('|' and)*
#   and     := until ('&' until)*
#   until   := unary (('U' | 'R') until)?
#   unary   := ('!' | 'X' | 'WX' | 'F' | 'G') unary | primary
#   primary := 'true' | 'false' | atom | '(' implies ')'
#
# '->' is sugar for !l | r, 'false' for !true.  Unicode aliases are accepted.

_ALIASES = {"¬": "!", "∧": "&", "∨": "|", "→": "->",
            "⊤": "true", "⊥": "false"}
_UNARY_OPS = {"!": Not, "X": Next, "WX": WeakNext, "F": Eventually, "G": Always}

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<op>->|[!&|()]|¬|∧|∨|→|⊤|⊥)"
    r"|(?P<word>[A-Za-z_][A-Za-z0-9_]*))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            raise ParseError(f"unexpected character {stripped[0]!r}",
                             len(text) - len(stripped))
        if match.lastgroup == "op":
            tok = _ALIASES.get(match.group("op"), match.group("op"))
            kind = "word" if tok in ("true", "false") else "op"
            tokens.append((kind, tok, match.start(match.lastgroup)))
        else:
            tokens.append(("word", match.group("word"),
                           match.start(match.lastgroup)))
        pos = match.end()
    return tokens


class _Parser:
    def __init__(self, text: str, alphabet: frozenset[str]):
        self.text = text
        self.alphabet = alphabet
        self.tokens = _tokenize(text)
        self.index = 0

    def _peek(self) -> tuple[str, str, int] | None:
        if self.index < len(self.tokens):
            return self.tokens[self.index]
        return None

    def _next(self) -> tuple[str, str, int]:
        tok = self._peek()
        if tok is None:
            raise ParseError("unexpected end of input", len(self.text))
        self.index += 1
        return tok

    def _expect(self, value: str) -> None:
        kind, tok, pos = self._next()
        if tok != value:
            raise ParseError(f"expected {value!r}, found {tok!r}", pos)

    def parse(self) -> Formula:
        formula = self._implies()
        tok = self._peek()
        if tok is not None:
            raise ParseError(f"unexpected token {tok[1]!r}", tok[2])
        return formula

    def _implies(self) -> Formula:
        left = self._or()
        tok = self._peek()
        if tok is not None and tok[1] == "->":
            self._next()
            right = self._implies()
            return Or(Not(left), right)
        return left

    def _or(self) -> Formula:
        formula = self._and()
        while (tok := self._peek()) is not None and tok[1] == "|":
            self._next()
            formula = Or(formula, self._and())
        return formula

    def _and(self) -> Formula:
        formula = self._until()
        while (tok := self._peek()) is not None and tok[1] == "&":
            self._next()
            formula = And(formula, self._until())
        return formula

    def _until(self) -> Formula:
        left = self._unary()
        tok = self._peek()
        if tok is not None and tok[0] == "word" and tok[1] in ("U", "R"):
            self._next()
            right = self._until()
            return Until(left, right) if tok[1] == "U" else Release(left, right)
        return left

    def _unary(self) -> Formula:
        tok = self._peek()
        if tok is not None and ((tok[1] in _UNARY_OPS and tok[0] == "op")
                                or (tok[0] == "word" and tok[1] in _UNARY_OPS)):
            self._next()
            return _UNARY_OPS[tok[1]](self._unary())
        return self._primary()

    def _primary(self) -> Formula:
        kind, tok, pos = self._next()
        if tok == "(":
            formula = self._implies()
            self._expect(")")
            return formula
        if kind == "word":
            if tok == "true":
                return Top()
            if tok == "false":
                return Not(Top())
            if tok in ("U", "R"):
                raise ParseError(f"misplaced operator {tok!r}", pos)
            if tok not in self.alphabet:
                raise UndeclaredAtomError(tok, pos)
            return Atom(tok)
        raise ParseError(f"unexpected token {tok!r}", pos)


def parse_formula(text: str, alphabet: Iterable[str]) -> Formula:
    """Parse ASCII formula text against a declared alphabet of atoms."""
    if not text.strip():
        raise ParseError("empty formula", 0)
    names = frozenset(validate_atom_name(a) for a in alphabet)
    return _Parser(text, names).parse()


# ---------------------------------------------------------------------------
# Printing.  Binding strength: unary(4) > U/R(3) > &(2) > |(1).

def _print(formula: Formula, parent_level: int) -> str:
    if isinstance(formula, Top):
        return "true"
    if isinstance(formula, Atom):
        return formula.name
    if isinstance(formula, (Not, Next, WeakNext, Eventually, Always)):
        op = {Not: "!", Next: "X ", WeakNext: "WX ", Eventually: "F ",
              Always: "G "}[type(formula)]
        return op + _print(formula.operand, 4)
    if isinstance(formula, (Until, Release)):
        op = "U" if isinstance(formula, Until) else "R"
        # right-associative: the left child needs parens at equal level
        inner = f"{_print(formula.left, 4)} {op} {_print(formula.right, 3)}"
        return f"({inner})" if parent_level >= 3 else inner
    if isinstance(formula, And):
        # parser left-associates, so a right-nested chain needs parens
        inner = f"{_print(formula.left, 2)} & {_print(formula.right, 3)}"
        return f"({inner})" if parent_level > 2 else inner
    if isinstance(formula, Or):
        inner = f"{_print(formula.left, 1)} | {_print(formula.right, 2)}"
        return f"({inner})" if parent_level > 1 else inner
    raise TypeError(f"not a formula: {formula!r}")


def to_text(formula: Formula) -> str:
    """Render a formula in the ASCII concrete syntax accepted by the parser."""
    return _print(formula, 0)


def atoms_of(formula: Formula) -> frozenset[str]:
    if isinstance(formula, Atom):
        return frozenset((formula.name,))
    if isinstance(formula, (Not, Next, WeakNext, Eventually, Always)):
        return atoms_of(formula.operand)
    if isinstance(formula, (And, Or, Until, Release)):
        return atoms_of(formula.left) | atoms_of(formula.right)
    return frozenset()


# ---------------------------------------------------------------------------
# Desugaring to the core grammar {true, atom, !, &, X, U}.

def desugar(formula: Formula) -> Formula:
    """Rewrite derived operators away; equivalent on every trace."""
    if isinstance(formula, (Top, Atom)):
        return formula
    if isinstance(formula, Not):
        return Not(desugar(formula.operand))
    if isinstance(formula, And):
        return And(desugar(formula.left), desugar(formula.right))
    if isinstance(formula, Or):
        return Not(And(Not(desugar(formula.left)), Not(desugar(formula.right))))
    if isinstance(formula, Next):
        return Next(desugar(formula.operand))
    if isinstance(formula, WeakNext):
        return Not(Next(Not(desugar(formula.operand))))
    if isinstance(formula, Until):
        return Until(desugar(formula.left), desugar(formula.right))
    if isinstance(formula, Release):
        return Not(Until(Not(desugar(formula.left)), Not(desugar(formula.right))))
    if isinstance(formula, Eventually):
        return Until(Top(), desugar(formula.operand))
    if isinstance(formula, Always):
        return Not(Until(Top(), Not(desugar(formula.operand))))
    raise TypeError(f"not a formula: {formula!r}")


# ---------------------------------------------------------------------------
# Trace representation and evaluation.

Trace = tuple[frozenset[str], ...]


def make_trace(symbols: Iterable[Collection[str]]) -> Trace:
    """Canonicalize a sequence of atom collections into a trace."""
    return tuple(frozenset(sym) for sym in symbols)


def one_hot_trace(concepts: Iterable[str]) -> Trace:
    """Trace in which exactly one atom holds per instant."""
    return tuple(frozenset((c,)) for c in concepts)


def trace_to_json(trace: Sequence[Collection[str]]) -> list[list[str]]:
    return [sorted(set(sym)) for sym in trace]


def trace_from_json(data: object) -> Trace:
    if not isinstance(data, list) or not all(
            isinstance(sym, list) and all(isinstance(a, str) for a in sym)
            for sym in data):
        raise ValueError("trace must be a JSON array of string arrays")
    return make_trace(data)


def eval_trace(formula: Formula, trace: Sequence[Collection[str]],
               t: int = 0) -> bool:
    """Decide whether the trace satisfies the formula at instant ``t``.

    The empty trace satisfies no formula.  ``X`` is false at the last
    instant, ``WX`` is true there; ``U`` quantifies over t <= j < length.
    """
    length = len(trace)
    if not 0 <= t <= max(length - 1, 0):
        raise ValueError(f"instant {t} out of range for trace of length {length}")
    if length == 0:
        return False
    return _eval(formula, trace, t, length)


def _eval(formula: Formula, trace: Sequence[Collection[str]], t: int,
          length: int) -> bool:
    if isinstance(formula, Top):
        return True
    if isinstance(formula, Atom):
        return formula.name in trace[t]
    if isinstance(formula, Not):
        return not _eval(formula.operand, trace, t, length)
    if isinstance(formula, And):
        return (_eval(formula.left, trace, t, length)
                and _eval(formula.right, trace, t, length))
    if isinstance(formula, Or):
        return (_eval(formula.left, trace, t, length)
                or _eval(formula.right, trace, t, length))
    if isinstance(formula, Next):
        return t + 1 < length and _eval(formula.operand, trace, t + 1, length)
    if isinstance(formula, WeakNext):
        return t + 1 >= length or _eval(formula.operand, trace, t + 1, length)
    if isinstance(formula, Until):
        for j in range(t, length):
            if _eval(formula.right, trace, j, length):
                return True
            if not _eval(formula.left, trace, j, length):
                return False
        return False
    if isinstance(formula, Release):
        # dual of until: !((!l) U (!r))
        for j in range(t, length):
            if not _eval(formula.right, trace, j, length):
                return False
            if _eval(formula.left, trace, j, length):
                return True
        return True
    if isinstance(formula, Eventually):
        return any(_eval(formula.operand, trace, j, length)
                   for j in range(t, length))
    if isinstance(formula, Always):
        return all(_eval(formula.operand, trace, j, length)
                   for j in range(t, length))
    raise TypeError(f"not a formula: {formula!r}")


# ---------------------------------------------------------------------------
# Random formulas for property tests.

def random_formula(depth: int, alphabet: Sequence[str], seed: int) -> Formula:
    """Deterministic random formula with operator nesting bounded by depth."""
    import random as _random

    if depth < 0:
        raise ValueError("depth must be >= 0")
    names = [validate_atom_name(a) for a in alphabet]
    rng = _random.Random(seed)
    return _random_node(rng, depth, names)


def _random_node(rng, depth: int, names: Sequence[str]) -> Formula:
    if depth == 0 or rng.random() < 0.2:
        if names and rng.random() < 0.85:
            return Atom(rng.choice(names))
        return Top()
    unary = [Not, Next, WeakNext, Eventually, Always]
    binary = [And, Or, Until, Release]
    if rng.random() < 0.5:
        ctor = rng.choice(unary)
        return ctor(_random_node(rng, depth - 1, names))
    ctor = rng.choice(binary)
    return ctor(_random_node(rng, depth - 1, names),
                _random_node(rng, depth - 1, names))
