"""Ground-truth verifiers for the three benchmark tasks: the 24-point game,
sequence sorting, and MATH-style answer grading.

All arithmetic is exact rational; nothing here ever rounds.
"""

from __future__ import annotations

import itertools
import re
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction

from .errors import DivisionByZero, ExprSyntaxError

# ---------------------------------------------------------------------------
# Expression trees
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Lit:
    value: int


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "Expr"
    right: "Expr"

    def __post_init__(self):
        if self.op not in "+-*/":
            raise ValueError(f"unknown operator {self.op!r}")


Expr = Lit | BinOp


def eval_expr(expr: Expr) -> Fraction:
    """Exact rational value of the tree; raises DivisionByZero."""
    if isinstance(expr, Lit):
        return Fraction(expr.value)
    left = eval_expr(expr.left)
    right = eval_expr(expr.right)
    if expr.op == "+":
        return left + right
    if expr.op == "-":
        return left - right
    if expr.op == "*":
        return left * right
    if right == 0:
        raise DivisionByZero(f"division by zero in {render(expr)}")
    return left / right


def leaves(expr: Expr) -> list[int]:
    if isinstance(expr, Lit):
        return [expr.value]
    return leaves(expr.left) + leaves(expr.right)


def render(expr: Expr) -> str:
    """Fully parenthesized infix form; reparses to a structurally identical tree."""
    if isinstance(expr, Lit):
        return str(expr.value)
    return f"({render(expr.left)} {expr.op} {render(expr.right)})"


# ---------------------------------------------------------------------------
# Parser: infix arithmetic, + - * / with × ÷ x synonyms, parens,
# integer literals, standard precedence, left associativity.
# ---------------------------------------------------------------------------

_EQ24_SUFFIX = re.compile(r"\s*=\s*24\s*$")


def _tokenize(text: str) -> list[tuple[str, object, int]]:
    tokens: list[tuple[str, object, int]] = []
    i = 0
    while i < len(text):
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c.isdigit():
            j = i
            while j < len(text) and text[j].isdigit():
                j += 1
            tokens.append(("num", int(text[i:j]), i))
            i = j
            continue
        if c in "+-*/()":
            tokens.append((c, c, i))
        elif c in "×xX":
            tokens.append(("*", "*", i))
        elif c in "÷":
            tokens.append(("/", "/", i))
        else:
            raise ExprSyntaxError(f"unexpected character {c!r}", i)
        i += 1
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def _peek(self) -> str | None:
        return self.tokens[self.pos][0] if self.pos < len(self.tokens) else None

    def _take(self):
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def _offset(self) -> int:
        if self.pos < len(self.tokens):
            return self.tokens[self.pos][2]
        return len(self.text)

    def parse(self) -> Expr:
        expr = self._expr()
        if self.pos < len(self.tokens):
            raise ExprSyntaxError("unexpected trailing input", self._offset())
        return expr

    def _expr(self) -> Expr:
        node = self._term()
        while self._peek() in ("+", "-"):
            op, _, _ = self._take()
            node = BinOp(op, node, self._term())
        return node

    def _term(self) -> Expr:
        node = self._factor()
        while self._peek() in ("*", "/"):
            op, _, _ = self._take()
            node = BinOp(op, node, self._factor())
        return node

    def _factor(self) -> Expr:
        kind = self._peek()
        if kind == "num":
            _, value, _ = self._take()
            return Lit(value)
        if kind == "-":
            self._take()
            if self._peek() != "num":
                raise ExprSyntaxError("expected number after unary minus", self._offset())
            _, value, _ = self._take()
            return Lit(-value)
        if kind == "(":
            self._take()
            node = self._expr()
            if self._peek() != ")":
                raise ExprSyntaxError("expected ')'", self._offset())
            self._take()
            return node
        raise ExprSyntaxError("expected number or '('", self._offset())


def parse_expr(text: str) -> Expr:
    """Parse infix arithmetic; an optional trailing "= 24" is stripped first."""
    return _Parser(_EQ24_SUFFIX.sub("", text)).parse()


# ---------------------------------------------------------------------------
# 24-point game
# ---------------------------------------------------------------------------

TARGET = Fraction(24)


@dataclass(frozen=True)
class Game24Instance:
    """Four positive integers; standard decks draw from 1..13 but larger
    values (e.g. a literal 24) are accepted."""

    numbers: tuple[int, int, int, int]

    def __post_init__(self):
        if len(self.numbers) != 4:
            raise ValueError("a 24-game instance has exactly 4 numbers")
        if any(n < 1 for n in self.numbers):
            raise ValueError("24-game numbers must be positive integers")


def check_game24(instance: Game24Instance, text: str) -> tuple[bool, str]:
    """Verify a candidate solution. Returns (valid, reason)."""
    try:
        expr = parse_expr(text)
    except ExprSyntaxError as exc:
        return False, f"parse error: {exc}"
    if Counter(leaves(expr)) != Counter(instance.numbers):
        return False, (f"leaf multiset {sorted(leaves(expr))} != "
                       f"input {sorted(instance.numbers)}")
    try:
        value = eval_expr(expr)
    except DivisionByZero as exc:
        return False, str(exc)
    if value != TARGET:
        return False, f"evaluates to {value}, not 24"
    return True, "ok"


def verify_game24(instance: Game24Instance, text: str) -> bool:
    """True iff the text parses, uses each input number exactly once, and
    evaluates to exactly 24."""
    return check_game24(instance, text)[0]


def game24_oracle(instance: Game24Instance) -> Expr | None:
    """Exhaustive search for a witness expression equal to exactly 24.

    Repeatedly combines every pair of remaining values with every operator
    (both operand orders), which covers all operand orderings, operator
    assignments, and parenthesizations of a 4-leaf binary tree.
    """
    items: list[tuple[Fraction, Expr]] = [(Fraction(n), Lit(n)) for n in instance.numbers]
    return _search24(items)


def _search24(items: list[tuple[Fraction, Expr]]) -> Expr | None:
    if len(items) == 1:
        value, expr = items[0]
        return expr if value == TARGET else None
    for i, j in itertools.combinations(range(len(items)), 2):
        (va, ea), (vb, eb) = items[i], items[j]
        rest = [items[k] for k in range(len(items)) if k not in (i, j)]
        combos = [
            (va + vb, BinOp("+", ea, eb)),
            (va * vb, BinOp("*", ea, eb)),
            (va - vb, BinOp("-", ea, eb)),
            (vb - va, BinOp("-", eb, ea)),
        ]
        if vb != 0:
            combos.append((va / vb, BinOp("/", ea, eb)))
        if va != 0:
            combos.append((vb / va, BinOp("/", eb, ea)))
        for combo in combos:
            witness = _search24(rest + [combo])
            if witness is not None:
                return witness
    return None


# ---------------------------------------------------------------------------
# Sequence sorting
# ---------------------------------------------------------------------------

def verify_sorted(input_seq: list[int], output_seq: list[int]) -> bool:
    """True iff output is non-decreasing and a permutation of input."""
    if Counter(output_seq) != Counter(input_seq):
        return False
    return all(a <= b for a, b in zip(output_seq, output_seq[1:]))


# ---------------------------------------------------------------------------
# MATH-style answer grading
# ---------------------------------------------------------------------------

_BOXED = re.compile(r"^\\(?:boxed|fbox)\{(.*)\}$", re.DOTALL)
_FRAC = re.compile(r"\\[dt]?frac\{([^{}]+)\}\{([^{}]+)\}")


def normalize_answer(text: str) -> str:
    s = text.strip()
    while True:
        before = s
        s = s.rstrip(".").strip()
        while len(s) > 1 and s.startswith("$") and s.endswith("$"):
            s = s[1:-1].strip()
        boxed = _BOXED.match(s)
        if boxed:
            s = boxed.group(1).strip()
        if s == before:
            break
    return _FRAC.sub(r"\1/\2", s)


def _as_rational(text: str) -> Fraction | None:
    compact = re.sub(r"\s+", "", text)
    try:
        return Fraction(compact)
    except (ValueError, ZeroDivisionError):
        return None


def equal_answers(candidate: str, gold: str) -> bool:
    """Normalized answer equality: exact rational comparison when both sides
    parse as numbers, exact string comparison (whitespace-insensitive)
    otherwise."""
    a = normalize_answer(candidate)
    b = normalize_answer(gold)
    ra, rb = _as_rational(a), _as_rational(b)
    if ra is not None and rb is not None:
        return ra == rb
    return re.sub(r"\s+", "", a) == re.sub(r"\s+", "", b)


def needs_manual_review(text: str) -> bool:
    """True when the normalized answer still contains LaTeX commands beyond
    the fraction/boxed wrappers this grader understands."""
    return "\\" in normalize_answer(text)
