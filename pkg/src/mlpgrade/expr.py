"""Lexing, parsing and canonicalization of student-entered math expressions.

A solution body is split into an ordered sequence of expression strings,
each of which is parsed into an exact-rational AST and normalized into a
canonical form whose string key serves as the feature identity.

Subtraction and division are not AST node kinds: ``a - b`` is rewritten to
``a + (-1)*b`` and ``a / b`` to ``a * b^(-1)`` at parse time, so that the
canonicalizer only ever deals with sums, products and powers.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Optional, Sequence, Union


class BlankSolution(ValueError):
    """Raised when a solution body contains no expression segment."""


class ParseError(ValueError):
    """Syntax error, carrying the byte offset and the tokens expected there."""

    def __init__(self, message: str, offset: int, expected: Sequence[str]):
        super().__init__(f"{message} at offset {offset} (expected one of: {', '.join(sorted(expected))})")
        self.offset = offset
        self.expected = frozenset(expected)


# Function names recognized with call syntax `sin(x)` / `sin x` / `sin^2 x`.
# Any identifier followed by `[` is also treated as a function application.
KNOWN_FUNCTIONS = frozenset({"sin", "cos", "tan", "exp", "log", "sqrt"})


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Const:
    value: Fraction

    def __post_init__(self):
        object.__setattr__(self, "value", Fraction(self.value))


@dataclass(frozen=True)
class Sym:
    name: str


@dataclass(frozen=True)
class Func:
    name: str
    args: tuple


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exp: "Expr"


@dataclass(frozen=True)
class Sum:
    terms: tuple


@dataclass(frozen=True)
class Prod:
    factors: tuple


@dataclass(frozen=True)
class Opaque:
    """Unparseable segment kept as a feature keyed by its trimmed source text."""

    text: str


Expr = Union[Const, Sym, Func, Pow, Sum, Prod, Opaque]

_KIND_RANK = {Const: 0, Sym: 1, Func: 2, Pow: 3, Prod: 4, Sum: 5, Opaque: 6}


def key(e: Expr) -> str:
    """Deterministic prefix serialization, e.g. ``(+ (* 2 (^ x 2)) -3)``."""
    if isinstance(e, Const):
        return str(e.value)
    if isinstance(e, Sym):
        return e.name
    if isinstance(e, Func):
        return "(" + " ".join([e.name] + [key(a) for a in e.args]) + ")"
    if isinstance(e, Pow):
        return f"(^ {key(e.base)} {key(e.exp)})"
    if isinstance(e, Prod):
        return "(* " + " ".join(key(f) for f in e.factors) + ")"
    if isinstance(e, Sum):
        return "(+ " + " ".join(key(t) for t in e.terms) + ")"
    if isinstance(e, Opaque):
        return f'(opaque "{e.text}")'
    raise TypeError(f"not an Expr: {e!r}")


def _sort_key(e: Expr):
    # constants < symbols < functions < powers < products < sums; ties broken
    # by value (constants) or by the recursive serialization.
    rank = _KIND_RANK[type(e)]
    if isinstance(e, Const):
        return (rank, e.value)
    return (rank, key(e))


def to_text(e: Expr) -> str:
    """Infix serialization, re-parseable by :func:`parse`."""
    if isinstance(e, Const):
        v = e.value
        if v.denominator == 1:
            return str(v.numerator) if v >= 0 else f"({v.numerator})"
        return f"({v.numerator}/{v.denominator})"
    if isinstance(e, Sym):
        return e.name
    if isinstance(e, Func):
        return e.name + "[" + ",".join(to_text(a) for a in e.args) + "]"
    if isinstance(e, Pow):
        return f"({to_text(e.base)})^({to_text(e.exp)})"
    if isinstance(e, Prod):
        return "*".join(f"({to_text(f)})" for f in e.factors)
    if isinstance(e, Sum):
        return "+".join(f"({to_text(t)})" for t in e.terms)
    if isinstance(e, Opaque):
        return e.text
    raise TypeError(f"not an Expr: {e!r}")


# ---------------------------------------------------------------------------
# Solution tokenization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RawSolution:
    learner_id: str
    body: str


# Relational / chaining delimiters that separate the expressions of a solution.
_DELIMITERS = set("=<>≤≥∝≈→\n;")

_WORD_RE = re.compile(r"[A-Za-z]+")

# short English words that would otherwise look like symbol runs
_STOPWORDS = frozenset(
    "a an as at be by do if in is it my no of on or so to up we".split()
)


def _prose_spans(body: str) -> list[tuple[int, int]]:
    """Spans of prose words. Long alphabetic runs are prose unless they name
    a function; short stopwords ("is", "a") count as prose only when they sit
    next to another prose/stopword word, so a lone symbol `a` survives."""
    words = [(m.start(), m.end(), m.group()) for m in _WORD_RE.finditer(body)]
    kind = []
    for _, _, w in words:
        lower = w.lower()
        if len(w) > 2 and lower not in KNOWN_FUNCTIONS:
            kind.append("prose")
        elif lower in _STOPWORDS:
            kind.append("stop")
        else:
            kind.append("math")
    changed = True
    while changed:
        changed = False
        for i, k in enumerate(kind):
            if k != "stop":
                continue
            for nb in (i - 1, i + 1):
                if not 0 <= nb < len(words):
                    continue
                a, b = (words[i], words[nb]) if nb > i else (words[nb], words[i])
                between = body[a[1] : b[0]]
                if between.strip() == "" and kind[nb] in ("prose", "stop"):
                    kind[i] = "prose"
                    changed = True
                    break
    return [(s, e) for (s, e, _), k in zip(words, kind) if k == "prose"]


def tokenize_solution(raw: RawSolution) -> list[str]:
    """Split a solution body into its ordered math expression segments.

    Cuts at relational delimiters, at commas/periods outside parentheses
    (decimal points survive), and at runs of prose words. Empty segments are
    dropped; order of appearance is preserved.
    """
    body = raw.body
    if not body or not body.strip():
        raise BlankSolution(f"solution {raw.learner_id!r} is blank")

    spans = _prose_spans(body)
    cuts: list[int] = [0]
    for a, b in spans:
        cuts.append(a)
        cuts.append(b)
    depth = 0
    i = 0
    n = len(body)
    while i < n:
        c = body[i]
        if c in "([":
            depth += 1
        elif c in ")]":
            depth = max(0, depth - 1)
        if c in _DELIMITERS:
            cuts.append(i)
            cuts.append(i + 1)
        elif c in ",." and depth == 0:
            # keep decimal points inside numbers
            if not (c == "." and i > 0 and body[i - 1].isdigit() and i + 1 < n and body[i + 1].isdigit()):
                cuts.append(i)
                cuts.append(i + 1)
        i += 1
    cuts.append(n)

    blanked = list(body)
    for a, b in spans:
        for j in range(a, b):
            blanked[j] = " "
    text = "".join(blanked)

    segments = []
    bounds = sorted(set(cuts))
    for a, b in zip(bounds, bounds[1:]):
        seg = text[a:b].strip()
        # a segment must contain some math content, not just punctuation
        if seg and any(ch.isalnum() for ch in seg):
            segments.append(seg)
    if not segments:
        raise BlankSolution(f"solution {raw.learner_id!r} has no expression segment")
    return segments


# ---------------------------------------------------------------------------
# Expression parser
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d+)?)|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()\[\],]))"
)


@dataclass(frozen=True)
class _Token:
    kind: str  # 'num' | 'ident' | one of + - * / ^ ( ) [ ] , | 'end'
    text: str
    pos: int


def _lex(s: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(s):
        m = _TOKEN_RE.match(s, pos)
        if m is None or m.end() == pos:
            stripped = s[pos:].lstrip()
            if not stripped:
                break
            raise ParseError(f"unexpected character {stripped[0]!r}", pos + (len(s[pos:]) - len(stripped)),
                             ["number", "identifier", "operator"])
        if m.group("num") is not None:
            tokens.append(_Token("num", m.group("num"), m.start("num")))
        elif m.group("ident") is not None:
            tokens.append(_Token("ident", m.group("ident"), m.start("ident")))
        else:
            tokens.append(_Token(m.group("op"), m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(_Token("end", "", len(s)))
    return tokens


class _Parser:
    """Recursive descent with precedence (loosest to tightest):
    +/-  <  * and /  <  unary minus  <  implicit multiplication  <  ^
    ``^`` is right-associative; ``sin^2 x`` sugars to ``(sin x)^2``.
    """

    def __init__(self, s: str):
        self.src = s
        self.tokens = _lex(s)
        self.i = 0

    @property
    def cur(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        t = self.cur
        self.i += 1
        return t

    def expect(self, kind: str) -> _Token:
        if self.cur.kind != kind:
            raise ParseError(f"unexpected token {self.cur.text!r}", self.cur.pos, [kind])
        return self.advance()

    def parse(self) -> Expr:
        e = self.parse_sum()
        if self.cur.kind != "end":
            raise ParseError(f"trailing input {self.cur.text!r}", self.cur.pos, ["end of input"])
        return e

    def parse_sum(self) -> Expr:
        terms = [self.parse_term()]
        while self.cur.kind in ("+", "-"):
            op = self.advance().kind
            t = self.parse_term()
            terms.append(t if op == "+" else Prod((Const(Fraction(-1)), t)))
        return terms[0] if len(terms) == 1 else Sum(tuple(terms))

    def parse_term(self) -> Expr:
        factors = [self.parse_unary()]
        while self.cur.kind in ("*", "/"):
            op = self.advance().kind
            f = self.parse_unary()
            factors.append(f if op == "*" else Pow(f, Const(Fraction(-1))))
        return factors[0] if len(factors) == 1 else Prod(tuple(factors))

    def parse_unary(self) -> Expr:
        if self.cur.kind == "-":
            self.advance()
            return Prod((Const(Fraction(-1)), self.parse_unary()))
        return self.parse_juxt()

    def _starts_atom(self) -> bool:
        return self.cur.kind in ("num", "ident", "(")

    def parse_juxt(self, allow_functions: bool = True) -> Expr:
        factors = [self.parse_power(allow_functions)]
        while self._starts_atom():
            if not allow_functions and self.cur.kind == "ident" and self._is_function_here():
                break
            factors.append(self.parse_power(allow_functions))
        return factors[0] if len(factors) == 1 else Prod(tuple(factors))

    def _is_function_here(self) -> bool:
        t = self.cur
        nxt = self.tokens[self.i + 1]
        return t.kind == "ident" and (t.text in KNOWN_FUNCTIONS or nxt.kind == "[")

    def parse_power(self, allow_functions: bool = True) -> Expr:
        base = self.parse_atom(allow_functions)
        if self.cur.kind == "^":
            self.advance()
            return Pow(base, self.parse_exponent())
        return base

    def parse_exponent(self) -> Expr:
        # exponent binds only a power-level factor, so `x^2y` is `(x^2)*y`
        # while `3^x^2` nests right as `3^(x^2)`
        if self.cur.kind == "-":
            self.advance()
            return Prod((Const(Fraction(-1)), self.parse_exponent()))
        return self.parse_power()

    def parse_atom(self, allow_functions: bool = True) -> Expr:
        t = self.cur
        if t.kind == "num":
            self.advance()
            return Const(Fraction(t.text))
        if t.kind == "(":
            self.advance()
            e = self.parse_sum()
            self.expect(")")
            return e
        if t.kind == "ident":
            self.advance()
            if self.cur.kind == "[":
                self.advance()
                args = [self.parse_sum()]
                while self.cur.kind == ",":
                    self.advance()
                    args.append(self.parse_sum())
                self.expect("]")
                return Func(t.text, tuple(args))
            if t.text in KNOWN_FUNCTIONS and allow_functions:
                return self.parse_function_tail(t.text)
            return Sym(t.text)
        raise ParseError(f"unexpected token {t.text!r}", t.pos, ["number", "identifier", "("])

    def parse_function_tail(self, name: str) -> Expr:
        # `sin^2 x` applies the power to the function value, not the argument
        power: Optional[Expr] = None
        if self.cur.kind == "^":
            self.advance()
            power = self.parse_exponent()
        if self.cur.kind == "(":
            self.advance()
            arg = self.parse_sum()
            self.expect(")")
        elif self._starts_atom():
            arg = self.parse_juxt(allow_functions=False)
        else:
            raise ParseError(f"missing argument for {name}", self.cur.pos, ["(", "number", "identifier"])
        f: Expr = Func(name, (arg,))
        return f if power is None else Pow(f, power)


def parse(expr_str: str) -> Expr:
    """Parse one expression string into an :data:`Expr` tree.

    Raises :class:`ParseError` with the offending byte offset on bad syntax.
    """
    return _Parser(expr_str).parse()


# ---------------------------------------------------------------------------
# Canonicalization
# ---------------------------------------------------------------------------

ARITHMETIC_ONLY = "ArithmeticOnly"
FULL = "Full"


@dataclass(frozen=True)
class CanonicalForm:
    expr: Expr
    key: str
    level: str


def _is_int_const(e: Expr) -> bool:
    return isinstance(e, Const) and e.value.denominator == 1


_ZERO = Const(Fraction(0))
_ONE = Const(Fraction(1))


def _norm(e: Expr) -> Expr:
    if isinstance(e, (Const, Sym, Opaque)):
        return e
    if isinstance(e, Func):
        return Func(e.name, tuple(_norm(a) for a in e.args))
    if isinstance(e, Pow):
        return _norm_pow(_norm(e.base), _norm(e.exp))
    if isinstance(e, Prod):
        return _norm_prod(e.factors)
    if isinstance(e, Sum):
        return _norm_sum(e.terms)
    raise TypeError(f"not an Expr: {e!r}")


def _norm_pow(base: Expr, exp: Expr) -> Expr:
    if base == _ZERO:
        # 0^positive -> 0; 0^0 and 0^negative stay symbolic
        if isinstance(exp, Const) and exp.value > 0:
            return _ZERO
        return Pow(base, exp)
    if exp == _ZERO:
        return _ONE
    if exp == _ONE:
        return base
    if isinstance(base, Pow) and _is_int_const(exp):
        # (a^b)^n -> a^(b*n) for integer n
        return _norm(Pow(base.base, Prod((base.exp, exp))))
    if isinstance(base, Prod) and _is_int_const(exp):
        # (a*b)^n -> a^n * b^n for integer n
        return _norm(Prod(tuple(Pow(f, exp) for f in base.factors)))
    if isinstance(base, Const) and _is_int_const(exp):
        n = int(exp.value)
        if n >= 0 or base.value != 0:
            return Const(base.value ** n)
    return Pow(base, exp)


def _split_coeff(e: Expr) -> tuple[Fraction, Expr | None]:
    """Split a normalized term into (rational coefficient, non-constant part)."""
    if isinstance(e, Const):
        return e.value, None
    if isinstance(e, Prod):
        coeff = Fraction(1)
        rest = []
        for f in e.factors:
            if isinstance(f, Const):
                coeff *= f.value
            else:
                rest.append(f)
        if not rest:
            return coeff, None
        return coeff, rest[0] if len(rest) == 1 else Prod(tuple(rest))
    return Fraction(1), e


def _with_coeff(coeff: Fraction, rest: Expr) -> Expr:
    if coeff == 0:
        return _ZERO
    if coeff == 1:
        return rest
    if isinstance(rest, Prod):
        factors = sorted((Const(coeff),) + rest.factors, key=_sort_key)
        return Prod(tuple(factors))
    return Prod((Const(coeff), rest))


def _norm_prod(factors: Sequence[Expr]) -> Expr:
    # flatten, fold constants, merge equal bases by summing exponents
    flat: list[Expr] = []
    stack = list(factors)
    while stack:
        f = _norm(stack.pop())
        if isinstance(f, Prod):
            stack.extend(f.factors)
        else:
            flat.append(f)

    coeff = Fraction(1)
    bases: dict[str, tuple[Expr, list[Expr]]] = {}  # base key -> (base, exponent terms)
    order: list[str] = []
    for f in flat:
        if isinstance(f, Const):
            coeff *= f.value
            continue
        if isinstance(f, Pow):
            b, x = f.base, f.exp
        else:
            b, x = f, _ONE
        bk = key(b)
        if bk not in bases:
            bases[bk] = (b, [])
            order.append(bk)
        bases[bk][1].append(x)

    if coeff == 0:
        return _ZERO

    out: list[Expr] = []
    for bk in order:
        b, exps = bases[bk]
        exp = exps[0] if len(exps) == 1 else _norm_sum(tuple(exps))
        p = _norm_pow(b, exp)
        if isinstance(p, Const):
            coeff *= p.value
        elif isinstance(p, Prod):
            # e.g. merged exponent reduced a power into a product; refold
            c2, rest = _split_coeff(p)
            coeff *= c2
            if rest is not None:
                out.extend(rest.factors if isinstance(rest, Prod) else [rest])
        else:
            out.append(p)

    if coeff == 0 or not out:
        return Const(coeff)
    out.sort(key=_sort_key)
    if coeff != 1:
        out = sorted(out + [Const(coeff)], key=_sort_key)
    return out[0] if len(out) == 1 else Prod(tuple(out))


def _norm_sum(terms: Sequence[Expr]) -> Expr:
    flat: list[Expr] = []
    stack = list(terms)
    while stack:
        t = _norm(stack.pop())
        if isinstance(t, Sum):
            stack.extend(t.terms)
        else:
            flat.append(t)

    const = Fraction(0)
    groups: dict[str, tuple[Expr, Fraction]] = {}  # rest key -> (rest, coeff sum)
    order: list[str] = []
    for t in flat:
        coeff, rest = _split_coeff(t)
        if rest is None:
            const += coeff
            continue
        rk = key(rest)
        if rk not in groups:
            groups[rk] = (rest, Fraction(0))
            order.append(rk)
        r, c = groups[rk]
        groups[rk] = (r, c + coeff)

    out: list[Expr] = []
    for rk in order:
        rest, coeff = groups[rk]
        if coeff != 0:
            out.append(_with_coeff(coeff, rest))
    if const != 0 or not out:
        out.append(Const(const))
    if len(out) == 1:
        return out[0]
    out.sort(key=_sort_key)
    return Sum(tuple(out))


def _expand(e: Expr) -> Expr:
    """Distribute products and integer powers over sums (Full level only)."""
    if isinstance(e, (Const, Sym, Opaque)):
        return e
    if isinstance(e, Func):
        return Func(e.name, tuple(_expand(a) for a in e.args))
    if isinstance(e, Sum):
        return Sum(tuple(_expand(t) for t in e.terms))
    if isinstance(e, Pow):
        base = _expand(e.base)
        exp = _expand(e.exp)
        if isinstance(base, Sum) and _is_int_const(exp) and exp.value >= 2:
            n = int(exp.value)
            acc: Expr = base
            for _ in range(n - 1):
                acc = _expand(Prod((acc, base)))
            return acc
        return Pow(base, exp)
    if isinstance(e, Prod):
        factors = [_expand(f) for f in e.factors]
        terms: list[list[Expr]] = [[]]
        for f in factors:
            parts = list(f.terms) if isinstance(f, Sum) else [f]
            terms = [t + [p] for t in terms for p in parts]
        if len(terms) == 1:
            return Prod(tuple(terms[0]))
        return Sum(tuple(Prod(tuple(t)) for t in terms))
    raise TypeError(f"not an Expr: {e!r}")


_MAX_PASSES = 20


def canonicalize(e: Expr, level: str = ARITHMETIC_ONLY) -> CanonicalForm:
    """Normalize an expression to its canonical form at the given level.

    ArithmeticOnly folds constants, flattens and orders operands, collects
    like terms and merges equal bases; Full additionally distributes to the
    expanded collected form. Neither touches trig/log/exp identities.
    """
    if level not in (ARITHMETIC_ONLY, FULL):
        raise ValueError(f"unknown simplification level {level!r}")
    cur = e
    for _ in range(_MAX_PASSES):
        nxt = _norm(cur)
        if level == FULL:
            nxt = _norm(_expand(nxt))
        if nxt == cur:
            break
        cur = nxt
    return CanonicalForm(expr=cur, key=key(cur), level=level)


def segment_to_canonical(segment: str, level: str = ARITHMETIC_ONLY) -> CanonicalForm:
    """Canonicalize one expression segment, falling back to an opaque feature.

    Grading must be total over real student input, so malformed segments are
    kept, keyed by their trimmed source text.
    """
    try:
        e = parse(segment)
    except ParseError:
        op = Opaque(segment.strip())
        return CanonicalForm(expr=op, key=key(op), level=level)
    return canonicalize(e, level)
