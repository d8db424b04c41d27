"""Plain-text tensor documents: a recursive-descent parser and a canonical printer.

A document is a header followed by a body::

    # elliptic Euler bivector
    n=3; cap=4; kind=multivector; degree=2;
    x1 d2^d3 - x2 d1^d3 + x3 d1^d2

Kinds are ``multivector`` (basis ``d1^d2``), ``form`` (basis ``dx1^dx2``),
``function`` and ``map`` (statements ``x1 -> expr`` separated by newlines or
``;``).  In expressions ``^`` followed by an integer is a power and otherwise a
wedge; ``*`` and juxtaposition multiply; ``/`` divides by a constant.

The printer emits fully expanded text: terms sorted by basis tuple, then by
monomial (ascending degree, lexicographically descending exponents), with
coefficients as ``p/q``.  ``parse`` followed by ``format`` is the identity on
canonical text.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

from .polyring import PolyMap, TruncPoly, rational
from .tensorcalc import DiffForm, Multivector, merge_sign

__all__ = [
    "ParseError",
    "TensorDocument",
    "parse_tensor",
    "parse_body",
    "format_tensor",
    "format_document",
    "format_poly",
    "format_map",
    "format_rational",
]

KINDS = ("multivector", "form", "map", "function")
Value = Union[TruncPoly, Multivector, DiffForm, PolyMap]


class ParseError(ValueError):
    """Syntax or typing error with a 1-based source position."""

    def __init__(self, message: str, line: int = 0, col: int = 0, expected: tuple = ()):
        self.message = message
        self.line = line
        self.col = col
        self.expected = tuple(expected)
        where = f"line {line}, column {col}: " if line else ""
        tail = f" (expected one of: {', '.join(self.expected)})" if self.expected else ""
        super().__init__(f"{where}{message}{tail}")


@dataclass(frozen=True)
class TensorDocument:
    nvars: int
    cap: int
    kind: str
    degree: int
    value: Value


# ---------------------------------------------------------------------------
# printing


def format_rational(c) -> str:
    c = rational(c)
    if c.q == 1:
        return str(c.p)
    return f"{c.p}/{c.q}"


def _monomial_text(exps: tuple) -> str:
    out = []
    for i, e in enumerate(exps):
        if e == 1:
            out.append(f"x{i + 1}")
        elif e > 1:
            out.append(f"x{i + 1}^{e}")
    return "*".join(out)


def _term_text(c, exps: tuple, basis: str) -> tuple[bool, str]:
    negative = c < 0
    mag = -c if negative else c
    mono = _monomial_text(exps)
    pieces = []
    if mag != 1 or (not mono and not basis):
        pieces.append(format_rational(mag))
    if mono:
        pieces.append(mono)
    head = "*".join(pieces)
    if basis:
        head = f"{head} {basis}" if head else basis
    return negative, head


def _join(terms: list[tuple[bool, str]]) -> str:
    if not terms:
        return "0"
    out = []
    for k, (neg, text) in enumerate(terms):
        if k == 0:
            out.append(f"-{text}" if neg else text)
        else:
            out.append(f" - {text}" if neg else f" + {text}")
    return "".join(out)


def format_poly(p: TruncPoly) -> str:
    return _join([_term_text(c, e, "") for e, c in p.terms()])


def _basis_text(idx: tuple, prefix: str) -> str:
    return "^".join(f"{prefix}{i + 1}" for i in idx)


def format_tensor(value: Value) -> str:
    """Canonical body text of a kernel value (no header)."""
    if isinstance(value, TruncPoly):
        return format_poly(value)
    if isinstance(value, PolyMap):
        return format_map(value, sep="\n")
    if isinstance(value, (Multivector, DiffForm)):
        prefix = "d" if isinstance(value, Multivector) else "dx"
        terms = []
        for idx, f in value.items():
            basis = _basis_text(idx, prefix)
            terms.extend(_term_text(c, e, basis) for e, c in f.terms())
        return _join(terms)
    raise TypeError(f"cannot format {type(value).__name__}")


def format_map(phi: PolyMap, sep: str = "; ") -> str:
    return sep.join(f"x{i + 1} -> {format_poly(c)}" for i, c in enumerate(phi.components))


def _kind_of(value: Value) -> str:
    if isinstance(value, Multivector):
        return "multivector"
    if isinstance(value, DiffForm):
        return "form"
    if isinstance(value, PolyMap):
        return "map"
    if isinstance(value, TruncPoly):
        return "function"
    raise TypeError(f"no document kind for {type(value).__name__}")


def format_document(value: Value) -> str:
    """Header plus canonical body, newline terminated."""
    kind = _kind_of(value)
    header = f"n={value.nvars}; cap={value.cap}; kind={kind};"
    if kind in ("multivector", "form"):
        header += f" degree={value.degree};"
    return f"{header}\n{format_tensor(value)}\n"


# ---------------------------------------------------------------------------
# lexing

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>\#[^\n]*)
  | (?P<arrow>->)
  | (?P<int>\d+)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^();=])
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str  # int, var, d, dx, name, op, arrow, eof
    text: str
    line: int
    col: int
    index: int = 0  # 0-based variable/basis index for var, d, dx


def _lex(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        s = m.group()
        if kind == "name":
            mm = re.fullmatch(r"(x|d|dx)(\d+)", s)
            if mm:
                idx = int(mm.group(2))
                if idx < 1:
                    raise ParseError(f"index in {s!r} must be at least 1", line, col)
                toks.append(_Tok({"x": "var", "d": "d", "dx": "dx"}[mm.group(1)], s, line, col, idx - 1))
            else:
                toks.append(_Tok("name", s, line, col))
        elif kind not in ("ws", "comment"):
            toks.append(_Tok(kind, s, line, col))
        nl = s.count("\n")
        if nl:
            line += nl
            line_start = pos + s.rindex("\n") + 1
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


# ---------------------------------------------------------------------------
# graded values used while parsing: {sorted index tuple: TruncPoly}


@dataclass
class _Elem:
    comps: dict
    family: str | None  # "d", "dx" or None for pure functions

    def degrees(self) -> set:
        return {len(k) for k, v in self.comps.items() if v}


class _Parser:
    def __init__(self, text: str):
        self.toks = _lex(text)
        self.pos = 0
        self.n = 0
        self.cap = 0

    # -- token helpers ------------------------------------------------------
    @property
    def tok(self) -> _Tok:
        return self.toks[self.pos]

    def peek(self, k: int = 1) -> _Tok:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    def advance(self) -> _Tok:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def error(self, message: str, tok: _Tok | None = None, expected=()):
        tok = tok or self.tok
        return ParseError(message, tok.line, tok.col, expected)

    def expect_op(self, s: str) -> _Tok:
        if self.tok.kind == "op" and self.tok.text == s:
            return self.advance()
        raise self.error(f"unexpected {self._describe(self.tok)}", expected=(repr(s),))

    @staticmethod
    def _describe(t: _Tok) -> str:
        return "end of input" if t.kind == "eof" else repr(t.text)

    def is_op(self, s: str, tok: _Tok | None = None) -> bool:
        t = tok or self.tok
        return t.kind == "op" and t.text == s

    # -- header -------------------------------------------------------------
    def header(self) -> dict:
        fields: dict = {}
        while self.tok.kind in ("name", "var", "d", "dx") and self.is_op("=", self.peek()):
            key_tok = self.advance()
            key = key_tok.text
            self.advance()
            val_tok = self.advance()
            if val_tok.kind not in ("int", "name"):
                raise self.error(f"bad value for header field {key!r}", val_tok)
            if key in fields:
                raise self.error(f"duplicate header field {key!r}", key_tok)
            fields[key] = (val_tok.text, val_tok)
            self.expect_op(";")
        for key in ("n", "cap", "kind"):
            if key not in fields:
                raise self.error(f"missing header field {key!r}", expected=("n=INT;", "cap=INT;", "kind=KIND;"))
        extra = set(fields) - {"n", "cap", "kind", "degree"}
        if extra:
            k = sorted(extra)[0]
            raise self.error(f"unknown header field {k!r}", fields[k][1])
        out = {}
        for key in ("n", "cap", "degree"):
            if key in fields:
                text, tok = fields[key]
                if not text.isdigit():
                    raise self.error(f"header field {key!r} must be an integer", tok)
                out[key] = int(text)
        kind, tok = fields["kind"]
        if kind not in KINDS:
            raise self.error(f"unknown kind {kind!r}", tok, expected=KINDS)
        out["kind"] = kind
        if out["n"] < 1:
            raise self.error("n must be positive", fields["n"][1])
        return out

    # -- expressions --------------------------------------------------------
    def const(self, c) -> _Elem:
        return _Elem({(): TruncPoly.constant(self.n, self.cap, c)}, None)

    def add(self, a: _Elem, b: _Elem, tok: _Tok, sign: int = 1) -> _Elem:
        fam = self._family(a, b, tok)
        da, db = a.degrees(), b.degrees()
        if da and db and da != db:
            raise self.error(
                f"cannot add terms of tensor degree {sorted(da)[0]} and {sorted(db)[0]}", tok
            )
        out = dict(a.comps)
        for k, v in b.comps.items():
            v = v if sign > 0 else -v
            out[k] = out[k] + v if k in out else v
        return _Elem(out, fam)

    def _family(self, a: _Elem, b: _Elem, tok: _Tok):
        if a.family and b.family and a.family != b.family:
            raise self.error("cannot mix multivector and form basis elements", tok)
        return a.family or b.family

    def mul(self, a: _Elem, b: _Elem, tok: _Tok) -> _Elem:
        fam = self._family(a, b, tok)
        out: dict = {}
        for I, f in a.comps.items():
            for J, g in b.comps.items():
                s = merge_sign(I, J)
                if not s:
                    continue
                key = tuple(sorted(I + J))
                prod = f * g
                prod = prod if s > 0 else -prod
                out[key] = out[key] + prod if key in out else prod
        return _Elem(out, fam)

    def is_constant(self, e: _Elem):
        nonzero = {k: v for k, v in e.comps.items() if v}
        if not nonzero:
            return rational(0)
        if set(nonzero) != {()}:
            return None
        f = nonzero[()]
        if f.max_degree() != 0:
            return None
        return f.constant_term()

    def expr(self) -> _Elem:
        if self.is_op("-") or self.is_op("+"):
            tok = self.advance()
            first = self.term()
            value = self.add(self.const(0), first, tok, -1 if tok.text == "-" else 1)
        else:
            value = self.term()
        while self.is_op("+") or self.is_op("-"):
            tok = self.advance()
            value = self.add(value, self.term(), tok, 1 if tok.text == "+" else -1)
        return value

    def _starts_factor(self) -> bool:
        t = self.tok
        if t.kind in ("int", "d", "dx"):
            return True
        if t.kind == "var":
            # in map bodies "x2 -> ..." begins the next statement
            return not (self.peek().kind == "arrow")
        return self.is_op("(")

    def term(self) -> _Elem:
        value = self.factor()
        while True:
            if self.is_op("*"):
                tok = self.advance()
                value = self.mul(value, self.factor(), tok)
            elif self.is_op("/"):
                tok = self.advance()
                rhs = self.factor()
                c = self.is_constant(rhs)
                if c is None:
                    raise self.error("division is only allowed by a nonzero constant", tok)
                if c == 0:
                    raise self.error("division by zero", tok)
                value = self.mul(value, self.const(1 / c), tok)
            elif self._starts_factor():
                tok = self.tok
                value = self.mul(value, self.factor(), tok)
            else:
                return value

    def factor(self) -> _Elem:
        base = self.atom()
        while self.is_op("^"):
            tok = self.advance()
            if self.tok.kind == "int":
                k = int(self.advance().text)
                acc = self.const(1)
                for _ in range(k):
                    acc = self.mul(acc, base, tok)
                base = acc
            else:
                base = self.mul(base, self.atom(), tok)
        return base

    def basis_chain(self) -> _Elem:
        first = self.tok
        fam = first.kind
        idx = [self._basis_index(self.advance())]
        while self.is_op("^") and self.peek().kind == fam:
            self.advance()
            t = self.advance()
            i = self._basis_index(t)
            if i in idx:
                raise self.error(f"repeated index {t.text!r} in a wedge tuple", t)
            idx.append(i)
        if self.is_op("^") and self.peek().kind in ("d", "dx"):
            raise self.error("cannot mix multivector and form basis elements", self.peek())
        s = merge_sign(tuple(idx), ())
        one = TruncPoly.constant(self.n, self.cap, s)
        return _Elem({tuple(sorted(idx)): one}, fam)

    def _basis_index(self, t: _Tok) -> int:
        if t.index >= self.n:
            raise self.error(f"index {t.index + 1} out of range 1..{self.n}", t)
        return t.index

    def atom(self) -> _Elem:
        t = self.tok
        if t.kind == "int":
            self.advance()
            return self.const(int(t.text))
        if t.kind == "var":
            self.advance()
            if t.index >= self.n:
                raise self.error(f"variable {t.text!r} out of range x1..x{self.n}", t)
            return _Elem({(): TruncPoly.var(self.n, self.cap, t.index)}, None)
        if t.kind in ("d", "dx"):
            return self.basis_chain()
        if self.is_op("("):
            self.advance()
            inner = self.expr()
            self.expect_op(")")
            return inner
        raise self.error(f"unexpected {self._describe(t)}", expected=("number", "x<i>", "d<i>", "dx<i>", "'('"))

    # -- documents ----------------------------------------------------------
    def document(self) -> TensorDocument:
        head = self.header()
        self.n, self.cap, kind = head["n"], head["cap"], head["kind"]
        if kind == "map":
            value = self.map_body()
            degree = 1
        else:
            body_tok = self.tok
            elem = self.expr()
            if self.tok.kind != "eof":
                raise self.error(f"unexpected {self._describe(self.tok)}", expected=("operator", "end of input"))
            value, degree = self.to_value(elem, kind, head.get("degree"), body_tok)
        if "degree" in head and head["degree"] != degree:
            raise ParseError(f"header says degree={head['degree']} but the body has degree {degree}")
        return TensorDocument(self.n, self.cap, kind, degree, value)

    def to_value(self, elem: _Elem, kind: str, declared, tok: _Tok):
        degs = elem.degrees()
        if kind == "function":
            if elem.family or degs - {0}:
                raise self.error("function body contains basis elements", tok)
            f = elem.comps.get((), TruncPoly.zero(self.n, self.cap))
            return f, 0
        want = "d" if kind == "multivector" else "dx"
        if elem.family and elem.family != want:
            raise self.error(f"{kind} body uses {elem.family}<i> basis elements", tok)
        if not degs:
            if declared is None:
                raise self.error("a zero tensor needs an explicit degree= header field", tok)
            degree = declared
        else:
            degree = degs.pop()
        if degree > self.n:
            raise self.error(f"degree {degree} exceeds n={self.n}", tok)
        comps = {k: v for k, v in elem.comps.items() if v}
        cls = Multivector if kind == "multivector" else DiffForm
        return cls(self.n, self.cap, degree, comps), degree

    def map_body(self) -> PolyMap:
        comps: dict[int, TruncPoly] = {}
        while self.tok.kind != "eof":
            if self.is_op(";"):
                self.advance()
                continue
            t = self.tok
            if t.kind != "var" or self.peek().kind != "arrow":
                raise self.error(f"unexpected {self._describe(t)}", expected=("x<i> ->",))
            self.advance()
            self.advance()
            if t.index >= self.n:
                raise self.error(f"variable {t.text!r} out of range x1..x{self.n}", t)
            if t.index in comps:
                raise self.error(f"component {t.text!r} given twice", t)
            body_tok = self.tok
            elem = self.expr()
            comps[t.index] = self.to_value(elem, "function", None, body_tok)[0]
        missing = [i for i in range(self.n) if i not in comps]
        if missing:
            raise self.error(f"map is missing component x{missing[0] + 1}")
        return PolyMap([comps[i] for i in range(self.n)])


def parse_tensor(text: str) -> TensorDocument:
    """Parse a full document (header and body)."""
    return _Parser(text).document()


def parse_body(text: str, kind: str, nvars: int, cap: int, degree: int | None = None) -> Value:
    """Parse a body without a header, e.g. ``parse_body("x1 d2", "multivector", 2, 3)``."""
    header = f"n={nvars}; cap={cap}; kind={kind};"
    if degree is not None:
        header += f" degree={degree};"
    return parse_tensor(header + "\n" + text).value
