"""Truncated multivariate polynomials over the rationals.

A :class:`TruncPoly` is a polynomial in ``nvars`` variables whose terms of
total degree above ``cap`` are discarded after every operation.  Storage is
graded: one homogeneous ``fmpq_mpoly`` per degree ``0..cap``, so truncation
after a product is free (pairs of parts whose degrees overflow are simply
never multiplied).

Variables are indexed from 0 internally; text I/O uses 1-based names.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Iterator, Sequence

import flint

Rational = flint.fmpq

__all__ = [
    "Rational",
    "rational",
    "PolyError",
    "ShapeMismatch",
    "SingularLinearPart",
    "TruncPoly",
    "PolyMap",
    "poly_compose",
    "map_compose",
    "map_invert",
]


class PolyError(ValueError):
    """Base class for polynomial-kernel errors."""


class ShapeMismatch(PolyError):
    def __init__(self, a, b):
        super().__init__(
            f"shape mismatch: (nvars={a.nvars}, cap={a.cap}) vs (nvars={b.nvars}, cap={b.cap})"
        )
        self.left = a
        self.right = b


class SingularLinearPart(PolyError):
    pass


def rational(value) -> Rational:
    """Coerce ints, Fractions, strings like ``"3/4"`` and fmpq to fmpq."""
    if isinstance(value, flint.fmpq):
        return value
    if isinstance(value, int):
        return flint.fmpq(value)
    if isinstance(value, flint.fmpz):
        return flint.fmpq(int(value))
    if isinstance(value, Fraction):
        return flint.fmpq(value.numerator, value.denominator)
    if isinstance(value, str):
        f = Fraction(value.strip())
        return flint.fmpq(f.numerator, f.denominator)
    raise TypeError(f"cannot interpret {value!r} as an exact rational")


@lru_cache(maxsize=None)
def _ctx(n: int):
    return flint.fmpq_mpoly_ctx.get(("x", n), "deglex")


@lru_cache(maxsize=None)
def _zero(n: int):
    return _ctx(n).from_dict({})


def _mul_parts(a: Sequence, b: Sequence, top: int, n: int) -> list:
    """Graded product truncated at degree ``top``."""
    zero = _zero(n)
    out = [zero] * (top + 1)
    nb = [(j, q) for j, q in enumerate(b) if q]
    if not nb:
        return out
    for i, p in enumerate(a):
        if not p or i > top:
            continue
        for j, q in nb:
            if i + j > top:
                break
            out[i + j] = out[i + j] + p * q
    return out


@lru_cache(maxsize=None)
def _unit(n: int, i: int) -> tuple:
    return tuple(int(k == i) for k in range(n))


def _degree_key(exps: tuple) -> tuple:
    # ascending total degree, then lexicographically descending exponents
    return (sum(exps), tuple(-e for e in exps))


class TruncPoly:
    """Polynomial over Q truncated at total degree ``cap``.

    Instances are immutable.  Two values compare equal iff they have the same
    shape and the same terms.
    """

    __slots__ = ("nvars", "cap", "_parts")

    def __init__(self, nvars: int, cap: int, parts: Sequence):
        if nvars < 1:
            raise PolyError("nvars must be positive")
        if cap < 0:
            raise PolyError("cap must be nonnegative")
        self.nvars = nvars
        self.cap = cap
        parts = list(parts[: cap + 1])
        parts.extend([_zero(nvars)] * (cap + 1 - len(parts)))
        self._parts = tuple(parts)

    # -- construction -------------------------------------------------------
    @classmethod
    def zero(cls, nvars: int, cap: int) -> "TruncPoly":
        return cls(nvars, cap, ())

    @classmethod
    def constant(cls, nvars: int, cap: int, c) -> "TruncPoly":
        return cls(nvars, cap, (_ctx(nvars).constant(rational(c)),))

    @classmethod
    def var(cls, nvars: int, cap: int, i: int) -> "TruncPoly":
        if not 0 <= i < nvars:
            raise IndexError(f"variable index {i + 1} out of range 1..{nvars}")
        parts = [_zero(nvars), _ctx(nvars).gens()[i]]
        return cls(nvars, cap, parts)

    @classmethod
    def from_terms(cls, nvars: int, cap: int, terms) -> "TruncPoly":
        """Build from ``{exponent tuple: coefficient}``; terms above cap are dropped."""
        graded: list[dict] = [{} for _ in range(cap + 1)]
        items = terms.items() if hasattr(terms, "items") else terms
        for exps, c in items:
            exps = tuple(int(e) for e in exps)
            if len(exps) != nvars or min(exps, default=0) < 0:
                raise PolyError(f"bad exponent tuple {exps} for {nvars} variables")
            d = sum(exps)
            if d > cap:
                continue
            c = rational(c)
            if c:
                slot = graded[d]
                slot[exps] = slot.get(exps, 0) + c
        ctx = _ctx(nvars)
        parts = [ctx.from_dict({k: v for k, v in g.items() if v}) for g in graded]
        return cls(nvars, cap, parts)

    @classmethod
    def _wrap(cls, nvars, cap, parts) -> "TruncPoly":
        obj = object.__new__(cls)
        obj.nvars = nvars
        obj.cap = cap
        obj._parts = tuple(parts)
        return obj

    # -- inspection ---------------------------------------------------------
    def parts(self) -> tuple:
        return self._parts

    def terms(self) -> list[tuple[tuple, Rational]]:
        """Nonzero terms in canonical graded-lex order (ascending degree)."""
        out = []
        for p in self._parts:
            if p:
                out.extend(zip((tuple(m) for m in p.monoms()), p.coeffs()))
        out.sort(key=lambda t: _degree_key(t[0]))
        return out

    def to_dict(self) -> dict:
        return dict(self.terms())

    def coefficient(self, exps: Sequence[int]) -> Rational:
        exps = tuple(exps)
        d = sum(exps)
        if d > self.cap:
            return flint.fmpq(0)
        return self._parts[d][exps]

    def nterms(self) -> int:
        return sum(len(p) for p in self._parts)

    def is_zero(self) -> bool:
        return not any(self._parts)

    __bool__ = lambda self: not self.is_zero()  # noqa: E731

    def min_degree(self) -> int | None:
        for d, p in enumerate(self._parts):
            if p:
                return d
        return None

    def max_degree(self) -> int | None:
        for d in range(self.cap, -1, -1):
            if self._parts[d]:
                return d
        return None

    def constant_term(self) -> Rational:
        return self._parts[0][(0,) * self.nvars]

    def linear_coefficients(self) -> list[Rational]:
        """Coefficients of x_1..x_n in the degree-1 part."""
        if self.cap < 1:
            return [flint.fmpq(0)] * self.nvars
        part = self._parts[1]
        return [part[_unit(self.nvars, i)] for i in range(self.nvars)]

    # -- graded slicing -----------------------------------------------------
    def homogeneous(self, d: int) -> "TruncPoly":
        zero = _zero(self.nvars)
        parts = [zero] * (self.cap + 1)
        if 0 <= d <= self.cap:
            parts[d] = self._parts[d]
        return TruncPoly._wrap(self.nvars, self.cap, parts)

    def graded(self, lo: int, hi: int) -> "TruncPoly":
        """Keep only the terms of degree ``lo..hi``."""
        zero = _zero(self.nvars)
        parts = [p if lo <= d <= hi else zero for d, p in enumerate(self._parts)]
        return TruncPoly._wrap(self.nvars, self.cap, parts)

    def with_cap(self, cap: int) -> "TruncPoly":
        return TruncPoly(self.nvars, cap, self._parts)

    # -- arithmetic ---------------------------------------------------------
    def _check(self, other: "TruncPoly"):
        if not isinstance(other, TruncPoly):
            raise TypeError(f"expected TruncPoly, got {type(other).__name__}")
        if other.nvars != self.nvars or other.cap != self.cap:
            raise ShapeMismatch(self, other)

    def __add__(self, other):
        if not isinstance(other, TruncPoly):
            return self + TruncPoly.constant(self.nvars, self.cap, other)
        self._check(other)
        return TruncPoly._wrap(
            self.nvars, self.cap, [a + b for a, b in zip(self._parts, other._parts)]
        )

    __radd__ = __add__

    def __sub__(self, other):
        if not isinstance(other, TruncPoly):
            return self - TruncPoly.constant(self.nvars, self.cap, other)
        self._check(other)
        return TruncPoly._wrap(
            self.nvars, self.cap, [a - b for a, b in zip(self._parts, other._parts)]
        )

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return TruncPoly._wrap(self.nvars, self.cap, [-a for a in self._parts])

    def scale(self, c) -> "TruncPoly":
        c = rational(c)
        if not c:
            return TruncPoly.zero(self.nvars, self.cap)
        return TruncPoly._wrap(self.nvars, self.cap, [a * c for a in self._parts])

    def __mul__(self, other):
        if not isinstance(other, TruncPoly):
            return self.scale(other)
        self._check(other)
        return TruncPoly._wrap(
            self.nvars, self.cap, _mul_parts(self._parts, other._parts, self.cap, self.nvars)
        )

    def __rmul__(self, other):
        return self.scale(other)

    def __pow__(self, k: int) -> "TruncPoly":
        if k < 0:
            raise PolyError("negative powers are not polynomials")
        out = TruncPoly.constant(self.nvars, self.cap, 1)
        base = self
        while k:
            if k & 1:
                out = out * base
            k >>= 1
            if k:
                base = base * base
        return out

    def partial(self, i: int) -> "TruncPoly":
        if not 0 <= i < self.nvars:
            raise IndexError(f"variable index {i + 1} out of range 1..{self.nvars}")
        zero = _zero(self.nvars)
        parts = [p.derivative(i) if p else zero for p in self._parts[1:]]
        return TruncPoly._wrap(self.nvars, self.cap, parts + [zero])

    def mul_var(self, i: int) -> "TruncPoly":
        """Multiply by x_i (cheap path used by linear vector fields)."""
        g = _ctx(self.nvars).gens()[i]
        zero = _zero(self.nvars)
        parts = [zero] + [p * g if p else zero for p in self._parts[:-1]]
        return TruncPoly._wrap(self.nvars, self.cap, parts)

    def restrict(self, keep: Sequence[int]) -> "TruncPoly":
        """Set every variable not listed in ``keep`` to zero and renumber."""
        m = len(keep)
        ctx = _ctx(m)
        gens = ctx.gens()
        keep_pos = {v: k for k, v in enumerate(keep)}
        subs = [gens[keep_pos[v]] if v in keep_pos else _zero(m) for v in range(self.nvars)]
        parts = [p.compose(*subs, ctx=ctx) if p else _zero(m) for p in self._parts]
        return TruncPoly._wrap(m, self.cap, parts)

    def extend(self, nvars: int, positions: Sequence[int]) -> "TruncPoly":
        """Embed into ``nvars`` variables, variable k going to ``positions[k]``."""
        ctx = _ctx(nvars)
        gens = ctx.gens()
        subs = [gens[p] for p in positions]
        parts = [p.compose(*subs, ctx=ctx) if p else _zero(nvars) for p in self._parts]
        return TruncPoly._wrap(nvars, self.cap, parts)

    # -- comparison ---------------------------------------------------------
    def __eq__(self, other):
        if isinstance(other, TruncPoly):
            return (
                self.nvars == other.nvars
                and self.cap == other.cap
                and all(a == b for a, b in zip(self._parts, other._parts))
            )
        if isinstance(other, (int, Fraction, flint.fmpq)):
            return self == TruncPoly.constant(self.nvars, self.cap, other)
        return NotImplemented

    def __hash__(self):
        return hash((self.nvars, self.cap, tuple(self.terms())))

    def __repr__(self):
        from .textio import format_poly

        return f"TruncPoly(n={self.nvars}, cap={self.cap}, {format_poly(self)!r})"


# ---------------------------------------------------------------------------
# composition


def _compose_parts(p: TruncPoly, comps: Sequence[TruncPoly], top: int) -> list:
    """Horner evaluation of p(comps) truncated at ``top``.

    Every component has zero constant term, so a factor comps[i]**k has order
    at least k and the cofactor only needs precision ``top - k``.
    """
    n = p.nvars
    m = comps[0].nvars
    zero = _zero(m)
    one = _ctx(m).constant(1)

    terms: dict = {}
    for part in p._parts[: top + 1]:
        if part:
            for mono, c in zip(part.monoms(), part.coeffs()):
                terms[tuple(mono)] = c
    if not terms:
        return [zero] * (top + 1)

    cparts = [c._parts for c in comps]

    def rec(group: dict, i: int, prec: int) -> list:
        if i == n:
            (c,) = group.values()
            return [one * c] + [zero] * prec
        by_k: dict[int, dict] = {}
        for exps, c in group.items():
            if exps[i] <= prec:
                by_k.setdefault(exps[i], {})[exps] = c
        if not by_k:
            return [zero] * (prec + 1)
        kmax = max(by_k)
        acc = None
        for k in range(kmax, -1, -1):
            local = prec - k
            if acc is not None:
                acc = _mul_parts(acc, cparts[i], local, m)
            sub = rec(by_k[k], i + 1, local) if k in by_k else None
            if acc is None:
                acc = sub
            elif sub is not None:
                acc = [a + b for a, b in zip(acc, sub)]
        return acc

    # the degree-0 term at each level is carried via by_k[0]
    return rec(terms, 0, top)


def _is_linear(comps: Sequence[TruncPoly]) -> bool:
    return all(all(not q for d, q in enumerate(c._parts) if d != 1) for c in comps)


def poly_compose(p: TruncPoly, phi) -> TruncPoly:
    """Substitute ``x_i -> phi_i`` in p, truncating at min(p.cap, phi.cap)."""
    comps = phi.components if isinstance(phi, PolyMap) else tuple(phi)
    if len(comps) != p.nvars:
        raise PolyError(f"substitution has {len(comps)} components for {p.nvars} variables")
    m = comps[0].nvars
    cap = min([p.cap] + [c.cap for c in comps])
    for c in comps:
        if c.nvars != m:
            raise ShapeMismatch(comps[0], c)
        if c._parts[0]:
            raise PolyError("substituted components must have zero constant term")
    if _is_linear(comps):
        ctx = _ctx(m)
        lin = [c._parts[1] if c.cap >= 1 else _zero(m) for c in comps]
        parts = [q.compose(*lin, ctx=ctx) if q else _zero(m) for q in p._parts[: cap + 1]]
        return TruncPoly._wrap(m, cap, parts)
    comps = [c.with_cap(cap) if c.cap != cap else c for c in comps]
    return TruncPoly._wrap(m, cap, _compose_parts(p, comps, cap))


# ---------------------------------------------------------------------------
# polynomial maps


class PolyMap:
    """A polynomial coordinate change ``x -> (phi_1(x), ..., phi_n(x))``.

    Components have no constant term and the linear part is invertible, so
    the map is an invertible jet.  ``kind`` is ``"near-identity"`` when the
    linear part is the identity and ``"linear-invertible"`` otherwise.
    """

    __slots__ = ("nvars", "cap", "components", "_inverse")

    def __init__(self, components: Sequence[TruncPoly]):
        comps = tuple(components)
        if not comps:
            raise PolyError("a map needs at least one component")
        n = comps[0].nvars
        cap = comps[0].cap
        if len(comps) != n:
            raise PolyError(f"a map on {n} variables needs {n} components, got {len(comps)}")
        for c in comps:
            if c.nvars != n or c.cap != cap:
                raise ShapeMismatch(comps[0], c)
            if c.constant_term():
                raise PolyError("map components must vanish at the origin")
        self.nvars = n
        self.cap = cap
        self.components = comps
        self._inverse = None
        if cap >= 1 and self.linear_matrix().det() == 0:
            raise SingularLinearPart("linear part of the map is singular over Q")

    @classmethod
    def identity(cls, nvars: int, cap: int) -> "PolyMap":
        return cls([TruncPoly.var(nvars, cap, i) for i in range(nvars)])

    @classmethod
    def linear(cls, matrix, cap: int) -> "PolyMap":
        """The map ``x -> A x`` for an n x n rational matrix (nested lists or fmpq_mat)."""
        rows = matrix.tolist() if isinstance(matrix, flint.fmpq_mat) else matrix
        n = len(rows)
        comps = []
        for i in range(n):
            terms = {}
            for j in range(n):
                c = rational(rows[i][j])
                if c:
                    e = [0] * n
                    e[j] = 1
                    terms[tuple(e)] = c
            comps.append(TruncPoly.from_terms(n, cap, terms))
        return cls(comps)

    @property
    def kind(self) -> str:
        n = self.nvars
        return "near-identity" if self.linear_matrix() == flint.fmpq_mat(n, n, [int(i == j) for i in range(n) for j in range(n)]) else "linear-invertible"

    def linear_matrix(self) -> flint.fmpq_mat:
        n = self.nvars
        return flint.fmpq_mat(n, n, [c for comp in self.components for c in comp.linear_coefficients()])

    def linear_part(self) -> "PolyMap":
        return PolyMap([c.graded(1, 1) for c in self.components])

    def is_linear(self) -> bool:
        return _is_linear(self.components)

    def jacobian(self) -> list[list[TruncPoly]]:
        """``J[i][j] = d phi_i / d x_j``."""
        return [[c.partial(j) for j in range(self.nvars)] for c in self.components]

    def with_cap(self, cap: int) -> "PolyMap":
        return PolyMap([c.with_cap(cap) for c in self.components])

    def __call__(self, p: TruncPoly) -> TruncPoly:
        return poly_compose(p, self)

    def compose(self, other: "PolyMap") -> "PolyMap":
        return map_compose(self, other)

    def inverse(self) -> "PolyMap":
        if self._inverse is None:
            self._inverse = map_invert(self)
        return self._inverse

    def __eq__(self, other):
        if not isinstance(other, PolyMap):
            return NotImplemented
        return self.components == other.components

    def __hash__(self):
        return hash(self.components)

    def __repr__(self):
        from .textio import format_map

        return f"PolyMap(n={self.nvars}, cap={self.cap}, {format_map(self)!r})"


def map_compose(phi: PolyMap, psi: PolyMap) -> PolyMap:
    """The composite ``phi o psi`` (apply psi first)."""
    if phi.nvars != psi.nvars:
        raise PolyError(f"cannot compose maps on {phi.nvars} and {psi.nvars} variables")
    return PolyMap([poly_compose(c, psi) for c in phi.components])


def _apply_matrix(rows, vec: Sequence[TruncPoly]) -> list[TruncPoly]:
    out = []
    for row in rows:
        acc = TruncPoly.zero(vec[0].nvars, vec[0].cap)
        for a, v in zip(row, vec):
            if a:
                acc = acc + v.scale(a)
        out.append(acc)
    return out


def map_invert(phi: PolyMap) -> PolyMap:
    """Jet reversion: psi with phi o psi = id up to cap.

    Writes phi = A x + h and iterates psi = A^{-1}(y - h(psi)); each pass fixes
    one more homogeneous degree, so pass k only needs precision k.
    """
    n, cap = phi.nvars, phi.cap
    A = phi.linear_matrix()
    if A.det() == 0:
        raise SingularLinearPart("cannot invert a map with singular linear part")
    Ainv = A.inv().tolist()
    ys = [TruncPoly.var(n, cap, i) for i in range(n)]
    psi = _apply_matrix(Ainv, ys)
    nonlinear = [c.graded(2, cap) for c in phi.components]
    if all(c.is_zero() for c in nonlinear):
        return PolyMap(psi)
    for k in range(2, cap + 1):
        psi_k = [c.with_cap(k) for c in psi]
        h_of_psi = [poly_compose(c.with_cap(k), psi_k).with_cap(cap) for c in nonlinear]
        psi = _apply_matrix(Ainv, [y - h for y, h in zip(ys, h_of_psi)])
    return PolyMap(psi)


def monomials(nvars: int, degree: int) -> Iterator[tuple]:
    """Exponent tuples of the given total degree, graded-lex descending."""
    if nvars == 1:
        yield (degree,)
        return
    for first in range(degree, -1, -1):
        for rest in monomials(nvars - 1, degree - first):
            yield (first,) + rest


def monomial(nvars: int, cap: int, exps: Iterable[int], coeff=1) -> TruncPoly:
    return TruncPoly.from_terms(nvars, cap, {tuple(exps): coeff})
