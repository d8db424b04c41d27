"""Antisymmetric tensor fields with truncated polynomial coefficients.

A :class:`Multivector` of degree k is stored as ``{(i_1 < ... < i_k): TruncPoly}``
standing for ``sum f_I d_{i_1} ^ ... ^ d_{i_k}``; a :class:`DiffForm` uses the
same layout for ``sum f_I dx_{i_1} ^ ... ^ dx_{i_k}``.  Indices are 0-based.

Sign conventions (fixed once, everything else is derived from them):

* ``contract(dx_J, d_K ^ d_J) = d_K``: a form eats the *last* slots of a
  multivector, so ``contract(dx_J, d_I) = sign(I\\J, J) d_{I\\J}``.
* ``interior(d_J, dx_J ^ dx_K) = dx_K``: a multivector is inserted into the
  *first* slots of a form, so ``interior(d_J, dx_I) = sign(J, I\\J) dx_{I\\J}``.
* The volume form is ``dx_1 ^ ... ^ dx_n`` and ``dual_form(P) = interior(P, vol)``.

Here ``sign(A, B)`` is the sign of the permutation sorting the concatenation
``A + B``.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import combinations
from typing import Callable, Iterable, Mapping, Sequence

from .polyring import PolyMap, TruncPoly, poly_compose, rational

__all__ = [
    "Multivector",
    "DiffForm",
    "TensorError",
    "vector_field",
    "wedge",
    "contract",
    "interior",
    "dual_form",
    "dual_mv",
    "volume_form",
    "ext_d",
    "schouten",
    "lie_derivative",
    "pushforward",
    "pullback",
    "merge_sign",
]


class TensorError(ValueError):
    pass


@lru_cache(maxsize=None)
def merge_sign(a: tuple, b: tuple) -> int:
    """Sign of the permutation sorting ``a + b``; 0 if they share an index."""
    seq = a + b
    if len(set(seq)) != len(seq):
        return 0
    inversions = sum(1 for i in range(len(seq)) for j in range(i + 1, len(seq)) if seq[i] > seq[j])
    return -1 if inversions % 2 else 1


def _sorted_sign(seq: Sequence[int]) -> tuple[int, tuple]:
    """(sign, sorted tuple) for distinct indices; sign 0 on repeats."""
    seq = tuple(seq)
    return merge_sign(seq, ()), tuple(sorted(seq))


class _Alternating:
    kind = ""
    __slots__ = ("nvars", "cap", "degree", "comps")

    def __init__(self, nvars: int, cap: int, degree: int, comps: Mapping | None = None):
        if not 0 <= degree:
            raise TensorError(f"negative tensor degree {degree}")
        self.nvars = nvars
        self.cap = cap
        self.degree = degree
        clean = {}
        for idx, f in (comps or {}).items():
            idx = tuple(idx)
            if len(idx) != degree or any(not 0 <= i < nvars for i in idx):
                raise TensorError(f"index tuple {tuple(i + 1 for i in idx)} invalid for degree {degree}, n={nvars}")
            if any(idx[k] >= idx[k + 1] for k in range(len(idx) - 1)):
                raise TensorError(f"index tuple {tuple(i + 1 for i in idx)} is not strictly increasing")
            if f.nvars != nvars or f.cap != cap:
                raise TensorError("component shape does not match the tensor")
            if f:
                clean[idx] = f
        self.comps = clean

    @classmethod
    def _raw(cls, nvars, cap, degree, comps):
        obj = object.__new__(cls)
        obj.nvars, obj.cap, obj.degree = nvars, cap, degree
        obj.comps = {k: v for k, v in comps.items() if v}
        return obj

    @classmethod
    def zero(cls, nvars: int, cap: int, degree: int):
        return cls._raw(nvars, cap, degree, {})

    @classmethod
    def basis(cls, nvars: int, cap: int, indices: Sequence[int], coeff=None):
        """The element ``coeff * e_{i_1} ^ ... ^ e_{i_k}`` for any index order."""
        sign, idx = _sorted_sign(indices)
        if coeff is None:
            coeff = TruncPoly.constant(nvars, cap, 1)
        elif not isinstance(coeff, TruncPoly):
            coeff = TruncPoly.constant(nvars, cap, coeff)
        if sign == 0:
            return cls.zero(nvars, cap, len(idx))
        return cls._raw(nvars, cap, len(idx), {idx: coeff.scale(sign)})

    @classmethod
    def function(cls, f: TruncPoly):
        return cls._raw(f.nvars, f.cap, 0, {(): f})

    # -- basic algebra ------------------------------------------------------
    def _like(self, comps, degree=None):
        return type(self)._raw(self.nvars, self.cap, self.degree if degree is None else degree, comps)

    def _check(self, other):
        if type(other) is not type(self):
            raise TensorError(f"kind mismatch: {self.kind} vs {getattr(other, 'kind', type(other).__name__)}")
        if other.nvars != self.nvars or other.cap != self.cap:
            raise TensorError("shape mismatch between tensors")

    def __add__(self, other):
        self._check(other)
        if other.degree != self.degree:
            raise TensorError(f"cannot add degree {self.degree} and degree {other.degree}")
        out = dict(self.comps)
        for k, v in other.comps.items():
            out[k] = out[k] + v if k in out else v
        return self._like(out)

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return self._like({k: -v for k, v in self.comps.items()})

    def __mul__(self, f):
        """Multiply every component by a function or a rational."""
        if isinstance(f, TruncPoly):
            return self._like({k: v * f for k, v in self.comps.items()})
        c = rational(f)
        return self._like({k: v.scale(c) for k, v in self.comps.items()})

    __rmul__ = __mul__

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return (
            self.nvars == other.nvars
            and self.cap == other.cap
            and self.degree == other.degree
            and self.comps == other.comps
        )

    def __hash__(self):
        return hash((self.kind, self.nvars, self.cap, self.degree, tuple(sorted(self.comps.items()))))

    def is_zero(self) -> bool:
        return not self.comps

    def __bool__(self):
        return bool(self.comps)

    def component(self, indices: Sequence[int]) -> TruncPoly:
        sign, idx = _sorted_sign(indices)
        f = self.comps.get(idx)
        if f is None or sign == 0:
            return TruncPoly.zero(self.nvars, self.cap)
        return f.scale(sign)

    def map_coeffs(self, fn: Callable[[TruncPoly], TruncPoly]):
        return self._like({k: fn(v) for k, v in self.comps.items()})

    def homogeneous(self, d: int):
        """Part whose coefficients are homogeneous of polynomial degree d."""
        return self.map_coeffs(lambda f: f.homogeneous(d))

    def graded(self, lo: int, hi: int):
        return self.map_coeffs(lambda f: f.graded(lo, hi))

    def linear_part(self):
        return self.graded(1, 1)

    def with_cap(self, cap: int):
        return type(self)._raw(self.nvars, cap, self.degree, {k: v.with_cap(cap) for k, v in self.comps.items()})

    def coeff_degrees(self) -> set[int]:
        out = set()
        for f in self.comps.values():
            out.update(d for d, p in enumerate(f.parts()) if p)
        return out

    def max_coeff_degree(self) -> int | None:
        degs = self.coeff_degrees()
        return max(degs) if degs else None

    def nterms(self) -> int:
        return sum(f.nterms() for f in self.comps.values())

    def items(self):
        return sorted(self.comps.items())

    def __repr__(self):
        from .textio import format_tensor

        return f"{type(self).__name__}(n={self.nvars}, cap={self.cap}, deg={self.degree}, {format_tensor(self)!r})"


class Multivector(_Alternating):
    """Multivector field ``sum f_I d_I``."""

    kind = "multivector"
    __slots__ = ()


class DiffForm(_Alternating):
    """Differential form ``sum f_I dx_I``."""

    kind = "form"
    __slots__ = ()


def vector_field(components: Sequence[TruncPoly]) -> Multivector:
    n, cap = components[0].nvars, components[0].cap
    return Multivector(n, cap, 1, {(i,): f for i, f in enumerate(components)})


def volume_form(nvars: int, cap: int) -> DiffForm:
    return DiffForm.basis(nvars, cap, range(nvars))


# ---------------------------------------------------------------------------
# products and contractions


def _accumulate(out: dict, idx: tuple, f: TruncPoly):
    if idx in out:
        out[idx] = out[idx] + f
    else:
        out[idx] = f


def wedge(A, B):
    """Exterior product; graded commutative: A^B = (-1)^{ab} B^A."""
    if type(A) is not type(B):
        raise TensorError(f"cannot wedge a {A.kind} with a {B.kind}")
    A._check(B)
    deg = A.degree + B.degree
    if deg > A.nvars:
        return type(A)._raw(A.nvars, A.cap, deg, {})
    out: dict = {}
    for I, f in A.comps.items():
        for J, g in B.comps.items():
            s = merge_sign(I, J)
            if s:
                prod = f * g
                _accumulate(out, tuple(sorted(I + J)), prod if s > 0 else -prod)
    return type(A)._raw(A.nvars, A.cap, deg, out)


def _complement(I: tuple, J: tuple) -> tuple | None:
    sJ = set(J)
    if not sJ.issubset(I):
        return None
    return tuple(i for i in I if i not in sJ)


def contract(eta: DiffForm, A: Multivector) -> Multivector:
    """Form-into-multivector contraction ``eta ⌟ A`` (form eats the last slots)."""
    if not isinstance(eta, DiffForm) or not isinstance(A, Multivector):
        raise TensorError("contract expects (DiffForm, Multivector)")
    if eta.nvars != A.nvars or eta.cap != A.cap:
        raise TensorError("shape mismatch between form and multivector")
    p, k = eta.degree, A.degree
    if p > k:
        raise TensorError(f"cannot contract a {p}-form into a {k}-vector")
    out: dict = {}
    for J, g in eta.comps.items():
        for I, f in A.comps.items():
            rest = _complement(I, J)
            if rest is None:
                continue
            s = merge_sign(rest, J)
            prod = f * g
            _accumulate(out, rest, prod if s > 0 else -prod)
    return Multivector._raw(A.nvars, A.cap, k - p, out)


def interior(A: Multivector, omega: DiffForm) -> DiffForm:
    """Multivector-into-form insertion ``i_A omega`` (first slots)."""
    if not isinstance(A, Multivector) or not isinstance(omega, DiffForm):
        raise TensorError("interior expects (Multivector, DiffForm)")
    if A.nvars != omega.nvars or A.cap != omega.cap:
        raise TensorError("shape mismatch between multivector and form")
    k, p = A.degree, omega.degree
    if k > p:
        raise TensorError(f"cannot insert a {k}-vector into a {p}-form")
    out: dict = {}
    for J, f in A.comps.items():
        for I, g in omega.comps.items():
            rest = _complement(I, J)
            if rest is None:
                continue
            s = merge_sign(J, rest)
            prod = f * g
            _accumulate(out, rest, prod if s > 0 else -prod)
    return DiffForm._raw(A.nvars, A.cap, p - k, out)


def dual_form(P: Multivector) -> DiffForm:
    """``i_P (dx_1 ^ ... ^ dx_n)``: component J equals sign(I, J) P^I, I = complement of J."""
    n = P.nvars
    full = tuple(range(n))
    out = {}
    for I, f in P.comps.items():
        J = tuple(i for i in full if i not in I)
        out[J] = f if merge_sign(I, J) > 0 else -f
    return DiffForm._raw(n, P.cap, n - P.degree, out)


def dual_mv(omega: DiffForm) -> Multivector:
    """Exact inverse of :func:`dual_form`."""
    n = omega.nvars
    full = tuple(range(n))
    out = {}
    for J, g in omega.comps.items():
        I = tuple(i for i in full if i not in J)
        out[I] = g if merge_sign(I, J) > 0 else -g
    return Multivector._raw(n, omega.cap, n - omega.degree, out)


def ext_d(omega: DiffForm) -> DiffForm:
    """Coordinate exterior derivative."""
    if not isinstance(omega, DiffForm):
        raise TensorError("ext_d expects a DiffForm")
    n = omega.nvars
    out: dict = {}
    for J, g in omega.comps.items():
        for i in range(n):
            if i in J:
                continue
            dg = g.partial(i)
            if dg:
                s = merge_sign((i,), J)
                _accumulate(out, tuple(sorted((i,) + J)), dg if s > 0 else -dg)
    return DiffForm._raw(n, omega.cap, omega.degree + 1, out)


def function_differential(f: TruncPoly) -> DiffForm:
    return ext_d(DiffForm.function(f))


# ---------------------------------------------------------------------------
# Schouten bracket


def _right_odd_derivative(A: Multivector, i: int) -> Multivector:
    """Remove d_i from the right end: d_I -> (-1)^{k-1-m} d_{I\\i} where I[m] = i."""
    k = A.degree
    out = {}
    for I, f in A.comps.items():
        if i in I:
            m = I.index(i)
            rest = I[:m] + I[m + 1 :]
            out[rest] = f if (k - 1 - m) % 2 == 0 else -f
    return Multivector._raw(A.nvars, A.cap, k - 1, out)


def _partial(A, i: int):
    return A._like({I: f.partial(i) for I, f in A.comps.items()})


def schouten(A: Multivector, B: Multivector) -> Multivector:
    """Schouten-Nijenhuis bracket.

    ``[A, B] = sum_i (A <- d/dxi_i) ^ d_i B - (-1)^{(a-1)(b-1)} (B <- d/dxi_i) ^ d_i A``
    with right derivatives in the odd variables; on vector fields this is the
    commutator and ``[X, f] = X(f)``.
    """
    if not isinstance(A, Multivector) or not isinstance(B, Multivector):
        raise TensorError("schouten expects two multivectors")
    A._check(B)
    a, b = A.degree, B.degree
    n = A.nvars
    deg = a + b - 1
    if deg < 0 or deg > n:
        return Multivector._raw(n, A.cap, max(deg, 0), {})
    sign = -1 if ((a - 1) * (b - 1)) % 2 else 1
    out: dict = {}

    def add(X: Multivector, Y: Multivector, s: int):
        for I, f in X.comps.items():
            for J, g in Y.comps.items():
                m = merge_sign(I, J)
                if m:
                    prod = f * g
                    _accumulate(out, tuple(sorted(I + J)), prod if m * s > 0 else -prod)

    for i in range(n):
        if a >= 1:
            dA = _right_odd_derivative(A, i)
            if dA:
                add(dA, _partial(B, i), 1)
        if b >= 1:
            dB = _right_odd_derivative(B, i)
            if dB:
                add(dB, _partial(A, i), -sign)
    return Multivector._raw(n, A.cap, deg, out)


def apply_vector_field(X: Multivector, f: TruncPoly) -> TruncPoly:
    """Directional derivative X(f)."""
    acc = TruncPoly.zero(f.nvars, f.cap)
    for (i,), g in X.comps.items():
        df = f.partial(i)
        if df:
            acc = acc + g * df
    return acc


def lie_derivative(X: Multivector, T):
    """L_X T for a multivector (Schouten), a form (Cartan) or a function."""
    if not isinstance(X, Multivector) or X.degree != 1:
        raise TensorError("lie_derivative needs a vector field")
    if isinstance(T, TruncPoly):
        return apply_vector_field(X, T)
    if isinstance(T, Multivector):
        return schouten(X, T)
    if isinstance(T, DiffForm):
        if T.degree == 0:
            return DiffForm.function(apply_vector_field(X, T.component(())))
        out = ext_d(interior(X, T))
        if T.degree < T.nvars:
            out = out + interior(X, ext_d(T))
        return out
    raise TensorError(f"cannot take a Lie derivative of {type(T).__name__}")


# ---------------------------------------------------------------------------
# coordinate changes


def _columns(phi: PolyMap) -> list[Multivector]:
    """Push-forward of each coordinate field: column i of the Jacobian."""
    J = phi.jacobian()
    n = phi.nvars
    return [Multivector._raw(n, phi.cap, 1, {(j,): J[j][i] for j in range(n)}) for i in range(n)]


def _push_components(phi: PolyMap, A: Multivector) -> Multivector:
    cols = _columns(phi)
    cache: dict[tuple, Multivector] = {(): Multivector.function(TruncPoly.constant(phi.nvars, phi.cap, 1))}

    def wedge_of(I: tuple) -> Multivector:
        if I not in cache:
            cache[I] = wedge(wedge_of(I[:-1]), cols[I[-1]])
        return cache[I]

    out = Multivector.zero(A.nvars, A.cap, A.degree)
    for I, f in sorted(A.comps.items()):
        out = out + wedge_of(I) * f
    return out


def pushforward(phi: PolyMap, A, inverse: PolyMap | None = None):
    """Transport A along x -> phi(x) and express it in the target coordinates.

    Multivectors are conjugated by the Jacobian and then composed with the
    inverse jet; functions are composed with the inverse; forms are pulled
    back by the inverse.
    """
    psi = inverse if inverse is not None else phi.inverse()
    if isinstance(A, TruncPoly):
        return poly_compose(A, psi)
    if isinstance(A, DiffForm):
        return pullback(psi, A)
    if not isinstance(A, Multivector):
        raise TensorError(f"cannot push forward {type(A).__name__}")
    if A.nvars != phi.nvars:
        raise TensorError("map and tensor live on different spaces")
    cap = min(A.cap, phi.cap)
    if A.cap != cap:
        A = A.with_cap(cap)
    if phi.cap != cap:
        phi = phi.with_cap(cap)
        psi = psi.with_cap(cap)
    moved = _push_components(phi, A)
    return moved.map_coeffs(lambda f: poly_compose(f, psi))


def pullback(phi: PolyMap, omega: DiffForm) -> DiffForm:
    """``phi^* omega``: compose coefficients with phi, replace dx_j by d(phi_j)."""
    if omega.nvars != phi.nvars:
        raise TensorError("map and form live on different spaces")
    cap = min(omega.cap, phi.cap)
    if omega.cap != cap:
        omega = omega.with_cap(cap)
    if phi.cap != cap:
        phi = phi.with_cap(cap)
    n = phi.nvars
    dphi = [function_differential(c) for c in phi.components]
    cache: dict[tuple, DiffForm] = {(): DiffForm.function(TruncPoly.constant(n, cap, 1))}

    def wedge_of(J: tuple) -> DiffForm:
        if J not in cache:
            cache[J] = wedge(wedge_of(J[:-1]), dphi[J[-1]])
        return cache[J]

    out = DiffForm.zero(n, cap, omega.degree)
    for J, g in sorted(omega.comps.items()):
        out = out + wedge_of(J) * poly_compose(g, phi)
    return out


def constant_multivectors(nvars: int, cap: int, degree: int) -> Iterable[tuple[tuple, Multivector]]:
    for idx in combinations(range(nvars), degree):
        yield idx, Multivector.basis(nvars, cap, idx)


def restrict(T, keep: Sequence[int]):
    """Set coordinates outside ``keep`` to zero and drop basis elements that use them."""
    pos = {v: k for k, v in enumerate(keep)}
    out = {}
    for I, f in T.comps.items():
        if all(i in pos for i in I):
            g = f.restrict(keep)
            if g:
                out[tuple(pos[i] for i in I)] = g
    return type(T)._raw(len(keep), T.cap, T.degree, out)
