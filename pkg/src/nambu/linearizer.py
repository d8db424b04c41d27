"""Formal linearization of Nambu structures with nondegenerate Type 1 linear part.

Outline of one step on a degree window ``(d0, d1]`` (all lower nonlinear
terms already removed):

1. contract ``Pi`` with the constant forms ``alpha_ij`` to get vector fields
   ``X_ij`` whose linear parts span a copy of ``so(Q)``;
2. correct the ``X_ij`` inside the algebra of symmetries of the linear part so
   that their brackets close (a 2-cocycle solve);
3. conjugate the corrected fields to their linear parts (a 1-cocycle solve),
   which makes the window part of ``Pi`` invariant;
4. remove the invariant remainder by a radial scaling ``x_i -> x_i (1 + f)``.

Cohomology equations are solved with the Cartan homotopy ``h`` and the
inverse of the Casimir operator on the relevant cochain module.  The inverse is
taken on a Krylov space: for a semisimple action the Casimir is diagonalizable,
so the minimal polynomial of a vector has at most a simple root at 0 and both
the invariant projection and a preimage are polynomials in the Casimir.  Every
solve is followed by an exact check of the equation it was meant to solve.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Mapping, Sequence

import flint

from . import exact
from .nambu_core import (
    ClassificationError,
    Type1NormalForm,
    classify_linear,
    is_nambu,
    quadratic_form,
    type1_normal_form,
)
from .polyring import PolyMap, TruncPoly, _ctx, _zero, map_compose, monomials, rational
from .tensorcalc import (
    DiffForm,
    Multivector,
    contract,
    interior,
    lie_derivative,
    pushforward,
    restrict,
    schouten,
    wedge,
)

__all__ = [
    "LinearizationError",
    "CocycleError",
    "SolveError",
    "PreconditionError",
    "UnsupportedAction",
    "SoActionBasis",
    "GradedComponent",
    "StepRecord",
    "LinearizationTrace",
    "LinearizerConfig",
    "build_contracted_fields",
    "constrained_component",
    "levi_correction",
    "linearize_action",
    "kill_invariant_part",
    "linearize",
    "windows",
    "so_average",
    "slice_lambda",
    "slice_theta",
]


class LinearizationError(ArithmeticError):
    """Base class; carries the degree and a short description of the failure."""

    def __init__(self, message: str, degree: int | None = None, component=None):
        self.degree = degree
        self.component = component
        where = f" at degree {degree}" if degree is not None else ""
        extra = f" (component {component})" if component is not None else ""
        super().__init__(f"{message}{where}{extra}")


class CocycleError(LinearizationError):
    pass


class SolveError(LinearizationError):
    pass


class PreconditionError(LinearizationError):
    pass


class UnsupportedAction(ValueError):
    pass


# ---------------------------------------------------------------------------
# homogeneous vector fields as lists of flint polynomials

Poly = flint.fmpq_mpoly
HVF = list  # n homogeneous fmpq_mpoly of equal degree


def _hvf_zero(n: int) -> HVF:
    return [_zero(n)] * n


def _add(a: Sequence, b: Sequence) -> list:
    return [x + y for x, y in zip(a, b)]


def _sub(a: Sequence, b: Sequence) -> list:
    return [x - y for x, y in zip(a, b)]


def _scale(a: Sequence, c) -> list:
    return [x * c for x in a]


def _is_zero(a: Sequence) -> bool:
    return all(x.is_zero() for x in a)


def _axpy(acc: list, c, a: Sequence) -> list:
    """acc + c * a."""
    if not c:
        return acc
    return [x + y * c for x, y in zip(acc, a)]


def hvf_of(X: Multivector, d: int) -> HVF:
    """Degree-d part of a vector field."""
    n = X.nvars
    if d > X.cap:
        return _hvf_zero(n)
    return [X.component((j,)).parts()[d] for j in range(n)]


def mv_of(parts_by_degree: Mapping[int, HVF], n: int, cap: int) -> Multivector:
    comps = {}
    for j in range(n):
        parts = [_zero(n)] * (cap + 1)
        for d, v in parts_by_degree.items():
            if d <= cap:
                parts[d] = parts[d] + v[j]
        f = TruncPoly._wrap(n, cap, parts)
        if f:
            comps[(j,)] = f
    return Multivector._raw(n, cap, 1, comps)


def _vf_bracket(X: HVF, Y: HVF) -> HVF:
    n = len(X)
    out = []
    for j in range(n):
        acc = _zero(n)
        for i in range(n):
            if not X[i].is_zero():
                dy = Y[j].derivative(i)
                if not dy.is_zero():
                    acc = acc + X[i] * dy
            if not Y[i].is_zero():
                dx = X[j].derivative(i)
                if not dx.is_zero():
                    acc = acc - Y[i] * dx
        out.append(acc)
    return out


# ---------------------------------------------------------------------------
# Krylov machinery


def _krylov(u: list, op: Callable[[list], list], limit: int = 400):
    """Krylov vectors v_i = op^i u and the monic minimal polynomial of u."""
    basis = []  # (slot, monomial, reduced vector, combination over v_i)
    vs = []
    v = u
    for idx in range(limit):
        vs.append(v)
        r = list(v)
        combo = {idx: flint.fmpq(1)}
        for slot, mon, b, bc in basis:
            c = r[slot][mon]
            if c:
                r = [x - y * c for x, y in zip(r, b)]
                for i, w in bc.items():
                    combo[i] = combo.get(i, 0) - c * w
        slot = next((s for s, p in enumerate(r) if not p.is_zero()), None)
        if slot is None:
            return vs, [combo.get(i, flint.fmpq(0)) for i in range(idx + 1)]
        mon = r[slot].monomial(0)
        lead = r[slot][mon]
        inv = 1 / lead
        basis.append((slot, mon, [x * inv for x in r], {i: w * inv for i, w in combo.items()}))
        v = op(v)
    raise LinearizationError(f"Krylov iteration did not terminate within {limit} steps")


def _lincomb(coeffs: Sequence, vecs: Sequence[list]) -> list:
    acc = [_zero_like(p) for p in vecs[0]]
    for c, v in zip(coeffs, vecs):
        acc = _axpy(acc, c, v)
    return acc


def _zero_like(p: Poly) -> Poly:
    return p - p


def casimir_split(u: list, op: Callable[[list], list]) -> tuple[list, list]:
    """Write u = u0 + op(w) with op(u0) = 0, for a diagonalizable ``op``."""
    if _is_zero(u):
        return list(u), list(u)
    vs, m = _krylov(u, op)
    L = len(m) - 1
    if m[0] != 0:
        w = _lincomb([-m[i] / m[0] for i in range(1, L + 1)], vs[:L])
        return [_zero_like(p) for p in u], w
    if L < 1 or m[1] == 0:
        raise LinearizationError("Casimir operator is not semisimple on this vector")
    m1 = m[1]
    u0 = _lincomb([m[i + 1] / m1 for i in range(L)], vs[:L])
    if L >= 2:
        w = _lincomb([-m[i + 1] / m1 for i in range(1, L)], vs[: L - 1])
    else:
        w = [_zero_like(p) for p in u]
    return u0, w


# ---------------------------------------------------------------------------
# representation of a Lie algebra of linear vector fields on homogeneous fields


def _linear_matrix(X: Multivector) -> list[list]:
    """A with X = sum_j (A x)_j d_j for the linear part of X."""
    n = X.nvars
    return [list(X.component((j,)).linear_coefficients()) for j in range(n)]


def _matmul(A, B):
    n, m, p = len(A), len(B), len(B[0])
    return [[sum((A[i][k] * B[k][j] for k in range(m) if A[i][k] and B[k][j]), flint.fmpq(0)) for j in range(p)] for i in range(n)]


class LieAction:
    """A Lie algebra g of linear vector fields acting on homogeneous fields by brackets.

    Cochains are dicts from strictly increasing tuples of basis indices to
    homogeneous vector fields; the action ``e.Y = [e, Y]``.
    """

    def __init__(self, mats: Sequence[Sequence[Sequence]], n: int):
        self.n = n
        self.mats = [[[rational(v) for v in row] for row in A] for A in mats]
        self.dim = len(self.mats)
        gens = _ctx(n).gens()
        self.lin = []
        self.active = []
        for A in self.mats:
            comps = [sum((gens[i] * A[j][i] for i in range(n) if A[j][i]), _zero(n)) for j in range(n)]
            self.lin.append(comps)
            self.active.append([j for j in range(n) if not comps[j].is_zero()])
        self.ad = self._structure_constants()
        G = [[sum((_matmul(A, B)[i][i] for i in range(n)), flint.fmpq(0)) for B in self.mats] for A in self.mats]
        Gm = exact.matrix(G)
        if Gm.det() == 0:
            raise LinearizationError("trace form of the symmetry algebra is degenerate")
        self.G = G
        self.Ginv = Gm.inv().tolist()
        self.gpairs = [(a, b, self.Ginv[a][b]) for a in range(self.dim) for b in range(self.dim) if self.Ginv[a][b]]

    def _structure_constants(self):
        n, dim = self.n, self.dim
        cols = [[A[i][j] for i in range(n) for j in range(n)] for A in self.mats]
        M = exact.matrix([[cols[u][r] for u in range(dim)] for r in range(n * n)], dim)
        if exact.rank(M) != dim:
            raise LinearizationError("linear parts of the symmetry fields are linearly dependent")
        ad = [[{} for _ in range(dim)] for _ in range(dim)]
        for a in range(dim):
            for b in range(dim):
                A, B = self.mats[a], self.mats[b]
                BA, AB = _matmul(B, A), _matmul(A, B)
                target = [BA[i][j] - AB[i][j] for i in range(n) for j in range(n)]
                try:
                    sol = exact.solve(M, target)
                except exact.InconsistentSystem:
                    raise LinearizationError("linear parts of the symmetry fields do not close under brackets")
                ad[a][b] = {u: c for u, c in enumerate(sol) if c}
        return ad

    def structure_constants(self) -> dict:
        return {(a, b): dict(self.ad[a][b]) for a in range(self.dim) for b in range(self.dim) if self.ad[a][b]}

    # -- module action --------------------------------------------------------
    def act(self, a: int, Y: HVF) -> HVF:
        L, A = self.lin[a], self.mats[a]
        act = self.active[a]
        n = self.n
        out = []
        for j in range(n):
            acc = _zero(n)
            yj = Y[j]
            if not yj.is_zero():
                for i in act:
                    acc = acc + L[i] * yj.derivative(i)
            row = A[j]
            for i in range(n):
                if row[i] and not Y[i].is_zero():
                    acc = acc - Y[i] * row[i]
            out.append(acc)
        return out

    def casimir0(self, Y: HVF) -> HVF:
        acc = _hvf_zero(self.n)
        cache = {}
        for a, b, g in self.gpairs:
            if b not in cache:
                cache[b] = self.act(b, Y)
            acc = _axpy(acc, g, self.act(a, cache[b]))
        return acc

    # -- cochains -------------------------------------------------------------
    def keys(self, p: int) -> list[tuple]:
        return list(combinations(range(self.dim), p))

    def zero_cochain(self, p: int) -> dict:
        return {k: _hvf_zero(self.n) for k in self.keys(p)}

    def get(self, c: dict, key: tuple) -> tuple[int, HVF | None]:
        s = 1
        k = list(key)
        if len(set(k)) != len(k):
            return 0, None
        # bubble sort to count transpositions
        for i in range(len(k)):
            for j in range(len(k) - 1 - i):
                if k[j] > k[j + 1]:
                    k[j], k[j + 1] = k[j + 1], k[j]
                    s = -s
        return s, c[tuple(k)]

    def theta(self, a: int, c: dict) -> dict:
        out = {}
        for key, val in c.items():
            acc = self.act(a, val)
            for i, b in enumerate(key):
                for u, coef in self.ad[a][b].items():
                    nk = key[:i] + (u,) + key[i + 1 :]
                    s, v = self.get(c, nk)
                    if s:
                        acc = _axpy(acc, -coef * s, v)
            out[key] = acc
        return out

    def casimir(self, c: dict) -> dict:
        acc = {k: _hvf_zero(self.n) for k in c}
        cache = {}
        for a, b, g in self.gpairs:
            if b not in cache:
                cache[b] = self.theta(b, c)
            t = self.theta(a, cache[b])
            acc = {k: _axpy(acc[k], g, t[k]) for k in acc}
        return acc

    def d0(self, Y: HVF) -> dict:
        return {(a,): self.act(a, Y) for a in range(self.dim)}

    def d1(self, Z: dict) -> dict:
        out = {}
        for a, b in self.keys(2):
            acc = _sub(self.act(a, Z[(b,)]), self.act(b, Z[(a,)]))
            for u, coef in self.ad[a][b].items():
                acc = _axpy(acc, -coef, Z[(u,)])
            out[(a, b)] = acc
        return out

    def d2(self, B: dict) -> dict:
        out = {}
        for x, y, z in self.keys(3):
            acc = self.act(x, B[(y, z)])
            acc = _sub(acc, self.act(y, B[(x, z)]))
            acc = _add(acc, self.act(z, B[(x, y)]))
            for (p, r, other, sgn) in ((x, y, z, -1), (x, z, y, 1), (y, z, x, -1)):
                for u, coef in self.ad[p][r].items():
                    s, v = self.get(B, (u, other))
                    if s:
                        acc = _axpy(acc, sgn * s * coef, v)
            out[(x, y, z)] = acc
        return out

    def h1(self, Z: dict) -> HVF:
        """Cartan homotopy on 1-cochains: sum_a e^a . Z(e_a)."""
        acc = _hvf_zero(self.n)
        for a, b, g in self.gpairs:
            acc = _axpy(acc, g, self.act(b, Z[(a,)]))
        return acc

    def h2(self, B: dict) -> dict:
        """Cartan homotopy on 2-cochains: y -> sum_a (theta_{e^a} B)(e_a, y)."""
        out = self.zero_cochain(1)
        cache = {}
        for a, b, g in self.gpairs:
            if b not in cache:
                cache[b] = self.theta(b, B)
            tb = cache[b]
            for y in range(self.dim):
                s, v = self.get(tb, (a, y))
                if s:
                    out[(y,)] = _axpy(out[(y,)], g * s, v)
        return out

    # -- flattening for Krylov -------------------------------------------------
    def flatten(self, c: dict) -> list:
        return [p for k in sorted(c) for p in c[k]]

    def unflatten(self, flat: list, p: int) -> dict:
        n = self.n
        return {k: list(flat[i * n : (i + 1) * n]) for i, k in enumerate(self.keys(p))}

    def ad_casimir_inverse(self) -> list[list]:
        dim = self.dim
        ad_m = [[[self.ad[a][b].get(u, flint.fmpq(0)) for b in range(dim)] for u in range(dim)] for a in range(dim)]
        C = [[flint.fmpq(0)] * dim for _ in range(dim)]
        for a, b, g in self.gpairs:
            P = _matmul(ad_m[a], ad_m[b])
            for i in range(dim):
                for j in range(dim):
                    C[i][j] += g * P[i][j]
        return exact.matrix(C).inv().tolist()

    # -- solvers ---------------------------------------------------------------
    def solve_coboundary1(self, Z: dict, degree: int) -> HVF:
        """Y with d0(Y) = Z for a 1-cocycle Z."""
        u = self.h1(Z)
        _, Y = casimir_split(u, self.casimir0)
        if not all(_is_zero(_sub(v, Z[k])) for k, v in self.d0(Y).items()):
            raise SolveError("1-cocycle is not a coboundary of the computed field", degree)
        return Y

    def solve_coboundary2(self, B: dict, degree: int) -> dict:
        """1-cochain Y with d1(Y) = B for a 2-cocycle B."""
        u = self.h2(B)
        flat = self.flatten(u)
        _, w = casimir_split(flat, lambda v: self.flatten(self.casimir(self.unflatten(v, 1))))
        Y = self.unflatten(w, 1)
        c0 = {k: _sub(B[k], v) for k, v in self.d1(Y).items()}
        if not all(_is_zero(v) for v in c0.values()):
            # invariant cocycle: factor it through the bracket
            Cinv = self.ad_casimir_inverse()
            for u_idx in range(self.dim):
                wv = [Cinv[i][u_idx] for i in range(self.dim)]
                acc = _hvf_zero(self.n)
                for a, b, g in self.gpairs:
                    # [e_b, w] as a vector in g
                    br = {}
                    for v_idx, wc in enumerate(wv):
                        if wc:
                            for t, coef in self.ad[b][v_idx].items():
                                br[t] = br.get(t, 0) + wc * coef
                    for t, coef in br.items():
                        s, val = self.get(c0, (a, t))
                        if s and coef:
                            acc = _axpy(acc, g * coef * s, val)
                Y[(u_idx,)] = _add(Y[(u_idx,)], acc)
        residual = {k: _sub(B[k], v) for k, v in self.d1(Y).items()}
        bad = next((k for k, v in residual.items() if not _is_zero(v)), None)
        if bad is not None:
            raise SolveError("2-cocycle is not a coboundary of the computed cochain", degree, bad)
        return Y


# ---------------------------------------------------------------------------
# public records


@dataclass(frozen=True)
class SoActionBasis:
    """Linear fields ``X_ab = x_a d_b / c_b - x_b d_a / c_a`` preserving ``Q = 1/2 sum c_j x_j^2``.

    With ``c_j = +-1`` these are ``eps_b x_a d_b - eps_a x_b d_a`` and the
    structure constants are integers.
    """

    q: int
    n: int
    weights: tuple
    pairs: tuple = field(init=False)

    def __post_init__(self):
        if len(self.weights) != self.q + 1:
            raise ValueError("need q+1 weights")
        if any(rational(c) == 0 for c in self.weights):
            raise ValueError("weights must be nonzero")
        object.__setattr__(self, "pairs", tuple(combinations(range(self.q + 1), 2)))

    @property
    def signs(self) -> tuple:
        return tuple(1 if rational(c) > 0 else -1 for c in self.weights)

    def field(self, a: int, b: int, cap: int = 1) -> Multivector:
        n = self.n
        ca, cb = rational(self.weights[a]), rational(self.weights[b])
        xa, xb = TruncPoly.var(n, cap, a), TruncPoly.var(n, cap, b)
        return Multivector(n, cap, 1, {(b,): xa.scale(1 / cb), (a,): xb.scale(-1 / ca)})

    def fields(self, cap: int = 1) -> list[Multivector]:
        return [self.field(a, b, cap) for a, b in self.pairs]

    def quadratic(self, cap: int) -> TruncPoly:
        return quadratic_form(self.n, cap, self.weights)

    def action(self) -> LieAction:
        return LieAction([_linear_matrix(X) for X in self.fields()], self.n)

    def structure_constants(self) -> dict:
        """{(ab, cd): {uv: coefficient}} with [X_ab, X_cd] = sum c X_uv."""
        act = self.action()
        return {
            (self.pairs[a], self.pairs[b]): {self.pairs[u]: c for u, c in d.items()}
            for (a, b), d in act.structure_constants().items()
        }

    @classmethod
    def from_normal_form(cls, nf: Type1NormalForm) -> "SoActionBasis":
        if not nf.nondegenerate:
            raise PreconditionError("symmetry algebra needs a nondegenerate Type 1 normal form")
        return cls(nf.q, nf.n, tuple(nf.weights))


@dataclass(frozen=True)
class GradedComponent:
    degree: int
    basis: tuple  # homogeneous vector fields (Multivector of degree 1)

    @property
    def dim(self) -> int:
        return len(self.basis)


@dataclass(frozen=True)
class StepRecord:
    index: int
    window: tuple  # (d0, d1): degrees d0 < d <= d1
    terms_before: int
    terms_after: int
    step_map: PolyMap
    checks: tuple  # names of the exact identities asserted during the step


@dataclass
class LinearizationTrace:
    normal_form: Type1NormalForm | None
    linear_map: PolyMap | None
    steps: list = field(default_factory=list)
    final_map: PolyMap | None = None
    linear_through: int = 1

    def to_json(self) -> list[dict]:
        from .textio import format_map

        return [
            {
                "step": s.index,
                "window": list(s.window),
                "terms_before": s.terms_before,
                "terms_after": s.terms_after,
                "map": format_map(s.step_map, sep="; "),
                "checks": list(s.checks),
            }
            for s in self.steps
        ]


@dataclass(frozen=True)
class LinearizerConfig:
    degree: int = 8
    schedule: str = "doubling"  # or "stepwise"
    check_nambu: bool = True
    check_constraints: bool = True

    def __post_init__(self):
        if self.schedule not in ("doubling", "stepwise"):
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if self.degree < 1:
            raise ValueError("target degree must be at least 1")


# ---------------------------------------------------------------------------
# building blocks


def alpha_form(i: int, j: int, q: int, n: int, cap: int) -> DiffForm:
    """``i_{d_i ^ d_j} (dx_1 ^ ... ^ dx_{q+1})``."""
    vol = DiffForm.basis(n, cap, range(q + 1))
    return interior(Multivector.basis(n, cap, (i, j)), vol)


def build_contracted_fields(P: Multivector, q: int | None = None) -> dict:
    """``X_ij = alpha_ij ⌟ P`` for 0 <= i < j <= q (0-based)."""
    q = P.degree if q is None else q
    if q != P.degree:
        raise ValueError("q must equal the tensor degree")
    n, cap = P.nvars, P.cap
    if q + 1 > n:
        raise ValueError("need q + 1 <= n")
    return {(i, j): contract(alpha_form(i, j, q, n, cap), P) for i, j in combinations(range(q + 1), 2)}


def _flatten_tensor(T) -> dict:
    out = {}
    for idx, f in T.comps.items():
        for e, c in f.terms():
            out[(idx, e)] = c
    return out


def constrained_component(P: Multivector, d: int) -> GradedComponent:
    """Degree-d fields X with ``[X, P1] = 0`` and ``X ^ P1 = 0`` for the linear part P1.

    These are the leading-order conditions for preserving P and being tangent
    to its leaves.  Dense kernel computation: meant for small n and d.
    """
    n, cap = P.nvars, P.cap
    if d < 2:
        raise ValueError("constrained components start at degree 2")
    if d > cap:
        raise PreconditionError("degree exceeds the truncation", d)
    work_cap = d + 1
    P1 = P.linear_part().with_cap(work_cap)
    candidates = []
    for j in range(n):
        for e in monomials(n, d):
            candidates.append(Multivector(n, work_cap, 1, {(j,): TruncPoly.from_terms(n, work_cap, {e: 1})}))
    cols = []
    for X in candidates:
        col = {("b",) + k: v for k, v in _flatten_tensor(schouten(X, P1)).items()}
        col.update({("w",) + k: v for k, v in _flatten_tensor(wedge(X, P1)).items()})
        cols.append(col)
    keys = sorted(set().union(*cols), key=repr) if cols else []
    if keys:
        M = exact.matrix([[c.get(k, 0) for c in cols] for k in keys], len(cols))
        null = exact.nullspace(M)
    else:
        null = [[int(i == j) for i in range(len(cols))] for j in range(len(cols))]
    basis = []
    for v in null:
        acc = Multivector.zero(n, cap, 1)
        for coef, X in zip(v, candidates):
            if coef:
                acc = acc + X.with_cap(cap) * coef
        basis.append(acc)
    return GradedComponent(d, tuple(basis))


def _degrees(window: tuple) -> range:
    d0, d1 = window
    if d0 < 1 or d1 <= d0:
        raise ValueError(f"bad window {window}")
    return range(d0 + 1, d1 + 1)


def _action_from_fields(X: Mapping) -> tuple[list, LieAction]:
    keys = sorted(X)
    first = X[keys[0]]
    return keys, LieAction([_linear_matrix(X[k]) for k in keys], first.nvars)


def _in_symmetry_algebra(Y: HVF, P1: Multivector, d: int) -> bool:
    n = P1.nvars
    Ym = mv_of({d: Y}, n, d + 1)
    Pl = P1.with_cap(d + 1)
    return schouten(Ym, Pl).is_zero() and wedge(Ym, Pl).is_zero()


def levi_correction(X: Mapping, P: Multivector, window: tuple, checks: list | None = None) -> dict:
    """Correct the fields so that their brackets close through the window.

    For each degree d in the window the defect ``B(a, b) = [X_a, X_b] - sum c X_u``
    is checked to be a 2-cocycle and written as ``dY`` with Y valued in the
    symmetries of the linear part; ``X - Y`` is returned.
    """
    keys, act = _action_from_fields(X)
    n, cap = P.nvars, P.cap
    if window[1] > cap:
        raise PreconditionError("window exceeds the truncation", window[1])
    P1 = P.linear_part()
    parts = {k: {d: hvf_of(X[k], d) for d in range(1, window[1] + 1)} for k in keys}
    for d in _degrees(window):
        B = {}
        for a, b in act.keys(2):
            acc = _hvf_zero(n)
            for d1 in range(1, d + 1):
                d2 = d + 1 - d1
                if d2 < 1:
                    continue
                Xa, Xb = parts[keys[a]][d1], parts[keys[b]][d2]
                if not _is_zero(Xa) and not _is_zero(Xb):
                    acc = _add(acc, _vf_bracket(Xa, Xb))
            for u, coef in act.ad[a][b].items():
                acc = _axpy(acc, -coef, parts[keys[u]][d])
            B[(a, b)] = acc
        if all(_is_zero(v) for v in B.values()):
            continue
        dB = act.d2(B)
        bad = next((k for k, v in dB.items() if not _is_zero(v)), None)
        if bad is not None:
            raise CocycleError("bracket defect fails the 2-cocycle identity", d, bad)
        Y = act.solve_coboundary2(B, d)
        for a in range(act.dim):
            if not _in_symmetry_algebra(Y[(a,)], P1, d):
                raise SolveError("Levi correction left the symmetry algebra of the linear part", d, keys[a])
            parts[keys[a]][d] = _sub(parts[keys[a]][d], Y[(a,)])
        if checks is not None:
            checks.append(f"cocycle2@{d}")
    # bracket relations through the window
    for d in range(2, window[1] + 1):
        for a, b in act.keys(2):
            acc = _hvf_zero(n)
            for d1 in range(1, d + 1):
                acc = _add(acc, _vf_bracket(parts[keys[a]][d1], parts[keys[b]][d + 1 - d1]))
            for u, coef in act.ad[a][b].items():
                acc = _axpy(acc, -coef, parts[keys[u]][d])
            if not _is_zero(acc):
                raise SolveError("bracket residual does not vanish after the Levi correction", d, (keys[a], keys[b]))
    if checks is not None:
        checks.append(f"brackets@{window[1]}")
    out = {}
    for k in keys:
        upper = X[k].graded(window[1] + 1, cap)
        out[k] = mv_of(parts[k], n, cap) + upper
    return out


def linearize_action(X: Mapping, window: tuple, checks: list | None = None) -> PolyMap:
    """Near-identity map conjugating the fields to their linear parts through the window."""
    keys, act = _action_from_fields(X)
    first = X[keys[0]]
    n, cap = first.nvars, first.cap
    if window[1] > cap:
        raise PreconditionError("window exceeds the truncation", window[1])
    comps = [TruncPoly.var(n, cap, j) for j in range(n)]
    for d in _degrees(window):
        Z = {(a,): hvf_of(X[keys[a]], d) for a in range(act.dim)}
        if all(_is_zero(v) for v in Z.values()):
            continue
        dZ = act.d1(Z)
        bad = next((k for k, v in dZ.items() if not _is_zero(v)), None)
        if bad is not None:
            raise CocycleError("nonlinear parts fail the 1-cocycle identity", d, bad)
        Y = act.solve_coboundary1(Z, d)
        comps = [c - TruncPoly._wrap(n, cap, [_zero(n)] * d + [Y[j]] + [_zero(n)] * (cap - d)) for j, c in enumerate(comps)]
        if checks is not None:
            checks.append(f"cocycle1@{d}")
    psi = PolyMap(comps)
    if checks is not None and not psi.is_linear():
        inv = psi.inverse()
        for k in keys:
            moved = pushforward(psi, X[k].graded(0, window[1]).with_cap(window[1]), inv.with_cap(window[1]))
            if moved.graded(2, window[1]):
                raise SolveError("conjugated field is not linear through the window", window[1], k)
        checks.append(f"action-linear@{window[1]}")
    return psi


def _invariant_functions(nf_weights, q: int, n: int, degree: int, cap: int) -> list[TruncPoly]:
    """Monomials Q^a x''^beta of total degree ``degree``."""
    out = []
    k = q + 1
    Q = quadratic_form(n, cap, nf_weights)
    for a in range(degree // 2 + 1):
        rest = degree - 2 * a
        Qa = Q**a if a else TruncPoly.constant(n, cap, 1)
        if n - k == 0:
            if rest == 0:
                out.append(Qa)
            continue
        for beta in monomials(n - k, rest):
            e = (0,) * k + beta
            out.append(Qa * TruncPoly.from_terms(n, cap, {e: 1}))
    return out


def kill_invariant_part(P: Multivector, window: tuple, action: SoActionBasis, checks: list | None = None) -> PolyMap:
    """Radial scaling ``x_i -> x_i (1 + f)`` (i <= q+1) removing the window part of P."""
    n, cap = P.nvars, P.cap
    q = action.q
    k = q + 1
    if window[1] > cap:
        raise PreconditionError("window exceeds the truncation", window[1])
    nf = type1_normal_form(q, n, action.weights, (), cap)
    if P.linear_part() != nf:
        raise PreconditionError("linear part is not the expected normal form")
    fields = action.fields(cap)
    f_total = TruncPoly.zero(n, cap)
    for d in _degrees(window):
        Nd = P.homogeneous(d)
        if Nd.is_zero():
            continue
        for X in fields:
            res = schouten(X, Nd).homogeneous(d)
            if res:
                raise PreconditionError("window part of the tensor is not invariant", d)
        work = d + 1
        nf_w = nf.with_cap(work)
        E = Multivector(n, work, 1, {(i,): TruncPoly.var(n, work, i) for i in range(k)})
        basis = _invariant_functions(action.weights, q, n, d - 1, work)
        cols = [_flatten_tensor(schouten(E * f, nf_w).homogeneous(d)) for f in basis]
        target = _flatten_tensor(Nd.with_cap(work))
        keys = sorted(set(target).union(*cols))
        M = exact.matrix([[c.get(key, 0) for c in cols] for key in keys], len(cols))
        try:
            sol = exact.solve(M, [target.get(key, 0) for key in keys])
        except exact.InconsistentSystem:
            raise SolveError("invariant part is not produced by a radial scaling", d)
        for coef, f in zip(sol, basis):
            if coef:
                f_total = f_total + f.with_cap(cap).scale(coef)
    comps = [TruncPoly.var(n, cap, i) * (TruncPoly.constant(n, cap, 1) + f_total) if i < k else TruncPoly.var(n, cap, i) for i in range(n)]
    if checks is not None:
        checks.append(f"invariant@{window[1]}")
    return PolyMap(comps)


def windows(D: int, schedule: str) -> list[tuple]:
    if schedule == "doubling":
        out, d0 = [], 1
        while d0 < D:
            d1 = min(2 * d0, D)
            out.append((d0, d1))
            d0 = d1
        return out
    if schedule == "stepwise":
        return [(d, d + 1) for d in range(1, D)]
    raise ValueError(f"unknown schedule {schedule!r}")


def _terms_in(P: Multivector, lo: int, hi: int) -> int:
    return P.graded(lo, hi).nterms()


def linearize(P: Multivector, D: int | None = None, schedule: str = "doubling", config: LinearizerConfig | None = None):
    """Return (Phi, trace) with pushforward(Phi, P) linear through degree D."""
    if config is None:
        config = LinearizerConfig(degree=D if D is not None else P.cap, schedule=schedule)
    D = config.degree
    _n, q, cap = P.nvars, P.degree, P.cap
    if cap < D:
        raise PreconditionError(f"cap={cap} is below the target degree {D}")
    if P.graded(0, 0):
        raise PreconditionError("the tensor does not vanish at the origin")
    if config.check_nambu and cap >= 2:
        report = is_nambu(P)
        if not report:
            raise PreconditionError(f"input is not a Nambu tensor: {report.witness.describe()}")
    P = P.with_cap(D) if cap > D else P
    original = P
    try:
        nf, A = classify_linear(P.linear_part())
    except ClassificationError as exc:
        raise PreconditionError(f"linear part could not be classified: {exc}")
    if not isinstance(nf, Type1NormalForm) or not nf.nondegenerate:
        raise PreconditionError("linear part is not nondegenerate Type 1")
    action = SoActionBasis.from_normal_form(nf)
    Phi = A.with_cap(D)
    P = pushforward(Phi, P)
    trace = LinearizationTrace(nf, Phi)
    for idx, window in enumerate(windows(D, config.schedule)):
        d0, d1 = window
        before = _terms_in(P, d0 + 1, d1)
        if before == 0:
            continue
        if P.graded(2, d0):
            raise LinearizationError("lower degrees reappeared", d0)
        checks: list[str] = []
        X = build_contracted_fields(P.graded(0, d1), q)
        Xhat = levi_correction(X, P, window, checks)
        psi = linearize_action(Xhat, window, checks)
        P = pushforward(psi, P)
        kill = kill_invariant_part(P, window, action, checks)
        P = pushforward(kill, P)
        after = _terms_in(P, 2, d1)
        if after:
            raise LinearizationError("window not cleared", d1)
        step = map_compose(kill, psi)
        Phi = map_compose(step, Phi)
        trace.steps.append(StepRecord(idx, window, before, after, step, tuple(checks)))
    final = pushforward(Phi, original)
    if final.graded(2, D) or final.linear_part() != nf.tensor(D):
        raise LinearizationError("final verification failed: result is not the linear normal form", D)
    trace.final_map = Phi
    trace.linear_through = D
    return Phi, trace


# ---------------------------------------------------------------------------
# averaging and slicing


def _flatten_value(T) -> tuple[list, Callable]:
    if isinstance(T, TruncPoly):
        n, cap = T.nvars, T.cap
        return list(T.parts()), lambda flat: TruncPoly._wrap(n, cap, flat)
    n, cap, deg = T.nvars, T.cap, T.degree
    keys = list(combinations(range(n), deg))
    flat = []
    for key in keys:
        f = T.comps.get(key)
        flat.extend(f.parts() if f is not None else [_zero(n)] * (cap + 1))

    def rebuild(v):
        comps = {}
        for i, key in enumerate(keys):
            f = TruncPoly._wrap(n, cap, v[i * (cap + 1) : (i + 1) * (cap + 1)])
            if f:
                comps[key] = f
        return type(T)._raw(n, cap, deg, comps)

    return flat, rebuild


def so_average(T, k: int, signs: Sequence[int] | None = None):
    """Exact average of T over the rotations of x_1..x_k.

    Computed as the projection onto the kernel of the Casimir
    ``sum_{a<b} L_{X_ab}^2`` along its image.
    """
    if k < 2:
        raise ValueError("averaging needs k >= 2")
    if signs is not None and any(s < 0 for s in signs):
        raise UnsupportedAction("invariant averaging is only defined for the compact (all plus) action")
    n = T.nvars
    if k > n:
        raise ValueError("more rotated coordinates than variables")
    basis = SoActionBasis(k - 1, n, (1,) * k)
    fields = basis.fields(T.cap)
    flat, rebuild = _flatten_value(T)

    def op(v):
        X = rebuild(v)
        acc = None
        for F in fields:
            t = lie_derivative(F, lie_derivative(F, X))
            acc = t if acc is None else acc + t
        return _flatten_value(acc)[0]

    u0, _ = casimir_split(flat, op)
    return rebuild(u0)


def slice_lambda(P: Multivector, k: int, q: int | None = None) -> Multivector:
    """``(dx_{k+1} ^ ... ^ dx_{q+1}) ⌟ P``; k = q+1 returns P."""
    q = P.degree if q is None else q
    if not 3 <= k <= q + 1:
        raise ValueError(f"slice_lambda needs 3 <= k <= q+1, got k={k}, q={q}")
    if q + 1 > P.nvars:
        raise ValueError("need q + 1 <= n")
    return contract(DiffForm.basis(P.nvars, P.cap, range(k, q + 1)), P)


def slice_theta(P: Multivector, k: int) -> Multivector:
    """``(dx_1 ^ ... ^ dx_{k-1}) ⌟ P`` restricted to ``x_1 = ... = x_{k-1} = 0``."""
    q = P.degree
    if not 2 <= k <= q:
        raise ValueError(f"slice_theta needs 2 <= k <= q, got k={k}, q={q}")
    T = contract(DiffForm.basis(P.nvars, P.cap, range(k - 1)), P)
    return restrict(T, list(range(k - 1, P.nvars)))
