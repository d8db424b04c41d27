"""Integrability of Nambu tensors and the classification of linear ones.

Linear Nambu q-vectors come in two families:

* Type 1, dual to ``dx_{q+2} ^ ... ^ dx_n ^ dQ`` with
  ``Q = 1/2 sum_{j<=r} c_j x_j^2 + sum_{j<=s} e_j x_{r+j} x_{q+1+j}``;
* Type 2, ``d_1 ^ ... ^ d_{q-1} ^ V`` with ``V = sum_{i,j>=q} b[i][j] x_i d_j``.

Over the rationals the weights ``c_j`` cannot be normalized to ``+-1`` (no
square roots), so the normal forms here carry rational weights; their signs are
the discrete invariant.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import flint

from . import exact
from .polyring import PolyMap, TruncPoly, rational
from .tensorcalc import (
    DiffForm,
    Multivector,
    dual_form,
    dual_mv,
    ext_d,
    interior,
    pushforward,
    schouten,
    wedge,
)

__all__ = [
    "Type1NormalForm",
    "Type2NormalForm",
    "LinearNormalForm",
    "Witness",
    "IntegrabilityReport",
    "ClassificationError",
    "InsufficientTruncation",
    "is_nambu",
    "classify_linear",
    "signature",
    "singular_locus_check",
    "type1_normal_form",
    "type2_normal_form",
    "quadratic_form",
    "euler_tensor",
]


class ClassificationError(ValueError):
    """The input does not match any linear normal form."""


class InsufficientTruncation(ValueError):
    pass


# ---------------------------------------------------------------------------
# normal form records


@dataclass(frozen=True)
class Type1NormalForm:
    q: int
    n: int
    weights: tuple  # c_1..c_r
    cross_weights: tuple = ()  # e_1..e_s
    variant: str = field(default="type1", init=False)

    @property
    def r(self) -> int:
        return len(self.weights)

    @property
    def s(self) -> int:
        return len(self.cross_weights)

    @property
    def signs(self) -> tuple:
        return tuple(1 if c > 0 else -1 for c in self.weights + self.cross_weights)

    @property
    def signature(self) -> tuple[int, int]:
        pos, _, neg = signature(quadratic_matrix(self))
        return pos, neg

    @property
    def nondegenerate(self) -> bool:
        return self.r == self.q + 1

    @property
    def elliptic(self) -> bool:
        pos, neg = self.signature
        return self.nondegenerate and (pos == 0 or neg == 0)

    @property
    def hyperbolic(self) -> bool:
        return self.nondegenerate and not self.elliptic

    @property
    def excluded_signature(self) -> bool:
        return 2 in self.signature

    def tensor(self, cap: int) -> Multivector:
        return type1_normal_form(self.q, self.n, self.weights, self.cross_weights, cap)

    def invariants(self) -> tuple:
        """Discrete data compared across equivalent inputs."""
        return ("type1", self.r, self.s, tuple(sorted(self.signature)))

    def to_json(self) -> dict:
        from .textio import format_rational

        return {
            "variant": "type1",
            "q": self.q,
            "n": self.n,
            "r": self.r,
            "s": self.s,
            "signs": list(self.signs),
            "weights": [format_rational(c) for c in self.weights],
            "cross_weights": [format_rational(c) for c in self.cross_weights],
            "signature": list(self.signature),
            "nondegenerate": self.nondegenerate,
            "elliptic": self.elliptic,
            "hyperbolic": self.hyperbolic,
            "excluded_signature": self.excluded_signature,
        }


@dataclass(frozen=True)
class Type2NormalForm:
    q: int
    n: int
    b: tuple  # (n-q+1) x (n-q+1), rows/columns indexed by x_q..x_n
    variant: str = field(default="type2", init=False)

    def __post_init__(self):
        m = self.n - self.q + 1
        if len(self.b) != m or any(len(row) != m for row in self.b):
            raise ValueError(f"b must be {m}x{m} for q={self.q}, n={self.n}")

    @property
    def nondegenerate(self) -> bool:
        return exact.matrix(self.b).det() != 0

    def tensor(self, cap: int) -> Multivector:
        return type2_normal_form(self.q, self.n, self.b, cap)

    def invariants(self) -> tuple:
        return ("type2", self.nondegenerate)

    def to_json(self) -> dict:
        from .textio import format_rational

        return {
            "variant": "type2",
            "q": self.q,
            "n": self.n,
            "b": [[format_rational(v) for v in row] for row in self.b],
            "nondegenerate": self.nondegenerate,
        }


LinearNormalForm = Type1NormalForm | Type2NormalForm


# ---------------------------------------------------------------------------
# constructors


def quadratic_form(n: int, cap: int, weights: Sequence, cross_weights: Sequence = (), q: int | None = None) -> TruncPoly:
    """``Q = 1/2 sum c_j x_j^2 + sum e_j x_{r+j} x_{q+1+j}`` (0-based internally)."""
    r = len(weights)
    terms = {}
    for j, c in enumerate(weights):
        e = [0] * n
        e[j] = 2
        terms[tuple(e)] = rational(c) / 2
    if cross_weights:
        if q is None:
            raise ValueError("cross terms need q")
        for j, c in enumerate(cross_weights):
            e = [0] * n
            e[r + j] += 1
            e[q + 1 + j] += 1
            terms[tuple(e)] = rational(c)
    return TruncPoly.from_terms(n, cap, terms)


def quadratic_matrix(nf: Type1NormalForm) -> list[list]:
    """Hessian of Q over all n variables."""
    n = nf.n
    S = [[flint.fmpq(0)] * n for _ in range(n)]
    for j, c in enumerate(nf.weights):
        S[j][j] = rational(c)
    for j, c in enumerate(nf.cross_weights):
        a, b = nf.r + j, nf.q + 1 + j
        S[a][b] = S[b][a] = rational(c)
    return S


def type1_normal_form(q: int, n: int, weights: Sequence, cross_weights: Sequence = (), cap: int = 2) -> Multivector:
    """dual_mv of ``dx_{q+2} ^ ... ^ dx_n ^ dQ``."""
    if not 1 <= q < n:
        raise ValueError(f"Type 1 needs 1 <= q < n, got q={q}, n={n}")
    r, s = len(weights), len(cross_weights)
    if r > q + 1 or s > min(n - q - 1, q + 1 - r):
        raise ValueError(f"(r, s) = ({r}, {s}) out of range for q={q}, n={n}")
    work = max(cap, 2)  # Q is quadratic, so build it untruncated before differentiating
    Q = quadratic_form(n, work, weights, cross_weights, q)
    omega = wedge(DiffForm.basis(n, work, range(q + 1, n)), ext_d(DiffForm.function(Q)))
    return dual_mv(omega).with_cap(cap)


def type2_normal_form(q: int, n: int, b: Sequence[Sequence], cap: int = 2) -> Multivector:
    m = n - q + 1
    comps = []
    for j in range(m):
        terms = {}
        for i in range(m):
            if b[i][j]:
                e = [0] * n
                e[q - 1 + i] = 1
                terms[tuple(e)] = rational(b[i][j])
        comps.append(TruncPoly.from_terms(n, cap, terms))
    V = Multivector(n, cap, 1, {(q - 1 + j,): f for j, f in enumerate(comps)})
    return wedge(Multivector.basis(n, cap, range(q - 1)), V)


def euler_tensor(q: int, cap: int = 2) -> Multivector:
    """``sum_j (-1)^{j+1} x_j d_1 ^ .. (skip j) .. ^ d_{q+1}`` on q+1 variables."""
    n = q + 1
    out = Multivector.zero(n, cap, q)
    for j in range(n):
        idx = tuple(i for i in range(n) if i != j)
        out = out + Multivector.basis(n, cap, idx, TruncPoly.var(n, cap, j).scale((-1) ** j))
    return out


# ---------------------------------------------------------------------------
# signature


def signature(S: Sequence[Sequence]) -> tuple[int, int, int]:
    """Sylvester inertia (n_plus, n_zero, n_minus) by exact congruence."""
    _, d = exact.congruence_diagonalize(S)
    pos = sum(1 for v in d if v > 0)
    neg = sum(1 for v in d if v < 0)
    return pos, len(d) - pos - neg, neg


# ---------------------------------------------------------------------------
# integrability


@dataclass(frozen=True)
class Witness:
    condition: str  # e.g. "(i_K w) ^ w", "(i_K w) ^ dw", "P ^ P", "[P, P]"
    multivector: tuple | None  # the constant (p-1)-vector K, 0-based indices
    component: tuple  # offending basis index tuple, 0-based
    residual: TruncPoly

    def describe(self) -> str:
        from .textio import format_poly

        k = "" if self.multivector is None else " K=d" + "^d".join(str(i + 1) for i in self.multivector)
        comp = "^".join(str(i + 1) for i in self.component) or "()"
        return f"{self.condition}{k} has component [{comp}] = {format_poly(self.residual)}"


@dataclass(frozen=True)
class IntegrabilityReport:
    integrable: bool
    witness: Witness | None = None

    def __post_init__(self):
        if self.integrable == (self.witness is not None):
            raise ValueError("a witness is present exactly when the tensor is not integrable")

    def __bool__(self):
        return self.integrable


def _first_nonzero(T, hi: int):
    for idx, f in T.items():
        g = f.graded(0, hi)
        if g:
            return idx, g
    return None


def is_nambu(P: Multivector) -> IntegrabilityReport:
    """Exact integrability test of the dual form up to the reliable degree."""
    n, q, cap = P.nvars, P.degree, P.cap
    if not 1 <= q <= n:
        raise ValueError(f"tensor degree {q} out of range 1..{n}")
    if cap < 2:
        raise InsufficientTruncation(f"cap={cap} is too small for an integrability test (need cap >= 2)")
    if q == 2:
        bad = _first_nonzero(wedge(P, P), cap)
        if bad:
            return IntegrabilityReport(False, Witness("P ^ P", None, *bad))
        bad = _first_nonzero(schouten(P, P), cap - 1)
        if bad:
            return IntegrabilityReport(False, Witness("[P, P]", None, *bad))
    p = n - q
    if p > 0:
        omega = dual_form(P)
        domega = ext_d(omega)
        for K in combinations(range(n), p - 1):
            alpha = interior(Multivector.basis(n, cap, K), omega)
            if not alpha:
                continue
            bad = _first_nonzero(wedge(alpha, omega), cap)
            if bad:
                return IntegrabilityReport(False, Witness("(i_K w) ^ w", K, *bad))
            bad = _first_nonzero(wedge(alpha, domega), cap - 1)
            if bad:
                return IntegrabilityReport(False, Witness("(i_K w) ^ dw", K, *bad))
    return IntegrabilityReport(True)


# ---------------------------------------------------------------------------
# classification helpers


def _linear_vectors(T) -> dict:
    """{(basis index, variable): coefficient} for a linear tensor."""
    out = {}
    for idx, f in T.comps.items():
        for j, c in enumerate(f.linear_coefficients()):
            if c:
                out[(idx, j)] = c
    return out


def _solve_annihilators(columns: list[dict]) -> list[list]:
    """Nullspace of the linear map whose i-th column is ``columns[i]``."""
    keys = sorted(set().union(*columns)) if columns else []
    if not keys:
        return [[int(i == j) for i in range(len(columns))] for j in range(len(columns))]
    M = exact.matrix([[col.get(k, 0) for col in columns] for k in keys], len(columns))
    return exact.nullspace(M)


def _check_linear(P: Multivector):
    for idx, f in P.comps.items():
        if f.graded(0, 0) or f.graded(2, f.cap):
            raise ClassificationError("classify_linear needs a tensor with homogeneous linear coefficients")


def _basis_completion(vectors: list[list], n: int) -> list[list]:
    """Append standard basis vectors to make an invertible set (echelon choice)."""
    if not vectors:
        return [[int(i == j) for i in range(n)] for j in range(n)]
    _, pivots = exact.rref(exact.matrix(vectors, n))
    extra = [[int(i == j) for i in range(n)] for j in range(n) if j not in pivots]
    return list(vectors) + extra


def _linear_map(rows: Sequence[Sequence], cap: int) -> PolyMap:
    return PolyMap.linear(exact.to_rows(exact.matrix(rows)), cap)


def _matmul(A, B):
    return (exact.matrix(A) * exact.matrix(B)).tolist()


# ---------------------------------------------------------------------------
# Type 2


def _try_type2(P: Multivector) -> tuple[Type2NormalForm, PolyMap] | None:
    n, q, cap = P.nvars, P.degree, P.cap
    lin = _linear_vectors(P)
    # divisors: constant vectors v with v ^ P = 0
    cols = [_linear_vectors(wedge(Multivector.basis(n, cap, (i,)), P)) for i in range(n)]
    # directions the coefficients do not depend on
    for i in range(n):
        for (idx, j), c in lin.items():
            if j == i:
                cols[i][((-1,) + idx, -1)] = c
    free = _solve_annihilators(cols)
    if len(free) < q - 1:
        return None
    if free:
        R, _ = exact.rref(exact.matrix(free, n))
        chosen = R.tolist()[: q - 1]
    else:
        chosen = []
    # columns of the inverse change of coordinates: chosen vectors first
    inv_cols = _basis_completion(chosen, n)
    Tinv = exact.matrix(inv_cols).transpose()
    T = Tinv.inv().tolist()
    phi = _linear_map(T, cap)
    Pn = pushforward(phi, P)
    m = n - q + 1
    head = tuple(range(q - 1))
    b = [[flint.fmpq(0)] * m for _ in range(m)]
    for j in range(m):
        comp = Pn.component(head + (q - 1 + j,))
        lc = comp.linear_coefficients()
        for i in range(m):
            b[i][j] = lc[q - 1 + i]
    nf = Type2NormalForm(q, n, tuple(tuple(row) for row in b))
    if nf.tensor(cap) != Pn:
        raise ClassificationError("Type 2 reduction did not reproduce the normal form")
    return nf, phi


# ---------------------------------------------------------------------------
# Type 1


def _type1_frame(P: Multivector):
    """Coordinates y = T x with omega = dy'' ^ eta in them."""
    n, q, cap = P.nvars, P.degree, P.cap
    p = n - q
    omega = dual_form(P)
    cols = [_linear_vectors(wedge(DiffForm.basis(n, cap, (i,)), omega)) for i in range(n)]
    W = _solve_annihilators(cols)
    if len(W) != p - 1:
        raise ClassificationError(
            f"dual form has {len(W)} constant divisors, a Type 1 structure has exactly {p - 1}"
        )
    if W:
        R, pivots = exact.rref(exact.matrix(W, n))
        W = R.tolist()
    else:
        pivots = []
    rows = [[int(i == j) for i in range(n)] for j in range(n) if j not in pivots] + W
    return rows


def _read_eta(P: Multivector, q: int) -> list[list]:
    """Rows eta_i (i <= q) as linear coefficient vectors, with omega = dy'' ^ sum eta_i dy_i."""
    n = P.nvars
    omega = dual_form(P)
    tail = tuple(range(q + 1, n))
    sign = -1 if len(tail) % 2 else 1
    eta = []
    if tail and any(idx[len(idx) - len(tail):] != tail for idx in omega.comps):
        raise ClassificationError("dual form is not divisible by the transverse differentials")
    for i in range(q + 1):
        g = omega.component((i,) + tail)
        if g.graded(0, 0) or g.graded(2, g.cap):
            raise ClassificationError("dual form has non-linear coefficients")
        eta.append([c * sign for c in g.linear_coefficients()])
    return eta


def _rank_normalize(K: list[list]) -> tuple[list[list], list[list], int]:
    """(E, H, s) with E K H = [[I_s, 0], [0, 0]]."""
    m = len(K)
    t = len(K[0]) if K else 0
    if m == 0 or t == 0:
        return [[int(i == j) for j in range(m)] for i in range(m)], [[int(i == j) for j in range(t)] for i in range(t)], 0
    aug = exact.matrix([list(K[i]) + [int(i == j) for j in range(m)] for i in range(m)], t + m)
    R, pivots = exact.rref(aug)
    rows = R.tolist()
    E = [row[t:] for row in rows]
    kp = [p for p in pivots if p < t]
    s = len(kp)
    Hcols = []
    for k, pcol in enumerate(kp):
        Hcols.append([int(i == pcol) for i in range(t)])
    for f in range(t):
        if f in kp:
            continue
        v = [flint.fmpq(int(i == f)) for i in range(t)]
        for k, pcol in enumerate(kp):
            v[pcol] -= rows[k][f]
        Hcols.append(v)
    H = [[Hcols[c][r] for c in range(t)] for r in range(t)]
    return E, H, s


def _type1(P: Multivector) -> tuple[Type1NormalForm, PolyMap]:
    n, q, cap = P.nvars, P.degree, P.cap
    T = _type1_frame(P)
    P1 = pushforward(_linear_map(T, cap), P)
    eta = _read_eta(P1, q)
    k = q + 1
    M = [row[:k] for row in eta]
    N = [row[k:] for row in eta]
    if any(M[i][j] != M[j][i] for i in range(k) for j in range(k)):
        raise ClassificationError("linear part of eta is not symmetric: not an integrable Type 1 form")
    Pm, d = exact.congruence_diagonalize(M)
    r = sum(1 for v in d if v != 0)
    Np = _matmul(exact.to_rows(exact.matrix(Pm).transpose()), N) if N and N[0] else [[] for _ in range(k)]
    t = n - k
    # w = S y with blocks acting on (z', y'')
    Pinv = exact.matrix(Pm).inv().tolist()
    S = [[flint.fmpq(0)] * n for _ in range(n)]
    for i in range(k):
        for j in range(k):
            S[i][j] = Pinv[i][j]
    for i in range(t):
        S[k + i][k + i] = flint.fmpq(1)
    # complete the square on nondegenerate directions
    for i in range(r):
        for j in range(t):
            S[i][k + j] += Np[i][j] / d[i]
    # kernel block: bring the cross matrix to [[I, 0], [0, 0]]
    Kb = [Np[i] for i in range(r, k)]
    E, H, s = _rank_normalize(Kb)
    if Kb and t:
        # z_k = G w_k and y'' = H w'' with G^T = E
        Ginv = exact.matrix(E).transpose().inv().tolist()
        Hinv = exact.matrix(H).inv().tolist()
        block = [[S[r + i][c] for c in range(n)] for i in range(k - r)]
        for i in range(k - r):
            for c in range(n):
                S[r + i][c] = sum((Ginv[i][a] * block[a][c] for a in range(k - r)), flint.fmpq(0))
        tail = [[S[k + i][c] for c in range(n)] for i in range(t)]
        for i in range(t):
            for c in range(n):
                S[k + i][c] = sum((Hinv[i][a] * tail[a][c] for a in range(t)), flint.fmpq(0))
    A = _matmul(S, T)
    if r == k:
        A = _normalize_signs(P, A, q)
    phi = _linear_map(A, cap)
    Pn = pushforward(phi, P)
    nf = _read_type1(Pn, q, r, s)
    if nf.tensor(cap) != Pn:
        raise ClassificationError("Type 1 reduction did not reproduce the normal form")
    return nf, phi


def _read_type1(Pn: Multivector, q: int, r: int, s: int) -> Type1NormalForm:
    eta = _read_eta(Pn, q)
    weights = tuple(eta[j][j] for j in range(r))
    cross = tuple(eta[r + j][q + 1 + j] for j in range(s))
    if any(c == 0 for c in weights + cross):
        raise ClassificationError("normal form reduction produced a zero weight")
    return Type1NormalForm(q, Pn.nvars, weights, cross)


def _normalize_signs(P: Multivector, A: list[list], q: int) -> list[list]:
    """Make positive weights the majority and list them first."""
    n, cap = P.nvars, P.cap
    weights = _read_type1(pushforward(_linear_map(A, cap), P), q, q + 1, 0).weights
    k = q + 1
    reflect = [[flint.fmpq(int(i == j) * (-1 if i == 0 == j else 1)) for j in range(n)] for i in range(n)]
    if sum(c < 0 for c in weights) > sum(c > 0 for c in weights):
        # a reflection flips the orientation and hence the sign of Q
        A = _matmul(reflect, A)
        weights = tuple(-c for c in weights)
    order = sorted(range(k), key=lambda j: (weights[j] < 0, j))
    if order != list(range(k)):
        perm = [[flint.fmpq(0)] * n for _ in range(n)]
        for new, old in enumerate(order):
            perm[new][old] = flint.fmpq(1)
        for i in range(k, n):
            perm[i][i] = flint.fmpq(1)
        A = _matmul(perm, A)
        if exact.matrix(perm).det() < 0:
            A = _matmul(reflect, A)
    return A


def classify_linear(P: Multivector, check: bool = False) -> tuple[LinearNormalForm, PolyMap]:
    """Normal form of a linear Nambu tensor and a linear map realizing it.

    The returned map ``phi`` satisfies ``pushforward(phi, P) == nf.tensor(P.cap)``.
    """
    _check_linear(P)
    if check:
        report = is_nambu(P)
        if not report:
            raise ClassificationError(f"input is not a Nambu tensor: {report.witness.describe()}")
    if P.nvars < 1 or P.degree < 1:
        raise ClassificationError("tensor degree must be at least 1")
    found = _try_type2(P)
    if found is not None:
        return found
    if P.degree == 1:
        raise ClassificationError("vector field failed the Type 2 reduction")  # unreachable in theory
    if P.degree >= P.nvars:
        raise ClassificationError("a top-degree tensor is always Type 2")
    return _type1(P)


def singular_locus_check(P: Multivector) -> tuple[bool, list[list]]:
    """Zero set of the linear part of a nondegenerate Type 1 tensor.

    Returns (ok, basis) where ``basis`` spans the common kernel of the linear
    coefficients and ``ok`` says it has the expected dimension n - q - 1.
    """
    lin = P.linear_part()
    if P.graded(0, 0):
        raise ClassificationError("the tensor does not vanish at the origin")
    nf, _ = classify_linear(lin)
    if not isinstance(nf, Type1NormalForm) or not nf.nondegenerate:
        raise ClassificationError("singular locus check needs a nondegenerate Type 1 linear part")
    rows = [c for _, f in lin.items() for c in [f.linear_coefficients()]]
    basis = exact.nullspace(exact.matrix(rows, P.nvars)) if rows else [
        [int(i == j) for i in range(P.nvars)] for j in range(P.nvars)
    ]
    return len(basis) == P.nvars - P.degree - 1, basis
