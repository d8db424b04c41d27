from fractions import Fraction

import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from nambu import generators as gen
from nambu.linearizer import (
    CocycleError,
    LinearizerConfig,
    PreconditionError,
    SoActionBasis,
    SolveError,
    UnsupportedAction,
    _action_from_fields,
    build_contracted_fields,
    constrained_component,
    hvf_of,
    kill_invariant_part,
    levi_correction,
    linearize,
    linearize_action,
    mv_of,
    slice_lambda,
    slice_theta,
    so_average,
    windows,
)
from nambu.nambu_core import classify_linear, euler_tensor, is_nambu, quadratic_form, type1_normal_form
from nambu.polyring import PolyMap, TruncPoly
from nambu.tensorcalc import DiffForm, Multivector, lie_derivative, pushforward, schouten, wedge

from . import oracles
from .strategies import polys, tensors


def x(n, cap, i):
    return TruncPoly.var(n, cap, i - 1)


def vf(n, cap, comps):
    return Multivector(n, cap, 1, {(j - 1,): f for j, f in comps.items()})


def shear(n, cap):
    """x1 -> x1 + x2^2."""
    comps = [TruncPoly.var(n, cap, j) for j in range(n)]
    comps[0] = comps[0] + comps[1] ** 2
    return PolyMap(comps)


# symmetry algebra


@pytest.mark.parametrize("weights", [(1, 1, 1), (1, 1, -1), (1, 1, 1, -1), (1, 1, -1, -1), (2, -3, 1)])
def test_so_basis_annihilates_q_and_normal_form(weights):
    q = len(weights) - 1
    n = q + 2
    basis = SoActionBasis(q, n, weights)
    P1 = type1_normal_form(q, n, weights, (), 3)
    Q = quadratic_form(n, 3, weights)
    for X in basis.fields(3):
        assert lie_derivative(X, Q).is_zero()
        assert schouten(X, P1).is_zero()


@pytest.mark.parametrize("weights", [(1, 1, 1), (1, -1, 1), (1, 1, 1, -1), (1, 1, -1, -1)])
def test_so_basis_structure_constants_close(weights):
    q = len(weights) - 1
    n = q + 1
    basis = SoActionBasis(q, n, weights)
    fields = dict(zip(basis.pairs, basis.fields(1)))
    sym = {p: [oracles.poly_expr(F.component((j,))) for j in range(n)] for p, F in fields.items()}
    table = basis.structure_constants()
    for p in basis.pairs:
        for r in basis.pairs:
            coeffs = table.get((p, r), {})
            assert all(c.q == 1 for c in coeffs.values())
            lhs = _sympy_bracket(sym[p], sym[r], n)
            rhs = [sp.expand(sum(sp.Integer(int(c.p)) * sym[u][j] for u, c in coeffs.items())) for j in range(n)]
            assert lhs == rhs


def test_so_basis_rejects_bad_weights():
    with pytest.raises(ValueError):
        SoActionBasis(2, 3, (1, 1))
    with pytest.raises(ValueError):
        SoActionBasis(2, 3, (1, 0, 1))


# contracted fields


def test_contracted_fields_of_euler_are_rotations():
    n, cap = 3, 2
    X = build_contracted_fields(euler_tensor(2, cap))
    rot = vf(n, cap, {1: -x(n, cap, 2), 2: x(n, cap, 1)})
    assert X[(0, 1)] in (rot, -rot)
    basis = SoActionBasis(2, 3, (1, 1, 1))
    for (a, b), F in X.items():
        G = basis.field(a, b, cap)
        assert F in (G, -G)


def test_contracted_fields_hyperbolic_match_basis_up_to_sign():
    weights = (1, 1, -1)
    P = type1_normal_form(2, 4, weights, (), 2)
    basis = SoActionBasis(2, 4, weights)
    for (a, b), F in build_contracted_fields(P).items():
        G = basis.field(a, b, 2)
        assert F in (G, -G)
        assert wedge(F, P).is_zero()


def test_contracted_fields_of_constant_tensor():
    P = Multivector.basis(3, 2, (0, 1), TruncPoly.constant(3, 2, 1))
    X = build_contracted_fields(P)
    for F in X.values():
        assert all(f.max_degree() in (None, 0) for f in F.comps.values())


@settings(max_examples=10)
@given(st.integers(0, 10**6))
def test_contracted_fields_preserve_and_are_tangent(seed):
    cap = 4
    P, _ = gen.perturbed_type1(2, 4, (1, 1, 1), cap, seed, degree=2)
    for F in build_contracted_fields(P).values():
        assert schouten(F, P).graded(0, cap - 1).is_zero()
        assert wedge(F, P).is_zero()


# constrained component


def test_constrained_component_small_case():
    cap = 3
    P = euler_tensor(2, cap)
    comp = constrained_component(P, 2)
    assert comp.dim == 5
    P1 = P.linear_part()
    for Y in comp.basis:
        assert all(f.min_degree() == 2 == f.max_degree() for f in Y.comps.values())
        assert schouten(Y, P1).is_zero()
        assert wedge(Y, P1).is_zero()
    # brackets with the rotations satisfy both defining conditions again
    for R in SoActionBasis(2, 3, (1, 1, 1)).fields(cap):
        for Y in comp.basis:
            Z = schouten(R, Y)
            assert schouten(Z, P1).is_zero() and wedge(Z, P1).is_zero()


def test_constrained_component_membership_by_substitution():
    n, cap = 3, 3
    P1 = euler_tensor(2, cap).linear_part()
    Q = quadratic_form(n, cap, (1, 1, 1))
    E = vf(n, cap, {i: x(n, cap, i) for i in (1, 2, 3)})
    # the radial field is transverse to the spheres: E ^ P1 = 2Q d1^d2^d3
    x1E = E * x(n, cap, 1)
    assert wedge(x1E, P1) == Multivector.basis(n, cap, (0, 1, 2), x(n, cap, 1) * Q * 2)
    assert not _in_span(x1E, constrained_component(P1, 2).basis)
    # the rotation about the x3 axis, scaled by x3 or by x1: both tangent, only the first preserves P1
    R = vf(n, cap, {1: -x(n, cap, 2), 2: x(n, cap, 1)})
    comp = constrained_component(P1, 2).basis
    assert wedge(R * x(n, cap, 3), P1).is_zero() and schouten(R * x(n, cap, 3), P1).is_zero()
    assert _in_span(R * x(n, cap, 3), comp)
    assert wedge(R * x(n, cap, 1), P1).is_zero() and not schouten(R * x(n, cap, 1), P1).is_zero()
    assert not _in_span(R * x(n, cap, 1), comp)


def _in_span(Y, basis):
    def flat(T):
        return {(idx, e): c for idx, f in T.items() for e, c in f.terms()}

    vecs = [flat(B) for B in basis]
    target = flat(Y)
    keys = sorted(set(target).union(*vecs))
    M = sp.Matrix([[sp.Rational(int(v.get(k, 0).p), int(v.get(k, 0).q)) if k in v else 0 for v in vecs] for k in keys])
    aug = M.row_join(sp.Matrix([sp.Rational(int(target[k].p), int(target[k].q)) if k in target else 0 for k in keys]))
    return M.rank() == aug.rank()


def test_constrained_component_beyond_cap():
    with pytest.raises(PreconditionError):
        constrained_component(euler_tensor(2, 2), 3)


# Levi correction and action linearization


def perturbed_euler(cap):
    return pushforward(shear(3, cap), euler_tensor(2, cap))


def test_levi_on_linear_input_is_identity():
    P = euler_tensor(2, 3)
    X = build_contracted_fields(P)
    checks = []
    out = levi_correction(X, P, (1, 3), checks)
    assert out == X
    assert not any(c.startswith("cocycle2") for c in checks)


def test_levi_correction_example():
    n, cap = 3, 2
    P = perturbed_euler(cap)
    X = build_contracted_fields(P)
    checks = []
    Xh = levi_correction(X, P, (1, 2), checks)
    assert "cocycle2@2" in checks and "brackets@2" in checks
    assert Xh != X
    keys, act = _action_from_fields(Xh)
    sym = {k: [oracles.poly_expr(Xh[k].component((j,))) for j in range(n)] for k in keys}
    for a, b in act.keys(2):
        lhs = _sympy_bracket(sym[keys[a]], sym[keys[b]], n)
        rhs = [sum(sp.Rational(int(c.p), int(c.q)) * sym[keys[u]][j] for u, c in act.ad[a][b].items()) for j in range(n)]
        assert all(oracles.truncate(l - r, n, cap) == 0 for l, r in zip(lhs, rhs))


def test_levi_then_action_linearization_example():
    cap = 2
    P = perturbed_euler(cap)
    checks = []
    Xh = levi_correction(build_contracted_fields(P), P, (1, 2), checks)
    psi = linearize_action(Xh, (1, 2), checks)
    assert "cocycle1@2" in checks and "action-linear@2" in checks
    inv = psi.inverse()
    for F in Xh.values():
        moved = pushforward(psi, F, inv)
        assert moved.graded(2, 2).is_zero()


def test_non_cocycle_is_detected_and_refused():
    basis = SoActionBasis(2, 3, (1, 1, 1))
    act = basis.action()
    n = 3
    Y = {(a,): hvf_of(vf(n, 2, {1: x(n, 2, 1) ** 2, 3: x(n, 2, 2) * x(n, 2, 3)}) * (a + 1), 2) for a in range(act.dim)}
    B = act.d1(Y)
    assert all(all(p.is_zero() for p in v) for v in act.d2(B).values())
    assert act.solve_coboundary2(B, 2) is not None
    bad = dict(B)
    bump = hvf_of(vf(n, 2, {2: x(n, 2, 1) * x(n, 2, 3)}), 2)
    bad[(0, 1)] = [p + b for p, b in zip(bad[(0, 1)], bump)]
    assert any(not all(p.is_zero() for p in v) for v in act.d2(bad).values())
    with pytest.raises(SolveError) as err:
        act.solve_coboundary2(bad, 2)
    assert err.value.degree == 2


def test_one_cocycle_failure_carries_context():
    n, cap = 3, 2
    basis = SoActionBasis(2, 3, (1, 1, 1))
    X = {p: F for p, F in zip(basis.pairs, basis.fields(cap))}
    # add a quadratic term to one field only: not a 1-cocycle
    X[(0, 1)] = X[(0, 1)] + vf(n, cap, {3: x(n, cap, 1) ** 2})
    with pytest.raises(CocycleError) as err:
        linearize_action(X, (1, 2))
    assert err.value.degree == 2


def test_linearize_action_identity_on_linear_fields():
    basis = SoActionBasis(2, 4, (1, 1, -1))
    X = dict(zip(basis.pairs, basis.fields(3)))
    assert linearize_action(X, (1, 3)) == PolyMap.identity(4, 3)


def test_window_beyond_cap_is_refused():
    P = perturbed_euler(2)
    X = build_contracted_fields(P)
    with pytest.raises(PreconditionError):
        linearize_action(X, (2, 3))
    with pytest.raises(PreconditionError):
        levi_correction(X, P, (1, 3))


# invariant part


@pytest.mark.parametrize("q", [2, 3])
def test_kill_radial_factor(q):
    n, cap = q + 1, 3
    weights = (1,) * (q + 1)
    P1 = type1_normal_form(q, n, weights, (), cap)
    Q = quadratic_form(n, cap, weights)
    P = P1 * (TruncPoly.constant(n, cap, 1) + Q)
    action = SoActionBasis(q, n, weights)
    phi = kill_invariant_part(P, (2, 3), action)
    f = Q.scale(Fraction(-1, q - 1))
    expected = PolyMap([x(n, cap, i) * (TruncPoly.constant(n, cap, 1) + f) for i in range(1, n + 1)])
    assert phi == expected
    assert pushforward(phi, P).graded(2, 3).is_zero()


def test_kill_identity_on_linear_input():
    P1 = type1_normal_form(2, 4, (1, 1, -1), (), 3)
    assert kill_invariant_part(P1, (1, 3), SoActionBasis(2, 4, (1, 1, -1))) == PolyMap.identity(4, 3)


def test_kill_rejects_non_invariant_junk():
    n, cap = 3, 3
    P = euler_tensor(2, cap) + Multivector.basis(n, cap, (0, 1), x(n, cap, 1) ** 2)
    with pytest.raises(PreconditionError) as err:
        kill_invariant_part(P, (1, 2), SoActionBasis(2, 3, (1, 1, 1)))
    assert err.value.degree == 2


# master loop


def test_windows():
    assert windows(8, "doubling") == [(1, 2), (2, 4), (4, 8)]
    assert windows(5, "doubling") == [(1, 2), (2, 4), (4, 5)]
    assert windows(4, "stepwise") == [(1, 2), (2, 3), (3, 4)]
    with pytest.raises(ValueError):
        windows(4, "sideways")
    with pytest.raises(ValueError):
        LinearizerConfig(schedule="sideways")


def test_linear_input_gives_identity_and_empty_trace():
    P = type1_normal_form(2, 4, (1, 1, 1), (), 4)
    Phi, trace = linearize(P, 4)
    assert Phi == PolyMap.identity(4, 4)
    assert trace.steps == [] and trace.linear_through == 4


@pytest.mark.parametrize("schedule", ["doubling", "stepwise"])
def test_linearize_small_instance(schedule):
    P, _ = gen.perturbed_type1(2, 3, (1, 1, 1), 4, 11, degree=3)
    Phi, trace = linearize(P, 4, schedule)
    out = pushforward(Phi, P)
    assert out.graded(2, 4).is_zero() and out == trace.normal_form.tensor(4)
    composed = trace.linear_map
    for s in trace.steps:
        from nambu.polyring import map_compose

        composed = map_compose(s.step_map, composed)
    assert composed == trace.final_map == Phi


def test_linearize_preconditions():
    with pytest.raises(PreconditionError):
        linearize(type1_normal_form(2, 4, (1, 1, 1), (), 2), 4)
    with pytest.raises(PreconditionError):
        linearize(Multivector.basis(4, 4, (0, 1), TruncPoly.constant(4, 4, 1)) + type1_normal_form(2, 4, (1, 1, 1), (), 4), 4)
    with pytest.raises(PreconditionError):
        linearize(type1_normal_form(2, 4, (1, 1), (), 4), 4)


def test_conjugation_covariance():
    cap = 4
    P, _ = gen.perturbed_type1(2, 3, (1, 1, 1), cap, 5, degree=2)
    R = PolyMap.linear([[Fraction(3, 5), Fraction(-4, 5), 0], [Fraction(4, 5), Fraction(3, 5), 0], [0, 0, 1]], cap)
    _, t1 = linearize(P, cap)
    Phi2, t2 = linearize(pushforward(R, P), cap)
    assert t1.normal_form == t2.normal_form
    assert pushforward(Phi2, pushforward(R, P)) == t1.normal_form.tensor(cap)


# dense Chevalley-Eilenberg oracle for the homotopy solver


def _sympy_fields(weights):
    xs = oracles.X[: len(weights)]
    out = []
    basis = SoActionBasis(len(weights) - 1, len(weights), weights)
    for a, b in basis.pairs:
        v = [sp.Integer(0)] * len(weights)
        v[b] = xs[a] / weights[b]
        v[a] = -xs[b] / weights[a]
        out.append(v)
    return out


def _sympy_bracket(V, W, n):
    xs = oracles.X[:n]
    return [sp.expand(sum(V[i] * sp.diff(W[j], xs[i]) - W[i] * sp.diff(V[j], xs[i]) for i in range(n))) for j in range(n)]


def _coords(vec, xs, monos):
    out = []
    for v in vec:
        poly = sp.Poly(v, *xs)
        out.extend(poly.coeff_monomial(m) for m in monos)
    return out


@pytest.mark.parametrize("weights", [(1, 1, 1), (1, 1, -1)])
def test_coboundary_solver_against_dense_system(weights):
    n, d = len(weights), 2
    xs = oracles.X[:n]
    monos = sorted(sp.itermonomials(xs, d, d), key=sp.default_sort_key)
    gens = _sympy_fields(weights)
    basis_fields = [[m if j == i else sp.Integer(0) for j in range(n)] for i in range(n) for m in monos]
    # dense matrix of Y -> ([X_a, Y])_a
    cols = [_coords([c for G in gens for c in _sympy_bracket(G, Y, n)], xs, monos) for Y in basis_fields]
    D0 = sp.Matrix(cols).T
    kernel_dim = len(basis_fields) - D0.rank()

    act = SoActionBasis(n - 1, n, weights).action()
    cap = d
    W = vf(n, cap, {1: x(n, cap, 1) * x(n, cap, 2), 2: x(n, cap, 3) ** 2, 3: x(n, cap, 1) ** 2 - x(n, cap, 2) * x(n, cap, 3)})
    Z = act.d0(hvf_of(W, d))
    Y = act.solve_coboundary1(Z, d)
    assert act.d0(Y) == Z
    diff = [oracles.poly_expr((mv_of({d: Y}, n, cap) - W).component((j,))) for j in range(n)]
    assert all(v == 0 for v in _coords([c for G in gens for c in _sympy_bracket(G, diff, n)], xs, monos))
    # the Casimir kernel projection spans exactly the dense kernel
    from nambu.linearizer import casimir_split

    projected = []
    for i in range(n):
        for m in monos:
            F = vf(n, cap, {i + 1: TruncPoly.from_terms(n, cap, {tuple(sp.Poly(m, *xs).monoms()[0]): 1})})
            u0, _ = casimir_split(hvf_of(F, d), act.casimir0)
            projected.append(_coords([oracles.poly_expr(mv_of({d: u0}, n, cap).component((j,))) for j in range(n)], xs, monos))
    assert sp.Matrix(projected).rank() == kernel_dim


# averaging


def _monomials_xy(deg):
    return [(a, deg - a) for a in range(deg + 1)]


@pytest.mark.parametrize("deg", range(0, 5))
def test_average_matches_angle_integral(deg):
    n, cap = 2, 4
    for a, b in _monomials_xy(deg):
        T = TruncPoly.from_terms(n, cap, {(a, b): 1})
        got = so_average(T, 2)
        expected = oracles.rotation_average(oracles.X[0] ** a * oracles.X[1] ** b)
        assert sp.expand(oracles.poly_expr(got) - expected) == 0


def test_average_examples():
    n, cap = 2, 2
    got = so_average(x(n, cap, 1) ** 2, 2)
    assert got == (x(n, cap, 1) ** 2 + x(n, cap, 2) ** 2).scale(Fraction(1, 2))
    Q = quadratic_form(3, 4, (1, 1, 1))
    assert so_average(Q, 3) == Q


@settings(max_examples=15)
@given(st.data())
def test_average_is_an_equivariant_projector(data):
    n, k = data.draw(st.sampled_from([(2, 2), (3, 2), (3, 3)]))
    kind = data.draw(st.sampled_from(["poly", "mv", "form"]))
    if kind == "poly":
        T = data.draw(polys(n, 3))
    else:
        T = data.draw(tensors(n, 3, data.draw(st.integers(0, n)), "multivector" if kind == "mv" else "form", 2))
    A = so_average(T, k)
    assert so_average(A, k) == A
    for F in SoActionBasis(k - 1, n, (1,) * k).fields(T.cap):
        assert lie_derivative(F, A).is_zero()
        assert so_average(lie_derivative(F, T), k) == lie_derivative(F, A)


def test_average_refuses_noncompact_action():
    with pytest.raises(UnsupportedAction):
        so_average(x(2, 2, 1), 2, signs=(1, -1))


def test_average_of_form_and_multivector():
    n, cap = 2, 2
    dx1 = DiffForm.basis(n, cap, (0,), x(n, cap, 1))
    avg = so_average(dx1, 2)
    expected = DiffForm.basis(n, cap, (0,), x(n, cap, 1).scale(Fraction(1, 2))) + DiffForm.basis(n, cap, (1,), x(n, cap, 2).scale(Fraction(1, 2)))
    assert avg == expected


# slicing


def test_slice_lambda_example():
    P = type1_normal_form(3, 5, (1, 1, 1, -1), (), 2)
    L = slice_lambda(P, 3)
    assert L.degree == 2 and is_nambu(L)
    nf, _ = classify_linear(L.linear_part())
    assert nf.variant == "type1" and nf.q == 2 and nf.elliptic


def test_slice_lambda_full_is_identity():
    P = type1_normal_form(3, 5, (1, 1, 1, 1), (), 2)
    assert slice_lambda(P, 4) == P


def test_slice_order_one_on_euler():
    P = euler_tensor(3, 2)
    S = slice_lambda(P, 3)
    from nambu.tensorcalc import contract

    assert S == contract(DiffForm.basis(4, 2, (3,)), P)
    assert oracles.same(S, oracles.contract({(3,): 1}, oracles.tensor_dict(P)))


def test_slice_theta_example():
    P = type1_normal_form(4, 6, (1, 1, 1, -1, -1), (), 2)
    T = slice_theta(P, 3)
    assert T.nvars == 4 and T.degree == 2
    nf, _ = classify_linear(T.linear_part())
    assert nf.variant == "type1" and sorted(nf.signature) == [1, 2]


def test_slice_theta_vector_field_case():
    P = type1_normal_form(3, 4, (1, 1, 1, -1), (), 2)
    T = slice_theta(P, 3)
    assert T.degree == 1
    nf, _ = classify_linear(T.linear_part())
    assert nf.variant == "type2"
    b = sp.Matrix(nf.b)
    lam = sp.symbols("lam")
    roots = sp.roots(b.charpoly(lam).as_expr(), lam)
    nonzero = sorted(r for r in roots if r != 0)
    assert len(nonzero) == 2 and nonzero[0] == -nonzero[1]


def test_slice_index_errors():
    P = type1_normal_form(3, 5, (1, 1, 1, -1), (), 2)
    with pytest.raises(ValueError):
        slice_lambda(P, 2)
    with pytest.raises(ValueError):
        slice_lambda(P, 5)
    with pytest.raises(ValueError):
        slice_theta(P, 1)
    with pytest.raises(ValueError):
        slice_theta(P, 4)


def test_slice_theta_of_constant_is_constant():
    P = Multivector.basis(4, 2, (0, 1, 2), TruncPoly.constant(4, 2, 3))
    T = slice_theta(P, 2)
    assert all(f.max_degree() in (None, 0) for f in T.comps.values())
