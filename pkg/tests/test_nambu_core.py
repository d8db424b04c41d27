import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nambu import generators as gen
from nambu.nambu_core import (
    ClassificationError,
    InsufficientTruncation,
    Type1NormalForm,
    Type2NormalForm,
    classify_linear,
    euler_tensor,
    is_nambu,
    signature,
    singular_locus_check,
    type1_normal_form,
    type2_normal_form,
)
from nambu.polyring import PolyMap, TruncPoly
from nambu.tensorcalc import Multivector, pushforward
from nambu.textio import parse_tensor

from .strategies import invertible_matrices


def test_euler_is_type1_elliptic():
    nf, A = classify_linear(euler_tensor(2, 1))
    assert isinstance(nf, Type1NormalForm)
    assert (nf.q, nf.n, nf.r, nf.s) == (2, 3, 3, 0)
    assert nf.elliptic and not nf.hyperbolic
    assert pushforward(A, euler_tensor(2, 1)) == nf.tensor(1)


def test_type1_normal_form_matches_euler():
    assert type1_normal_form(2, 3, (1, 1, 1), (), 2) == euler_tensor(2, 2)


def test_type2_example():
    b = [[1, 0, 0], [0, -1, 0], [0, 0, 0]]
    P = type2_normal_form(3, 5, b, 1)
    nf, A = classify_linear(P)
    assert isinstance(nf, Type2NormalForm)
    assert not nf.nondegenerate
    assert pushforward(A, P) == nf.tensor(1)


def test_vector_field_is_type2():
    P = Multivector(2, 1, 1, {(0,): TruncPoly.var(2, 1, 1), (1,): TruncPoly.var(2, 1, 0)})
    nf, A = classify_linear(P)
    assert nf.variant == "type2" and nf.nondegenerate
    assert pushforward(A, P) == nf.tensor(1)


def test_nonlinear_input_rejected():
    P = euler_tensor(2, 3) + Multivector.basis(3, 3, (0, 1), TruncPoly.var(3, 3, 0) ** 2)
    with pytest.raises(ValueError):
        classify_linear(P)


@pytest.mark.parametrize(
    "S, expected",
    [
        ([[1, 0], [0, -1]], (1, 0, 1)),
        ([[0, 1], [1, 0]], (1, 0, 1)),
        ([[1, 1, 0], [1, 1, 0], [0, 0, 2]], (2, 1, 0)),
        ([[0, 0], [0, 0]], (0, 2, 0)),
        ([[2, 1, 1], [1, 2, 1], [1, 1, 2]], (3, 0, 0)),
    ],
)
def test_signature_examples(S, expected):
    assert signature(S) == expected


@given(st.integers(1, 4).flatmap(lambda n: st.tuples(st.just(n), invertible_matrices(n))), st.data())
def test_signature_is_a_congruence_invariant(nm, data):
    n, M = nm
    diag = data.draw(st.lists(st.integers(-3, 3), min_size=n, max_size=n))
    S = [[diag[i] if i == j else 0 for j in range(n)] for i in range(n)]
    MSMt = [[sum(M[k][i] * S[k][l] * M[l][j] for k in range(n) for l in range(n)) for j in range(n)] for i in range(n)]
    expected = (sum(v > 0 for v in diag), sum(v == 0 for v in diag), sum(v < 0 for v in diag))
    assert signature(MSMt) == expected


def test_singular_locus_n4():
    ok, basis = singular_locus_check(type1_normal_form(2, 4, (1, 1, 1), (), 2))
    assert ok and len(basis) == 1
    assert [v for v in basis[0][:3]] == [0, 0, 0] and basis[0][3] != 0


def test_singular_locus_is_origin_when_n_is_q_plus_1():
    ok, basis = singular_locus_check(euler_tensor(3, 2))
    assert ok and basis == []


def test_singular_locus_rejects_type2():
    with pytest.raises(ClassificationError):
        singular_locus_check(type2_normal_form(2, 3, [[1, 0], [0, 1]], 2))


# integrability


def test_euler_and_normal_forms_are_nambu():
    assert is_nambu(euler_tensor(3, 3))
    assert is_nambu(type1_normal_form(2, 5, (1, -1), (1,), 3))
    assert is_nambu(type2_normal_form(2, 4, [[1, 2, 0], [0, 1, 0], [3, 0, -1]], 3))


def test_symplectic_pair_witness():
    P = parse_tensor("n=4; cap=2; kind=multivector; degree=2;\nd1^d2 + d3^d4").value
    report = is_nambu(P)
    assert not report
    w = report.witness
    # (d1^d2 + d3^d4)^2 = 2 d1^d2^d3^d4
    assert w.condition == "P ^ P" and w.component == (0, 1, 2, 3)
    assert w.residual == TruncPoly.constant(4, 2, 2)


def test_nonintegrable_three_vector_witness():
    # dual form x1 dx1^dx2 + x3 dx3^dx4; contracting with d1 leaves x1 dx2,
    # and x1 dx2 ^ x3 dx3^dx4 = x1 x3 dx2^dx3^dx4
    P = parse_tensor("n=5; cap=3; kind=multivector; degree=3;\nx3 d1^d2^d5 + x1 d3^d4^d5").value
    w = is_nambu(P).witness
    assert w.condition == "(i_K w) ^ w"
    assert w.multivector == (0,) and w.component == (1, 2, 3)
    assert w.residual == TruncPoly.var(5, 3, 0) * TruncPoly.var(5, 3, 2)


def test_low_cap_is_refused():
    with pytest.raises(InsufficientTruncation):
        is_nambu(euler_tensor(2, 1))


def test_report_requires_consistent_witness():
    from nambu.nambu_core import IntegrabilityReport

    with pytest.raises(ValueError):
        IntegrabilityReport(False)


@settings(max_examples=15)
@given(st.integers(0, 10**6), st.sampled_from([(2, 3), (2, 4), (3, 5)]))
def test_integrability_is_invariant_under_diffeomorphism(seed, qn):
    q, n = qn
    P, _ = gen.perturbed_type1(q, n, (1,) * (q + 1), 3, seed, degree=2, density=0.3)
    assert is_nambu(P)


@settings(max_examples=20)
@given(st.integers(0, 10**6), st.sampled_from([(2, 3), (2, 4), (3, 4), (3, 5), (4, 6)]))
def test_classification_recovers_conjugated_type1(seed, qn):
    q, n = qn
    signs = gen.sign_patterns(q)[seed % len(gen.sign_patterns(q))]
    P, _ = gen.conjugated_type1(q, n, signs, (), 1, seed)
    nf, A = classify_linear(P)
    assert nf.variant == "type1" and nf.nondegenerate
    assert sorted(nf.signature) == sorted((signs.count(1), signs.count(-1)))
    assert pushforward(A, P) == nf.tensor(1)


@settings(max_examples=20)
@given(st.integers(0, 10**6), st.sampled_from([(2, 3), (2, 4), (3, 5), (3, 6)]))
def test_classification_recovers_conjugated_type2(seed, qn):
    q, n = qn
    b = gen.random_type2_b(q, n, seed)
    P, _ = gen.conjugated_type2(q, n, b, 1, seed)
    nf, A = classify_linear(P)
    assert nf.variant == "type2"
    assert nf.nondegenerate == Type2NormalForm(q, n, tuple(map(tuple, b))).nondegenerate
    assert pushforward(A, P) == nf.tensor(1)


def test_classification_of_degenerate_type1():
    P = type1_normal_form(2, 4, (1, 1), (1,), 1)
    M = gen.random_invertible_matrix(4, 5)
    nf, A = classify_linear(pushforward(PolyMap.linear(M, 1), P))
    assert nf.variant == "type1" and (nf.r, nf.s) == (2, 1) and not nf.nondegenerate


@pytest.mark.parametrize("q, n, weights, cross", [(2, 4, (1,), (1,)), (2, 3, (1, -1), ()), (3, 5, (1, 1), ())])
def test_small_type1_is_reported_as_type2(q, n, weights, cross):
    # with r + s <= 2 the tensor has a constant decomposable factor
    P = type1_normal_form(q, n, weights, cross, 1)
    nf, A = classify_linear(P)
    assert nf.variant == "type2"
    assert pushforward(A, P) == nf.tensor(1)
