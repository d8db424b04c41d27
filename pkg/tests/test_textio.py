from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from nambu.nambu_core import euler_tensor, quadratic_form, type2_normal_form
from nambu.polyring import PolyMap
from nambu.textio import ParseError, format_document, format_tensor, parse_body, parse_tensor

from .strategies import near_identity, polys, tensors

GOLDEN = Path(__file__).parent / "golden" / "inputs"


def test_euler_bivector_parses_to_constructed_value():
    doc = parse_tensor("n=3; cap=4; kind=multivector; degree=2;\nx1 d2^d3 - x2 d1^d3 + x3 d1^d2\n")
    assert doc.value == euler_tensor(2, 4)
    assert (doc.nvars, doc.cap, doc.kind, doc.degree) == (3, 4, "multivector", 2)


def test_hyperbolic_quadratic_function():
    doc = parse_tensor("n=2; cap=2; kind=function;\n1/2 * (x1^2 - x2^2)")
    assert doc.value == quadratic_form(2, 2, (1, -1))


def test_repeated_index_is_an_error():
    with pytest.raises(ParseError) as err:
        parse_tensor("n=3; cap=2; kind=multivector; degree=2;\nd1^d1\n")
    assert "repeated index" in err.value.message
    assert (err.value.line, err.value.col) == (2, 4)


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("n=2; cap=2; kind=multivector;\nd3\n", "out of range"),
        ("n=2; cap=2; kind=multivector;\nd1 + d1^d2\n", "tensor degree"),
        ("n=2; cap=2; kind=multivector;\nx1 d1 +\n", "unexpected end"),
        ("n=2; cap=2; kind=form; degree=1;\nd1\n", ""),
        ("n=2; cap=2; kind=widget;\n0\n", ""),
        ("n=2; kind=function;\nx1\n", ""),
    ],
)
def test_errors_carry_positions(text, fragment):
    with pytest.raises(ParseError) as err:
        parse_tensor(text)
    assert fragment in str(err.value)
    assert err.value.line >= 1


def test_zero_and_type2_formatting():
    assert format_tensor(euler_tensor(2, 2) * 0) == "0"
    P = type2_normal_form(3, 5, [[1, 0, 0], [0, -1, 0], [0, 0, 0]], 2)
    assert format_tensor(P) == "x3 d1^d2^d3 - x4 d1^d2^d4"


def test_map_documents():
    text = "n=2; cap=3; kind=map;\nx1 -> x1 + x2^2\nx2 -> x2\n"
    doc = parse_tensor(text)
    assert isinstance(doc.value, PolyMap)
    assert format_document(doc.value) == text


def test_comments_and_whitespace():
    a = parse_tensor("# header comment\nn=2;cap=2;kind=function;\n  x1*x2   # trailing\n").value
    b = parse_body("x1 x2", "function", 2, 2)
    assert a == b


@pytest.mark.parametrize("path", sorted(GOLDEN.glob("*.txt")), ids=lambda p: p.stem)
def test_golden_round_trip(path):
    text = path.read_text()
    try:
        doc = parse_tensor(text)
    except ParseError:
        assert path.stem == "repeated_index"
        return
    canon = format_document(doc.value)
    assert parse_tensor(canon).value == doc.value
    assert format_document(parse_tensor(canon).value) == canon


# round trip properties

kinds = st.sampled_from(["multivector", "form"])


@given(st.data())
def test_format_parse_identity_on_tensors(data):
    n = data.draw(st.integers(1, 5))
    k = data.draw(st.integers(0, n))
    T = data.draw(tensors(n, 4, k, kind=data.draw(kinds)))
    text = format_document(T)
    assert parse_tensor(text).value == T
    assert format_document(parse_tensor(text).value) == text


@given(st.integers(1, 4).flatmap(lambda n: polys(n, 4)))
def test_format_parse_identity_on_functions(f):
    assert parse_tensor(format_document(f)).value == f


@given(near_identity(3, 4))
def test_format_parse_identity_on_maps(phi):
    assert parse_tensor(format_document(phi)).value == phi
