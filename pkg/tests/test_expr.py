import math
from fractions import Fraction

import pytest

from ifsdim.expr import ExpressionError, compile_expr, parse_number


def test_rational_arithmetic_stays_exact():
    e = compile_expr("2**(i-1)/3**i")
    assert e(1) == Fraction(1, 3)
    assert e(3) == Fraction(4, 27)


def test_negative_exponent_and_functions():
    assert compile_expr("(n+2)*2**-n", ("n",))(2) == 1
    assert compile_expr("max(1, ceil(-log2(1-u)))", ("u",))(0.7) == 2
    assert compile_expr("sqrt(i)")(4) == 2.0


@pytest.mark.parametrize("src", ["__import__('os')", "i.real", "[i]", "i if i else 1", "foo(i)", "j+1"])
def test_rejects_unsafe_or_unknown(src):
    with pytest.raises(ExpressionError):
        compile_expr(src)


def test_parse_number():
    assert parse_number(3) == 3
    assert parse_number("2/3") == Fraction(2, 3)
    assert parse_number("inf") == math.inf
    assert parse_number(0.25) == 0.25
