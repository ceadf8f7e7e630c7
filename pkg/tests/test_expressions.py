import math
import random
from fractions import Fraction

import pytest

from ndde.errors import DomainError, NonDifferentiableError, ParseError
from ndde.expressions import Expression, differentiate, parse_expression, signed_power


def test_parse_basic_values():
    e = parse_expression("sin(t)/7")
    assert e(math.pi / 2) == pytest.approx(1 / 7, abs=1e-15)
    e = parse_expression("0.2*t")
    assert e(5.0) == pytest.approx(1.0)
    e = parse_expression("1/(t + 0.2)")
    assert e(0.0) == pytest.approx(5.0)


def test_parse_precedence_and_associativity():
    assert parse_expression("2 + 3 * 4")(0.0) == 14.0
    assert parse_expression("2 - 3 - 4")(0.0) == -5.0
    assert parse_expression("2 / 4 / 2")(0.0) == 0.25
    assert parse_expression("-2^2")(0.0) == -4.0  # unary minus binds looser than ^
    assert parse_expression("2^3^2")(0.0) == 512.0  # right associative
    assert parse_expression("2^-1")(0.0) == 0.5


def test_parse_scientific_notation():
    assert parse_expression("1e-3 + 2.5E2")(0.0) == pytest.approx(250.001)


def test_parse_errors_carry_offsets():
    with pytest.raises(ParseError) as err:
        parse_expression("t + $")
    assert err.value.offset == 4
    with pytest.raises(ParseError) as err:
        parse_expression("t + q")
    assert "unknown identifier 'q'" in str(err.value)
    with pytest.raises(ParseError):
        parse_expression("sin(t")
    with pytest.raises(ParseError):
        parse_expression("t + ")
    with pytest.raises(ParseError):
        parse_expression("foo(t)")
    with pytest.raises(ParseError):
        parse_expression("(t))")


def test_multivariable_expressions():
    f = parse_expression("x - y + t", variables=("t", "x", "y"))
    assert f(1.0, 10.0, 3.0) == 8.0
    with pytest.raises(ParseError):
        parse_expression("x + y")  # only t is declared by default


def test_sgnpow_parsing_and_fraction_kept():
    e = parse_expression("sgnpow(t, 1/3)")
    node = e.root
    assert node.exponent == Fraction(1, 3)
    assert e(-8.0) == pytest.approx(-2.0)
    assert e(0.512) == pytest.approx(0.8)
    with pytest.raises(ParseError):
        parse_expression("sgnpow(t, 0.5)")
    with pytest.raises(ParseError):
        parse_expression("sgnpow(t)")


def test_signed_power_values():
    assert signed_power(-8.0, Fraction(1, 3)) == pytest.approx(-2.0)
    assert signed_power(0.512, Fraction(1, 3)) == pytest.approx(
        math.exp(math.log(0.512) / 3)
    )
    assert signed_power(0.0, Fraction(1, 3)) == 0.0
    assert signed_power(4.0, 0.5) == pytest.approx(2.0)
    assert signed_power(-4.0, 0.5) == pytest.approx(-2.0)


def test_domain_errors():
    with pytest.raises(DomainError):
        parse_expression("1/t")(0.0)
    with pytest.raises(DomainError):
        parse_expression("ln(t)")(0.0)
    with pytest.raises(DomainError):
        parse_expression("ln(t)")(-1.0)
    with pytest.raises(DomainError):
        parse_expression("t^0.5")(-4.0)
    with pytest.raises(DomainError):
        parse_expression("t^-2")(0.0)
    with pytest.raises(DomainError):
        parse_expression("exp(t)")(1e9)  # overflow is an error, not inf
    # integer exponents accept negative bases
    assert parse_expression("t^2")(-3.0) == 9.0
    assert parse_expression("t^3")(-2.0) == -8.0


def test_interpreted_and_compiled_agree():
    rng = random.Random(7)
    texts = [
        "sin(t) * cos(t) - exp(-t)",
        "(t + 0.2)^2 / (t + 0.1)",
        "abs(t - 1) + sgnpow(t - 0.5, 1/3)",
        "ln(t + 2) * t^3 - 4",
        "0.1 / (t + 0.1)",
    ]
    for text in texts:
        e = parse_expression(text)
        fn = e.compiled()
        for _ in range(50):
            t = rng.uniform(0.0, 10.0)
            assert fn(t) == pytest.approx(e.evaluate(t=t), rel=1e-15, abs=1e-300)


def _random_node(rng: random.Random, depth: int) -> str:
    if depth == 0:
        return rng.choice(["t", str(rng.randint(1, 9)), repr(rng.uniform(0.1, 3.0))])
    kind = rng.randrange(8)
    a = _random_node(rng, depth - 1)
    b = _random_node(rng, depth - 1)
    if kind == 0:
        return f"({a} + {b})"
    if kind == 1:
        return f"({a} - {b})"
    if kind == 2:
        return f"({a} * {b})"
    if kind == 3:
        return f"({a} / ({b} + 4))"
    if kind == 4:
        return f"-({a})"
    if kind == 5:
        return f"sin({a})"
    if kind == 6:
        return f"({a} + 5)^{rng.randint(1, 3)}"
    return f"sgnpow({a}, {rng.choice(['1/3', '3/5', '1/5'])})"


def test_print_parse_round_trip_on_random_trees():
    rng = random.Random(123)
    for _ in range(200):
        e = parse_expression(_random_node(rng, rng.randint(1, 4)))
        text = str(e)
        again = parse_expression(text)
        assert again.root == e.root, f"round trip changed tree for {text!r}"
        assert str(again) == text


def test_round_trip_keeps_values():
    rng = random.Random(5)
    for _ in range(100):
        e = parse_expression(_random_node(rng, 3))
        again = parse_expression(str(e))
        for _ in range(10):
            t = rng.uniform(0.0, 5.0)
            try:
                v1 = e.evaluate(t=t)
            except DomainError:
                continue
            assert again.evaluate(t=t) == pytest.approx(v1, rel=1e-15, abs=1e-300)


def test_derivative_examples():
    d = differentiate(parse_expression("0.2*t"))
    assert d(3.0) == pytest.approx(0.2)
    d = differentiate(parse_expression("1/(t + 0.2)"))
    assert d(0.0) == pytest.approx(-25.0)
    d = differentiate(parse_expression("sin(t)/7"))
    assert d(0.0) == pytest.approx(1 / 7)


def test_derivative_against_finite_differences():
    rng = random.Random(17)
    texts = [
        "sin(t) * exp(-0.3*t)",
        "(t + 0.2)^3 / (t + 1)",
        "ln(t + 2) + cos(2*t)",
        "t^2 * sin(t) - t / (t + 3)",
        "exp(sin(t))",
        "(2*t + 1)^(1/2)",
    ]
    for text in texts:
        e = parse_expression(text)
        d = differentiate(e).compiled()
        for _ in range(25):
            t = rng.uniform(0.1, 4.0)
            h = 1e-6
            fd = (e(t + h) - e(t - h)) / (2 * h)
            assert d(t) == pytest.approx(fd, rel=5e-7, abs=5e-7)


def test_derivative_rejects_abs_and_sgnpow():
    with pytest.raises(NonDifferentiableError):
        differentiate(parse_expression("abs(t)"))
    with pytest.raises(NonDifferentiableError):
        differentiate(parse_expression("sgnpow(t, 1/3)"))


def test_derivative_of_unused_variable_is_zero():
    e = parse_expression("x^2", variables=("t", "x"))
    assert differentiate(e, "t").is_zero()


def test_substitute_composes():
    q = parse_expression("sin(t)/5.6")
    composed = q.substitute(t=parse_expression("t/0.8"))
    assert composed(0.8) == pytest.approx(math.sin(1.0) / 5.6)


def test_operator_building_matches_parsing():
    t = Expression.variable("t")
    built = (1 + t * t) / (t - 7) - (-t) ** 3
    for v in (2.5, 9.0):
        assert built(v) == pytest.approx((1 + v * v) / (v - 7) - (-v) ** 3)
    # printed form reparses to the identical tree
    assert parse_expression(str(built)).root == built.root


def test_simplify_folds_trivialities():
    e = parse_expression("0*t + 1*t + t^1 + 0")
    assert str(e.simplified()) == "t + t"
    assert parse_expression("2*3 + 1").simplified().root.value == 7.0


def test_evaluate_rejects_unbound_variable():
    e = parse_expression("x", variables=("x",))
    with pytest.raises(DomainError):
        e.evaluate(t=1.0)
