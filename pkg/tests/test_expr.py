from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mlpgrade.expr import (
    ARITHMETIC_ONLY,
    FULL,
    BlankSolution,
    Const,
    Func,
    ParseError,
    Pow,
    Prod,
    RawSolution,
    Sum,
    Sym,
    canonicalize,
    key,
    parse,
    segment_to_canonical,
    to_text,
    tokenize_solution,
)
from conftest import DERIV_B, chain


def ckey(s, level=ARITHMETIC_ONLY):
    return canonicalize(parse(s), level).key


class TestTokenize:
    def test_three_chained_expressions(self):
        segs = tokenize_solution(RawSolution("x", chain(DERIV_B)))
        assert segs == DERIV_B

    def test_duplicates_retained(self):
        assert tokenize_solution(RawSolution("x", "x = x")) == ["x", "x"]

    def test_prose_stripped(self):
        assert tokenize_solution(RawSolution("x", "The answer is 2x-3.")) == ["2x-3"]

    def test_blank_raises(self):
        with pytest.raises(BlankSolution):
            tokenize_solution(RawSolution("x", "   "))
        with pytest.raises(BlankSolution):
            tokenize_solution(RawSolution("x", "no expressions whatsoever"))

    def test_comma_outside_parens_splits(self):
        assert tokenize_solution(RawSolution("x", "x+1, x+2")) == ["x+1", "x+2"]

    def test_comma_inside_brackets_kept(self):
        assert tokenize_solution(RawSolution("x", "f[a, b]")) == ["f[a, b]"]

    def test_lone_symbol_a_is_math(self):
        assert tokenize_solution(RawSolution("x", "a + b")) == ["a + b"]


class TestParse:
    def test_subtraction_rewritten(self):
        e = parse("2x-3")
        assert e == Sum(
            (
                Prod((Const(Fraction(2)), Sym("x"))),
                Prod((Const(Fraction(-1)), Const(Fraction(3)))),
            )
        )

    def test_power_tower_right_associative(self):
        assert parse("3^x^2") == Pow(Const(Fraction(3)), Pow(Sym("x"), Const(Fraction(2))))

    def test_sin_squared_sugar(self):
        assert parse("sin^2 x") == Pow(Func("sin", (Sym("x"),)), Const(Fraction(2)))

    def test_division_rewritten(self):
        assert parse("a/b") == Prod((Sym("a"), Pow(Sym("b"), Const(Fraction(-1)))))

    def test_bracket_indexing_is_application(self):
        assert parse("f[n]") == Func("f", (Sym("n"),))

    def test_implicit_binds_tighter_than_star(self):
        # 1/2x is 1/(2x), not (1/2)*x
        assert ckey("1/2x") == ckey("1/(2x)")
        assert ckey("1/2x") != ckey("x/2")

    def test_implicit_binds_looser_than_power(self):
        assert ckey("x^2y") == ckey("(x^2)*y")

    def test_parse_error_carries_offset(self):
        with pytest.raises(ParseError) as exc:
            parse("2x+*3")
        assert exc.value.offset == 3
        assert exc.value.expected

    def test_trailing_garbage(self):
        with pytest.raises(ParseError):
            parse("2x)")


class TestCanonicalize:
    def test_like_terms_collected(self):
        assert ckey("x^2+x^2") == ckey("2x^2")

    def test_exponential_bases_merged(self):
        assert ckey("e^x*x^2/e^(2x)") == ckey("x^2*e^(-x)")

    def test_pythagorean_identity_not_applied(self):
        before = ckey("sin^2 x+cos^2 x+x")
        assert before == ckey("x+cos^2 x+sin^2 x")
        assert before != ckey("1+x")

    def test_reciprocal_exponential(self):
        assert ckey("1/e^x") == ckey("e^(-x)")

    def test_constant_folding_exact(self):
        assert ckey("2/3+1/6") == "5/6"
        assert ckey("2^10") == "1024"
        assert ckey("0.5x") == ckey("x/2")

    def test_zero_one_identities(self):
        assert ckey("x^1") == "x"
        assert ckey("x^0") == "1"
        assert ckey("0*x") == "0"
        assert ckey("1*x") == "x"
        assert ckey("x+0") == "x"
        assert ckey("0^2") == "0"

    def test_zero_powers_left_symbolic(self):
        assert ckey("0^0") == "(^ 0 0)"
        e = canonicalize(parse("0^(-1)"))
        assert e.key.startswith("(^ 0 ")

    def test_full_expands(self):
        assert ckey("(x+1)^2", FULL) == ckey("x^2+2x+1", FULL)
        assert ckey("(x+1)(x-1)", FULL) == ckey("x^2-1", FULL)
        # ArithmeticOnly keeps the factored form distinct
        assert ckey("(x+1)^2") != ckey("x^2+2x+1")

    def test_opaque_fallback(self):
        c = segment_to_canonical("2x ++^ 3")
        assert c.key == '(opaque "2x ++^ 3")'
        assert segment_to_canonical("2x ++^ 3").key == c.key


# random expression trees for the property tests
_names = st.sampled_from(["x", "y", "z"])
_consts = st.integers(min_value=-4, max_value=4).map(lambda n: Const(Fraction(n)))


def _exprs():
    base = st.one_of(_consts, _names.map(Sym))
    return st.recursive(
        base,
        lambda inner: st.one_of(
            st.tuples(inner, inner).map(Sum),
            st.tuples(inner, inner).map(Prod),
            st.tuples(inner, st.integers(min_value=0, max_value=3)).map(
                lambda t: Pow(t[0], Const(Fraction(t[1])))
            ),
            st.tuples(st.sampled_from(["sin", "cos", "exp"]), inner).map(
                lambda t: Func(t[0], (t[1],))
            ),
        ),
        max_leaves=12,
    )


@settings(max_examples=150, deadline=None)
@given(_exprs())
def test_idempotence(e):
    c = canonicalize(e)
    assert canonicalize(c.expr).key == c.key


@settings(max_examples=150, deadline=None)
@given(_exprs(), _exprs(), st.randoms(use_true_random=False))
def test_operand_shuffle_invariance(a, b, rnd):
    ops = [a, b, a]
    shuffled = ops[:]
    rnd.shuffle(shuffled)
    assert canonicalize(Sum(tuple(ops))).key == canonicalize(Sum(tuple(shuffled))).key
    assert canonicalize(Prod(tuple(ops))).key == canonicalize(Prod(tuple(shuffled))).key


@settings(max_examples=150, deadline=None)
@given(_exprs())
def test_no_floats_in_keys(e):
    # exact rationals only: a decimal point can never appear in a key
    assert "." not in canonicalize(e).key


@settings(max_examples=150, deadline=None)
@given(_exprs())
def test_round_trip(e):
    c = canonicalize(e)
    assert canonicalize(parse(to_text(c.expr))).key == c.key


@settings(max_examples=100, deadline=None)
@given(_exprs())
def test_key_matches_structure(e):
    c = canonicalize(e)
    assert key(c.expr) == c.key
