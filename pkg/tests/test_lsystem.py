import math
from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from forestgen.config import RngStream
from forestgen.lsystem import (EvaluationError, GrammarSyntaxError, LModule, LSystemError, derive,
                               derive_step, eval_expr, match_context, modules_to_string, parse_expr,
                               parse_lsystem, parse_modules, twig_lsystem)

from conftest import FixedRng

D22 = math.radians(22.5)
D137 = math.radians(137.5)


def M(symbol, *params):
    return LModule(symbol, tuple(float(p) for p in params))


def assert_modules_equal(got, want, tol=1e-12):
    assert [m.symbol for m in got] == [m.symbol for m in want]
    for g, w in zip(got, want):
        assert len(g.params) == len(w.params)
        for a, b in zip(g.params, w.params):
            assert a == pytest.approx(b, abs=tol)


def p1(l, w):
    return [M("!", w), M("F", l), M("["), M("&", D22), M("B", 0.6 * l, 0.707 * w), M("]"),
            M("/", D137), M("A", 0.9 * l, 0.707 * w)]


def p3(l, w):
    return [M("!", w), M("F", l), M("["), M("+", -D22), M("$"), M("A", 0.9 * l, 0.707 * w), M("]")]


def test_twig_grammar_structure():
    defn = twig_lsystem()
    assert [p.probability for p in defn.productions] == [0.4, 0.6, 0.3, 0.7]
    assert [p.predecessor.symbol for p in defn.productions] == ["A", "A", "B", "B"]
    assert_modules_equal(defn.axiom, [M("!", 2), M("A", 10, 1)])


def test_zero_iterations_returns_axiom():
    assert modules_to_string(derive(twig_lsystem(), 0, RngStream(1))) == modules_to_string(twig_lsystem().axiom)


def test_forced_second_production():
    # u = 0.5 falls past p1's 0.4 and inside p2
    got = derive(twig_lsystem(), 1, FixedRng(0.5))
    assert_modules_equal(got, [M("!", 2), M("!", 1), M("F", 10), M("A", 9, 0.707)])


def test_forced_three_step_derivation():
    # u = 0 always picks the first alternative: p1 for A, p3 for B
    w1, w2, w3 = 0.707, 0.707 ** 2, 0.707 ** 3
    step1 = [M("!", 2)] + p1(10, 1)
    assert_modules_equal(derive(twig_lsystem(), 1, FixedRng(0.0)), step1)
    # step 2 rewrites B(6, .707) with p3 and A(9, .707) with p1
    step2 = ([M("!", 2), M("!", 1), M("F", 10), M("["), M("&", D22)] + p3(6, w1)
             + [M("]"), M("/", D137)] + p1(9, w1))
    assert_modules_equal(derive(twig_lsystem(), 2, FixedRng(0.0)), step2)
    step3 = ([M("!", 2), M("!", 1), M("F", 10), M("["), M("&", D22),
              M("!", w1), M("F", 6), M("["), M("+", -D22), M("$")] + p1(5.4, w2)
             + [M("]"), M("]"), M("/", D137),
                M("!", w1), M("F", 9), M("["), M("&", D22)] + p3(5.4, w2)
             + [M("]"), M("/", D137)] + p1(8.1, w2))
    got = derive(twig_lsystem(), 3, FixedRng(0.0))
    assert_modules_equal(got, step3)
    assert w3 == pytest.approx(0.353393243)


def test_rule_selection_frequencies():
    defn = twig_lsystem()
    rng = RngStream(2024).fork("frequencies")
    counts = Counter()
    n = 100_000
    axiom = [M("A", 1, 1), M("B", 1, 1)]
    for _ in range(n):
        out = derive_step(defn, axiom, rng)
        # p1 emits a bracket before the B rewrite, p2 does not
        counts["p1" if out[2].symbol == "[" else "p2"] += 1
        b_start = next(i for i in range(3, len(out)) if out[i].symbol == "!" and _depth(out, i) == 0)
        counts["p3" if len(out) - b_start > 2 else "p4"] += 1
    assert counts["p1"] / n == pytest.approx(0.4, abs=0.01)
    assert counts["p2"] / n == pytest.approx(0.6, abs=0.01)
    assert counts["p3"] / n == pytest.approx(0.3, abs=0.01)
    assert counts["p4"] / n == pytest.approx(0.7, abs=0.01)


def _depth(mods, i):
    d = 0
    for m in mods[:i]:
        d += (m.symbol == "[") - (m.symbol == "]")
    return d


def test_identity_grammar():
    defn = parse_lsystem("axiom: A\nA -> A\n")
    assert len(defn.productions) == 1
    assert modules_to_string(derive(defn, 5, RngStream(0))) == "A"


def test_lone_partial_probability_rejected():
    with pytest.raises(LSystemError, match="sum"):
        parse_lsystem("axiom: A\nA -> B : 0.5\n")


def test_syntax_error_has_position():
    with pytest.raises(GrammarSyntaxError) as info:
        parse_lsystem("axiom: A\nA -> B(\n")
    assert info.value.line == 2


def test_unbalanced_successor_rejected():
    with pytest.raises(LSystemError, match="bracket"):
        parse_lsystem("axiom: A\nA -> B[C\n")


def test_division_by_zero_names_production():
    defn = parse_lsystem("axiom: A(0)\ngrow: A(x) -> A(1/x)\n")
    with pytest.raises(EvaluationError, match="grow"):
        derive(defn, 1, RngStream(0))


def _production(text):
    return parse_lsystem("axiom: A\n" + text + "\n").productions[0]


def test_left_context_skips_bracketed_branch():
    s = parse_modules("A[B]C")
    assert match_context(s, 4, _production("A < C -> C")) == {}
    assert match_context(s, 4, _production("B < C -> C")) is None


def test_context_free_match_binds_parameters():
    s = parse_modules("X(3,4)")
    assert match_context(s, 0, _production("X(a,b) -> X(a+b)")) == {"a": 3.0, "b": 4.0}


def test_right_context_bracket_rule():
    s = parse_modules("A[B]C")
    # a bracket in the pattern descends into the branch, otherwise it is skipped
    assert match_context(s, 0, _production("A > [B]C -> A")) == {}
    assert match_context(s, 0, _production("A > C -> A")) == {}
    assert match_context(s, 0, _production("A > B -> A")) is None


def test_contextual_rule_wins_over_context_free():
    defn = parse_lsystem("axiom: B A\nA -> X\nB < A -> Y\n")
    assert modules_to_string(derive(defn, 1, RngStream(0))) == "BY"


def test_parallel_rewrite_uses_pre_step_string():
    # A becomes B and B < B fires only on the old string, so no cascade
    defn = parse_lsystem("axiom: A B\nA -> B\nB < B -> C\n")
    assert modules_to_string(derive(defn, 1, RngStream(0))) == "BB"


def test_conditions_select_rules():
    defn = parse_lsystem("axiom: A(1) A(5)\nA(x) : x < 3 -> S\nA(x) : x >= 3 -> L\n")
    assert modules_to_string(derive(defn, 1, RngStream(0))) == "SL"


@pytest.mark.parametrize("expr, bindings, want", [
    ("0.9 * l", {"l": 10}, 9.0),
    ("0.6 * l", {"l": 10}, 6.0),
    ("x - x", {"x": 123.25}, 0.0),
    ("-a + 2 * (b - 1)", {"a": 1, "b": 3}, 3.0),
    ("a >= 2", {"a": 2}, 1.0),
    ("a < 2", {"a": 2}, 0.0),
])
def test_eval_expr(expr, bindings, want):
    assert eval_expr(parse_expr(expr), bindings) == pytest.approx(want)


def test_eval_expr_uses_constants_and_rejects_unbound():
    assert eval_expr(parse_expr("k * 2"), {}, {"k": 1.5}) == 3.0
    with pytest.raises(EvaluationError):
        eval_expr(parse_expr("q"), {})
    with pytest.raises(EvaluationError):
        eval_expr(parse_expr("1 / (a - a)"), {"a": 2})


def test_seeded_derivation_is_reproducible():
    a = derive(twig_lsystem(), 6, RngStream(5).fork("twig"))
    b = derive(twig_lsystem(), 6, RngStream(5).fork("twig"))
    assert a == b


def test_deterministic_grammar_ignores_rng():
    defn = parse_lsystem("axiom: A(1)\nA(x) -> F(x)[+(30deg)A(x/2)]A(x/2)\n")
    assert derive(defn, 4, RngStream(1)) == derive(defn, 4, RngStream(99))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 6))
def test_brackets_stay_balanced(seed, n):
    depth = 0
    for m in derive(twig_lsystem(), n, RngStream(seed)):
        depth += (m.symbol == "[") - (m.symbol == "]")
        assert depth >= 0
    assert depth == 0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 5))
def test_derive_is_iterated_single_steps(seed, n):
    defn = twig_lsystem()
    full = derive(defn, n, RngStream(seed))
    rng = RngStream(seed)
    s = list(defn.axiom)
    for _ in range(n):
        s = derive_step(defn, s, rng)
    assert s == full
