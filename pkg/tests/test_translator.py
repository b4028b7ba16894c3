import math
import pathlib

import pytest
from hypothesis import given, settings

from blockverify import logic
from blockverify.model import SPECIFICATION, STRUCTURAL, Model, SignalType, flatten, set_param
from blockverify.modelfile import bundled_model
from blockverify.simulator import simulate
from blockverify.smt import SolverConfig, parse_values, run_solver
from blockverify.translator import (Bounded, EvaluationError, Goal, LogicTheory, Quantified,
                                    UnknownGoalError, emit_signal_query, emit_smtlib, emit_why3,
                                    evaluate_bounded, translate)
from conftest import needs_solver
from modelgen import models

GOLDEN = pathlib.Path(__file__).parent / "golden"


def firstorder(gain=0.9):
    return set_param(bundled_model("firstorder"), "x.gain", gain)


def test_firstorder_theory_shape():
    th = translate(firstorder())
    assert th.name == "M_firstorder"
    assert len(th.declarations) == 8 and len(th.clones) == 8
    assert sum(len(c.params) for c in th.clones if c.schema.name == "Gain_int") == 2
    [g] = th.goals
    assert logic.to_smt(g.formula) == (
        "(forall ((k Int)) (=> (>= k 1) (=> (= (not_zero_x_op1 k) true) (= (desc_grad_op1 k) true))))")
    assert {c.alias for c in th.clones} == {
        "Difference", "Vx", "Vx_old", "Neg", "X", "X_old", "Not_zero_x", "Desc_grad"}


def test_golden_why3():
    assert emit_why3(translate(firstorder())) == (GOLDEN / "firstorder.why").read_text()


def test_why3_literals():
    text = emit_why3(translate(firstorder()))
    assert "  axiom x_gain: X.gain = 0.900000\n" in text
    assert "  axiom neg_gain: Neg.gain = -.1.000000\n" in text
    assert "forall k: int. k >= 1 -> not_zero_x_op1 k = True -> desc_grad_op1 k = True" in text


def test_goal_over_all_integers():
    text = emit_why3(translate(firstorder(), time_from=None))
    assert "  goal G1 : forall k: int. not_zero_x_op1 k = True -> desc_grad_op1 k = True\n" in text


def test_empty_model_why3():
    assert emit_why3(translate(Model("m"))) == (
        "theory M_m\n use import int.Int\n use import real.RealInfix\n use import bool.Bool\nend\n")


def test_emit_is_deterministic():
    assert emit_why3(translate(firstorder())) == emit_why3(translate(firstorder()))


def test_three_requirements():
    th = translate(bundled_model("firstorder3"))
    assert [(g.name, g.pre, g.post) for g in th.goals] == [
        ("G1", "not_zero_x_op1", "desc_grad_op1"),
        ("G2", "not_zero_x_op1", "pos_v_op1"),
        ("G3", "zero_x_op1", "zero_v_op1"),
    ]


def test_no_require_no_goals():
    m = Model("m", 1.0, tuple(b for b in firstorder().blocks if b.id != "require"),
              tuple(c for c in firstorder().connections if c.dst.block != "require"))
    assert translate(m).goals == []


def test_unknown_goal():
    with pytest.raises(UnknownGoalError):
        emit_smtlib(translate(firstorder()), "G7")


def test_quantified_script():
    s = emit_smtlib(translate(firstorder()), "G1", Quantified())
    assert "(set-logic UFNIRA)" in s
    assert "(declare-fun x_op1 (Int) Real)" in s
    assert "(declare-fun not_zero_x_op1 (Int) Bool)" in s
    assert "(assert (not (forall ((k Int))" in s
    assert s.rstrip().endswith("(exit)")


def test_bounded_script():
    s = emit_smtlib(translate(firstorder()), "G1", Bounded(3, symbolic_init=False))
    assert "(set-logic QF_NRA)" in s
    assert "(declare-const x_op1@3 Real)" in s
    assert "(= x_old_op1@0 1.0)" in s
    sym = emit_smtlib(translate(firstorder()), "G1", Bounded(3, symbolic_init=True))
    assert "x_old_op1@0 1.0" not in sym


def test_signal_query_script():
    s = emit_signal_query(translate(firstorder()), "desc_grad_op1", 2)
    assert "(check-sat)" in s and "get-value" not in s


@settings(max_examples=60, deadline=None)
@given(models())
def test_translation_is_complete(m):
    th = translate(m)
    functional = [b for b in flatten(m).blocks if b.kind not in SPECIFICATION | STRUCTURAL]
    assert sorted(c.block_id for c in th.clones) == sorted(b.id for b in functional)
    assert len(th.declarations) == len(functional)
    for ax in th.axioms:
        assert logic.symbols(ax.formula) <= set(th.declarations)
    for g in th.goals:
        assert th.declarations[g.pre] is SignalType.BOOL and th.declarations[g.post] is SignalType.BOOL


def close(a, b):
    if isinstance(a, bool) or isinstance(b, bool):
        return bool(a) == bool(b)
    return math.isclose(float(a), float(b), rel_tol=1e-9, abs_tol=1e-9)


@settings(max_examples=60, deadline=None)
@given(models())
def test_evaluator_matches_simulator(m):
    depth = 10
    tr = simulate(m, depth)
    vals = evaluate_bounded(translate(m), depth)
    for name, series in vals.items():
        assert all(close(tr[name][k].item(), series[k]) for k in range(depth + 1)), name


def test_evaluator_with_initial_override():
    vals = evaluate_bounded(translate(firstorder()), 3, {"x_old_op1": 2.0})
    assert vals["x_op1"][:2] == pytest.approx([1.8, 1.62])


def test_evaluator_detects_contradiction():
    th = translate(firstorder())
    bad = LogicTheory(th.name, dict(th.declarations), th.clones,
                      th.axioms + [type(th.axioms[0])("bad", logic.Rel("=", logic.Sig("x_op1", logic.Time(None, 0)),
                                                                      logic.RealLit(5.0)))])
    with pytest.raises(EvaluationError):
        evaluate_bounded(bad, 2)


@needs_solver
def test_tautology_goal_is_valid():
    th = LogicTheory("M_t", {"p_op1": SignalType.BOOL}, goals=[Goal("G1", "p_op1", "p_op1")])
    assert run_solver(emit_smtlib(th, "G1", Quantified()), SolverConfig(timeout=30)).status == "unsat"


@needs_solver
@settings(max_examples=25, deadline=None)
@given(models())
def test_bounded_constants_match_simulator(m):
    depth = 10
    th = translate(m)
    out = run_solver(emit_smtlib(th, None, Bounded(depth, symbolic_init=False)), SolverConfig(timeout=60))
    assert out.status == "sat"
    vals = parse_values(out.stdout.split("\n", 1)[1])
    tr = simulate(m, depth)
    for name in th.declarations:
        for k in range(depth + 1):
            assert close(tr[name][k].item(), vals[logic.step_symbol(name, k)]), (name, k)
