import pytest
from hypothesis import given, settings

from blockverify import logic
from blockverify.library import (BindingError, UnsupportedBlockError, all_schemas, block_theory,
                                 instantiate, library_why3, product_schema, schema_params,
                                 schema_why3)
from blockverify.logic import params_of, symbols
from blockverify.model import SignalType, make_block
from blockverify.simulator import simulate
from blockverify.smt import SolverConfig, run_solver
from blockverify.translator import translate
from conftest import needs_solver
from modelgen import models

PRODUCT_TEXT = """\
theory Product_int
 use import int.Int
 use import real.RealInfix

 function in1 int: real
 function in2 int: real
 function out1 int: real

 axiom v: forall k:int. out1 k = in1 k *. in2 k
 axiom c1: forall k:int. in1 k >. 0.0 /\\ in2 k >. 0.0 -> out1 k >. 0.0
 axiom c2: forall k:int. in1 k <. 0.0 /\\ in2 k <. 0.0 -> out1 k >. 0.0
end
"""

NEQ_TEXT = """\
theory CompareToZero_neq_int
 use import int.Int
 use import real.RealInfix
 use import bool.Bool

 function in1 int: real
 function out1 int: bool

 axiom v1: forall k:int. out1 k = True -> in1 k <>. 0.0
 axiom v2: forall k:int. out1 k = False -> in1 k = 0.0
end
"""


def test_product_text():
    assert schema_why3(block_theory(make_block("p", "Product"))) == PRODUCT_TEXT


def test_compare_to_zero_neq_text():
    assert schema_why3(block_theory(make_block("c", "CompareToZero", relation="~="))) == NEQ_TEXT


def test_gain_parameter():
    b = make_block("x", "Gain", gain=0.9)
    s = block_theory(b)
    assert s.name == "Gain_int" and s.parameters == ("gain",)
    assert schema_params(s, b) == {"gain": 0.9}


@pytest.mark.parametrize("kind,params,name", [
    ("Sum", {"signs": "++"}, "Sum_int"),
    ("Sum", {"signs": "+-+"}, "Sum_pmp_int"),
    ("UnitDelay", {"initial": 0.0}, "UnitDelay_int"),
    ("Constant", {"value": 1.0}, "Constant_int"),
    ("CompareToZero", {"relation": "<"}, "CompareToZero_l_int"),
    ("CompareToConstant", {"relation": ">=", "constant": 2.0}, "CompareToConstant_geq_int"),
    ("Logical", {"op": "AND"}, "Logical_and_int"),
    ("Logical", {"op": "OR", "arity": 3}, "Logical_or3_int"),
    ("Logical", {"op": "NOT"}, "Logical_not_int"),
])
def test_schema_names(kind, params, name):
    assert block_theory(make_block("b", kind, **params)).name == name


@pytest.mark.parametrize("kind", ["Require", "Assert"])
def test_unsupported(kind):
    with pytest.raises(UnsupportedBlockError):
        block_theory(make_block("b", kind))


def test_schemas_are_closed():
    for s in all_schemas():
        slots = {n for n, _ in s.slots}
        for ax in s.axioms:
            assert symbols(ax.formula) <= slots
            assert params_of(ax.formula) <= set(s.parameters)


def test_instantiate_product():
    [v, c1, c2] = instantiate(product_schema(), "Vx", {"in1": "x_op1", "in2": "x_op1", "out1": "vx_op1"}, {})
    assert v.name == "Vx_v"
    assert logic.to_smt(v.formula) == "(forall ((k Int)) (= (vx_op1 k) (* (x_op1 k) (x_op1 k))))"


def test_instantiate_gain():
    b = make_block("neg", "Gain", gain=-1.0)
    [v] = instantiate(block_theory(b), "Neg", {"in1": "vx_old_op1", "out1": "neg_op1"}, schema_params(block_theory(b), b))
    assert logic.to_smt(v.formula) == "(forall ((k Int)) (= (neg_op1 k) (* (- 1.0) (vx_old_op1 k))))"


def test_instantiate_unit_delay_zero_initial():
    b = make_block("d", "UnitDelay", initial=0.0)
    s = block_theory(b)
    v, init = instantiate(s, "D", {"in1": "u_op1", "out1": "d_op1"}, schema_params(s, b))
    assert logic.to_smt(init.formula) == "(= (d_op1 0) 0.0)"
    assert init.initial and not v.initial
    assert logic.to_smt(v.formula) == "(forall ((k Int)) (=> (>= k 1) (= (d_op1 k) (u_op1 (- k 1)))))"


def test_instantiate_errors():
    s = product_schema()
    with pytest.raises(BindingError, match="in2"):
        instantiate(s, "P", {"in1": "a", "out1": "b"}, {})
    with pytest.raises(BindingError, match="gain"):
        instantiate(block_theory(make_block("g", "Gain", gain=1.0)), "G", {"in1": "a", "out1": "b"}, {})
    with pytest.raises(BindingError, match="bool"):
        instantiate(s, "P", {"in1": "a", "in2": "a", "out1": "b"}, {},
                    {"a": SignalType.BOOL, "b": SignalType.REAL})


def test_library_text_has_every_schema():
    text = library_why3()
    for s in all_schemas():
        assert f"theory {s.name}\n" in text


@settings(max_examples=80, deadline=None)
@given(models())
def test_axioms_hold_on_simulated_traces(m):
    steps = 12
    tr = simulate(m, steps)
    th = translate(m)
    for ax in th.axioms:
        assert logic.evaluate(ax.formula, lambda n, k: tr[n][k].item(), None, steps), ax.name


@needs_solver
@pytest.mark.parametrize("axiom", ["c1", "c2"])
def test_sign_axioms_are_implied(axiom):
    s = product_schema()
    ax = {a.name: a.formula for a in s.axioms}
    script = "\n".join([
        "(set-logic UFNIRA)",
        "(declare-fun in1 (Int) Real)", "(declare-fun in2 (Int) Real)", "(declare-fun out1 (Int) Real)",
        f"(assert {logic.to_smt(ax['v'])})",
        f"(assert (not {logic.to_smt(ax[axiom])}))",
        "(check-sat)",
    ])
    assert run_solver(script, SolverConfig(timeout=30)).status == "unsat"
