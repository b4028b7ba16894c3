import pytest
from hypothesis import given, settings

from blockverify.graph import (AlgebraicLoopError, RequirementTypeError, build_dataflow,
                               extract_requirements, name_signals, signal_name)
from blockverify.model import BlockKind, Model, Port, conn, make_block
from blockverify.modelfile import bundled_model
from modelgen import models


def forward_edges_ok(model, order):
    pos = {b: i for i, b in enumerate(order)}
    blocks = model.block_map()
    return all(pos[c.src.block] < pos[c.dst.block] for c in model.connections
               if blocks[c.src.block].kind is not BlockKind.UNIT_DELAY)


def test_firstorder_order():
    m = bundled_model("firstorder")
    g = build_dataflow(m)
    order = list(g.eval_order)
    assert order.index("x") < order.index("vx") < order.index("difference")
    assert forward_edges_ok(m, order)
    # x_old's output is available from the delay state, so the gain it feeds
    # can come first; the delay itself is placed after its input
    assert order.index("x") < order.index("x_old")


def test_single_constant():
    m = Model("m", 1.0, (make_block("c", "Constant", value=1.0),))
    assert list(build_dataflow(m).eval_order) == ["c"]


def test_self_loop_is_algebraic():
    m = Model("m", 1.0, (make_block("g", "Gain", gain=1.0),), (conn("g/1", "g/1"),))
    with pytest.raises(AlgebraicLoopError) as err:
        build_dataflow(m)
    assert err.value.cycle == ["g"]


def test_loop_through_delay_is_fine():
    m = Model("m", 1.0, (make_block("d", "UnitDelay", initial=0.0), make_block("g", "Gain", gain=1.0)),
              (conn("d/1", "g/1"), conn("g/1", "d/1")))
    assert sorted(build_dataflow(m).eval_order) == ["d", "g"]


def test_two_block_algebraic_loop():
    m = Model("m", 1.0, (make_block("a", "Gain", gain=1.0), make_block("b", "Gain", gain=1.0)),
              (conn("a/1", "b/1"), conn("b/1", "a/1")))
    with pytest.raises(AlgebraicLoopError) as err:
        build_dataflow(m)
    assert sorted(err.value.cycle) == ["a", "b"]


def test_pred_succ_consistent():
    m = bundled_model("firstorder")
    g = build_dataflow(m)
    for dst, src in g.pred.items():
        assert dst in g.succ[src]
    assert sum(len(v) for v in g.succ.values()) == len(g.pred) == len(m.connections)


def test_signal_names():
    names = name_signals(bundled_model("firstorder"))
    assert names[Port("difference", 1)] == "difference_op1"
    assert names[Port("vx_old", 1)] == "vx_old_op1"
    assert names[Port("not_zero_x", 1)] == "not_zero_x_op1"
    assert signal_name("a", 2) == "a_op2"
    assert len(names) == 8


def test_requirements_firstorder():
    [r] = extract_requirements(bundled_model("firstorder"))
    assert (r.goal_name, r.pre, r.post, r.source_block) == ("G1", "not_zero_x_op1", "desc_grad_op1", "require")


def test_requirements_three():
    reqs = extract_requirements(bundled_model("firstorder3"))
    assert [(r.goal_name, r.source_block) for r in reqs] == [
        ("G1", "require"), ("G2", "require1"), ("G3", "require2")]


def test_no_requirements():
    assert extract_requirements(Model("m", 1.0, (make_block("c", "Constant", value=1.0),))) == []


def test_real_into_require_is_type_error():
    m = Model("m", 1.0, (make_block("c", "Constant", value=1.0), make_block("r", "Require")),
              (conn("c/1", "r/1"), conn("c/1", "r/2")))
    with pytest.raises(RequirementTypeError):
        extract_requirements(m)


@settings(max_examples=100, deadline=None)
@given(models())
def test_eval_order_properties(m):
    g = build_dataflow(m)
    assert sorted(g.eval_order) == sorted(b.id for b in m.blocks)
    assert forward_edges_ok(m, g.eval_order)
    names = name_signals(m)
    assert len(set(names.values())) == len(names)
    assert all(n == n.lower() for n in names.values())
    n_req = sum(b.kind is BlockKind.REQUIRE for b in m.blocks)
    assert len(extract_requirements(m)) == n_req
