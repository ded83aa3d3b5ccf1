import numpy as np
import pytest

from einlog.oracle import brute_einsum
from einlog.planner import PlanError, execute, plan
from einlog.tensor import EinsumSpec, einsum


def uniform_extents(spec, n):
    parsed = EinsumSpec.parse(spec) if isinstance(spec, str) else spec
    return {c: n for s in (*parsed.inputs, parsed.output) for c in s}


def random_inputs(spec, ext, seed=0):
    parsed = EinsumSpec.parse(spec) if isinstance(spec, str) else spec
    rng = np.random.default_rng(seed)
    return [rng.random(tuple(ext[c] for c in s)) for s in parsed.inputs]


def test_chain_three_operand_plan():
    n = 8
    p = plan("hk,kj,ji->i", uniform_extents("hk,kj,ji->i", n))
    assert len(p.steps) == 2
    assert p.max_intermediate_arity == 3
    assert p.total_cost == 2 * n**3
    # both steps stay within three active indices
    assert all(len({c for s in step.operand_subscripts for c in s}) == 3
               for step in p.steps)


def test_chain_cost_beats_naive():
    n = 16
    p = plan("ab,bc,cd->ad", uniform_extents("ab,bc,cd->ad", n))
    assert p.total_cost == 2 * n**3
    assert p.naive_cost == n**4
    assert p.reducible


def test_single_input_plan():
    p = plan("ab->a", {"a": 4, "b": 4})
    assert len(p.steps) == 1
    assert p.max_intermediate_arity == 2
    assert not p.reducible


def test_unit_clause_zero_cost():
    p = plan("->a", {"a": 5})
    assert p.steps == ()
    assert p.total_cost == 0.0
    out = execute(p, [])
    assert np.array_equal(out.data, np.ones(5))


@pytest.mark.parametrize("spec", ["a,ab->b", "abcd,bc,cd,ad->ac", "abc,bcd,cb,ad->ac"])
def test_irreducible_examples_fall_back_to_single_step(spec):
    ext = uniform_extents(spec, 4)
    p = plan(spec, ext)
    assert len(p.steps) == 1
    assert not p.reducible
    # M' equals the full index count for these
    assert p.max_intermediate_arity == len(ext)
    assert p.total_cost <= p.naive_cost


PLAN_SPECS = ["hk,kj,ji->i", "hk,kj,ji,h->i", "pi,qj,ijkl,rk,sl->pqrs",
              "a,ab->b", "abcd,bc,cd,ad->ac", "abc,bcd,cb,ad->ac",
              "ab,bc,cd->ad", "ab,bc->c", "aa,ab->b", "ab,cd->ac",
              "ab->ba", "a,a->a", "ab,b,bc->ac"]


@pytest.mark.parametrize("spec", PLAN_SPECS)
def test_execute_matches_brute_force(spec):
    ext = uniform_extents(spec, 3)
    p = plan(spec, ext)
    ins = random_inputs(spec, ext, seed=42)
    got = execute(p, ins).data
    want = brute_einsum(spec, ins, ext)
    assert np.allclose(got, want, atol=1e-10)
    direct = einsum(spec, ins, ext).data
    assert np.allclose(got, direct, atol=1e-10)


@pytest.mark.parametrize("spec", PLAN_SPECS)
def test_monotone_benefit(spec):
    for n in (1, 2, 5):
        ext = uniform_extents(spec, n)
        p = plan(spec, ext)
        assert p.total_cost <= p.naive_cost


def test_chain_execute_matches_direct_at_4():
    spec = "ab,bc,cd->ad"
    ext = uniform_extents(spec, 4)
    ins = random_inputs(spec, ext, seed=1)
    planned = execute(plan(spec, ext), ins).data
    direct = einsum(spec, ins).data
    assert np.max(np.abs(planned - direct)) <= 1e-10 * max(1.0, np.abs(direct).max())


def test_four_fold_plan_structure():
    # the 4-ary core absorbs the four rank-2 operands one at a time
    spec = "pi,qj,ijkl,rk,sl->pqrs"
    p = plan(spec, uniform_extents(spec, 4))
    assert len(p.steps) == 4
    folded = {s.operand_subscripts[0] for s in p.steps} | {s.operand_subscripts[1] for s in p.steps}
    assert {"pi", "qj", "rk", "sl"} <= folded
    assert p.max_result_arity() == 4
    assert p.steps[-1].result_subscript == "pqrs"


def test_plan_is_deterministic():
    spec = "ab,bc,cd,de->ae"
    ext = uniform_extents(spec, 6)
    a = plan(spec, ext)
    b = plan(spec, ext)
    assert a.steps == b.steps
    assert a.total_cost == b.total_cost


def test_greedy_path_beyond_exhaustive_bound():
    # 7 operands: falls back to greedy but must stay correct
    spec = "ab,bc,cd,de,ef,fg,gh->ah"
    ext = uniform_extents(spec, 3)
    p = plan(spec, ext)
    ins = random_inputs(spec, ext, seed=3)
    got = execute(p, ins).data
    want = brute_einsum(spec, ins, ext)
    assert np.allclose(got, want, atol=1e-10)
    assert p.total_cost <= p.naive_cost


def test_unknown_extent_rejected():
    with pytest.raises(PlanError, match="unknown extent"):
        plan("ab,bc->ac", {"a": 2, "b": 2})


def test_execute_rejects_wrong_shapes():
    p = plan("ab,bc->ac", {"a": 2, "b": 2, "c": 2})
    with pytest.raises(PlanError, match="shape"):
        execute(p, [np.ones((2, 3)), np.ones((3, 2))])
    with pytest.raises(PlanError, match="operands"):
        execute(p, [np.ones((2, 2))])


def test_describe_step_format():
    p = plan("ab,bc,cd->ad", uniform_extents("ab,bc,cd->ad", 8))
    text = p.describe()
    assert "cost=512" in text
    assert "M'=3" in text
    first = text.splitlines()[0]
    assert "->" in first and first.endswith("cost=512")
