from __future__ import annotations

import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from hopf_conley.cohomology import (Generator, GradedAlgebra, GradedModule, IndexReport,
                                    cup_length, cup_length_closed_form, exterior_algebra,
                                    free_cyclic_module, hyperbolic_conley_index, index_report,
                                    model, product_model, projective_model,
                                    relative_cup_length, relative_cup_length_closed_form,
                                    restrict, sphere_model, suspend, tensor_product,
                                    theorem2_bound, torus_model, truncated_polynomial,
                                    zero_module)

STORED = ([f"torus {m}" for m in range(1, 4)] + [f"proj {n}" for n in range(0, 5)]
          + [f"sphere {d}" for d in range(1, 5)]
          + [f"product {m} {n}" for m in range(1, 4) for n in range(0, 5)])


def test_cup_length_examples():
    assert cup_length(truncated_polynomial("u", 2, 2)) == 2
    assert cup_length(exterior_algebra(["a1", "a2"])) == 2
    assert cup_length(GradedAlgebra([])) == 0


def test_algebra_relations():
    A = truncated_polynomial("u", 2, 2)
    u = A.generator("u")
    assert A.multiply(u, u) == frozenset([(2,)])
    assert A.multiply(A.multiply(u, u), u) == frozenset()
    E = exterior_algebra(["a", "b"])
    a, b = E.generator("a"), E.generator("b")
    assert E.multiply(a, a) == frozenset()
    assert E.multiply(a, b) == E.multiply(b, a)
    assert E.add(a, a) == frozenset()


def test_top_degree_truncation():
    A = GradedAlgebra([Generator("u", 2, 5)], top_degree=6)
    assert cup_length(A) == 3
    with pytest.raises(ValueError):
        cup_length_closed_form(A)


def test_generator_validation():
    with pytest.raises(ValueError):
        Generator("z", 0)
    with pytest.raises(ValueError):
        GradedAlgebra([Generator("a", 1), Generator("a", 2)])


@pytest.mark.parametrize("name", STORED)
def test_stored_models_consistent(name):
    M = model(name)
    M.validate()
    rcl = relative_cup_length(M)
    assert rcl == relative_cup_length_closed_form(M)
    assert cup_length(M.algebra) >= rcl - 1
    assert cup_length(M.algebra) == cup_length_closed_form(M.algebra)


def test_closed_form_values():
    for m in range(1, 4):
        assert relative_cup_length(torus_model(m)) == 2 * m + 1
    for n in range(0, 5):
        assert relative_cup_length(projective_model(n)) == n + 1
    for m, n in itertools.product(range(1, 4), range(0, 5)):
        assert relative_cup_length(product_model(m, n)) == 2 * m + n + 1


def test_zero_and_sphere_models():
    assert relative_cup_length(model("zero")) == 0
    assert relative_cup_length(sphere_model(3)) == 1
    S = tensor_product(sphere_model(2), sphere_model(5))
    assert relative_cup_length(S) == 1
    Z = tensor_product(torus_model(1), zero_module(exterior_algebra(["b"])))
    assert Z.is_zero and relative_cup_length(Z) == 0


def test_tensor_rule_on_torus_and_projective():
    M = tensor_product(torus_model(1), projective_model(1))
    assert relative_cup_length(M) == 4
    assert M.rcl_closed_form == 4


@pytest.mark.parametrize("name", ["torus 2", "sphere 3", "product 1 2", "proj 3"])
@pytest.mark.parametrize("N", [0, 1, 4, 10])
def test_suspension_invariance(name, N):
    M = model(name)
    S = suspend(M, N)
    assert relative_cup_length(S) == relative_cup_length(M)
    assert min(S.degrees()) == min(M.degrees()) + N
    S.validate()


def test_suspend_rejects_negative():
    with pytest.raises(ValueError):
        suspend(torus_model(1), -1)


@pytest.mark.parametrize("keep", [["a1"], ["a1", "a3"], ["a2", "a3", "a4"]])
def test_restriction_never_increases_rcl(keep):
    M = torus_model(2)
    assert relative_cup_length(restrict(M, keep)) <= relative_cup_length(M)
    assert relative_cup_length(restrict(M, keep)) == len(keep) + 1


def test_validate_catches_broken_relation():
    A = truncated_polynomial("u", 2, 1)
    M = GradedModule(A, [("e0", 0), ("e1", 2), ("e2", 4)],
                     [[frozenset([1]), frozenset([2]), frozenset()]])
    with pytest.raises(ValueError):
        M.validate()


def test_validate_catches_bad_grading():
    A = exterior_algebra(["a"])
    M = GradedModule(A, [("e0", 0), ("e1", 3)], [[frozenset([1]), frozenset()]])
    with pytest.raises(ValueError):
        M.validate()


def test_module_action_of_algebra_element():
    A = exterior_algebra(["a", "b"])
    M = free_cyclic_module(A)
    ab = A.multiply(A.generator("a"), A.generator("b"))
    assert M.act(ab, frozenset([0])) == frozenset([3])


def test_hyperbolic_index_examples():
    assert hyperbolic_conley_index([-1, -1, -1]).ranks == {0: 1}
    assert hyperbolic_conley_index([1, -1]).ranks == {1: 1}
    rep = hyperbolic_conley_index([1] * 4)
    assert rep.ranks == {4: 1} and rep.rcl == 1 and rep.lower_bound == 1
    with pytest.raises(ValueError):
        hyperbolic_conley_index([1, 0])


@given(st.lists(st.sampled_from([1, -1]), max_size=6))
def test_hyperbolic_index_degree_is_positive_count(signs):
    rep = hyperbolic_conley_index(signs)
    assert rep.ranks == {signs.count(1): 1}


def test_bound_and_reports():
    assert theorem2_bound("product 1 1") == 4
    assert theorem2_bound(sphere_model(2)) == 1
    assert theorem2_bound("zero") == 0
    rep = index_report(product_model(1, 1))
    assert isinstance(rep, IndexReport)
    assert rep.ranks == {0: 1, 1: 2, 2: 2, 3: 2, 4: 1}
    assert rep.to_dict()["rcl"] == 4


@pytest.mark.parametrize("bad", ["", "torus", "torus x", "cube 3", "sphere 0", "torus -1"])
def test_model_name_errors(bad):
    with pytest.raises(ValueError):
        model(bad)
