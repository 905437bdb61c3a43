from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hopf_conley.hamiltonian import (HamiltonianSpec, HamiltonianTerm, NotHopfInvariantError,
                                     counterexample_family, counterexample_spec, eval_H,
                                     grad_H, hopf_height_form, is_hopf_invariant, lift,
                                     small_spec, smallness_constant, smallness_report,
                                     unit_form, zero_spec)
from hopf_conley.loop_space import rotate_pairs


def test_lift_rejects_non_invariant_form():
    form = np.diag([1.0, 0.0, 0.0, 0.0])
    spec = HamiltonianSpec(1, 1, (HamiltonianTerm(1.0, form, (1, 0)),))
    with pytest.raises(NotHopfInvariantError):
        lift(spec)


def test_invariant_forms_are_recognised():
    assert is_hopf_invariant(unit_form(2))
    assert is_hopf_invariant(hopf_height_form([1.0, -0.5]))
    assert not is_hopf_invariant(np.diag([1.0, 2.0, 0.0, 0.0]))


def test_term_rejects_bad_kind():
    with pytest.raises(ValueError):
        HamiltonianTerm(1.0, unit_form(1), (0, 0), kind="tan")


@given(st.integers(0, 2**32 - 1), st.floats(0.0, 1.0), st.floats(-3.0, 3.0))
def test_lift_is_phase_invariant(seed, t, theta):
    H = lift(small_spec(0.3, 1, 1))
    rng = np.random.default_rng(seed)
    x, y = rng.uniform(size=2), rng.standard_normal(4)
    assert eval_H(H, t, x, rotate_pairs(y, theta)) == pytest.approx(eval_H(H, t, x, y),
                                                                    abs=1e-12)


@given(st.integers(0, 2**32 - 1))
def test_lift_is_quadratic_and_periodic(seed):
    H = lift(small_spec(0.3, 1, 1))
    rng = np.random.default_rng(seed)
    t, x, y = rng.uniform(), rng.uniform(size=2), rng.standard_normal(4)
    base = eval_H(H, t, x, y)
    assert eval_H(H, t, x, 2.5 * y) == pytest.approx(6.25 * base, abs=1e-12)
    assert eval_H(H, t + 1.0, x + np.array([1.0, -2.0]), y) == pytest.approx(base, abs=1e-12)


def test_grad_matches_finite_differences(rng):
    H = lift(small_spec(0.35, 1, 2))
    t, x, y = 0.3, rng.uniform(size=2), rng.standard_normal(6)
    gx, gy = grad_H(H, t, x, y)
    h = 1e-6
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        fd = (eval_H(H, t, x + e, y) - eval_H(H, t, x - e, y)) / (2 * h)
        assert gx[i] == pytest.approx(fd, rel=1e-6, abs=1e-9)
    for i in range(6):
        e = np.zeros(6)
        e[i] = h
        fd = (eval_H(H, t, x, y + e) - eval_H(H, t, x, y - e)) / (2 * h)
        assert gy[i] == pytest.approx(fd, rel=1e-6, abs=1e-9)


def test_gradient_in_y_bounded_by_smallness(rng):
    H = lift(small_spec(0.25, 1, 1))
    c = smallness_constant(H)
    for _ in range(200):
        t, x, y = rng.uniform(), rng.uniform(size=2), rng.standard_normal(4)
        _, gy = grad_H(H, t, x, y)
        assert np.linalg.norm(gy) <= c * np.linalg.norm(y) * (1 + 1e-9)


def test_smallness_of_presets():
    assert smallness_constant(lift(zero_spec())) == 0.0
    assert smallness_constant(lift(small_spec(0.2))) == pytest.approx(0.2, rel=1e-6)
    assert smallness_constant(lift(counterexample_spec())) == pytest.approx(np.pi, rel=1e-6)


def test_smallness_report_margin_and_argmax():
    rep = smallness_report(lift(small_spec(0.2)))
    assert rep.c_with_margin == pytest.approx(0.22, rel=1e-6)
    assert rep.argmax_t == pytest.approx(0.25, abs=1e-3)


def test_scaled_spec_scales_smallness():
    H = lift(small_spec(0.3))
    assert smallness_constant(H.scaled(0.5)) == pytest.approx(0.15, rel=1e-6)


def test_counterexample_family_rejects_unreachable_lambda():
    with pytest.raises(ValueError):
        counterexample_family(2, 0.4)


def test_counterexample_family_is_unit_loop():
    p = counterexample_family(1, -0.7, max_mode=3)
    assert np.isclose(np.sum(p.y.coeffs**2), 1.0)
    assert np.isclose(np.sin(2 * np.pi * p.x[0][0]), 2 * (1 - 0.7))


def test_euler_identity_and_hopf_orthogonality(rng):
    from hopf_conley.loop_space import complex_structure

    H = lift(small_spec(0.3, 2, 2))
    J = complex_structure(6)
    for _ in range(200):
        t, x, y = rng.uniform(), rng.uniform(size=4), rng.standard_normal(6)
        _, gy = grad_H(H, t, x, y)
        assert gy @ y == pytest.approx(2 * eval_H(H, t, x, y), abs=1e-12)
        assert gy @ (J @ y) == pytest.approx(0.0, abs=1e-12)


def test_counterexample_values_and_gradients(rng):
    H = lift(counterexample_spec())
    assert eval_H(H, 0.3, [0.25, 0.0], [1.0, 0.0, 0.0, 0.0]) == pytest.approx(np.pi / 2)
    assert eval_H(H, 0.3, [0.7, 0.1], np.zeros(4)) == 0.0
    x, y = rng.uniform(size=2), rng.standard_normal(4)
    gx, gy = grad_H(H, 0.0, x, y)
    assert np.allclose(gy, np.pi * np.sin(2 * np.pi * x[0]) * y)
    assert gx[0] == pytest.approx(np.pi**2 * np.cos(2 * np.pi * x[0]) * (y @ y))
    assert gx[1] == 0.0


def test_zero_hamiltonian_is_identically_zero(rng):
    H = lift(zero_spec(1, 1))
    assert H.is_zero
    gx, gy = grad_H(H, 0.1, rng.uniform(size=2), rng.standard_normal(4))
    assert not gx.any() and not gy.any()
