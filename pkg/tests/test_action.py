from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hopf_conley.action import (ChiCutoff, F_lambda, action_gradient, action_value,
                                chi_eval, condition_a_certificate, condition_a_ratios,
                                discretization, gradient_norm, sharp_delta)
from hopf_conley.hamiltonian import counterexample_family, counterexample_spec, lift, small_spec, zero_spec
from hopf_conley.loop_space import FourierLoop, ProductPoint, rotate_phase


def _random_point(rng, K=4, lam=None, m=1, n=1):
    x = FourierLoop.random(rng, 2 * m, K, scale=0.3, decay=1.0).coeffs.copy()
    x[K] = rng.uniform(size=2 * m)
    y = FourierLoop.random(rng, 2 * n + 2, K, scale=0.5, decay=1.0)
    lam = rng.uniform(-0.5, 0.5) if lam is None else lam
    return ProductPoint(FourierLoop(x), y, lam)


# cutoff -------------------------------------------------------------------

def test_chi_reference_values():
    chi = ChiCutoff(0.1)
    assert chi.derivatives(0.0) == (0.0, 1.0, 0.0)
    assert chi.derivatives(-0.9) == (-0.5, 0.0, 0.0)
    assert chi.derivatives(0.9) == (0.5, 0.0, 0.0)
    assert chi_eval(chi, 0.2) == (0.2, 1.0)


def test_chi_rejects_bad_eps():
    with pytest.raises(ValueError):
        ChiCutoff(0.3)
    with pytest.raises(ValueError):
        ChiCutoff(0.0)


@pytest.mark.parametrize("eps", [0.02, 0.05, 0.2])
def test_chi_smooth_monotone_and_pinned(eps):
    chi = ChiCutoff(eps)
    lam = np.linspace(-0.8, 0.8, 20001)
    v, d1, d2 = chi.derivatives(lam)
    assert np.all(np.diff(v) >= -1e-15)
    # exp(-1/tau) underflows right at the ends, so stay a little inside
    inner = np.abs(lam) < 0.5 - 0.01 * eps
    assert np.all(d1[inner] > 0)
    mid = np.abs(lam) <= 0.5 - eps / 2
    assert np.array_equal(v[mid], lam[mid])
    assert np.all(v[lam <= -0.5] == -0.5) and np.all(v[lam >= 0.5] == 0.5)
    # derivatives agree with differences of the values
    h = lam[1] - lam[0]
    assert np.max(np.abs(np.gradient(v, h) - d1)[5:-5]) < 1e-2
    assert np.max(np.abs(np.gradient(d1, h) - d2)[5:-5]) < 0.5 / eps


# functional ---------------------------------------------------------------

def test_action_on_zero_hamiltonian_closed_form():
    H = lift(zero_spec())
    chi = ChiCutoff()
    K = 3
    y = FourierLoop.single_mode(2, [0.6, 0.0, 0.0, 0.0], K)
    p = ProductPoint(FourierLoop.constant([0.2, 0.3], K), y, 0.1)
    expected = np.pi * 2 * 0.36 + np.pi * (0.1 * 0.36 - 0.1)
    assert action_value(H, chi, p) == pytest.approx(expected, rel=1e-13)


def test_critical_manifold_of_zero_hamiltonian():
    H = lift(zero_spec())
    chi = ChiCutoff()
    p = ProductPoint(FourierLoop.constant([0.4, 0.7], 3),
                     FourierLoop.constant([0.6, 0.0, 0.0, 0.8], 3), 0.0)
    assert gradient_norm(H, chi, p) < 1e-14
    assert action_value(H, chi, p) == pytest.approx(0.0, abs=1e-15)


def test_y_zero_gives_lambda_gradient_minus_pi():
    H = lift(small_spec(0.2))
    chi = ChiCutoff()
    rng = np.random.default_rng(3)
    p = _random_point(rng, lam=-0.5)
    p = ProductPoint(p.x, FourierLoop.zeros(4, 4), -0.5)
    _, gy, glam = action_gradient(H, chi, p)
    assert glam == pytest.approx(-np.pi)
    assert np.all(gy.coeffs == 0)


def test_gradient_matches_finite_differences(rng):
    H = lift(small_spec(0.3))
    chi = ChiCutoff()
    disc = discretization(1, 1, 4)
    for lam in (-0.49, 0.0, 0.49):
        v = disc.vector(_random_point(rng, lam=lam))
        g = disc.gradient_l2(H, chi, v)
        fd = np.empty_like(g)
        for i in range(v.size):
            e = np.zeros_like(v)
            e[i] = 1e-6
            fd[i] = (disc.action(H, chi, v + e) - disc.action(H, chi, v - e)) / 2e-6
        assert np.linalg.norm(fd - g) <= 1e-6 * np.linalg.norm(g)


def test_hessian_matches_gradient_differences(rng):
    H = lift(small_spec(0.3))
    chi = ChiCutoff()
    disc = discretization(1, 1, 3)
    for lam in (-0.48, 0.1, 0.485):
        v = disc.vector(_random_point(rng, K=3, lam=lam))
        Hs = disc.hessian_l2(H, chi, v)
        fd = np.empty_like(Hs)
        for i in range(v.size):
            e = np.zeros_like(v)
            e[i] = 1e-6
            fd[:, i] = (disc.gradient_l2(H, chi, v + e) - disc.gradient_l2(H, chi, v - e)) / 2e-6
        assert np.allclose(Hs, Hs.T)
        assert np.linalg.norm(fd - Hs) <= 1e-6 * np.linalg.norm(Hs)


def test_F_lambda_of_counterexample_family():
    H = lift(counterexample_spec())
    p = counterexample_family(1, -0.6, max_mode=4)
    _, v = F_lambda(H, p)
    assert np.max(np.abs(v.coeffs)) < 1e-12


@given(st.integers(0, 2**32 - 1), st.floats(-0.5, 0.5))
def test_action_invariant_under_phase_and_shift(seed, theta):
    H = lift(small_spec(0.3))
    chi = ChiCutoff()
    p = _random_point(np.random.default_rng(seed), K=3)
    q = ProductPoint(p.x, rotate_phase(p.y, theta), p.lam).shifted([1.0, -3.0])
    assert action_value(H, chi, q) == pytest.approx(action_value(H, chi, p), abs=1e-11)
    assert gradient_norm(H, chi, q) == pytest.approx(gradient_norm(H, chi, p), abs=1e-10)


# certificate ----------------------------------------------------------------

def test_certificate_passes_for_small_hamiltonian():
    cert = condition_a_certificate(lift(small_spec(0.2)), 0.05, 500, seed=1, sharp=True)
    assert cert.verdict and cert.violations == 0
    assert cert.delta == pytest.approx(0.25, rel=1e-6)
    assert cert.empirical_min_ratio >= cert.delta
    assert cert.sharp_delta > cert.delta
    assert cert.to_dict()["verdict"] == "pass"


def test_certificate_fails_for_counterexample():
    cert = condition_a_certificate(lift(counterexample_spec()), 0.05, 200)
    assert not cert.verdict and cert.c >= np.pi / 2
    assert cert.to_dict()["verdict"] == "fail"


def test_ratios_do_not_depend_on_batching():
    H = lift(small_spec(0.3))
    a = condition_a_ratios(H, 0.05, 50, seed=4, batch=7)
    b = condition_a_ratios(H, 0.05, 50, seed=4, batch=64)
    assert np.allclose(a, b, rtol=1e-13)


def test_sharp_delta_threshold():
    thr = np.sqrt(np.pi / 2)
    assert sharp_delta(thr * 0.99, 0.01) > 0
    assert sharp_delta(thr * 1.01, 0.01) < 0
