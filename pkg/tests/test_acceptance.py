"""Acceptance suite: nine desk-scale criteria at their stated tolerances.

Each test records a PASS/FAIL line (printed in the terminal summary) and then
asserts, so a failing criterion shows up in both places.
"""
from __future__ import annotations

import itertools

import numpy as np
import pytest

from hopf_conley.action import (ChiCutoff, F_lambda, action_gradient, action_value,
                                condition_a_certificate, condition_a_ratios)
from hopf_conley.cli import RunConfig, run_pipeline
from hopf_conley.cohomology import (cup_length, cup_length_closed_form,
                                    hyperbolic_conley_index, model, relative_cup_length,
                                    relative_cup_length_closed_form, suspend, theorem2_bound)
from hopf_conley.dynamics import (TruncationLevel, find_families, multistart_starts,
                                  quotient_distance, solve_critical)
from hopf_conley.hamiltonian import (counterexample_family, counterexample_spec, grad_H, lift,
                                     small_spec, zero_spec)
from hopf_conley.loop_space import (FourierLoop, ProductPoint, apply_jstar, apply_L,
                                    complex_structure, eval_loop, h_half_inner,
                                    h_half_weights, l2_inner, neg_J_ddt)

pytestmark = pytest.mark.acceptance


def test_criterion_1_operator_identities(record_criterion):
    rng = np.random.default_rng(1)
    worst_ulps, worst_adj, symbol_exact = 0.0, 0.0, True
    for K in range(1, 17):
        k = np.arange(-K, K + 1)
        symbol_exact &= bool(np.array_equal(2 * np.pi * k / h_half_weights(K), np.sign(k) * 1.0))
    for _ in range(1000):
        d = 2 * int(rng.integers(1, 4))
        K = int(rng.integers(0, 17))
        u = FourierLoop.random(rng, d, K, scale=rng.uniform(0.1, 10.0))
        v = FourierLoop.random(rng, d, K)
        a, b = apply_jstar(neg_J_ddt(u)).coeffs, apply_L(u).coeffs
        nz = b != 0
        if nz.any():
            worst_ulps = max(worst_ulps, float(np.max(np.abs(a - b)[nz] / np.spacing(np.abs(b[nz])))))
        assert np.all(a[~nz] == 0)
        lhs, rhs = h_half_inner(apply_jstar(u), v), l2_inner(u, v)
        worst_adj = max(worst_adj, abs(lhs - rhs) / max(1.0, abs(rhs)))
    ok = symbol_exact and worst_ulps <= 2.0 and worst_adj <= 1e-12
    record_criterion(1, ok, f"symbol exact={symbol_exact}, applied within {worst_ulps:.0f} ulp, "
                            f"adjointness error {worst_adj:.1e}")
    assert ok


def test_criterion_2_gradient_vs_finite_differences(record_criterion):
    H = lift(small_spec(0.3))
    chi = ChiCutoff(0.05)
    K, h = 8, 1e-6
    rng = np.random.default_rng(2)
    w = h_half_weights(K)
    regions = [(-0.5 + 1e-3, -0.5 + 0.025 - 1e-3), (-0.47, 0.47), (0.5 - 0.025 + 1e-3, 0.5 - 1e-3)]
    worst = 0.0
    for i in range(100):
        lo, hi = regions[i % 3]
        x = FourierLoop.random(rng, 2, K, scale=0.3, decay=1.0).coeffs.copy()
        x[K] = rng.uniform(size=2)
        y = FourierLoop.random(rng, 4, K, scale=0.5, decay=1.0)
        p = ProductPoint(FourierLoop(x), y, rng.uniform(lo, hi))
        gx, gy, gl = action_gradient(H, chi, p)
        # H^{1/2} gradient -> Euclidean partial derivatives
        grad = np.concatenate([(w[:, None] * gx.coeffs).ravel(),
                               (w[:, None] * gy.coeffs).ravel(), [gl]])
        v = p.to_vector()
        fd = np.empty_like(v)
        for j in range(v.size):
            e = np.zeros_like(v)
            e[j] = h
            fd[j] = (action_value(H, chi, ProductPoint.from_vector(v + e, 1, 1, K))
                     - action_value(H, chi, ProductPoint.from_vector(v - e, 1, 1, K))) / (2 * h)
        worst = max(worst, float(np.linalg.norm(fd - grad) / np.linalg.norm(grad)))
    ok = worst <= 1e-6
    record_criterion(2, ok, f"max relative error {worst:.2e} over 100 points (tol 1e-6)")
    assert ok


def test_criterion_3_smallness_certificate(record_criterion):
    lines, ok = [], True
    for c in (0.2, 0.4):
        H = lift(small_spec(c))
        cert = condition_a_certificate(H, 0.05, 10_000, seed=3)
        ratios = condition_a_ratios(H, 0.05, 10_000, seed=3)
        violations = int(np.sum(ratios < 0.5 - 0.05 - cert.c))
        good = cert.c <= 0.4 + 1e-9 and cert.verdict and violations == 0
        ok &= good
        lines.append(f"c={cert.c:.4f} delta={cert.delta:.3f} min ratio "
                     f"{cert.empirical_min_ratio:.3f} violations={violations}")
    record_criterion(3, ok, "; ".join(lines))
    assert ok


def _pointwise_second_equation(H, p, lam, times):
    """-J y' - grad_y H + 2 pi lam y evaluated directly on the loop."""
    J = complex_structure(p.y.dim)
    K = p.max_mode
    k = np.arange(-K, K + 1)
    dy = FourierLoop(p.y.coeffs @ J.T * (2 * np.pi * k)[:, None])  # d/dt = 2 pi k J on mode k
    worst = 0.0
    for t in times:
        xt, yt = eval_loop(p.x, t), eval_loop(p.y, t)
        _, gy = grad_H(H, t, xt, yt)
        r = -J @ eval_loop(dy, t) - gy + 2 * np.pi * lam * yt
        worst = max(worst, float(np.max(np.abs(r))))
    return worst


def test_criterion_4_counterexample(record_criterion):
    H = lift(counterexample_spec())
    worst_trunc, worst_point, count = 0.0, 0.0, 0
    times = np.linspace(0.0, 1.0, 17)
    for k in range(-2, 3):
        for lam in np.linspace(-k - 0.5, -k + 0.5, 9):
            p = counterexample_family(k, lam, max_mode=4)
            _, v = F_lambda(H, p)
            worst_trunc = max(worst_trunc, float(np.max(np.abs(v.coeffs))))
            worst_point = max(worst_point, _pointwise_second_equation(H, p, lam, times))
            count += 1
    cert = condition_a_certificate(H, 0.05, 1000)
    ok = worst_trunc <= 1e-12 and not cert.verdict and cert.c >= np.pi / 2
    record_criterion(4, ok, f"{count} family points, truncated residual {worst_trunc:.1e}, "
                            f"pointwise {worst_point:.1e}; certificate "
                            f"{'pass' if cert.verdict else 'fail'} with c={cert.c:.4f}")
    assert ok


def test_criterion_5_unperturbed_ground_truth(record_criterion):
    H = lift(zero_spec())
    chi = ChiCutoff(0.05)
    K = 6
    level = TruncationLevel(K, K)
    worst_res = worst_perp = worst_norm = worst_lam = 0.0
    converged = 0
    for start in multistart_starts(1, 1, K, 50, seed=5, perturbation=0.15):
        res = solve_critical(H, chi, level, start, tol=1e-10)
        converged += res.converged
        p = res.point
        osc = np.arange(2 * K + 1) != K
        worst_res = max(worst_res, res.residual)
        worst_perp = max(worst_perp, float(np.max(np.abs(p.x.coeffs[osc]))),
                         float(np.max(np.abs(p.y.coeffs[osc]))))
        worst_norm = max(worst_norm, abs(float(np.linalg.norm(p.y[0])) - 1.0))
        worst_lam = max(worst_lam, abs(res.lam))
    ok = (converged == 50 and worst_res <= 1e-10 and worst_perp <= 1e-8
          and worst_norm <= 1e-8 and worst_lam <= 1e-8)
    record_criterion(5, ok, f"{converged}/50 converged; residual {worst_res:.1e}, "
                            f"oscillating part {worst_perp:.1e}, |y0|-1 {worst_norm:.1e}, "
                            f"lambda {worst_lam:.1e}")
    assert ok


def test_criterion_6_main_experiment(record_criterion):
    cfg = RunConfig(m=1, n=1, K=8, hamiltonian={"preset": "small", "c": 0.2}, eps=0.05,
                    R="auto", multistart=200, seed=0, s_steps=10)
    rep = run_pipeline(cfg)
    bound = theorem2_bound("product 1 1")
    ok = (rep["certificate"]["verdict"] == "pass" and rep["continuation"]["verdict"] == "pass"
          and rep["family_count"] >= 4 and bound == 4 and rep["lower_bound"] == 4)
    record_criterion(6, ok, f"certificate {rep['certificate']['verdict']}, continuation "
                            f"{rep['continuation']['verdict']} at R={rep['R']:.3f}, "
                            f"{rep['family_count']} families vs bound {bound}")
    assert ok


def test_criterion_7_cohomology_engine(record_criterion):
    names = ([f"torus {m}" for m in range(1, 4)] + [f"proj {n}" for n in range(0, 5)]
             + [f"sphere {d}" for d in range(1, 6)]
             + [f"product {m} {n}" for m in range(1, 4) for n in range(0, 5)])
    problems = []
    for name in names:
        M = model(name)
        rcl = relative_cup_length(M)
        if rcl != relative_cup_length_closed_form(M):
            problems.append(f"{name}: oracle mismatch")
        if cup_length(M.algebra) != cup_length_closed_form(M.algebra):
            problems.append(f"{name}: cup-length mismatch")
        if cup_length(M.algebra) < rcl - 1:
            problems.append(f"{name}: CL < RCL - 1")
        for N in range(0, 11):
            if relative_cup_length(suspend(M, N)) != rcl:
                problems.append(f"{name}: suspension by {N}")
        kind, *args = name.split()
        args = [int(a) for a in args]
        expected = {"torus": lambda m: 2 * m + 1, "proj": lambda n: n + 1,
                    "sphere": lambda d: 1, "product": lambda m, n: 2 * m + n + 1}[kind](*args)
        if rcl != expected:
            problems.append(f"{name}: RCL {rcl} != {expected}")
    ok = not problems
    record_criterion(7, ok, f"{len(names)} models checked"
                            + ("" if ok else f"; {problems[:3]}"))
    assert ok


def test_criterion_8_hyperbolic_index(record_criterion):
    patterns = 0
    bad = []
    for size in range(0, 7):
        for signs in itertools.product([1, -1], repeat=size):
            rep = hyperbolic_conley_index(signs)
            patterns += 1
            if rep.ranks != {signs.count(1): 1} or rep.rcl != 1:
                bad.append(signs)
    ok = not bad
    record_criterion(8, ok, f"{patterns} sign patterns, {len(bad)} mismatches")
    assert ok


def _match(fa, fb, tol):
    """One-to-one matching of two family lists under quotient distance."""
    if len(fa) != len(fb):
        return False, float("inf")
    used, worst = set(), 0.0
    for f in fa:
        dists = [(quotient_distance(f.representative, g.representative), j)
                 for j, g in enumerate(fb) if j not in used]
        d, j = min(dists)
        used.add(j)
        worst = max(worst, d)
    return worst <= tol, worst


def test_criterion_9_truncation_stability(record_criterion):
    chi = ChiCutoff(0.05)
    K = 6
    lines, ok = [], True
    for label, spec in (("H=0", zero_spec()), ("c=0.2", small_spec(0.2))):
        H = lift(spec)
        starts = multistart_starts(1, 1, K, 200, seed=9)
        fa, _ = find_families(H, chi, TruncationLevel(K, K), 0, starts=starts)
        fb, _ = find_families(H, chi, TruncationLevel(K + 2, K + 2), 0, starts=starts)
        good, worst = _match(fa, fb, 1e-6)
        ok &= good
        lines.append(f"{label}: {len(fa)} vs {len(fb)} families, max distance {worst:.1e}")
    record_criterion(9, ok, "; ".join(lines))
    assert ok
