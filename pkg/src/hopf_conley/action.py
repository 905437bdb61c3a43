"""The modified action functional, its cutoff, and the Condition (A) certificate.

The functional on (x, y, lambda) is

    A(x, y, lam) = 1/2 sum_k 2 pi k (|x_k|^2 + |y_k|^2)
                   - int_0^1 H(t, x(t), y(t)) dt
                   + pi (chi(lam) ||y||_2^2 - lam)

with the integral replaced by the trapezoid rule on an anti-aliased grid.
:class:`Discretization` differentiates that discrete functional exactly, so
its gradients and Hessians are consistent with :func:`action_value` to
rounding error.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np
from scipy.special import expit

from .hamiltonian import LiftedHamiltonian, smallness_report
from .loop_space import (
    FourierLoop,
    ProductPoint,
    _trig_tables,
    analyze,
    h_half_weights,
    min_grid_size,
    mode_indices,
    synthesis_tensor,
    synthesize,
)

TWO_PI = 2.0 * np.pi

LAMBDA0 = -0.5


# ---------------------------------------------------------------------------
# cutoff
# ---------------------------------------------------------------------------

_EDGE = 1e-3  # below this the smooth step is 0 or 1 to double precision


def _smooth_step(tau):
    """s(tau) = sigma(tau) / (sigma(tau) + sigma(1 - tau)), sigma(t) = exp(-1/t),
    with its first two derivatives."""
    tau = np.asarray(tau, dtype=float)
    inside = (tau > _EDGE) & (tau < 1.0 - _EDGE)
    tc = np.clip(tau, _EDGE, 1.0 - _EDGE)
    g = 1.0 / tc - 1.0 / (1.0 - tc)
    s = expit(-g)
    ss = s * expit(g)
    q = 1.0 / tc**2 + 1.0 / (1.0 - tc) ** 2
    dq = -2.0 / tc**3 + 2.0 / (1.0 - tc) ** 3
    d1 = ss * q
    d2 = d1 * (1.0 - 2.0 * s) * q + ss * dq
    s = np.where(inside, s, (tau >= 0.5).astype(float))
    return s, np.where(inside, d1, 0.0), np.where(inside, d2, 0.0)


@dataclass(frozen=True)
class ChiCutoff:
    """Smooth monotone cutoff: lambda0 below lambda0, lambda0 + 1 above
    lambda0 + 1, identity on [lambda0 + eps/2, lambda0 + 1 - eps/2]."""

    eps: float = 0.05
    lambda0: float = LAMBDA0

    def __post_init__(self):
        if not 0.0 < self.eps < 0.25:
            raise ValueError(f"eps must lie in (0, 1/4), got {self.eps}")

    def derivatives(self, lam):
        """``(chi, chi', chi'')`` at ``lam`` (scalar or array)."""
        lam = np.asarray(lam, dtype=float)
        h = 0.5 * self.eps
        lo, hi = self.lambda0, self.lambda0 + 1.0
        value = np.clip(lam, lo, hi)
        d1 = ((lam > lo) & (lam < hi)).astype(float)
        d2 = np.zeros_like(lam)

        tau = (lam - lo) / h
        s, s1, s2 = _smooth_step(tau)
        band = (lam > lo) & (lam < lo + h)
        value = np.where(band, lo + h * tau * s, value)
        d1 = np.where(band, s + tau * s1, d1)
        d2 = np.where(band, (2.0 * s1 + tau * s2) / h, d2)

        tau = (hi - lam) / h
        s, s1, s2 = _smooth_step(tau)
        band = (lam > hi - h) & (lam < hi)
        value = np.where(band, hi - h * tau * s, value)
        d1 = np.where(band, s + tau * s1, d1)
        d2 = np.where(band, -(2.0 * s1 + tau * s2) / h, d2)
        if value.ndim == 0:
            return float(value), float(d1), float(d2)
        return value, d1, d2


def chi_eval(chi: ChiCutoff, lam) -> tuple[float, float]:
    value, d1, _ = chi.derivatives(lam)
    return value, d1


# ---------------------------------------------------------------------------
# discrete functional
# ---------------------------------------------------------------------------


class Discretization:
    """Flat-vector model of (x, y, lambda) at truncation K on an N-point grid.

    The flat layout is ``[x coeffs (2K+1, 2m), y coeffs (2K+1, 2n+2), lam]``,
    each coefficient block raveled mode-major.
    """

    def __init__(self, m: int, n: int, K: int, N: int | None = None):
        self.m, self.n, self.K = m, n, K
        self.N = min_grid_size(K) if N is None else N
        if self.N < 2 * K + 1:
            raise ValueError("grid too coarse for the mode window")
        self.dx, self.dy = 2 * m, 2 * n + 2
        M = 2 * K + 1
        self.Dx, self.Dy = M * self.dx, M * self.dy
        self.D = self.Dx + self.Dy
        self.size = self.D + 1
        modes = mode_indices(K).astype(float)
        w = h_half_weights(K)
        self.kvec = np.concatenate([np.repeat(modes, self.dx), np.repeat(modes, self.dy)])
        self.weights = np.concatenate([np.repeat(w, self.dx), np.repeat(w, self.dy)])
        self.y_mask = np.zeros(self.D, dtype=bool)
        self.y_mask[self.Dx:] = True
        self.x0_slice = slice(K * self.dx, (K + 1) * self.dx)
        self.t, _, _ = _trig_tables(K, self.N)
        dz = self.dx + self.dy
        B = np.zeros((self.N, dz, self.D))
        B[:, :self.dx, :self.Dx] = synthesis_tensor(K, self.dx, self.N)
        B[:, self.dx:, self.Dx:] = synthesis_tensor(K, self.dy, self.N)
        self.B = B
        self._B2 = B.reshape(self.N * dz, self.D)

    # splitting ---------------------------------------------------------------

    def split(self, v):
        M = 2 * self.K + 1
        return (v[:self.Dx].reshape(M, self.dx), v[self.Dx:self.D].reshape(M, self.dy), v[-1])

    def point(self, v) -> ProductPoint:
        return ProductPoint.from_vector(np.asarray(v, dtype=float), self.m, self.n, self.K)

    def vector(self, p: ProductPoint) -> np.ndarray:
        if p.max_mode != self.K or p.m != self.m or p.n != self.n:
            raise ValueError("point does not match this discretization")
        return p.to_vector()

    def grid_values(self, v):
        x, y, _ = self.split(v)
        return synthesize(x, self.N), synthesize(y, self.N)

    # norms -------------------------------------------------------------------

    def h_half_norm_sq(self, v_loops, which: str = "all") -> float:
        sq = self.weights * np.asarray(v_loops)[:self.D] ** 2
        if which == "x_perp":
            sq = sq[:self.Dx].copy()
            sq[self.x0_slice] = 0.0
        elif which == "y":
            sq = sq[self.Dx:]
        return float(sq.sum())

    def radii(self, v) -> tuple[float, float]:
        """``(||x_perp||, ||y||)`` in H^{1/2}."""
        return (np.sqrt(self.h_half_norm_sq(v, "x_perp")),
                np.sqrt(self.h_half_norm_sq(v, "y")))

    def y_l2_sq(self, v) -> float:
        return float(np.sum(v[self.Dx:self.D] ** 2))

    # functional --------------------------------------------------------------

    def action(self, H: LiftedHamiltonian, chi: ChiCutoff, v) -> float:
        v = np.asarray(v, dtype=float)
        X, Y = self.grid_values(v)
        hv, _, _ = H.grid_eval(self.t, X, Y)
        loops = v[:self.D]
        chi_v, _, _ = chi.derivatives(v[-1])
        quad = np.pi * float(np.sum(self.kvec * loops**2))
        return quad - float(hv.mean()) + np.pi * (chi_v * self.y_l2_sq(v) - v[-1])

    def _field(self, H, v, lam_eff):
        """L^2 representative of F at lambda = lam_eff, flat over the loops."""
        x, y, _ = self.split(v)
        X, Y = synthesize(x, self.N), synthesize(y, self.N)
        _, gx, gy = H.grid_eval(self.t, X, Y)
        loops = v[:self.D]
        G = TWO_PI * self.kvec * loops
        G[:self.Dx] -= analyze(gx, self.K).ravel()
        G[self.Dx:] -= analyze(gy, self.K).ravel()
        G[self.Dx:] += TWO_PI * lam_eff * loops[self.Dx:]
        return G

    def gradient_l2(self, H: LiftedHamiltonian, chi: ChiCutoff, v) -> np.ndarray:
        """Euclidean gradient of :meth:`action` in the flat coordinates."""
        v = np.asarray(v, dtype=float)
        chi_v, chi_d, _ = chi.derivatives(v[-1])
        out = np.empty(self.size)
        out[:self.D] = self._field(H, v, chi_v)
        out[-1] = np.pi * (chi_d * self.y_l2_sq(v) - 1.0)
        return out

    def gradient(self, H: LiftedHamiltonian, chi: ChiCutoff, v) -> np.ndarray:
        """Gradient for the H^{1/2} x R metric (j* applied to the loop part)."""
        g = self.gradient_l2(H, chi, v)
        g[:self.D] /= self.weights
        return g

    def residual(self, H, chi, v) -> np.ndarray:
        """Vector whose Euclidean norm is the H^{1/2} x R norm of the gradient."""
        g = self.gradient_l2(H, chi, v)
        g[:self.D] /= np.sqrt(self.weights)
        return g

    def gradient_norm(self, H, chi, v) -> float:
        return float(np.linalg.norm(self.residual(H, chi, v)))

    def hessian_l2(self, H: LiftedHamiltonian, chi: ChiCutoff, v) -> np.ndarray:
        """Euclidean Hessian of :meth:`action` (exact for the discrete functional)."""
        v = np.asarray(v, dtype=float)
        x, y, lam = self.split(v)
        X, Y = synthesize(x, self.N), synthesize(y, self.N)
        hxx, hxy, hyy = H.grid_hessian(self.t, X, Y)
        dz = self.dx + self.dy
        h = np.empty((self.N, dz, dz))
        h[:, :self.dx, :self.dx] = hxx
        h[:, :self.dx, self.dx:] = hxy
        h[:, self.dx:, :self.dx] = hxy.transpose(0, 2, 1)
        h[:, self.dx:, self.dx:] = hyy
        hB = np.einsum("jab,jbe->jae", h, self.B).reshape(self.N * dz, self.D)
        chi_v, chi_d, chi_dd = chi.derivatives(lam)
        out = np.zeros((self.size, self.size))
        out[:self.D, :self.D] = -(self._B2.T @ hB) / self.N
        diag = TWO_PI * self.kvec + TWO_PI * chi_v * self.y_mask
        out[np.arange(self.D), np.arange(self.D)] += diag
        yv = v[self.Dx:self.D]
        out[self.Dx:self.D, -1] = TWO_PI * chi_d * yv
        out[-1, self.Dx:self.D] = TWO_PI * chi_d * yv
        out[-1, -1] = np.pi * chi_dd * float(yv @ yv)
        return out

    def residual_jacobian(self, H, chi, v) -> np.ndarray:
        Hs = self.hessian_l2(H, chi, v)
        scale = np.ones(self.size)
        scale[:self.D] = 1.0 / np.sqrt(self.weights)
        return Hs * scale[:, None]


@lru_cache(maxsize=32)
def discretization(m: int, n: int, K: int, N: int | None = None) -> Discretization:
    return Discretization(m, n, K, N)


def _disc_for(H: LiftedHamiltonian, p: ProductPoint, N: int | None) -> Discretization:
    if p.m != H.m or p.n != H.n:
        raise ValueError("point dimensions do not match the Hamiltonian")
    return discretization(H.m, H.n, p.max_mode, N)


# ---------------------------------------------------------------------------
# point-level operations
# ---------------------------------------------------------------------------


def F_lambda(H: LiftedHamiltonian, p: ProductPoint, N: int | None = None
             ) -> tuple[FourierLoop, FourierLoop]:
    """L^2 representative of (-J x' - grad_x H, -J y' - grad_y H + 2 pi lam y),
    with lam = ``p.lam`` taken literally (no cutoff)."""
    disc = _disc_for(H, p, N)
    G = disc._field(H, disc.vector(p), p.lam)
    x, y, _ = disc.split(np.concatenate([G, [0.0]]))
    return FourierLoop(x), FourierLoop(y)


def action_value(H: LiftedHamiltonian, chi: ChiCutoff, p: ProductPoint,
                 N: int | None = None) -> float:
    disc = _disc_for(H, p, N)
    return disc.action(H, chi, disc.vector(p))


def action_gradient(H: LiftedHamiltonian, chi: ChiCutoff, p: ProductPoint,
                    N: int | None = None) -> tuple[FourierLoop, FourierLoop, float]:
    """(j* F_{chi(lam)}(x, y), pi (chi'(lam) ||y||_2^2 - 1))."""
    disc = _disc_for(H, p, N)
    g = disc.gradient(H, chi, disc.vector(p))
    x, y, glam = disc.split(g)
    return FourierLoop(x), FourierLoop(y), float(glam)


def gradient_norm(H: LiftedHamiltonian, chi: ChiCutoff, p: ProductPoint,
                  N: int | None = None) -> float:
    disc = _disc_for(H, p, N)
    return disc.gradient_norm(H, chi, disc.vector(p))


# ---------------------------------------------------------------------------
# Condition (A)
# ---------------------------------------------------------------------------


@dataclass
class ConditionACertificate:
    """Outcome of the Condition (A) check.

    ``delta = 1/2 - eps - c`` is the guaranteed lower bound on
    ||j* pr_2 F_lam(x, y)|| / ||y|| near the ends of the lambda window;
    ``empirical_min_ratio`` is the smallest ratio seen on random loops.
    """

    c: float
    eps: float
    delta: float
    verdict: bool
    empirical_min_ratio: float
    samples: int
    seed: int
    c_with_margin: float
    lambda0: float = LAMBDA0
    violations: int = 0
    sharp_delta: float | None = None
    sharp_verdict: bool | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["verdict"] = "pass" if self.verdict else "fail"
        if self.sharp_verdict is not None:
            d["sharp_verdict"] = "pass" if self.sharp_verdict else "fail"
        return d


def sharp_delta(c: float, eps: float, resolution: int = 2001) -> float:
    """Lower bound from splitting y into its mean and oscillating part.

    With a = L y + 2 pi lam j* y and b = j* grad_y H one has
    ||a|| >= g_h ||y|| and ||a|| >= g_l ||y||_2, where
    g_h = min(2 pi |lam|, 1 - |lam|) and g_l = min(2 pi |lam|, sqrt(2 pi)(1 - |lam|)),
    while ||b|| <= c ||y||_2.  Hence ||a - b|| >= g_h (1 - c / g_l) ||y||,
    positive whenever c < g_l (= sqrt(pi/2) at |lam| = 1/2).
    """
    lam = np.linspace(0.5 - eps, 0.5, resolution)
    g_h = np.minimum(TWO_PI * lam, 1.0 - lam)
    g_l = np.minimum(TWO_PI * lam, np.sqrt(TWO_PI) * (1.0 - lam))
    return float(np.min(g_h * (1.0 - c / g_l)))


def _random_y(rng, d, K, lam):
    style = rng.integers(4)
    c = np.zeros((2 * K + 1, d))
    if style == 0:
        decay = rng.uniform(0.0, 2.0)
        sd = 1.0 / (1.0 + np.abs(mode_indices(K))) ** decay
        c = rng.standard_normal((2 * K + 1, d)) * sd[:, None]
    elif style == 1:
        c[rng.integers(2 * K + 1)] = rng.standard_normal(d)
    elif style == 2:
        # the mode where |sgn k + lam/|k|| is smallest, plus a little noise
        k = -1 if lam > 0 else 1
        c[k + K] = rng.standard_normal(d)
        c += 0.05 * rng.standard_normal(c.shape)
    else:
        c[K] = rng.standard_normal(d)
    return c


def _random_x(rng, d, K):
    c = rng.standard_normal((2 * K + 1, d)) * rng.uniform(0.0, 1.0)
    c /= (1.0 + np.abs(mode_indices(K)))[:, None]
    c[K] = rng.uniform(0.0, 1.0, d)
    return c


def _sample_lambda(rng, eps, lambda0=LAMBDA0):
    u = rng.uniform(0.0, eps)
    return lambda0 + u if rng.integers(2) == 0 else lambda0 + 1.0 - u


def condition_a_ratios(H: LiftedHamiltonian, eps: float, samples: int, seed: int = 0,
                       K: int = 8, batch: int = 512) -> np.ndarray:
    """||j* pr_2 F_lam(x, y)|| / ||y|| on ``samples`` random (x, y, lam).

    Sample ``i`` draws from ``default_rng([seed, i])``, so results do not
    depend on batching.
    """
    disc = discretization(H.m, H.n, K)
    N, dx, dy = disc.N, disc.dx, disc.dy
    _, C, S = _trig_tables(K, N)
    w = h_half_weights(K)
    k = mode_indices(K).astype(float)
    out = np.empty(samples)
    for start in range(0, samples, batch):
        idx = range(start, min(samples, start + batch))
        xs, ys, lams = [], [], []
        for i in idx:
            rng = np.random.default_rng([seed, i])
            lam = _sample_lambda(rng, eps)
            lams.append(lam)
            xs.append(_random_x(rng, dx, K))
            ys.append(_random_y(rng, dy, K, lam))
        xs, ys, lams = np.array(xs), np.array(ys), np.array(lams)
        nb = len(lams)
        X = np.concatenate([synthesize(c, N) for c in xs])
        Y = np.concatenate([synthesize(c, N) for c in ys])
        _, _, gy = H.grid_eval(np.tile(disc.t, nb), X, Y)
        gy = gy.reshape(nb, N, dy)
        a, b = gy[..., 0::2], gy[..., 1::2]
        an = np.empty((nb, 2 * K + 1, dy))
        an[..., 0::2] = (np.einsum("nk,bnp->bkp", C, a) + np.einsum("nk,bnp->bkp", S, b)) / N
        an[..., 1::2] = (np.einsum("nk,bnp->bkp", C, b) - np.einsum("nk,bnp->bkp", S, a)) / N
        v = TWO_PI * k[None, :, None] * ys - an + TWO_PI * lams[:, None, None] * ys
        jv = v / w[None, :, None]
        num = np.sqrt(np.einsum("k,bkp->b", w, jv**2))
        den = np.sqrt(np.einsum("k,bkp->b", w, ys**2))
        out[start:start + nb] = num / den
    return out


def condition_a_certificate(H: LiftedHamiltonian, eps: float, samples: int, seed: int = 0,
                            K: int = 8, grid: int = 32, sharp: bool = False
                            ) -> ConditionACertificate:
    """Certify ||j* pr_2 F_lam(x, y)|| >= delta ||y|| for lam near -1/2 and 1/2.

    A failing verdict is returned as data, never raised.
    """
    if not 0.0 < eps < 0.25:
        raise ValueError(f"eps must lie in (0, 1/4), got {eps}")
    rep = smallness_report(H, grid)
    c = rep.c
    delta = 0.5 - eps - c
    ratios = condition_a_ratios(H, eps, samples, seed, K) if samples else np.array([np.inf])
    violations = int(np.sum(ratios < delta)) if delta > 0.0 else 0
    verdict = delta > 0.0 and violations == 0
    sd = sharp_delta(c, eps) if sharp else None
    return ConditionACertificate(
        c=c, eps=eps, delta=delta, verdict=verdict,
        empirical_min_ratio=float(ratios.min()), samples=samples, seed=seed,
        c_with_margin=rep.c_with_margin, violations=violations,
        sharp_delta=sd, sharp_verdict=None if sd is None else sd > 0.0)
