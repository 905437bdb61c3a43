"""Truncated Fourier model of the half-Sobolev loop space H^{1/2}(T, R^d).

A loop is stored densely as an array of shape ``(2K+1, d)``; row ``k + K``
holds the coefficient ``q_k`` of the basis curve ``t -> exp(2 pi k J t) q_k``,
where ``J`` is the standard complex structure pairing coordinates
``(0, 1), (2, 3), ...``.  These curves are orthonormal in L^2, so the L^2
norm of a loop is the Euclidean norm of its stacked coefficients.

Pairing coordinates as complex numbers ``z = q[2i] + 1j q[2i+1]`` turns
``exp(theta J)`` into multiplication by ``exp(1j theta)``; the synthesis and
analysis maps below are written in that real-pair form.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

TWO_PI = 2.0 * np.pi


def complex_structure(d: int) -> np.ndarray:
    """Block matrix J on R^d with J(a, b) = (-b, a) on each coordinate pair."""
    if d % 2:
        raise ValueError(f"ambient dimension must be even, got {d}")
    J = np.zeros((d, d))
    for i in range(0, d, 2):
        J[i + 1, i] = 1.0
        J[i, i + 1] = -1.0
    return J


def rotate_pairs(q: np.ndarray, theta) -> np.ndarray:
    """Apply exp(theta J) to the last axis of ``q``; ``theta`` broadcasts
    against the leading axes."""
    theta = np.asarray(theta, dtype=float)
    c = np.cos(theta)[..., None]
    s = np.sin(theta)[..., None]
    a = q[..., 0::2]
    b = q[..., 1::2]
    out = np.empty(np.broadcast_shapes(q.shape, c.shape[:-1] + (q.shape[-1],)))
    out[..., 0::2] = c * a - s * b
    out[..., 1::2] = s * a + c * b
    return out


def mode_indices(K: int) -> np.ndarray:
    return np.arange(-K, K + 1)


def h_half_weights(K: int) -> np.ndarray:
    """Per-mode weights of the H^{1/2} norm: 1 on mode 0, 2 pi |k| otherwise."""
    k = np.abs(mode_indices(K)).astype(float)
    return np.where(k == 0, 1.0, TWO_PI * k)


def min_grid_size(K: int) -> int:
    """Smallest anti-aliased grid: products of two loops reach mode 2K."""
    return 4 * K + 4


@lru_cache(maxsize=64)
def _trig_tables(K: int, N: int):
    t = np.arange(N) / N
    ang = TWO_PI * np.outer(t, mode_indices(K))
    C = np.cos(ang)
    S = np.sin(ang)
    C.flags.writeable = False
    S.flags.writeable = False
    t.flags.writeable = False
    return t, C, S


def grid_times(N: int) -> np.ndarray:
    return np.arange(N) / N


def synthesize(coeffs: np.ndarray, N: int) -> np.ndarray:
    """Values of the loop at t_j = j/N, shape (N, d)."""
    K = (coeffs.shape[0] - 1) // 2
    _, C, S = _trig_tables(K, N)
    a = coeffs[:, 0::2]
    b = coeffs[:, 1::2]
    out = np.empty((N, coeffs.shape[1]))
    out[:, 0::2] = C @ a - S @ b
    out[:, 1::2] = S @ a + C @ b
    return out


def analyze(values: np.ndarray, K: int) -> np.ndarray:
    """Discrete adjoint of :func:`synthesize` divided by N.

    For trapezoid quadrature this returns the coefficients of the L^2
    projection, and it is exactly the derivative of ``mean_j <g_j, y(t_j)>``
    with respect to the coefficients of ``y``.
    """
    N = values.shape[0]
    _, C, S = _trig_tables(K, N)
    a = values[:, 0::2]
    b = values[:, 1::2]
    out = np.empty((2 * K + 1, values.shape[1]))
    out[:, 0::2] = (C.T @ a + S.T @ b) / N
    out[:, 1::2] = (-S.T @ a + C.T @ b) / N
    return out


@lru_cache(maxsize=64)
def synthesis_tensor(K: int, d: int, N: int) -> np.ndarray:
    """Real synthesis matrix as a tensor B of shape (N, d, (2K+1) d).

    ``B[j] @ coeffs.ravel()`` is the loop value at t_j.
    """
    _, C, S = _trig_tables(K, N)
    M = 2 * K + 1
    B = np.zeros((N, d, M, d))
    for p in range(0, d, 2):
        B[:, p, :, p] = C
        B[:, p, :, p + 1] = -S
        B[:, p + 1, :, p] = S
        B[:, p + 1, :, p + 1] = C
    B = B.reshape(N, d, M * d)
    B.flags.writeable = False
    return B


@dataclass(frozen=True, eq=False)
class FourierLoop:
    """Loop in R^d truncated to modes -K..K (immutable)."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.ndim != 2 or c.shape[0] % 2 != 1:
            raise ValueError(f"coefficients must have shape (2K+1, d), got {c.shape}")
        if c.shape[1] % 2:
            raise ValueError(f"ambient dimension must be even, got {c.shape[1]}")
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    @property
    def dim(self) -> int:
        return self.coeffs.shape[1]

    @property
    def max_mode(self) -> int:
        return (self.coeffs.shape[0] - 1) // 2

    def __getitem__(self, k: int) -> np.ndarray:
        """Coefficient vector of mode ``k``."""
        if abs(k) > self.max_mode:
            return np.zeros(self.dim)
        return self.coeffs[k + self.max_mode]

    def __add__(self, other: FourierLoop) -> FourierLoop:
        return FourierLoop(self.coeffs + other.coeffs)

    def __sub__(self, other: FourierLoop) -> FourierLoop:
        return FourierLoop(self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> FourierLoop:
        return FourierLoop(self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> FourierLoop:
        return FourierLoop(-self.coeffs)

    # constructors -----------------------------------------------------------

    @classmethod
    def zeros(cls, d: int, K: int) -> FourierLoop:
        return cls(np.zeros((2 * K + 1, d)))

    @classmethod
    def constant(cls, q, K: int) -> FourierLoop:
        q = np.asarray(q, dtype=float)
        c = np.zeros((2 * K + 1, q.size))
        c[K] = q
        return cls(c)

    @classmethod
    def single_mode(cls, k: int, q, K: int) -> FourierLoop:
        q = np.asarray(q, dtype=float)
        if abs(k) > K:
            raise ValueError(f"mode {k} outside truncation {K}")
        c = np.zeros((2 * K + 1, q.size))
        c[k + K] = q
        return cls(c)

    @classmethod
    def random(cls, rng: np.random.Generator, d: int, K: int, scale: float = 1.0,
               decay: float = 0.0) -> FourierLoop:
        """Gaussian coefficients with standard deviation scale / (1+|k|)^decay."""
        k = np.abs(mode_indices(K))
        sd = scale / (1.0 + k) ** decay
        return cls(rng.standard_normal((2 * K + 1, d)) * sd[:, None])

    # views ------------------------------------------------------------------

    def resized(self, K: int) -> FourierLoop:
        """Zero-pad or cut the mode window to -K..K."""
        c = np.zeros((2 * K + 1, self.dim))
        keep = min(K, self.max_mode)
        c[K - keep:K + keep + 1] = self.coeffs[self.max_mode - keep:self.max_mode + keep + 1]
        return FourierLoop(c)

    def to_records(self) -> list[dict]:
        """Flat (mode, coefficient) records for JSON reports."""
        return [{"mode": int(k), "coeff": [float(v) for v in q]}
                for k, q in zip(mode_indices(self.max_mode), self.coeffs)]

    @classmethod
    def from_records(cls, records: list[dict], d: int | None = None) -> FourierLoop:
        K = max(abs(int(r["mode"])) for r in records)
        d = d or len(records[0]["coeff"])
        c = np.zeros((2 * K + 1, d))
        for r in records:
            c[int(r["mode"]) + K] = r["coeff"]
        return cls(c)


def eval_loop(loop: FourierLoop, t) -> np.ndarray:
    """Sum over k of exp(2 pi k t J) q_k at time(s) ``t``."""
    t = np.asarray(t, dtype=float)
    ang = TWO_PI * np.multiply.outer(t, mode_indices(loop.max_mode))
    return rotate_pairs(loop.coeffs, ang).sum(axis=-2)


def h_half_inner(u: FourierLoop, v: FourierLoop) -> float:
    w = h_half_weights(u.max_mode)
    return float(np.sum(w[:, None] * u.coeffs * v.coeffs))


def l2_inner(u: FourierLoop, v: FourierLoop) -> float:
    return float(np.sum(u.coeffs * v.coeffs))


def norms(loop: FourierLoop) -> tuple[float, float]:
    """Return ``(h_half, l2)`` norms of ``loop``."""
    sq = np.sum(loop.coeffs**2, axis=1)
    return (float(np.sqrt(h_half_weights(loop.max_mode) @ sq)),
            float(np.sqrt(sq.sum())))


def apply_L(loop: FourierLoop) -> FourierLoop:
    """x+ - x-: keep positive modes, negate negative ones, kill the mean."""
    sign = np.sign(mode_indices(loop.max_mode)).astype(float)
    return FourierLoop(loop.coeffs * sign[:, None])


def apply_jstar(loop: FourierLoop) -> FourierLoop:
    """Adjoint of the inclusion H^{1/2} -> L^2 (mode k scaled by 1/(2 pi |k|))."""
    return FourierLoop(loop.coeffs / h_half_weights(loop.max_mode)[:, None])


def neg_J_ddt(loop: FourierLoop) -> FourierLoop:
    """L^2 representative of -J d/dt: mode k multiplied by 2 pi k."""
    k = mode_indices(loop.max_mode).astype(float)
    return FourierLoop(loop.coeffs * (TWO_PI * k)[:, None])


def rotate_phase(loop: FourierLoop, theta: float) -> FourierLoop:
    """Global phase rotation y -> exp(2 pi theta J) y."""
    return FourierLoop(rotate_pairs(loop.coeffs, TWO_PI * theta))


def truncate(loop: FourierLoop, k: int, l: int) -> FourierLoop:
    """Orthogonal projection onto modes -k..l."""
    K = loop.max_mode
    if k > K or l > K or k < 0 or l < 0:
        raise ValueError(f"window (-{k}, {l}) not inside truncation {K}")
    modes = mode_indices(K)
    keep = (modes >= -k) & (modes <= l)
    return FourierLoop(loop.coeffs * keep[:, None])


@dataclass(frozen=True, eq=False)
class ProductPoint:
    """A point (x, y, lambda) of the extended loop space.

    ``x`` lives on the torus: its zero mode is only meaningful modulo Z^{2m}.
    """

    x: FourierLoop
    y: FourierLoop
    lam: float

    def __post_init__(self):
        if self.x.max_mode != self.y.max_mode:
            raise ValueError("x and y must share the truncation level")
        object.__setattr__(self, "lam", float(self.lam))

    @property
    def m(self) -> int:
        return self.x.dim // 2

    @property
    def n(self) -> int:
        return self.y.dim // 2 - 1

    @property
    def max_mode(self) -> int:
        return self.x.max_mode

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.x.coeffs.ravel(), self.y.coeffs.ravel(), [self.lam]])

    @classmethod
    def from_vector(cls, v: np.ndarray, m: int, n: int, K: int) -> ProductPoint:
        M = 2 * K + 1
        nx = M * 2 * m
        ny = M * (2 * n + 2)
        if v.size != nx + ny + 1:
            raise ValueError("vector length does not match (m, n, K)")
        return cls(FourierLoop(v[:nx].reshape(M, 2 * m)),
                   FourierLoop(v[nx:nx + ny].reshape(M, 2 * n + 2)),
                   float(v[-1]))

    def wrapped(self) -> ProductPoint:
        """Representative with the torus mean in [0, 1)^{2m}."""
        c = self.x.coeffs.copy()
        K = self.max_mode
        c[K] = np.mod(c[K], 1.0)
        return ProductPoint(FourierLoop(c), self.y, self.lam)

    def shifted(self, shift) -> ProductPoint:
        c = self.x.coeffs.copy()
        c[self.max_mode] += np.asarray(shift, dtype=float)
        return ProductPoint(FourierLoop(c), self.y, self.lam)

    def resized(self, K: int) -> ProductPoint:
        return ProductPoint(self.x.resized(K), self.y.resized(K), self.lam)

    def equals(self, other: ProductPoint, atol: float = 1e-12) -> bool:
        """Equality modulo integer translations of the torus mean."""
        if self.x.coeffs.shape != other.x.coeffs.shape or \
                self.y.coeffs.shape != other.y.coeffs.shape:
            return False
        dx = self.x.coeffs - other.x.coeffs
        K = self.max_mode
        dx[K] -= np.round(dx[K])
        return (np.allclose(dx, 0.0, atol=atol)
                and np.allclose(self.y.coeffs, other.y.coeffs, atol=atol)
                and abs(self.lam - other.lam) <= atol)

    def to_dict(self) -> dict:
        return {"x": self.x.to_records(), "y": self.y.to_records(), "lambda": self.lam}

    @classmethod
    def from_dict(cls, d: dict) -> ProductPoint:
        return cls(FourierLoop.from_records(d["x"]), FourierLoop.from_records(d["y"]),
                   float(d["lambda"]))
