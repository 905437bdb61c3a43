"""Hopf-invariant Hamiltonians on T x T^{2m} x CP^n and their quadratic lift.

A Hamiltonian is a finite sum of terms

    amplitude * trig(2 pi (nu_t t + nu . x) + phase) * y^T S y

with integer frequencies ``nu_t``, ``nu`` and a symmetric matrix ``S``
commuting with the complex structure J.  Integer frequencies make the lift
Z^{2m}-periodic in x and 1-periodic in t; J-commuting forms make it invariant
under y -> exp(theta J) y; every term is quadratic in y, so the lift
H(t, x, y) = |y|^2 H_1(t, x, y/|y|) is realised term by term.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import _kernels
from .loop_space import FourierLoop, ProductPoint, complex_structure

TWO_PI = 2.0 * np.pi

#: smallest per-axis resolution accepted by :func:`smallness_constant`
MIN_SMALLNESS_GRID = 8
#: relative safety margin reported next to the grid estimate of c
SMALLNESS_MARGIN = 0.10


class NotHopfInvariantError(ValueError):
    """A quadratic form in a Hamiltonian term does not commute with J."""


@dataclass(frozen=True, eq=False)
class HamiltonianTerm:
    amplitude: float
    form: np.ndarray
    freq_x: tuple[int, ...]
    freq_t: int = 0
    kind: str = "cos"
    phase: float = 0.0

    def __post_init__(self):
        if self.kind not in ("cos", "sin"):
            raise ValueError(f"term kind must be 'cos' or 'sin', got {self.kind!r}")
        form = np.array(self.form, dtype=float)
        if form.ndim != 2 or form.shape[0] != form.shape[1]:
            raise ValueError("quadratic form must be a square matrix")
        form.flags.writeable = False
        object.__setattr__(self, "form", form)
        object.__setattr__(self, "freq_x", tuple(int(f) for f in self.freq_x))
        object.__setattr__(self, "freq_t", int(self.freq_t))

    def to_dict(self) -> dict:
        return {"amplitude": self.amplitude, "kind": self.kind, "phase": self.phase,
                "freq_t": self.freq_t, "freq_x": list(self.freq_x),
                "form": self.form.tolist()}


@dataclass(frozen=True, eq=False)
class HamiltonianSpec:
    m: int
    n: int
    terms: tuple[HamiltonianTerm, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        for term in self.terms:
            if len(term.freq_x) != 2 * self.m:
                raise ValueError(f"term frequency vector must have length {2 * self.m}")
            if term.form.shape != (2 * self.n + 2, 2 * self.n + 2):
                raise ValueError(f"quadratic form must be {2 * self.n + 2}x{2 * self.n + 2}")

    def scaled(self, s: float) -> HamiltonianSpec:
        return HamiltonianSpec(self.m, self.n, tuple(
            HamiltonianTerm(t.amplitude * s, t.form, t.freq_x, t.freq_t, t.kind, t.phase)
            for t in self.terms))

    def to_dict(self) -> dict:
        return {"m": self.m, "n": self.n, "terms": [t.to_dict() for t in self.terms]}


def is_hopf_invariant(form: np.ndarray, rng: np.random.Generator | None = None,
                      samples: int = 16, rtol: float = 1e-10) -> bool:
    """Sampling test Q(exp(theta J) y) == Q(y) for the symmetric part of ``form``."""
    rng = rng or np.random.default_rng(0)
    S = 0.5 * (form + form.T)
    d = S.shape[0]
    J = complex_structure(d)
    scale = max(1.0, float(np.abs(S).max()))
    for _ in range(samples):
        y = rng.standard_normal(d)
        theta = rng.uniform(0.0, TWO_PI)
        R = np.cos(theta) * np.eye(d) + np.sin(theta) * J
        ry = R @ y
        if abs(ry @ S @ ry - y @ S @ y) > rtol * scale * (y @ y):
            return False
    return True


class LiftedHamiltonian:
    """Lift H(t, x, y) of a :class:`HamiltonianSpec` with exact derivatives.

    Construct through :func:`lift`.  Instances are immutable; the packed
    coefficient arrays feed the grid kernels directly.
    """

    def __init__(self, spec: HamiltonianSpec):
        self.spec = spec
        T = len(spec.terms)
        dx, dy = 2 * spec.m, 2 * spec.n + 2
        self.freq_t = np.array([t.freq_t for t in spec.terms], dtype=float).reshape(T)
        self.freq_x = np.array([t.freq_x for t in spec.terms], dtype=float).reshape(T, dx)
        # sin(u + p) = cos(u + p - pi/2)
        self.phase = np.array([t.phase - (0.5 * np.pi if t.kind == "sin" else 0.0)
                               for t in spec.terms], dtype=float).reshape(T)
        self.amp = np.array([t.amplitude for t in spec.terms], dtype=float).reshape(T)
        self.forms = np.array([0.5 * (t.form + t.form.T) for t in spec.terms],
                              dtype=float).reshape(T, dy, dy)
        for a in (self.freq_t, self.freq_x, self.phase, self.amp, self.forms):
            a.flags.writeable = False

    @property
    def m(self) -> int:
        return self.spec.m

    @property
    def n(self) -> int:
        return self.spec.n

    @property
    def is_zero(self) -> bool:
        return not np.any(self.amp)

    @property
    def time_dependent(self) -> bool:
        return bool(np.any(self.freq_t[self.amp != 0]))

    def scaled(self, s: float) -> LiftedHamiltonian:
        return LiftedHamiltonian(self.spec.scaled(s))

    # grid evaluation ---------------------------------------------------------

    def grid_eval(self, t, X, Y, backend: str | None = None):
        """``(value, grad_x, grad_y)`` at rows of ``X``, ``Y`` and times ``t``."""
        f = _kernels.get_backend(backend)[0]
        return f(np.ascontiguousarray(t, dtype=float), np.ascontiguousarray(X, dtype=float),
                 np.ascontiguousarray(Y, dtype=float), self.freq_t, self.freq_x,
                 self.phase, self.amp, self.forms)

    def grid_hessian(self, t, X, Y, backend: str | None = None):
        """``(h_xx, h_xy, h_yy)`` at rows of ``X``, ``Y`` and times ``t``."""
        f = _kernels.get_backend(backend)[1]
        return f(np.ascontiguousarray(t, dtype=float), np.ascontiguousarray(X, dtype=float),
                 np.ascontiguousarray(Y, dtype=float), self.freq_t, self.freq_x,
                 self.phase, self.amp, self.forms)

    def form_field(self, t, X, backend: str | None = None) -> np.ndarray:
        """Matrices M(t, x) with H(t, x, y) = y^T M(t, x) y."""
        f = _kernels.get_backend(backend)[2]
        return f(np.ascontiguousarray(t, dtype=float), np.ascontiguousarray(X, dtype=float),
                 self.freq_t, self.freq_x, self.phase, self.amp, self.forms)


def lift(spec: HamiltonianSpec) -> LiftedHamiltonian:
    """Build the quadratic Hopf-invariant lift of ``spec``.

    Raises
    ------
    NotHopfInvariantError
        If some quadratic form fails the J-commutation sampling test.
    """
    rng = np.random.default_rng(12345)
    for i, term in enumerate(spec.terms):
        if not is_hopf_invariant(term.form, rng):
            raise NotHopfInvariantError(f"term {i}: quadratic form does not commute with J")
    return LiftedHamiltonian(spec)


def _point_arrays(t, x, y):
    return (np.atleast_1d(np.asarray(t, dtype=float)),
            np.atleast_2d(np.asarray(x, dtype=float)),
            np.atleast_2d(np.asarray(y, dtype=float)))


def eval_H(H: LiftedHamiltonian, t: float, x, y) -> float:
    value, _, _ = H.grid_eval(*_point_arrays(t, x, y))
    return float(value[0])


def grad_H(H: LiftedHamiltonian, t: float, x, y) -> tuple[np.ndarray, np.ndarray]:
    _, gx, gy = H.grid_eval(*_point_arrays(t, x, y))
    return gx[0], gy[0]


# ---------------------------------------------------------------------------
# the smallness constant
# ---------------------------------------------------------------------------


def _sphere_sup(M: np.ndarray) -> np.ndarray:
    """max over unit y of max(2|y^T M y|, |horizontal part of 2 M y|).

    With eigenvalues mu of M the first sup is 2 max|mu| and the second is
    mu_max - mu_min, the largest spread of a Rayleigh quotient.
    """
    mu = np.linalg.eigvalsh(M)
    return np.maximum(2.0 * np.abs(mu).max(axis=-1), mu[..., -1] - mu[..., 0])


@dataclass
class SmallnessReport:
    c: float
    c_with_margin: float
    argmax_t: float
    argmax_x: list[float] = field(default_factory=list)
    grid: int = 0


def smallness_report(H: LiftedHamiltonian, grid: int = 32, polish: bool = True) -> SmallnessReport:
    """Grid estimate of c = max{2 |H_0|_inf, |grad_{CP^n} H_0|_inf}.

    The sup over the sphere in y is exact (eigenvalues); the sup over
    (t, x) uses a uniform grid with ``grid`` points per active axis followed by
    a Nelder-Mead polish from the best grid point, which can only raise c.
    """
    if grid < MIN_SMALLNESS_GRID:
        raise ValueError(f"grid must be at least {MIN_SMALLNESS_GRID}")
    dx = 2 * H.m
    if H.is_zero:
        return SmallnessReport(0.0, 0.0, 0.0, [0.0] * dx, grid)
    live = H.amp != 0
    active_t = bool(np.any(H.freq_t[live]))
    active_x = np.any(H.freq_x[live] != 0, axis=0)
    axes = [np.arange(grid) / grid if active_t else np.zeros(1)]
    axes += [np.arange(grid) / grid if a else np.zeros(1) for a in active_x]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 1 + dx)
    vals = _sphere_sup(H.form_field(mesh[:, 0], mesh[:, 1:]))
    best = int(np.argmax(vals))
    c = float(vals[best])
    arg = mesh[best]
    if polish:
        def neg(p):
            return -float(_sphere_sup(H.form_field(p[:1], p[None, 1:]))[0])

        res = minimize(neg, arg, method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 2000})
        if -res.fun > c:
            c, arg = float(-res.fun), res.x
    return SmallnessReport(c, c * (1.0 + SMALLNESS_MARGIN), float(np.mod(arg[0], 1.0)),
                           [float(v) for v in np.mod(arg[1:], 1.0)], grid)


def smallness_constant(H: LiftedHamiltonian, grid: int = 32) -> float:
    return smallness_report(H, grid).c


# ---------------------------------------------------------------------------
# stock Hamiltonians
# ---------------------------------------------------------------------------


def unit_form(n: int) -> np.ndarray:
    """|y|^2 on R^{2n+2}."""
    return np.eye(2 * n + 2)


def hopf_height_form(weights) -> np.ndarray:
    """sum_i w_i |z_i|^2 for complex coordinates z_i = (y_{2i}, y_{2i+1})."""
    return np.diag(np.repeat(np.asarray(weights, dtype=float), 2))


def zero_spec(m: int = 1, n: int = 1) -> HamiltonianSpec:
    return HamiltonianSpec(m, n, ())


def counterexample_spec(m: int = 1, n: int = 1) -> HamiltonianSpec:
    """(pi/2) sin(2 pi x_1) |y|^2."""
    freq = [0] * (2 * m)
    freq[0] = 1
    return HamiltonianSpec(m, n, (HamiltonianTerm(0.5 * np.pi, unit_form(n), tuple(freq),
                                                  kind="sin"),))


def small_spec(c: float = 0.2, m: int = 1, n: int = 1) -> HamiltonianSpec:
    """A time-dependent Hamiltonian whose smallness constant is exactly ``c``.

    Its time average is a Morse function on T^{2m} x CP^n built from
    cos(2 pi x_i) and a Hopf height function, and a time-dependent coupling
    term makes the periodic orbits genuinely non-constant.  All terms peak
    together at t = 1/4, x = 0, y in the first complex line, so c is attained.
    """
    dx = 2 * m
    u = c / 2.0
    a_x = 0.25 * u / m
    a_t = 0.1 * u
    a_y = 0.4 * u
    weights = np.linspace(1.0, -1.0, n + 1)
    terms = []
    for i in range(dx):
        f = [0] * dx
        f[i] = 1
        terms.append(HamiltonianTerm(a_x, unit_form(n), tuple(f)))
    f = [0] * dx
    f[0], f[1] = 1, -1
    terms.append(HamiltonianTerm(a_t, unit_form(n), tuple(f), freq_t=1, kind="cos",
                                 phase=-0.5 * np.pi))
    terms.append(HamiltonianTerm(a_y, hopf_height_form(weights), tuple([0] * dx)))
    return HamiltonianSpec(m, n, tuple(terms))


def counterexample_family(k: int, lam: float, m: int = 1, n: int = 1,
                          max_mode: int | None = None) -> ProductPoint:
    """Explicit solution of the y-equation for the counterexample Hamiltonian.

    Returns x constant with sin(2 pi x_1) = 2 (k + lam) and y the unit loop
    exp(2 pi k J t) e_1.

    Raises
    ------
    ValueError
        If |2 (k + lam)| > 1, where no real x_1 exists.
    """
    target = 2.0 * (k + lam)
    if abs(target) > 1.0:
        raise ValueError(f"|2(k + lambda)| = {abs(target):.6g} > 1: no real solution")
    K = abs(k) if max_mode is None else max_mode
    if K < abs(k):
        raise ValueError(f"mode {k} does not fit in truncation {K}")
    x0 = np.zeros(2 * m)
    x0[0] = np.mod(np.arcsin(target) / TWO_PI, 1.0)
    y0 = np.zeros(2 * n + 2)
    y0[0] = 1.0
    return ProductPoint(FourierLoop.constant(x0, K), FourierLoop.single_mode(k, y0, K), lam)
