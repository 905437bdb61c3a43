"""Galerkin gradient flows, isolation audits, and critical-point search.

Sign convention: :func:`galerkin_vector_field` and :func:`flow_step` follow
the *negative* gradient of the action, so the action decreases along
trajectories.  The isolating-neighbourhood estimates only involve
``||grad A||`` and action differences, which are sign-independent.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .action import ChiCutoff, Discretization, discretization
from .hamiltonian import LiftedHamiltonian
from .loop_space import FourierLoop, ProductPoint, rotate_pairs

TWO_PI = 2.0 * np.pi

#: gradient norms below this on the shell count as a rest point on the boundary
RHO_FLOOR = 1e-8


@dataclass(frozen=True)
class TruncationLevel:
    """Galerkin window of modes -k..l."""

    k: int
    l: int

    def __post_init__(self):
        if self.k < 1 or self.l < 1:
            raise ValueError("truncation depths must be at least 1")

    @classmethod
    def symmetric(cls, K: int) -> TruncationLevel:
        return cls(K, K)

    @property
    def max_mode(self) -> int:
        return max(self.k, self.l)


def _window(disc: Discretization, level: TruncationLevel) -> np.ndarray:
    """Boolean mask over the flat vector: loop entries in the window, plus lambda."""
    inside = (disc.kvec >= -level.k) & (disc.kvec <= level.l)
    return np.concatenate([inside, [True]])


def _disc(H: LiftedHamiltonian, level: TruncationLevel, K: int | None = None) -> Discretization:
    return discretization(H.m, H.n, K if K is not None else level.max_mode)


def _check_point(disc: Discretization, p: ProductPoint) -> np.ndarray:
    if p.max_mode != disc.K:
        p = p.resized(disc.K)
    return disc.vector(p)


def galerkin_vector_field(H: LiftedHamiltonian, chi: ChiCutoff, level: TruncationLevel,
                          p: ProductPoint) -> ProductPoint:
    """Minus the gradient, projected onto modes -k..l (lambda untouched).

    The result is a tangent vector packed as a :class:`ProductPoint`; its
    ``lam`` field is the lambda component.
    """
    disc = _disc(H, level, max(p.max_mode, level.max_mode))
    v = _check_point(disc, p)
    g = -disc.gradient(H, chi, v)
    g[~_window(disc, level)] = 0.0
    return disc.point(g)


# ---------------------------------------------------------------------------
# time stepping
# ---------------------------------------------------------------------------


def _phi1(z):
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-8
    zs = np.where(small, 1.0, z)
    return np.where(small, 1.0 + 0.5 * z, np.expm1(zs) / zs)


def _exp_midpoint(H, chi, disc, mask, v, dt, freeze_lambda):
    loops = mask[:disc.D]
    chi0, _, _ = chi.derivatives(v[-1])
    rate = (TWO_PI * disc.kvec + TWO_PI * chi0 * disc.y_mask) / disc.weights
    rate = np.where(loops, rate, 0.0)

    def nonlinear(u):
        g = disc.gradient(H, chi, u)
        nl = -(g[:disc.D] - rate * u[:disc.D])
        return np.where(loops, nl, 0.0), (0.0 if freeze_lambda else -g[-1])

    def advance(h, nl, dlam):
        out = v.copy()
        out[:disc.D] = np.exp(-rate * h) * v[:disc.D] + h * _phi1(-rate * h) * nl
        out[-1] = v[-1] + h * dlam
        return out

    half = advance(0.5 * dt, *nonlinear(v))
    return advance(dt, *nonlinear(half))


def flow_step(H: LiftedHamiltonian, chi: ChiCutoff, level: TruncationLevel, p: ProductPoint,
              dt: float, freeze_lambda: bool = False, max_halvings: int = 40,
              return_dt: bool = False):
    """One exponential-midpoint step of the truncated negative gradient flow.

    The mode-wise linear part (from L and 2 pi chi(lam) j*, with chi frozen at
    the start of the step) is integrated exactly and the remainder by the
    midpoint rule.  A step that raises the action by more than rounding is
    retried with half the time step.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    disc = _disc(H, level, max(p.max_mode, level.max_mode))
    v = _check_point(disc, p)
    mask = _window(disc, level)
    a0 = disc.action(H, chi, v)
    tol = 1e-12 * (1.0 + abs(a0))
    h = dt
    for _ in range(max_halvings + 1):
        w = _exp_midpoint(H, chi, disc, mask, v, h, freeze_lambda)
        if disc.action(H, chi, w) <= a0 + tol:
            out = disc.point(w)
            return (out, h) if return_dt else out
        h *= 0.5
    raise RuntimeError("flow step rejected at every step size")


def integrate_flow(H, chi, level, p, dt, steps, freeze_lambda=False):
    """Run ``steps`` calls of :func:`flow_step`; return points and actions."""
    disc = _disc(H, level, max(p.max_mode, level.max_mode))
    points = [p]
    actions = [disc.action(H, chi, _check_point(disc, p))]
    for _ in range(steps):
        p = flow_step(H, chi, level, p, dt, freeze_lambda)
        points.append(p)
        actions.append(disc.action(H, chi, _check_point(disc, p)))
    return points, np.array(actions)


# ---------------------------------------------------------------------------
# Levenberg-Marquardt search for critical points
# ---------------------------------------------------------------------------


@dataclass
class SolveResult:
    point: ProductPoint
    status: str
    residual: float
    iterations: int
    action: float
    y_l2: float
    lam: float
    lambda_interior: bool

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def constraints_ok(self, tol: float) -> bool:
        """Critical points sit strictly inside the window with ||y||_2 = 1."""
        return self.converged and self.lambda_interior and abs(self.y_l2 - 1.0) <= tol


def _inside(disc: Discretization, v, R: float | None, lambda0: float) -> bool:
    if not lambda0 <= v[-1] <= lambda0 + 1.0:
        return False
    if R is None:
        return True
    xr, yr = disc.radii(v)
    return xr <= R and yr <= R


def _lm_step(J, r, metric, mu):
    A = J.T @ J
    A[np.diag_indices_from(A)] += mu * metric
    return np.linalg.solve(A, -(J.T @ r))


def solve_critical(H: LiftedHamiltonian, chi: ChiCutoff, level: TruncationLevel,
                   start: ProductPoint, tol: float = 1e-10, max_iters: int = 200,
                   R: float | None = 10.0) -> SolveResult:
    """Damped least-squares search for a zero of the truncated gradient.

    The residual is the gradient measured in the H^{1/2} x R norm; steps are
    damped in the same metric and rejected if they leave Omega_R.  Statuses:
    ``converged``, ``diverged`` (kept trying to leave Omega_R), ``stalled``
    (no descent at any damping) and ``max_iters``.
    """
    disc = _disc(H, level, max(start.max_mode, level.max_mode))
    mask = _window(disc, level)
    v = _check_point(disc, start.wrapped())
    v[~mask] = 0.0
    metric = np.concatenate([disc.weights, [1.0]])[mask]
    mu = 1e-3
    status = "max_iters"
    r = disc.residual(H, chi, v)[mask]
    res = float(np.linalg.norm(r))
    it = 0
    for it in range(1, max_iters + 1):
        if res <= tol:
            status = "converged"
            break
        J = disc.residual_jacobian(H, chi, v)[np.ix_(mask, mask)]
        exits = 0
        while True:
            try:
                step = _lm_step(J, r, metric, mu)
            except np.linalg.LinAlgError:
                step = None
            if step is not None:
                w = v.copy()
                w[mask] += step
                if not _inside(disc, w, R, chi.lambda0):
                    exits += 1
                else:
                    r_new = disc.residual(H, chi, w)[mask]
                    res_new = float(np.linalg.norm(r_new))
                    if res_new < res:
                        v, r, res = w, r_new, res_new
                        mu = max(mu / 5.0, 1e-14)
                        break
            mu *= 6.0
            if mu > 1e14:
                status = "diverged" if exits > 10 else "stalled"
                break
        if status != "max_iters":
            break
    else:
        if res <= tol:
            status = "converged"
    p = disc.point(v).wrapped()
    v = disc.vector(p)
    lam = float(v[-1])
    eps = chi.eps
    return SolveResult(point=p, status=status, residual=res, iterations=it,
                       action=disc.action(H, chi, v), y_l2=float(np.sqrt(disc.y_l2_sq(v))),
                       lam=lam,
                       lambda_interior=chi.lambda0 + eps < lam < chi.lambda0 + 1.0 - eps)


def multistart_starts(m: int, n: int, K: int, count: int, seed: int = 0,
                      perturbation: float = 0.1) -> list[ProductPoint]:
    """Starts near the critical manifold of the unperturbed action.

    Torus means are stratified over a grid on T^{2m}, y means are uniform on
    S^{2n+1}, lambda is near 0, and every loop gets a small random
    oscillating part.  Start ``i`` uses ``default_rng([seed, i])``.
    """
    dx, dy = 2 * m, 2 * n + 2
    g = max(1, int(np.ceil(count ** (1.0 / dx))))
    modes = np.abs(np.arange(-K, K + 1))
    decay = (1.0 + modes) ** -2.0
    starts = []
    for i in range(count):
        rng = np.random.default_rng([seed, i])
        cell = np.array(np.unravel_index(i % g**dx, (g,) * dx), dtype=float)
        x = rng.standard_normal((2 * K + 1, dx)) * (perturbation * decay)[:, None]
        x[K] = (cell + rng.uniform(0.0, 1.0, dx)) / g
        y = rng.standard_normal((2 * K + 1, dy)) * (perturbation * decay)[:, None]
        y0 = rng.standard_normal(dy)
        y[K] = y0 / np.linalg.norm(y0) * (1.0 + perturbation * rng.uniform(-1.0, 1.0))
        lam = float(np.clip(perturbation * rng.standard_normal(), -0.3, 0.3))
        starts.append(ProductPoint(FourierLoop(x), FourierLoop(y), lam))
    return starts


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("HOPF_CONLEY_THREADS", "1")))
    except ValueError:
        return 1


def _solve_one(args):
    H, chi, level, start, tol, max_iters, R = args
    return solve_critical(H, chi, level, start, tol, max_iters, R)


def solve_many(H, chi, level, starts, tol=1e-10, max_iters=200, R=10.0,
               workers: int | None = None) -> list[SolveResult]:
    """Solve from every start; results come back in start order."""
    jobs = [(H, chi, level, s, tol, max_iters, R) for s in starts]
    workers = workers or _workers()
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(_solve_one, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    return [_solve_one(j) for j in jobs]


# ---------------------------------------------------------------------------
# S^1 x Z^{2m} quotient and clustering
# ---------------------------------------------------------------------------


def align(p: ProductPoint, q: ProductPoint) -> tuple[float, np.ndarray]:
    """Phase (in turns) and integer shift moving ``q`` closest to ``p``.

    The phase maximising <y_p, exp(theta J) y_q> in H^{1/2} is
    atan2(<y_p, J y_q>, <y_p, y_q>), so no search over theta is needed.
    """
    K = max(p.max_mode, q.max_mode)
    p, q = p.resized(K), q.resized(K)
    from .loop_space import h_half_weights

    w = h_half_weights(K)[:, None]
    a, b = p.y.coeffs, q.y.coeffs
    Jb = rotate_pairs(b, 0.5 * np.pi)
    theta = np.arctan2(np.sum(w * a * Jb), np.sum(w * a * b))
    shift = np.round(p.x.coeffs[K] - q.x.coeffs[K])
    return float(theta / TWO_PI), shift


def quotient_distance(p: ProductPoint, q: ProductPoint) -> float:
    """min over phase rotations of y and integer shifts of the torus mean of the
    H^{1/2} x R distance between ``p`` and ``q``."""
    K = max(p.max_mode, q.max_mode)
    p, q = p.resized(K), q.resized(K)
    from .loop_space import h_half_weights

    w = h_half_weights(K)[:, None]
    theta, shift = align(p, q)
    dx = p.x.coeffs - q.x.coeffs
    dx[K] -= shift
    dy = p.y.coeffs - rotate_pairs(q.y.coeffs, TWO_PI * theta)
    return float(np.sqrt(np.sum(w * dx**2) + np.sum(w * dy**2) + (p.lam - q.lam) ** 2))


@dataclass
class CriticalFamily:
    representative: ProductPoint
    residual: float
    action: float
    lam: float
    multiplicity: int = 1

    def to_dict(self) -> dict:
        return {"representative": self.representative.to_dict(), "residual": self.residual,
                "action": self.action, "lambda": self.lam,
                "multiplicity": self.multiplicity}


def cluster_families(points, radius: float = 1e-3) -> list[CriticalFamily]:
    """Greedy clustering under :func:`quotient_distance`.

    ``points`` may hold :class:`SolveResult` objects (residual and action are
    carried over) or bare :class:`ProductPoint` objects.  The first point of a
    cluster is its representative, so the output is order-deterministic.
    """
    families: list[CriticalFamily] = []
    for item in points:
        if isinstance(item, SolveResult):
            p, res, act = item.point, item.residual, item.action
        else:
            p, res, act = item, float("nan"), float("nan")
        for fam in families:
            if quotient_distance(fam.representative, p) <= radius:
                fam.multiplicity += 1
                break
        else:
            families.append(CriticalFamily(p, res, act, p.lam))
    return families


def find_families(H: LiftedHamiltonian, chi: ChiCutoff, level: TruncationLevel,
                  count: int, seed: int = 0, tol: float = 1e-10, radius: float = 1e-3,
                  max_iters: int = 200, R: float | None = 10.0, perturbation: float = 0.1,
                  constraint_tol: float = 1e-8, starts: list[ProductPoint] | None = None):
    """Multistart search followed by clustering of the admissible hits.

    Returns ``(families, results)``.  Only converged points that pass the
    critical-point constraints (unit ||y||_2, interior lambda) enter the
    clustering.  Explicit ``starts`` override the generated ones, which lets
    two truncation levels share the same (zero-padded) starting points.
    """
    if starts is None:
        starts = multistart_starts(H.m, H.n, level.max_mode, count, seed, perturbation)
    else:
        starts = [st.resized(max(st.max_mode, level.max_mode)) for st in starts]
    results = solve_many(H, chi, level, starts, tol, max_iters, R)
    good = [r for r in results if r.constraints_ok(constraint_tol)]
    return cluster_families(good, radius), results


# ---------------------------------------------------------------------------
# isolating neighbourhoods
# ---------------------------------------------------------------------------


@dataclass
class IsolationAudit:
    """Sampled evidence that Omega_R isolates the rest points for s in s_grid.

    ``a`` and ``b`` bound the action on the located rest points, which bounds
    the action along every full orbit inside Omega_R of a gradient flow;
    ``a_sampled``/``b_sampled`` give the (looser) range over random points of
    Omega_r for reference.
    """

    R: float
    r: float
    rho: float
    a: float
    b: float
    s_grid: list[float]
    verdict: bool
    required_R: float
    rest_points: int
    constraint_violations: int
    tail_min_ratio: float
    tail_ok: bool
    a_sampled: float
    b_sampled: float
    per_s: list[dict] = field(default_factory=list)
    failing_s: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["verdict"] = "pass" if self.verdict else "fail"
        return d


def _scaled_to(vec, target):
    nrm = np.linalg.norm(vec)
    return vec * (target / nrm) if nrm > 0 else vec


def _random_loop_block(rng, disc, which, mask, norm_target):
    """Random coefficients for x_perp or y with H^{1/2} norm ``norm_target``."""
    M = 2 * disc.K + 1
    d = disc.dx if which == "x" else disc.dy
    sl = slice(0, disc.Dx) if which == "x" else slice(disc.Dx, disc.D)
    w = disc.weights[sl]
    style = rng.integers(3)
    c = np.zeros((M, d))
    if style == 0 and which == "y":
        c[disc.K] = rng.standard_normal(d)
    elif style == 1:
        k = rng.integers(-disc.K, disc.K + 1)
        if which == "x" and k == 0:
            k = 1
        c[k + disc.K] = rng.standard_normal(d)
    else:
        c = rng.standard_normal((M, d)) / (1.0 + np.abs(np.arange(-disc.K, disc.K + 1)))[:, None]
    flat = c.ravel()
    if which == "x":
        flat[disc.x0_slice] = 0.0
    flat = flat * mask[sl]
    flat = _scaled_to(np.sqrt(w) * flat, norm_target) / np.sqrt(w)
    return flat


def _shell_samples(rng, disc, mask, r, R, count, lambda0):
    """Points on the faces {||x_perp|| = rho'}, {||y|| = rho'} with rho' in
    [r, R], and {lam = lambda0}, {lam = lambda0 + 1}."""
    out = []
    for i in range(count):
        v = np.zeros(disc.size)
        v[disc.x0_slice] = rng.uniform(0.0, 1.0, disc.dx)
        face = ("y", "x", "lam")[i % 3]
        radius = (R, r, rng.uniform(r, R))[rng.integers(3)]
        if face == "lam":
            v[:disc.Dx] += _random_loop_block(rng, disc, "x", mask, R * rng.uniform() ** 2)
            v[disc.Dx:disc.D] = _random_loop_block(rng, disc, "y", mask, R * rng.uniform())
            v[-1] = lambda0 if rng.integers(2) == 0 else lambda0 + 1.0
            out.append((face, None, v))
            continue
        other = "x" if face == "y" else "y"
        own = _random_loop_block(rng, disc, face, mask, radius)
        oth = _random_loop_block(rng, disc, other, mask, radius * rng.uniform())
        if face == "y":
            v[disc.Dx:disc.D], v[:disc.Dx] = own, v[:disc.Dx] + oth
        else:
            v[:disc.Dx], v[disc.Dx:disc.D] = v[:disc.Dx] + own, oth
        if rng.uniform() < 0.4:
            u = rng.uniform(0.0, 1.0)
            lam = lambda0 + u if rng.integers(2) == 0 else lambda0 + 1.0 - u
            v[-1] = float(np.clip(lam, lambda0, lambda0 + 1.0))
        else:
            v[-1] = rng.uniform(lambda0, lambda0 + 1.0)
        out.append((face, radius, v))
    return out


def _project_face(disc, v, face, radius, R, lambda0):
    v = v.copy()
    v[-1] = float(np.clip(v[-1], lambda0, lambda0 + 1.0))
    sw = np.sqrt(disc.weights)
    xs = v[:disc.Dx].copy()
    x0 = xs[disc.x0_slice].copy()
    xs[disc.x0_slice] = 0.0
    ys = v[disc.Dx:disc.D]
    if face == "y":
        ys = _scaled_to(sw[disc.Dx:] * ys, radius) / sw[disc.Dx:]
    elif face == "x":
        xs = _scaled_to(sw[:disc.Dx] * xs, radius) / sw[:disc.Dx]
    else:
        v[-1] = lambda0 if v[-1] < lambda0 + 0.5 else lambda0 + 1.0
    for blk, sl in ((xs, slice(0, disc.Dx)), (ys, slice(disc.Dx, disc.D))):
        nrm = np.linalg.norm(sw[sl] * blk)
        if nrm > R:
            blk *= R / nrm
    xs[disc.x0_slice] = x0
    v[:disc.Dx] = xs
    v[disc.Dx:disc.D] = ys
    return v


def shell_min_gradient(H, chi, disc, mask, r, R, samples, seed, refine=6, refine_iters=20):
    """Smallest gradient norm found on the shell between radii r and R.

    Random face samples are followed by a projected Levenberg-Marquardt
    descent of ||grad||^2 from the ``refine`` best ones, which only lowers
    the estimate.
    """
    rng = np.random.default_rng([seed, 7919])
    pts = _shell_samples(rng, disc, mask, r, R, samples, chi.lambda0)
    norms = np.array([np.linalg.norm(disc.residual(H, chi, v)[mask]) for _, _, v in pts])
    metric = np.concatenate([disc.weights, [1.0]])[mask]
    best = float(norms.min()) if len(norms) else np.inf
    for idx in np.argsort(norms)[:refine]:
        face, radius, v = pts[idx]
        r_v = disc.residual(H, chi, v)[mask]
        cur = float(np.linalg.norm(r_v))
        mu = 1e-2
        for _ in range(refine_iters):
            J = disc.residual_jacobian(H, chi, v)[np.ix_(mask, mask)]
            improved = False
            while mu < 1e10:
                w = v.copy()
                w[mask] += _lm_step(J, r_v, metric, mu)
                w = _project_face(disc, w, face, radius, R, chi.lambda0)
                r_w = disc.residual(H, chi, w)[mask]
                nw = float(np.linalg.norm(r_w))
                if nw < cur:
                    v, r_v, cur = w, r_w, nw
                    mu = max(mu / 5.0, 1e-10)
                    improved = True
                    break
                mu *= 6.0
            if not improved:
                break
        best = min(best, cur)
    return best


def _tail_ratio(H, chi, level, samples, seed, extra=2):
    """min over samples z in the orthogonal complement of the window of
    <F(z), L z> / ||L z||^2, computed in a truncation with ``extra`` more modes."""
    K = level.max_mode + extra
    disc = discretization(H.m, H.n, K)
    inside = _window(disc, level)[:disc.D]
    rng = np.random.default_rng([seed, 104729])
    sign = np.sign(disc.kvec)
    best = np.inf
    for _ in range(samples):
        v = np.zeros(disc.size)
        v[:disc.D] = rng.standard_normal(disc.D) * rng.uniform(0.1, 3.0)
        v[:disc.D][inside] = 0.0
        v[-1] = rng.uniform(chi.lambda0, chi.lambda0 + 1.0)
        Lz = sign * v[:disc.D]
        nrm = float(np.sum(disc.weights * Lz**2))
        if nrm == 0:
            continue
        F = disc.gradient(H, chi, v)[:disc.D]
        best = min(best, float(np.sum(disc.weights * F * Lz)) / nrm)
    return best


def _sampled_action_range(H, chi, disc, mask, r, samples, seed):
    rng = np.random.default_rng([seed, 15485863])
    vals = []
    sw = np.sqrt(disc.weights)
    for _ in range(samples):
        v = np.zeros(disc.size)
        v[:disc.D] = rng.standard_normal(disc.D) * mask[:disc.D]
        x = v[:disc.Dx].copy()
        x[disc.x0_slice] = 0.0
        x = _scaled_to(sw[:disc.Dx] * x, r * rng.uniform()) / sw[:disc.Dx]
        x[disc.x0_slice] = rng.uniform(0.0, 1.0, disc.dx)
        v[:disc.Dx] = x
        v[disc.Dx:disc.D] = _scaled_to(sw[disc.Dx:] * v[disc.Dx:disc.D],
                                       r * rng.uniform()) / sw[disc.Dx:]
        v[-1] = rng.uniform(chi.lambda0, chi.lambda0 + 1.0)
        vals.append(disc.action(H, chi, v))
    return (float(min(vals)), float(max(vals))) if vals else (np.nan, np.nan)


def _audit_one_s(H, chi, level, R, s, shell_samples, seed, starts, r_margin, tol,
                 constraint_tol, refine):
    Hs = H.scaled(s)
    disc = _disc(H, level)
    mask = _window(disc, level)
    st = multistart_starts(H.m, H.n, disc.K, starts, seed)
    results = solve_many(Hs, chi, level, st, tol=tol, R=R)
    rest = [res for res in results if res.converged]
    violations = sum(1 for res in rest if not res.constraints_ok(constraint_tol))
    if rest:
        radii = [max(disc.radii(disc.vector(res.point))) for res in rest]
        r = max(radii) * (1.0 + r_margin)
        acts = [res.action for res in rest]
        a, b = float(min(acts)), float(max(acts))
    else:
        r, a, b = np.nan, np.nan, np.nan
    if rest and r < R:
        rho = shell_min_gradient(Hs, chi, disc, mask, r, R, shell_samples, seed, refine)
    else:
        rho = 0.0
    required = 2.0 * (r + (b - a) / rho) if rho > 0 and rest else np.inf
    tail = _tail_ratio(Hs, chi, level, max(8, shell_samples // 4), seed)
    a_smp, b_smp = _sampled_action_range(Hs, chi, disc, mask, r, 64, seed) if rest \
        else (np.nan, np.nan)
    ok = bool(rest) and rho > RHO_FLOOR and R >= required and tail > 0
    return {"s": float(s), "r": float(r), "rho": float(rho), "a": a, "b": b,
            "required_R": float(required), "rest_points": len(rest),
            "constraint_violations": violations, "tail_min_ratio": float(tail),
            "a_sampled": a_smp, "b_sampled": b_smp, "verdict": ok}


def audit_isolating_neighborhood(H: LiftedHamiltonian, chi: ChiCutoff, level: TruncationLevel,
                                 R: float, s_grid, shell_samples: int = 96, seed: int = 0,
                                 starts: int = 12, r_margin: float = 0.25, tol: float = 1e-10,
                                 constraint_tol: float = 1e-8, refine: int = 6) -> IsolationAudit:
    """Check that Omega_R = T^{2m} x B_R x B_R x [-1/2, 1/2] isolates the rest
    points of the truncated flow of A_{sH} for every s in ``s_grid``.

    Per s: rest points are located by a small multistart, ``r`` is their
    largest radius times ``1 + r_margin``, ``[a, b]`` their action range, and
    ``rho`` the smallest gradient norm found on the faces between radii r and
    R and on the lambda faces.  The verdict uses the constants uniformly over
    ``s_grid``: rho > 0 and R >= 2 (r + (b - a) / rho).  The tail condition
    <F(z), L z> > 0 for z orthogonal to the Galerkin window is sampled too.
    """
    if R <= 0:
        raise ValueError("R must be positive")
    s_grid = [float(s) for s in s_grid]
    if not s_grid or any(s < 0.0 or s > 1.0 for s in s_grid):
        raise ValueError("s_grid must be a non-empty subset of [0, 1]")
    per_s = [_audit_one_s(H, chi, level, R, s, shell_samples, seed, starts, r_margin, tol,
                          constraint_tol, refine) for s in s_grid]
    return merge_audits(R, per_s)


def _finite_extreme(values, pick) -> float:
    finite = [v for v in values if np.isfinite(v)]
    return float(pick(finite)) if finite else float("nan")


def merge_audits(R: float, per_s: list[dict]) -> IsolationAudit:
    r = max(d["r"] for d in per_s)
    rho = min(d["rho"] for d in per_s)
    a = min(d["a"] for d in per_s)
    b = max(d["b"] for d in per_s)
    tail = min(d["tail_min_ratio"] for d in per_s)
    finite = all(np.isfinite([r, a, b])) and all(d["rest_points"] for d in per_s)
    required = 2.0 * (r + (b - a) / rho) if finite and rho > 0 else np.inf
    verdict = bool(finite and rho > RHO_FLOOR and R >= required and tail > 0
                   and all(d["verdict"] for d in per_s))
    return IsolationAudit(
        R=float(R), r=float(r), rho=float(rho), a=float(a), b=float(b),
        s_grid=[d["s"] for d in per_s], verdict=verdict, required_R=float(required),
        rest_points=sum(d["rest_points"] for d in per_s),
        constraint_violations=sum(d["constraint_violations"] for d in per_s),
        tail_min_ratio=float(tail), tail_ok=bool(tail > 0),
        a_sampled=_finite_extreme([d["a_sampled"] for d in per_s], min),
        b_sampled=_finite_extreme([d["b_sampled"] for d in per_s], max),
        per_s=per_s, failing_s=[d["s"] for d in per_s if not d["verdict"]])


def continuation_sweep(H: LiftedHamiltonian, chi: ChiCutoff, level: TruncationLevel,
                       R: float, steps: int, **audit_kw) -> list[IsolationAudit]:
    """Audit Omega_R separately at s = 0, 1/steps, ..., 1."""
    if steps < 2:
        raise ValueError("steps must be at least 2")
    return [audit_isolating_neighborhood(H, chi, level, R, [i / steps], **audit_kw)
            for i in range(steps + 1)]


def first_failure(audits: list[IsolationAudit]) -> float | None:
    """Smallest s whose audit failed, or None when the sweep passed."""
    for audit in audits:
        if not audit.verdict:
            return audit.s_grid[0]
    return None
