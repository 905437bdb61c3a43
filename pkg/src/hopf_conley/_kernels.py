"""Pointwise Hamiltonian kernels evaluated on time grids.

Every Hamiltonian handled by the package is a finite sum of terms

    a_i * cos(2*pi*(nu_t t + nu . x) + phi_i) * y^T S_i y

so values, gradients and Hessians at a batch of grid points reduce to a
double loop over (grid point, term).  Two interchangeable backends are
provided: a numba ``@njit`` path and a vectorised numpy path.  The numba path
is used when numba imports cleanly and ``HOPF_CONLEY_DISABLE_NUMBA`` is not
set to a truthy value.
"""
from __future__ import annotations

import os

import numpy as np

TWO_PI = 2.0 * np.pi

_FLAG = os.environ.get("HOPF_CONLEY_DISABLE_NUMBA", "").strip().lower()
NUMBA_DISABLED = _FLAG in {"1", "true", "yes", "on"}

try:
    if NUMBA_DISABLED:
        raise ImportError("numba disabled by HOPF_CONLEY_DISABLE_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False


# ---------------------------------------------------------------------------
# numpy backend
# ---------------------------------------------------------------------------


def _phases_numpy(t, X, freq_t, freq_x, phase):
    return TWO_PI * (np.outer(t, freq_t) + X @ freq_x.T) + phase[None, :]


def eval_terms_numpy(t, X, Y, freq_t, freq_x, phase, amp, forms):
    """Return ``(value, grad_x, grad_y)`` at every grid point."""
    theta = _phases_numpy(t, X, freq_t, freq_x, phase)
    c = np.cos(theta) * amp[None, :]
    s = np.sin(theta) * amp[None, :]
    SY = np.einsum("tab,jb->jta", forms, Y)
    Q = np.einsum("ja,jta->jt", Y, SY)
    value = np.sum(c * Q, axis=1)
    gx = -TWO_PI * (s * Q) @ freq_x
    gy = 2.0 * np.einsum("jt,jta->ja", c, SY)
    return value, gx, gy


def hess_terms_numpy(t, X, Y, freq_t, freq_x, phase, amp, forms):
    """Return ``(h_xx, h_xy, h_yy)`` at every grid point."""
    theta = _phases_numpy(t, X, freq_t, freq_x, phase)
    c = np.cos(theta) * amp[None, :]
    s = np.sin(theta) * amp[None, :]
    SY = np.einsum("tab,jb->jta", forms, Y)
    Q = np.einsum("ja,jta->jt", Y, SY)
    hxx = -(TWO_PI**2) * np.einsum("jt,ta,tb->jab", c * Q, freq_x, freq_x)
    hxy = -2.0 * TWO_PI * np.einsum("jt,ta,jtb->jab", s, freq_x, SY)
    hyy = 2.0 * np.einsum("jt,tab->jab", c, forms)
    return hxx, hxy, hyy


def form_field_numpy(t, X, freq_t, freq_x, phase, amp, forms):
    """Symmetric matrix M(t, x) with H(t, x, y) = y^T M y, per grid point."""
    theta = _phases_numpy(t, X, freq_t, freq_x, phase)
    c = np.cos(theta) * amp[None, :]
    return np.einsum("jt,tab->jab", c, forms)


# ---------------------------------------------------------------------------
# numba backend
# ---------------------------------------------------------------------------


def _eval_terms_loops(t, X, Y, freq_t, freq_x, phase, amp, forms):
    N = t.shape[0]
    T = amp.shape[0]
    dx = X.shape[1]
    dy = Y.shape[1]
    value = np.zeros(N)
    gx = np.zeros((N, dx))
    gy = np.zeros((N, dy))
    sy = np.empty(dy)
    for j in range(N):
        for i in range(T):
            theta = freq_t[i] * t[j]
            for a in range(dx):
                theta += freq_x[i, a] * X[j, a]
            theta = TWO_PI * theta + phase[i]
            c = amp[i] * np.cos(theta)
            s = amp[i] * np.sin(theta)
            q = 0.0
            for a in range(dy):
                acc = 0.0
                for b in range(dy):
                    acc += forms[i, a, b] * Y[j, b]
                sy[a] = acc
                q += Y[j, a] * acc
            value[j] += c * q
            for a in range(dx):
                gx[j, a] -= TWO_PI * s * freq_x[i, a] * q
            for a in range(dy):
                gy[j, a] += 2.0 * c * sy[a]
    return value, gx, gy


def _hess_terms_loops(t, X, Y, freq_t, freq_x, phase, amp, forms):
    N = t.shape[0]
    T = amp.shape[0]
    dx = X.shape[1]
    dy = Y.shape[1]
    hxx = np.zeros((N, dx, dx))
    hxy = np.zeros((N, dx, dy))
    hyy = np.zeros((N, dy, dy))
    sy = np.empty(dy)
    for j in range(N):
        for i in range(T):
            theta = freq_t[i] * t[j]
            for a in range(dx):
                theta += freq_x[i, a] * X[j, a]
            theta = TWO_PI * theta + phase[i]
            c = amp[i] * np.cos(theta)
            s = amp[i] * np.sin(theta)
            q = 0.0
            for a in range(dy):
                acc = 0.0
                for b in range(dy):
                    acc += forms[i, a, b] * Y[j, b]
                sy[a] = acc
                q += Y[j, a] * acc
            for a in range(dx):
                for b in range(dx):
                    hxx[j, a, b] -= TWO_PI * TWO_PI * c * q * freq_x[i, a] * freq_x[i, b]
                for b in range(dy):
                    hxy[j, a, b] -= 2.0 * TWO_PI * s * freq_x[i, a] * sy[b]
            for a in range(dy):
                for b in range(dy):
                    hyy[j, a, b] += 2.0 * c * forms[i, a, b]
    return hxx, hxy, hyy


def _form_field_loops(t, X, freq_t, freq_x, phase, amp, forms):
    N = t.shape[0]
    T = amp.shape[0]
    dx = X.shape[1]
    dy = forms.shape[1]
    out = np.zeros((N, dy, dy))
    for j in range(N):
        for i in range(T):
            theta = freq_t[i] * t[j]
            for a in range(dx):
                theta += freq_x[i, a] * X[j, a]
            c = amp[i] * np.cos(TWO_PI * theta + phase[i])
            for a in range(dy):
                for b in range(dy):
                    out[j, a, b] += c * forms[i, a, b]
    return out


if HAVE_NUMBA:
    eval_terms_numba = njit(cache=True)(_eval_terms_loops)
    hess_terms_numba = njit(cache=True)(_hess_terms_loops)
    form_field_numba = njit(cache=True)(_form_field_loops)
else:  # pragma: no cover - exercised only without numba
    eval_terms_numba = _eval_terms_loops
    hess_terms_numba = _hess_terms_loops
    form_field_numba = _form_field_loops

_BACKENDS = {
    "numpy": (eval_terms_numpy, hess_terms_numpy, form_field_numpy),
    "numba": (eval_terms_numba, hess_terms_numba, form_field_numba),
}

BACKEND = "numba" if HAVE_NUMBA else "numpy"


def get_backend(name: str | None = None):
    """Return ``(eval_terms, hess_terms, form_field)`` for ``name``.

    ``None`` selects the active backend.  Asking for ``"numba"`` without numba
    installed returns the uncompiled loop versions, which are slow but exact.
    """
    return _BACKENDS[name or BACKEND]


eval_terms, hess_terms, form_field = get_backend()
