"""Numeric kernels for the neural substrate.

Two interchangeable implementations of the same small kernel set:

* a pure-numpy path (always available), and
* a numba ``@njit`` path that fuses the elementwise work (bias add, ReLU,
  Adam moment updates) which dominates per-call overhead at these tiny
  layer sizes.

Selection is controlled by the ``TRUSTSIM_BACKEND`` environment variable:
``auto`` (default: numba when importable), ``numba``, or ``numpy``.
Both paths are deterministic; they may differ in the last floating-point
ulp because reduction order differs, so a single run must stick to one
backend (the selection is made once at import).
"""

from __future__ import annotations

import os
from types import SimpleNamespace

import numpy as np


def _numpy_impl() -> SimpleNamespace:
    def dense_forward(x, w, b):
        return x @ w + b

    def dense_relu_forward(x, w, b):
        return np.maximum(x @ w + b, 0.0)

    def relu_backward(dz, z):
        # z is the post-activation output; units at exactly 0 pass no gradient
        return dz * (z > 0.0)

    def grad_weights(x, dz):
        return x.T @ dz

    def grad_input(dz, w):
        return dz @ w.T

    def colsum(dz):
        return dz.sum(axis=0)

    def adam_update(p, g, m, v, lr, beta1, beta2, eps, b1t, b2t):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        mhat = m / (1.0 - b1t)
        vhat = v / (1.0 - b2t)
        p -= lr * mhat / (np.sqrt(vhat) + eps)

    return SimpleNamespace(
        name="numpy",
        dense_forward=dense_forward,
        dense_relu_forward=dense_relu_forward,
        relu_backward=relu_backward,
        grad_weights=grad_weights,
        grad_input=grad_input,
        colsum=colsum,
        adam_update=adam_update,
    )


def _numba_impl() -> SimpleNamespace | None:
    try:
        from numba import njit
    except ImportError:
        return None

    @njit(cache=True)
    def dense_forward(x, w, b):
        y = np.dot(x, w)
        for i in range(y.shape[0]):
            for j in range(y.shape[1]):
                y[i, j] += b[j]
        return y

    @njit(cache=True)
    def dense_relu_forward(x, w, b):
        y = np.dot(x, w)
        for i in range(y.shape[0]):
            for j in range(y.shape[1]):
                t = y[i, j] + b[j]
                # t * 0.0 keeps NaN propagation consistent with np.maximum
                y[i, j] = t if t > 0.0 else t * 0.0
        return y

    @njit(cache=True)
    def relu_backward(dz, z):
        out = np.empty_like(dz)
        for i in range(dz.shape[0]):
            for j in range(dz.shape[1]):
                out[i, j] = dz[i, j] if z[i, j] > 0.0 else 0.0
        return out

    @njit(cache=True)
    def grad_weights(x, dz):
        return np.dot(x.T.copy(), dz)

    @njit(cache=True)
    def grad_input(dz, w):
        return np.dot(dz, w.T.copy())

    @njit(cache=True)
    def colsum(dz):
        out = np.zeros(dz.shape[1])
        for i in range(dz.shape[0]):
            for j in range(dz.shape[1]):
                out[j] += dz[i, j]
        return out

    @njit(cache=True)
    def adam_update(p, g, m, v, lr, beta1, beta2, eps, b1t, b2t):
        c1 = 1.0 - beta1
        c2 = 1.0 - beta2
        for i in range(p.shape[0]):
            gi = g[i]
            m[i] = beta1 * m[i] + c1 * gi
            v[i] = beta2 * v[i] + c2 * gi * gi
            mhat = m[i] / (1.0 - b1t)
            vhat = v[i] / (1.0 - b2t)
            p[i] -= lr * mhat / (np.sqrt(vhat) + eps)

    return SimpleNamespace(
        name="numba",
        dense_forward=dense_forward,
        dense_relu_forward=dense_relu_forward,
        relu_backward=relu_backward,
        grad_weights=grad_weights,
        grad_input=grad_input,
        colsum=colsum,
        adam_update=adam_update,
    )


NUMPY = _numpy_impl()

_mode = os.environ.get("TRUSTSIM_BACKEND", "auto").lower()
if _mode not in ("auto", "numba", "numpy"):
    raise ValueError(f"TRUSTSIM_BACKEND must be auto|numba|numpy, got {_mode!r}")

if _mode == "numpy":
    NUMBA = None
else:
    NUMBA = _numba_impl()
    if _mode == "numba" and NUMBA is None:
        raise RuntimeError("TRUSTSIM_BACKEND=numba but numba is not importable")

ACTIVE = NUMBA if NUMBA is not None else NUMPY


def backend_name() -> str:
    return ACTIVE.name
