"""Primitive numeric operations: unit activations, regularized division,
penalty terms, the Adam update and a finite-difference gradient checker.

All functions accept scalars or numpy arrays and operate elementwise in
float64.
"""

from dataclasses import dataclass, field

import numpy as np

# Threshold used for the regularized division at validation/test time.
EVAL_THRESHOLD = 1e-4


def div_forward(a, b, theta):
    """Regularized division: a/b where b > theta, 0 otherwise.

    The clamped branch also has zero gradient (see div_backward), so a
    denominator at or below the threshold contributes nothing to training.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    ok = b > theta
    safe = np.where(ok, b, 1.0)
    return np.where(ok, a / safe, 0.0)


def div_backward(a, b, theta, grad_out=1.0):
    """Partials of div_forward: (1/b, -a/b^2) where b > theta, else (0, 0)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    ok = b > theta
    safe = np.where(ok, b, 1.0)
    da = np.where(ok, grad_out / safe, 0.0)
    db = np.where(ok, -grad_out * a / (safe * safe), 0.0)
    return da, db


def div_penalty(b, theta):
    """Hinge penalty max(theta - b, 0) on forbidden denominator inputs."""
    b = np.asarray(b, dtype=np.float64)
    return np.maximum(theta - b, 0.0)


def div_penalty_grad(b, theta):
    """Subgradient of div_penalty: -1 for b < theta, 0 at and above it."""
    b = np.asarray(b, dtype=np.float64)
    return np.where(b < theta, -1.0, 0.0)


def bound_penalty(y, bound):
    """max(y - B, 0) + max(-y - B, 0): zero inside [-B, B], slope 1 outside."""
    y = np.asarray(y, dtype=np.float64)
    return np.maximum(y - bound, 0.0) + np.maximum(-y - bound, 0.0)


def bound_penalty_grad(y, bound):
    y = np.asarray(y, dtype=np.float64)
    return np.where(y > bound, 1.0, 0.0) + np.where(y < -bound, -1.0, 0.0)


_UNARY = {
    "identity": (lambda z: z, lambda z: np.ones_like(z)),
    "sin": (np.sin, np.cos),
    "cos": (np.cos, lambda z: -np.sin(z)),
}


def unit_forward(kind, inputs):
    """Evaluate one unit: identity/sin/cos take a scalar, product a pair."""
    if kind == "product":
        a, b = inputs
        return np.asarray(a, dtype=np.float64) * np.asarray(b, dtype=np.float64)
    if kind in _UNARY:
        return _UNARY[kind][0](np.asarray(inputs, dtype=np.float64))
    raise ValueError(f"unknown unit kind: {kind!r}")


def unit_backward(kind, inputs, grad_out=1.0):
    if kind == "product":
        a, b = inputs
        return (grad_out * np.asarray(b, dtype=np.float64),
                grad_out * np.asarray(a, dtype=np.float64))
    if kind in _UNARY:
        return grad_out * _UNARY[kind][1](np.asarray(inputs, dtype=np.float64))
    raise ValueError(f"unknown unit kind: {kind!r}")


def linear_forward(W, w0, y_prev):
    """Affine map z = W @ y_prev + w0.

    y_prev may be a vector or a (batch, fan_in) matrix; the batch case
    returns (batch, fan_out).
    """
    W = np.asarray(W, dtype=np.float64)
    w0 = np.asarray(w0, dtype=np.float64)
    y_prev = np.asarray(y_prev, dtype=np.float64)
    if y_prev.ndim == 1:
        return W @ y_prev + w0
    return y_prev @ W.T + w0


@dataclass
class AdamState:
    """First/second moment estimates plus hyperparameters for Adam."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 0.001
    eps: float = 0.0001
    beta1: float = 0.9
    beta2: float = 0.999


def adam_init(n, lr=0.001, eps=0.0001, beta1=0.9, beta2=0.999):
    return AdamState(m=np.zeros(n), v=np.zeros(n), t=0,
                     lr=lr, eps=eps, beta1=beta1, beta2=beta2)


def adam_update(params, grads, state, mask=None):
    """One Adam step with bias correction; returns (new_params, state).

    `mask` marks frozen parameters: their gradient is ignored and their
    value is pinned to exactly 0. A non-finite gradient component rejects
    the whole step.
    """
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise ValueError("params, grads and moment vectors must have equal length")
    bad = ~np.isfinite(grads)
    if bad.any():
        idx = int(np.argmax(bad))
        raise FloatingPointError(f"non-finite gradient at parameter index {idx}")
    if mask is not None:
        grads = np.where(mask, 0.0, grads)
    state.t += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grads * grads
    m_hat = state.m / (1.0 - state.beta1 ** state.t)
    v_hat = state.v / (1.0 - state.beta2 ** state.t)
    new = params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    if mask is not None:
        new = np.where(mask, 0.0, new)
    return new, state


def grad_check(fn, point, epsilon=1e-6):
    """Worst relative error between fn's analytic gradient and central
    finite differences.

    `fn(x)` must return (value, gradient) for a 1-D parameter vector x.
    """
    point = np.asarray(point, dtype=np.float64)
    _, grad = fn(point)
    grad = np.asarray(grad, dtype=np.float64)
    num = np.empty_like(point)
    for i in range(point.size):
        hi = point.copy()
        lo = point.copy()
        hi[i] += epsilon
        lo[i] -= epsilon
        num[i] = (fn(hi)[0] - fn(lo)[0]) / (2.0 * epsilon)
    scale = np.maximum(np.abs(grad) + np.abs(num), 1.0)
    return float(np.max(np.abs(grad - num) / scale))
