"""Compiled inner loop of network training.

The layer stack is packed into padded 3-D arrays (layer, row, col) so the
whole minibatch loop of an epoch runs inside one jitted call. Semantics
match network.loss_and_grads / penalty_loss_and_grads plus one Adam step
per minibatch; the test suite asserts the two paths agree.
"""

import math

import numpy as np
from numba import njit

REGRESSION_EPOCH = 0
PENALTY_EPOCH = 1


def pack(net):
    """Pad a Network into (W, B, MK, out_w, in_w) arrays for the fast path."""
    L = net.arch.depth
    out_w = np.array([w.shape[0] for w in net.weights], dtype=np.int64)
    in_w = np.array([w.shape[1] for w in net.weights], dtype=np.int64)
    mo, mi = int(out_w.max()), int(in_w.max())
    W = np.zeros((L, mo, mi))
    B = np.zeros((L, mo))
    MK = np.zeros((L, mo, mi), dtype=np.bool_)
    for l in range(L):
        W[l, :out_w[l], :in_w[l]] = net.weights[l]
        B[l, :out_w[l]] = net.biases[l]
        MK[l, :out_w[l], :in_w[l]] = net.masks[l]
    return W, B, MK, out_w, in_w


def unpack(net, W, B, MK, out_w, in_w):
    for l in range(net.arch.depth):
        net.weights[l] = W[l, :out_w[l], :in_w[l]].copy()
        net.biases[l] = B[l, :out_w[l]].copy()
        net.masks[l] = MK[l, :out_w[l], :in_w[l]].copy()
    return net


@njit(cache=True)
def run_epoch(W, B, MK, mW, vW, mB, vB, t_adam,
              out_w, in_w, u, v,
              X, Y, perm, batch_size, theta, lam, n_total,
              lr, eps, b1, b2, mode, bound):
    """One epoch of minibatch steps; mutates parameters and moments.

    mode 0: L2 loss + L1 (via subgradient) + divisor penalty.
    mode 1: penalty epoch, divisor penalty + output bound penalty only.
    Returns (mean minibatch loss, new Adam step counter, status) where
    status 1 flags a non-finite loss (parameters are left as-is for the
    caller to discard).
    """
    L = W.shape[0]
    u3 = u // 3
    n = X.shape[0]
    m = out_w[L - 1] // 2
    max_in = W.shape[2]
    max_out = W.shape[1]

    ys = np.zeros((L, batch_size, max_in))
    zs = np.zeros((L, batch_size, max_out))
    dz = np.zeros((batch_size, max_out))
    dz2 = np.zeros((batch_size, max_out))
    dy = np.zeros((batch_size, max_in))
    gW = np.zeros((L, max_out, max_in))
    gB = np.zeros((L, max_out))

    n_batches = (n + batch_size - 1) // batch_size
    loss_sum = 0.0

    for kb in range(n_batches):
        lo = kb * batch_size
        hi = min(lo + batch_size, n)
        bs = hi - lo
        scale = n_total / bs

        for i in range(bs):
            src = perm[lo + i]
            for j in range(in_w[0]):
                ys[0, i, j] = X[src, j]

        # forward
        for l in range(L):
            ow = out_w[l]
            iw = in_w[l]
            for i in range(bs):
                for r in range(ow):
                    s = B[l, r]
                    for c in range(iw):
                        s += W[l, r, c] * ys[l, i, c]
                    zs[l, i, r] = s
            if l < L - 1:
                for i in range(bs):
                    for r in range(u3):
                        ys[l + 1, i, r] = zs[l, i, r]
                    for r in range(u3, 2 * u3):
                        ys[l + 1, i, r] = math.sin(zs[l, i, r])
                    for r in range(2 * u3, u):
                        ys[l + 1, i, r] = math.cos(zs[l, i, r])
                    for j in range(v):
                        ys[l + 1, i, u + j] = (zs[l, i, u + 2 * j]
                                               * zs[l, i, u + 2 * j + 1])

        # output units, loss and gradient at the output preactivations
        batch_loss = 0.0
        for i in range(bs):
            for j in range(m):
                a = zs[L - 1, i, 2 * j]
                bden = zs[L - 1, i, 2 * j + 1]
                pred = a / bden if bden > theta else 0.0
                if mode == REGRESSION_EPOCH:
                    diff = pred - Y[perm[lo + i], j]
                    batch_loss += diff * diff / bs
                    g = 2.0 * diff / bs
                else:
                    over = pred - bound
                    under = -pred - bound
                    pb = 0.0
                    g = 0.0
                    if over > 0.0:
                        pb += over
                        g = scale
                    if under > 0.0:
                        pb += under
                        g = -scale
                    batch_loss += scale * pb
                if bden > theta:
                    dz[i, 2 * j] = g / bden
                    dz[i, 2 * j + 1] = -g * a / (bden * bden)
                else:
                    dz[i, 2 * j] = 0.0
                    dz[i, 2 * j + 1] = 0.0
                if bden < theta:
                    batch_loss += scale * (theta - bden)
                    dz[i, 2 * j + 1] += -scale

        if not np.isfinite(batch_loss):
            return loss_sum, t_adam, 1

        # backward
        for l in range(L - 1, -1, -1):
            ow = out_w[l]
            iw = in_w[l]
            for r in range(ow):
                sb = 0.0
                for i in range(bs):
                    sb += dz[i, r]
                gB[l, r] = sb
                for c in range(iw):
                    s = 0.0
                    for i in range(bs):
                        s += dz[i, r] * ys[l, i, c]
                    gW[l, r, c] = s
            if l > 0:
                for i in range(bs):
                    for c in range(iw):
                        s = 0.0
                        for r in range(ow):
                            s += dz[i, r] * W[l, r, c]
                        dy[i, c] = s
                for i in range(bs):
                    for r in range(u3):
                        dz2[i, r] = dy[i, r]
                    for r in range(u3, 2 * u3):
                        dz2[i, r] = dy[i, r] * math.cos(zs[l - 1, i, r])
                    for r in range(2 * u3, u):
                        dz2[i, r] = -dy[i, r] * math.sin(zs[l - 1, i, r])
                    for j in range(v):
                        dp = dy[i, u + j]
                        dz2[i, u + 2 * j] = dp * zs[l - 1, i, u + 2 * j + 1]
                        dz2[i, u + 2 * j + 1] = dp * zs[l - 1, i, u + 2 * j]
                for i in range(bs):
                    for r in range(out_w[l - 1]):
                        dz[i, r] = dz2[i, r]

        # Adam step (bias-corrected); masked weights stay frozen at 0.
        t_adam += 1
        c1 = 1.0 - b1 ** t_adam
        c2 = 1.0 - b2 ** t_adam
        for l in range(L):
            for r in range(out_w[l]):
                for c in range(in_w[l]):
                    if MK[l, r, c]:
                        continue
                    g = gW[l, r, c]
                    if mode == REGRESSION_EPOCH and lam != 0.0:
                        w = W[l, r, c]
                        if w > 0.0:
                            g += lam
                        elif w < 0.0:
                            g -= lam
                    mW[l, r, c] = b1 * mW[l, r, c] + (1.0 - b1) * g
                    vW[l, r, c] = b2 * vW[l, r, c] + (1.0 - b2) * g * g
                    W[l, r, c] -= lr * (mW[l, r, c] / c1) / (
                        math.sqrt(vW[l, r, c] / c2) + eps)
                g = gB[l, r]
                mB[l, r] = b1 * mB[l, r] + (1.0 - b1) * g
                vB[l, r] = b2 * vB[l, r] + (1.0 - b2) * g * g
                B[l, r] -= lr * (mB[l, r] / c1) / (math.sqrt(vB[l, r] / c2) + eps)

        loss_sum += batch_loss

    return loss_sum / n_batches, t_adam, 0
