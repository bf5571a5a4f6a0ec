"""Read the learned equation out of a trained, masked network.

Layers are composed symbolically: affine maps become weighted sums, unit
activations wrap their preactivation trees, and each output's division unit
becomes exact division (the threshold-clamp is a training device; the
identified equation is its zero-threshold limit).
"""

import numpy as np

from . import expressions as ex
from .network import Network


def _affine(exprs, W, b, mask, tol):
    """Symbolic z = W @ exprs + b, dropping weights below tol."""
    out = []
    for k in range(W.shape[0]):
        terms = []
        for j, e in enumerate(exprs):
            w = W[k, j]
            if mask[k, j] or abs(w) < tol:
                continue
            terms.append(ex.Prod((ex.Const(float(w)), e)))
        if b[k] != 0.0:
            terms.append(ex.Const(float(b[k])))
        if not terms:
            out.append(ex.Const(0.0))
        elif len(terms) == 1:
            out.append(terms[0])
        else:
            out.append(ex.Sum(tuple(terms)))
    return out


def extract(net: Network, weight_tolerance=1e-3):
    """Convert a network into simplified expression trees, one per output.

    weight_tolerance drops residual small weights; pass 0 for an exact
    symbolic copy of the network (used by round-trip tests). Returns a list
    of trees; callers with a single output usually take element 0.
    """
    arch = net.arch
    u3 = arch.u // 3
    exprs = [ex.Var(i) for i in range(arch.n_in)]
    for l in range(arch.depth - 1):
        zs = _affine(exprs, net.weights[l], net.biases[l], net.masks[l],
                     weight_tolerance)
        ys = []
        ys.extend(zs[:u3])
        ys.extend(ex.Sin(z) for z in zs[u3:2 * u3])
        ys.extend(ex.Cos(z) for z in zs[2 * u3:arch.u])
        for j in range(arch.v):
            ys.append(ex.Prod((zs[arch.u + 2 * j], zs[arch.u + 2 * j + 1])))
        exprs = ys
    zs = _affine(exprs, net.weights[-1], net.biases[-1], net.masks[-1],
                 weight_tolerance)
    outputs = []
    for j in range(arch.n_out):
        outputs.append(ex.simplify(ex.Div(zs[2 * j], zs[2 * j + 1])))
    return outputs


def extract_single(net: Network, weight_tolerance=1e-3):
    if net.arch.n_out != 1:
        raise ValueError(
            f"network has {net.arch.n_out} outputs; extract_single needs 1")
    return extract(net, weight_tolerance)[0]
