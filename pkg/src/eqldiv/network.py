"""The structured equation-learning network.

A network with L layers alternates affine maps with fixed algebraic
activations. Each hidden layer holds u unary units (u/3 each of identity,
sin, cos) and v two-input product units; the output layer holds one
two-input division unit per output, consuming (numerator, denominator)
preactivation pairs. Division is regularized by a threshold under which
both the value and the gradient are zero.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .kernels import (
    EVAL_THRESHOLD,
    bound_penalty,
    bound_penalty_grad,
    div_forward,
    div_penalty,
    div_penalty_grad,
)

L0_TOLERANCE = 0.001


@dataclass(frozen=True)
class Architecture:
    """Shape descriptor: input/output dimensions, depth and unit counts."""

    n_in: int
    n_out: int
    depth: int  # number of linear layers L, in {2, 3, 4}
    u: int = 30  # unary units per hidden layer, u/3 each of id/sin/cos
    v: int = 10  # product units per hidden layer

    def __post_init__(self):
        if self.depth not in (2, 3, 4):
            raise ValueError(f"depth must be 2, 3 or 4, got {self.depth}")
        if self.u % 3 != 0 or self.u <= 0:
            raise ValueError("u must be a positive multiple of 3")
        if self.v <= 0 or self.n_in <= 0 or self.n_out <= 0:
            raise ValueError("n_in, n_out and v must be positive")

    @property
    def hidden_width(self) -> int:
        return self.u + self.v

    @property
    def preact_width(self) -> int:
        return self.u + 2 * self.v

    def layer_shapes(self):
        """(fan_out, fan_in) of every linear layer, first to last."""
        shapes = []
        fan_in = self.n_in
        for _ in range(self.depth - 1):
            shapes.append((self.preact_width, fan_in))
            fan_in = self.hidden_width
        shapes.append((2 * self.n_out, fan_in))
        return shapes


@dataclass
class Network:
    arch: Architecture
    weights: list  # per layer, (fan_out, fan_in) float64
    biases: list  # per layer, (fan_out,) float64
    masks: list  # per layer, (fan_out, fan_in) bool; True = frozen at 0

    def copy(self):
        return Network(
            arch=self.arch,
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            masks=[m.copy() for m in self.masks],
        )

    @property
    def is_masked(self) -> bool:
        return any(m.any() for m in self.masks)

    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))


@dataclass
class ForwardTrace:
    """Per-layer preactivations/activations kept for gradient computation."""

    ys: list  # activations, ys[0] is the input batch
    zs: list  # preactivations per linear layer
    denominators: np.ndarray  # (batch, n_out)


def build(arch: Architecture, seed=0) -> Network:
    """Initialize a network: zero biases, N(0, 1/fan_in) weights, empty mask."""
    rng = np.random.default_rng(seed)
    weights, biases, masks = [], [], []
    for fan_out, fan_in in arch.layer_shapes():
        weights.append(rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
        masks.append(np.zeros((fan_out, fan_in), dtype=bool))
    return Network(arch=arch, weights=weights, biases=biases, masks=masks)


def hidden_activation(z, arch: Architecture):
    """Apply the fixed unit functions of a hidden layer to preactivations."""
    u3 = arch.u // 3
    ident = z[..., :u3]
    sins = np.sin(z[..., u3:2 * u3])
    coss = np.cos(z[..., 2 * u3:arch.u])
    prods = z[..., arch.u::2] * z[..., arch.u + 1::2]
    return np.concatenate([ident, sins, coss, prods], axis=-1)


def forward(net: Network, x, theta=EVAL_THRESHOLD, check=True):
    """Evaluate the network on a batch; returns (outputs, trace).

    x is (batch, n_in) or a single (n_in,) vector; outputs match the batch
    shape with n_out columns. Division outputs clamp to 0 where the
    denominator does not exceed theta. With check=True a non-finite
    intermediate (parameter blow-up) raises, naming the layer.
    """
    arch = net.arch
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.shape[1] != arch.n_in:
        raise ValueError(f"expected input dimension {arch.n_in}, got {X.shape[1]}")
    ys = [X]
    zs = []
    for l in range(arch.depth - 1):
        z = ys[-1] @ net.weights[l].T + net.biases[l]
        if check and not np.isfinite(z).all():
            raise FloatingPointError(f"non-finite preactivation in layer {l + 1}")
        zs.append(z)
        ys.append(hidden_activation(z, arch))
    z_out = ys[-1] @ net.weights[-1].T + net.biases[-1]
    if check and not np.isfinite(z_out).all():
        raise FloatingPointError(f"non-finite preactivation in layer {arch.depth}")
    zs.append(z_out)
    num = z_out[:, 0::2]
    den = z_out[:, 1::2]
    Y = div_forward(num, den, theta)
    trace = ForwardTrace(ys=ys, zs=zs, denominators=den)
    if single:
        return Y[0], trace
    return Y, trace


def l1_norm(net: Network) -> float:
    return float(sum(np.abs(w).sum() for w in net.weights))


def loss(net: Network, X, Y, lam=0.0, theta=EVAL_THRESHOLD, penalty_scale=1.0):
    """Training objective on a batch: MSE + lam * L1(weights) + divisor penalty.

    The penalty term sums max(theta - b, 0) over every denominator of every
    sample, scaled by penalty_scale (the trainer passes N_total/batch so the
    term keeps its full-dataset weight on minibatches).
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = np.asarray(Y, dtype=np.float64).reshape(X.shape[0], net.arch.n_out)
    pred, trace = forward(net, X, theta)
    mse = float(np.mean(np.sum((pred - Y) ** 2, axis=1)))
    pen = float(div_penalty(trace.denominators, theta).sum()) * penalty_scale
    return mse + lam * l1_norm(net) + pen


def loss_and_grads(net: Network, X, Y, lam=0.0, theta=EVAL_THRESHOLD,
                   penalty_scale=1.0):
    """Loss plus gradients w.r.t. every weight matrix and bias vector."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = np.asarray(Y, dtype=np.float64).reshape(X.shape[0], net.arch.n_out)
    pred, trace = forward(net, X, theta)
    batch = X.shape[0]
    diff = pred - Y
    mse = float(np.mean(np.sum(diff ** 2, axis=1)))
    pen = float(div_penalty(trace.denominators, theta).sum()) * penalty_scale

    # Gradient flowing into the division outputs.
    dY = 2.0 * diff / batch
    z_out = trace.zs[-1]
    num = z_out[:, 0::2]
    den = z_out[:, 1::2]
    ok = den > theta
    safe = np.where(ok, den, 1.0)
    d_num = np.where(ok, dY / safe, 0.0)
    d_den = np.where(ok, -dY * num / (safe * safe), 0.0)
    d_den = d_den + penalty_scale * div_penalty_grad(den, theta)
    dz = np.empty_like(z_out)
    dz[:, 0::2] = d_num
    dz[:, 1::2] = d_den

    gW, gB = _backprop(net, trace, dz)
    total = mse + lam * l1_norm(net) + pen
    if lam != 0.0:
        for l in range(net.arch.depth):
            gW[l] += lam * np.sign(net.weights[l])
    for l in range(net.arch.depth):
        gW[l][net.masks[l]] = 0.0
    return total, gW, gB


def penalty_loss(net: Network, X, theta, bound=10.0, penalty_scale=1.0):
    """Unlabeled cost for penalty epochs: divisor penalty + output bound."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    pred, trace = forward(net, X, theta)
    pen = float(div_penalty(trace.denominators, theta).sum())
    pen += float(bound_penalty(pred, bound).sum())
    return pen * penalty_scale


def penalty_loss_and_grads(net: Network, X, theta, bound=10.0,
                           penalty_scale=1.0):
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    pred, trace = forward(net, X, theta)
    pen = float(div_penalty(trace.denominators, theta).sum())
    pen += float(bound_penalty(pred, bound).sum())
    pen *= penalty_scale

    dY = penalty_scale * bound_penalty_grad(pred, bound)
    z_out = trace.zs[-1]
    num = z_out[:, 0::2]
    den = z_out[:, 1::2]
    ok = den > theta
    safe = np.where(ok, den, 1.0)
    d_num = np.where(ok, dY / safe, 0.0)
    d_den = np.where(ok, -dY * num / (safe * safe), 0.0)
    d_den = d_den + penalty_scale * div_penalty_grad(den, theta)
    dz = np.empty_like(z_out)
    dz[:, 0::2] = d_num
    dz[:, 1::2] = d_den

    gW, gB = _backprop(net, trace, dz)
    for l in range(net.arch.depth):
        gW[l][net.masks[l]] = 0.0
    return pen, gW, gB


def _backprop(net: Network, trace: ForwardTrace, dz_out):
    """Propagate a gradient at the output preactivations down the stack."""
    arch = net.arch
    u3 = arch.u // 3
    gW = [None] * arch.depth
    gB = [None] * arch.depth
    dz = dz_out
    for l in range(arch.depth - 1, -1, -1):
        gW[l] = dz.T @ trace.ys[l]
        gB[l] = dz.sum(axis=0)
        if l == 0:
            break
        dy = dz @ net.weights[l]
        z = trace.zs[l - 1]
        dz = np.empty_like(z)
        dz[:, :u3] = dy[:, :u3]
        dz[:, u3:2 * u3] = dy[:, u3:2 * u3] * np.cos(z[:, u3:2 * u3])
        dz[:, 2 * u3:arch.u] = -dy[:, 2 * u3:arch.u] * np.sin(z[:, 2 * u3:arch.u])
        dprod = dy[:, arch.u:]
        dz[:, arch.u::2] = dprod * z[:, arch.u + 1::2]
        dz[:, arch.u + 1::2] = dprod * z[:, arch.u::2]
    return gW, gB


def apply_l0_mask(net: Network, tolerance=L0_TOLERANCE) -> Network:
    """Freeze every weight with |w| < tolerance at exactly 0 (in place)."""
    for l in range(net.arch.depth):
        small = np.abs(net.weights[l]) < tolerance
        net.weights[l][small] = 0.0
        net.masks[l] |= small
    return net


def _effective_nonzero(net: Network):
    """Per-layer boolean maps of weights that count as connections.

    On a masked network a weight counts iff it is nonzero; before masking
    the L0 tolerance is applied so sparsity matches what masking would give.
    """
    if net.is_masked:
        return [w != 0.0 for w in net.weights]
    return [np.abs(w) >= L0_TOLERANCE for w in net.weights]


def sparsity(net: Network) -> int:
    """Number of connected hidden units: nonzero incoming weights and a
    nonzero-weight path to some output."""
    arch = net.arch
    nz = _effective_nonzero(net)
    total = 0
    # live[k] flags which activations of the layer below feed layer k's
    # consumers; start from the output linear map and sweep down.
    live_cols = nz[-1].any(axis=0)  # activations of the last hidden layer
    for l in range(arch.depth - 2, -1, -1):
        incoming = nz[l]
        unit_live = np.zeros(arch.hidden_width, dtype=bool)
        unit_in = np.zeros(arch.hidden_width, dtype=bool)
        for k in range(arch.u):
            unit_live[k] = live_cols[k]
            unit_in[k] = incoming[k].any()
        for j in range(arch.v):
            unit_live[arch.u + j] = live_cols[arch.u + j]
            rows = incoming[arch.u + 2 * j] | incoming[arch.u + 2 * j + 1]
            unit_in[arch.u + j] = rows.any()
        counted = unit_live & unit_in
        total += int(counted.sum())
        # Preactivation rows of this layer that belong to live units decide
        # which activations of the layer below are reachable.
        row_live = np.zeros(arch.preact_width, dtype=bool)
        row_live[:arch.u] = unit_live[:arch.u]
        row_live[arch.u::2] = unit_live[arch.u:]
        row_live[arch.u + 1::2] = unit_live[arch.u:]
        live_cols = (incoming & row_live[:, None]).any(axis=0)
    return total


# -- serialization -----------------------------------------------------------

_FORMAT_HEADER = "EQLDIV-NET 1"


def save_network(net: Network, path):
    """Persist a network bit-exactly in a self-describing text format."""
    arch = net.arch
    with open(path, "w") as fh:
        fh.write(_FORMAT_HEADER + "\n")
        fh.write(f"arch {arch.n_in} {arch.n_out} {arch.depth} {arch.u} {arch.v}\n")
        for l in range(arch.depth):
            W, b, m = net.weights[l], net.biases[l], net.masks[l]
            fh.write(f"layer {l} {W.shape[0]} {W.shape[1]}\n")
            for row in W:
                fh.write(" ".join(float(x).hex() for x in row) + "\n")
            fh.write(" ".join(float(x).hex() for x in b) + "\n")
            for row in m:
                fh.write("".join("1" if x else "0" for x in row) + "\n")


class NetworkFormatError(ValueError):
    pass


def load_network(path) -> Network:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0] != _FORMAT_HEADER:
        raise NetworkFormatError(f"{path}: bad or missing header")
    tokens = lines[1].split()
    if len(tokens) != 6 or tokens[0] != "arch":
        raise NetworkFormatError(f"{path}: malformed architecture line")
    n_in, n_out, depth, u, v = map(int, tokens[1:])
    arch = Architecture(n_in=n_in, n_out=n_out, depth=depth, u=u, v=v)
    weights, biases, masks = [], [], []
    i = 2
    try:
        for l in range(depth):
            hdr = lines[i].split()
            if hdr[0] != "layer" or int(hdr[1]) != l:
                raise NetworkFormatError(f"{path}: expected layer {l} header")
            rows, cols = int(hdr[2]), int(hdr[3])
            i += 1
            W = np.array(
                [[float.fromhex(t) for t in lines[i + r].split()] for r in range(rows)]
            )
            i += rows
            b = np.array([float.fromhex(t) for t in lines[i].split()])
            i += 1
            m = np.array(
                [[c == "1" for c in lines[i + r]] for r in range(rows)], dtype=bool
            )
            i += rows
            if W.shape != (rows, cols) or b.shape != (rows,) or m.shape != (rows, cols):
                raise NetworkFormatError(f"{path}: layer {l} has inconsistent shapes")
            weights.append(W)
            biases.append(b)
            masks.append(m)
    except (IndexError, ValueError) as exc:
        if isinstance(exc, NetworkFormatError):
            raise
        raise NetworkFormatError(f"{path}: truncated or corrupt network file") from exc
    net = Network(arch=arch, weights=weights, biases=biases, masks=masks)
    expected = arch.layer_shapes()
    for l, (fan_out, fan_in) in enumerate(expected):
        if net.weights[l].shape != (fan_out, fan_in):
            raise NetworkFormatError(f"{path}: layer {l} shape does not match arch")
    return net


# -- flat parameter views (for the optimizer and gradient checks) ------------

def pack_params(net: Network) -> np.ndarray:
    parts = []
    for W, b in zip(net.weights, net.biases):
        parts.append(W.ravel())
        parts.append(b)
    return np.concatenate(parts)


def unpack_params(net: Network, flat: np.ndarray):
    i = 0
    for l in range(net.arch.depth):
        W, b = net.weights[l], net.biases[l]
        net.weights[l] = flat[i:i + W.size].reshape(W.shape).copy()
        i += W.size
        net.biases[l] = flat[i:i + b.size].copy()
        i += b.size


def pack_mask(net: Network) -> np.ndarray:
    parts = []
    for m, b in zip(net.masks, net.biases):
        parts.append(m.ravel())
        parts.append(np.zeros(b.size, dtype=bool))
    return np.concatenate(parts)
