"""Dense feed-forward network with sigmoid hidden layers and a linear scalar
output, self-contained in numpy.

Beyond plain evaluation, the forward pass propagates exact first and second
input-derivative tensors layer by layer (sigma' = s(1-s), sigma'' = s'(1-2s)),
and a reverse pass over that augmented computation yields exact parameter
gradients of any loss assembled from values, input gradients and input
Hessians at a batch of points.  Networks here are tiny, so a fixed derivative
set beats a general autodiff tape.

The value and input-gradient chains run in preallocated per-layer buffers
(training re-evaluates the same point batches every epoch, so buffer reuse
removes most of the allocation traffic).  The Hessian chain is only needed by
collocation losses on small nets and stays on the simple allocating path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SIGMOID = "sigmoid"


@dataclass
class MlpNet:
    input_dim: int
    hidden_sizes: tuple[int, ...]
    weights: list[np.ndarray]      # weights[i]: (N_{i-1}, N_i), last N = 1
    biases: list[np.ndarray]       # biases[i]: (N_i,)
    hidden_activation: str = SIGMOID

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden_sizes, 1)

    def copy(self) -> "MlpNet":
        return MlpNet(self.input_dim, tuple(self.hidden_sizes),
                      [w.copy() for w in self.weights],
                      [b.copy() for b in self.biases],
                      self.hidden_activation)


@dataclass
class NetEval:
    value: float
    grad_x: np.ndarray | None = None     # (d,)
    hess_x: np.ndarray | None = None     # (d, d)


def init(input_dim: int, hidden_sizes, seed: int) -> MlpNet:
    """Glorot-uniform hidden weights, zero biases, deterministic per seed.

    The output layer starts at zero so an untrained network is exactly the
    zero enhancement (the coarse stage solves with the fine scale at zero).
    """
    hidden_sizes = tuple(int(h) for h in hidden_sizes)
    if input_dim < 1 or any(h < 1 for h in hidden_sizes):
        raise ValueError("layer sizes must be positive")
    rng = np.random.default_rng(seed)
    sizes = (input_dim, *hidden_sizes, 1)
    weights, biases = [], []
    for k, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        if k == len(sizes) - 2:
            weights.append(np.zeros((fan_in, fan_out)))
        else:
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpNet(input_dim, hidden_sizes, weights, biases)


def count_params(net: MlpNet) -> int:
    sizes = net.layer_sizes
    return int(sum((sizes[i] + 1) * sizes[i + 1] for i in range(len(sizes) - 1)))


def parameters(net: MlpNet) -> list[np.ndarray]:
    """Flat view [W1, b1, W2, b2, ...]; arrays are the net's own."""
    out = []
    for w, b in zip(net.weights, net.biases):
        out.append(w)
        out.append(b)
    return out


class _Workspace:
    """Keyed reusable buffers; shapes are stable across training epochs."""
    __slots__ = ("bufs",)

    def __init__(self):
        self.bufs: dict = {}

    def get(self, key, shape) -> np.ndarray:
        b = self.bufs.get(key)
        if b is None or b.shape != shape:
            b = np.empty(shape)
            self.bufs[key] = b
        return b


class _Cache:
    """Per-layer forward intermediates kept for the reverse pass."""
    __slots__ = ("X", "order", "s", "s1", "dz", "da", "hz", "ha", "a_last", "ws")

    def __init__(self, X, order, ws):
        self.X = X
        self.order = order
        self.ws = ws
        self.s = []        # sigma(z) per hidden layer, (n, N)
        self.s1 = []       # sigma'(z)
        self.dz = []       # pre-activation input-gradient, (n, d, N); None at layer 0
        self.da = []       # post-activation input-gradient, (n, d, N)
        self.hz = []       # pre-activation input-Hessian, (n, d, d, N)
        self.ha = []       # post-activation input-Hessian
        self.a_last = None


def _sigmoid_inplace(z: np.ndarray) -> np.ndarray:
    np.negative(z, out=z)
    np.exp(z, out=z)
    z += 1.0
    np.reciprocal(z, out=z)
    return z


def _forward(net: MlpNet, X: np.ndarray, order: int, keep: bool = False,
             ws: _Workspace | None = None):
    """Batched forward pass.

    Returns (value (n,), grad (n,d) or None, hess (n,d,d) or None, cache).
    """
    X = np.ascontiguousarray(np.atleast_2d(X), dtype=float)
    n, d = X.shape
    if d != net.input_dim:
        raise ValueError(f"expected {net.input_dim}-dimensional points, got {d}")
    ws = ws if ws is not None else _Workspace()
    cache = _Cache(X, order, ws) if keep else None

    a = X
    da = None      # (n, d, N) post-activation input-gradient, flat (n*d, N)
    ha = None      # (n, d, d, N) post-activation input-Hessian
    n_hidden = len(net.hidden_sizes)
    for i in range(n_hidden):
        W, b = net.weights[i], net.biases[i]
        m = W.shape[1]
        s = np.matmul(a, W, out=ws.get(("s", i), (n, m)))
        s += b
        _sigmoid_inplace(s)
        s1 = np.subtract(1.0, s, out=ws.get(("s1", i), (n, m)))
        s1 *= s
        if order >= 1:
            if i == 0:
                dz = None   # pre-activation gradient is W, identical at every point
                da_new = np.multiply(s1[:, None, :], W[None, :, :],
                                     out=ws.get(("da", i), (n * d, m)).reshape(n, d, m))
            elif order == 1:
                # fused: overwrite the pre-activation gradient with s1 in place
                # (the reverse pass recovers the dz contraction through da/(s1))
                dz = None
                da_new = np.matmul(da.reshape(n * d, -1), W,
                                   out=ws.get(("da", i), (n * d, m))).reshape(n, d, m)
                da_new *= s1[:, None, :]
            else:
                dz = np.matmul(da.reshape(n * d, -1), W,
                               out=ws.get(("dz", i), (n * d, m))).reshape(n, d, m)
                da_new = np.multiply(s1[:, None, :], dz,
                                     out=ws.get(("da", i), (n * d, m)).reshape(n, d, m))
        if order >= 2:
            dz_full = W[None, :, :] if i == 0 else dz
            if i == 0:
                hz = np.zeros((n, d, d, m))
            else:
                hz = (ha.reshape(n * d * d, -1) @ W).reshape(n, d, d, m)
            s2 = s1 * (1.0 - 2.0 * s)
            ha = s2[:, None, None, :] * dz_full[:, :, None, :] * dz_full[:, None, :, :] \
                + s1[:, None, None, :] * hz
        if keep:
            cache.s.append(s)
            cache.s1.append(s1)
            if order >= 1:
                cache.dz.append(dz)
                cache.da.append(da_new)
            if order >= 2:
                cache.hz.append(hz)
                cache.ha.append(ha)
        a = s
        if order >= 1:
            da = da_new

    if keep:
        cache.a_last = a
    w_out = net.weights[-1][:, 0]
    value = a @ w_out + net.biases[-1][0]
    grad = hess = None
    if order >= 1:
        if n_hidden == 0:
            grad = np.broadcast_to(w_out[None, :], (n, d)).copy()
        else:
            grad = da @ w_out
    if order >= 2:
        if n_hidden == 0:
            hess = np.zeros((n, d, d))
        else:
            hess = ha @ w_out
    return value, grad, hess, cache


def forward(net: MlpNet, X: np.ndarray, order: int = 0):
    """Values / input-gradients / input-Hessians at a batch of points."""
    v, g, h, _ = _forward(net, X, order)
    return v, g, h


def evaluate(net: MlpNet, x, order: int = 0) -> NetEval:
    """Single-point evaluation with derivatives up to `order`."""
    v, g, h = forward(net, np.atleast_2d(x), order)
    return NetEval(float(v[0]),
                   None if g is None else g[0],
                   None if h is None else h[0])


def _backward(net: MlpNet, cache: _Cache, vbar, gbar, hbar, out: list[np.ndarray]):
    """Accumulate parameter gradients for cotangents of (value, grad, hess).

    `out` is the flat [dW1, db1, ...] list to accumulate into.
    """
    X, order, ws = cache.X, cache.order, cache.ws
    n, d = X.shape
    n_hidden = len(net.hidden_sizes)
    w_out = net.weights[-1][:, 0]
    m_last = len(w_out)
    a_last = cache.a_last if n_hidden else X

    # output layer: value = a @ w + b, grad = D @ w, hess = H @ w
    gw = a_last.T @ vbar
    gb = float(np.sum(vbar))
    abar = np.multiply(vbar[:, None], w_out[None, :],
                       out=ws.get(("ab", n_hidden - 1), (n, m_last)))
    dbar = hbar_ = None
    if gbar is not None:
        if n_hidden:
            gw += np.einsum("nkp,nk->p", cache.da[-1], gbar)
            dbar = np.multiply(gbar[:, :, None], w_out[None, None, :],
                               out=ws.get(("db", n_hidden - 1),
                                          (n * d, m_last)).reshape(n, d, m_last))
        else:
            gw += gbar.sum(axis=0)
    if hbar is not None and n_hidden:
        gw += np.einsum("nklp,nkl->p", cache.ha[-1], hbar)
        hbar_ = hbar[:, :, :, None] * w_out[None, None, None, :]
    out[2 * n_hidden] += gw[:, None]
    out[2 * n_hidden + 1] += gb

    for i in range(n_hidden - 1, -1, -1):
        W = net.weights[i]
        m = W.shape[1]
        s, s1 = cache.s[i], cache.s1[i]
        a_prev = cache.s[i - 1] if i > 0 else X
        dz = None
        if order >= 1:
            dz = W[None, :, :] if i == 0 else cache.dz[i]

        # through the activation: a = sigma(z), D = s1*dz, H = s2*dz*dz + s1*hz
        zbar = np.multiply(abar, s1, out=ws.get(("zb", i), (n, m)))
        if dbar is not None:
            if dz is None and i > 0:
                # fused forward kept only da = s1*dz; use da with s2/s1 = 1-2s
                fac = np.multiply(s, -2.0, out=ws.get(("t1", i), (n, m)))
                fac += 1.0
                t2 = np.einsum("nkp,nkp->np", dbar, cache.da[i],
                               out=ws.get(("t2", i), (n, m)))
            else:
                fac = np.multiply(s, -2.0, out=ws.get(("t1", i), (n, m)))
                fac += 1.0
                fac *= s1
                t2 = np.einsum("nkp,nkp->np", dbar, dz, out=ws.get(("t2", i), (n, m)))
            t2 *= fac
            zbar += t2
            dzbar = np.multiply(s1[:, None, :], dbar,
                                out=ws.get(("dzb", i), (n * d, m)).reshape(n, d, m))
        else:
            dzbar = None
        if hbar_ is not None:
            hz = cache.hz[i]
            s2 = s1 * (1.0 - 2.0 * s)
            s3 = s2 * (1.0 - 2.0 * s) - 2.0 * s1 * s1
            zbar += s3 * np.einsum("nklp,nkp,nlp->np", hbar_, dz, dz) \
                + s2 * np.einsum("nklp,nklp->np", hbar_, hz)
            through_d = s2[:, None, :] * (np.einsum("nklp,nlp->nkp", hbar_, dz)
                                          + np.einsum("nlkp,nlp->nkp", hbar_, dz))
            dzbar = through_d if dzbar is None else dzbar + through_d
            hzbar = s1[:, None, None, :] * hbar_
        else:
            hzbar = None

        # through the linear maps: z = a_prev W + b, dz = d_prev W, hz = h_prev W
        gw = a_prev.T @ zbar
        gb = zbar.sum(axis=0)
        if dzbar is not None:
            if i == 0:
                # d_prev is the identity: contribution is dzbar summed over points
                gw += dzbar.sum(axis=0)
            else:
                gw += cache.da[i - 1].reshape(n * d, -1).T @ dzbar.reshape(n * d, -1)
        if hzbar is not None and i > 0:
            gw += cache.ha[i - 1].reshape(n * d * d, -1).T @ hzbar.reshape(n * d * d, -1)
        out[2 * i] += gw
        out[2 * i + 1] += gb

        if i > 0:
            m_prev = W.shape[0]
            abar = np.matmul(zbar, W.T, out=ws.get(("ab", i - 1), (n, m_prev)))
            if dzbar is not None:
                dbar = np.matmul(dzbar.reshape(n * d, -1), W.T,
                                 out=ws.get(("db", i - 1),
                                            (n * d, m_prev))).reshape(n, d, m_prev)
            if hzbar is not None:
                hbar_ = (hzbar.reshape(n * d * d, -1) @ W.T).reshape(n, d, d, m_prev)


def loss_gradient(net: MlpNet, accumulator):
    """Total loss and exact parameter gradients for a loss accumulator.

    The accumulator exposes `terms`; each term holds a point batch, the
    derivative order it needs, and a quadratic-form map from (value, grad,
    hess) arrays to (partial loss, cotangents).  Coarse-scale data inside the
    terms is frozen, so gradients flow only through the network.
    """
    grads = [np.zeros_like(p) for p in parameters(net)]
    total = 0.0
    workspaces = getattr(accumulator, "_workspaces", None)
    if workspaces is None:
        workspaces = [_Workspace() for _ in accumulator.terms]
        try:
            accumulator._workspaces = workspaces
        except AttributeError:
            pass
    for term, ws in zip(accumulator.terms, workspaces):
        v, g, h, cache = _forward(net, term.points, term.order, keep=True, ws=ws)
        t_loss, vbar, gbar, hbar = term.loss_and_cotangents(v, g, h)
        total += t_loss
        _backward(net, cache, vbar, gbar, hbar, grads)
    return total, grads


def loss_value(net: MlpNet, accumulator) -> float:
    """Loss alone (used by finite-difference oracles and logging)."""
    total = 0.0
    for term in accumulator.terms:
        v, g, h, _ = _forward(net, term.points, term.order)
        t_loss, *_ = term.loss_and_cotangents(v, g, h)
        total += t_loss
    return total


# --- plain-text checkpoint -------------------------------------------------
#
# header "layers: N0 N1 ... 1", then one block per layer: the weight matrix
# row-major (one matrix row per line) followed by the bias line.  %.17g
# round-trips IEEE doubles bitwise.

def save_net(net: MlpNet, path) -> None:
    with open(path, "w") as fh:
        fh.write("layers: " + " ".join(str(s) for s in net.layer_sizes) + "\n")
        for W, b in zip(net.weights, net.biases):
            for row in W:
                fh.write(" ".join("%.17g" % v for v in row) + "\n")
            fh.write(" ".join("%.17g" % v for v in b) + "\n")
            fh.write("\n")


def load_net(path) -> MlpNet:
    with open(path) as fh:
        header = fh.readline().split()
        if header[0] != "layers:":
            raise ValueError("not a network checkpoint file")
        sizes = [int(v) for v in header[1:]]
        weights, biases = [], []
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    pos = 0
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        W = np.array([[float(v) for v in lines[pos + r].split()] for r in range(fan_in)])
        b = np.array([float(v) for v in lines[pos + fan_in].split()])
        if W.shape != (fan_in, fan_out) or b.shape != (fan_out,):
            raise ValueError("checkpoint layer shapes do not match the header")
        weights.append(W)
        biases.append(b)
        pos += fan_in + 1
    return MlpNet(sizes[0], tuple(sizes[1:-1]), weights, biases)
