"""Layer-level reverse-mode autodiff over a sequential block graph.

Activations are plain float64 numpy arrays. Each primitive op caches what it
needs during a training-mode forward and hands back parameter gradients on
the way down. ``Network`` strings blocks together; a block consumes the
previous block's output or, for dense connectivity, a declared list of
earlier outputs. Backward can start at any block index, which is how frozen
prefixes are skipped.
"""
from __future__ import annotations

import copy

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigurationError, NumericalError

DTYPE = np.float64


# ---------------------------------------------------------------------------
# primitive ops
# ---------------------------------------------------------------------------

class Op:
    """Base class: no parameters, no MACs, identity-shaped output."""

    params: dict
    buffers: dict

    def __init__(self):
        self.params = {}
        self.buffers = {}
        self._cache = None

    def out_shape(self, in_shape):
        return tuple(in_shape)

    def macs(self, in_shape):
        return 0

    def aux_ops(self, in_shape):
        return 0

    def clear(self):
        self._cache = None


class ReLU(Op):
    def forward(self, x, train, keep_cache):
        mask = x > 0
        if keep_cache:
            self._cache = mask
        return np.where(mask, x, 0.0)

    def backward(self, g, need_input_grad=True):
        mask = self._cache
        self._cache = None
        # subgradient at exactly 0 is 0
        return (g * mask if need_input_grad else None), {}

    def aux_ops(self, in_shape):
        return int(np.prod(in_shape))


class BatchNorm(Op):
    """Batch normalization over every axis except the channel axis (1).

    Training mode normalizes with batch statistics and updates the running
    estimates; inference mode uses the running estimates and leaves them alone.
    """

    def __init__(self, channels, momentum=0.1, eps=1e-5):
        super().__init__()
        self.momentum = momentum
        self.eps = eps
        self.params = {"gamma": np.ones(channels, dtype=DTYPE),
                       "beta": np.zeros(channels, dtype=DTYPE)}
        self.buffers = {"running_mean": np.zeros(channels, dtype=DTYPE),
                        "running_var": np.ones(channels, dtype=DTYPE)}

    @staticmethod
    def _axes(x):
        return (0,) if x.ndim == 2 else (0,) + tuple(range(2, x.ndim))

    def _bshape(self, x):
        return (1, -1) + (1,) * (x.ndim - 2)

    def forward(self, x, train, keep_cache):
        shp = self._bshape(x)
        gamma = self.params["gamma"].reshape(shp)
        beta = self.params["beta"].reshape(shp)
        if not train:
            mean = self.buffers["running_mean"].reshape(shp)
            var = self.buffers["running_var"].reshape(shp)
            return gamma * (x - mean) / np.sqrt(var + self.eps) + beta

        axes = self._axes(x)
        m = x.size // x.shape[1]
        mean = x.mean(axis=axes)
        var = x.var(axis=axes)
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean.reshape(shp)) * inv_std.reshape(shp)

        mom = self.momentum
        unbiased = var * m / (m - 1) if m > 1 else var
        rm, rv = self.buffers["running_mean"], self.buffers["running_var"]
        rm *= 1.0 - mom
        rm += mom * mean
        rv *= 1.0 - mom
        rv += mom * unbiased

        if keep_cache:
            self._cache = (xhat, inv_std, axes, m)
        return gamma * xhat + beta

    def backward(self, g, need_input_grad=True):
        xhat, inv_std, axes, m = self._cache
        self._cache = None
        shp = self._bshape(g)
        grads = {"gamma": (g * xhat).sum(axis=axes), "beta": g.sum(axis=axes)}
        if not need_input_grad:
            return None, grads
        dxhat = g * self.params["gamma"].reshape(shp)
        s1 = dxhat.sum(axis=axes).reshape(shp)
        s2 = (dxhat * xhat).sum(axis=axes).reshape(shp)
        dx = inv_std.reshape(shp) / m * (m * dxhat - s1 - xhat * s2)
        return dx, grads

    def aux_ops(self, in_shape):
        return int(np.prod(in_shape))


class Linear(Op):
    def __init__(self, in_features, out_features, rng=None):
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features
        if rng is None:
            w = np.zeros((out_features, in_features), dtype=DTYPE)
        else:
            w = rng.standard_normal((out_features, in_features)) * np.sqrt(2.0 / in_features)
        self.params = {"weight": w.astype(DTYPE),
                       "bias": np.zeros(out_features, dtype=DTYPE)}

    def out_shape(self, in_shape):
        if tuple(in_shape) != (self.in_features,):
            raise ConfigurationError(
                f"linear layer expects ({self.in_features},), got {tuple(in_shape)}")
        return (self.out_features,)

    def macs(self, in_shape):
        return self.in_features * self.out_features

    def forward(self, x, train, keep_cache):
        if keep_cache:
            self._cache = x
        return x @ self.params["weight"].T + self.params["bias"]

    def backward(self, g, need_input_grad=True):
        x = self._cache
        self._cache = None
        grads = {"weight": g.T @ x, "bias": g.sum(axis=0)}
        return (g @ self.params["weight"] if need_input_grad else None), grads


class Conv2d(Op):
    """Stride-1 'same' convolution on (N, C, H, W) arrays via im2col."""

    def __init__(self, in_channels, out_channels, kernel_size, rng=None):
        super().__init__()
        if kernel_size % 2 != 1:
            raise ConfigurationError("kernel_size must be odd for same padding")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.k = kernel_size
        shape = (out_channels, in_channels, kernel_size, kernel_size)
        fan_in = in_channels * kernel_size * kernel_size
        if rng is None:
            w = np.zeros(shape, dtype=DTYPE)
        else:
            w = rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)
        self.params = {"weight": w.astype(DTYPE),
                       "bias": np.zeros(out_channels, dtype=DTYPE)}

    def out_shape(self, in_shape):
        if len(in_shape) != 3 or in_shape[0] != self.in_channels:
            raise ConfigurationError(
                f"conv expects ({self.in_channels}, H, W), got {tuple(in_shape)}")
        return (self.out_channels,) + tuple(in_shape[1:])

    def macs(self, in_shape):
        _, h, w = in_shape
        return h * w * self.out_channels * self.in_channels * self.k * self.k

    def _cols(self, x):
        p = self.k // 2
        xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p))) if p else x
        win = sliding_window_view(xp, (self.k, self.k), axis=(2, 3))  # N,C,H,W,k,k
        n, c, h, w = x.shape
        return win.transpose(0, 2, 3, 1, 4, 5).reshape(n * h * w, c * self.k * self.k)

    def forward(self, x, train, keep_cache):
        n, _, h, w = x.shape
        cols = self._cols(x)
        wmat = self.params["weight"].reshape(self.out_channels, -1)
        out = cols @ wmat.T + self.params["bias"]
        if keep_cache:
            self._cache = (cols, x.shape)
        return out.reshape(n, h, w, self.out_channels).transpose(0, 3, 1, 2)

    def backward(self, g, need_input_grad=True):
        cols, xshape = self._cache
        self._cache = None
        n, c, h, w = xshape
        g2 = g.transpose(0, 2, 3, 1).reshape(n * h * w, self.out_channels)
        wmat = self.params["weight"].reshape(self.out_channels, -1)
        grads = {"weight": (g2.T @ cols).reshape(self.params["weight"].shape),
                 "bias": g2.sum(axis=0)}
        if not need_input_grad:
            return None, grads
        k, p = self.k, self.k // 2
        dcols = (g2 @ wmat).reshape(n, h, w, c, k, k)
        dxp = np.zeros((n, c, h + 2 * p, w + 2 * p), dtype=DTYPE)
        for i in range(k):
            for j in range(k):
                dxp[:, :, i:i + h, j:j + w] += dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
        return dxp[:, :, p:p + h, p:p + w], grads


class GlobalAvgPool(Op):
    def out_shape(self, in_shape):
        return (in_shape[0],)

    def forward(self, x, train, keep_cache):
        if keep_cache:
            self._cache = x.shape
        return x.mean(axis=(2, 3))

    def backward(self, g, need_input_grad=True):
        n, c, h, w = self._cache
        self._cache = None
        if not need_input_grad:
            return None, {}
        return np.broadcast_to(g[:, :, None, None] / (h * w), (n, c, h, w)).copy(), {}

    def aux_ops(self, in_shape):
        return int(np.prod(in_shape))


# ---------------------------------------------------------------------------
# network
# ---------------------------------------------------------------------------

class Network:
    """Ordered list of freezable blocks.

    ``acts[0]`` is the network input and ``acts[i + 1]`` the output of block
    ``i``; ``block.inputs`` names which of those a block reads (concatenated
    along axis 1 when there are several).
    """

    def __init__(self, blocks, input_shape, num_classes=None):
        self.blocks = list(blocks)
        self.input_shape = tuple(input_shape)
        self.num_classes = num_classes
        self.counters = {"forward_macs": 0, "backward_macs": 0, "aux_ops": 0}
        for i, b in enumerate(self.blocks):
            if any(j < 0 or j > i for j in b.inputs):
                raise ConfigurationError(f"block {i} reads an activation that is not computed yet")

    def __len__(self):
        return len(self.blocks)

    @property
    def num_layers(self):
        return len(self.blocks)

    @property
    def first_unfrozen(self):
        """Index of the first trainable block; frozen blocks must form a prefix."""
        k = 0
        while k < len(self.blocks) and self.blocks[k].frozen:
            k += 1
        if any(b.frozen for b in self.blocks[k:]):
            raise ConfigurationError("frozen blocks do not form a prefix")
        return k

    def freeze_prefix(self, k):
        if not 0 <= k <= len(self.blocks):
            raise ConfigurationError(f"freeze index {k} outside [0, {len(self.blocks)}]")
        for i, b in enumerate(self.blocks):
            b.frozen = i < k

    def parameters(self):
        """Yield ``(block_index, name, array)`` for every parameter."""
        for i, b in enumerate(self.blocks):
            for name, arr in b.params.items():
                yield i, name, arr

    def forward_flops(self):
        return [b.forward_flops for b in self.blocks]

    def forward(self, x, train=True):
        x = np.asarray(x, dtype=DTYPE)
        if x.ndim < 1 or x.shape[1:] != self.input_shape:
            raise ConfigurationError(
                f"input shape {x.shape[1:]} does not match network input {self.input_shape}")
        acts = [x]
        for i, b in enumerate(self.blocks):
            mode = train and not b.frozen
            xs = [acts[j] for j in b.inputs]
            with np.errstate(over="ignore", invalid="ignore"):  # reported just below
                out = b.forward(xs, train=mode, keep_cache=mode)
            if not np.all(np.isfinite(out)):
                raise NumericalError(f"non-finite activation in block {i}", layer=i)
            acts.append(out)
            self.counters["forward_macs"] += b.forward_flops
            self.counters["aux_ops"] += b.aux_flops
        return acts[-1]

    def backward_from(self, loss_grad, first_unfrozen):
        """Backpropagate ``loss_grad`` down to block ``first_unfrozen`` and stop.

        Returns a list with one gradient dict per block; entries for blocks
        below ``first_unfrozen`` are None and nothing is computed for them.
        """
        n = len(self.blocks)
        if not 0 <= first_unfrozen <= n:
            raise ConfigurationError(f"first_unfrozen={first_unfrozen} outside [0, {n}]")
        grads = [None] * n
        for b in self.blocks:
            b.grads = None
        if first_unfrozen == n:
            return grads
        pending = {n: np.asarray(loss_grad, dtype=DTYPE)}
        for i in range(n - 1, first_unfrozen - 1, -1):
            b = self.blocks[i]
            if not b.has_cache():
                raise ConfigurationError(
                    f"block {i} has no forward cache; run a training-mode forward with it unfrozen")
            g = pending.pop(i + 1, None)
            if g is None:  # output not consumed by any trainable block
                g = np.zeros((pending[n].shape[0] if n in pending else len(loss_grad),)
                             + tuple(b.out_shape), dtype=DTYPE)
            need_input = i > first_unfrozen
            in_grads, pgrads = b.backward(g, need_input_grad=need_input)
            grads[i] = pgrads
            b.grads = pgrads
            self.counters["backward_macs"] += b.forward_flops
            if not need_input:
                continue
            for j, gx in zip(b.inputs, in_grads):
                if j <= first_unfrozen:
                    continue  # belongs to the frozen prefix or the raw input
                pending[j] = pending[j] + gx if j in pending else gx
        for b in self.blocks[:first_unfrozen]:
            b.clear()
        return grads

    def clear(self):
        for b in self.blocks:
            b.clear()


def forward(network, x, train=True):
    return network.forward(x, train=train)


def backward_from(network, loss_grad, first_unfrozen):
    return network.backward_from(loss_grad, first_unfrozen)


# ---------------------------------------------------------------------------
# losses and checking
# ---------------------------------------------------------------------------

def softmax_cross_entropy(logits, labels):
    """Mean softmax cross-entropy and its gradient w.r.t. the logits."""
    labels = np.asarray(labels, dtype=np.int64)
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    n = logits.shape[0]
    loss = -logp[np.arange(n), labels].mean()
    grad = np.exp(logp)
    grad[np.arange(n), labels] -= 1.0
    return float(loss), grad / n


def gradient_check(network, x, epsilon=1e-5, labels=None, max_checks=None, seed=0):
    """Max relative error between backprop and central finite differences.

    The scalar checked is the cross-entropy against ``labels`` when given,
    otherwise a fixed random projection of the output. The relative error of
    a parameter tensor is ``|a - n| / max(|a|, |n|)`` in the 2-norm. With
    ``max_checks`` only that many seeded entries per tensor are perturbed.
    """
    net = copy.deepcopy(network)
    net.freeze_prefix(0)
    x = np.asarray(x, dtype=DTYPE)
    rng = np.random.default_rng(seed)
    proj = None

    def loss_and_grad(out):
        nonlocal proj
        if labels is not None:
            return softmax_cross_entropy(out, labels)
        if proj is None:
            proj = rng.standard_normal(out.shape)
        return float((out * proj).sum()), proj

    _, g = loss_and_grad(net.forward(x, train=True))
    analytic = net.backward_from(g, 0)

    worst = 0.0
    for i, name, arr in list(net.parameters()):
        a = analytic[i][name]
        flat = arr.reshape(-1)
        idx = np.arange(flat.size)
        if max_checks is not None and flat.size > max_checks:
            idx = np.sort(rng.choice(flat.size, size=max_checks, replace=False))
        num = np.empty(idx.size)
        for n_, e in enumerate(idx):
            orig = flat[e]
            flat[e] = orig + epsilon
            lp, _ = loss_and_grad(net.forward(x, train=True))
            flat[e] = orig - epsilon
            lm, _ = loss_and_grad(net.forward(x, train=True))
            flat[e] = orig
            num[n_] = (lp - lm) / (2 * epsilon)
        net.clear()
        ana = a.reshape(-1)[idx]
        scale = max(np.linalg.norm(ana), np.linalg.norm(num))
        if scale > 0:
            worst = max(worst, float(np.linalg.norm(ana - num) / scale))
    return worst
