"""Freezable blocks and the toy model zoo.

A block is the unit that gets frozen. Inside a block every weight op is
preceded by ReLU then batch-norm (pre-activation order); the stem block skips
the ReLU so raw inputs are not clipped. Residual blocks add an identity
shortcut around two such units; dense blocks read the concatenation of every
earlier hidden output and project it back down to a fixed width.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import BatchNorm, Conv2d, GlobalAvgPool, Linear, Network, ReLU
from .errors import ConfigurationError

ARCHITECTURES = ("mlp-plain", "mlp-residual", "mlp-dense",
                 "cnn-plain", "cnn-residual", "cnn-dense")
BLOCK_KINDS = ("linear", "conv2d", "residual-block", "dense-block", "classifier-head")


class Block:
    """One freezable unit: a chain of ops plus optional skip wiring.

    ``inputs`` are activation indices (0 = network input, i + 1 = output of
    block i). Several inputs are concatenated along axis 1. ``skip_scale``
    multiplies the identity shortcut of a residual block, or every input but
    the most recent one of a dense block; 0 turns the block into its plain
    counterpart.
    """

    def __init__(self, kind, ops, inputs, in_shapes, residual=False):
        if kind not in BLOCK_KINDS:
            raise ConfigurationError(f"unknown block kind {kind!r}")
        self.kind = kind
        self.ops = list(ops)
        self.inputs = tuple(inputs)
        self.residual = residual
        self.skip_scale = 1.0
        self.frozen = False
        self.grads = None
        self._cached = False

        self.in_shapes = [tuple(s) for s in in_shapes]
        self._split = [s[0] for s in self.in_shapes]
        in_shape = concat_shape(self.in_shapes)
        self.out_shape = self._propagate(in_shape)
        if residual and self.out_shape != in_shape:
            raise ConfigurationError(
                f"residual block maps {in_shape} to {self.out_shape}; widths must match")
        self.forward_flops = layer_flops(self, in_shape)
        self.aux_flops = _aux_ops(self, in_shape)

        self.params = {}
        self.buffers = {}
        for name, op in self.ops:
            for p, arr in op.params.items():
                self.params[f"{name}.{p}"] = arr
            for p, arr in op.buffers.items():
                self.buffers[f"{name}.{p}"] = arr

    def _propagate(self, shape):
        for _, op in self.ops:
            shape = op.out_shape(shape)
        return tuple(shape)

    def has_cache(self):
        return self._cached

    def clear(self):
        self._cached = False
        for _, op in self.ops:
            op.clear()

    def _gather(self, xs):
        if len(xs) == 1:
            return xs[0]
        if self.skip_scale != 1.0:
            xs = [x * self.skip_scale for x in xs[:-1]] + [xs[-1]]
        return np.concatenate(xs, axis=1)

    def forward(self, xs, train, keep_cache):
        x = self._gather(xs)
        h = x
        for _, op in self.ops:
            h = op.forward(h, train, keep_cache)
        if self.residual:
            h = h + self.skip_scale * x
        self._cached = keep_cache
        return h

    def backward(self, g, need_input_grad=True):
        if not self._cached:
            raise ConfigurationError(f"{self.kind} block has no forward cache")
        grads = {}
        h = g
        last = len(self.ops) - 1
        for pos in range(last, -1, -1):
            name, op = self.ops[pos]
            h, pg = op.backward(h, need_input_grad=need_input_grad or pos > 0)
            for p, arr in pg.items():
                grads[f"{name}.{p}"] = arr
        self._cached = False
        if not need_input_grad:
            return None, grads
        if self.residual:
            h = h + self.skip_scale * g
        if len(self.inputs) == 1:
            return [h], grads
        parts = np.split(h, np.cumsum(self._split)[:-1], axis=1)
        if self.skip_scale != 1.0:
            parts = [p * self.skip_scale for p in parts[:-1]] + [parts[-1]]
        return parts, grads

    def __repr__(self):
        state = "frozen" if self.frozen else "trainable"
        return f"Block({self.kind}, in={self.in_shapes}, out={self.out_shape}, c={self.forward_flops}, {state})"


def concat_shape(shapes):
    first = tuple(shapes[0])
    for s in shapes[1:]:
        if tuple(s[1:]) != first[1:]:
            raise ConfigurationError(f"cannot concatenate shapes {shapes}")
    return (sum(s[0] for s in shapes),) + first[1:]


def layer_flops(block, input_shape):
    """Per-example forward MACs of the linear/conv ops inside ``block``.

    Batch-norm, activations, pooling and skip additions are not counted.
    """
    total = 0
    shape = tuple(input_shape)
    for _, op in block.ops:
        total += op.macs(shape)
        shape = op.out_shape(shape)
    return int(total)


def _aux_ops(block, input_shape):
    total = 0
    shape = tuple(input_shape)
    for _, op in block.ops:
        total += op.aux_ops(shape)
        shape = op.out_shape(shape)
    if block.residual:
        total += int(np.prod(shape))
    return int(total)


@dataclass
class ModelSpec:
    """Architecture description.

    ``widths`` gives one width (features or channels) per hidden block; a
    single value is repeated ``depth`` times. ``depth`` counts hidden blocks
    including the stem; the classifier head comes on top.
    """

    architecture: str
    widths: list
    input_shape: tuple
    num_classes: int
    depth: int | None = None
    bn_momentum: float = 0.1

    def hidden_widths(self):
        widths = [int(w) for w in self.widths]
        depth = self.depth if self.depth is not None else len(widths)
        if depth < 1:
            raise ConfigurationError("depth must be >= 1")
        if len(widths) == 1:
            widths = widths * depth
        if len(widths) != depth:
            raise ConfigurationError(
                f"got {len(widths)} widths for depth {depth}; give one width or one per block")
        if any(w < 1 for w in widths):
            raise ConfigurationError("widths must be positive")
        return widths

    def validate(self):
        if self.architecture not in ARCHITECTURES:
            raise ConfigurationError(f"unknown architecture {self.architecture!r}")
        if self.num_classes < 2:
            raise ConfigurationError("num_classes must be >= 2")
        want = 1 if self.architecture.startswith("mlp") else 3
        if len(self.input_shape) != want:
            raise ConfigurationError(
                f"{self.architecture} needs a {want}-d input shape, got {tuple(self.input_shape)}")
        return self.hidden_widths()


def _unit(prefix, weight_op, momentum, act=True):
    """ReLU -> batch-norm -> weight op, with parameter names prefixed."""
    in_width = weight_op.in_channels if isinstance(weight_op, Conv2d) else weight_op.in_features
    ops = [(f"{prefix}relu", ReLU())] if act else []
    ops.append((f"{prefix}bn", BatchNorm(in_width, momentum)))
    ops.append((f"{prefix}{'conv' if isinstance(weight_op, Conv2d) else 'linear'}", weight_op))
    return ops


def build(spec, seed=0):
    """Construct a freshly initialised ``Network`` for ``spec``.

    Weights get He-normal fan-in scaling from ``np.random.default_rng(seed)``;
    biases and beta start at 0, gamma and running variance at 1.
    """
    widths = spec.validate()
    rng = np.random.default_rng(seed)
    conv = spec.architecture.startswith("cnn")
    style = spec.architecture.split("-")[1]
    mom = spec.bn_momentum
    in_shape = tuple(int(s) for s in spec.input_shape)

    def spatial(c):
        return (c,) + in_shape[1:] if conv else (c,)

    def weight(i, o, k=3):
        return Conv2d(i, o, k, rng) if conv else Linear(i, o, rng)

    blocks = []
    stem_kind = "conv2d" if conv else "linear"
    blocks.append(Block(stem_kind, _unit("", weight(in_shape[0], widths[0]), mom, act=False),
                        inputs=(0,), in_shapes=[in_shape]))
    for i in range(1, len(widths)):
        w_in, w_out = widths[i - 1], widths[i]
        if style == "plain":
            blocks.append(Block(stem_kind, _unit("", weight(w_in, w_out), mom),
                                inputs=(i,), in_shapes=[spatial(w_in)]))
        elif style == "residual":
            if w_in != w_out:
                raise ConfigurationError(
                    f"residual blocks need equal widths, got {w_in} -> {w_out} at block {i}")
            ops = _unit("a_", weight(w_in, w_out), mom) + _unit("b_", weight(w_out, w_out), mom)
            blocks.append(Block("residual-block", ops, inputs=(i,),
                                in_shapes=[spatial(w_in)], residual=True))
        else:
            srcs = tuple(range(1, i + 1))
            shapes = [spatial(widths[j - 1]) for j in srcs]
            total = sum(widths[:i])
            if conv:
                ops = (_unit("proj_", weight(total, w_out, k=1), mom)
                       + _unit("", weight(w_out, w_out), mom))
            else:
                ops = _unit("", weight(total, w_out), mom)
            blocks.append(Block("dense-block", ops, inputs=srcs, in_shapes=shapes))

    n_hidden = len(widths)
    if style == "dense":
        head_inputs = tuple(range(1, n_hidden + 1))
    else:
        head_inputs = (n_hidden,)
    head_shapes = [spatial(widths[j - 1]) for j in head_inputs]
    head_width = sum(s[0] for s in head_shapes)
    head_ops = [("relu", ReLU()), ("bn", BatchNorm(head_width, mom))]
    if conv:
        head_ops.append(("pool", GlobalAvgPool()))
    head_ops.append(("linear", Linear(head_width, spec.num_classes, rng)))
    blocks.append(Block("classifier-head", head_ops, inputs=head_inputs, in_shapes=head_shapes))
    return Network(blocks, in_shape, spec.num_classes)
