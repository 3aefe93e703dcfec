"""Minimal differentiable segmentation model with hand-written backprop.

Two same-padded convolutions with a rectifier in between, then a per-pixel
softmax over classes:

    conv(in -> hidden, k x k) -> relu -> conv(hidden -> classes, k x k) -> softmax

The backward pass is exact reverse-mode differentiation of that composition,
so it can be checked against finite differences.  Everything runs in float64.

The optimizer is SGD with momentum, decoupled-from-nothing weight decay
folded into the gradient, and a polynomial learning-rate decay
lr0 * (1 - iteration/iteration_max)^0.9.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, FormatError, NumericalError
from .validation import check_image_batch

CHECKPOINT_MAGIC = b"TVMF1\n"
POLY_DECAY_POWER = 0.9


@dataclass
class ModelSpec:
    in_channels: int = 1
    num_classes: int = 4
    hidden_width: int = 16
    kernel_size: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.num_classes < 2:
            raise ConfigurationError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.hidden_width < 1:
            raise ConfigurationError(f"hidden_width must be >= 1, got {self.hidden_width}")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ConfigurationError(f"kernel_size must be odd, got {self.kernel_size}")
        if self.in_channels < 1:
            raise ConfigurationError(f"in_channels must be >= 1, got {self.in_channels}")
        if self.seed < 0:
            raise ConfigurationError(f"seed must be >= 0, got {self.seed}")


@dataclass
class ModelParams:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def arrays(self):
        return (self.w1, self.b1, self.w2, self.b2)

    def copy(self):
        return ModelParams(*(a.copy() for a in self.arrays()))

    def flat(self):
        return np.concatenate([a.reshape(-1) for a in self.arrays()])


@dataclass
class ForwardCache:
    # matrices are class/channel-leading: (channels, batch*H*W)
    batch: int
    height: int
    width: int
    cols1: np.ndarray
    z1: np.ndarray
    cols2: np.ndarray
    probs: np.ndarray


@dataclass
class OptimizerState:
    momentum_buffers: ModelParams
    lr0: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 2e-4
    iteration: int = 0
    iteration_max: int = 1


def init_model(spec):
    """Uniform init scaled by 1/sqrt(fan_in), zero biases, seeded."""
    rng = np.random.default_rng(spec.seed)
    k = spec.kernel_size
    fan1 = spec.in_channels * k * k
    fan2 = spec.hidden_width * k * k
    bound1 = 1.0 / np.sqrt(fan1)
    bound2 = 1.0 / np.sqrt(fan2)
    w1 = rng.uniform(-bound1, bound1, size=(spec.hidden_width, spec.in_channels, k, k))
    w2 = rng.uniform(-bound2, bound2, size=(spec.num_classes, spec.hidden_width, k, k))
    return ModelParams(
        w1=w1,
        b1=np.zeros(spec.hidden_width),
        w2=w2,
        b2=np.zeros(spec.num_classes),
    )


def init_optimizer(params, lr0=0.01, momentum=0.9, weight_decay=2e-4, iteration_max=1):
    buffers = ModelParams(*(np.zeros_like(a) for a in params.arrays()))
    return OptimizerState(
        momentum_buffers=buffers,
        lr0=float(lr0),
        momentum=float(momentum),
        weight_decay=float(weight_decay),
        iteration=0,
        iteration_max=int(iteration_max),
    )


def _im2col(x, kernel_size):
    """(B, C, H, W) -> (C*k*k, B*H*W) patch matrix under same padding.

    Filled one kernel offset at a time so every copy runs along contiguous
    image rows; the flat layout matches weights.reshape(out_channels, -1).
    """
    batch, channels, height, width = x.shape
    pad = kernel_size // 2
    padded = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    cols = np.empty((channels, kernel_size, kernel_size, batch, height, width))
    for ky in range(kernel_size):
        for kx in range(kernel_size):
            cols[:, ky, kx] = padded[:, :, ky:ky + height, kx:kx + width].transpose(1, 0, 2, 3)
    return cols.reshape(channels * kernel_size * kernel_size, batch * height * width)


def _mat_to_images(mat, batch, height, width):
    """(C, B*H*W) matrix viewed as a (B, C, H, W) image batch."""
    return mat.reshape(-1, batch, height, width).transpose(1, 0, 2, 3)


def _conv_mat(cols, weights, bias=None):
    """Same-padded convolution as a single matmul on a patch matrix."""
    out = weights.reshape(weights.shape[0], -1) @ cols
    if bias is not None:
        out += bias[:, np.newaxis]
    return out


def forward(params, images):
    """Run the model on an image batch.

    Returns the prediction volume shaped (classes, batch*H*W) and a cache
    for backward.  Softmax is stabilized by subtracting the per-pixel max.
    """
    x = check_image_batch(images)
    if not np.all(np.isfinite(x)):
        raise NumericalError("model input contains non-finite values")
    batch, _, height, width = x.shape
    cols1 = _im2col(x, params.w1.shape[2])
    z1 = _conv_mat(cols1, params.w1, params.b1)
    a1 = np.maximum(z1, 0.0)
    cols2 = _im2col(_mat_to_images(a1, batch, height, width), params.w2.shape[2])
    z2 = _conv_mat(cols2, params.w2, params.b2)
    z2 -= z2.max(axis=0, keepdims=True)
    probs = np.exp(z2)
    probs /= probs.sum(axis=0, keepdims=True)
    cache = ForwardCache(
        batch=batch, height=height, width=width,
        cols1=cols1, z1=z1, cols2=cols2, probs=probs,
    )
    return probs, cache


def backward(params, cache, grad_probs):
    """Exact gradients of the forward pass for a given d(loss)/d(volume)."""
    expected = cache.probs.shape
    grad_probs = np.asarray(grad_probs, dtype=np.float64)
    if grad_probs.shape != expected:
        raise ConfigurationError(
            f"grad volume shape {grad_probs.shape} does not match cache {expected}"
        )
    # softmax Jacobian: dz = p * (g - sum_c g*p)
    probs = cache.probs
    inner = (grad_probs * probs).sum(axis=0, keepdims=True)
    dz2 = probs * (grad_probs - inner)
    dw2 = (dz2 @ cache.cols2.T).reshape(params.w2.shape)
    db2 = dz2.sum(axis=1)
    # input gradient = convolution of dz2 with spatially flipped,
    # channel-swapped kernels (transposed convolution, stride 1, same pad)
    w2_t = params.w2[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)
    cols_g = _im2col(
        _mat_to_images(dz2, cache.batch, cache.height, cache.width),
        w2_t.shape[2],
    )
    da1 = _conv_mat(cols_g, w2_t)
    dz1 = da1 * (cache.z1 > 0.0)
    dw1 = (dz1 @ cache.cols1.T).reshape(params.w1.shape)
    db1 = dz1.sum(axis=1)
    return ModelParams(w1=dw1, b1=db1, w2=dw2, b2=db2)


def lr_at(state):
    """Polynomial decay: lr0 * (1 - iteration/iteration_max)^0.9."""
    if state.iteration > state.iteration_max:
        raise ConfigurationError(
            f"iteration {state.iteration} exceeds iteration_max {state.iteration_max}"
        )
    frac = state.iteration / state.iteration_max
    return state.lr0 * (1.0 - frac) ** POLY_DECAY_POWER


def sgd_step(params, grads, state):
    """One momentum-SGD update (in place); weight decay folds into the gradient."""
    for g in grads.arrays():
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient at iteration {state.iteration}")
    lr = lr_at(state)
    for param, grad, buf in zip(params.arrays(), grads.arrays(), state.momentum_buffers.arrays()):
        buf *= state.momentum
        buf += grad + state.weight_decay * param
        param -= lr * buf
    state.iteration += 1


def save_checkpoint(path, spec, params):
    """Header: magic line, spec fields as decimal text; then float64 LE arrays."""
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        header = f"{spec.in_channels} {spec.num_classes} {spec.hidden_width} {spec.kernel_size} {spec.seed}\n"
        fh.write(header.encode("ascii"))
        for arr in params.arrays():
            fh.write(arr.astype("<f8").tobytes())


def load_checkpoint(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(CHECKPOINT_MAGIC):
        raise FormatError("bad checkpoint magic", offset=0)
    offset = len(CHECKPOINT_MAGIC)
    newline = blob.find(b"\n", offset)
    if newline < 0:
        raise FormatError("missing checkpoint header line", offset=offset)
    fields = blob[offset:newline].split()
    if len(fields) != 5:
        raise FormatError(f"expected 5 header fields, got {len(fields)}", offset=offset)
    try:
        in_channels, num_classes, hidden_width, kernel_size, seed = (int(f) for f in fields)
    except ValueError as exc:
        raise FormatError(f"non-integer header field: {exc}", offset=offset) from None
    try:
        spec = ModelSpec(
            in_channels=in_channels,
            num_classes=num_classes,
            hidden_width=hidden_width,
            kernel_size=kernel_size,
            seed=seed,
        )
    except ConfigurationError as exc:
        raise FormatError(f"invalid checkpoint spec: {exc}", offset=offset) from None
    k = spec.kernel_size
    shapes = [
        (spec.hidden_width, spec.in_channels, k, k),
        (spec.hidden_width,),
        (spec.num_classes, spec.hidden_width, k, k),
        (spec.num_classes,),
    ]
    cursor = newline + 1
    arrays = []
    for shape in shapes:
        count = int(np.prod(shape))
        nbytes = count * 8
        chunk = blob[cursor : cursor + nbytes]
        if len(chunk) != nbytes:
            raise FormatError(
                f"truncated payload: wanted {nbytes} bytes, found {len(chunk)}", offset=cursor
            )
        arrays.append(np.frombuffer(chunk, dtype="<f8").reshape(shape).astype(np.float64))
        cursor += nbytes
    if cursor != len(blob):
        raise FormatError(f"{len(blob) - cursor} trailing bytes after payload", offset=cursor)
    return spec, ModelParams(*arrays)
