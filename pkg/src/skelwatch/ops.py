"""Differentiable operations over `skelwatch.autodiff.Tensor`.

Every op validates its shape contract, computes the forward value with numpy,
and, when a tape is recording and any input wants gradients, registers a
backward closure. Convolutions route their patch gather/scatter through
`skelwatch.kernels`, which picks the compiled backend when available.
"""

from __future__ import annotations

import numpy as np

from skelwatch import kernels
from skelwatch.autodiff import Parameter, Tensor, accumulate, active_tape, as_tensor
from skelwatch.errors import DegenerateBatchError, DimensionError, ValidationError

PRED_CLAMP = 1e-7  # predictions are clipped to [PRED_CLAMP, 1 - PRED_CLAMP] before logs


def _record(outputs, backward, *inputs):
    """Register `backward` on the active tape when any input needs gradients."""
    tape = active_tape()
    needs = any(t.requires_grad for t in inputs)
    for out in outputs:
        out.requires_grad = needs
    if tape is not None and needs:
        tape.record(outputs, backward)


def _reduce_to(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum `g` down to `shape`, inverting numpy broadcasting."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise arithmetic


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data + b.data)

    def bwd(gs, grads):
        (g,) = gs
        if a.requires_grad:
            accumulate(grads, a, _reduce_to(g, a.shape))
        if b.requires_grad:
            accumulate(grads, b, _reduce_to(g, b.shape))

    _record((out,), bwd, a, b)
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data * b.data)
    ad, bd = a.data, b.data

    def bwd(gs, grads):
        (g,) = gs
        if a.requires_grad:
            accumulate(grads, a, _reduce_to(g * bd, a.shape))
        if b.requires_grad:
            accumulate(grads, b, _reduce_to(g * ad, b.shape))

    _record((out,), bwd, a, b)
    return out


def neg(x: Tensor) -> Tensor:
    x = as_tensor(x)
    out = Tensor(-x.data)

    def bwd(gs, grads):
        (g,) = gs
        accumulate(grads, x, -g)

    _record((out,), bwd, x)
    return out


def scale(x: Tensor, k: float) -> Tensor:
    x = as_tensor(x)
    k = float(k)
    out = Tensor(x.data * k)

    def bwd(gs, grads):
        (g,) = gs
        accumulate(grads, x, g * k)

    _record((out,), bwd, x)
    return out


def texp(x: Tensor) -> Tensor:
    x = as_tensor(x)
    e = np.exp(x.data)
    out = Tensor(e)

    def bwd(gs, grads):
        (g,) = gs
        accumulate(grads, x, g * e)

    _record((out,), bwd, x)
    return out


def sum_all(x: Tensor) -> Tensor:
    x = as_tensor(x)
    out = Tensor(np.array(x.data.sum()))

    def bwd(gs, grads):
        (g,) = gs
        accumulate(grads, x, np.broadcast_to(g, x.shape).copy())

    _record((out,), bwd, x)
    return out


# ---------------------------------------------------------------------------
# shape plumbing


def reshape(x: Tensor, shape) -> Tensor:
    x = as_tensor(x)
    shape = tuple(int(s) for s in shape)
    if int(np.prod(shape, dtype=np.int64)) != x.size:
        raise DimensionError(f"cannot reshape {x.shape} ({x.size} values) to {shape}")
    out = Tensor(x.data.reshape(shape))
    in_shape = x.shape

    def bwd(gs, grads):
        (g,) = gs
        accumulate(grads, x, g.reshape(in_shape))

    _record((out,), bwd, x)
    return out


def narrow(x: Tensor, axis: int, start: int, length: int) -> Tensor:
    """Contiguous slice of `length` entries along `axis`, starting at `start`."""
    x = as_tensor(x)
    if not 0 <= axis < x.ndim:
        raise DimensionError(f"narrow axis {axis} out of range for rank {x.ndim}")
    if start < 0 or start + length > x.shape[axis]:
        raise DimensionError(
            f"narrow [{start}:{start + length}] exceeds extent {x.shape[axis]} on axis {axis}"
        )
    index = tuple(
        slice(start, start + length) if ax == axis else slice(None) for ax in range(x.ndim)
    )
    out = Tensor(np.ascontiguousarray(x.data[index]))
    in_shape = x.shape

    def bwd(gs, grads):
        (g,) = gs
        dx = np.zeros(in_shape)
        dx[index] = g
        accumulate(grads, x, dx)

    _record((out,), bwd, x)
    return out


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ValidationError("concat needs at least one tensor")
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis))
    extents = [t.shape[axis] for t in tensors]

    def bwd(gs, grads):
        (g,) = gs
        offset = 0
        for t, ext in zip(tensors, extents):
            index = tuple(
                slice(offset, offset + ext) if ax == axis else slice(None)
                for ax in range(g.ndim)
            )
            if t.requires_grad:
                accumulate(grads, t, g[index])
            offset += ext

    _record((out,), bwd, *tensors)
    return out


# ---------------------------------------------------------------------------
# activations


def _sigmoid_stable(x: np.ndarray) -> np.ndarray:
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def sigmoid(x: Tensor) -> Tensor:
    x = as_tensor(x)
    s = _sigmoid_stable(x.data)
    out = Tensor(s)

    def bwd(gs, grads):
        (g,) = gs
        accumulate(grads, x, g * s * (1.0 - s))

    _record((out,), bwd, x)
    return out


def tanh(x: Tensor) -> Tensor:
    x = as_tensor(x)
    t = np.tanh(x.data)
    out = Tensor(t)

    def bwd(gs, grads):
        (g,) = gs
        accumulate(grads, x, g * (1.0 - t * t))

    _record((out,), bwd, x)
    return out


def relu(x: Tensor) -> Tensor:
    x = as_tensor(x)
    out = Tensor(np.maximum(x.data, 0.0))
    mask = x.data > 0

    def bwd(gs, grads):
        (g,) = gs
        accumulate(grads, x, g * mask)

    _record((out,), bwd, x)
    return out


_ACTIVATIONS = {"logistic": sigmoid, "tanh": tanh, "relu": relu}


def activation(x: Tensor, kind: str) -> Tensor:
    """Elementwise activation dispatch: kind is one of logistic|tanh|relu."""
    try:
        fn = _ACTIVATIONS[kind]
    except KeyError:
        raise ValidationError(f"unknown activation kind {kind!r}") from None
    return fn(x)


# ---------------------------------------------------------------------------
# dense and convolutional layers


def linear(x: Tensor, weight: Parameter, bias: Parameter) -> Tensor:
    """out[n, o] = sum_i weight[o, i] * x[n, i] + bias[o]."""
    x = as_tensor(x)
    if x.ndim != 2 or weight.ndim != 2 or bias.ndim != 1:
        raise DimensionError(
            f"linear expects 2-d input/weight and 1-d bias, got {x.shape}/{weight.shape}/{bias.shape}"
        )
    if x.shape[1] != weight.shape[1]:
        raise DimensionError(
            f"linear input features (axis 1): got {x.shape[1]}, weight expects {weight.shape[1]}"
        )
    if bias.shape[0] != weight.shape[0]:
        raise DimensionError(
            f"linear bias extent {bias.shape[0]} != output features {weight.shape[0]} (axis 0)"
        )
    xd, wd = x.data, weight.data
    out = Tensor(xd @ wd.T + bias.data)

    def bwd(gs, grads):
        (g,) = gs
        if weight.requires_grad:
            accumulate(grads, weight, g.T @ xd)
        if bias.requires_grad:
            accumulate(grads, bias, g.sum(axis=0))
        if x.requires_grad:
            accumulate(grads, x, g @ wd)

    _record((out,), bwd, x, weight, bias)
    return out


def conv2d(x: Tensor, kernel: Parameter, bias: Parameter, stride: int = 1, padding: int = 0) -> Tensor:
    """2-d cross-correlation (no kernel flip) with square stride/padding."""
    x = as_tensor(x)
    if x.ndim != 4:
        raise DimensionError(f"conv2d input must be (N, C, H, W), got {x.shape}")
    if kernel.ndim != 4:
        raise DimensionError(f"conv2d kernel must be (F, C, kh, kw), got {kernel.shape}")
    n, c, h, w = x.shape
    f, kc, kh, kw = kernel.shape
    if kc != c:
        raise DimensionError(f"conv2d channels (axis 1): input has {c}, kernel expects {kc}")
    if bias.shape != (f,):
        raise DimensionError(f"conv2d bias shape {bias.shape} != ({f},) (kernel axis 0)")
    if stride < 1:
        raise ValidationError(f"conv2d stride must be >= 1, got {stride}")
    if padding < 0:
        raise ValidationError(f"conv2d padding must be >= 0, got {padding}")
    if h + 2 * padding < kh:
        raise DimensionError(f"conv2d height (axis 2): {h} + 2*{padding} < kernel {kh}")
    if w + 2 * padding < kw:
        raise DimensionError(f"conv2d width (axis 3): {w} + 2*{padding} < kernel {kw}")

    xp = np.ascontiguousarray(x.data)
    if padding:
        xp = np.pad(xp, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    hp, wp = xp.shape[2], xp.shape[3]
    oh = (hp - kh) // stride + 1
    ow = (wp - kw) // stride + 1
    cols = kernels.im2col(xp, kh, kw, stride)
    wmat = kernel.data.reshape(f, -1)
    out_mat = cols @ wmat.T + bias.data
    out = Tensor(np.ascontiguousarray(out_mat.reshape(n, oh, ow, f).transpose(0, 3, 1, 2)))

    def bwd(gs, grads):
        (g,) = gs
        gmat = g.transpose(0, 2, 3, 1).reshape(-1, f)
        if bias.requires_grad:
            accumulate(grads, bias, gmat.sum(axis=0))
        if kernel.requires_grad:
            accumulate(grads, kernel, (gmat.T @ cols).reshape(kernel.shape))
        if x.requires_grad:
            dcols = np.ascontiguousarray(gmat @ wmat)
            dxp = kernels.col2im(dcols, n, c, hp, wp, kh, kw, stride)
            if padding:
                dxp = dxp[:, :, padding : padding + h, padding : padding + w]
            accumulate(grads, x, dxp)

    _record((out,), bwd, x, kernel, bias)
    return out


def conv_transpose2d(
    x: Tensor,
    kernel: Parameter,
    bias: Parameter,
    stride: int = 1,
    padding: int = 0,
    output_padding: int = 0,
) -> Tensor:
    """Transposed 2-d convolution: the adjoint of `conv2d` with the same geometry.

    Kernel layout is (C_in, C_out, kh, kw). Output spatial extent is
    (H - 1)*stride - 2*padding + kh + output_padding, with output_padding < stride.
    """
    x = as_tensor(x)
    if x.ndim != 4:
        raise DimensionError(f"conv_transpose2d input must be (N, C, H, W), got {x.shape}")
    if kernel.ndim != 4:
        raise DimensionError(f"conv_transpose2d kernel must be (C_in, C_out, kh, kw), got {kernel.shape}")
    n, c, h, w = x.shape
    kc, f, kh, kw = kernel.shape
    if kc != c:
        raise DimensionError(
            f"conv_transpose2d channels (axis 1): input has {c}, kernel expects {kc}"
        )
    if bias.shape != (f,):
        raise DimensionError(f"conv_transpose2d bias shape {bias.shape} != ({f},)")
    if not 0 <= output_padding < stride:
        raise ValidationError(
            f"output_padding must lie in [0, stride), got {output_padding} with stride {stride}"
        )
    h_out = (h - 1) * stride - 2 * padding + kh + output_padding
    w_out = (w - 1) * stride - 2 * padding + kw + output_padding
    if h_out < 1 or w_out < 1:
        raise DimensionError(f"conv_transpose2d output extent ({h_out}, {w_out}) is empty")

    hp, wp = h_out + 2 * padding, w_out + 2 * padding
    x_mat = np.ascontiguousarray(x.data.transpose(0, 2, 3, 1).reshape(n * h * w, c))
    wmat = kernel.data.reshape(c, -1)
    cols = np.ascontiguousarray(x_mat @ wmat)
    yp = kernels.col2im(cols, n, f, hp, wp, kh, kw, stride)
    y = yp[:, :, padding : padding + h_out, padding : padding + w_out]
    out = Tensor(y + bias.data[None, :, None, None])

    def bwd(gs, grads):
        (g,) = gs
        if bias.requires_grad:
            accumulate(grads, bias, g.sum(axis=(0, 2, 3)))
        gp = np.ascontiguousarray(g)
        if padding:
            gp = np.pad(gp, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
        gcols = kernels.im2col(gp, kh, kw, stride)
        if kernel.requires_grad:
            accumulate(grads, kernel, (x_mat.T @ gcols).reshape(kernel.shape))
        if x.requires_grad:
            dx_mat = gcols @ wmat.T
            accumulate(grads, x, np.ascontiguousarray(dx_mat.reshape(n, h, w, c).transpose(0, 3, 1, 2)))

    _record((out,), bwd, x, kernel, bias)
    return out


# ---------------------------------------------------------------------------
# batch normalization


class BatchNormState:
    """Running statistics updated in train mode, consumed in eval mode."""

    __slots__ = ("running_mean", "running_var")

    def __init__(self, channels: int):
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)


def batch_norm(
    x: Tensor,
    gamma: Parameter,
    beta: Parameter,
    state: BatchNormState,
    training: bool,
    momentum: float = 0.1,
    eps: float = 1e-5,
) -> Tensor:
    """Per-channel normalization over (N, C) or (N, C, H, W) inputs.

    Train mode normalizes by batch statistics and folds them into `state`
    by exponential moving average; eval mode applies the stored statistics.
    """
    x = as_tensor(x)
    if x.ndim not in (2, 4):
        raise DimensionError(f"batch_norm expects rank 2 or 4 input, got {x.shape}")
    channels = x.shape[1]
    if gamma.shape != (channels,) or beta.shape != (channels,):
        raise DimensionError(
            f"batch_norm gamma/beta must have extent {channels} (axis 1), "
            f"got {gamma.shape}/{beta.shape}"
        )
    if eps <= 0:
        raise ValidationError(f"batch_norm eps must be positive, got {eps}")
    axes = (0,) if x.ndim == 2 else (0, 2, 3)

    def per_channel(v: np.ndarray) -> np.ndarray:
        return v if x.ndim == 2 else v[:, None, None]

    xd = x.data
    if training:
        if x.shape[0] < 2:
            raise DegenerateBatchError(
                f"batch_norm train mode needs a batch of >= 2, got {x.shape[0]}"
            )
        m = int(np.prod([x.shape[ax] for ax in axes]))
        mean = xd.mean(axis=axes)
        var = xd.var(axis=axes)
        state.running_mean *= 1.0 - momentum
        state.running_mean += momentum * mean
        state.running_var *= 1.0 - momentum
        state.running_var += momentum * (var * (m / (m - 1)))
    else:
        m = 0
        mean = state.running_mean
        var = state.running_var

    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (xd - per_channel(mean)) * per_channel(inv_std)
    out = Tensor(per_channel(gamma.data) * xhat + per_channel(beta.data))

    def bwd(gs, grads):
        (g,) = gs
        if beta.requires_grad:
            accumulate(grads, beta, g.sum(axis=axes))
        if gamma.requires_grad:
            accumulate(grads, gamma, (g * xhat).sum(axis=axes))
        if x.requires_grad:
            gamma_b = per_channel(gamma.data)
            istd_b = per_channel(inv_std)
            if training:
                dxhat = g * gamma_b
                sum_dxhat = dxhat.sum(axis=axes, keepdims=True)
                sum_dxhat_xhat = (dxhat * xhat).sum(axis=axes, keepdims=True)
                dx = (istd_b / m) * (m * dxhat - sum_dxhat - xhat * sum_dxhat_xhat)
            else:
                dx = g * gamma_b * istd_b
            accumulate(grads, x, dx)

    _record((out,), bwd, x, gamma, beta)
    return out


# ---------------------------------------------------------------------------
# LSTM step


class LstmParams:
    """The twelve named parameters of one LSTM cell, gate order (i, f, o, g)."""

    GATES = ("i", "f", "o", "g")

    def __init__(self, input_dim: int, hidden_dim: int, prefix: str, init=None):
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        make = init if init is not None else lambda shape: np.zeros(shape)
        self.w = [Parameter(make((hidden_dim, input_dim)), f"{prefix}.W_{g}") for g in self.GATES]
        self.u = [Parameter(make((hidden_dim, hidden_dim)), f"{prefix}.U_{g}") for g in self.GATES]
        self.b = [Parameter(np.zeros(hidden_dim), f"{prefix}.b_{g}") for g in self.GATES]

    def parameters(self) -> list:
        return [*self.w, *self.u, *self.b]


def lstm_sequence(xs: Tensor, h0: Tensor, c0: Tensor, params: LstmParams, steps: int):
    """Unroll `steps` gated updates over time-major inputs.

    xs stacks the per-step input batches as (steps*N, Din); block t feeds
    step t. Returns (hs, c_final): every step's hidden state stacked the same
    way, plus the final cell state. Gate weights are packed once for the whole
    unroll and the input-side matmul is batched across steps; backward runs
    through time in a single closure.
    """
    xs, h0, c0 = as_tensor(xs), as_tensor(h0), as_tensor(c0)
    dh, din = params.hidden_dim, params.input_dim
    if steps < 1:
        raise ValidationError(f"lstm_sequence needs steps >= 1, got {steps}")
    if xs.ndim != 2 or xs.shape[1] != din:
        raise DimensionError(f"lstm input features (axis 1): got {xs.shape}, expected {din}")
    if xs.shape[0] % steps != 0:
        raise DimensionError(
            f"lstm input rows {xs.shape[0]} not divisible by {steps} steps"
        )
    n = xs.shape[0] // steps
    if h0.shape != (n, dh) or c0.shape != (n, dh):
        raise DimensionError(f"lstm state shapes {h0.shape}/{c0.shape} != ({n}, {dh})")

    w_all = np.concatenate([p.data for p in params.w], axis=0)
    u_all = np.concatenate([p.data for p in params.u], axis=0)
    b_all = np.concatenate([p.data for p in params.b])
    pre_x = xs.data @ w_all.T + b_all  # one matmul for every step's input part

    h = h0.data
    c = c0.data
    hs_out = np.empty((steps * n, dh))
    h_prev_all = np.empty((steps * n, dh))
    cache = []
    for t in range(steps):
        block = slice(t * n, (t + 1) * n)
        h_prev_all[block] = h
        pre = pre_x[block] + h @ u_all.T
        gi = _sigmoid_stable(pre[:, :dh])
        gf = _sigmoid_stable(pre[:, dh : 2 * dh])
        go = _sigmoid_stable(pre[:, 2 * dh : 3 * dh])
        gg = np.tanh(pre[:, 3 * dh :])
        c_prev = c
        c = gf * c_prev + gi * gg
        tc = np.tanh(c)
        h = go * tc
        hs_out[block] = h
        cache.append((gi, gf, go, gg, c_prev, tc))
    hs = Tensor(hs_out)
    c_final = Tensor(c.copy())
    xsd = xs.data

    def bwd(gs, grads):
        g_hs, g_cfin = gs
        dz_all = np.empty((steps * n, 4 * dh))
        dh_carry = np.zeros((n, dh))
        dc = np.zeros((n, dh)) if g_cfin is None else g_cfin.copy()
        for t in range(steps - 1, -1, -1):
            block = slice(t * n, (t + 1) * n)
            gi, gf, go, gg, c_prev, tc = cache[t]
            dht = dh_carry if g_hs is None else g_hs[block] + dh_carry
            do = dht * tc
            dc = dc + dht * go * (1.0 - tc * tc)
            dz = dz_all[block]
            dz[:, :dh] = (dc * gg) * gi * (1.0 - gi)
            dz[:, dh : 2 * dh] = (dc * c_prev) * gf * (1.0 - gf)
            dz[:, 2 * dh : 3 * dh] = do * go * (1.0 - go)
            dz[:, 3 * dh :] = (dc * gi) * (1.0 - gg * gg)
            dh_carry = dz @ u_all
            dc = dc * gf
        dw_all = dz_all.T @ xsd
        du_all = dz_all.T @ h_prev_all
        db_all = dz_all.sum(axis=0)
        for k, (pw, pu, pb) in enumerate(zip(params.w, params.u, params.b)):
            gate = slice(k * dh, (k + 1) * dh)
            if pw.requires_grad:
                accumulate(grads, pw, dw_all[gate])
            if pu.requires_grad:
                accumulate(grads, pu, du_all[gate])
            if pb.requires_grad:
                accumulate(grads, pb, db_all[gate])
        if xs.requires_grad:
            accumulate(grads, xs, dz_all @ w_all)
        if h0.requires_grad:
            accumulate(grads, h0, dh_carry)
        if c0.requires_grad:
            accumulate(grads, c0, dc)

    _record((hs, c_final), bwd, xs, h0, c0, *params.parameters())
    return hs, c_final


def lstm_step(x: Tensor, h: Tensor, c: Tensor, params: LstmParams):
    """One gated recurrent update; returns (h', c'), both differentiable.

    i, f, o = logistic(W x + U h + b); g = tanh(W x + U h + b);
    c' = f * c + i * g; h' = o * tanh(c').
    """
    x = as_tensor(x)
    if x.ndim != 2 or x.shape[1] != params.input_dim:
        raise DimensionError(
            f"lstm_step input features (axis 1): got {x.shape}, expected {params.input_dim}"
        )
    return lstm_sequence(x, h, c, params, steps=1)


# ---------------------------------------------------------------------------
# loss terms


def bce_sum(target, prediction: Tensor) -> Tensor:
    """Bernoulli log-likelihood sum: sum_i t_i ln y_i + (1 - t_i) ln(1 - y_i).

    Predictions are clamped to [PRED_CLAMP, 1 - PRED_CLAMP] before the logs;
    the result is non-positive for binary targets.
    """
    target = as_tensor(target)
    prediction = as_tensor(prediction)
    td, pd = target.data, prediction.data
    if td.shape != pd.shape:
        raise DimensionError(f"bce_sum target shape {td.shape} != prediction shape {pd.shape}")
    if td.size and (td.min() < 0.0 or td.max() > 1.0):
        raise ValidationError("bce_sum targets must lie in [0, 1]")
    yc = np.clip(pd, PRED_CLAMP, 1.0 - PRED_CLAMP)
    out = Tensor(np.array(np.sum(td * np.log(yc) + (1.0 - td) * np.log(1.0 - yc))))

    def bwd(gs, grads):
        (g,) = gs
        if prediction.requires_grad:
            inside = (pd >= PRED_CLAMP) & (pd <= 1.0 - PRED_CLAMP)
            dy = (td / yc - (1.0 - td) / (1.0 - yc)) * inside
            accumulate(grads, prediction, g * dy)

    _record((out,), bwd, prediction)
    return out


def kl_term(mu: Tensor, log_var: Tensor) -> Tensor:
    """First loss term: 0.5 * sum_j (1 + ln sigma_j^2 - mu_j^2 - sigma_j^2).

    Non-positive everywhere; zero exactly when mu = 0 and ln sigma^2 = 0.
    """
    mu = as_tensor(mu)
    log_var = as_tensor(log_var)
    if mu.shape != log_var.shape:
        raise DimensionError(f"kl_term mu shape {mu.shape} != log_var shape {log_var.shape}")
    ev = np.exp(log_var.data)
    out = Tensor(np.array(0.5 * np.sum(1.0 + log_var.data - mu.data**2 - ev)))
    mud = mu.data

    def bwd(gs, grads):
        (g,) = gs
        if mu.requires_grad:
            accumulate(grads, mu, -g * mud)
        if log_var.requires_grad:
            accumulate(grads, log_var, g * 0.5 * (1.0 - ev))

    _record((out,), bwd, mu, log_var)
    return out
