"""Sequence and single-frame autoencoders over the tensor core.

All three models share one convolutional frame encoder (two stride-2 convs
with batch norm, flatten, linear feature head) and decode through its
transposed-convolution mirror ending in a per-pixel logistic unit.

  lstmvae: per-frame CNN features -> LSTM over T steps -> final hidden state
           -> (mu, log-variance) heads -> latent z -> decoder LSTM unrolled T
           steps with a projected z as constant input -> per-step frames.
  ae:      frame -> features -> linear code -> decoder.
  vae:     frame -> features -> (mu, log-variance) -> sampled z -> decoder.

Training minimizes -(kl_term + bce_sum), the negated per-sample objective.
"""

from __future__ import annotations

import io
import json
import os
import struct
import zlib
from dataclasses import asdict, dataclass, field

import numpy as np

from skelwatch import ops
from skelwatch.autodiff import Parameter, Tensor
from skelwatch.errors import (
    ContractError,
    FormatError,
    IncompatibilityError,
    ValidationError,
)

CHECKPOINT_MAGIC = b"SKWTv01"

ARCHITECTURES = ("lstmvae", "ae", "vae")


@dataclass
class ModelConfig:
    latent_dim: int = 16
    window_length: int = 30
    lstm_hidden: int = 300
    feature_dim: int = 256
    image_size: int = 28
    conv_channels: tuple = (16, 32)
    bn_momentum: float = 0.1
    bn_eps: float = 1e-5

    def __post_init__(self):
        self.conv_channels = tuple(int(c) for c in self.conv_channels)
        if self.latent_dim < 1:
            raise ValidationError(f"latent_dim must be >= 1, got {self.latent_dim}")
        if self.lstm_hidden < self.latent_dim:
            raise ValidationError(
                f"lstm_hidden ({self.lstm_hidden}) must be >= latent_dim ({self.latent_dim})"
            )
        if self.window_length < 1:
            raise ValidationError(f"window_length must be >= 1, got {self.window_length}")
        if self.image_size % 4 != 0:
            raise ValidationError(
                f"image_size must be divisible by 4 (two stride-2 convs), got {self.image_size}"
            )
        if len(self.conv_channels) != 2:
            raise ValidationError("conv_channels must name exactly two extents")

    @property
    def grid_size(self) -> int:
        return self.image_size // 4

    @property
    def flat_dim(self) -> int:
        return self.conv_channels[1] * self.grid_size * self.grid_size


@dataclass
class LatentPosterior:
    """Encoder output for one window: mean and log-variance of length J."""

    mu: np.ndarray
    log_var: np.ndarray


@dataclass
class Reconstruction:
    """Decoder output probabilities, strictly inside (0, 1)."""

    probabilities: np.ndarray


def make_initializer(rng: np.random.Generator):
    """Uniform +-sqrt(1/fan_in) init; fan_in is the product of non-leading extents."""

    def init(shape):
        shape = tuple(shape)
        fan_in = int(np.prod(shape[1:])) if len(shape) > 1 else shape[0]
        bound = np.sqrt(1.0 / fan_in)
        return rng.uniform(-bound, bound, shape)

    return init


def sample_latent(mu: Tensor, log_var: Tensor, noise) -> Tensor:
    """Reparameterized draw z = mu + exp(0.5 * log_var) * noise."""
    sigma = ops.texp(ops.scale(log_var, 0.5))
    return ops.add(mu, ops.mul(sigma, Tensor(noise)))


def elbo_loss(targets, reconstruction: Tensor, mu: Tensor, log_var: Tensor) -> Tensor:
    """Minimized objective: -(kl_term + bce_sum), summed over the batch."""
    return ops.neg(ops.add(ops.kl_term(mu, log_var), ops.bce_sum(targets, reconstruction)))


class ConvFrameEncoder:
    """Frame image (M, 1, S, S) -> feature vector (M, feature_dim)."""

    def __init__(self, cfg: ModelConfig, init, prefix: str = "enc"):
        c1, c2 = cfg.conv_channels
        self.cfg = cfg
        self.conv1_w = Parameter(init((c1, 1, 3, 3)), f"{prefix}.conv1.weight")
        self.conv1_b = Parameter(np.zeros(c1), f"{prefix}.conv1.bias")
        self.bn1_gamma = Parameter(np.ones(c1), f"{prefix}.bn1.gamma")
        self.bn1_beta = Parameter(np.zeros(c1), f"{prefix}.bn1.beta")
        self.bn1_state = ops.BatchNormState(c1)
        self.conv2_w = Parameter(init((c2, c1, 3, 3)), f"{prefix}.conv2.weight")
        self.conv2_b = Parameter(np.zeros(c2), f"{prefix}.conv2.bias")
        self.bn2_gamma = Parameter(np.ones(c2), f"{prefix}.bn2.gamma")
        self.bn2_beta = Parameter(np.zeros(c2), f"{prefix}.bn2.beta")
        self.bn2_state = ops.BatchNormState(c2)
        self.fc_w = Parameter(init((cfg.feature_dim, cfg.flat_dim)), f"{prefix}.fc.weight")
        self.fc_b = Parameter(np.zeros(cfg.feature_dim), f"{prefix}.fc.bias")
        self._prefix = prefix

    def forward(self, x: Tensor, training: bool) -> Tensor:
        cfg = self.cfg
        h = ops.conv2d(x, self.conv1_w, self.conv1_b, stride=2, padding=1)
        h = ops.batch_norm(
            h, self.bn1_gamma, self.bn1_beta, self.bn1_state, training,
            cfg.bn_momentum, cfg.bn_eps,
        )
        h = ops.relu(h)
        h = ops.conv2d(h, self.conv2_w, self.conv2_b, stride=2, padding=1)
        h = ops.batch_norm(
            h, self.bn2_gamma, self.bn2_beta, self.bn2_state, training,
            cfg.bn_momentum, cfg.bn_eps,
        )
        h = ops.relu(h)
        h = ops.reshape(h, (x.shape[0], cfg.flat_dim))
        return ops.linear(h, self.fc_w, self.fc_b)

    def parameters(self):
        return [
            self.conv1_w, self.conv1_b, self.bn1_gamma, self.bn1_beta,
            self.conv2_w, self.conv2_b, self.bn2_gamma, self.bn2_beta,
            self.fc_w, self.fc_b,
        ]

    def bn_states(self):
        return {f"{self._prefix}.bn1": self.bn1_state, f"{self._prefix}.bn2": self.bn2_state}


class ConvFrameDecoder:
    """(M, in_dim) -> per-pixel probabilities (M, 1, S, S)."""

    def __init__(self, cfg: ModelConfig, in_dim: int, init, prefix: str = "dec"):
        c1, c2 = cfg.conv_channels
        self.cfg = cfg
        self.fc_w = Parameter(init((cfg.flat_dim, in_dim)), f"{prefix}.fc.weight")
        self.fc_b = Parameter(np.zeros(cfg.flat_dim), f"{prefix}.fc.bias")
        self.convt1_w = Parameter(init((c2, c1, 3, 3)), f"{prefix}.convt1.weight")
        self.convt1_b = Parameter(np.zeros(c1), f"{prefix}.convt1.bias")
        self.bn_gamma = Parameter(np.ones(c1), f"{prefix}.bn.gamma")
        self.bn_beta = Parameter(np.zeros(c1), f"{prefix}.bn.beta")
        self.bn_state = ops.BatchNormState(c1)
        self.convt2_w = Parameter(init((c1, 1, 3, 3)), f"{prefix}.convt2.weight")
        self.convt2_b = Parameter(np.zeros(1), f"{prefix}.convt2.bias")
        self._prefix = prefix

    def forward(self, h: Tensor, training: bool) -> Tensor:
        cfg = self.cfg
        c2 = cfg.conv_channels[1]
        h = ops.linear(h, self.fc_w, self.fc_b)
        h = ops.reshape(h, (h.shape[0], c2, cfg.grid_size, cfg.grid_size))
        h = ops.conv_transpose2d(h, self.convt1_w, self.convt1_b, 2, 1, 1)
        h = ops.batch_norm(
            h, self.bn_gamma, self.bn_beta, self.bn_state, training,
            cfg.bn_momentum, cfg.bn_eps,
        )
        h = ops.relu(h)
        h = ops.conv_transpose2d(h, self.convt2_w, self.convt2_b, 2, 1, 1)
        return ops.sigmoid(h)

    def parameters(self):
        return [
            self.fc_w, self.fc_b, self.convt1_w, self.convt1_b,
            self.bn_gamma, self.bn_beta, self.convt2_w, self.convt2_b,
        ]

    def bn_states(self):
        return {f"{self._prefix}.bn": self.bn_state}


def _windows_time_major(windows: np.ndarray) -> np.ndarray:
    """(N, T, S, S) -> frame batch (T*N, 1, S, S), step-major blocks of N."""
    n, t, s, _ = windows.shape
    return np.ascontiguousarray(windows.transpose(1, 0, 2, 3).reshape(t * n, 1, s, s))


class LstmVae:
    """Sequence autoencoder: CNN frame features, LSTM over time, Gaussian latent."""

    kind = "lstmvae"

    def __init__(self, config: ModelConfig | None = None, seed: int = 0):
        cfg = config if config is not None else ModelConfig()
        self.config = cfg
        rng = np.random.default_rng(seed)
        init = make_initializer(rng)
        j, hid, feat = cfg.latent_dim, cfg.lstm_hidden, cfg.feature_dim
        self.encoder = ConvFrameEncoder(cfg, init)
        self.enc_lstm = ops.LstmParams(feat, hid, "enc.lstm", init)
        self.enc_lstm.b[1].data[...] = 1.0  # forget-gate bias
        self.mu_w = Parameter(init((j, hid)), "enc.mu.weight")
        self.mu_b = Parameter(np.zeros(j), "enc.mu.bias")
        self.logvar_w = Parameter(init((j, hid)), "enc.logvar.weight")
        self.logvar_b = Parameter(np.zeros(j), "enc.logvar.bias")
        self.state_w = Parameter(init((2 * hid, j)), "dec.state.weight")
        self.state_b = Parameter(np.zeros(2 * hid), "dec.state.bias")
        self.step_w = Parameter(init((feat, j)), "dec.step.weight")
        self.step_b = Parameter(np.zeros(feat), "dec.step.bias")
        self.dec_lstm = ops.LstmParams(feat, hid, "dec.lstm", init)
        self.dec_lstm.b[1].data[...] = 1.0
        self.decoder = ConvFrameDecoder(cfg, hid, init)

    def parameters(self):
        return [
            *self.encoder.parameters(),
            *self.enc_lstm.parameters(),
            self.mu_w, self.mu_b, self.logvar_w, self.logvar_b,
            self.state_w, self.state_b, self.step_w, self.step_b,
            *self.dec_lstm.parameters(),
            *self.decoder.parameters(),
        ]

    def bn_states(self):
        return {**self.encoder.bn_states(), **self.decoder.bn_states()}

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def _check_window_batch(self, windows: np.ndarray):
        t, s = self.config.window_length, self.config.image_size
        if windows.ndim != 4 or windows.shape[1] != t or windows.shape[2:] != (s, s):
            raise ContractError(
                f"window batch shape {windows.shape} != (N, {t}, {s}, {s})"
            )

    def encode(self, windows: np.ndarray, training: bool):
        """Window batch (N, T, S, S) -> (mu, log_var) tensors of shape (N, J)."""
        windows = np.asarray(windows, dtype=np.float64)
        self._check_window_batch(windows)
        n, t = windows.shape[0], windows.shape[1]
        hid = self.config.lstm_hidden
        frames = Tensor(_windows_time_major(windows))
        feats = self.encoder.forward(frames, training)
        h0 = Tensor(np.zeros((n, hid)))
        c0 = Tensor(np.zeros((n, hid)))
        hs, _ = ops.lstm_sequence(feats, h0, c0, self.enc_lstm, t)
        h_final = ops.narrow(hs, 0, (t - 1) * n, n)
        mu = ops.linear(h_final, self.mu_w, self.mu_b)
        log_var = ops.linear(h_final, self.logvar_w, self.logvar_b)
        return mu, log_var

    def decode(self, z: Tensor, training: bool) -> Tensor:
        """Latent (N, J) -> time-major probabilities (T*N, 1, S, S)."""
        if z.ndim != 2 or z.shape[1] != self.config.latent_dim:
            raise ContractError(f"latent batch shape {z.shape} != (N, {self.config.latent_dim})")
        hid = self.config.lstm_hidden
        t = self.config.window_length
        state = ops.linear(z, self.state_w, self.state_b)
        h0 = ops.narrow(state, 1, 0, hid)
        c0 = ops.narrow(state, 1, hid, hid)
        dec_in = ops.linear(z, self.step_w, self.step_b)
        xs = ops.concat([dec_in] * t, axis=0)
        hs, _ = ops.lstm_sequence(xs, h0, c0, self.dec_lstm, t)
        return self.decoder.forward(hs, training)

    def loss(self, windows: np.ndarray, noise: np.ndarray, training: bool = True) -> Tensor:
        """Mean per-window training loss -(kl + bce)/N for the batch."""
        windows = np.asarray(windows, dtype=np.float64)
        self._check_window_batch(windows)
        n = windows.shape[0]
        mu, log_var = self.encode(windows, training)
        z = sample_latent(mu, log_var, np.asarray(noise, dtype=np.float64))
        probs = self.decode(z, training)
        targets = Tensor(_windows_time_major(windows))
        return ops.scale(elbo_loss(targets, probs, mu, log_var), 1.0 / n)

    def predict(self, windows: np.ndarray):
        """Eval-mode reconstruction with z = mu; returns (probs, mu, log_var) arrays.

        probs has shape (N, T, S, S)."""
        windows = np.asarray(windows, dtype=np.float64)
        mu, log_var = self.encode(windows, training=False)
        probs_tm = self.decode(mu, training=False)
        n, t = windows.shape[0], windows.shape[1]
        s = self.config.image_size
        probs = probs_tm.data.reshape(t, n, s, s).transpose(1, 0, 2, 3)
        return probs, mu.data, log_var.data

    def posterior(self, window: np.ndarray) -> LatentPosterior:
        """Eval-mode posterior of a single (T, S, S) window."""
        mu, log_var = self.encode(np.asarray(window, dtype=np.float64)[None], training=False)
        return LatentPosterior(mu.data[0].copy(), log_var.data[0].copy())

    def reconstruct(self, window: np.ndarray) -> Reconstruction:
        """Eval-mode reconstruction of a single (T, S, S) window."""
        probs, _, _ = self.predict(np.asarray(window, dtype=np.float64)[None])
        return Reconstruction(probs[0])


def _frame_batch(frames: np.ndarray, image_size: int) -> np.ndarray:
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim == 3:
        frames = frames[:, None, :, :]
    if frames.ndim != 4 or frames.shape[1] != 1 or frames.shape[2:] != (image_size, image_size):
        raise ContractError(
            f"frame batch shape {frames.shape} != (M, 1, {image_size}, {image_size})"
        )
    return frames


class FrameAutoencoder:
    """Single-frame baseline: conv encoder -> linear code -> conv decoder."""

    kind = "ae"

    def __init__(self, config: ModelConfig | None = None, seed: int = 0):
        cfg = config if config is not None else ModelConfig()
        self.config = cfg
        rng = np.random.default_rng(seed)
        init = make_initializer(rng)
        j, feat = cfg.latent_dim, cfg.feature_dim
        self.encoder = ConvFrameEncoder(cfg, init)
        self.code_w = Parameter(init((j, feat)), "enc.code.weight")
        self.code_b = Parameter(np.zeros(j), "enc.code.bias")
        self.expand_w = Parameter(init((feat, j)), "dec.expand.weight")
        self.expand_b = Parameter(np.zeros(feat), "dec.expand.bias")
        self.decoder = ConvFrameDecoder(cfg, feat, init)

    def parameters(self):
        return [
            *self.encoder.parameters(),
            self.code_w, self.code_b, self.expand_w, self.expand_b,
            *self.decoder.parameters(),
        ]

    def bn_states(self):
        return {**self.encoder.bn_states(), **self.decoder.bn_states()}

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def forward(self, frames: np.ndarray, training: bool) -> Tensor:
        x = Tensor(_frame_batch(frames, self.config.image_size))
        feats = self.encoder.forward(x, training)
        code = ops.linear(feats, self.code_w, self.code_b)
        expanded = ops.relu(ops.linear(code, self.expand_w, self.expand_b))
        return self.decoder.forward(expanded, training)

    def loss(self, frames: np.ndarray, training: bool = True) -> Tensor:
        x = _frame_batch(frames, self.config.image_size)
        probs = self.forward(x, training)
        bce = ops.bce_sum(Tensor(x), probs)
        return ops.scale(ops.neg(bce), 1.0 / x.shape[0])

    def predict(self, frames: np.ndarray) -> np.ndarray:
        """Eval-mode probabilities with shape (M, S, S)."""
        probs = self.forward(frames, training=False)
        return probs.data[:, 0, :, :]


class FrameVae:
    """Single-frame baseline with a Gaussian latent and reparameterized sample."""

    kind = "vae"

    def __init__(self, config: ModelConfig | None = None, seed: int = 0):
        cfg = config if config is not None else ModelConfig()
        self.config = cfg
        rng = np.random.default_rng(seed)
        init = make_initializer(rng)
        j, feat = cfg.latent_dim, cfg.feature_dim
        self.encoder = ConvFrameEncoder(cfg, init)
        self.mu_w = Parameter(init((j, feat)), "enc.mu.weight")
        self.mu_b = Parameter(np.zeros(j), "enc.mu.bias")
        self.logvar_w = Parameter(init((j, feat)), "enc.logvar.weight")
        self.logvar_b = Parameter(np.zeros(j), "enc.logvar.bias")
        self.expand_w = Parameter(init((feat, j)), "dec.expand.weight")
        self.expand_b = Parameter(np.zeros(feat), "dec.expand.bias")
        self.decoder = ConvFrameDecoder(cfg, feat, init)

    def parameters(self):
        return [
            *self.encoder.parameters(),
            self.mu_w, self.mu_b, self.logvar_w, self.logvar_b,
            self.expand_w, self.expand_b,
            *self.decoder.parameters(),
        ]

    def bn_states(self):
        return {**self.encoder.bn_states(), **self.decoder.bn_states()}

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def forward(self, frames: np.ndarray, noise: np.ndarray, training: bool):
        x = Tensor(_frame_batch(frames, self.config.image_size))
        feats = self.encoder.forward(x, training)
        mu = ops.linear(feats, self.mu_w, self.mu_b)
        log_var = ops.linear(feats, self.logvar_w, self.logvar_b)
        z = sample_latent(mu, log_var, np.asarray(noise, dtype=np.float64))
        expanded = ops.relu(ops.linear(z, self.expand_w, self.expand_b))
        return self.decoder.forward(expanded, training), mu, log_var

    def loss(self, frames: np.ndarray, noise: np.ndarray, training: bool = True) -> Tensor:
        x = _frame_batch(frames, self.config.image_size)
        probs, mu, log_var = self.forward(x, noise, training)
        return ops.scale(elbo_loss(Tensor(x), probs, mu, log_var), 1.0 / x.shape[0])

    def predict(self, frames: np.ndarray):
        """Eval-mode probabilities with z = mu; returns (probs, mu, log_var)."""
        frames = _frame_batch(frames, self.config.image_size)
        noise = np.zeros((frames.shape[0], self.config.latent_dim))
        probs, mu, log_var = self.forward(frames, noise, training=False)
        return probs.data[:, 0, :, :], mu.data, log_var.data


MODEL_CLASSES = {"lstmvae": LstmVae, "ae": FrameAutoencoder, "vae": FrameVae}


def build_model(kind: str, config: ModelConfig | None = None, seed: int = 0):
    try:
        cls = MODEL_CLASSES[kind]
    except KeyError:
        raise ValidationError(f"unknown model kind {kind!r}; expected one of {ARCHITECTURES}") from None
    return cls(config, seed)


# ---------------------------------------------------------------------------
# checkpointing


@dataclass
class ModelCheckpoint:
    architecture: str
    config: ModelConfig
    tensors: dict
    bn_stats: dict
    metadata: dict = field(default_factory=dict)


def checkpoint_from_model(model, metadata: dict | None = None) -> ModelCheckpoint:
    tensors = {p.name: p.data.copy() for p in model.parameters()}
    bn_stats = {}
    for name, state in model.bn_states().items():
        bn_stats[f"{name}.running_mean"] = state.running_mean.copy()
        bn_stats[f"{name}.running_var"] = state.running_var.copy()
    return ModelCheckpoint(model.kind, model.config, tensors, bn_stats, dict(metadata or {}))


def model_from_checkpoint(ckpt: ModelCheckpoint):
    model = build_model(ckpt.architecture, ckpt.config, seed=0)
    params = {p.name: p for p in model.parameters()}
    if set(params) != set(ckpt.tensors):
        missing = set(params) ^ set(ckpt.tensors)
        raise IncompatibilityError(
            f"checkpoint tensors do not match {ckpt.architecture} architecture: {sorted(missing)}"
        )
    for name, value in ckpt.tensors.items():
        if params[name].data.shape != value.shape:
            raise IncompatibilityError(
                f"checkpoint tensor {name} has shape {value.shape}, model expects "
                f"{params[name].data.shape}"
            )
        params[name].data[...] = value
    states = model.bn_states()
    for name, state in states.items():
        try:
            state.running_mean[...] = ckpt.bn_stats[f"{name}.running_mean"]
            state.running_var[...] = ckpt.bn_stats[f"{name}.running_var"]
        except KeyError as exc:
            raise IncompatibilityError(f"checkpoint missing batch-norm stats {exc.args[0]}") from None
    return model


def _write_named_arrays(buf, arrays: dict):
    buf.write(struct.pack("<I", len(arrays)))
    for name in sorted(arrays):
        value = np.ascontiguousarray(arrays[name], dtype=np.float64)
        encoded = name.encode("utf-8")
        buf.write(struct.pack("<H", len(encoded)))
        buf.write(encoded)
        buf.write(struct.pack("<B", value.ndim))
        for extent in value.shape:
            buf.write(struct.pack("<I", extent))
        buf.write(value.tobytes())


def _read_named_arrays(raw, offset):
    (count,) = struct.unpack_from("<I", raw, offset)
    offset += 4
    arrays = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", raw, offset)
        offset += 2
        name = raw[offset : offset + name_len].decode("utf-8")
        offset += name_len
        (rank,) = struct.unpack_from("<B", raw, offset)
        offset += 1
        shape = []
        for _ in range(rank):
            (extent,) = struct.unpack_from("<I", raw, offset)
            offset += 4
            shape.append(extent)
        nbytes = int(np.prod(shape, dtype=np.int64)) * 8 if shape else 8
        data = np.frombuffer(raw[offset : offset + nbytes], dtype="<f8").reshape(shape)
        offset += nbytes
        arrays[name] = data.copy()
    return arrays, offset


def save_checkpoint(ckpt: ModelCheckpoint, path):
    """Write the versioned binary checkpoint atomically (CRC32 trailer)."""
    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC)
    arch = ckpt.architecture.encode("utf-8")
    buf.write(struct.pack("<B", len(arch)))
    buf.write(arch)
    header = {"config": asdict(ckpt.config), "metadata": ckpt.metadata}
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    buf.write(struct.pack("<I", len(blob)))
    buf.write(blob)
    _write_named_arrays(buf, ckpt.tensors)
    _write_named_arrays(buf, ckpt.bn_stats)
    payload = buf.getvalue()
    crc = zlib.crc32(payload) & 0xFFFFFFFF
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(payload + struct.pack("<I", crc))
    os.replace(tmp, path)


def load_checkpoint(path) -> ModelCheckpoint:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < len(CHECKPOINT_MAGIC) + 4:
        raise FormatError(f"checkpoint file truncated: {len(raw)} bytes")
    if raw[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise FormatError(f"bad checkpoint magic {raw[:7]!r}, expected {CHECKPOINT_MAGIC!r}")
    (stored_crc,) = struct.unpack("<I", raw[-4:])
    actual_crc = zlib.crc32(raw[:-4]) & 0xFFFFFFFF
    if stored_crc != actual_crc:
        raise FormatError(
            f"checkpoint checksum mismatch: stored {stored_crc:#010x}, computed {actual_crc:#010x}"
        )
    offset = len(CHECKPOINT_MAGIC)
    try:
        (arch_len,) = struct.unpack_from("<B", raw, offset)
        offset += 1
        arch = raw[offset : offset + arch_len].decode("utf-8")
        offset += arch_len
        (blob_len,) = struct.unpack_from("<I", raw, offset)
        offset += 4
        header = json.loads(raw[offset : offset + blob_len])
        offset += blob_len
        tensors, offset = _read_named_arrays(raw, offset)
        bn_stats, offset = _read_named_arrays(raw, offset)
    except (struct.error, json.JSONDecodeError, UnicodeDecodeError):
        raise FormatError("checkpoint record truncated or malformed") from None
    if arch not in ARCHITECTURES:
        raise FormatError(f"checkpoint names unknown architecture {arch!r}")
    if offset != len(raw) - 4:
        raise FormatError("checkpoint has trailing bytes after final section")
    cfg_raw = dict(header["config"])
    cfg = ModelConfig(**cfg_raw)
    return ModelCheckpoint(arch, cfg, tensors, bn_stats, header.get("metadata", {}))


def checkpoint_summary(path) -> dict:
    """Inspect helper: architecture, config, and tensor inventory."""
    ckpt = load_checkpoint(path)
    return {
        "kind": "checkpoint",
        "architecture": ckpt.architecture,
        "config": asdict(ckpt.config),
        "metadata": ckpt.metadata,
        "tensor_count": len(ckpt.tensors),
        "parameter_values": int(sum(v.size for v in ckpt.tensors.values())),
    }
