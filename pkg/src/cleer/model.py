"""Encoder (input projection -> masking hook -> dilated residual conv stack)
and the downstream classifier head, plus checkpoint serialization.

Layout convention: raw windows and latents are (B, L, C)/(B, L, D); the
conv stack runs channels-first internally. The contrastive branch feeds
masked cropped views through the encoder; classification always consumes a
dedicated unmasked, uncropped pass.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, asdict

import numpy as np

from .errors import ConfigError, DataFormatError, ShapeError
from . import tensor as T
from .augment import apply_mask
from .tensor import DiffTensor


def default_dilations(n_blocks):
    return tuple(2 ** i for i in range(n_blocks))


@dataclass(frozen=True)
class EncoderConfig:
    in_channels: int
    hidden_dim: int = 128
    repr_dim: int = 900
    n_blocks: int = 5
    kernel_size: int = 3
    dilation_schedule: tuple = ()

    def __post_init__(self):
        if not self.dilation_schedule:
            object.__setattr__(self, "dilation_schedule",
                               default_dilations(self.n_blocks))
        else:
            object.__setattr__(self, "dilation_schedule",
                               tuple(int(d) for d in self.dilation_schedule))
        if len(self.dilation_schedule) != self.n_blocks:
            raise ConfigError(
                f"dilation schedule {self.dilation_schedule} does not match"
                f" n_blocks={self.n_blocks}")
        if self.hidden_dim <= 0 or self.repr_dim <= 0 or self.in_channels <= 0:
            raise ConfigError("encoder dims must be positive")
        if self.kernel_size % 2 == 0:
            raise ConfigError(f"kernel_size must be odd, got {self.kernel_size}")

    @property
    def receptive_field(self):
        return 1 + 2 * (self.kernel_size - 1) * sum(self.dilation_schedule)


@dataclass(frozen=True)
class ClassifierConfig:
    in_dim: int
    conv_channels: int = 256
    fc_dims: tuple = (64,)
    n_classes: int = 3

    def __post_init__(self):
        object.__setattr__(self, "fc_dims", tuple(int(d) for d in self.fc_dims))
        if self.n_classes < 2:
            raise ConfigError(f"n_classes must be >= 2, got {self.n_classes}")


def _uniform_fan_in(rng, shape, fan_in, dtype):
    bound = float(np.sqrt(1.0 / fan_in))
    return DiffTensor(rng.uniform(-bound, bound, size=shape).astype(dtype),
                      requires_grad=True)


class Encoder:
    """Per-timestamp projection followed by a stack of residual blocks of
    dilated convolutions and a 1x1 projection to the representation size."""

    def __init__(self, config: EncoderConfig, rng, dtype=np.float32):
        self.config = config
        c, h, r, k = (config.in_channels, config.hidden_dim,
                      config.repr_dim, config.kernel_size)
        self.proj_w = _uniform_fan_in(rng, (c, h), c, dtype)
        self.proj_b = DiffTensor(np.zeros(h, dtype=dtype), requires_grad=True)
        self.blocks = []
        for d in config.dilation_schedule:
            conv1 = _uniform_fan_in(rng, (h, h, k), h * k, dtype)
            conv2 = _uniform_fan_in(rng, (h, h, k), h * k, dtype)
            self.blocks.append((conv1, conv2, int(d)))
        self.out_w = _uniform_fan_in(rng, (r, h, 1), h, dtype)

    def named_parameters(self):
        params = {"encoder.proj_w": self.proj_w, "encoder.proj_b": self.proj_b}
        for i, (c1, c2, _) in enumerate(self.blocks):
            params[f"encoder.block{i}.conv1"] = c1
            params[f"encoder.block{i}.conv2"] = c2
        params["encoder.out_w"] = self.out_w
        return params

    def project(self, x):
        """Input projection only: (B, L, C) -> (B, L, hidden_dim)."""
        if not isinstance(x, DiffTensor):
            x = DiffTensor(x)
        if x.ndim != 3 or x.shape[-1] != self.config.in_channels:
            raise ShapeError(
                f"encoder expects (B, L, {self.config.in_channels}), got {x.shape}")
        return T.linear(x, self.proj_w, self.proj_b)

    def forward(self, x, mask=None):
        """Encode (B, L, C) -> (B, L, repr_dim); mask (if given) zeroes
        latent timestamps right after projection."""
        z = self.project(x)
        if mask is not None:
            z = apply_mask(z, mask)
        y = z.transpose(0, 2, 1)                       # (B, H, L)
        for conv1, conv2, d in self.blocks:
            inner = T.relu(T.conv1d_dilated(y, conv1, dilation=d))
            y = T.add(y, T.conv1d_dilated(inner, conv2, dilation=d))
        y = T.conv1d_dilated(y, self.out_w, dilation=1)  # (B, R, L)
        return y.transpose(0, 2, 1)

    __call__ = forward


class Classifier:
    """conv1d -> global max-pool over time -> ReLU -> FC stack -> softmax."""

    def __init__(self, config: ClassifierConfig, rng, dtype=np.float32):
        self.config = config
        f = config.conv_channels
        self.conv_w = _uniform_fan_in(rng, (f, config.in_dim, 3),
                                      config.in_dim * 3, dtype)
        self.conv_b = DiffTensor(np.zeros(f, dtype=dtype), requires_grad=True)
        self.fcs = []
        widths = (f,) + config.fc_dims + (config.n_classes,)
        for d_in, d_out in zip(widths[:-1], widths[1:]):
            w = _uniform_fan_in(rng, (d_in, d_out), d_in, dtype)
            b = DiffTensor(np.zeros(d_out, dtype=dtype), requires_grad=True)
            self.fcs.append((w, b))

    def named_parameters(self):
        params = {"classifier.conv_w": self.conv_w,
                  "classifier.conv_b": self.conv_b}
        for i, (w, b) in enumerate(self.fcs):
            params[f"classifier.fc{i}_w"] = w
            params[f"classifier.fc{i}_b"] = b
        return params

    def forward(self, r):
        """Class probabilities from representations: (B, L, D) -> (B, n_classes)."""
        if r.ndim != 3 or r.shape[-1] != self.config.in_dim:
            raise ShapeError(
                f"classifier expects (B, L, {self.config.in_dim}), got {r.shape}")
        y = r.transpose(0, 2, 1)                       # (B, D, L)
        y = T.conv1d_dilated(y, self.conv_w, dilation=1)
        y = T.add(y, T.reshape(self.conv_b, (1, -1, 1)))
        y = T.relu(y.max(axis=-1))                     # global max-pool, (B, F)
        for w, b in self.fcs[:-1]:
            y = T.relu(T.linear(y, w, b))
        w, b = self.fcs[-1]
        return T.softmax(T.linear(y, w, b), axis=-1)

    __call__ = forward


class Model:
    """Encoder plus classifier; the unit the trainer optimizes and the
    checkpoint format stores."""

    def __init__(self, encoder_config, classifier_config=None, seed=0,
                 dtype=np.float32):
        if classifier_config is None:
            classifier_config = ClassifierConfig(in_dim=encoder_config.repr_dim)
        if classifier_config.in_dim != encoder_config.repr_dim:
            raise ConfigError(
                f"classifier in_dim {classifier_config.in_dim} != encoder"
                f" repr_dim {encoder_config.repr_dim}")
        rng = np.random.default_rng(seed)
        self.encoder_config = encoder_config
        self.classifier_config = classifier_config
        self.encoder = Encoder(encoder_config, rng, dtype)
        self.classifier = Classifier(classifier_config, rng, dtype)

    def named_parameters(self):
        params = dict(self.encoder.named_parameters())
        params.update(self.classifier.named_parameters())
        return params

    def parameters(self):
        return list(self.named_parameters().values())

    def encode(self, x, mask=None):
        return self.encoder.forward(x, mask)

    def classify(self, x):
        """Probabilities for raw windows (B, L, C): encode then classify."""
        return self.classifier.forward(self.encoder.forward(x))

    def predict(self, x):
        """Deterministic labels: argmax probabilities, ties to the lowest
        class index. Runs without graph recording."""
        with T.no_grad():
            probs = self.classify(DiffTensor(x)).data
        return np.argmax(probs, axis=1)


# -- checkpoint container -----------------------------------------------------

_CKPT_MAGIC = b"CKPT"
_CKPT_VERSION = 1


def save_checkpoint(model, path):
    """magic | version u32 | header-len u32 | JSON header | float32 payload."""
    params = model.named_parameters()
    manifest = []
    offset = 0
    chunks = []
    for name, p in params.items():
        arr = np.ascontiguousarray(p.data, dtype="<f4")
        manifest.append({"name": name, "shape": list(arr.shape),
                         "offset": offset})
        chunks.append(arr.tobytes())
        offset += arr.nbytes
    header = {
        "encoder_config": asdict(model.encoder_config),
        "classifier_config": asdict(model.classifier_config),
        "params": manifest,
        "payload_bytes": offset,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(_CKPT_MAGIC)
        f.write(struct.pack("<II", _CKPT_VERSION, len(blob)))
        f.write(blob)
        for c in chunks:
            f.write(c)


def load_checkpoint(path):
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:4] != _CKPT_MAGIC:
        raise DataFormatError(f"bad checkpoint magic at offset 0: {raw[:4]!r}")
    if len(raw) < 12:
        raise DataFormatError(f"truncated checkpoint header at offset {len(raw)}")
    version, header_len = struct.unpack_from("<II", raw, 4)
    if version != _CKPT_VERSION:
        raise DataFormatError(f"unsupported checkpoint version {version} at offset 4")
    header_end = 12 + header_len
    if len(raw) < header_end:
        raise DataFormatError(
            f"truncated checkpoint header at offset {len(raw)} (need {header_end})")
    try:
        header = json.loads(raw[12:header_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise DataFormatError(f"unreadable checkpoint header at offset 12: {e}")
    payload = raw[header_end:]
    if len(payload) != header["payload_bytes"]:
        raise DataFormatError(
            f"checkpoint payload size mismatch at offset {header_end}: header"
            f" says {header['payload_bytes']} bytes, got {len(payload)}")
    enc_cfg = header["encoder_config"]
    clf_cfg = header["classifier_config"]
    enc = EncoderConfig(
        in_channels=enc_cfg["in_channels"], hidden_dim=enc_cfg["hidden_dim"],
        repr_dim=enc_cfg["repr_dim"], n_blocks=enc_cfg["n_blocks"],
        kernel_size=enc_cfg["kernel_size"],
        dilation_schedule=tuple(enc_cfg["dilation_schedule"]))
    clf = ClassifierConfig(
        in_dim=clf_cfg["in_dim"], conv_channels=clf_cfg["conv_channels"],
        fc_dims=tuple(clf_cfg["fc_dims"]), n_classes=clf_cfg["n_classes"])
    model = Model(enc, clf)
    params = model.named_parameters()
    for entry in header["params"]:
        name = entry["name"]
        if name not in params:
            raise DataFormatError(f"checkpoint names unknown parameter {name!r}")
        shape = tuple(entry["shape"])
        n = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        end = start + 4 * n
        if end > len(payload):
            raise DataFormatError(
                f"checkpoint payload truncated at offset {header_end + start}"
                f" for parameter {name!r}")
        arr = np.frombuffer(payload[start:end], dtype="<f4").reshape(shape)
        if params[name].data.shape != shape:
            raise DataFormatError(
                f"checkpoint shape {shape} for {name!r} does not match model"
                f" shape {params[name].data.shape}")
        params[name].data = arr.astype(np.float32, copy=True)
    return model
