"""Convolutional policy networks: architectures, batched inference, weight files.

Every layer is a zero-padded, unit-stride convolution; all but the last are
followed by ReLU, and the last (a single output channel) feeds a softmax over
the legal board points.  Activations are laid out ``(H, B, W, C)`` internally
so each kernel row is a single matrix product over the whole batch.
"""
from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .features import NUM_PLANES

__all__ = [
    "ARCHITECTURES",
    "LayerSpec",
    "MoveDistribution",
    "PolicyNet",
    "WeightFileError",
    "build_architecture",
    "forward_batch",
    "load_weights",
    "save_weights",
]

MAGIC = b"CPNW"
VERSION = 1
# Patch-buffer elements per chunk; sized so a chunk stays cache resident.
_COL_BUDGET = 1 << 20


@dataclass(frozen=True)
class LayerSpec:
    in_channels: int
    out_channels: int
    kernel_h: int
    kernel_w: int
    has_relu: bool = True

    def __post_init__(self):
        if self.kernel_h % 2 == 0 or self.kernel_w % 2 == 0:
            raise ValueError("kernel extents must be odd")
        if self.in_channels < 1 or self.out_channels < 1:
            raise ValueError("channel counts must be positive")


def _stack(first_k, width, inner_count):
    layers = [LayerSpec(NUM_PLANES, width, first_k, first_k)]
    layers += [LayerSpec(width, width, 3, 3) for _ in range(inner_count)]
    layers.append(LayerSpec(width, 1, 3, 3, has_relu=False))
    return layers


# (first kernel, filters, inner 3x3 layers), one row per architecture.
ARCHITECTURES = {
    "A": (9, 128, 1),
    "B": (9, 128, 4),
    "C": (5, 128, 10),
    "R2": (9, 16, 0),
    "R3": (9, 16, 1),
}


def _normalise_id(arch_id: str) -> str:
    key = arch_id.upper().replace("-", "")
    if key not in ARCHITECTURES:
        raise ValueError(f"unknown architecture {arch_id!r}; expected one of {sorted(ARCHITECTURES)}")
    return key


@dataclass
class MoveDistribution:
    probs: np.ndarray
    all_pass: bool = False


@dataclass
class PolicyNet:
    layers: list[LayerSpec]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    input_planes: int = NUM_PLANES
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.input_planes != NUM_PLANES:
            raise ValueError(f"policy nets take {NUM_PLANES} input planes")
        if not self.layers:
            raise ValueError("a policy net needs at least one layer")
        if self.layers[0].in_channels != self.input_planes:
            raise ValueError("first layer must consume the input planes")
        for a, b in zip(self.layers, self.layers[1:]):
            if a.out_channels != b.in_channels:
                raise ValueError(f"channel mismatch between layers: {a} -> {b}")
        last = self.layers[-1]
        if last.out_channels != 1 or last.has_relu:
            raise ValueError("final layer must have one output channel and no ReLU")
        for spec, w, b in zip(self.layers, self.weights, self.biases):
            if w.shape != (spec.out_channels, spec.in_channels, spec.kernel_h, spec.kernel_w):
                raise ValueError(f"weight shape {w.shape} does not match {spec}")
            if b.shape != (spec.out_channels,):
                raise ValueError(f"bias shape {b.shape} does not match {spec}")

    @property
    def depth(self) -> int:
        return len(self.layers)

    def parameters(self) -> list[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def copy(self) -> "PolicyNet":
        return PolicyNet(list(self.layers), [w.copy() for w in self.weights],
                         [b.copy() for b in self.biases], self.input_planes, self.name, dict(self.meta))

    def astype(self, dtype) -> "PolicyNet":
        return PolicyNet(list(self.layers), [w.astype(dtype) for w in self.weights],
                         [b.astype(dtype) for b in self.biases], self.input_planes, self.name, dict(self.meta))

    def logits(self, x: np.ndarray) -> np.ndarray:
        """Final-layer logits ``(B, H, W)`` for feature batch ``(B, 16, H, W)``."""
        return logits(self, x)

    def predict(self, x: np.ndarray, masks: np.ndarray) -> np.ndarray:
        """Masked softmax probabilities ``(B, H, W)``; all-zero rows for empty masks."""
        return masked_softmax(self.logits(x), masks)


def build_architecture(arch_id: str, size: int = 19, seed: int = 0, init: str = "uniform") -> PolicyNet:
    """Instantiate one of A, B, C, R2, R3.

    ``init="uniform"`` draws weights from U(-r, r), r = sqrt(6/(fan_in+fan_out));
    ``init="zeros"`` leaves every parameter at zero.  Biases start at zero.
    """
    key = _normalise_id(arch_id)
    first_k, width, inner = ARCHITECTURES[key]
    layers = _stack(first_k, width, inner)
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for spec in layers:
        shape = (spec.out_channels, spec.in_channels, spec.kernel_h, spec.kernel_w)
        if init == "zeros":
            w = np.zeros(shape, dtype=np.float32)
        elif init == "uniform":
            area = spec.kernel_h * spec.kernel_w
            bound = np.sqrt(6.0 / (spec.in_channels * area + spec.out_channels * area))
            w = rng.uniform(-bound, bound, size=shape).astype(np.float32)
        else:
            raise ValueError(f"unknown init {init!r}")
        weights.append(w)
        biases.append(np.zeros(spec.out_channels, dtype=np.float32))
    return PolicyNet(layers, weights, biases, name=key, meta={"size": size})


def row_patches(x: np.ndarray, kh: int, kw: int) -> np.ndarray:
    """Horizontal patches of a ``(H, B, W, C)`` activation.

    Returns ``(H + 2*(kh//2), B, W, C*kw)``: rows are zero-padded but not
    expanded, so kernel row ``dy`` sees the contiguous slab ``[dy:dy+H]``.
    """
    ph, pw = kh // 2, kw // 2
    h, b, w, c = x.shape
    xp = np.pad(x, ((ph, ph), (0, 0), (pw, pw), (0, 0)))
    win = sliding_window_view(xp, kw, axis=2)  # H+2ph, B, W, C, kw
    return win.reshape(h + 2 * ph, b, w, c * kw)


def kernel_rows(weight: np.ndarray) -> np.ndarray:
    """``[out][in][kh][kw]`` -> ``(kh, in*kw, out)`` matching :func:`row_patches`."""
    out_ch, in_ch, kh, kw = weight.shape
    return np.ascontiguousarray(weight.transpose(2, 1, 3, 0).reshape(kh, in_ch * kw, out_ch))


def conv_forward(x: np.ndarray, weight: np.ndarray, bias: np.ndarray):
    """One convolution on ``(H, B, W, C)`` input; returns (output, row patches)."""
    h, b, w, _ = x.shape
    out_ch, _, kh, _ = weight.shape
    patches = row_patches(x, kh, weight.shape[3])
    rows = kernel_rows(weight)
    k = patches.shape[-1]
    out = np.empty((h * b * w, out_ch), dtype=x.dtype)
    out[:] = bias
    for dy in range(kh):
        out += patches[dy:dy + h].reshape(h * b * w, k) @ rows[dy]
    return out.reshape(h, b, w, out_ch), patches


def to_internal(x: np.ndarray, dtype) -> np.ndarray:
    """``(B, C, H, W)`` features -> contiguous ``(H, B, W, C)``."""
    return np.ascontiguousarray(np.asarray(x).transpose(2, 0, 3, 1), dtype=dtype)


def _chunk_rows(net: PolicyNet, h: int, w: int) -> int:
    widest = max((s.in_channels * s.kernel_w + s.out_channels) for s in net.layers)
    return max(1, _COL_BUDGET // (widest * (h + 8) * w))


def logits(net: PolicyNet, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 4 or x.shape[1] != net.layers[0].in_channels:
        raise ValueError(
            f"expected input (B, {net.layers[0].in_channels}, H, W), got {x.shape}")
    dtype = net.weights[0].dtype
    b, _, h, w = x.shape
    step = _chunk_rows(net, h, w)
    out = np.empty((b, h, w), dtype=dtype)
    for lo in range(0, b, step):
        a = to_internal(x[lo:lo + step], dtype)
        for spec, weight, bias in zip(net.layers, net.weights, net.biases):
            a, _ = conv_forward(a, weight, bias)
            if spec.has_relu:
                np.maximum(a, 0, out=a)
        out[lo:lo + step] = a[..., 0].transpose(1, 0, 2)
    return out


def masked_softmax(z: np.ndarray, masks: np.ndarray) -> np.ndarray:
    """Softmax over the masked points of each row, in float64.

    Masked-out points get exactly 0; rows with empty masks are all zero.
    """
    b = z.shape[0]
    flat = z.reshape(b, -1).astype(np.float64)
    m = np.asarray(masks, dtype=bool).reshape(b, -1)
    flat = np.where(m, flat, -np.inf)
    peak = flat.max(axis=1, keepdims=True)
    peak[~np.isfinite(peak)] = 0.0
    e = np.exp(flat - peak)
    total = e.sum(axis=1, keepdims=True)
    probs = np.divide(e, total, out=np.zeros_like(e), where=total > 0)
    return probs.reshape(z.shape)


def forward_batch(net: PolicyNet, inputs: Sequence[np.ndarray],
                  legal_masks: Sequence[np.ndarray]) -> list[MoveDistribution]:
    """Move distributions for a batch of feature tensors.

    A lane whose mask is empty comes back flagged ``all_pass``.
    """
    if len(inputs) != len(legal_masks):
        raise ValueError("inputs and masks differ in length")
    if len(inputs) == 0:
        return []
    x = np.stack([np.asarray(t) for t in inputs])
    masks = np.stack([np.asarray(m, dtype=bool) for m in legal_masks])
    if masks.shape != (x.shape[0], x.shape[2], x.shape[3]):
        masks = masks.reshape(x.shape[0], x.shape[2], x.shape[3])
    probs = net.predict(x, masks)
    empty = ~masks.reshape(len(masks), -1).any(axis=1)
    return [MoveDistribution(p, bool(e)) for p, e in zip(probs, empty)]


def hidden_activations(net: PolicyNet, x: np.ndarray) -> list[np.ndarray]:
    """Post-ReLU activations of every hidden layer, each ``(H, B, W, C)``."""
    a = to_internal(x, net.weights[0].dtype)
    acts = []
    for spec, weight, bias in zip(net.layers, net.weights, net.biases):
        a, _ = conv_forward(a, weight, bias)
        if spec.has_relu:
            np.maximum(a, 0, out=a)
            acts.append(a.copy())
    return acts


class WeightFileError(ValueError):
    pass


def save_weights(net: PolicyNet, path) -> None:
    buf = bytearray(MAGIC)
    buf += struct.pack("<II", VERSION, len(net.layers))
    for spec, w, b in zip(net.layers, net.weights, net.biases):
        buf += struct.pack("<IIIIB", spec.in_channels, spec.out_channels,
                           spec.kernel_h, spec.kernel_w, int(spec.has_relu))
        buf += np.ascontiguousarray(w, dtype="<f4").tobytes()
        buf += np.ascontiguousarray(b, dtype="<f4").tobytes()
    buf += struct.pack("<I", zlib.crc32(buf) & 0xFFFFFFFF)
    Path(path).write_bytes(bytes(buf))


def load_weights(path) -> PolicyNet:
    data = Path(path).read_bytes()
    if len(data) < 16 or data[:4] != MAGIC:
        raise WeightFileError(f"{path}: not a policy weight file")
    (crc,) = struct.unpack_from("<I", data, len(data) - 4)
    if zlib.crc32(data[:-4]) & 0xFFFFFFFF != crc:
        raise WeightFileError(f"{path}: CRC mismatch")
    version, count = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise WeightFileError(f"{path}: unsupported version {version}")
    off = 12
    layers, weights, biases = [], [], []
    try:
        for _ in range(count):
            ci, co, kh, kw, relu = struct.unpack_from("<IIIIB", data, off)
            off += 17
            nw = co * ci * kh * kw
            w = np.frombuffer(data, dtype="<f4", count=nw, offset=off).reshape(co, ci, kh, kw)
            off += 4 * nw
            b = np.frombuffer(data, dtype="<f4", count=co, offset=off)
            off += 4 * co
            layers.append(LayerSpec(ci, co, kh, kw, bool(relu)))
            weights.append(w.astype(np.float32))
            biases.append(b.astype(np.float32))
    except (struct.error, ValueError) as exc:
        raise WeightFileError(f"{path}: truncated layer data") from exc
    if off != len(data) - 4:
        raise WeightFileError(f"{path}: {len(data) - 4 - off} trailing bytes")
    return PolicyNet(layers, weights, biases, name=Path(path).stem)
