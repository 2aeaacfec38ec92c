"""Supervised next-move training of policy networks with momentum SGD."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import features
from .goban import Move, Position, legal_points
from .policy_net import PolicyNet, kernel_rows, masked_softmax, row_patches, to_internal

log = logging.getLogger(__name__)

__all__ = [
    "AnnealEveryNEpochs",
    "Constant",
    "Examples",
    "StepAtIteration",
    "TrainConfig",
    "TrainReport",
    "encode_examples",
    "evaluate",
    "loss_and_grads",
    "preset",
    "train",
]


@dataclass(frozen=True)
class AnnealEveryNEpochs:
    factor: float
    n: int


@dataclass(frozen=True)
class StepAtIteration:
    new_lr: float
    iteration: int


@dataclass(frozen=True)
class Constant:
    pass


Schedule = Union[AnnealEveryNEpochs, StepAtIteration, Constant]


@dataclass
class TrainConfig:
    lr_initial: float
    schedule: Schedule = field(default_factory=Constant)
    momentum: float = 0.0
    weight_decay: float = 0.0
    batch_size: int = 16
    epochs: int = 1
    seed: int = 0
    augment: bool = False

    def __post_init__(self):
        if not self.lr_initial > 0:
            raise ValueError("lr_initial must be positive")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be positive")

    def lr_at(self, epoch: int, iteration: int) -> float:
        s = self.schedule
        if isinstance(s, AnnealEveryNEpochs):
            return self.lr_initial * s.factor ** (epoch // s.n)
        if isinstance(s, StepAtIteration):
            return self.lr_initial if iteration < s.iteration else s.new_lr
        return self.lr_initial


def preset(arch_id: str) -> TrainConfig:
    key = arch_id.upper().replace("-", "")
    if key in ("A", "B"):
        return TrainConfig(0.01, AnnealEveryNEpochs(0.1, 2), momentum=0.0, epochs=6)
    if key == "C":
        return TrainConfig(0.05, Constant(), momentum=0.0, epochs=6)
    if key in ("R2", "R3"):
        return TrainConfig(0.1, StepAtIteration(0.01, 3200), momentum=0.9, epochs=2)
    raise ValueError(f"unknown architecture {arch_id!r}")


@dataclass
class TrainReport:
    epoch_losses: list[float] = field(default_factory=list)
    accuracy: Optional[float] = None
    accuracy_split: str = "held-out"
    iterations: int = 0

    def to_jsonl(self) -> str:
        lines = [json.dumps({"epoch": i + 1, "loss": loss}) for i, loss in enumerate(self.epoch_losses)]
        lines.append(json.dumps({"iterations": self.iterations, "accuracy": self.accuracy,
                                 "accuracy_split": self.accuracy_split}))
        return "\n".join(lines) + "\n"


@dataclass
class Examples:
    x: np.ndarray       # (N, 16, H, W) uint8
    masks: np.ndarray   # (N, H, W) bool
    labels: np.ndarray  # (N,) flat point index

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, idx) -> "Examples":
        return Examples(self.x[idx], self.masks[idx], self.labels[idx])


def encode_examples(pairs: Sequence[tuple[Position, Move]]) -> Examples:
    if len(pairs) == 0:
        raise ValueError("empty dataset")
    n = pairs[0][0].size
    xs = np.empty((len(pairs), features.NUM_PLANES, n, n), dtype=np.uint8)
    masks = np.zeros((len(pairs), n * n), dtype=bool)
    labels = np.empty(len(pairs), dtype=np.int64)
    for i, (pos, mv) in enumerate(pairs):
        if mv.point is None:
            raise ValueError(f"example {i}: pass moves cannot be training labels")
        if pos.size != n:
            raise ValueError("all examples must share a board size")
        xs[i] = features.extract(pos)
        masks[i, legal_points(pos)] = True
        labels[i] = mv.point[0] * n + mv.point[1]
        masks[i, labels[i]] = True
    return Examples(xs, masks.reshape(len(pairs), n, n), labels)


def _forward_cache(net: PolicyNet, x: np.ndarray):
    a = to_internal(x, net.weights[0].dtype)
    cache = []
    for spec, weight, bias in zip(net.layers, net.weights, net.biases):
        h, b, w, _ = a.shape
        patches = row_patches(a, spec.kernel_h, spec.kernel_w)
        rows = kernel_rows(weight)
        k = patches.shape[-1]
        out = np.empty((h * b * w, spec.out_channels), dtype=a.dtype)
        out[:] = bias
        for dy in range(spec.kernel_h):
            out += patches[dy:dy + h].reshape(h * b * w, k) @ rows[dy]
        out = out.reshape(h, b, w, spec.out_channels)
        if spec.has_relu:
            np.maximum(out, 0, out=out)
        cache.append((patches, rows, out))
        a = out
    return a[..., 0].transpose(1, 0, 2), cache


def _backward(net: PolicyNet, cache, dz: np.ndarray):
    grads_w = [None] * net.depth
    grads_b = [None] * net.depth
    d = np.ascontiguousarray(dz.transpose(1, 0, 2))[..., None]
    for i in reversed(range(net.depth)):
        spec = net.layers[i]
        patches, rows, out = cache[i]
        if spec.has_relu:
            d = d * (out > 0)
        h, b, w, o = d.shape
        kh, kw, c = spec.kernel_h, spec.kernel_w, spec.in_channels
        k = c * kw
        d2 = d.reshape(h * b * w, o)
        grads_b[i] = d2.sum(axis=0)
        drows = np.empty_like(rows)
        for dy in range(kh):
            drows[dy] = patches[dy:dy + h].reshape(h * b * w, k).T @ d2
        grads_w[i] = drows.reshape(kh, c, kw, o).transpose(3, 1, 0, 2)
        if i == 0:
            break
        ph, pw = kh // 2, kw // 2
        dpatch = np.zeros(patches.shape, dtype=d.dtype)
        for dy in range(kh):
            dpatch[dy:dy + h] += (d2 @ rows[dy].T).reshape(h, b, w, k)
        dpatch = dpatch.reshape(h + 2 * ph, b, w, c, kw)
        dxp = np.zeros((h + 2 * ph, b, w + 2 * pw, c), dtype=d.dtype)
        for j in range(kw):
            dxp[:, :, j:j + w, :] += dpatch[..., j]
        d = dxp[ph:ph + h, :, pw:pw + w, :]
    return grads_w, grads_b


def loss_and_grads(net: PolicyNet, x: np.ndarray, masks: np.ndarray, labels: np.ndarray):
    """Mean masked-softmax cross-entropy and its parameter gradients."""
    z, cache = _forward_cache(net, x)
    b = z.shape[0]
    probs = masked_softmax(z, masks).reshape(b, -1)
    picked = probs[np.arange(b), labels]
    loss = float(-np.mean(np.log(np.maximum(picked, 1e-300))))
    dz = probs.copy()
    dz[np.arange(b), labels] -= 1.0
    dz = (dz / b).reshape(z.shape).astype(z.dtype)
    gw, gb = _backward(net, cache, dz)
    return loss, gw, gb


# The 8 board symmetries as (transpose, flip rows, flip cols).
_SYMMETRIES = [(t, fr, fc) for t in (False, True) for fr in (False, True) for fc in (False, True)]


def _apply_symmetry(ex: Examples, sym) -> Examples:
    t, fr, fc = sym
    n = ex.masks.shape[-1]
    x, m = ex.x, ex.masks
    lab = np.zeros((len(ex), n, n), dtype=bool)
    lab[np.arange(len(ex)), ex.labels // n, ex.labels % n] = True
    if t:
        x, m, lab = x.swapaxes(-1, -2), m.swapaxes(-1, -2), lab.swapaxes(-1, -2)
    if fr:
        x, m, lab = x[..., ::-1, :], m[..., ::-1, :], lab[..., ::-1, :]
    if fc:
        x, m, lab = x[..., ::-1], m[..., ::-1], lab[..., ::-1]
    labels = lab.reshape(len(ex), -1).argmax(axis=1)
    return Examples(np.ascontiguousarray(x), np.ascontiguousarray(m), labels)


def evaluate(net: PolicyNet, ex: Examples, batch: int = 256) -> float:
    """Top-1 accuracy of the masked argmax against the recorded moves."""
    hits = 0
    for lo in range(0, len(ex), batch):
        part = ex.subset(slice(lo, lo + batch))
        z = net.logits(part.x).reshape(len(part), -1)
        z = np.where(part.masks.reshape(len(part), -1), z, -np.inf)
        hits += int(np.sum(z.argmax(axis=1) == part.labels))
    return hits / len(ex)


def train(net: PolicyNet, dataset, cfg: TrainConfig, holdout=None,
          on_epoch: Optional[Callable[[int, float], None]] = None) -> tuple[PolicyNet, TrainReport]:
    """Train ``net`` in place on ``dataset`` and return it with a report.

    ``dataset``/``holdout`` are :class:`Examples` or sequences of
    ``(Position, Move)`` pairs.
    """
    data = dataset if isinstance(dataset, Examples) else encode_examples(dataset)
    if len(data) == 0:
        raise ValueError("empty dataset")
    held = holdout
    if held is not None and not isinstance(held, Examples):
        held = encode_examples(held)
    rng = np.random.default_rng(cfg.seed)
    velocity = [np.zeros_like(p) for p in net.parameters()]
    report = TrainReport()
    it = 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(data))
        total, count = 0.0, 0
        for lo in range(0, len(order), cfg.batch_size):
            batch = data.subset(np.sort(order[lo:lo + cfg.batch_size]))
            if cfg.augment:
                batch = _apply_symmetry(batch, _SYMMETRIES[rng.integers(len(_SYMMETRIES))])
            loss, gw, gb = loss_and_grads(net, batch.x, batch.masks, batch.labels)
            if not math.isfinite(loss):
                raise FloatingPointError(f"loss diverged at iteration {it}")
            lr = cfg.lr_at(epoch, it)
            grads = [g for pair in zip(gw, gb) for g in pair]
            for p, g, v in zip(net.parameters(), grads, velocity):
                step = g + cfg.weight_decay * p if cfg.weight_decay else g
                v *= cfg.momentum
                v -= lr * step
                p += v
            total += loss * len(batch)
            count += len(batch)
            it += 1
        mean = total / count
        report.epoch_losses.append(mean)
        log.info("epoch %d loss %.4f lr %.4g", epoch + 1, mean, cfg.lr_at(epoch, it))
        if on_epoch is not None:
            on_epoch(epoch + 1, mean)
    report.iterations = it
    if held is not None and len(held):
        report.accuracy = evaluate(net, held)
    else:
        report.accuracy = evaluate(net, data)
        report.accuracy_split = "train"
    return net, report
