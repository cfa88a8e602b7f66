"""
Fine-alignment network.
-----------------------

A small 1D convolutional network with spatial attention that maps the windowed
energies of the coarse subspace to a probability over window slots. The
refined angle is the probability-weighted mean of the slot grid angles.

Network layout for window length U:
    3 × [two parallel stride-2 convolutions (kernels 3 and 5), concatenated,
         batch norm, PReLU]                       1 → 32 → 64 → 128 channels
    spatial attention: channel mean/max → conv (k=7) → sigmoid → rescale
    global average pooling
    2 × [fully connected, batch norm, PReLU, dropout]
    fully connected to U logits, masked softmax

Classes:
    - NetworkSpec: Architecture hyper-parameters.
    - NetworkParams: Named trainable tensors and non-trainable buffers.
    - TrainSample: One network input with its label.
    - ForwardCache: Intermediate values kept for the backward pass.
    - WeightFileError: Raised for unreadable weight files.

Functions:
    - init_params: Randomly initialized parameters.
    - build_input: Network input from measurements and a coarse result.
    - stack_samples: Batch arrays from a list of samples.
    - forward: Forward pass over a batch.
    - predict: Eval-mode probabilities for one sample.
    - refine_angle: Probability-weighted angle estimate.
    - argmax_angle: Grid angle of the most probable slot.
    - loss: Cross-entropy in base 10.
    - gradients: Reverse-mode gradients of the loss.
    - update_running_stats: Fold batch statistics into the batch-norm buffers.
    - param_count: Number of trainable scalars.
    - feature_lengths: Lengths after each convolution block.
    - network_flops: Layer-by-layer operation count.
    - save_weights / load_weights: Binary weight file I/O.
"""

import math
import struct
import zlib
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np
from scipy import special

from channel import grid_angle
from coarse import CoarseResult
from numerics import DomainError

LN10 = math.log(10.0)
MAGIC = b"NFA1"
BLOCKS = (1, 2, 3)
FC_LAYERS = (1, 2)


class WeightFileError(Exception):
    """Custom exception for unreadable or corrupt weight files."""

    pass


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture hyper-parameters.

    Attributes:
        window: Input length U.
        branch_channels: Output channels of each parallel branch, per block.
        kernels: Kernel sizes of the two parallel branches.
        attention_kernel: Kernel size of the attention convolution.
        dropout: Drop probability after each fully connected block.
        conv_slope: Fixed negative slope of the convolution-block PReLUs.
        bn_eps: Batch-norm variance floor.
        bn_momentum: Weight of the newest batch in the running statistics.
    """

    window: int = 49
    branch_channels: tuple[int, int, int] = (16, 32, 64)
    kernels: tuple[int, int] = (3, 5)
    attention_kernel: int = 7
    dropout: float = 0.5
    conv_slope: float = 0.25
    bn_eps: float = 1e-5
    bn_momentum: float = 0.1

    @property
    def block_channels(self) -> tuple[int, ...]:
        return tuple(2 * c for c in self.branch_channels)

    @property
    def width(self) -> int:
        return self.block_channels[-1]


@dataclass
class NetworkParams:
    spec: NetworkSpec
    weights: dict[str, np.ndarray]
    buffers: dict[str, np.ndarray]

    def copy(self) -> "NetworkParams":
        return NetworkParams(
            spec=self.spec,
            weights={k: v.copy() for k, v in self.weights.items()},
            buffers={k: v.copy() for k, v in self.buffers.items()},
        )


@dataclass(frozen=True)
class TrainSample:
    """One network input.

    Attributes:
        input: Length-U normalized energies, zero on padding.
        mask: Length-U, 1 on valid slots.
        angles: Grid angle of each valid slot, 0 on padding.
        target_index: Slot of the true DFT index, None when unlabelled.
    """

    input: np.ndarray
    mask: np.ndarray
    angles: np.ndarray
    target_index: Optional[int] = None


@dataclass
class ForwardCache:
    train: bool
    probs: np.ndarray
    mask: np.ndarray
    stages: dict[str, tuple] = field(default_factory=dict)
    batch_stats: dict[str, tuple[np.ndarray, np.ndarray, int]] = field(default_factory=dict)


def feature_lengths(window: int) -> tuple[int, int, int]:
    """L1, L2, L3 with Lₖ = ⌊(Lₖ₋₁ + 1)/2⌋ and L₀ = U."""
    l1 = (window + 1) // 2
    l2 = (l1 + 1) // 2
    return l1, l2, (l2 + 1) // 2


def init_params(spec: NetworkSpec, rng: np.random.Generator) -> NetworkParams:
    """He-initialized weights, zero biases, unit batch-norm scales."""
    weights: dict[str, np.ndarray] = {}
    buffers: dict[str, np.ndarray] = {}
    c_in = 1
    for b, (branch, block) in zip(BLOCKS, zip(spec.branch_channels, spec.block_channels)):
        for k in spec.kernels:
            fan_in = c_in * k
            weights[f"conv{b}_k{k}_w"] = rng.normal(0.0, math.sqrt(2.0 / fan_in), (branch, c_in, k))
            weights[f"conv{b}_k{k}_b"] = np.zeros(branch)
        weights[f"bn{b}_gamma"] = np.ones(block)
        weights[f"bn{b}_beta"] = np.zeros(block)
        buffers[f"bn{b}_mean"] = np.zeros(block)
        buffers[f"bn{b}_var"] = np.ones(block)
        buffers[f"prelu{b}_slope"] = np.array(spec.conv_slope)
        c_in = block

    ka = spec.attention_kernel
    weights["att_w"] = rng.normal(0.0, math.sqrt(1.0 / (2 * ka)), (1, 2, ka))
    weights["att_b"] = np.zeros(1)

    width = spec.width
    for f in FC_LAYERS:
        weights[f"fc{f}_w"] = rng.normal(0.0, math.sqrt(2.0 / width), (width, width))
        weights[f"fc{f}_b"] = np.zeros(width)
        weights[f"fcbn{f}_gamma"] = np.ones(width)
        weights[f"fcbn{f}_beta"] = np.zeros(width)
        weights[f"fcprelu{f}_slope"] = np.full(width, spec.conv_slope)
        buffers[f"fcbn{f}_mean"] = np.zeros(width)
        buffers[f"fcbn{f}_var"] = np.ones(width)

    weights["out_w"] = rng.normal(0.0, math.sqrt(1.0 / width), (spec.window, width))
    weights["out_b"] = np.zeros(spec.window)
    return NetworkParams(spec=spec, weights=weights, buffers=buffers)


def param_count(params: NetworkParams) -> int:
    """Number of trainable scalars; buffers are not counted."""
    return int(sum(v.size for v in params.weights.values()))


def build_input(y: np.ndarray, coarse: CoarseResult, window: int) -> TrainSample:
    """Window the measured energies around the coarse centre and pad to U.

    Energies are divided by the window maximum. Slots past the window carry
    zero input, zero angle and mask 0.

    Raises:
        DomainError: If the coarse window is longer than U.
    """
    size = len(coarse.subspace)
    if size > window:
        raise DomainError(f"Coarse window of {size} slots exceeds network input length {window}")
    indices = np.asarray(coarse.subspace)
    energies = np.abs(y[indices - 1]) ** 2
    peak = energies.max()
    values = np.zeros(window)
    values[:size] = energies / peak if peak > 0 else energies
    mask = np.zeros(window)
    mask[:size] = 1.0
    angles = np.zeros(window)
    angles[:size] = grid_angle(indices, y.shape[0])
    return TrainSample(input=values, mask=mask, angles=angles)


def stack_samples(samples: list[TrainSample]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batch arrays (x of shape B×1×U, mask B×U, targets B) from samples."""
    x = np.stack([s.input for s in samples])[:, None, :]
    mask = np.stack([s.mask for s in samples])
    targets = np.array([-1 if s.target_index is None else s.target_index for s in samples])
    return x, mask, targets


# Layer primitives. Each forward returns (output, saved); each backward
# consumes the saved tuple.


def _conv_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int, pad_left: int, pad_right: int):
    k = w.shape[2]
    padded = np.pad(x, ((0, 0), (0, 0), (pad_left, pad_right)))
    l_out = (padded.shape[2] - k) // stride + 1
    idx = stride * np.arange(l_out)[None, :] + np.arange(k)[:, None]
    cols = padded[:, :, idx]
    out = np.einsum("bckl,ock->bol", cols, w) + b[None, :, None]
    return out, (cols, idx, padded.shape, pad_left, x.shape[2])


def _conv_backward(dout: np.ndarray, w: np.ndarray, saved: tuple):
    cols, idx, padded_shape, pad_left, length = saved
    dw = np.einsum("bol,bckl->ock", dout, cols)
    db = dout.sum(axis=(0, 2))
    dcols = np.einsum("bol,ock->bckl", dout, w)
    dpadded = np.zeros(padded_shape)
    np.add.at(dpadded, (slice(None), slice(None), idx), dcols)
    return dpadded[:, :, pad_left : pad_left + length], dw, db


def _channel_shape(ndim: int) -> tuple[int, ...]:
    return (1, -1) + (1,) * (ndim - 2)


def _bn_forward(x, gamma, beta, running_mean, running_var, train: bool, eps: float):
    axes = (0,) + tuple(range(2, x.ndim))
    shape = _channel_shape(x.ndim)
    if train:
        mean, var = x.mean(axis=axes), x.var(axis=axes)
    else:
        mean, var = running_mean, running_var
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean.reshape(shape)) * inv_std.reshape(shape)
    return gamma.reshape(shape) * xhat + beta.reshape(shape), (xhat, inv_std, mean, var)


def _bn_backward(dout, gamma, saved: tuple, train: bool):
    xhat, inv_std, _, _ = saved
    axes = (0,) + tuple(range(2, dout.ndim))
    shape = _channel_shape(dout.ndim)
    dgamma = (dout * xhat).sum(axis=axes)
    dbeta = dout.sum(axis=axes)
    dxhat = dout * gamma.reshape(shape)
    if not train:
        return dxhat * inv_std.reshape(shape), dgamma, dbeta
    m = dout.size // dout.shape[1]
    dx = (
        inv_std.reshape(shape)
        / m
        * (m * dxhat - dxhat.sum(axis=axes, keepdims=True) - xhat * (dxhat * xhat).sum(axis=axes, keepdims=True))
    )
    return dx, dgamma, dbeta


def _prelu_forward(x, slope):
    shape = _channel_shape(x.ndim) if np.ndim(slope) else ()
    a = np.reshape(slope, shape)
    return np.where(x > 0, x, a * x), (x, a)


def _prelu_backward(dout, saved: tuple):
    x, a = saved
    dx = dout * np.where(x > 0, 1.0, a)
    dslope = (dout * np.where(x > 0, 0.0, x)).sum(axis=0) if a.ndim else None
    return dx, dslope


def _attention_forward(feat, w, b):
    channels = feat.shape[1]
    arg = feat.argmax(axis=1)
    peak = np.take_along_axis(feat, arg[:, None, :], axis=1)[:, 0]
    pooled = np.stack([feat.mean(axis=1), peak], axis=1)
    half = w.shape[2] // 2
    z, conv_saved = _conv_forward(pooled, w, b, 1, half, half)
    gate = special.expit(z)
    return feat * gate, (arg, gate, feat, conv_saved, channels)


def _attention_backward(dout, w, saved: tuple):
    arg, gate, feat, conv_saved, channels = saved
    dgate = (dout * feat).sum(axis=1, keepdims=True)
    dz = dgate * gate * (1.0 - gate)
    dpooled, dw, db = _conv_backward(dz, w, conv_saved)
    dfeat = dout * gate + dpooled[:, 0:1, :] / channels
    dpeak = np.zeros_like(feat)
    np.put_along_axis(dpeak, arg[:, None, :], dpooled[:, 1:2, :], axis=1)
    return dfeat + dpeak, dw, db


def forward(
    params: NetworkParams,
    x: np.ndarray,
    mask: np.ndarray,
    train: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> tuple[np.ndarray, ForwardCache]:
    """Forward pass over a batch.

    Args:
        params (NetworkParams): Network parameters.
        x (np.ndarray): Inputs of shape B × 1 × U.
        mask (np.ndarray): Valid-slot mask of shape B × U.
        train (bool): Use batch statistics and dropout.
        rng (Optional[np.random.Generator]): Dropout stream, required in train mode
            when dropout is enabled.

    Returns:
        tuple[np.ndarray, ForwardCache]: Probabilities of shape B × U and the cache.
    """
    spec = params.spec
    wts, buf = params.weights, params.buffers
    if x.ndim != 3 or x.shape[1] != 1 or x.shape[2] != spec.window or mask.shape != (x.shape[0], spec.window):
        raise DomainError(f"Expected input B×1×{spec.window} and mask B×{spec.window}, got {x.shape} and {mask.shape}")
    if train and spec.dropout > 0 and rng is None:
        raise DomainError("Train mode with dropout needs a random stream")

    cache = ForwardCache(train=train, probs=np.empty(0), mask=mask)
    act = x * mask[:, None, :]
    for b in BLOCKS:
        branches = []
        for k in spec.kernels:
            out, saved = _conv_forward(act, wts[f"conv{b}_k{k}_w"], wts[f"conv{b}_k{k}_b"], 2, k // 2, (k - 1) // 2)
            cache.stages[f"conv{b}_k{k}"] = saved
            branches.append(out)
        act = np.concatenate(branches, axis=1)
        act, saved = _bn_forward(
            act, wts[f"bn{b}_gamma"], wts[f"bn{b}_beta"], buf[f"bn{b}_mean"], buf[f"bn{b}_var"], train, spec.bn_eps
        )
        cache.stages[f"bn{b}"] = saved
        if train:
            cache.batch_stats[f"bn{b}"] = (saved[2], saved[3], act.size // act.shape[1])
        act, saved = _prelu_forward(act, buf[f"prelu{b}_slope"])
        cache.stages[f"prelu{b}"] = saved

    act, saved = _attention_forward(act, wts["att_w"], wts["att_b"])
    cache.stages["attention"] = saved
    cache.stages["gap"] = (act.shape[2],)
    act = act.mean(axis=2)

    for f in FC_LAYERS:
        cache.stages[f"fc{f}"] = (act,)
        act = act @ wts[f"fc{f}_w"].T + wts[f"fc{f}_b"]
        act, saved = _bn_forward(
            act, wts[f"fcbn{f}_gamma"], wts[f"fcbn{f}_beta"], buf[f"fcbn{f}_mean"], buf[f"fcbn{f}_var"], train, spec.bn_eps
        )
        cache.stages[f"fcbn{f}"] = saved
        if train:
            cache.batch_stats[f"fcbn{f}"] = (saved[2], saved[3], act.shape[0])
        act, saved = _prelu_forward(act, wts[f"fcprelu{f}_slope"])
        cache.stages[f"prelu_fc{f}"] = saved
        if train and spec.dropout > 0:
            assert rng is not None
            keep = (rng.random(act.shape) >= spec.dropout) / (1.0 - spec.dropout)
            act = act * keep
            cache.stages[f"dropout{f}"] = (keep,)

    cache.stages["out"] = (act,)
    logits = act @ wts["out_w"].T + wts["out_b"]
    logits = np.where(mask > 0, logits, -np.inf)
    probs = special.softmax(logits, axis=1)
    cache.probs = probs
    return probs, cache


def predict(params: NetworkParams, sample: TrainSample) -> np.ndarray:
    """Eval-mode probabilities for a single sample."""
    x, mask, _ = stack_samples([sample])
    probs, _ = forward(params, x, mask, train=False)
    return probs[0]


def refine_angle(probs: np.ndarray, sample: TrainSample) -> float:
    """Refined spatial angle p̂ᵀϑ."""
    return float(probs @ sample.angles)


def argmax_angle(probs: np.ndarray, sample: TrainSample) -> float:
    """Grid angle of the most probable slot. Diagnostic only."""
    return float(sample.angles[int(np.argmax(probs))])


def loss(probs: np.ndarray, targets: Union[np.ndarray, int]) -> float:
    """Mean cross-entropy −log₁₀ p̂_target over the batch.

    Raises:
        DomainError: If a target slot has zero probability (a masked slot).
    """
    probs = np.atleast_2d(probs)
    targets = np.atleast_1d(targets)
    picked = probs[np.arange(probs.shape[0]), targets]
    if np.any(picked <= 0):
        raise DomainError("Target slot has zero probability; it is masked or out of the window")
    return float(-np.mean(np.log10(picked)))


def gradients(params: NetworkParams, cache: ForwardCache, targets: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of the batch loss with respect to every trainable tensor.

    Args:
        params (NetworkParams): Parameters used for the cached forward pass.
        cache (ForwardCache): Cache of a forward pass over the batch.
        targets (np.ndarray): Target slot per batch row.

    Returns:
        dict[str, np.ndarray]: One gradient per trainable tensor, same shapes.
    """
    spec = params.spec
    wts = params.weights
    stages = cache.stages
    batch = cache.probs.shape[0]
    grads: dict[str, np.ndarray] = {}

    onehot = np.zeros_like(cache.probs)
    onehot[np.arange(batch), targets] = 1.0
    dlogits = np.where(cache.mask > 0, (cache.probs - onehot) / (LN10 * batch), 0.0)
    (act,) = stages["out"]
    grads["out_w"] = dlogits.T @ act
    grads["out_b"] = dlogits.sum(axis=0)
    dact = dlogits @ wts["out_w"]

    for f in reversed(FC_LAYERS):
        if f"dropout{f}" in stages:
            dact = dact * stages[f"dropout{f}"][0]
        dact, grads[f"fcprelu{f}_slope"] = _prelu_backward(dact, stages[f"prelu_fc{f}"])
        dact, grads[f"fcbn{f}_gamma"], grads[f"fcbn{f}_beta"] = _bn_backward(
            dact, wts[f"fcbn{f}_gamma"], stages[f"fcbn{f}"], cache.train
        )
        (inp,) = stages[f"fc{f}"]
        grads[f"fc{f}_w"] = dact.T @ inp
        grads[f"fc{f}_b"] = dact.sum(axis=0)
        dact = dact @ wts[f"fc{f}_w"]

    (length,) = stages["gap"]
    dact = np.repeat(dact[:, :, None], length, axis=2) / length
    dact, grads["att_w"], grads["att_b"] = _attention_backward(dact, wts["att_w"], stages["attention"])

    for b in reversed(BLOCKS):
        dact, _ = _prelu_backward(dact, stages[f"prelu{b}"])
        dact, grads[f"bn{b}_gamma"], grads[f"bn{b}_beta"] = _bn_backward(
            dact, wts[f"bn{b}_gamma"], stages[f"bn{b}"], cache.train
        )
        split = spec.branch_channels[b - 1]
        dinput = None
        for i, k in enumerate(spec.kernels):
            dpart = dact[:, i * split : (i + 1) * split]
            dx, grads[f"conv{b}_k{k}_w"], grads[f"conv{b}_k{k}_b"] = _conv_backward(
                dpart, wts[f"conv{b}_k{k}_w"], stages[f"conv{b}_k{k}"]
            )
            dinput = dx if dinput is None else dinput + dx
        dact = dinput
    return grads


def update_running_stats(params: NetworkParams, cache: ForwardCache) -> NetworkParams:
    """Fold the batch statistics of a train-mode pass into the running buffers."""
    momentum = params.spec.bn_momentum
    buffers = dict(params.buffers)
    for name, (mean, var, count) in cache.batch_stats.items():
        unbiased = var * count / (count - 1) if count > 1 else var
        buffers[f"{name}_mean"] = (1 - momentum) * buffers[f"{name}_mean"] + momentum * mean
        buffers[f"{name}_var"] = (1 - momentum) * buffers[f"{name}_var"] + momentum * unbiased
    return replace(params, buffers=buffers)


def network_flops(spec: NetworkSpec) -> dict[str, int]:
    """Operation count per layer group.

    A convolution costs (2·C_in·K − 1) per output element, a fully connected
    layer (2·fan_in − 1) per output. Channel pooling costs one operation per
    channel and position, global average pooling the same.
    """
    lengths = feature_lengths(spec.window)
    counts: dict[str, int] = {}
    c_in = 1
    for b, length, branch, block in zip(BLOCKS, lengths, spec.branch_channels, spec.block_channels):
        counts[f"conv{b}"] = sum((2 * c_in * k - 1) * branch for k in spec.kernels) * length
        c_in = block
    l3 = lengths[-1]
    counts["attention"] = (2 * 2 * spec.attention_kernel - 1) * l3 + spec.width * l3
    counts["gap"] = spec.width * l3
    for f in FC_LAYERS:
        counts[f"fc{f}"] = (2 * spec.width - 1) * spec.width
    counts["output"] = (2 * spec.width - 1) * spec.window
    return counts


def _spec_vector(spec: NetworkSpec) -> np.ndarray:
    return np.array(
        [
            spec.window,
            *spec.branch_channels,
            *spec.kernels,
            spec.attention_kernel,
            spec.dropout,
            spec.conv_slope,
            spec.bn_eps,
            spec.bn_momentum,
        ],
        dtype=float,
    )


def _spec_from_vector(values: np.ndarray) -> NetworkSpec:
    if values.shape != (11,):
        raise WeightFileError(f"Architecture record has {values.size} entries, expected 11")
    return NetworkSpec(
        window=int(values[0]),
        branch_channels=(int(values[1]), int(values[2]), int(values[3])),
        kernels=(int(values[4]), int(values[5])),
        attention_kernel=int(values[6]),
        dropout=float(values[7]),
        conv_slope=float(values[8]),
        bn_eps=float(values[9]),
        bn_momentum=float(values[10]),
    )


def save_weights(params: NetworkParams, path: Path) -> None:
    """Write parameters to a little-endian binary weight file.

    Layout: magic "NFA1", u32 tensor count, then per tensor a u16 name length,
    the UTF-8 name, u8 rank, u32 dimensions and float64 row-major data; a
    trailing u64 holds the CRC-32 of everything before it. Tensors are
    written in name order.
    """
    tensors = {"spec": _spec_vector(params.spec)}
    tensors.update({f"weight/{k}": v for k, v in params.weights.items()})
    tensors.update({f"buffer/{k}": v for k, v in params.buffers.items()})

    chunks = [MAGIC, struct.pack("<I", len(tensors))]
    for name in sorted(tensors):
        data = np.ascontiguousarray(tensors[name], dtype="<f8")
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<B", data.ndim))
        chunks.append(struct.pack(f"<{data.ndim}I", *data.shape))
        chunks.append(data.tobytes())
    body = b"".join(chunks)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_bytes(body + struct.pack("<Q", zlib.crc32(body)))


def load_weights(path: Path) -> NetworkParams:
    """Read a weight file written by save_weights.

    Raises:
        WeightFileError: If the file is missing, truncated or fails its checksum.
    """
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise WeightFileError(f"Could not read weight file {path}: {exc}") from exc
    if len(raw) < 16 or raw[:4] != MAGIC:
        raise WeightFileError(f"{path} is not a weight file")
    body, (crc,) = raw[:-8], struct.unpack("<Q", raw[-8:])
    if zlib.crc32(body) != crc:
        raise WeightFileError(f"Checksum mismatch in {path}")

    tensors: dict[str, np.ndarray] = {}
    try:
        (count,) = struct.unpack_from("<I", body, 4)
        pos = 8
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", body, pos)
            pos += 2
            name = body[pos : pos + name_len].decode("utf-8")
            pos += name_len
            (rank,) = struct.unpack_from("<B", body, pos)
            pos += 1
            shape = struct.unpack_from(f"<{rank}I", body, pos)
            pos += 4 * rank
            size = int(np.prod(shape, dtype=np.int64))
            tensors[name] = np.frombuffer(body, dtype="<f8", count=size, offset=pos).reshape(shape).astype(float)
            pos += 8 * size
    except (struct.error, ValueError, UnicodeDecodeError) as exc:
        raise WeightFileError(f"Truncated or malformed weight file {path}: {exc}") from exc
    if "spec" not in tensors:
        raise WeightFileError(f"{path} has no architecture record")

    return NetworkParams(
        spec=_spec_from_vector(tensors["spec"]),
        weights={k.split("/", 1)[1]: v for k, v in tensors.items() if k.startswith("weight/")},
        buffers={k.split("/", 1)[1]: v for k, v in tensors.items() if k.startswith("buffer/")},
    )
