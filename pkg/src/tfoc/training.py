"""Optimizer, weight constraint, training loop, and checkpoint files.

The loop is fully deterministic for a given seed: weight init, dropout
masks, and batch order all derive from it, so two runs produce identical
histories and byte-identical checkpoints.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .network import Network, build_network, loss_and_grads, predict_probs

CKPT_MAGIC = b"TFOC"
CKPT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    patience: int = 20
    lr: float = 1e-3
    rho: float = 0.9
    eps: float = 1e-7
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.patience < 1:
            raise ValueError(f"patience must be >= 1, got {self.patience}")


@dataclass
class RmspropState:
    """Per-parameter squared-gradient accumulators plus hyperparameters."""

    v: dict[str, np.ndarray]
    lr: float = 1e-3
    rho: float = 0.9
    eps: float = 1e-7
    t: int = 0


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_loss: float
    val_accuracy: float


@dataclass(frozen=True, eq=False)
class Checkpoint:
    """Serialized best parameters plus a self-describing JSON header."""

    header: dict
    params: dict[str, np.ndarray]


def maxnorm_project(w: np.ndarray, c: float = 3.0, unit_axis: int = -1) -> np.ndarray:
    """Scale each output unit's incoming weights down to L2 norm c if above.

    The unit axis indexes output units; the norm is over all other axes.
    Units at or below the limit are left untouched.
    """
    if c <= 0:
        raise ValueError(f"max-norm limit must be positive, got {c}")
    axis = unit_axis % w.ndim
    reduce_axes = tuple(i for i in range(w.ndim) if i != axis)
    # Accumulate in float64 so float32 kernels land within rounding of c.
    norms = np.sqrt(np.sum(np.square(w, dtype=np.float64), axis=reduce_axes, keepdims=True))
    scale = np.where(norms > c, c / np.where(norms > c, norms, 1.0), 1.0)
    return (w * scale).astype(w.dtype, copy=False)


def rmsprop_init(params: dict[str, np.ndarray], lr=1e-3, rho=0.9, eps=1e-7) -> RmspropState:
    return RmspropState(
        v={name: np.zeros_like(p) for name, p in params.items()}, lr=lr, rho=rho, eps=eps
    )


def rmsprop_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
                 state: RmspropState) -> None:
    """One update, in place: v <- rho*v + (1-rho)*g^2; p <- p - lr*g/(sqrt(v)+eps)."""
    state.t += 1
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape} for {name}")
        v = state.v[name]
        v *= state.rho
        v += (1.0 - state.rho) * np.square(g)
        p -= state.lr * g / (np.sqrt(v) + state.eps)


def _accuracy(net: Network, inputs, labels) -> float:
    probs = predict_probs(net, inputs)
    return float(np.mean(np.argmax(probs, axis=1) == labels))


def train_fold(train, validation, cfg: TrainConfig, batch_source,
               extra_header: dict | None = None,
               check_disjoint: bool = True) -> tuple[Checkpoint, list[EpochStats]]:
    """Train the fixed network, keeping the best-validation-accuracy weights.

    ``train`` and ``validation`` are InputSet-like objects (``inputs``,
    ``labels``, ``provenance``). ``batch_source(epoch)`` yields the
    epoch's batches. Stops early after ``cfg.patience`` epochs without a
    strict improvement; ties keep the earlier epoch.
    ``check_disjoint=False`` permits deliberate train==validation
    diagnostics such as overfit sanity runs.
    """
    if len(train.labels) == 0 or len(validation.labels) == 0:
        raise ValueError("train and validation sets must be non-empty")
    if check_disjoint and set(train.provenance) & set(validation.provenance):
        raise ValueError("train and validation sets overlap")

    rng = np.random.default_rng(cfg.seed)
    net = build_network(train.inputs.shape[1:], rng, dtype=np.float32)
    params = net.params()
    state = rmsprop_init(params, lr=cfg.lr, rho=cfg.rho, eps=cfg.eps)
    constrained = net.constrained_weights()

    history: list[EpochStats] = []
    best_params: dict[str, np.ndarray] | None = None
    best_acc = -1.0
    best_epoch = -1
    stale = 0
    for epoch in range(1, cfg.epochs + 1):
        losses = []
        for batch in batch_source(epoch):
            loss, grads = loss_and_grads(net, batch.inputs, batch.labels, "train", rng)
            rmsprop_step(params, grads, state)
            for _, w, c in constrained:
                w[...] = maxnorm_project(w, c)
            losses.append(loss)
        val_acc = _accuracy(net, validation.inputs, validation.labels)
        history.append(EpochStats(epoch, float(np.mean(losses)), val_acc))
        if val_acc > best_acc:
            best_acc = val_acc
            best_epoch = epoch
            best_params = {name: p.copy() for name, p in params.items()}
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break

    header = {
        "format_version": CKPT_VERSION,
        "input_dims": list(net.input_dims),
        "layers": net.describe(),
        "train_config": {
            "epochs": cfg.epochs,
            "patience": cfg.patience,
            "lr": cfg.lr,
            "rho": cfg.rho,
            "eps": cfg.eps,
            "seed": cfg.seed,
        },
        "best_epoch": best_epoch,
        "validation_accuracy": best_acc,
    }
    if extra_header:
        header.update(extra_header)
    return Checkpoint(header=header, params=best_params), history


def network_from_checkpoint(ckpt: Checkpoint) -> Network:
    net = build_network(ckpt.header["input_dims"], rng=None, dtype=np.float32)
    net.set_params(ckpt.params)
    return net


def predict(ckpt: Checkpoint, inputs) -> tuple[np.ndarray, np.ndarray]:
    """Inference on a checkpoint: argmax labels (ties -> lowest index) and probabilities."""
    inputs = np.asarray(inputs)
    expected = tuple(ckpt.header["input_dims"])
    if inputs.shape[1:] != expected:
        raise DataError(
            f"input dims {inputs.shape[1:]} do not match checkpoint {expected}"
        )
    net = network_from_checkpoint(ckpt)
    probs = predict_probs(net, inputs)
    return np.argmax(probs, axis=1), probs


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    header_bytes = json.dumps(ckpt.header, sort_keys=True, separators=(",", ":")).encode()
    parts = [CKPT_MAGIC, struct.pack("<II", CKPT_VERSION, len(header_bytes)), header_bytes]
    for name, arr in ckpt.params.items():
        data = np.ascontiguousarray(arr, dtype="<f4")
        encoded = name.encode()
        parts.append(struct.pack("<H", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack("<B", data.ndim))
        parts.append(struct.pack(f"<{data.ndim}I", *data.shape))
        parts.append(data.tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 12 or blob[:4] != CKPT_MAGIC:
        raise DataError(f"not a checkpoint file: {path}")
    version, header_len = struct.unpack_from("<II", blob, 4)
    if version != CKPT_VERSION:
        raise DataError(f"unsupported checkpoint version {version} in {path}")
    offset = 12
    if len(blob) < offset + header_len:
        raise DataError(f"truncated checkpoint header in {path}")
    header = json.loads(blob[offset : offset + header_len].decode())
    offset += header_len
    params: dict[str, np.ndarray] = {}
    while offset < len(blob):
        try:
            (name_len,) = struct.unpack_from("<H", blob, offset)
            offset += 2
            name = blob[offset : offset + name_len].decode()
            offset += name_len
            (ndim,) = struct.unpack_from("<B", blob, offset)
            offset += 1
            dims = struct.unpack_from(f"<{ndim}I", blob, offset)
            offset += 4 * ndim
            count = int(np.prod(dims)) if ndim else 1
            arr = np.frombuffer(blob, dtype="<f4", count=count, offset=offset)
            offset += 4 * count
        except (struct.error, ValueError) as exc:
            raise DataError(f"truncated checkpoint payload in {path}: {exc}") from exc
        params[name] = arr.reshape(dims).copy()
    return Checkpoint(header=header, params=params)
