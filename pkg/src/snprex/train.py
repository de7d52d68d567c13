"""Adam training loop, checkpoint container, and prediction.

Defaults follow the published regime: batch size 16, 30 epochs, learning
rate 1e-4, Adam epsilon 1e-7. Training is bit-deterministic in double
precision given the seed and instance order.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .encoders import EncoderSpec, embed, encoder_signature
from .head import (
    MODE_EVAL,
    MODE_TRAIN,
    GruParams,
    HeadConfig,
    HeadParameters,
    cross_entropy,
    head_backward,
    head_forward,
    init_head_params,
)
from .preprocess import Level, TokenizedInstance

CHECKPOINT_FORMAT = "snprex-ckpt/1"
TENSOR_MAGIC = b"SNPX"


class TrainError(Exception):
    pass


class EmptyDataset(TrainError):
    pass


class ConfigMismatch(TrainError):
    pass


class ShapeMismatch(TrainError):
    pass


class SignatureMismatch(TrainError):
    pass


@dataclass
class TrainConfig:
    batch_size: int = 16
    epochs: int = 30
    learning_rate: float = 1e-4
    adam_epsilon: float = 1e-7
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    max_len_sentence: int = 70
    max_len_abstract: int = 300
    seed: int = 0
    level: Level = Level.SENTENCE
    shuffle: bool = True

    def __post_init__(self):
        for name in ("batch_size", "epochs", "learning_rate", "adam_epsilon",
                     "adam_beta1", "adam_beta2", "max_len_sentence", "max_len_abstract"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def max_len(self) -> int:
        return self.max_len_sentence if self.level is Level.SENTENCE else self.max_len_abstract


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, params: dict[str, np.ndarray]) -> "AdamState":
        return cls(
            m={k: np.zeros_like(a) for k, a in params.items()},
            v={k: np.zeros_like(a) for k, a in params.items()},
        )


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float = 1e-4,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-7,
) -> tuple[dict[str, np.ndarray], AdamState]:
    """One bias-corrected Adam update, in place over the parameter arrays."""
    for name, g in grads.items():
        if name not in params or params[name].shape != g.shape:
            raise ShapeMismatch(f"gradient {name!r} does not match parameters")
    state.t += 1
    t = state.t
    for name, g in grads.items():
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1**t)
        v_hat = v / (1.0 - beta2**t)
        params[name] -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return params, state


@dataclass
class EpochRecord:
    epoch: int
    mean_loss: float
    train_accuracy: float


@dataclass
class Checkpoint:
    head_params: HeadParameters
    head_cfg: HeadConfig
    train_cfg: TrainConfig
    encoder_sig: str
    epoch: int
    history: list[EpochRecord] = field(default_factory=list)
    format_version: str = CHECKPOINT_FORMAT


@dataclass
class PredictionRecord:
    candidate_ref: str
    class_id: int
    probs: tuple[float, float]


def _check_instances(instances: list[TokenizedInstance], cfg: TrainConfig):
    if not instances:
        raise EmptyDataset("no training instances")
    for inst in instances:
        if inst.level is not cfg.level:
            raise ConfigMismatch(f"instance {inst.candidate_ref} has level {inst.level}, config wants {cfg.level}")
        if len(inst.token_ids) != cfg.max_len:
            raise ConfigMismatch(
                f"instance {inst.candidate_ref} padded to {len(inst.token_ids)}, config wants {cfg.max_len}"
            )


def train(
    train_set: list[TokenizedInstance],
    encoder_spec: EncoderSpec,
    head_cfg: HeadConfig,
    cfg: TrainConfig,
    init_seed: int | None = None,
) -> Checkpoint:
    """Fixed-epoch Adam training. Per-epoch shuffling, batched gradient
    averaging in fixed instance order, last partial batch included."""
    _check_instances(train_set, cfg)
    embeddings = [embed(inst, encoder_spec) for inst in train_set]
    labels = [inst.class_id for inst in train_set]
    params = init_head_params(head_cfg, encoder_spec.d, seed=cfg.seed if init_seed is None else init_seed)
    pdict = params.to_dict()
    state = AdamState.zeros_like(pdict)
    rng = np.random.default_rng(cfg.seed)
    n = len(train_set)
    history: list[EpochRecord] = []
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n) if cfg.shuffle else np.arange(n)
        losses = []
        for start in range(0, n, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            agg = {name: np.zeros_like(a) for name, a in pdict.items()}
            batch_loss = 0.0
            for j, idx in enumerate(batch):
                drop_seed = _dropout_seed(cfg.seed, epoch, start, int(idx))
                probs, cache = head_forward(
                    embeddings[idx], params, head_cfg, mode=MODE_TRAIN, rng_seed=drop_seed
                )
                batch_loss += cross_entropy(probs, labels[idx])
                grads, _ = head_backward(cache, labels[idx])
                for name in agg:
                    agg[name] += grads[name]
            scale = 1.0 / len(batch)
            for name in agg:
                agg[name] *= scale
            adam_step(pdict, agg, state, cfg.learning_rate, cfg.adam_beta1,
                      cfg.adam_beta2, cfg.adam_epsilon)
            losses.append(batch_loss * scale)
        correct = 0
        for emb, label in zip(embeddings, labels):
            probs, _ = head_forward(emb, params, head_cfg, mode=MODE_EVAL)
            pred = 1 if probs[1] > probs[0] else 0
            correct += int(pred == label)
        history.append(EpochRecord(epoch, float(np.mean(losses)), correct / n))
    return Checkpoint(
        head_params=params,
        head_cfg=head_cfg,
        train_cfg=cfg,
        encoder_sig=encoder_signature(encoder_spec),
        epoch=cfg.epochs,
        history=history,
    )


def _dropout_seed(seed: int, epoch: int, batch_start: int, idx: int) -> int:
    return (seed * 1_000_003 + epoch * 10_007 + batch_start * 101 + idx) % (2**31 - 1)


def predict(
    ckpt: Checkpoint,
    instances: list[TokenizedInstance],
    encoder_spec: EncoderSpec,
) -> list[PredictionRecord]:
    """EVAL-mode classification; ties break toward class 0 (negative/neutral)."""
    if encoder_signature(encoder_spec) != ckpt.encoder_sig:
        raise SignatureMismatch(
            "checkpoint was trained with a different encoder configuration"
        )
    out = []
    for inst in instances:
        emb = embed(inst, encoder_spec)
        probs, _ = head_forward(emb, ckpt.head_params, ckpt.head_cfg, mode=MODE_EVAL)
        class_id = 1 if probs[1] > probs[0] else 0
        out.append(PredictionRecord(inst.candidate_ref, class_id, (float(probs[0]), float(probs[1]))))
    return out


# ---------------------------------------------------------------------------
# Checkpoint container: directory with a manifest, one binary file per
# tensor (shape header + row-major little-endian float64), and history CSV.


def _write_tensor(path: Path, arr: np.ndarray):
    arr = np.ascontiguousarray(arr, dtype="<f8")
    with path.open("wb") as fh:
        fh.write(TENSOR_MAGIC)
        fh.write(struct.pack("<i", arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}q", *arr.shape))
        fh.write(arr.tobytes())


def _read_tensor(path: Path) -> np.ndarray:
    with path.open("rb") as fh:
        if fh.read(4) != TENSOR_MAGIC:
            raise TrainError(f"{path} is not a tensor file")
        (ndim,) = struct.unpack("<i", fh.read(4))
        shape = struct.unpack(f"<{ndim}q", fh.read(8 * ndim))
        data = np.frombuffer(fh.read(), dtype="<f8")
    return data.reshape(shape).copy()


def save_checkpoint(ckpt: Checkpoint, directory: str | Path):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    tensors = ckpt.head_params.to_dict()
    manifest = {
        "format_version": ckpt.format_version,
        "encoder_signature": ckpt.encoder_sig,
        "epoch": ckpt.epoch,
        "head_config": asdict(ckpt.head_cfg),
        "train_config": {**asdict(ckpt.train_cfg), "level": ckpt.train_cfg.level.value},
        "gru_use_bias": ckpt.head_params.gru_fwd.use_bias,
        "tensors": sorted(tensors),
        "history": [asdict(rec) for rec in ckpt.history],
    }
    (directory / "manifest").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    for name in sorted(tensors):
        _write_tensor(directory / f"{name}.bin", tensors[name])
    with (directory / "history.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "mean_loss", "train_accuracy"])
        for rec in ckpt.history:
            writer.writerow([rec.epoch, repr(rec.mean_loss), repr(rec.train_accuracy)])


def load_checkpoint(directory: str | Path) -> Checkpoint:
    directory = Path(directory)
    manifest_path = directory / "manifest"
    if not manifest_path.exists():
        raise TrainError(f"no checkpoint manifest under {directory}")
    manifest = json.loads(manifest_path.read_text("utf-8"))
    if manifest.get("format_version") != CHECKPOINT_FORMAT:
        raise TrainError(f"unsupported checkpoint format {manifest.get('format_version')!r}")
    tensors = {name: _read_tensor(directory / f"{name}.bin") for name in manifest["tensors"]}
    use_bias = bool(manifest.get("gru_use_bias", False))

    def gru(prefix: str) -> GruParams:
        p = GruParams(
            W_z=tensors[f"{prefix}.W_z"], W_r=tensors[f"{prefix}.W_r"], W_c=tensors[f"{prefix}.W_c"],
            U_z=tensors[f"{prefix}.U_z"], U_r=tensors[f"{prefix}.U_r"], U_c=tensors[f"{prefix}.U_c"],
            use_bias=use_bias,
        )
        if use_bias:
            p.b_z = tensors[f"{prefix}.b_z"]
            p.b_r = tensors[f"{prefix}.b_r"]
            p.b_c = tensors[f"{prefix}.b_c"]
        return p

    params = HeadParameters(
        conv_w=tensors["conv_w"], conv_b=tensors["conv_b"],
        gru_fwd=gru("gru_fwd"), gru_bwd=gru("gru_bwd"),
        fc1_w=tensors["fc1_w"], fc1_b=tensors["fc1_b"],
        fc2_w=tensors["fc2_w"], fc2_b=tensors["fc2_b"],
    )
    tc = dict(manifest["train_config"])
    tc["level"] = Level(tc["level"])
    return Checkpoint(
        head_params=params,
        head_cfg=HeadConfig(**manifest["head_config"]),
        train_cfg=TrainConfig(**tc),
        encoder_sig=manifest["encoder_signature"],
        epoch=manifest["epoch"],
        history=[EpochRecord(**rec) for rec in manifest["history"]],
    )
