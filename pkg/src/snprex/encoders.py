"""Per-token embedding producers behind one interface.

Three kinds:

* ``CONTEXTUAL_PRETRAINED`` -- a local pretrained biomedical transformer
  (loaded via ``transformers``; optional dependency, no network access).
* ``STATIC_LOOKUP`` -- a fixed random lookup table keyed by token id.
* ``HASHING`` -- deterministic unit-norm vectors keyed by token string;
  training-free, used for CPU-only desk-scale runs.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

from .preprocess import PAD_TOKEN, TokenizedInstance


class EncoderError(Exception):
    pass


class ModelUnavailable(EncoderError):
    pass


class DimensionMismatch(EncoderError):
    pass


class EncoderKind(str, Enum):
    CONTEXTUAL_PRETRAINED = "CONTEXTUAL_PRETRAINED"
    STATIC_LOOKUP = "STATIC_LOOKUP"
    HASHING = "HASHING"


@dataclass
class EncoderSpec:
    kind: EncoderKind
    d: int = 64
    model_id_or_path: str = ""
    vocab_size: int = 0
    seed: int = 0
    trainable: bool = False

    def __post_init__(self):
        if self.d <= 0:
            raise DimensionMismatch(f"embedding width must be positive, got {self.d}")


@dataclass
class EmbeddingMatrix:
    values: np.ndarray  # L x d, float64
    true_length: int

    @property
    def d(self) -> int:
        return self.values.shape[1]

    @property
    def max_len(self) -> int:
        return self.values.shape[0]


def _token_vector(token: str, seed: int, d: int) -> np.ndarray:
    digest = hashlib.blake2b(
        token.encode("utf-8"), key=seed.to_bytes(8, "little", signed=True), digest_size=8
    ).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "little"))
    v = rng.standard_normal(d)
    return v / np.linalg.norm(v)


@lru_cache(maxsize=1)
def _static_table(vocab_size: int, d: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    table = rng.standard_normal((vocab_size, d)) / np.sqrt(d)
    table[0] = 0.0  # PAD row
    return table


def embed(instance: TokenizedInstance, spec: EncoderSpec) -> EmbeddingMatrix:
    """Embed one tokenized instance into an L x d matrix, padding rows zero
    (contextual padding rows are masked downstream by the head instead)."""
    L = len(instance.token_ids)
    if spec.kind is EncoderKind.HASHING:
        values = np.zeros((L, spec.d))
        for i in range(instance.true_length):
            tok = instance.tokens[i]
            if tok == PAD_TOKEN:
                continue
            values[i] = _token_vector(tok, spec.seed, spec.d)
        return EmbeddingMatrix(values, instance.true_length)
    if spec.kind is EncoderKind.STATIC_LOOKUP:
        if spec.vocab_size <= 0:
            raise DimensionMismatch("STATIC_LOOKUP requires a positive vocab_size")
        ids = np.asarray(instance.token_ids)
        if ids.max(initial=0) >= spec.vocab_size:
            raise DimensionMismatch(
                f"token id {int(ids.max())} outside vocab of size {spec.vocab_size}"
            )
        table = _static_table(spec.vocab_size, spec.d, spec.seed)
        values = table[ids].copy()
        values[instance.true_length :] = 0.0
        return EmbeddingMatrix(values, instance.true_length)
    if spec.kind is EncoderKind.CONTEXTUAL_PRETRAINED:
        return _embed_contextual(instance, spec)
    raise ValueError(f"unknown encoder kind {spec.kind!r}")


def _embed_contextual(instance: TokenizedInstance, spec: EncoderSpec) -> EmbeddingMatrix:
    model, _ = load_contextual(spec)
    import torch

    ids = torch.tensor([instance.token_ids], dtype=torch.long)
    mask = torch.zeros_like(ids)
    mask[0, : instance.true_length] = 1
    with torch.no_grad():
        out = model(input_ids=ids, attention_mask=mask)
    hidden = out.last_hidden_state[0].double().numpy()
    if hidden.shape[1] != spec.d:
        raise DimensionMismatch(
            f"model hidden size {hidden.shape[1]} != spec.d {spec.d}"
        )
    return EmbeddingMatrix(hidden, instance.true_length)


@lru_cache(maxsize=1)
def _load_contextual_cached(model_id_or_path: str):
    try:
        from transformers import AutoModel, AutoTokenizer
    except ImportError as exc:
        raise ModelUnavailable(f"transformers not installed: {exc}") from exc
    try:
        tokenizer = AutoTokenizer.from_pretrained(model_id_or_path, local_files_only=True)
        model = AutoModel.from_pretrained(model_id_or_path, local_files_only=True)
    except Exception as exc:
        raise ModelUnavailable(
            f"cannot load pretrained encoder from {model_id_or_path!r}: {exc}"
        ) from exc
    model.eval()
    return model, tokenizer


def load_contextual(spec: EncoderSpec):
    if not spec.model_id_or_path:
        raise ModelUnavailable("no model path configured for the contextual encoder")
    return _load_contextual_cached(spec.model_id_or_path)


def contextual_tokenize(
    marked_text: str, spec: EncoderSpec, max_len: int, candidate_ref: str,
    class_id: int, document_ref: str, level
) -> TokenizedInstance:
    """Tokenize marked text with the pretrained model's own subword
    tokenizer, registering the marker tokens as additional special tokens."""
    from .preprocess import MARKER_TOKENS

    model, tokenizer = load_contextual(spec)
    if not set(MARKER_TOKENS) <= set(tokenizer.get_vocab()):
        tokenizer.add_special_tokens({"additional_special_tokens": list(MARKER_TOKENS)})
        model.resize_token_embeddings(len(tokenizer))
    enc = tokenizer(
        marked_text, truncation=True, max_length=max_len, padding="max_length"
    )
    ids = enc["input_ids"]
    true_length = int(sum(enc["attention_mask"]))
    return TokenizedInstance(
        candidate_ref=candidate_ref,
        level=level,
        tokens=tokenizer.convert_ids_to_tokens(ids)[:true_length],
        token_ids=ids,
        true_length=true_length,
        class_id=class_id,
        document_ref=document_ref,
    )


def encoder_signature(spec: EncoderSpec) -> str:
    """Stable content hash identifying encoder compatibility for checkpoints."""
    payload = {
        "kind": spec.kind.value,
        "d": spec.d,
        "model": spec.model_id_or_path,
        "vocab_size": spec.vocab_size if spec.kind is EncoderKind.STATIC_LOOKUP else 0,
        "seed": spec.seed if spec.kind is not EncoderKind.CONTEXTUAL_PRETRAINED else 0,
    }
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]
