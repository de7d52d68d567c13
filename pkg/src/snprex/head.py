"""Classification head: convolution -> temporal max-pooling -> bidirectional
GRU -> dense ReLU -> dropout -> dense softmax.

Everything is plain numpy in double precision, with an exact analytic
backward pass and a finite-difference gradient checker. The GRU follows the
literal gate equations: z and r are sigmoid gates, the candidate applies the
reset gate to the previous state *before* the recurrent weight product, and
the new state is z*c + (1-z)*h_prev. Gates carry no bias unless `use_bias`
is set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .encoders import DimensionMismatch, EmbeddingMatrix


class HeadError(Exception):
    pass


class ZeroLength(HeadError):
    pass


class StaleCache(HeadError):
    pass


MODE_TRAIN = "TRAIN"
MODE_EVAL = "EVAL"


@dataclass
class HeadConfig:
    k: int = 3               # conv kernel width, odd
    F: int = 128             # conv filters
    H: int = 128             # GRU hidden size per direction
    D1: int = 128            # dense width before the output layer
    pool_window: int = 2
    pool_stride: int = 2
    dropout_p: float = 0.5

    def __post_init__(self):
        if self.k % 2 == 0:
            raise ValueError("conv kernel width must be odd")
        if self.pool_window < 1 or self.pool_stride < 1:
            raise ValueError("pool window and stride must be >= 1")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ValueError("dropout_p must lie in [0, 1)")


@dataclass
class GruParams:
    W_z: np.ndarray  # H x H
    W_r: np.ndarray
    W_c: np.ndarray
    U_z: np.ndarray  # H x d_in
    U_r: np.ndarray
    U_c: np.ndarray
    use_bias: bool = False
    b_z: np.ndarray | None = None
    b_r: np.ndarray | None = None
    b_c: np.ndarray | None = None


@dataclass
class GruStep:
    x_t: np.ndarray
    h_prev: np.ndarray
    z: np.ndarray
    r: np.ndarray
    c: np.ndarray
    h_t: np.ndarray


@dataclass
class HeadParameters:
    conv_w: np.ndarray  # k x d x F
    conv_b: np.ndarray  # F
    gru_fwd: GruParams
    gru_bwd: GruParams
    fc1_w: np.ndarray   # D1 x 2H
    fc1_b: np.ndarray   # D1
    fc2_w: np.ndarray   # 2 x D1
    fc2_b: np.ndarray   # 2

    def to_dict(self) -> dict[str, np.ndarray]:
        out = {"conv_w": self.conv_w, "conv_b": self.conv_b}
        for name, gru in (("gru_fwd", self.gru_fwd), ("gru_bwd", self.gru_bwd)):
            for key in ("W_z", "W_r", "W_c", "U_z", "U_r", "U_c"):
                out[f"{name}.{key}"] = getattr(gru, key)
            if gru.use_bias:
                for key in ("b_z", "b_r", "b_c"):
                    out[f"{name}.{key}"] = getattr(gru, key)
        out.update(fc1_w=self.fc1_w, fc1_b=self.fc1_b, fc2_w=self.fc2_w, fc2_b=self.fc2_b)
        return out


def init_gru_params(H: int, d_in: int, rng: np.random.Generator, use_bias: bool = False,
                    scale: float | None = None) -> GruParams:
    s_h = scale if scale is not None else 1.0 / math.sqrt(H)
    s_x = scale if scale is not None else 1.0 / math.sqrt(d_in)
    p = GruParams(
        W_z=rng.standard_normal((H, H)) * s_h,
        W_r=rng.standard_normal((H, H)) * s_h,
        W_c=rng.standard_normal((H, H)) * s_h,
        U_z=rng.standard_normal((H, d_in)) * s_x,
        U_r=rng.standard_normal((H, d_in)) * s_x,
        U_c=rng.standard_normal((H, d_in)) * s_x,
        use_bias=use_bias,
    )
    if use_bias:
        p.b_z = np.zeros(H)
        p.b_r = np.zeros(H)
        p.b_c = np.zeros(H)
    return p


def init_head_params(cfg: HeadConfig, d: int, seed: int = 0, use_bias: bool = False) -> HeadParameters:
    rng = np.random.default_rng(seed)
    return HeadParameters(
        conv_w=rng.standard_normal((cfg.k, d, cfg.F)) / math.sqrt(cfg.k * d),
        conv_b=np.zeros(cfg.F),
        gru_fwd=init_gru_params(cfg.H, cfg.F, rng, use_bias),
        gru_bwd=init_gru_params(cfg.H, cfg.F, rng, use_bias),
        fc1_w=rng.standard_normal((cfg.D1, 2 * cfg.H)) / math.sqrt(2 * cfg.H),
        fc1_b=np.zeros(cfg.D1),
        fc2_w=rng.standard_normal((2, cfg.D1)) / math.sqrt(cfg.D1),
        fc2_b=np.zeros(2),
    )


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max()
    e = np.exp(shifted)
    return e / e.sum()


# ---------------------------------------------------------------------------
# Component forwards


def conv1d_forward(E: np.ndarray, conv_w: np.ndarray, conv_b: np.ndarray) -> np.ndarray:
    """Same-padded 1D convolution over the token axis with ReLU.

    out[t, f] = relu( sum_{j, ch} K[j, ch, f] * E[t + j - k//2, ch] + b[f] ),
    out-of-range rows read as zero.
    """
    L, d = E.shape
    k, d_k, F = conv_w.shape
    if d_k != d:
        raise DimensionMismatch(f"kernel expects {d_k} channels, input has {d}")
    off = k // 2
    pre = np.tile(conv_b, (L, 1))
    for j in range(k):
        shift = j - off
        lo, hi = max(0, -shift), min(L, L - shift)
        if lo < hi:
            pre[lo:hi] += E[lo + shift : hi + shift] @ conv_w[j]
    return np.maximum(pre, 0.0)


def pooled_len(length: int, stride: int) -> int:
    return -(-length // stride)


def maxpool(M: np.ndarray, window: int, stride: int) -> np.ndarray:
    out, _ = maxpool_with_argmax(M, window, stride)
    return out


def maxpool_with_argmax(M: np.ndarray, window: int, stride: int) -> tuple[np.ndarray, np.ndarray]:
    """Temporal max-pooling, ragged final window allowed; argmax rows kept
    for the backward pass."""
    L, F = M.shape
    Lp = pooled_len(L, stride)
    out = np.empty((Lp, F))
    arg = np.empty((Lp, F), dtype=np.int64)
    for t in range(Lp):
        lo = t * stride
        hi = min(lo + window, L)
        block = M[lo:hi]
        idx = block.argmax(axis=0)
        arg[t] = lo + idx
        out[t] = block[idx, np.arange(F)]
    return out, arg


def gru_cell(h_prev: np.ndarray, x_t: np.ndarray, p: GruParams) -> GruStep:
    """One gated recurrence step; see module docstring for the gate forms."""
    if p.W_z.shape[0] != h_prev.shape[0] or p.U_z.shape[1] != x_t.shape[0]:
        raise DimensionMismatch(
            f"gru expects H={p.W_z.shape[0]}, d_in={p.U_z.shape[1]}; "
            f"got h_prev {h_prev.shape}, x_t {x_t.shape}"
        )
    az = p.W_z @ h_prev + p.U_z @ x_t
    ar = p.W_r @ h_prev + p.U_r @ x_t
    if p.use_bias:
        az = az + p.b_z
        ar = ar + p.b_r
    z = sigmoid(az)
    r = sigmoid(ar)
    ac = p.W_c @ (h_prev * r) + p.U_c @ x_t
    if p.use_bias:
        ac = ac + p.b_c
    c = np.tanh(ac)
    h_t = z * c + (1.0 - z) * h_prev
    return GruStep(x_t=x_t, h_prev=h_prev, z=z, r=r, c=c, h_t=h_t)


def _gru_run(seq: np.ndarray, p: GruParams) -> list[GruStep]:
    H = p.W_z.shape[0]
    h = np.zeros(H)
    steps = []
    for x in seq:
        step = gru_cell(h, x, p)
        steps.append(step)
        h = step.h_t
    return steps


def bigru_forward(
    seq: np.ndarray, length: int, p_fwd: GruParams, p_bwd: GruParams
) -> np.ndarray:
    """Concatenate the forward direction's final state with the backward
    direction's state at original position 0. Rows past `length` never enter
    either recurrence."""
    out, _ = _bigru_forward_cached(seq, length, p_fwd, p_bwd)
    return out


def _bigru_forward_cached(seq, length, p_fwd, p_bwd):
    if length == 0:
        raise ZeroLength("bidirectional recurrence over an empty sequence")
    if length > seq.shape[0]:
        raise DimensionMismatch(f"length {length} exceeds sequence rows {seq.shape[0]}")
    prefix = seq[:length]
    fwd_steps = _gru_run(prefix, p_fwd)
    bwd_steps = _gru_run(prefix[::-1], p_bwd)
    out = np.concatenate([fwd_steps[-1].h_t, bwd_steps[-1].h_t])
    return out, (fwd_steps, bwd_steps)


# ---------------------------------------------------------------------------
# Full head


@dataclass
class HeadCache:
    params: HeadParameters
    cfg: HeadConfig
    mode: str
    true_length: int
    pooled_length: int
    E_masked: np.ndarray
    conv_out: np.ndarray
    pool_out: np.ndarray
    pool_arg: np.ndarray
    fwd_steps: list
    bwd_steps: list
    g: np.ndarray
    fc1_pre: np.ndarray
    u: np.ndarray
    dropout_mask: np.ndarray
    u_dropped: np.ndarray
    logits: np.ndarray
    probs: np.ndarray


def head_forward(
    E: EmbeddingMatrix,
    params: HeadParameters,
    cfg: HeadConfig,
    mode: str = MODE_EVAL,
    rng_seed: int = 0,
) -> tuple[np.ndarray, HeadCache]:
    """Run the full head; returns class probabilities and the activation
    cache needed by `head_backward`. EVAL mode is deterministic (dropout
    disabled); TRAIN mode draws an inverted-dropout mask from `rng_seed`."""
    if mode not in (MODE_TRAIN, MODE_EVAL):
        raise ValueError(f"mode must be TRAIN or EVAL, got {mode!r}")
    X = np.array(E.values, dtype=np.float64)
    if X.shape[1] != params.conv_w.shape[1]:
        raise DimensionMismatch(
            f"embedding width {X.shape[1]} != conv channels {params.conv_w.shape[1]}"
        )
    tl = E.true_length
    if tl == 0:
        raise ZeroLength("instance has no real tokens")
    X[tl:] = 0.0  # padding rows are unreachable by contract

    conv_out = conv1d_forward(X, params.conv_w, params.conv_b)
    pool_out, pool_arg = maxpool_with_argmax(conv_out, cfg.pool_window, cfg.pool_stride)
    plen = pooled_len(tl, cfg.pool_stride)
    g, (fwd_steps, bwd_steps) = _bigru_forward_cached(
        pool_out, plen, params.gru_fwd, params.gru_bwd
    )
    fc1_pre = params.fc1_w @ g + params.fc1_b
    u = np.maximum(fc1_pre, 0.0)
    if mode == MODE_TRAIN and cfg.dropout_p > 0.0:
        rng = np.random.default_rng(rng_seed)
        keep = 1.0 - cfg.dropout_p
        mask = (rng.random(u.shape) < keep) / keep
    else:
        mask = np.ones_like(u)
    u_dropped = u * mask
    logits = params.fc2_w @ u_dropped + params.fc2_b
    probs = softmax(logits)
    cache = HeadCache(
        params=params, cfg=cfg, mode=mode, true_length=tl, pooled_length=plen,
        E_masked=X, conv_out=conv_out, pool_out=pool_out, pool_arg=pool_arg,
        fwd_steps=fwd_steps, bwd_steps=bwd_steps, g=g, fc1_pre=fc1_pre, u=u,
        dropout_mask=mask, u_dropped=u_dropped, logits=logits, probs=probs,
    )
    return probs, cache


def cross_entropy(probs: np.ndarray, class_id: int) -> float:
    return -math.log(max(float(probs[class_id]), 1e-12))


def _gru_backward(steps: list[GruStep], dh_final: np.ndarray, p: GruParams,
                  grads: dict[str, np.ndarray], prefix: str) -> np.ndarray:
    """Backprop through one direction; returns d(seq) for the processed
    prefix in processing order."""
    n = len(steps)
    d_in = p.U_z.shape[1]
    dseq = np.zeros((n, d_in))
    dh = dh_final
    for t in range(n - 1, -1, -1):
        s = steps[t]
        dz = dh * (s.c - s.h_prev)
        dc = dh * s.z
        dh_prev = dh * (1.0 - s.z)
        dac = dc * (1.0 - s.c * s.c)
        hr = s.h_prev * s.r
        grads[f"{prefix}.W_c"] += np.outer(dac, hr)
        grads[f"{prefix}.U_c"] += np.outer(dac, s.x_t)
        dhr = p.W_c.T @ dac
        dh_prev += dhr * s.r
        dr = dhr * s.h_prev
        daz = dz * s.z * (1.0 - s.z)
        dar = dr * s.r * (1.0 - s.r)
        grads[f"{prefix}.W_z"] += np.outer(daz, s.h_prev)
        grads[f"{prefix}.U_z"] += np.outer(daz, s.x_t)
        grads[f"{prefix}.W_r"] += np.outer(dar, s.h_prev)
        grads[f"{prefix}.U_r"] += np.outer(dar, s.x_t)
        if p.use_bias:
            grads[f"{prefix}.b_z"] += daz
            grads[f"{prefix}.b_r"] += dar
            grads[f"{prefix}.b_c"] += dac
        dh_prev += p.W_z.T @ daz + p.W_r.T @ dar
        dseq[t] = p.U_z.T @ daz + p.U_r.T @ dar + p.U_c.T @ dac
        dh = dh_prev
    return dseq


def head_backward(
    cache: HeadCache, class_id: int, params: HeadParameters | None = None
) -> tuple[dict[str, np.ndarray], np.ndarray]:
    """Exact gradients of the cross-entropy loss w.r.t. every parameter
    tensor (keyed as in `HeadParameters.to_dict`) and the input embedding
    matrix. The dropout mask is replayed from the cache."""
    if params is not None and params is not cache.params:
        raise StaleCache("cache was produced under different parameters")
    p = cache.params
    grads = {name: np.zeros_like(arr) for name, arr in p.to_dict().items()}

    dlogits = cache.probs.copy()
    dlogits[class_id] -= 1.0
    grads["fc2_w"] += np.outer(dlogits, cache.u_dropped)
    grads["fc2_b"] += dlogits
    du_dropped = p.fc2_w.T @ dlogits
    du = du_dropped * cache.dropout_mask
    dfc1_pre = du * (cache.fc1_pre > 0.0)
    grads["fc1_w"] += np.outer(dfc1_pre, cache.g)
    grads["fc1_b"] += dfc1_pre
    dg = p.fc1_w.T @ dfc1_pre

    H = p.gru_fwd.W_z.shape[0]
    dpool = np.zeros_like(cache.pool_out)
    dfwd = _gru_backward(cache.fwd_steps, dg[:H], p.gru_fwd, grads, "gru_fwd")
    dbwd = _gru_backward(cache.bwd_steps, dg[H:], p.gru_bwd, grads, "gru_bwd")
    n = cache.pooled_length
    dpool[:n] += dfwd
    dpool[:n] += dbwd[::-1]

    dconv = np.zeros_like(cache.conv_out)
    Lp, F = cache.pool_out.shape
    cols = np.arange(F)
    for t in range(Lp):
        np.add.at(dconv, (cache.pool_arg[t], cols), dpool[t])

    dpre = dconv * (cache.conv_out > 0.0)
    k, d, F = p.conv_w.shape
    off = k // 2
    L = cache.E_masked.shape[0]
    dE = np.zeros_like(cache.E_masked)
    for j in range(k):
        shift = j - off
        lo, hi = max(0, -shift), min(L, L - shift)
        if lo < hi:
            grads["conv_w"][j] += cache.E_masked[lo + shift : hi + shift].T @ dpre[lo:hi]
            dE[lo + shift : hi + shift] += dpre[lo:hi] @ p.conv_w[j].T
    grads["conv_b"] += dpre.sum(axis=0)
    dE[cache.true_length :] = 0.0
    return grads, dE


def gradient_check(
    params: HeadParameters,
    E: EmbeddingMatrix,
    cfg: HeadConfig,
    class_id: int = 1,
    eps: float = 1e-5,
    seed: int = 0,
    max_coords: int = 200,
) -> float:
    """Central-difference check of `head_backward` in EVAL mode.

    Compares analytic gradients against (f(th+eps) - f(th-eps)) / (2 eps)
    over all parameter coordinates, or a seeded random subsample of at least
    `max_coords` per tensor when tensors are large. Relative error uses
    denominator max(|analytic|, |numeric|, 1e-12); differences below the
    central-difference roundoff floor (~1e-10 for an O(1) loss at this eps)
    count as exact, so near-zero gradient coordinates do not amplify
    finite-difference noise into spurious relative error.
    """
    _, cache = head_forward(E, params, cfg, mode=MODE_EVAL)
    grads, _ = head_backward(cache, class_id)
    rng = np.random.default_rng(seed)
    tensors = params.to_dict()
    worst = 0.0
    for name, arr in tensors.items():
        flat = arr.reshape(-1)
        n = flat.size
        if n > max_coords:
            coords = rng.choice(n, size=max_coords, replace=False)
        else:
            coords = np.arange(n)
        gflat = grads[name].reshape(-1)
        for idx in coords:
            orig = flat[idx]
            flat[idx] = orig + eps
            p_plus, _ = head_forward(E, params, cfg, mode=MODE_EVAL)
            flat[idx] = orig - eps
            p_minus, _ = head_forward(E, params, cfg, mode=MODE_EVAL)
            flat[idx] = orig
            numeric = (cross_entropy(p_plus, class_id) - cross_entropy(p_minus, class_id)) / (2 * eps)
            analytic = gflat[idx]
            denom = max(abs(analytic), abs(numeric), 1e-12)
            err = abs(analytic - numeric) / denom
            if abs(analytic - numeric) <= 1e-10:
                err = 0.0  # within finite-difference resolution (incl. 0/0)
            worst = max(worst, err)
    return worst
