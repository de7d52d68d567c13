"""Torch mirror of the numpy head, used only for full-scale runs that
fine-tune the pretrained contextual encoder end to end.

The module reproduces the exact same computation as `snprex.head` (same gate
equations, same pooling and masking rules) so that numpy checkpoints and
torch training are interchangeable; parity is covered by tests. Torch is an
optional dependency and is imported lazily.
"""

from __future__ import annotations

import numpy as np

from .head import HeadConfig, HeadParameters, pooled_len


def _require_torch():
    try:
        import torch
        from torch import nn
    except ImportError as exc:  # pragma: no cover
        raise ImportError("the contextual fine-tuning path requires torch") from exc
    return torch, nn


def build_torch_head(cfg: HeadConfig, d: int, use_bias: bool = False, dtype=None):
    torch, nn = _require_torch()
    dtype = dtype or torch.float64

    class GruDirection(nn.Module):
        def __init__(self):
            super().__init__()
            H, F = cfg.H, cfg.F
            for name, shape in (
                ("W_z", (H, H)), ("W_r", (H, H)), ("W_c", (H, H)),
                ("U_z", (H, F)), ("U_r", (H, F)), ("U_c", (H, F)),
            ):
                self.register_parameter(name, nn.Parameter(torch.zeros(shape, dtype=dtype)))
            if use_bias:
                for name in ("b_z", "b_r", "b_c"):
                    self.register_parameter(name, nn.Parameter(torch.zeros(cfg.H, dtype=dtype)))
            self.use_bias = use_bias

        def forward(self, seq):  # seq: T x F
            h = torch.zeros(cfg.H, dtype=seq.dtype, device=seq.device)
            for x in seq:
                az = self.W_z @ h + self.U_z @ x
                ar = self.W_r @ h + self.U_r @ x
                if self.use_bias:
                    az = az + self.b_z
                    ar = ar + self.b_r
                z = torch.sigmoid(az)
                r = torch.sigmoid(ar)
                ac = self.W_c @ (h * r) + self.U_c @ x
                if self.use_bias:
                    ac = ac + self.b_c
                c = torch.tanh(ac)
                h = z * c + (1.0 - z) * h
            return h

    class TorchHead(nn.Module):
        def __init__(self):
            super().__init__()
            self.conv_w = nn.Parameter(torch.zeros(cfg.k, d, cfg.F, dtype=dtype))
            self.conv_b = nn.Parameter(torch.zeros(cfg.F, dtype=dtype))
            self.gru_fwd = GruDirection()
            self.gru_bwd = GruDirection()
            self.fc1 = nn.Linear(2 * cfg.H, cfg.D1, dtype=dtype)
            self.fc2 = nn.Linear(cfg.D1, 2, dtype=dtype)
            self.dropout = nn.Dropout(cfg.dropout_p)

        def forward(self, E, true_length: int):
            """E: L x d embedding matrix; returns log-probabilities (2,)."""
            L = E.shape[0]
            mask = torch.zeros(L, 1, dtype=E.dtype, device=E.device)
            mask[:true_length] = 1.0
            X = E * mask
            off = cfg.k // 2
            pre = self.conv_b.expand(L, cfg.F).clone()
            for j in range(cfg.k):
                shift = j - off
                lo, hi = max(0, -shift), min(L, L - shift)
                if lo < hi:
                    pre = pre.clone()
                    pre[lo:hi] = pre[lo:hi] + X[lo + shift : hi + shift] @ self.conv_w[j]
            A = torch.relu(pre)
            Lp = pooled_len(L, cfg.pool_stride)
            pooled = []
            for t in range(Lp):
                lo = t * cfg.pool_stride
                hi = min(lo + cfg.pool_window, L)
                pooled.append(A[lo:hi].max(dim=0).values)
            P = torch.stack(pooled)
            plen = pooled_len(true_length, cfg.pool_stride)
            prefix = P[:plen]
            g = torch.cat([self.gru_fwd(prefix), self.gru_bwd(prefix.flip(0))])
            u = torch.relu(self.fc1(g))
            logits = self.fc2(self.dropout(u))
            return torch.log_softmax(logits, dim=0)

    return TorchHead()


def load_numpy_params(torch_head, params: HeadParameters):
    """Copy a numpy `HeadParameters` into the torch mirror."""
    torch, _ = _require_torch()
    with torch.no_grad():
        torch_head.conv_w.copy_(torch.from_numpy(np.ascontiguousarray(params.conv_w)))
        torch_head.conv_b.copy_(torch.from_numpy(np.ascontiguousarray(params.conv_b)))
        for direction, gru in (("gru_fwd", params.gru_fwd), ("gru_bwd", params.gru_bwd)):
            mod = getattr(torch_head, direction)
            for key in ("W_z", "W_r", "W_c", "U_z", "U_r", "U_c"):
                getattr(mod, key).copy_(torch.from_numpy(np.ascontiguousarray(getattr(gru, key))))
            if gru.use_bias:
                for key in ("b_z", "b_r", "b_c"):
                    getattr(mod, key).copy_(torch.from_numpy(np.ascontiguousarray(getattr(gru, key))))
        torch_head.fc1.weight.copy_(torch.from_numpy(np.ascontiguousarray(params.fc1_w)))
        torch_head.fc1.bias.copy_(torch.from_numpy(np.ascontiguousarray(params.fc1_b)))
        torch_head.fc2.weight.copy_(torch.from_numpy(np.ascontiguousarray(params.fc2_w)))
        torch_head.fc2.bias.copy_(torch.from_numpy(np.ascontiguousarray(params.fc2_b)))


def export_numpy_params(torch_head, use_bias: bool = False) -> HeadParameters:
    from .head import GruParams

    def np_of(t):
        return t.detach().cpu().double().numpy().copy()

    def gru(direction) -> GruParams:
        p = GruParams(
            W_z=np_of(direction.W_z), W_r=np_of(direction.W_r), W_c=np_of(direction.W_c),
            U_z=np_of(direction.U_z), U_r=np_of(direction.U_r), U_c=np_of(direction.U_c),
            use_bias=use_bias,
        )
        if use_bias:
            p.b_z, p.b_r, p.b_c = np_of(direction.b_z), np_of(direction.b_r), np_of(direction.b_c)
        return p

    return HeadParameters(
        conv_w=np_of(torch_head.conv_w), conv_b=np_of(torch_head.conv_b),
        gru_fwd=gru(torch_head.gru_fwd), gru_bwd=gru(torch_head.gru_bwd),
        fc1_w=np_of(torch_head.fc1.weight), fc1_b=np_of(torch_head.fc1.bias),
        fc2_w=np_of(torch_head.fc2.weight), fc2_b=np_of(torch_head.fc2.bias),
    )


def finetune_contextual(
    instances,
    encoder_spec,
    head_cfg: HeadConfig,
    train_cfg,
):
    """Fine-tune the pretrained contextual encoder together with the head.

    Requires torch + transformers and local model weights; intended for the
    full-scale single-GPU reproduction run, not for CI.
    """
    torch, _ = _require_torch()
    from .encoders import encoder_signature, load_contextual
    from .train import Checkpoint, EpochRecord

    model, _tokenizer = load_contextual(encoder_spec)
    model.train(encoder_spec.trainable)
    head = build_torch_head(head_cfg, encoder_spec.d, dtype=torch.float32)
    from .head import init_head_params

    load_numpy_params(head, init_head_params(head_cfg, encoder_spec.d, seed=train_cfg.seed))
    head = head.float()
    params = list(head.parameters())
    if encoder_spec.trainable:
        params += list(model.parameters())
    opt = torch.optim.Adam(
        params, lr=train_cfg.learning_rate, eps=train_cfg.adam_epsilon,
        betas=(train_cfg.adam_beta1, train_cfg.adam_beta2),
    )
    torch.manual_seed(train_cfg.seed)
    rng = np.random.default_rng(train_cfg.seed)
    n = len(instances)
    history = []
    for epoch in range(1, train_cfg.epochs + 1):
        order = rng.permutation(n) if train_cfg.shuffle else np.arange(n)
        losses = []
        correct = 0
        for start in range(0, n, train_cfg.batch_size):
            batch = order[start : start + train_cfg.batch_size]
            opt.zero_grad()
            loss = 0.0
            for idx in batch:
                inst = instances[idx]
                ids = torch.tensor([inst.token_ids], dtype=torch.long)
                mask = torch.zeros_like(ids)
                mask[0, : inst.true_length] = 1
                if encoder_spec.trainable:
                    hidden = model(input_ids=ids, attention_mask=mask).last_hidden_state[0]
                else:
                    with torch.no_grad():
                        hidden = model(input_ids=ids, attention_mask=mask).last_hidden_state[0]
                logp = head(hidden.float(), inst.true_length)
                loss = loss - logp[inst.class_id]
                correct += int(logp.argmax().item() == inst.class_id)
            loss = loss / len(batch)
            loss.backward()
            opt.step()
            losses.append(float(loss.item()))
        history.append(EpochRecord(epoch, float(np.mean(losses)), correct / n))
    return Checkpoint(
        head_params=export_numpy_params(head),
        head_cfg=head_cfg,
        train_cfg=train_cfg,
        encoder_sig=encoder_signature(encoder_spec),
        epoch=train_cfg.epochs,
        history=history,
    )
