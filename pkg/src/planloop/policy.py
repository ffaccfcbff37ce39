"""Decoder-only transformer policy in numpy: training, sampling, checkpoints.

Pre-norm GPT-style blocks with learned absolute positions, tanh-GELU, and a
hand-written backward pass (verified against central finite differences in
the test suite). Training runs in float32; gradient checks build the model
in float64 via the dtype argument.

Sequences are right-padded; pad keys are masked out of attention and pad
positions out of the loss. The loss covers only plan tokens, from the first
token after [startofplan] through [endofplan].
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .pddl import DomainDef, GroundedTask, ground
from .tokenizer import (DecodeError, DecodeFailure, TokenSeq, Vocabulary,
                        decode_plan, encode_problem)
from .util import rng_stream
from .world import Plan

NEG_INF = np.float32(-1e9)


class TrainingDiverged(Exception):
    """Loss became non-finite; training is aborted rather than continued."""


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    layers: int = 2
    heads: int = 2
    embed_dim: int = 64
    ff_dim: int = 256
    context_len: int = 512
    dropout: float = 0.1

    def __post_init__(self):
        if self.embed_dim % self.heads:
            raise ValueError("embed_dim must be divisible by heads")

    @property
    def head_dim(self) -> int:
        return self.embed_dim // self.heads

    def to_dict(self) -> dict:
        return {"vocab_size": self.vocab_size, "layers": self.layers,
                "heads": self.heads, "embed_dim": self.embed_dim,
                "ff_dim": self.ff_dim, "context_len": self.context_len,
                "dropout": self.dropout}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


def tensor_manifest(config: ModelConfig) -> list[tuple[str, tuple[int, ...]]]:
    """Fixed, ordered list of (name, shape) for all learnable tensors."""
    d, ff, v = config.embed_dim, config.ff_dim, config.vocab_size
    names: list[tuple[str, tuple[int, ...]]] = [
        ("tok_emb", (v, d)), ("pos_emb", (config.context_len, d))]
    for i in range(config.layers):
        names += [
            (f"h{i}.ln1.g", (d,)), (f"h{i}.ln1.b", (d,)),
            (f"h{i}.attn.w_qkv", (d, 3 * d)), (f"h{i}.attn.b_qkv", (3 * d,)),
            (f"h{i}.attn.w_proj", (d, d)), (f"h{i}.attn.b_proj", (d,)),
            (f"h{i}.ln2.g", (d,)), (f"h{i}.ln2.b", (d,)),
            (f"h{i}.mlp.w_fc", (d, ff)), (f"h{i}.mlp.b_fc", (ff,)),
            (f"h{i}.mlp.w_proj", (ff, d)), (f"h{i}.mlp.b_proj", (d,)),
        ]
    names += [("ln_f.g", (d,)), ("ln_f.b", (d,)),
              ("head.w", (d, v)), ("head.b", (v,))]
    return names


def init_params(config: ModelConfig, seed: int = 0,
                dtype=np.float32) -> dict[str, np.ndarray]:
    rng = rng_stream(seed, "init")
    params: dict[str, np.ndarray] = {}
    for name, shape in tensor_manifest(config):
        if name.endswith(".g"):
            params[name] = np.ones(shape, dtype=dtype)
        elif name.endswith((".b", ".b_qkv", ".b_proj", ".b_fc")) or \
                name == "head.b":
            params[name] = np.zeros(shape, dtype=dtype)
        else:
            params[name] = (0.02 * rng.standard_normal(shape)).astype(dtype)
    return params


@dataclass
class Checkpoint:
    """Model parameters plus optimizer moments and a step counter."""

    config: ModelConfig
    params: dict[str, np.ndarray]
    vocab_fingerprint: str = ""
    step: int = 0
    opt_m: dict[str, np.ndarray] | None = None
    opt_v: dict[str, np.ndarray] | None = None

    def copy(self) -> "Checkpoint":
        return Checkpoint(
            self.config, {k: v.copy() for k, v in self.params.items()},
            self.vocab_fingerprint, self.step,
            None if self.opt_m is None else
            {k: v.copy() for k, v in self.opt_m.items()},
            None if self.opt_v is None else
            {k: v.copy() for k, v in self.opt_v.items()})


def new_checkpoint(config: ModelConfig, vocab: Vocabulary,
                   seed: int = 0) -> Checkpoint:
    return Checkpoint(config, init_params(config, seed),
                      vocab.fingerprint(), 0)


# ── Forward pass ─────────────────────────────────────────────────────────────

def _layer_norm(x, g, b, eps=1e-5):
    mu = x.mean(-1, keepdims=True)
    var = x.var(-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    u = (x - mu) * inv
    return u * g + b, (u, inv, g)


_GELU_C = 0.7978845608028654        # sqrt(2/pi), kept a python float so
                                     # float32 arrays stay float32


def _gelu(x):
    t = np.tanh(_GELU_C * (x + 0.044715 * x ** 3))
    return 0.5 * x * (1.0 + t), (x, t, _GELU_C)


def _gelu_backward(dy, cache):
    x, t, c = cache
    dt = c * (1.0 + 3 * 0.044715 * x ** 2)
    return dy * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t ** 2) * dt)


def _split_heads(x, heads):
    b, t, d = x.shape
    return x.reshape(b, t, heads, d // heads).transpose(0, 2, 1, 3)


def _merge_heads(x):
    b, h, t, hd = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, t, h * hd)


def _attention_bias(lengths: np.ndarray, t: int, dtype) -> np.ndarray:
    """(B, 1, T, T) additive mask: causal plus padded-key exclusion."""
    causal = np.triu(np.ones((t, t), dtype=bool), k=1)
    bias = np.where(causal, dtype.type(NEG_INF), dtype.type(0.0))
    bias = np.broadcast_to(bias, (len(lengths), 1, t, t)).copy()
    key_pad = np.arange(t)[None, :] >= lengths[:, None]     # (B, T)
    bias[key_pad[:, None, None, :].repeat(t, axis=2)] = NEG_INF
    return bias


def _forward(params: dict, config: ModelConfig, ids: np.ndarray,
             lengths: np.ndarray, dropout_rng: np.random.Generator | None = None,
             want_cache: bool = False):
    """Full-sequence forward; returns (logits, cache-for-backward)."""
    dtype = params["tok_emb"].dtype
    b, t = ids.shape
    if t > config.context_len:
        raise ValueError(f"sequence length {t} exceeds context "
                         f"{config.context_len}")
    p_drop = config.dropout if dropout_rng is not None else 0.0

    def dropout(x):
        if p_drop <= 0.0:
            return x, None
        keep = (dropout_rng.random(x.shape) >= p_drop)
        scale = dtype.type(1.0 / (1.0 - p_drop))
        return x * keep * scale, (keep, scale)

    x = params["tok_emb"][ids] + params["pos_emb"][:t]
    x, emb_drop = dropout(x)
    bias = _attention_bias(lengths, t, np.dtype(dtype))
    scale = dtype.type(1.0 / np.sqrt(config.head_dim))

    layer_caches = []
    for i in range(config.layers):
        pre = f"h{i}"
        a, ln1_cache = _layer_norm(x, params[f"{pre}.ln1.g"],
                                   params[f"{pre}.ln1.b"])
        qkv = a @ params[f"{pre}.attn.w_qkv"] + params[f"{pre}.attn.b_qkv"]
        q, k, v = np.split(qkv, 3, axis=-1)
        q = _split_heads(q, config.heads)
        k = _split_heads(k, config.heads)
        v = _split_heads(v, config.heads)
        att = (q @ k.transpose(0, 1, 3, 2)) * scale + bias
        att -= att.max(-1, keepdims=True)
        e = np.exp(att)
        probs = e / e.sum(-1, keepdims=True)
        probs_d, att_drop = dropout(probs)
        o = _merge_heads(probs_d @ v)
        o = o @ params[f"{pre}.attn.w_proj"] + params[f"{pre}.attn.b_proj"]
        o, res1_drop = dropout(o)
        x1 = x + o
        m, ln2_cache = _layer_norm(x1, params[f"{pre}.ln2.g"],
                                   params[f"{pre}.ln2.b"])
        fpre = m @ params[f"{pre}.mlp.w_fc"] + params[f"{pre}.mlp.b_fc"]
        fact, gelu_cache = _gelu(fpre)
        f2 = fact @ params[f"{pre}.mlp.w_proj"] + params[f"{pre}.mlp.b_proj"]
        f2, res2_drop = dropout(f2)
        x2 = x1 + f2
        layer_caches.append((x, a, ln1_cache, q, k, v, probs, probs_d,
                             att_drop, res1_drop, x1, m, ln2_cache,
                             gelu_cache, fact, res2_drop))
        x = x2

    xf, lnf_cache = _layer_norm(x, params["ln_f.g"], params["ln_f.b"])
    logits = xf @ params["head.w"] + params["head.b"]
    cache = (ids, lengths, emb_drop, layer_caches, x, xf, lnf_cache, scale) \
        if want_cache else None
    return logits, cache


def forward(ckpt: Checkpoint, ids: np.ndarray,
            lengths: np.ndarray | None = None) -> np.ndarray:
    """Logits of shape (batch, length, vocab); causal, pad keys masked."""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.ndim == 1:
        ids = ids[None, :]
    if np.any(ids >= ckpt.config.vocab_size) or np.any(ids < 0):
        raise ValueError("token id out of range")
    if lengths is None:
        lengths = np.full(ids.shape[0], ids.shape[1], dtype=np.int64)
    logits, _ = _forward(ckpt.params, ckpt.config, ids,
                         np.asarray(lengths, dtype=np.int64))
    return logits


# ── Loss and gradients ───────────────────────────────────────────────────────

def loss_and_grads(params: dict, config: ModelConfig, ids: np.ndarray,
                   lengths: np.ndarray, target_mask: np.ndarray,
                   dropout_rng: np.random.Generator | None = None):
    """Mean next-token cross-entropy over masked positions, with gradients.

    target_mask[b, t] selects target ids[b, t] (predicted from position
    t - 1); position 0 can never be a target.
    """
    if not target_mask.any():
        raise ValueError("no effective loss positions")
    if target_mask[:, 0].any():
        raise ValueError("position 0 cannot be a target")
    dtype = params["tok_emb"].dtype
    logits, cache = _forward(params, config, ids, lengths, dropout_rng,
                             want_cache=True)
    b, t, v = logits.shape

    pred = logits[:, :-1]                     # predicts ids[:, 1:]
    tmask = target_mask[:, 1:]
    targets = ids[:, 1:]
    shifted = pred - pred.max(-1, keepdims=True)
    loge = shifted - np.log(np.exp(shifted).sum(-1, keepdims=True))
    rows, cols = np.nonzero(tmask)
    count = len(rows)
    loss = -loge[rows, cols, targets[rows, cols]].sum() / count
    if not np.isfinite(loss):
        raise TrainingDiverged(f"loss is {loss}")

    dlogits = np.zeros_like(logits)
    soft = np.exp(loge[rows, cols])           # (count, V)
    soft[np.arange(count), targets[rows, cols]] -= 1.0
    dlogits[rows, cols] = soft / dtype.type(count)

    grads = _backward(params, config, cache, dlogits)
    return float(loss), grads


def _backward(params, config, cache, dlogits):
    ids, lengths, emb_drop, layer_caches, x_last, xf, lnf_cache, scale = cache
    grads = {k: np.zeros_like(p) for k, p in params.items()}

    def drop_back(dy, saved):
        if saved is None:
            return dy
        keep, s = saved
        return dy * keep * s

    def ln_back(dy, cache_, gname, bname):
        u, inv, g = cache_
        grads[gname] += (dy * u).sum(axis=(0, 1))
        grads[bname] += dy.sum(axis=(0, 1))
        dyg = dy * g
        m1 = dyg.mean(-1, keepdims=True)
        m2 = (dyg * u).mean(-1, keepdims=True)
        return (dyg - m1 - u * m2) * inv

    grads["head.w"] += xf.reshape(-1, xf.shape[-1]).T @ \
        dlogits.reshape(-1, dlogits.shape[-1])
    grads["head.b"] += dlogits.sum(axis=(0, 1))
    dxf = dlogits @ params["head.w"].T
    dx = ln_back(dxf, lnf_cache, "ln_f.g", "ln_f.b")

    for i in reversed(range(config.layers)):
        pre = f"h{i}"
        (x_in, a, ln1_cache, q, k, v, probs, probs_d, att_drop, res1_drop,
         x1, m, ln2_cache, gelu_cache, fact, res2_drop) = layer_caches[i]

        # mlp branch
        df2 = drop_back(dx, res2_drop)
        grads[f"{pre}.mlp.w_proj"] += fact.reshape(-1, fact.shape[-1]).T @ \
            df2.reshape(-1, df2.shape[-1])
        grads[f"{pre}.mlp.b_proj"] += df2.sum(axis=(0, 1))
        dfact = df2 @ params[f"{pre}.mlp.w_proj"].T
        dfpre = _gelu_backward(dfact, gelu_cache)
        grads[f"{pre}.mlp.w_fc"] += m.reshape(-1, m.shape[-1]).T @ \
            dfpre.reshape(-1, dfpre.shape[-1])
        grads[f"{pre}.mlp.b_fc"] += dfpre.sum(axis=(0, 1))
        dm = dfpre @ params[f"{pre}.mlp.w_fc"].T
        dx1 = dx + ln_back(dm, ln2_cache, f"{pre}.ln2.g", f"{pre}.ln2.b")

        # attention branch
        do = drop_back(dx1, res1_drop)
        o_in = _merge_heads(probs_d @ v)
        grads[f"{pre}.attn.w_proj"] += o_in.reshape(-1, o_in.shape[-1]).T @ \
            do.reshape(-1, do.shape[-1])
        grads[f"{pre}.attn.b_proj"] += do.sum(axis=(0, 1))
        dmerged = do @ params[f"{pre}.attn.w_proj"].T
        dheads = _split_heads(dmerged, config.heads)
        dprobs_d = dheads @ v.transpose(0, 1, 3, 2)
        dv = probs_d.transpose(0, 1, 3, 2) @ dheads
        dprobs = drop_back(dprobs_d, att_drop)
        datt = probs * (dprobs - (dprobs * probs).sum(-1, keepdims=True))
        dq = (datt @ k) * scale
        dk = (datt.transpose(0, 1, 3, 2) @ q) * scale
        dqkv = np.concatenate([_merge_heads(dq), _merge_heads(dk),
                               _merge_heads(dv)], axis=-1)
        grads[f"{pre}.attn.w_qkv"] += a.reshape(-1, a.shape[-1]).T @ \
            dqkv.reshape(-1, dqkv.shape[-1])
        grads[f"{pre}.attn.b_qkv"] += dqkv.sum(axis=(0, 1))
        da = dqkv @ params[f"{pre}.attn.w_qkv"].T
        dx = dx1 + ln_back(da, ln1_cache, f"{pre}.ln1.g", f"{pre}.ln1.b")

    dx = drop_back(dx, emb_drop)
    t = ids.shape[1]
    grads["pos_emb"][:t] += dx.sum(axis=0)
    np.add.at(grads["tok_emb"], ids, dx)
    return grads


# ── Optimizer and training ───────────────────────────────────────────────────

@dataclass(frozen=True)
class TrainSchedule:
    lr: float = 1e-3
    epochs: int = 20
    batch_size: int = 16
    warmup_steps: int = 100
    grad_clip: float = 1.0
    weight_decay: float = 0.01
    seed: int = 0

    def scaled(self, lr_factor: float, epochs: int) -> "TrainSchedule":
        return replace(self, lr=self.lr * lr_factor, epochs=epochs)


@dataclass
class TrainResult:
    final: Checkpoint
    best: Checkpoint | None
    history: list[tuple[int, float, float]]          # (step, loss, lr)
    val_history: list[tuple[int, float]] = field(default_factory=list)


def _lr_at(schedule: TrainSchedule, step: int, total: int) -> float:
    if schedule.warmup_steps > 0 and step < schedule.warmup_steps:
        return schedule.lr * (step + 1) / schedule.warmup_steps
    if total <= schedule.warmup_steps:
        return schedule.lr
    frac = (step - schedule.warmup_steps) / max(1, total - schedule.warmup_steps)
    return schedule.lr * 0.5 * (1.0 + np.cos(np.pi * min(1.0, frac)))


_NO_DECAY = ("tok_emb", "pos_emb")


def adamw_update(ckpt: Checkpoint, grads: dict, lr: float,
                 schedule: TrainSchedule, beta1=0.9, beta2=0.999, eps=1e-8):
    """One decoupled-weight-decay Adam step; mutates ckpt in place."""
    if ckpt.opt_m is None:
        ckpt.opt_m = {k: np.zeros_like(p) for k, p in ckpt.params.items()}
        ckpt.opt_v = {k: np.zeros_like(p) for k, p in ckpt.params.items()}
    ckpt.step += 1
    t = ckpt.step
    if schedule.grad_clip > 0:
        norm = float(np.sqrt(sum(float((g.astype(np.float64) ** 2).sum())
                                 for g in grads.values())))
        if norm > schedule.grad_clip:
            factor = np.float32(schedule.grad_clip / (norm + 1e-12))
            grads = {k: g * factor for k, g in grads.items()}
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    for k, p in ckpt.params.items():
        g = grads[k]
        m = ckpt.opt_m[k]
        v = ckpt.opt_v[k]
        m *= beta1
        m += (1 - beta1) * g
        v *= beta2
        v += (1 - beta2) * g * g
        update = (m / bc1) / (np.sqrt(v / bc2) + eps)
        if schedule.weight_decay > 0 and p.ndim >= 2 and k not in _NO_DECAY:
            update = update + schedule.weight_decay * p
        p -= np.asarray(lr * update, dtype=p.dtype)


def _pad_batch(seqs: list[TokenSeq], pad_id: int):
    """Right-pad sequences; target mask covers boundary..end inclusive."""
    b = len(seqs)
    t = max(len(s.ids) for s in seqs)
    ids = np.full((b, t), pad_id, dtype=np.int64)
    lengths = np.zeros(b, dtype=np.int64)
    tmask = np.zeros((b, t), dtype=bool)
    for r, s in enumerate(seqs):
        n = len(s.ids)
        ids[r, :n] = s.ids
        lengths[r] = n
        tmask[r, s.boundary:n] = True
    return ids, lengths, tmask


def dataset_loss(ckpt: Checkpoint, seqs: list[TokenSeq], pad_id: int,
                 batch_size: int = 64) -> float:
    """Mean per-position loss over a dataset (no dropout, no grads)."""
    total, count = 0.0, 0
    for lo in range(0, len(seqs), batch_size):
        chunk = seqs[lo:lo + batch_size]
        ids, lengths, tmask = _pad_batch(chunk, pad_id)
        logits, _ = _forward(ckpt.params, ckpt.config, ids, lengths)
        pred = logits[:, :-1]
        shifted = pred - pred.max(-1, keepdims=True)
        loge = shifted - np.log(np.exp(shifted).sum(-1, keepdims=True))
        rows, cols = np.nonzero(tmask[:, 1:])
        total += float(-loge[rows, cols, ids[:, 1:][rows, cols]].sum())
        count += len(rows)
    if count == 0:
        raise ValueError("no effective loss positions")
    return total / count


def train(ckpt: Checkpoint, dataset: list[TokenSeq], schedule: TrainSchedule,
          pad_id: int, validation: list[TokenSeq] | None = None,
          log_path=None) -> TrainResult:
    """AdamW training over a TokenSeq dataset; deterministic given the seed.

    Returns the final-epoch checkpoint plus, when a validation set is given,
    the checkpoint with the lowest validation loss. The optimizer step
    counter carries over from the input checkpoint, so finetuning continues
    Adam bias correction rather than restarting it.
    """
    if not dataset:
        raise ValueError("empty training dataset")
    ckpt = ckpt.copy()
    order_rng = rng_stream(schedule.seed, "batch-order", ckpt.step)
    dropout_rng = rng_stream(schedule.seed, "dropout", ckpt.step) \
        if ckpt.config.dropout > 0 else None
    steps_per_epoch = (len(dataset) + schedule.batch_size - 1) // schedule.batch_size
    total_steps = schedule.epochs * steps_per_epoch
    history: list[tuple[int, float, float]] = []
    val_history: list[tuple[int, float]] = []
    best: Checkpoint | None = None
    best_loss = np.inf
    step = 0
    for _ in range(schedule.epochs):
        order = order_rng.permutation(len(dataset))
        for lo in range(0, len(dataset), schedule.batch_size):
            batch = [dataset[i] for i in order[lo:lo + schedule.batch_size]]
            ids, lengths, tmask = _pad_batch(batch, pad_id)
            lr = _lr_at(schedule, step, total_steps)
            loss, grads = loss_and_grads(ckpt.params, ckpt.config, ids,
                                         lengths, tmask, dropout_rng)
            adamw_update(ckpt, grads, lr, schedule)
            history.append((ckpt.step, loss, lr))
            step += 1
        if validation:
            vloss = dataset_loss(ckpt, validation, pad_id)
            val_history.append((ckpt.step, vloss))
            if vloss < best_loss:
                best_loss = vloss
                best = ckpt.copy()
    if log_path is not None:
        with open(log_path, "w") as fh:
            fh.write("step,loss,lr\n")
            for s, loss, lr in history:
                fh.write(f"{s},{loss:.6f},{lr:.8f}\n")
    return TrainResult(ckpt, best, history, val_history)


# ── Incremental decoding with a kv-cache ─────────────────────────────────────

class KVCache:
    """Per-layer key/value tensors grown during autoregressive decoding."""

    def __init__(self, config: ModelConfig, batch: int, capacity: int, dtype):
        hd = config.head_dim
        self.k = [np.zeros((batch, config.heads, capacity, hd), dtype=dtype)
                  for _ in range(config.layers)]
        self.v = [np.zeros((batch, config.heads, capacity, hd), dtype=dtype)
                  for _ in range(config.layers)]
        self.length = 0
        self.capacity = capacity


def _forward_incremental(params, config: ModelConfig, ids: np.ndarray,
                         cache: KVCache) -> np.ndarray:
    """Advance the cache by ids.shape[1] positions; returns last-position logits.

    Equal-length unpadded rows only (the sampler batches copies of one
    prompt), so no key masking is needed beyond causality.
    """
    b, t = ids.shape
    start = cache.length
    if start + t > cache.capacity:
        raise ValueError("kv-cache capacity exceeded")
    dtype = params["tok_emb"].dtype
    scale = dtype.type(1.0 / np.sqrt(config.head_dim))
    x = params["tok_emb"][ids] + params["pos_emb"][start:start + t]
    if t > 1:
        causal = np.triu(np.ones((t, t), dtype=bool), k=1)
        step_bias = np.where(causal, dtype.type(NEG_INF), dtype.type(0.0))
    for i in range(config.layers):
        pre = f"h{i}"
        a, _ = _layer_norm(x, params[f"{pre}.ln1.g"], params[f"{pre}.ln1.b"])
        qkv = a @ params[f"{pre}.attn.w_qkv"] + params[f"{pre}.attn.b_qkv"]
        q, k, v = np.split(qkv, 3, axis=-1)
        q = _split_heads(q, config.heads)
        cache.k[i][:, :, start:start + t] = _split_heads(k, config.heads)
        cache.v[i][:, :, start:start + t] = _split_heads(v, config.heads)
        keys = cache.k[i][:, :, :start + t]
        vals = cache.v[i][:, :, :start + t]
        att = (q @ keys.transpose(0, 1, 3, 2)) * scale
        if t > 1:
            att[:, :, :, start:] += step_bias
        att -= att.max(-1, keepdims=True)
        e = np.exp(att)
        probs = e / e.sum(-1, keepdims=True)
        o = _merge_heads(probs @ vals)
        o = o @ params[f"{pre}.attn.w_proj"] + params[f"{pre}.attn.b_proj"]
        x1 = x + o
        m, _ = _layer_norm(x1, params[f"{pre}.ln2.g"], params[f"{pre}.ln2.b"])
        fact, _ = _gelu(m @ params[f"{pre}.mlp.w_fc"] + params[f"{pre}.mlp.b_fc"])
        x = x1 + fact @ params[f"{pre}.mlp.w_proj"] + params[f"{pre}.mlp.b_proj"]
    cache.length = start + t
    xf, _ = _layer_norm(x[:, -1], params["ln_f.g"], params["ln_f.b"])
    return xf @ params["head.w"] + params["head.b"]


# ── Sampling ─────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class SamplerConfig:
    temperature: float = 1.0
    max_new_tokens: int = 256
    batch_size: int = 32
    seed: int = 0
    greedy: bool = False

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")


def sample_candidates(ckpt: Checkpoint, prompt: TokenSeq, n: int,
                      sc: SamplerConfig, end_id: int,
                      problem_id: str = "") -> list[list[int]]:
    """Sample n token continuations of one prompt; returns generated ids.

    Each candidate row draws from its own RNG stream keyed by
    (seed, problem_id, row), so candidate k is identical no matter how many
    rows are requested alongside it.
    """
    out: list[list[int]] = []
    config = ckpt.config
    prompt_ids = np.asarray(prompt.ids, dtype=np.int64)
    for lo in range(0, n, sc.batch_size):
        rows = min(sc.batch_size, n - lo)
        rngs = [rng_stream(sc.seed, "sample", problem_id, lo + r)
                for r in range(rows)]
        capacity = min(config.context_len,
                       len(prompt_ids) + sc.max_new_tokens)
        if len(prompt_ids) >= capacity:
            out.extend([[] for _ in range(rows)])     # no room to generate
            continue
        cache = KVCache(config, rows, capacity, ckpt.params["tok_emb"].dtype)
        batch_ids = np.tile(prompt_ids, (rows, 1))
        logits = _forward_incremental(ckpt.params, config, batch_ids, cache)
        generated: list[list[int]] = [[] for _ in range(rows)]
        alive = np.ones(rows, dtype=bool)
        while alive.any() and cache.length < capacity:
            if sc.greedy:
                nxt = np.argmax(logits, axis=-1)
            else:
                z = logits.astype(np.float64) / sc.temperature
                z -= z.max(-1, keepdims=True)
                p = np.exp(z)
                p /= p.sum(-1, keepdims=True)
                cdf = np.cumsum(p, axis=-1)
                nxt = np.array([
                    int(np.searchsorted(cdf[r], rngs[r].random(),
                                        side="right"))
                    if alive[r] else 0
                    for r in range(rows)])
                nxt = np.minimum(nxt, config.vocab_size - 1)
            for r in range(rows):
                if alive[r]:
                    generated[r].append(int(nxt[r]))
                    if nxt[r] == end_id:
                        alive[r] = False
            if not alive.any():
                break
            logits = _forward_incremental(
                ckpt.params, config, nxt.reshape(-1, 1).astype(np.int64),
                cache)
        out.extend(generated)
    return out


def sample_plans(ckpt: Checkpoint, problems, sc: SamplerConfig, n: int,
                 vocab: Vocabulary, dom: DomainDef,
                 tasks: list[GroundedTask] | None = None):
    """Sample and decode n candidate plans per problem.

    `problems` is a list of ProblemRecord-like objects with .id and .problem;
    syntactic failures come back as DecodeFailure entries, never raised.
    Returns a list (per problem) of lists of Plan | DecodeFailure.
    """
    results = []
    for idx, rec in enumerate(problems):
        task = tasks[idx] if tasks is not None else ground(dom, rec.problem)
        prompt = encode_problem(rec.problem, vocab)
        candidates = sample_candidates(ckpt, prompt, n, sc,
                                       vocab.end_of_plan_id, rec.id)
        decoded: list[Plan | DecodeFailure] = []
        for gen in candidates:
            try:
                actions = decode_plan(gen, vocab, dom)
            except DecodeError as err:
                decoded.append(DecodeFailure(err.reason))
                continue
            ids = []
            ok = True
            for schema, args in actions:
                action = task.find_action(schema, args)
                if action is None:
                    decoded.append(DecodeFailure("unknown-action"))
                    ok = False
                    break
                ids.append(action.id)
            if ok:
                decoded.append(Plan(tuple(ids), rec.id))
        results.append(decoded)
    return results


# ── Checkpoint serialization ─────────────────────────────────────────────────

_MAGIC = b"PLNCKPT1"


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    """Self-describing container: JSON header + raw little-endian f32 tensors."""
    tensors: list[tuple[str, np.ndarray]] = []
    for name, _ in tensor_manifest(ckpt.config):
        tensors.append((name, ckpt.params[name]))
    if ckpt.opt_m is not None:
        for name, _ in tensor_manifest(ckpt.config):
            tensors.append((f"opt.m.{name}", ckpt.opt_m[name]))
            tensors.append((f"opt.v.{name}", ckpt.opt_v[name]))
    manifest = []
    for name, arr in tensors:
        if arr.dtype != np.float32:
            raise ValueError(f"checkpoint tensors must be float32, "
                             f"{name} is {arr.dtype}")
        manifest.append({"name": name, "shape": list(arr.shape),
                         "dtype": "<f4"})
    header = json.dumps({
        "config": ckpt.config.to_dict(),
        "vocab_fingerprint": ckpt.vocab_fingerprint,
        "step": ckpt.step,
        "tensors": manifest,
    }, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(len(header).to_bytes(8, "little"))
        fh.write(header)
        for _, arr in tensors:
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        data = fh.read()
    buf = io.BytesIO(data)
    if buf.read(len(_MAGIC)) != _MAGIC:
        raise ValueError(f"{path} is not a checkpoint file")
    header_len = int.from_bytes(buf.read(8), "little")
    header = json.loads(buf.read(header_len).decode())
    config = ModelConfig.from_dict(header["config"])
    arrays: dict[str, np.ndarray] = {}
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        n = int(np.prod(shape)) if shape else 1
        raw = buf.read(4 * n)
        arrays[entry["name"]] = np.frombuffer(raw, dtype="<f4").reshape(shape).copy()
    params = {name: arrays[name] for name, _ in tensor_manifest(config)}
    opt_m = opt_v = None
    if any(k.startswith("opt.m.") for k in arrays):
        opt_m = {name: arrays[f"opt.m.{name}"] for name, _ in tensor_manifest(config)}
        opt_v = {name: arrays[f"opt.v.{name}"] for name, _ in tensor_manifest(config)}
    return Checkpoint(config, params, header["vocab_fingerprint"],
                      header["step"], opt_m, opt_v)
