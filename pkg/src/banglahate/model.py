"""Hybrid classifier head: parallel Bi-GRU and CNN branches with self-attention.

The head consumes per-token contextual embeddings ``[B, L, d_embed]`` plus a
validity mask and produces unnormalized logits:

* Bi-GRU branch: 2-layer bidirectional GRU (packed, so padding is never read)
  -> layer norm -> single-head self-attention with padded keys masked out ->
  masked mean over real positions -> vector of width ``2 * gru_hidden``.
* CNN branch: parallel 1-D convolutions (kernel sizes 1/2/3, same padding)
  -> ReLU -> masked adaptive max pool to one value per filter -> concat ->
  layer norm -> self-attention over the per-scale vectors viewed as a
  length-``len(kernels)`` sequence -> re-flattened vector.
* Fusion: concat both branch vectors -> linear -> ReLU -> layer norm ->
  dropout (training only) -> linear output layer.

All parameters are initialized deterministically from ``ModelConfig.seed``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import torch
import torch.nn.functional as F
from torch import nn
from torch.nn.utils.rnn import pack_padded_sequence, pad_packed_sequence


class ShapeMismatch(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters; defaults follow the training recipe."""

    d_embed: int = 768
    gru_layers: int = 2
    gru_hidden: int = 128
    attn_heads: int = 1
    cnn_kernels: tuple[int, ...] = (1, 2, 3)
    cnn_filters: int = 128
    fusion_dim: int = 128
    dropout: float = 0.3
    num_labels: int = 6
    grad_clip_norm: float = 1.0
    seed: int = 42

    def __post_init__(self):
        object.__setattr__(self, "cnn_kernels", tuple(self.cnn_kernels))
        dims = (self.d_embed, self.gru_layers, self.gru_hidden, self.cnn_filters,
                self.fusion_dim, self.num_labels, *self.cnn_kernels)
        if any(d <= 0 for d in dims):
            raise ValueError(f"all dimensions must be positive: {self}")
        if not (0.0 <= self.dropout < 1.0):
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.attn_heads != 1:
            raise ValueError("only single-head attention is supported")
        if self.grad_clip_norm <= 0:
            raise ValueError("grad_clip_norm must be positive")

    @property
    def gru_out_dim(self) -> int:
        return 2 * self.gru_hidden

    @property
    def cnn_out_dim(self) -> int:
        return len(self.cnn_kernels) * self.cnn_filters

    def as_dict(self) -> dict:
        d = asdict(self)
        d["cnn_kernels"] = list(self.cnn_kernels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d["cnn_kernels"] = tuple(d["cnn_kernels"])
        return cls(**d)


def _effective_mask(mask: torch.Tensor) -> torch.Tensor:
    """Boolean mask with position 0 forced real for fully-padded rows.

    Keeps degenerate all-padding inputs finite (softmax and max pooling need
    at least one live position) without affecting any normal input.
    """
    real = mask > 0
    empty = ~real.any(dim=1)
    if empty.any():
        real = real.clone()
        real[empty, 0] = True
    return real


class SelfAttention(nn.Module):
    """Single-head scaled dot-product self-attention with bias projections."""

    def __init__(self, width: int):
        super().__init__()
        self.width = width
        self.q_proj = nn.Linear(width, width)
        self.k_proj = nn.Linear(width, width)
        self.v_proj = nn.Linear(width, width)
        self.out_proj = nn.Linear(width, width)

    def forward(self, x: torch.Tensor, key_mask: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """x: [B, T, w]; key_mask: [B, T] bool, True = attendable key."""
        q = self.q_proj(x)
        k = self.k_proj(x)
        v = self.v_proj(x)
        scores = torch.matmul(q, k.transpose(1, 2)) / math.sqrt(self.width)
        scores = scores.masked_fill(~key_mask.unsqueeze(1), float("-inf"))
        weights = torch.softmax(scores, dim=-1)
        out = self.out_proj(torch.matmul(weights, v))
        return out, weights


class BiGRUBranch(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.gru = nn.GRU(
            input_size=cfg.d_embed,
            hidden_size=cfg.gru_hidden,
            num_layers=cfg.gru_layers,
            batch_first=True,
            bidirectional=True,
        )
        self.norm = nn.LayerNorm(cfg.gru_out_dim)
        self.attn = SelfAttention(cfg.gru_out_dim)

    def forward(self, emb: torch.Tensor, mask: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        if emb.size(-1) != self.cfg.d_embed:
            raise ShapeMismatch(f"expected embedding width {self.cfg.d_embed}, got {emb.size(-1)}")
        real = _effective_mask(mask)
        lengths = real.sum(dim=1).to(torch.int64).cpu()
        packed = pack_padded_sequence(emb, lengths, batch_first=True, enforce_sorted=False)
        out, _ = self.gru(packed)
        out, _ = pad_packed_sequence(out, batch_first=True, total_length=emb.size(1))
        normed = self.norm(out)
        attended, weights = self.attn(normed, real)
        denom = real.sum(dim=1, keepdim=True).to(attended.dtype)
        vec = (attended * real.unsqueeze(-1)).sum(dim=1) / denom
        return vec, weights


class CNNBranch(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.convs = nn.ModuleList(
            nn.Conv1d(cfg.d_embed, cfg.cnn_filters, kernel_size=k) for k in cfg.cnn_kernels
        )
        self.norm = nn.LayerNorm(cfg.cnn_out_dim)
        self.attn = SelfAttention(cfg.cnn_filters)

    def pooled_features(self, emb: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        """Per-scale max-pooled conv activations, concatenated: [B, |kernels| * filters].

        Padded token positions are excluded from each max by setting their
        activations to -inf after the ReLU.
        """
        if emb.size(-1) != self.cfg.d_embed:
            raise ShapeMismatch(f"expected embedding width {self.cfg.d_embed}, got {emb.size(-1)}")
        real = _effective_mask(mask)
        x = emb.transpose(1, 2)
        pooled = []
        for k, conv in zip(self.cfg.cnn_kernels, self.convs):
            # "same" padding on the token axis, asymmetric for even kernels.
            xi = F.pad(x, ((k - 1) // 2, k // 2))
            act = F.relu(conv(xi))
            act = act.masked_fill(~real.unsqueeze(1), float("-inf"))
            pooled.append(act.max(dim=2).values)
        return torch.cat(pooled, dim=1)

    def forward(self, emb: torch.Tensor, mask: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        cat = self.pooled_features(emb, mask)
        normed = self.norm(cat)
        scales = normed.view(cat.size(0), len(self.cfg.cnn_kernels), self.cfg.cnn_filters)
        all_keys = torch.ones(scales.shape[:2], dtype=torch.bool, device=scales.device)
        attended, weights = self.attn(scales, all_keys)
        vec = attended.reshape(cat.size(0), self.cfg.cnn_out_dim)
        return vec, weights


class ClassifierHead(nn.Module):
    """Branches, fusion, and the output layer (everything except the encoder)."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.embed_dropout = nn.Dropout(cfg.dropout)
        self.gru_branch = BiGRUBranch(cfg)
        self.cnn_branch = CNNBranch(cfg)
        self.fusion = nn.Linear(cfg.gru_out_dim + cfg.cnn_out_dim, cfg.fusion_dim)
        self.fusion_norm = nn.LayerNorm(cfg.fusion_dim)
        self.fusion_dropout = nn.Dropout(cfg.dropout)
        self.output = nn.Linear(cfg.fusion_dim, cfg.num_labels)

    def fuse(self, gru_vec: torch.Tensor, cnn_vec: torch.Tensor) -> torch.Tensor:
        fused = F.relu(self.fusion(torch.cat([gru_vec, cnn_vec], dim=-1)))
        return self.fusion_dropout(self.fusion_norm(fused))

    def classify(self, fused: torch.Tensor) -> torch.Tensor:
        return self.output(fused)

    def forward(
        self, emb: torch.Tensor, mask: torch.Tensor, return_attention: bool = False
    ):
        emb = self.embed_dropout(emb * mask.unsqueeze(-1).to(emb.dtype))
        gru_vec, gru_attn = self.gru_branch(emb, mask)
        cnn_vec, cnn_attn = self.cnn_branch(emb, mask)
        logits = self.classify(self.fuse(gru_vec, cnn_vec))
        if return_attention:
            return logits, gru_attn, cnn_attn
        return logits


def _xavier_uniform_(tensor: torch.Tensor, g: torch.Generator) -> None:
    shape = tensor.shape
    receptive = 1
    for s in shape[2:]:
        receptive *= s
    fan_in = shape[1] * receptive if len(shape) > 1 else shape[0]
    fan_out = shape[0] * receptive
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    with torch.no_grad():
        tensor.uniform_(-bound, bound, generator=g)


def _orthogonal_(tensor: torch.Tensor, g: torch.Generator) -> None:
    rows = tensor.size(0)
    cols = tensor.numel() // rows
    flat = torch.randn(rows, cols, generator=g, dtype=tensor.dtype)
    if rows < cols:
        flat = flat.t()
    q, r = torch.linalg.qr(flat)
    q = q * torch.sign(torch.diagonal(r, 0))
    if rows < cols:
        q = q.t()
    with torch.no_grad():
        tensor.view_as(q).copy_(q)


def init_parameters(head: ClassifierHead, seed: int) -> None:
    """Deterministic init: Xavier for linear/conv, orthogonal GRU recurrence,
    zero biases, identity layer norms.  Driven by one local generator so the
    global torch RNG state is irrelevant."""
    g = torch.Generator().manual_seed(seed)
    for module in head.modules():
        if isinstance(module, (nn.Linear, nn.Conv1d)):
            _xavier_uniform_(module.weight, g)
            if module.bias is not None:
                with torch.no_grad():
                    module.bias.zero_()
        elif isinstance(module, nn.GRU):
            for name, param in module.named_parameters():
                if name.startswith("weight_hh"):
                    _orthogonal_(param, g)
                elif name.startswith("weight_ih"):
                    _xavier_uniform_(param, g)
                else:
                    with torch.no_grad():
                        param.zero_()
        elif isinstance(module, nn.LayerNorm):
            with torch.no_grad():
                module.weight.fill_(1.0)
                module.bias.zero_()


def build_head(cfg: ModelConfig) -> ClassifierHead:
    head = ClassifierHead(cfg)
    init_parameters(head, cfg.seed)
    return head


def parameter_count(cfg: ModelConfig) -> int:
    """Closed-form head parameter total; must equal per-tensor enumeration.

    GRU uses the two-bias convention: per layer and direction,
    3 * [H*(I+H) + 2H] with I = d_embed on layer 1 and 2H above.  Attention
    blocks carry 4 bias-bearing square projections of their width.
    """
    h = cfg.gru_hidden
    gru = 0
    for layer in range(cfg.gru_layers):
        inp = cfg.d_embed if layer == 0 else 2 * h
        gru += 2 * 3 * (h * (inp + h) + 2 * h)
    gru_norm = 2 * cfg.gru_out_dim
    gru_attn = 4 * (cfg.gru_out_dim**2 + cfg.gru_out_dim)
    convs = sum(cfg.cnn_filters * cfg.d_embed * k + cfg.cnn_filters for k in cfg.cnn_kernels)
    cnn_norm = 2 * cfg.cnn_out_dim
    cnn_attn = 4 * (cfg.cnn_filters**2 + cfg.cnn_filters)
    fusion = (cfg.gru_out_dim + cfg.cnn_out_dim) * cfg.fusion_dim + cfg.fusion_dim
    fusion_norm = 2 * cfg.fusion_dim
    output = cfg.fusion_dim * cfg.num_labels + cfg.num_labels
    return gru + gru_norm + gru_attn + convs + cnn_norm + cnn_attn + fusion + fusion_norm + output


class TextClassifier:
    """Backend plus head plus label scheme; the trainable unit."""

    def __init__(self, backend, head: ClassifierHead, scheme):
        if backend.d_embed != head.cfg.d_embed:
            raise ShapeMismatch(
                f"encoder width {backend.d_embed} != head d_embed {head.cfg.d_embed}"
            )
        if scheme.num_classes != head.cfg.num_labels:
            raise ShapeMismatch(
                f"scheme has {scheme.num_classes} classes but head emits {head.cfg.num_labels}"
            )
        self.backend = backend
        self.head = head
        self.scheme = scheme

    def tokenize_batch(self, texts: list[str]):
        return [self.backend.tokenize(t) for t in texts]

    def logits_for(self, tokenized) -> torch.Tensor:
        from .encoder import batch_tensors

        emb = self.backend.encode(tokenized)
        _, mask = batch_tensors(tokenized)
        return self.head(emb, mask)

    def forward_texts(self, texts: list[str]) -> torch.Tensor:
        return self.logits_for(self.tokenize_batch(texts))

    def train_mode(self) -> None:
        self.head.train()
        self.backend.set_training(True)

    def eval_mode(self) -> None:
        self.head.eval()
        self.backend.set_training(False)

    def trainable_parameters(self):
        yield from self.head.parameters()
        yield from self.backend.parameters()


def forward(texts: list[str], backend, head: ClassifierHead) -> torch.Tensor:
    """Full text -> logits pass: tokenize, encode, branch, fuse, classify."""
    from .encoder import batch_tensors

    tokenized = [backend.tokenize(t) for t in texts]
    emb = backend.encode(tokenized)
    _, mask = batch_tensors(tokenized)
    return head(emb, mask)
