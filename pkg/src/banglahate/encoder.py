"""Contextual embedding backends behind a single tokenize/encode surface.

Two backends exist:

* ``PretrainedBackend`` wraps a local transformer checkpoint (the production
  path, e.g. a Bangla BERT-family encoder) via ``transformers``.  Weights are
  resolved strictly from local files; a missing checkpoint raises
  :class:`BackendUnavailable` naming the missing artifact.
* ``StubBackend`` produces tokenization and embeddings from integer hashes
  only, so the whole test suite runs bit-identically on any platform with no
  downloaded weights.

Both emit right-padded token ids of length ``L_MAX`` and embedding batches of
shape ``[B, L_MAX, d_embed]`` with padded rows forced to exactly zero.

Tokenization and stub encoding are pure and thread-safe; encoding on a
pretrained instance mutates no state but must not be called concurrently on
one instance.
"""

from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
import torch

L_MAX = 128
D_EMBED_DEFAULT = 768

PAD_ID = 0
BOS_ID = 1
EOS_ID = 2
STUB_VOCAB_SIZE = 50_000
_STUB_RESERVED = 5


class BackendUnavailable(RuntimeError):
    """Pretrained weights or tokenizer files could not be located."""


@dataclass(frozen=True)
class TokenizedInput:
    """Right-padded subword ids plus a 0/1 validity mask of equal length."""

    token_ids: tuple[int, ...]
    mask: tuple[int, ...]

    def __post_init__(self):
        if len(self.token_ids) != len(self.mask):
            raise ValueError("token_ids and mask lengths differ")
        n = sum(self.mask)
        if tuple(self.mask) != (1,) * n + (0,) * (len(self.mask) - n):
            raise ValueError("mask must be a prefix of 1s followed by 0s")

    @property
    def n_real(self) -> int:
        return sum(self.mask)


@dataclass(frozen=True)
class EmbeddingSequence:
    """Per-token vectors [L x D] with padded rows zeroed."""

    vectors: torch.Tensor
    mask: tuple[int, ...]


def batch_tensors(batch: list[TokenizedInput]) -> tuple[torch.Tensor, torch.Tensor]:
    """Stack a tokenized batch into (ids [B, L] int64, mask [B, L] float32)."""
    if not batch:
        raise ValueError("empty batch")
    length = len(batch[0].token_ids)
    if any(len(t.token_ids) != length for t in batch):
        raise ValueError("batch is not of uniform length")
    ids = torch.tensor([t.token_ids for t in batch], dtype=torch.int64)
    mask = torch.tensor([t.mask for t in batch], dtype=torch.float32)
    return ids, mask


def _word_token_id(word: str) -> int:
    """Stable hash of a whitespace token into the stub vocabulary."""
    digest = hashlib.blake2b(word.encode("utf-8"), digest_size=8).digest()
    return _STUB_RESERVED + int.from_bytes(digest, "little") % (STUB_VOCAB_SIZE - _STUB_RESERVED)


@lru_cache(maxsize=500_000)
def _stub_row(token_id: int, position: int, seed: int, dim: int) -> np.ndarray:
    """Deterministic embedding row for (token, position, seed); values in [-1, 1]."""
    ss = np.random.SeedSequence([token_id, position, seed, dim])
    row = np.random.Generator(np.random.PCG64(ss)).uniform(-1.0, 1.0, dim).astype(np.float32)
    row.setflags(write=False)
    return row


class StubBackend:
    """Hash-based tokenizer and embedder; deterministic across runs and platforms."""

    kind = "stub"
    trainable = False

    def __init__(self, seed: int = 0, d_embed: int = D_EMBED_DEFAULT, max_len: int = L_MAX):
        self.seed = seed
        self.d_embed = d_embed
        self.max_len = max_len

    @property
    def identifier(self) -> str:
        return f"stub:{self.seed}"

    def tokenize(self, text: str) -> TokenizedInput:
        words = text.split()
        ids = [BOS_ID] + [_word_token_id(w) for w in words[: self.max_len - 2]] + [EOS_ID]
        n = len(ids)
        ids.extend([PAD_ID] * (self.max_len - n))
        mask = (1,) * n + (0,) * (self.max_len - n)
        return TokenizedInput(tuple(ids), mask)

    def encode(self, batch: list[TokenizedInput]) -> torch.Tensor:
        ids, mask = batch_tensors(batch)
        rows = np.zeros((len(batch), ids.shape[1], self.d_embed), dtype=np.float32)
        for b, tok in enumerate(batch):
            for i, (tid, m) in enumerate(zip(tok.token_ids, tok.mask)):
                if m:
                    rows[b, i] = _stub_row(tid, i, self.seed, self.d_embed)
        return torch.from_numpy(rows)

    def set_training(self, training: bool) -> None:
        pass

    def parameters(self):
        return iter(())


class PretrainedBackend:
    """A local transformer checkpoint loaded through ``transformers``.

    ``identifier`` names the checkpoint; weights are looked up in
    ``weights_dir`` (or ``identifier`` itself when it is a directory).  No
    network access is attempted.
    """

    kind = "pretrained"

    def __init__(
        self,
        identifier: str,
        weights_dir: str | Path | None = None,
        trainable: bool = True,
        max_len: int = L_MAX,
    ):
        self.identifier = identifier
        self.trainable = trainable
        self.max_len = max_len
        location = Path(weights_dir) if weights_dir else Path(identifier)
        if not location.is_dir():
            raise BackendUnavailable(
                f"pretrained encoder {identifier!r}: no local checkpoint directory at {location}"
            )
        try:
            from transformers import AutoModel, AutoTokenizer

            self._tokenizer = AutoTokenizer.from_pretrained(str(location), local_files_only=True)
            self._model = AutoModel.from_pretrained(str(location), local_files_only=True)
        except Exception as exc:
            raise BackendUnavailable(
                f"pretrained encoder {identifier!r}: failed to load from {location}: {exc}"
            ) from exc
        self.d_embed = int(self._model.config.hidden_size)
        if not trainable:
            for p in self._model.parameters():
                p.requires_grad_(False)
        self._model.eval()

    def tokenize(self, text: str) -> TokenizedInput:
        enc = self._tokenizer(
            text, padding="max_length", truncation=True, max_length=self.max_len
        )
        ids = tuple(int(i) for i in enc["input_ids"])
        mask = tuple(int(m) for m in enc["attention_mask"])
        if sum(mask) == 0:
            warnings.warn(f"text tokenized to zero tokens: {text!r}", stacklevel=2)
        return TokenizedInput(ids, mask)

    def encode(self, batch: list[TokenizedInput]) -> torch.Tensor:
        ids, mask = batch_tensors(batch)
        if self.trainable:
            out = self._model(input_ids=ids, attention_mask=mask.long()).last_hidden_state
        else:
            with torch.no_grad():
                out = self._model(input_ids=ids, attention_mask=mask.long()).last_hidden_state
        return out * mask.unsqueeze(-1)

    def set_training(self, training: bool) -> None:
        # Frozen encoders stay in eval mode so dropout never fires.
        self._model.train(training and self.trainable)

    def parameters(self):
        return self._model.parameters() if self.trainable else iter(())


def make_backend(
    kind: str,
    identifier: str = "",
    weights_dir: str | Path | None = None,
    trainable: bool = True,
    d_embed: int = D_EMBED_DEFAULT,
    max_len: int = L_MAX,
):
    """Build a backend from config values (``encoder.kind`` and friends)."""
    if kind == "stub":
        seed = int(identifier) if identifier else 0
        return StubBackend(seed=seed, d_embed=d_embed, max_len=max_len)
    if kind == "pretrained":
        return PretrainedBackend(identifier, weights_dir, trainable=trainable, max_len=max_len)
    raise ValueError(f"unknown encoder kind {kind!r}; expected 'pretrained' or 'stub'")


def stub_embed(tok: TokenizedInput, seed: int, d_embed: int = D_EMBED_DEFAULT) -> EmbeddingSequence:
    """Single-example stub embedding with the same masking contract as encode."""
    backend = StubBackend(seed=seed, d_embed=d_embed, max_len=len(tok.token_ids))
    vectors = backend.encode([tok])[0]
    return EmbeddingSequence(vectors, tok.mask)


def encode(batch: list[TokenizedInput], backend) -> list[EmbeddingSequence]:
    """Encode a uniform batch into per-example embedding sequences."""
    tensor = backend.encode(batch)
    return [EmbeddingSequence(tensor[i], batch[i].mask) for i in range(len(batch))]
