"""Training harness: cross-entropy loss, clipped AdamW epochs, early stopping.

``fit`` runs the whole regime: seed-shuffled batches of ``batch_size``, global
gradient-norm clipping, AdamW at the configured learning rate, dev micro-F1
after every epoch, checkpoint on improvement, stop after ``patience``
non-improving epochs.  Every run writes a deterministic ``manifest.json``
(the full resolved config, per-epoch losses and dev scores, best epoch) and a
separate ``timing.json`` for wall-clock data, so reruns with the same seed
and inputs produce byte-identical manifests and checkpoints.
"""

from __future__ import annotations

import json
import random
import time
from dataclasses import dataclass
from pathlib import Path

import torch

from . import evaluation
from .checkpoint import save_checkpoint
from .model import TextClassifier


class NonFiniteLoss(RuntimeError):
    def __init__(self, step: int, batch_ids: list[str]):
        self.step = step
        self.batch_ids = batch_ids
        super().__init__(f"non-finite loss at step {step}; batch ids: {batch_ids}")


class InvalidLabel(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 16
    learning_rate: float = 1e-5
    max_epochs: int = 10
    patience: int = 3
    grad_clip_norm: float = 1.0
    use_class_weights: bool = False
    seed: int = 42

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.patience > self.max_epochs:
            raise ValueError("patience must not exceed max_epochs")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")


@dataclass
class TrainState:
    epoch: int = 0
    step: int = 0
    best_dev_f1: float = -1.0
    epochs_since_best: int = 0
    rng_state: str = ""

    def update(self, dev_f1: float) -> bool:
        """Record one finished epoch; returns True when dev F1 improved."""
        self.epoch += 1
        if dev_f1 > self.best_dev_f1:
            self.best_dev_f1 = dev_f1
            self.epochs_since_best = 0
            return True
        self.epochs_since_best += 1
        return False


def cross_entropy(
    logits: torch.Tensor, gold: torch.Tensor, weights: torch.Tensor | None = None
) -> torch.Tensor:
    """Mean of -log softmax(logits)[gold]; weighted mean when weights given."""
    num_labels = logits.size(-1)
    bad = [int(v) for v in gold.tolist() if not (0 <= v < num_labels)]
    if bad:
        raise InvalidLabel(f"gold ids {bad} outside 0..{num_labels - 1}")
    return torch.nn.functional.cross_entropy(logits, gold, weight=weights)


def shuffled_order(n: int, seed: int, epoch: int) -> list[int]:
    """Fisher-Yates order driven by (seed, epoch); stable across platforms."""
    order = list(range(n))
    random.Random(seed * 1_000_003 + epoch).shuffle(order)
    return order


def optimizer_settings(cfg: TrainConfig) -> dict:
    """AdamW hyperparameters as used, recorded verbatim in the manifest."""
    return {
        "name": "AdamW",
        "learning_rate": cfg.learning_rate,
        "betas": [0.9, 0.999],
        "eps": 1e-8,
        "weight_decay": 0.01,
    }


def make_optimizer(classifier: TextClassifier, cfg: TrainConfig) -> torch.optim.AdamW:
    s = optimizer_settings(cfg)
    return torch.optim.AdamW(
        classifier.trainable_parameters(),
        lr=s["learning_rate"],
        betas=tuple(s["betas"]),
        eps=s["eps"],
        weight_decay=s["weight_decay"],
    )


def train_epoch(
    classifier: TextClassifier,
    tokenized: list,
    gold: torch.Tensor,
    ids: list[str],
    cfg: TrainConfig,
    optimizer: torch.optim.Optimizer,
    epoch: int,
    weights: torch.Tensor | None = None,
) -> list[float]:
    """One pass over the data in seed-shuffled batches; returns step losses."""
    classifier.train_mode()
    order = shuffled_order(len(tokenized), cfg.seed, epoch)
    params = list(classifier.trainable_parameters())
    losses: list[float] = []
    for step, start in enumerate(range(0, len(order), cfg.batch_size)):
        batch_idx = order[start : start + cfg.batch_size]
        logits = classifier.logits_for([tokenized[i] for i in batch_idx])
        loss = cross_entropy(logits, gold[batch_idx], weights)
        if not torch.isfinite(loss):
            raise NonFiniteLoss(step, [ids[i] for i in batch_idx])
        optimizer.zero_grad()
        loss.backward()
        torch.nn.utils.clip_grad_norm_(params, cfg.grad_clip_norm)
        optimizer.step()
        losses.append(float(loss.detach()))
    return losses


@dataclass
class FitResult:
    checkpoint_path: Path
    manifest: dict
    best_dev_f1: float
    best_epoch: int


def fit(
    classifier: TextClassifier,
    train_data: list,
    dev_data: list,
    cfg: TrainConfig,
    out_dir: str | Path,
    run_config: dict | None = None,
    class_weights: tuple[float, ...] | None = None,
) -> FitResult:
    """Full training run; returns the best-dev-micro-F1 checkpoint.

    Texts in ``train_data``/``dev_data`` are expected to be normalized
    already.  The loop is single-threaded over model state; torch is pinned
    to one thread so repeated runs are bit-identical.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    torch.set_num_threads(1)
    torch.manual_seed(cfg.seed)

    started = time.time()
    tokenized = [classifier.backend.tokenize(ex.text) for ex in train_data]
    gold = torch.tensor([ex.label for ex in train_data], dtype=torch.int64)
    train_ids = [ex.id for ex in train_data]
    weights_t = (
        torch.tensor(class_weights, dtype=torch.float32)
        if cfg.use_class_weights and class_weights is not None
        else None
    )

    optimizer = make_optimizer(classifier, cfg)
    state = TrainState(rng_state=f"seed={cfg.seed}")
    ckpt_path = out / "best.ckpt"
    epochs_log: list[dict] = []
    best_epoch = 0

    for epoch in range(1, cfg.max_epochs + 1):
        step_losses = train_epoch(
            classifier, tokenized, gold, train_ids, cfg, optimizer, epoch, weights_t
        )
        dev_pred = evaluation.predict(classifier, dev_data)
        dev_gold = [ex.label for ex in dev_data]
        dev_f1 = evaluation.score(dev_pred, dev_gold, classifier.scheme).micro_f1
        improved = state.update(dev_f1)
        if improved:
            best_epoch = epoch
            save_checkpoint(
                ckpt_path,
                classifier.head,
                classifier.scheme,
                {
                    "kind": classifier.backend.kind,
                    "identifier": classifier.backend.identifier,
                    "trainable": classifier.backend.trainable,
                    "d_embed": classifier.backend.d_embed,
                },
            )
        epochs_log.append(
            {
                "epoch": epoch,
                "train_loss": sum(step_losses) / len(step_losses),
                "steps": len(step_losses),
                "dev_micro_f1": dev_f1,
                "improved": improved,
            }
        )
        if state.epochs_since_best >= cfg.patience:
            break

    manifest = {
        "format_version": 1,
        "config": run_config if run_config is not None else {},
        "optimizer": optimizer_settings(cfg),
        "train_config": {
            "batch_size": cfg.batch_size,
            "learning_rate": cfg.learning_rate,
            "max_epochs": cfg.max_epochs,
            "patience": cfg.patience,
            "grad_clip_norm": cfg.grad_clip_norm,
            "use_class_weights": cfg.use_class_weights,
            "seed": cfg.seed,
        },
        "scheme": {"subtask": classifier.scheme.subtask, "names": list(classifier.scheme.names)},
        "encoder": {
            "kind": classifier.backend.kind,
            "identifier": classifier.backend.identifier,
            "trainable": classifier.backend.trainable,
        },
        "n_train": len(train_data),
        "n_dev": len(dev_data),
        "epochs": epochs_log,
        "best_epoch": best_epoch,
        "best_dev_micro_f1": state.best_dev_f1,
        "checkpoint": ckpt_path.name,
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, ensure_ascii=False, sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )
    # Wall-clock data lives outside the manifest so reruns stay byte-identical.
    (out / "timing.json").write_text(
        json.dumps({"wall_time_s": time.time() - started}, indent=2) + "\n", encoding="utf-8"
    )
    return FitResult(ckpt_path, manifest, state.best_dev_f1, best_epoch)
