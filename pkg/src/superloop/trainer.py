"""Cross-entropy training over Random-add superposed priors.

Each step draws a batch of token sequences, superposes each with the
Random-add scheme, and minimises the mean negative log posterior of the
ground-truth token over *all* positions (padded inactive notes
included; they teach note-count behaviour).  Adam with epoch-wise
learning-rate decay; gradients clipped at global norm 1.0.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass
from typing import Callable, Iterator, Optional, Sequence

import numpy as np
import torch
import torch.nn.functional as F

from .model import SuperposedLM
from .superposition import random_add


class NonFiniteLoss(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 16
    steps: int = 5000
    learning_rate: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    epoch_decay: float = 0.99
    grad_clip: float = 1.0
    seed: int = 0
    checkpoint_interval: int = 500
    stop_loss: Optional[float] = None  # early stop when a step's loss dips below

    def to_json(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_json(doc: dict) -> "TrainConfig":
        return TrainConfig(**doc)


@dataclass
class TrainStats:
    step: int
    loss: float
    lr: float
    wall_clock: float

    def to_json(self) -> dict:
        return {"step": self.step, "loss": self.loss, "lr": self.lr,
                "wall_clock": self.wall_clock}


def batch_loss(
    model: SuperposedLM,
    tokens: torch.Tensor,
    priors: torch.Tensor,
    syntax_mask: torch.Tensor,
) -> torch.Tensor:
    """Mean cross-entropy (nats/token) of the masked logits against x.

    Truth tokens are always syntax-valid, so their logits are finite and
    the loss is well defined for any valid prior batch.
    """
    out = model.forward(priors, syntax_mask)
    batch, n_positions, vocab = out.logits.shape
    loss = F.cross_entropy(
        out.logits.reshape(batch * n_positions, vocab),
        tokens.reshape(batch * n_positions),
    )
    if not torch.isfinite(loss):
        raise NonFiniteLoss(f"loss is {loss.item()}")
    return loss


def make_priors(
    sequences: Sequence[np.ndarray],
    syntax_mask: np.ndarray,
    rng: np.random.Generator,
    dtype: torch.dtype = torch.float32,
) -> torch.Tensor:
    """Stack Random-add priors for a batch of sequences."""
    mats = [random_add(x, syntax_mask, rng).prior.probs for x in sequences]
    return torch.as_tensor(np.stack(mats), dtype=dtype)


def train(
    model: SuperposedLM,
    corpus: Sequence[np.ndarray],
    config: TrainConfig,
    syntax_mask: np.ndarray,
    on_checkpoint: Optional[Callable[[int, SuperposedLM], None]] = None,
) -> Iterator[TrainStats]:
    """Run the training loop, yielding per-step statistics.

    Fully reproducible from ``config.seed``: batch selection and prior
    superposition share one numpy generator.  The learning rate is
    multiplied by ``epoch_decay`` whenever a full corpus pass completes.
    If a non-finite loss or parameter appears the last good state is
    restored and :class:`NonFiniteLoss` is raised.
    """
    if len(corpus) == 0:
        raise ValueError("empty corpus")
    rng = np.random.default_rng(config.seed)
    mask_tensor = torch.as_tensor(syntax_mask.copy())
    optimizer = torch.optim.Adam(
        model.parameters(),
        lr=config.learning_rate,
        betas=(config.adam_beta1, config.adam_beta2),
        eps=config.adam_eps,
    )
    dtype = next(model.parameters()).dtype
    last_good = {k: v.detach().clone() for k, v in model.state_dict().items()}
    samples_seen = 0
    epochs_done = 0
    started = time.monotonic()

    for step in range(1, config.steps + 1):
        indices = rng.integers(0, len(corpus), size=config.batch_size)
        batch_seqs = [corpus[i] for i in indices]
        priors = make_priors(batch_seqs, syntax_mask, rng, dtype=dtype)
        tokens = torch.as_tensor(np.stack(batch_seqs), dtype=torch.long)

        try:
            loss = batch_loss(model, tokens, priors, mask_tensor)
        except NonFiniteLoss:
            model.load_state_dict(last_good)
            raise
        optimizer.zero_grad()
        loss.backward()
        if config.grad_clip > 0:
            torch.nn.utils.clip_grad_norm_(model.parameters(), config.grad_clip)
        optimizer.step()

        if not all(torch.isfinite(p).all() for p in model.parameters()):
            model.load_state_dict(last_good)
            raise NonFiniteLoss(f"non-finite parameter after step {step}")

        samples_seen += config.batch_size
        new_epochs = samples_seen // len(corpus)
        if new_epochs > epochs_done:
            epochs_done = new_epochs
            lr = config.learning_rate * config.epoch_decay ** epochs_done
            for group in optimizer.param_groups:
                group["lr"] = lr

        if config.checkpoint_interval and step % config.checkpoint_interval == 0:
            last_good = {k: v.detach().clone() for k, v in model.state_dict().items()}
            if on_checkpoint is not None:
                on_checkpoint(step, model)

        stats = TrainStats(
            step=step,
            loss=float(loss.item()),
            lr=float(optimizer.param_groups[0]["lr"]),
            wall_clock=time.monotonic() - started,
        )
        yield stats
        if config.stop_loss is not None and stats.loss <= config.stop_loss:
            break


def evaluate_loss(
    model: SuperposedLM,
    corpus: Sequence[np.ndarray],
    syntax_mask: np.ndarray,
    seed: int = 0,
    batches: int = 8,
    batch_size: int = 16,
) -> float:
    """Mean Random-add loss over freshly superposed seeded batches."""
    rng = np.random.default_rng(seed)
    mask_tensor = torch.as_tensor(syntax_mask.copy())
    dtype = next(model.parameters()).dtype
    total = 0.0
    with torch.no_grad():
        for _ in range(batches):
            indices = rng.integers(0, len(corpus), size=batch_size)
            batch_seqs = [corpus[i] for i in indices]
            priors = make_priors(batch_seqs, syntax_mask, rng, dtype=dtype)
            tokens = torch.as_tensor(np.stack(batch_seqs), dtype=torch.long)
            total += batch_loss(model, tokens, priors, mask_tensor).item()
    return total / batches
