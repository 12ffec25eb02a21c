"""Minibatch training with early stopping, shared by every neural model."""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from .config import TrainConfig
from .errors import DataError, LengthMismatch, NonFiniteLoss
from .model import Checkpoint, Network
from .nnkit import CosineWarmRestarts, Tensor, clip_grad_norm, no_grad, optimizer_for
from .nnkit.functional import cross_entropy, focal_loss
from .utils import counter_rng, derive_seed, root_seed

logger = logging.getLogger(__name__)

HISTORY_COLUMNS = ["epoch", "lr", "train_loss", "train_acc", "val_loss", "val_acc"]

LossFn = Callable[[Tensor, np.ndarray], Tensor]


@dataclass
class EpochRecord:
    epoch: int
    lr: float
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float


@dataclass
class History:
    records: List[EpochRecord] = field(default_factory=list)
    best_epoch: int = -1
    stopped_early: bool = False

    def __len__(self) -> int:
        return len(self.records)

    def column(self, name: str) -> List[float]:
        return [getattr(r, name) for r in self.records]

    @property
    def generalization_gap(self) -> float:
        """Train minus validation accuracy at the best epoch."""
        if self.best_epoch < 0:
            return 0.0
        best = self.records[self.best_epoch]
        return best.train_acc - best.val_acc

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(r) for r in self.records], columns=HISTORY_COLUMNS)

    def to_csv(self, path: Path | str) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format="%.17g")
        return path

    @classmethod
    def from_csv(cls, path: Path | str) -> "History":
        frame = pd.read_csv(path, float_precision="round_trip")
        missing = [c for c in HISTORY_COLUMNS if c not in frame.columns]
        if missing:
            raise DataError(f"{path}: history is missing columns {missing}")
        records = [
            EpochRecord(
                epoch=int(row.epoch),
                lr=float(row.lr),
                train_loss=float(row.train_loss),
                train_acc=float(row.train_acc),
                val_loss=float(row.val_loss),
                val_acc=float(row.val_acc),
            )
            for row in frame.itertuples(index=False)
        ]
        history = cls(records=records)
        if records:
            history.best_epoch = max(
                range(len(records)), key=lambda i: (records[i].val_acc, -records[i].val_loss, -i)
            )
        return history


@dataclass
class TrainResult:
    model: Network
    checkpoint: Checkpoint
    history: History


def loss_function(cfg: TrainConfig) -> LossFn:
    if cfg.loss_kind == "focal":
        alpha, gamma = cfg.loss.alpha, cfg.loss.gamma
        return lambda logits, targets: focal_loss(logits, targets, alpha, gamma)
    return cross_entropy


def minibatches(n: int, batch_size: int, rng: np.random.Generator) -> List[np.ndarray]:
    """Shuffled index batches; a trailing single-sample batch joins the previous one."""
    order = rng.permutation(n)
    batches = [order[i:i + batch_size] for i in range(0, n, batch_size)]
    if len(batches) > 1 and len(batches[-1]) == 1:
        tail = batches.pop()
        batches[-1] = np.concatenate([batches[-1], tail])
    return batches


def evaluate_loss(
    model: Network,
    x: np.ndarray,
    y: np.ndarray,
    loss_fn: LossFn,
    batch_size: int = 256,
) -> Tuple[float, float]:
    """Mean loss and accuracy in eval mode."""
    model.eval()
    total_loss, correct = 0.0, 0
    with no_grad():
        for start in range(0, len(x), batch_size):
            xb, yb = x[start:start + batch_size], y[start:start + batch_size]
            logits = model(Tensor(xb))
            total_loss += loss_fn(logits, yb).item() * len(yb)
            correct += int((logits.data.argmax(axis=1) == yb).sum())
    return total_loss / len(x), correct / len(x)


def _check_split(x: np.ndarray, y: np.ndarray, name: str) -> None:
    if len(x) != len(y):
        raise LengthMismatch(f"{name}: {len(x)} inputs but {len(y)} targets")
    if len(x) == 0:
        raise DataError(f"{name} set is empty")


def fit(
    model: Network,
    train_x: np.ndarray,
    train_y: np.ndarray,
    val_x: np.ndarray,
    val_y: np.ndarray,
    cfg: TrainConfig,
    seed: Optional[int] = None,
    metadata: Optional[Dict[str, Any]] = None,
) -> TrainResult:
    """Train until ``early_stop_patience`` epochs pass without validation improvement.

    Improvement means higher validation accuracy, or equal accuracy with lower
    validation loss. The best epoch's parameters are restored before returning.
    """
    _check_split(train_x, train_y, "training")
    _check_split(val_x, val_y, "validation")
    train_x = np.asarray(train_x, dtype=np.float64)
    val_x = np.asarray(val_x, dtype=np.float64)
    train_y = np.asarray(train_y, dtype=np.int64)
    val_y = np.asarray(val_y, dtype=np.int64)
    seed = root_seed(cfg.rng_seed if cfg.rng_seed is not None else seed)

    params = model.parameters()
    optimizer = optimizer_for(cfg.optimizer_kind, params, cfg.optimizer)
    scheduler = CosineWarmRestarts(optimizer, cfg.schedule) if cfg.schedule is not None else None
    loss_fn = loss_function(cfg)
    model.reseed_dropout(derive_seed(seed, "dropout"))

    history = History()
    best_acc, best_loss = -math.inf, math.inf
    best_state = model.state_dict()
    wait = 0
    for epoch in range(cfg.max_epochs):
        lr = optimizer.lr
        model.train()
        total_loss, correct = 0.0, 0
        batches = minibatches(len(train_x), cfg.batch_size, counter_rng(seed, epoch))
        for batch_index, idx in enumerate(batches):
            optimizer.zero_grad()
            logits = model(Tensor(train_x[idx]))
            loss = loss_fn(logits, train_y[idx])
            value = loss.item()
            if not math.isfinite(value):
                logger.error(
                    "non-finite loss at epoch %d batch %d (lr=%g, max |logit|=%g)",
                    epoch, batch_index, lr, float(np.nanmax(np.abs(logits.data))),
                )
                raise NonFiniteLoss(epoch, batch_index, value)
            loss.backward()
            if cfg.clip_max_norm is not None:
                clip_grad_norm(params, cfg.clip_max_norm)
            optimizer.step()
            total_loss += value * len(idx)
            correct += int((logits.data.argmax(axis=1) == train_y[idx]).sum())
            logger.debug("epoch %d batch %d loss %.6f", epoch, batch_index, value)

        val_loss, val_acc = evaluate_loss(model, val_x, val_y, loss_fn)
        record = EpochRecord(
            epoch=epoch,
            lr=lr,
            train_loss=total_loss / len(train_x),
            train_acc=correct / len(train_x),
            val_loss=val_loss,
            val_acc=val_acc,
        )
        history.records.append(record)
        logger.info(
            "epoch %3d lr %.2e train %.4f/%.3f val %.4f/%.3f",
            epoch, lr, record.train_loss, record.train_acc, val_loss, val_acc,
        )
        if scheduler is not None:
            scheduler.step()

        if val_acc > best_acc or (val_acc == best_acc and val_loss < best_loss):
            best_acc, best_loss = val_acc, val_loss
            best_state = model.state_dict()
            history.best_epoch = epoch
            wait = 0
        else:
            wait += 1
            if wait >= cfg.early_stop_patience:
                history.stopped_early = True
                logger.info("early stop at epoch %d; best epoch %d", epoch, history.best_epoch)
                break

    model.load_state_dict(best_state)
    model.eval()
    checkpoint = Checkpoint.from_model(
        model,
        epoch=history.best_epoch,
        best_val_acc=best_acc,
        best_val_loss=best_loss,
        seed=seed,
        epochs_run=len(history),
        config=cfg.model_dump(mode="json"),
        **(metadata or {}),
    )
    return TrainResult(model=model, checkpoint=checkpoint, history=history)


__all__ = [
    "HISTORY_COLUMNS",
    "EpochRecord",
    "History",
    "TrainResult",
    "loss_function",
    "minibatches",
    "evaluate_loss",
    "fit",
]
