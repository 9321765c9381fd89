"""Training loop: masked multi-label BCE over 1-flip neighborhoods.

Every neighbor of every walk state is an independent binary example
(label: does this flip cut the Hamming distance to the reference), so
the loss is plain binary cross-entropy summed over real neighbor slots
and averaged per slot.  Adam with per-epoch exponential learning-rate
decay, early stopping on validation loss, best-epoch weights exported in
the engine's container format together with a per-epoch metrics CSV.
"""
from __future__ import annotations

import copy
import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .container import write_container
from .dataset import (
    DatasetHeader,
    EncodedDataset,
    encode,
    query_ids,
    read_dataset,
    split_by_query,
)
from .errors import ConfigError, DataError, TrainError
from .network import MoveScorerNet

log = logging.getLogger("scorertrainer")


@dataclass(frozen=True)
class TrainConfig:
    d_model: int = 256
    n_heads: int = 4
    n_attn_layers: int = 2
    n_ffn_blocks: int = 10
    ffn_dim: int = 512
    dropout: float = 0.1
    lr: float = 2e-4
    lr_decay: float = 0.99  # multiplicative, applied after every epoch
    batch: int = 256
    max_epochs: int = 50
    patience: int = 5
    split: tuple[int, int, int] = (800, 100, 100)  # queries, in file order
    seed: int = 0
    pos_weight: float = 1.0  # BCE positive-class weight; 1 = unweighted
    device: str = "cpu"
    expect_model_hash: str | None = None

    def validate(self) -> None:
        if min(self.d_model, self.ffn_dim, self.n_attn_layers) < 1 or self.n_ffn_blocks < 0:
            raise ConfigError("architecture dims out of range")
        if self.n_heads < 1 or self.d_model % self.n_heads != 0:
            raise ConfigError(f"n_heads {self.n_heads} must divide d_model {self.d_model}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.lr <= 0 or not 0.0 < self.lr_decay <= 1.0:
            raise ConfigError("lr must be positive and lr_decay in (0, 1]")
        if min(self.batch, self.max_epochs, self.patience) < 1:
            raise ConfigError("batch, max_epochs and patience must be >= 1")
        if len(self.split) != 3:
            raise ConfigError(f"split must be three query counts, got {self.split!r}")
        if not self.pos_weight > 0:
            raise ConfigError(f"pos_weight must be positive, got {self.pos_weight}")


@dataclass(frozen=True)
class EpochMetrics:
    epoch: int  # 1-based
    train_loss: float
    val_loss: float
    val_top1: float  # argmax-is-reducing rate over states with a positive
    lr: float  # rate in effect during this epoch


@dataclass(eq=False)
class TrainReport:
    header: DatasetHeader
    metrics: list[EpochMetrics]
    best_epoch: int
    best_val_loss: float
    weights_path: Path
    metrics_path: Path
    net: MoveScorerNet = field(repr=False, default=None)


def _check_finite(value: float, where: str) -> None:
    if not math.isfinite(value):
        raise TrainError(f"non-finite loss {value!r} at {where}; aborting")


def _batch_tensors(enc: EncodedDataset, idx: np.ndarray, device: str):
    states = torch.from_numpy(enc.states[idx]).to(device)
    moves = torch.from_numpy(enc.moves[idx]).to(device)
    labels = torch.from_numpy(enc.labels[idx]).to(device)
    mask = torch.from_numpy(enc.mask[idx]).to(device)
    return states, moves, labels, mask


def _masked_bce(logits, labels, mask, pos_weight: float) -> torch.Tensor:
    pw = None
    if pos_weight != 1.0:
        pw = torch.as_tensor(pos_weight, dtype=logits.dtype, device=logits.device)
    per = nn.functional.binary_cross_entropy_with_logits(
        logits, labels, reduction="none", pos_weight=pw
    )
    return (per * mask).sum() / mask.sum()


@torch.no_grad()
def _evaluate(net, enc: EncodedDataset, batch: int, pos_weight: float, device: str):
    """Masked mean loss plus top-1 reducing rate over the whole split."""
    net.eval()
    loss_sum = 0.0
    slots = 0
    top1_hits = 0
    top1_states = 0
    for start in range(0, len(enc), batch):
        idx = np.arange(start, min(start + batch, len(enc)))
        states, moves, labels, mask = _batch_tensors(enc, idx, device)
        logits = net(states, moves)
        pw = None
        if pos_weight != 1.0:
            pw = torch.as_tensor(pos_weight, dtype=logits.dtype, device=device)
        per = nn.functional.binary_cross_entropy_with_logits(
            logits, labels, reduction="none", pos_weight=pw
        )
        loss_sum += float((per * mask).sum())
        slots += int(mask.sum())
        has_pos = (labels * mask).sum(dim=-1) > 0
        if bool(has_pos.any()):
            arg = logits.masked_fill(~mask, float("-inf")).argmax(dim=-1)
            picked = labels.gather(1, arg.unsqueeze(1)).squeeze(1) > 0.5
            top1_hits += int((picked & has_pos).sum())
            top1_states += int(has_pos.sum())
    top1 = top1_hits / top1_states if top1_states else float("nan")
    return loss_sum / slots, top1


def train(dataset_path, cfg: TrainConfig, out_dir) -> TrainReport:
    """Fit the scorer on a dataset file and export best-epoch weights.

    Writes ``weights.bin`` and ``metrics.csv`` into ``out_dir``.
    """
    cfg.validate()
    header, records = read_dataset(dataset_path)
    if cfg.expect_model_hash is not None and header.model_hash != cfg.expect_model_hash:
        raise DataError(
            f"dataset was generated for model {header.model_hash}, "
            f"expected {cfg.expect_model_hash}"
        )
    ids = query_ids(records)
    train_idx, val_idx, _ = split_by_query(ids, cfg.split)
    enc_train = encode(header, [records[i] for i in train_idx])
    enc_val = encode(header, [records[i] for i in val_idx])
    log.info(
        "training on %d states (%d queries), validating on %d states",
        len(enc_train), cfg.split[0], len(enc_val),
    )

    torch.manual_seed(cfg.seed)
    net = MoveScorerNet(
        num_tokens=header.num_tokens,
        d_model=cfg.d_model,
        n_heads=cfg.n_heads,
        n_attn_layers=cfg.n_attn_layers,
        n_ffn_blocks=cfg.n_ffn_blocks,
        ffn_dim=cfg.ffn_dim,
        dropout=cfg.dropout,
    ).to(cfg.device)
    opt = torch.optim.Adam(net.parameters(), lr=cfg.lr)
    sched = torch.optim.lr_scheduler.ExponentialLR(opt, gamma=cfg.lr_decay)
    shuffle_rng = np.random.default_rng(cfg.seed)

    metrics: list[EpochMetrics] = []
    best_val = math.inf
    best_epoch = 0
    best_state = None
    for epoch in range(1, cfg.max_epochs + 1):
        net.train()
        lr_now = opt.param_groups[0]["lr"]
        order = shuffle_rng.permutation(len(enc_train))
        loss_acc = 0.0
        batches = 0
        for start in range(0, len(order), cfg.batch):
            idx = order[start : start + cfg.batch]
            states, moves, labels, mask = _batch_tensors(enc_train, idx, cfg.device)
            opt.zero_grad()
            loss = _masked_bce(net(states, moves), labels, mask, cfg.pos_weight)
            value = loss.item()
            _check_finite(value, f"epoch {epoch}, batch {batches + 1}")
            loss.backward()
            opt.step()
            loss_acc += value
            batches += 1
        sched.step()
        val_loss, val_top1 = _evaluate(net, enc_val, cfg.batch, cfg.pos_weight, cfg.device)
        _check_finite(val_loss, f"epoch {epoch} validation")
        metrics.append(
            EpochMetrics(
                epoch=epoch,
                train_loss=loss_acc / max(batches, 1),
                val_loss=val_loss,
                val_top1=val_top1,
                lr=lr_now,
            )
        )
        log.info(
            "epoch %d: train %.4f, val %.4f, top1 %.3f", epoch,
            metrics[-1].train_loss, val_loss, val_top1,
        )
        if val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch
            best_state = copy.deepcopy(net.state_dict())
        elif epoch - best_epoch >= cfg.patience:
            log.info("no validation improvement for %d epochs, stopping", cfg.patience)
            break

    net.load_state_dict(best_state)
    net.eval()
    outdir = Path(out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    weights_path = outdir / "weights.bin"
    write_container(
        weights_path,
        d_model=cfg.d_model,
        n_heads=cfg.n_heads,
        n_attn_layers=cfg.n_attn_layers,
        n_ffn_blocks=cfg.n_ffn_blocks,
        ffn_dim=cfg.ffn_dim,
        vocab_offsets=header.vocab_offsets,
        tensors=net.export_tensors(),
        extra_meta={"model_hash": header.model_hash, "best_epoch": best_epoch},
    )
    metrics_path = outdir / "metrics.csv"
    with open(metrics_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_loss", "val_top1", "lr"])
        for row in metrics:
            writer.writerow(
                [row.epoch] + [f"{v:.10g}" for v in (row.train_loss, row.val_loss, row.val_top1, row.lr)]
            )
    return TrainReport(
        header=header,
        metrics=metrics,
        best_epoch=best_epoch,
        best_val_loss=best_val,
        weights_path=weights_path,
        metrics_path=metrics_path,
        net=net,
    )
