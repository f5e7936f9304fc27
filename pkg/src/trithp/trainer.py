"""Adam-based maximum-likelihood training with early stopping, gradient
clipping, checkpointing, and seeded reproducibility."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .attention import ModelConfig, TriThpModel
from .data_io import Dataset, make_batches
from .evaluator import evaluate
from .likelihood import MC, NI, objective

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 50
    batch_size: int = 16
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    method: str = MC
    mc_samples: int = 20
    grad_clip: float = 5.0
    patience: int = 10
    seed: int = 0
    dropout: float = 0.1
    # model dims
    Z: int = 16
    n_layers: int = 2
    n_heads: int = 2
    Zk: int = 8
    Zv: int = 8
    Zh: int = 32
    # data paths (used by the CLI)
    train_path: str = ""
    dev_path: str = ""
    test_path: str = ""
    normalize_times: bool = False
    freeze: list = field(default_factory=list)

    def __post_init__(self):
        if min(self.lr, self.beta1, self.beta2, self.eps) <= 0 or self.batch_size < 1:
            raise ValueError("learning rate, Adam betas/eps must be positive; batch_size >= 1")
        if self.method not in (MC, NI):
            raise ValueError(f"method must be 'mc' or 'ni', got {self.method!r}")

    def model_config(self, K):
        return ModelConfig(K=K, Z=self.Z, n_layers=self.n_layers,
                           n_heads=self.n_heads, Zk=self.Zk, Zv=self.Zv,
                           Zh=self.Zh, dropout=self.dropout)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls(**json.load(fh))


class AdamState:
    """Per-parameter first/second moment buffers plus the shared step count."""

    def __init__(self, params):
        self.m = {n: np.zeros_like(p.data) for n, p in params.items()}
        self.v = {n: np.zeros_like(p.data) for n, p in params.items()}
        self.t = 0


def adam_step(params, state: AdamState, lr, beta1=0.9, beta2=0.999, eps=1e-8,
              frozen=()):
    """One standard bias-corrected Adam update over a dict of parameters.
    Parameters with no grad contribute zero gradient; `frozen` names are
    left untouched entirely."""
    state.t += 1
    t = state.t
    for name, p in params.items():
        if name in frozen:
            continue
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient in {name}")
        state.m[name] = beta1 * state.m[name] + (1 - beta1) * g
        state.v[name] = beta2 * state.v[name] + (1 - beta2) * g * g
        m_hat = state.m[name] / (1 - beta1 ** t)
        v_hat = state.v[name] / (1 - beta2 ** t)
        p.data = p.data - lr * m_hat / (np.sqrt(v_hat) + eps)


def clip_global_norm(params, max_norm, frozen=()):
    total = 0.0
    grads = [p.grad for n, p in params.items()
             if n not in frozen and p.grad is not None]
    for g in grads:
        total += float((g * g).sum())
    norm = np.sqrt(total)
    if norm > max_norm:
        scale = max_norm / norm
        for g in grads:
            g *= scale
    return norm


@dataclass
class EpochRecord:
    epoch: int
    objective: float
    dev_ll: float
    dev_acc: float
    dev_rmse: float


def _snapshot(model):
    return {n: p.data.copy() for n, p in model.named_parameters().items()}


def _restore(model, snap):
    for n, p in model.named_parameters().items():
        p.data = snap[n].copy()


def train(model: TriThpModel, train_ds: Dataset, dev_ds: Dataset,
          config: TrainConfig, out_dir=None):
    """Run the training loop; returns (model-at-best-dev, history).

    Fully deterministic given (config, data): batch order, MC integration
    points, and dropout masks all derive from config.seed.
    """
    params = model.named_parameters()
    frozen = set(config.freeze)
    state = AdamState(params)
    history = []
    best_ll = -np.inf
    best_snap = _snapshot(model)
    bad_epochs = 0

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)

    for epoch in range(config.epochs):
        batches = make_batches(train_ds, config.batch_size,
                               shuffle_seed=(config.seed, epoch))
        epoch_obj = 0.0
        for b_idx, batch in enumerate(batches):
            mc_rng = np.random.default_rng((config.seed, epoch, b_idx, 0))
            drop_rng = np.random.default_rng((config.seed, epoch, b_idx, 1))
            model.zero_grad()
            try:
                loss = objective(model, batch.sequences(train_ds.K),
                                 method=config.method, O=config.mc_samples,
                                 rng=mc_rng, training=True, forward_rng=drop_rng)
            except ArithmeticError as e:
                log.error("epoch %d: objective failed (%s); restoring best checkpoint", epoch, e)
                _restore(model, best_snap)
                return model, history
            if not np.isfinite(loss.data):
                log.error("epoch %d: objective is non-finite; restoring best checkpoint", epoch)
                _restore(model, best_snap)
                return model, history
            epoch_obj += float(loss.data)
            loss.backward()
            clip_global_norm(params, config.grad_clip, frozen)
            adam_step(params, state, config.lr, config.beta1, config.beta2,
                      config.eps, frozen)

        report = evaluate(model, dev_ds, method=NI)
        history.append(EpochRecord(epoch, epoch_obj, report.ll_per_event,
                                   report.accuracy, report.rmse))
        log.info("epoch %d: objective %.4f dev ll/event %.4f acc %.3f rmse %.4f",
                 epoch, epoch_obj, report.ll_per_event, report.accuracy, report.rmse)

        if report.ll_per_event > best_ll:
            best_ll = report.ll_per_event
            best_snap = _snapshot(model)
            bad_epochs = 0
            if out_dir is not None:
                model.save(out_dir / "checkpoint.json")
        else:
            bad_epochs += 1
            if bad_epochs >= config.patience:
                log.info("early stop at epoch %d (patience %d)", epoch, config.patience)
                break

    _restore(model, best_snap)
    if out_dir is not None:
        model.save(out_dir / "checkpoint.json")
        write_history(history, out_dir / "history.csv")
    return model, history


def write_history(history, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "objective", "dev_ll", "dev_acc", "dev_rmse"])
        for rec in history:
            w.writerow([rec.epoch, repr(rec.objective), repr(rec.dev_ll),
                        repr(rec.dev_acc), repr(rec.dev_rmse)])
