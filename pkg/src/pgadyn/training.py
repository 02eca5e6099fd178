"""Teacher-forced training loop: window sampling, AdamW, metrics logging."""

import csv
import time
from dataclasses import dataclass

import numpy as np

from . import metrics as MT
from . import tensor as T
from .model import teacher_forcing_loss

LOG_COLUMNS = (
    "epoch", "split", "loss", "rmse_10", "rmse_free", "rmse_wall",
    "rmse_obj", "wall_clock_s",
)


class TrainingDiverged(RuntimeError):
    """Loss went non-finite; message carries step, lr and gradient norm."""


@dataclass
class TrainConfig:
    epochs: int = 1
    lr: float = 5e-4
    weight_decay: float = -1.0  # negative = variant default
    batch: int = 32
    seed: int = 0
    log_path: str = ""
    rollout_every: int = 0  # epochs between rollout metrics; 0 = never
    rollout_horizon: int = 10
    grad_clip: float = 0.0  # 0 = off
    final_lr: float = -1.0  # >= 0 turns on cosine decay from lr to this
    time_budget_s: float = 0.0  # 0 = no budget; checked between epochs


def default_weight_decay(variant):
    return 3e-6 if variant == "mlp" else 1e-7


def epoch_lr(cfg, epoch):
    """Learning rate for a 1-based epoch: constant, or cosine-decayed."""
    if cfg.final_lr < 0 or cfg.epochs <= 1:
        return cfg.lr
    frac = (epoch - 1) / (cfg.epochs - 1)
    return cfg.final_lr + 0.5 * (cfg.lr - cfg.final_lr) * (1.0 + np.cos(np.pi * frac))


def valid_windows(episodes, seq_len):
    """(episode, start) pairs whose S+1-frame window fits inside the episode."""
    pairs = []
    for e, ep in enumerate(episodes):
        for start in range(ep.states.shape[0] - seq_len):
            pairs.append((e, start))
    return pairs


def window_sampler(episodes, seq_len, batch, rng):
    """One shuffled epoch of (batch, S+1, K, 6) window stacks."""
    pairs = valid_windows(episodes, seq_len)
    if not pairs:
        raise ValueError(f"no episode is longer than {seq_len} frames")
    order = rng.permutation(len(pairs))
    for lo in range(0, len(pairs), batch):
        chunk = [pairs[i] for i in order[lo : lo + batch]]
        yield np.stack(
            [episodes[e].states[start : start + seq_len + 1] for e, start in chunk]
        )


def grad_norm(store):
    total = 0.0
    for p in store.params.values():
        if p.grad is not None:
            total += float(np.sum(p.grad * p.grad))
    return np.sqrt(total)


def clip_grads(store, max_norm):
    norm = grad_norm(store)
    if norm > max_norm:
        scale = max_norm / norm
        for p in store.params.values():
            if p.grad is not None:
                p.grad *= scale
    return norm


def _epoch_loss(model, episodes, cfg, rng):
    total, n = 0.0, 0
    for windows in window_sampler(episodes, model.config.seq_len, cfg.batch, rng):
        total += float(teacher_forcing_loss(model, windows).data) * len(windows)
        n += len(windows)
    return total / n


def train(model, episodes, cfg, val_episodes=None, sim_config=None):
    """Optimize in place; returns the per-epoch metrics rows.

    Rollout metrics need val_episodes and sim_config and are computed every
    cfg.rollout_every epochs on the validation episodes.
    """
    wd = cfg.weight_decay
    if wd < 0:
        wd = default_weight_decay(model.config.variant)
    rng = np.random.default_rng(cfg.seed)
    history = []
    step = 0
    t0 = time.monotonic()
    for epoch in range(1, cfg.epochs + 1):
        lr = epoch_lr(cfg, epoch)
        train_loss, n_seen = 0.0, 0
        for windows in window_sampler(episodes, model.config.seq_len, cfg.batch, rng):
            loss = teacher_forcing_loss(model, windows)
            value = float(loss.data)
            model.store.zero_grads()
            T.backward(loss)
            if not np.isfinite(value):
                raise TrainingDiverged(
                    f"non-finite loss at step {step}: lr={lr}, "
                    f"grad_norm={grad_norm(model.store):.3e}"
                )
            if cfg.grad_clip > 0:
                clip_grads(model.store, cfg.grad_clip)
            T.adamw_step(model.store, lr, wd)
            train_loss += value * len(windows)
            n_seen += len(windows)
            step += 1
        rows = [
            {
                "epoch": epoch,
                "split": "train",
                "loss": train_loss / n_seen,
                "rmse_10": None, "rmse_free": None,
                "rmse_wall": None, "rmse_obj": None,
                "wall_clock_s": time.monotonic() - t0,
            }
        ]
        if val_episodes:
            row = {
                "epoch": epoch,
                "split": "val",
                "loss": _epoch_loss(model, val_episodes, cfg, rng),
                "rmse_10": None, "rmse_free": None,
                "rmse_wall": None, "rmse_obj": None,
                "wall_clock_s": time.monotonic() - t0,
            }
            if (
                cfg.rollout_every
                and sim_config is not None
                and epoch % cfg.rollout_every == 0
            ):
                eval_rows = MT.evaluate_rollouts(
                    model, val_episodes, sim_config,
                    horizon=cfg.rollout_horizon, per_type=True,
                )
                by_type = {r["frame_type"]: r["rmse"] for r in eval_rows}
                row["rmse_10"] = by_type["all"]
                row["rmse_free"] = by_type["free"]
                row["rmse_wall"] = by_type["object_wall"]
                row["rmse_obj"] = by_type["object_object"]
            rows.append(row)
        history.extend(rows)
        if cfg.time_budget_s and time.monotonic() - t0 > cfg.time_budget_s:
            break
    if cfg.log_path:
        write_log(cfg.log_path, history)
    return history


def write_log(path, history):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=LOG_COLUMNS)
        writer.writeheader()
        for row in history:
            writer.writerow({k: ("" if row[k] is None else row[k]) for k in LOG_COLUMNS})


def read_log(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
