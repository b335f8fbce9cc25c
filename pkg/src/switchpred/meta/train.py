"""Log-loss training loop: sample a batch from the prior, step Adam, repeat.

Each training step draws a fresh batch of sources and sequences from the
configured switching-point prior, runs the recurrent model forward, and
updates parameters with Adam on the exact BPTT gradients of the mean log
loss. Everything is keyed off the config seed: stream 0 initializes the
parameters, stream 1 + k drives the batch at step k, so a run is
bit-reproducible on a given platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from typing import Iterable

import numpy as np

from ..core import split_stream
from ..sources import PriorSpec, sample_sequence, sample_source
from .model import (
    RecurrentModel,
    backward_batch,
    forward_batch,
    init_model,
)

__all__ = [
    "TrainingConfig",
    "AdamState",
    "TrainingDivergedError",
    "init_adam",
    "adam_step",
    "clip_gradients",
    "sample_batch",
    "train",
]


class TrainingDivergedError(RuntimeError):
    """Raised when the training loss stops being finite."""

    def __init__(self, step: int, loss: float):
        super().__init__(f"training loss became non-finite at step {step}: {loss}")
        self.step = step
        self.loss = loss


@dataclass(frozen=True)
class TrainingConfig:
    """Full recipe for one training run.

    Defaults are desk-scale: a 32-unit gated cell with two 32-unit read-out
    layers, batches of 32 length-32 sequences, 20k Adam steps. Minutes on one
    CPU core.
    """

    prior: PriorSpec
    seq_len: int = 32
    batch_size: int = 32
    steps: int = 20_000
    learning_rate: float = 1e-3
    adam_betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    grad_clip_norm: float = 1.0
    seed: int = 0
    arch: str = "lstm"
    hidden_size: int = 32
    readout_sizes: tuple[int, ...] = (32, 32)

    def __post_init__(self):
        object.__setattr__(self, "adam_betas", tuple(self.adam_betas))
        object.__setattr__(self, "readout_sizes", tuple(self.readout_sizes))
        if self.seq_len < 1 or self.batch_size < 1:
            raise ValueError("seq_len and batch_size must be positive")
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if self.learning_rate <= 0 or self.adam_eps <= 0:
            raise ValueError("learning_rate and adam_eps must be positive")
        if not all(0.0 <= b < 1.0 for b in self.adam_betas):
            raise ValueError("adam betas must lie in [0, 1)")
        if self.grad_clip_norm <= 0:
            raise ValueError("grad_clip_norm must be positive")
        if self.prior.n != self.seq_len:
            raise ValueError(
                f"prior covers n={self.prior.n} but seq_len={self.seq_len}"
            )

    def to_dict(self) -> dict:
        out = asdict(self)
        out["prior"] = {
            k: v for k, v in asdict(self.prior).items() if v is not None
        }
        out["adam_betas"] = list(self.adam_betas)
        out["readout_sizes"] = list(self.readout_sizes)
        return out


@dataclass
class AdamState:
    """First/second moment accumulators matching the parameter tensors."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0


def init_adam(params: dict[str, np.ndarray]) -> AdamState:
    return AdamState(
        m={k: np.zeros_like(p) for k, p in params.items()},
        v={k: np.zeros_like(p) for k, p in params.items()},
    )


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Scale gradients in place so their global L2 norm is at most max_norm.

    Returns the pre-clip norm.
    """
    total = math.sqrt(sum(float((g * g).sum()) for g in grads.values()))
    if max_norm > 0 and total > max_norm:
        scale = max_norm / total
        for g in grads.values():
            g *= scale
    return total


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    learning_rate: float,
    betas: tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
) -> tuple[dict[str, np.ndarray], AdamState]:
    """One bias-corrected Adam update, mutating params and state in place."""
    b1, b2 = betas
    state.step += 1
    bc1 = 1.0 - b1 ** state.step
    bc2 = 1.0 - b2 ** state.step
    for k, g in grads.items():
        m = state.m[k]
        v = state.v[k]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        params[k] -= learning_rate * (m / bc1) / (np.sqrt(v / bc2) + eps)
    return params, state


def sample_batch(prior: PriorSpec, batch_size: int, rng) -> np.ndarray:
    """Draw a (batch, n) array of symbols, one fresh source per row."""
    out = np.empty((batch_size, prior.n), dtype=np.int64)
    for b in range(batch_size):
        source = sample_source(prior, rng)
        out[b] = sample_sequence(source, rng).as_array()
    return out


def train(
    config: TrainingConfig,
    progress_every: int = 0,
) -> tuple[RecurrentModel, list[tuple[int, float]]]:
    """Run the full loop; returns the final model and the per-step loss curve.

    The curve holds (step index, batch mean loss in nats). steps = 0 returns
    the freshly initialized model untouched.
    """
    model = init_model(
        config.arch, config.hidden_size, config.readout_sizes, split_stream(config.seed, 0)
    )
    adam = init_adam(model.params)
    curve: list[tuple[int, float]] = []
    for step in range(config.steps):
        rng = split_stream(config.seed, 1 + step)
        batch = sample_batch(config.prior, config.batch_size, rng)
        probs, cache = forward_batch(model, batch)
        p_obs = np.where(batch == 1, probs, 1.0 - probs)
        loss = float(-np.mean(np.log(p_obs)))
        if not math.isfinite(loss):
            raise TrainingDivergedError(step, loss)
        grads = backward_batch(model, cache, batch)
        clip_gradients(grads, config.grad_clip_norm)
        adam_step(
            model.params,
            grads,
            adam,
            config.learning_rate,
            config.adam_betas,
            config.adam_eps,
        )
        curve.append((step, loss))
        if progress_every and (step + 1) % progress_every == 0:
            recent = [l for _, l in curve[-progress_every:]]
            print(
                f"step {step + 1}/{config.steps}  mean loss {np.mean(recent):.4f} nats",
                flush=True,
            )
    return model, curve


def write_curve_csv(fh, curve: Iterable[tuple[int, float]], header_comments=()) -> None:
    """Training-curve CSV: step, mean_loss_nats."""
    for line in header_comments:
        fh.write(f"# {line}\n")
    fh.write("step,mean_loss_nats\n")
    for step, loss in curve:
        fh.write(f"{step},{loss!r}\n")
