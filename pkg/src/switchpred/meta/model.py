"""Recurrent next-bit predictors built directly on numpy.

Two cell types: a plain tanh recurrence ("rnn") and a four-gate memory cell
("lstm"), each followed by a fully connected tanh read-out stack and a single
sigmoid output unit giving Pr(next symbol = 1). The input at step t is the
one-hot of the previous symbol (a zero vector at t = 1, so the first
prediction depends only on the initial state).

Forward passes cache every activation needed by the exact
backpropagation-through-time gradients in :func:`backward_batch`. All arrays
are float64.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..core import BinarySequence, RngStream

__all__ = [
    "RecurrentModel",
    "NonFiniteActivationError",
    "init_model",
    "forward",
    "forward_batch",
    "backward",
    "backward_batch",
    "log_loss",
    "save_model",
    "load_model",
]

_ARCHS = ("rnn", "lstm")
MODEL_FILE_VERSION = 1
_IN_DIM = 2  # one-hot of the previous binary symbol


class NonFiniteActivationError(RuntimeError):
    """Raised when a forward pass produces a NaN or infinite activation."""

    def __init__(self, step: int):
        super().__init__(f"non-finite activation at sequence step {step}")
        self.step = step


@dataclass
class RecurrentModel:
    """Architecture descriptor plus named parameter tensors."""

    arch: str
    hidden_size: int
    readout_sizes: tuple[int, ...]
    params: dict[str, np.ndarray]
    version: int = MODEL_FILE_VERSION

    def __post_init__(self):
        if self.arch not in _ARCHS:
            raise ValueError(f"arch must be one of {_ARCHS}, got {self.arch!r}")
        self.readout_sizes = tuple(int(s) for s in self.readout_sizes)
        for name, value in self.params.items():
            if not np.isfinite(value).all():
                raise ValueError(f"parameter {name!r} contains non-finite entries")

    def param_names(self) -> list[str]:
        return list(self.params)

    def copy(self) -> "RecurrentModel":
        return RecurrentModel(
            self.arch,
            self.hidden_size,
            self.readout_sizes,
            {k: v.copy() for k, v in self.params.items()},
            self.version,
        )


def _glorot(gen: np.random.Generator, shape: tuple[int, int]) -> np.ndarray:
    limit = math.sqrt(6.0 / (shape[0] + shape[1]))
    return gen.uniform(-limit, limit, size=shape)


def _orthogonal(gen: np.random.Generator, n: int) -> np.ndarray:
    a = gen.standard_normal((n, n))
    q, r = np.linalg.qr(a)
    return q * np.sign(np.diag(r))  # sign-fixed so the draw is unique


def init_model(
    arch: str,
    hidden_size: int,
    readout_sizes: Sequence[int],
    rng: RngStream,
) -> RecurrentModel:
    """Fresh model: Glorot-uniform input/readout weights, orthogonal recurrent
    blocks, zero biases except the forget gate's, which starts at 1."""
    if hidden_size < 1:
        raise ValueError("hidden_size must be >= 1")
    gen = rng.gen
    h = hidden_size
    gates = 4 if arch == "lstm" else 1
    params: dict[str, np.ndarray] = {}
    params["w_in"] = np.concatenate(
        [_glorot(gen, (_IN_DIM, h)) for _ in range(gates)], axis=1
    )
    params["w_rec"] = np.concatenate(
        [_orthogonal(gen, h) for _ in range(gates)], axis=1
    )
    b = np.zeros(gates * h)
    if arch == "lstm":
        b[h : 2 * h] = 1.0  # forget gate opens high
    params["b_rec"] = b
    prev = h
    for i, size in enumerate(readout_sizes):
        params[f"w_ro{i}"] = _glorot(gen, (prev, size))
        params[f"b_ro{i}"] = np.zeros(size)
        prev = size
    params["w_out"] = _glorot(gen, (prev, 1))
    params["b_out"] = np.zeros(1)
    return RecurrentModel(arch, hidden_size, tuple(readout_sizes), params)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def cell_step(
    model: RecurrentModel,
    inp: np.ndarray,
    h: np.ndarray,
    c: np.ndarray | None,
) -> tuple[np.ndarray, np.ndarray | None, dict]:
    """One recurrent step on a (B, in) input; returns (h, c, step cache)."""
    p = model.params
    z = inp @ p["w_in"] + h @ p["w_rec"] + p["b_rec"]
    if model.arch == "lstm":
        hs = model.hidden_size
        i = _sigmoid(z[:, :hs])
        f = _sigmoid(z[:, hs : 2 * hs])
        g = np.tanh(z[:, 2 * hs : 3 * hs])
        o = _sigmoid(z[:, 3 * hs :])
        c_new = f * c + i * g
        tc = np.tanh(c_new)
        h_new = o * tc
        cache = {"inp": inp, "h_prev": h, "c_prev": c, "i": i, "f": f, "g": g,
                 "o": o, "tc": tc}
        return h_new, c_new, cache
    h_new = np.tanh(z)
    cache = {"inp": inp, "h_prev": h, "h": h_new}
    return h_new, None, cache


def readout(model: RecurrentModel, h: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Read-out stack on (B, H) hidden states; returns (p1 (B,), activations)."""
    p = model.params
    acts = []
    a = h
    for i in range(len(model.readout_sizes)):
        a = np.tanh(a @ p[f"w_ro{i}"] + p[f"b_ro{i}"])
        acts.append(a)
    logit = a @ p["w_out"] + p["b_out"]
    return _sigmoid(logit[:, 0]), acts


def forward_batch(
    model: RecurrentModel, x: np.ndarray
) -> tuple[np.ndarray, dict]:
    """Run the model over a (B, T) batch of binary symbols.

    Returns per-step probabilities of a one, shape (B, T), where column t is
    predicted before symbol x[:, t] is revealed, plus the activation cache for
    :func:`backward_batch`.
    """
    x = np.asarray(x)
    if x.ndim != 2:
        raise ValueError("expected a (batch, time) array of symbols")
    bsz, tlen = x.shape
    h = np.zeros((bsz, model.hidden_size))
    c = np.zeros((bsz, model.hidden_size)) if model.arch == "lstm" else None
    probs = np.empty((bsz, tlen))
    steps = []
    ro_acts = []
    for t in range(tlen):
        if t == 0:
            inp = np.zeros((bsz, _IN_DIM))
        else:
            prev = x[:, t - 1]
            inp = np.zeros((bsz, _IN_DIM))
            inp[np.arange(bsz), prev] = 1.0
        h, c, step_cache = cell_step(model, inp, h, c)
        if not np.isfinite(h).all():
            raise NonFiniteActivationError(t + 1)
        p1, acts = readout(model, h)
        probs[:, t] = p1
        steps.append(step_cache)
        ro_acts.append(acts)
    cache = {"steps": steps, "ro_acts": ro_acts, "probs": probs, "x": x}
    return probs, cache


def forward(model: RecurrentModel, x: BinarySequence) -> tuple[np.ndarray, dict]:
    """Single-sequence forward pass; probabilities indexed 0-based over steps."""
    arr = np.asarray(x.as_array(), dtype=np.int64)[None, :]
    probs, cache = forward_batch(model, arr)
    return probs[0], cache


def log_loss(probs: np.ndarray, x: BinarySequence | np.ndarray) -> float:
    """Mean negative log likelihood in nats of symbols x under per-step probs."""
    sym = x.as_array() if isinstance(x, BinarySequence) else np.asarray(x)
    probs = np.asarray(probs)
    if probs.shape != sym.shape:
        raise ValueError(f"shape mismatch: probs {probs.shape} vs symbols {sym.shape}")
    p_obs = np.where(sym == 1, probs, 1.0 - probs)
    return float(-np.mean(np.log(p_obs)))


def backward_batch(model: RecurrentModel, cache: dict, x: np.ndarray) -> dict[str, np.ndarray]:
    """Exact gradients of the batch-mean log loss w.r.t. every parameter."""
    x = np.asarray(x)
    if x.shape != cache["x"].shape or not np.array_equal(x, cache["x"]):
        raise ValueError("cache was produced for a different batch")
    p = model.params
    bsz, tlen = x.shape
    hs = model.hidden_size
    probs = cache["probs"]
    grads = {k: np.zeros_like(v) for k, v in p.items()}
    dh_next = np.zeros((bsz, hs))
    dc_next = np.zeros((bsz, hs)) if model.arch == "lstm" else None
    scale = 1.0 / (bsz * tlen)
    n_ro = len(model.readout_sizes)
    for t in range(tlen - 1, -1, -1):
        step = cache["steps"][t]
        acts = cache["ro_acts"][t]
        # output unit: d(-log p(x)) / dlogit = p - y, averaged over batch and time
        dlogit = ((probs[:, t] - x[:, t]) * scale)[:, None]
        top = acts[-1] if n_ro else (step["h"] if model.arch == "rnn" else step["o"] * step["tc"])
        grads["w_out"] += top.T @ dlogit
        grads["b_out"] += dlogit.sum(axis=0)
        da = dlogit @ p["w_out"].T
        for i in range(n_ro - 1, -1, -1):
            dz = da * (1.0 - acts[i] * acts[i])
            below = acts[i - 1] if i > 0 else (
                step["h"] if model.arch == "rnn" else step["o"] * step["tc"]
            )
            grads[f"w_ro{i}"] += below.T @ dz
            grads[f"b_ro{i}"] += dz.sum(axis=0)
            da = dz @ p[f"w_ro{i}"].T
        dh = da + dh_next
        if model.arch == "lstm":
            i_g, f_g, g_g, o_g = step["i"], step["f"], step["g"], step["o"]
            tc = step["tc"]
            do = dh * tc
            dc = dh * o_g * (1.0 - tc * tc) + dc_next
            di = dc * g_g
            df = dc * step["c_prev"]
            dg = dc * i_g
            dz = np.concatenate(
                [
                    di * i_g * (1.0 - i_g),
                    df * f_g * (1.0 - f_g),
                    dg * (1.0 - g_g * g_g),
                    do * o_g * (1.0 - o_g),
                ],
                axis=1,
            )
            dc_next = dc * f_g
        else:
            dz = dh * (1.0 - step["h"] * step["h"])
        grads["w_in"] += step["inp"].T @ dz
        grads["w_rec"] += step["h_prev"].T @ dz
        grads["b_rec"] += dz.sum(axis=0)
        dh_next = dz @ p["w_rec"].T
    return grads


def backward(model: RecurrentModel, cache: dict, x: BinarySequence) -> dict[str, np.ndarray]:
    """Single-sequence gradients of :func:`log_loss` (mean over steps)."""
    arr = np.asarray(x.as_array(), dtype=np.int64)[None, :]
    return backward_batch(model, cache, arr)


# ---------------------------------------------------------------------------
# Serialization: versioned JSON with explicit shapes


def save_model(
    model: RecurrentModel,
    path: str | os.PathLike,
    training_config: dict | None = None,
    root_seed: int | None = None,
) -> None:
    doc = {
        "version": model.version,
        "arch": model.arch,
        "hidden_size": model.hidden_size,
        "readout_sizes": list(model.readout_sizes),
        "parameters": {
            name: {"shape": list(value.shape), "data": value.ravel().tolist()}
            for name, value in model.params.items()
        },
        "training_config": training_config,
        "root_seed": root_seed,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_model(path: str | os.PathLike) -> RecurrentModel:
    with open(path) as fh:
        doc = json.load(fh)
    version = doc.get("version")
    if version != MODEL_FILE_VERSION:
        raise ValueError(f"unsupported model file version {version!r}")
    params = {}
    for name, entry in doc["parameters"].items():
        arr = np.asarray(entry["data"], dtype=float).reshape(entry["shape"])
        params[name] = arr
    return RecurrentModel(
        doc["arch"],
        int(doc["hidden_size"]),
        tuple(doc["readout_sizes"]),
        params,
        version,
    )
