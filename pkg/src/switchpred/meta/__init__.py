"""Memory-based meta-learner: recurrent models trained by log loss on prior draws."""

from __future__ import annotations

import math

import numpy as np

from ..predictors import SequentialPredictor
from .model import (
    MODEL_FILE_VERSION,
    NonFiniteActivationError,
    RecurrentModel,
    backward,
    backward_batch,
    cell_step,
    forward,
    forward_batch,
    init_model,
    load_model,
    log_loss,
    readout,
    save_model,
)
from .train import (
    AdamState,
    TrainingConfig,
    TrainingDivergedError,
    adam_step,
    clip_gradients,
    init_adam,
    sample_batch,
    train,
    write_curve_csv,
)

__all__ = [
    "MODEL_FILE_VERSION",
    "NonFiniteActivationError",
    "RecurrentModel",
    "RecurrentPredictor",
    "AdamState",
    "TrainingConfig",
    "TrainingDivergedError",
    "adam_step",
    "as_predictor",
    "backward",
    "backward_batch",
    "cell_step",
    "clip_gradients",
    "forward",
    "forward_batch",
    "init_adam",
    "init_model",
    "load_model",
    "log_loss",
    "readout",
    "sample_batch",
    "save_model",
    "train",
    "write_curve_csv",
]

_P_MIN = 1e-12
_P_MAX = 1.0 - 1e-12


class RecurrentPredictor(SequentialPredictor):
    """Sequential-predictor wrapper around a trained recurrent model.

    State is the recurrent activations, so evaluation length is unbounded by
    the training length. The log marginal accumulates the log of exactly the
    (clamped) probabilities served by ``predict``, keeping the chain rule
    exact by construction.
    """

    def __init__(self, model: RecurrentModel):
        self._model = model
        self.reset()

    def reset(self) -> None:
        model = self._model
        h = np.zeros((1, model.hidden_size))
        c = np.zeros((1, model.hidden_size)) if model.arch == "lstm" else None
        start = np.zeros((1, 2))  # first prediction sees no symbol
        self._h, self._c, _ = cell_step(model, start, h, c)
        self._refresh_p1()
        self._lm = 0.0

    def _refresh_p1(self) -> None:
        p1, _ = readout(self._model, self._h)
        p = float(p1[0])
        self._p1 = _P_MIN if p < _P_MIN else (_P_MAX if p > _P_MAX else p)

    def predict(self) -> float:
        return self._p1

    def update(self, symbol: int) -> None:
        self._lm += math.log(self._p1 if symbol == 1 else 1.0 - self._p1)
        inp = np.zeros((1, 2))
        inp[0, symbol] = 1.0
        self._h, self._c, _ = cell_step(self._model, inp, self._h, self._c)
        self._refresh_p1()

    def log_marginal(self) -> float:
        return self._lm


def as_predictor(model: RecurrentModel) -> RecurrentPredictor:
    """Wrap a model in the predict/update/log_marginal/reset contract."""
    return RecurrentPredictor(model)
