"""Sequence benefit regressor: LSTM + attention + linear head.

Exact reverse-mode gradients, a finite-difference oracle, and Adam updates.
The per-tick kernels live in a compiled Cython module when available, with a
pure-NumPy twin as fallback; selection happens at import time and can be
forced with EARLYBENEFIT_BACKEND=cython|python|auto.

All arithmetic is float64. Forward passes start from zero hidden/cell state;
attention uses the cell state at the current last tick as the query vector,
so a prefix of length t is scored exactly as the stream engine scores tick t.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, NumericError
from .params import (ACTIVATIONS, AdamState, ModelConfig, ModelParams,
                     adam_step, init_params)

__all__ = [
    "ModelConfig", "ModelParams", "AdamState", "ForwardTrace", "RegressorModel",
    "init_params", "adam_step", "lstm_forward", "attention", "predict_benefit",
    "last_state_benefit", "full_trace", "loss", "backward", "finite_diff_grad",
    "backend_name", "get_backend", "load_backend",
]


def load_backend(name: str):
    """Import a kernel backend by name ('python' or 'cython')."""
    if name == "python":
        from . import _backend_py
        return _backend_py
    if name == "cython":
        from . import _backend_cy  # type: ignore[attr-defined]
        return _backend_cy
    raise ConfigError(f"unknown backend {name!r}")


def _select_backend():
    requested = os.environ.get("EARLYBENEFIT_BACKEND", "auto").lower()
    if requested == "auto":
        try:
            return load_backend("cython")
        except ImportError:
            return load_backend("python")
    return load_backend(requested)


_K = _select_backend()


def backend_name() -> str:
    return _K.NAME


def get_backend():
    return _K


@dataclass(frozen=True)
class ForwardTrace:
    """Everything one forward pass produced (kept for backward and export)."""

    hiddens: np.ndarray    # (T, H)
    cells: np.ndarray      # (T, H)
    gates: np.ndarray      # (T, 4H) post-activation [i, f, o, g]
    alpha: np.ndarray      # (T,)
    context: np.ndarray    # (H,)
    h_attn: np.ndarray     # (H,)
    bhat: float


@dataclass(frozen=True)
class RegressorModel:
    """One per-class benefit regressor: which class it scores plus its weights."""

    model_class: int
    params: ModelParams
    seed: int = 0

    @property
    def config(self) -> ModelConfig:
        return self.params.config


def _check_prefix(config: ModelConfig, prefix) -> np.ndarray:
    X = np.ascontiguousarray(prefix, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2 or X.shape[1] != config.input_dim:
        raise ValueError(
            f"prefix shape {np.shape(prefix)} does not match input_dim={config.input_dim}")
    if X.shape[0] < 1:
        raise ValueError("prefix must contain at least one observation")
    if not np.isfinite(X).all():
        raise ValueError("prefix contains non-finite values")
    return X


def lstm_forward(params: ModelParams, prefix):
    """All hidden and cell states of the recurrence over the prefix."""
    X = _check_prefix(params.config, prefix)
    HS, CS, _ = _K.forward_seq(params.W, params.U, params.b, X)
    return HS, CS


def attention(hiddens, last_cell, Wa, activation: str = "tanh"):
    """Softmax attention over hidden states queried by the cell state.

    Returns (h_attn, alpha). Standalone form of the attention stage; the
    linear head is not applied.
    """
    HS = np.ascontiguousarray(hiddens, dtype=np.float64)
    c = np.ascontiguousarray(last_cell, dtype=np.float64)
    Wa = np.ascontiguousarray(Wa, dtype=np.float64)
    if HS.ndim != 2 or c.shape != (HS.shape[1],) or Wa.shape != (HS.shape[1], 2 * HS.shape[1]):
        raise ValueError("inconsistent attention shapes")
    act = ACTIVATIONS[activation]
    H = HS.shape[1]
    _, alpha, _, _, h_attn = _K.attn_head(HS, c, Wa, np.zeros(H), 0.0, act)
    return h_attn, alpha


def full_trace(params: ModelParams, prefix) -> ForwardTrace:
    X = _check_prefix(params.config, prefix)
    bhat, HS, CS, G, alpha, ctx, _, h_attn = _K.sample_forward(
        params.W, params.U, params.b, params.Wa, params.w, params.w0,
        params.config.activation_id, X)
    return ForwardTrace(hiddens=HS, cells=CS, gates=G, alpha=alpha,
                        context=ctx, h_attn=h_attn, bhat=bhat)


def predict_benefit(params: ModelParams, prefix):
    """Estimated benefit of the model's class given the prefix; also returns
    the attention weights for explainability export."""
    trace = full_trace(params, prefix)
    return trace.bhat, trace.alpha


def last_state_benefit(params: ModelParams, h, c):
    """Constant-time estimate from the current recurrent state only."""
    return _K.last_state_head(h, c, params.Wa, params.w, params.w0,
                              params.config.activation_id)


def _as_batch(config: ModelConfig, batch):
    if not batch:
        raise ValueError("batch must be non-empty")
    return [( _check_prefix(config, X), float(target)) for X, target in batch]


def loss(params: ModelParams, batch) -> float:
    """Mean squared error over (prefix, target) samples.

    Summed with math.fsum, so the value is exactly invariant to batch order.
    """
    samples = _as_batch(params.config, batch)
    act = params.config.activation_id
    squares = []
    for X, target in samples:
        bhat = _K.sample_forward(params.W, params.U, params.b, params.Wa,
                                 params.w, params.w0, act, X)[0]
        squares.append((bhat - target) ** 2)
    return math.fsum(squares) / len(samples)


def _first_bad_tick(*arrays) -> int:
    for t in range(arrays[0].shape[0]):
        for arr in arrays:
            if not np.isfinite(arr[t]).all():
                return t + 1
    return 0


def backward(params: ModelParams, batch) -> np.ndarray:
    """Gradient of `loss` w.r.t. every parameter, flat in the layout order."""
    samples = _as_batch(params.config, batch)
    config = params.config
    act = config.activation_id
    grads = np.zeros(config.num_params)
    gp = ModelParams(config, grads)  # views into the flat gradient vector
    gw0 = grads[-1:]
    inv = 1.0 / len(samples)
    for X, target in samples:
        bhat, HS, CS, G, alpha, _, zcat, h_attn = _K.sample_forward(
            params.W, params.U, params.b, params.Wa, params.w, params.w0, act, X)
        if not (np.isfinite(bhat) and np.isfinite(HS).all() and np.isfinite(CS).all()):
            raise NumericError(
                f"non-finite forward value at tick {_first_bad_tick(HS, CS)}")
        _K.sample_backward(params.W, params.U, params.b, params.Wa, params.w,
                           params.w0, act, X, HS, CS, G, alpha, zcat, h_attn,
                           2.0 * (bhat - target) * inv,
                           gp.W, gp.U, gp.b, gp.Wa, gp.w, gw0)
    if not np.isfinite(grads).all():
        raise NumericError("non-finite gradient")
    return grads


def finite_diff_grad(params: ModelParams, batch, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient estimate; the verification oracle."""
    if not h > 0:
        raise ValueError(f"step h must be positive, got {h}")
    samples = _as_batch(params.config, batch)
    flat = params.flat
    out = np.empty_like(flat)
    for i in range(flat.size):
        bumped = flat.copy()
        bumped[i] = flat[i] + h
        up = loss(ModelParams(params.config, bumped), samples)
        bumped[i] = flat[i] - h
        down = loss(ModelParams(params.config, bumped), samples)
        out[i] = (up - down) / (2.0 * h)
    return out
