"""Model configuration, parameter storage, and the Adam state.

All parameters live in one flat float64 vector; the named weights are views
into it. Flat layout (documented, serialization order):

    W   (4H, d)   input-to-hidden gate weights, gate blocks [input; forget;
                  output; candidate] stacked along the first axis
    U   (4H, H)   hidden-to-hidden gate weights, same block order
    b   (4H,)     gate biases
    Wa  (H, 2H)   attention combine matrix applied to concat(context, cell)
    w   (H,)      linear head weights
    w0  ()        linear head bias

Total size 4*(H*d + H*H + H) + 2*H*H + H + 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = {"tanh": 0, "sigmoid": 1}


@dataclass(frozen=True)
class ModelConfig:
    input_dim: int
    hidden_dim: int
    attention_activation: str = "tanh"

    def __post_init__(self):
        if self.input_dim < 1 or self.hidden_dim < 1:
            raise ValueError("input_dim and hidden_dim must be >= 1")
        if self.attention_activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.attention_activation!r}; "
                             f"pick one of {sorted(ACTIVATIONS)}")

    @property
    def num_params(self) -> int:
        d, H = self.input_dim, self.hidden_dim
        return 4 * (H * d + H * H + H) + 2 * H * H + H + 1

    @property
    def activation_id(self) -> int:
        return ACTIVATIONS[self.attention_activation]

    def to_dict(self) -> dict:
        return {"input_dim": self.input_dim, "hidden_dim": self.hidden_dim,
                "attention_activation": self.attention_activation}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


class ModelParams:
    """Flat parameter vector plus named views. Treat instances as immutable:
    optimizer steps return a fresh copy rather than updating in place."""

    __slots__ = ("config", "flat", "W", "U", "b", "Wa", "w")

    def __init__(self, config: ModelConfig, flat: np.ndarray):
        flat = np.ascontiguousarray(flat, dtype=np.float64)
        if flat.shape != (config.num_params,):
            raise ValueError(f"expected {config.num_params} parameters, got {flat.shape}")
        self.config = config
        self.flat = flat
        d, H = config.input_dim, config.hidden_dim
        o = 0
        self.W = flat[o:o + 4 * H * d].reshape(4 * H, d); o += 4 * H * d
        self.U = flat[o:o + 4 * H * H].reshape(4 * H, H); o += 4 * H * H
        self.b = flat[o:o + 4 * H]; o += 4 * H
        self.Wa = flat[o:o + 2 * H * H].reshape(H, 2 * H); o += 2 * H * H
        self.w = flat[o:o + H]; o += H

    @property
    def w0(self) -> float:
        return float(self.flat[-1])

    def __reduce__(self):
        # keep W/U/... as views of flat across pickling (worker processes)
        return (ModelParams, (self.config, self.flat))

    def copy(self) -> "ModelParams":
        return ModelParams(self.config, self.flat.copy())

    def check_finite(self) -> None:
        if not np.isfinite(self.flat).all():
            from ..errors import NumericError
            raise NumericError("non-finite model parameter")

    # the group layout doubles as the serialization order
    def group_slices(self) -> dict:
        d, H = self.config.input_dim, self.config.hidden_dim
        sizes = {"W": 4 * H * d, "U": 4 * H * H, "b": 4 * H,
                 "Wa": 2 * H * H, "w": H, "w0": 1}
        out, o = {}, 0
        for name, size in sizes.items():
            out[name] = slice(o, o + size)
            o += size
        return out


def init_params(config: ModelConfig, seed: int) -> ModelParams:
    """Uniform init in [-1/sqrt(H), 1/sqrt(H)], forget-gate bias set to 1."""
    rng = np.random.default_rng(seed)
    scale = 1.0 / np.sqrt(config.hidden_dim)
    flat = rng.uniform(-scale, scale, size=config.num_params)
    params = ModelParams(config, flat)
    H = config.hidden_dim
    params.b[H:2 * H] = 1.0
    params.flat[-1] = 0.0
    return params


@dataclass
class AdamState:
    """First/second moment accumulators plus the step counter."""

    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: np.ndarray = field(default=None, repr=False)
    v: np.ndarray = field(default=None, repr=False)

    @classmethod
    def create(cls, config: ModelConfig, lr: float = 0.001, beta1: float = 0.9,
               beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        n = config.num_params
        return cls(lr=lr, beta1=beta1, beta2=beta2, eps=eps, step=0,
                   m=np.zeros(n), v=np.zeros(n))


def adam_step(params: ModelParams, grads: np.ndarray, state: AdamState):
    """One bias-corrected Adam update; returns (new params, new state)."""
    from ..errors import NumericError

    grads = np.asarray(grads, dtype=np.float64)
    if grads.shape != params.flat.shape:
        raise ValueError(f"gradient shape {grads.shape} != parameter shape {params.flat.shape}")
    if not np.isfinite(grads).all():
        raise NumericError("non-finite gradient entry")
    t = state.step + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    v = state.beta2 * state.v + (1.0 - state.beta2) * grads * grads
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    new_flat = params.flat - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    new_state = AdamState(lr=state.lr, beta1=state.beta1, beta2=state.beta2,
                          eps=state.eps, step=t, m=m, v=v)
    return ModelParams(params.config, new_flat), new_state
