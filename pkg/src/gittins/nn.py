"""A small from-scratch MLP with reverse-mode gradients and Adam.

Architecture is fixed at input -> 64 -> 128 -> 64 -> 1 with rectified-linear
hidden activations and a linear scalar output.  Everything is plain numpy so
gradients can be audited against finite differences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "HIDDEN_SIZES",
    "MlpParams",
    "AdamState",
    "StateEncoder",
    "mlp_forward",
    "mlp_forward_batch",
    "mlp_gradient",
    "adam_apply",
    "soft_update",
    "save_params",
    "load_params",
]

HIDDEN_SIZES = (64, 128, 64)

ONE_HOT = "one-hot"
SCALAR = "scalar"


class StateEncoder:
    """Encodes a (state, reference state) pair into the network input.

    one-hot mode concatenates one-hot vectors of both indices (length 2N);
    scalar mode packs the normalised pair ((s+1)/N, (x+1)/N) for very large
    state spaces.
    """

    def __init__(self, num_states, mode=ONE_HOT):
        if mode not in (ONE_HOT, SCALAR):
            raise ValueError(f"unknown encoding mode {mode!r}")
        self.num_states = int(num_states)
        self.mode = mode
        self.input_dim = 2 * self.num_states if mode == ONE_HOT else 2

    def encode_batch(self, states, references):
        s = np.asarray(states, dtype=np.int64)
        x = np.asarray(references, dtype=np.int64)
        if np.any(s < 0) or np.any(s >= self.num_states) or np.any(x < 0) or np.any(
            x >= self.num_states
        ):
            raise ValueError("state or reference index out of range")
        b = s.size
        if self.mode == ONE_HOT:
            out = np.zeros((b, self.input_dim))
            out[np.arange(b), s] = 1.0
            out[np.arange(b), self.num_states + x] = 1.0
            return out
        return np.stack([(s + 1) / self.num_states, (x + 1) / self.num_states], axis=1)


class MlpParams:
    """Layer weights and biases; knows its own input encoding."""

    def __init__(self, weights, biases, encoder: StateEncoder):
        self.weights = weights
        self.biases = biases
        self.encoder = encoder

    @classmethod
    def init(cls, encoder: StateEncoder, rng):
        """Seeded uniform fan-in initialisation per layer."""
        dims = [encoder.input_dim, *HIDDEN_SIZES, 1]
        weights, biases = [], []
        for d_in, d_out in zip(dims[:-1], dims[1:]):
            bound = 1.0 / np.sqrt(d_in)
            weights.append(rng.uniform(-bound, bound, size=(d_in, d_out)))
            biases.append(rng.uniform(-bound, bound, size=d_out))
        return cls(weights, biases, encoder)

    @classmethod
    def zeros(cls, encoder: StateEncoder):
        dims = [encoder.input_dim, *HIDDEN_SIZES, 1]
        weights = [np.zeros((i, o)) for i, o in zip(dims[:-1], dims[1:])]
        biases = [np.zeros(o) for o in dims[1:]]
        return cls(weights, biases, encoder)

    def copy(self):
        return MlpParams(
            [w.copy() for w in self.weights], [b.copy() for b in self.biases], self.encoder
        )

    def num_parameters(self):
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)


def _forward_cached(params, inputs):
    """Forward pass keeping pre-activations for the backward sweep."""
    h = inputs
    pre = []
    acts = [inputs]
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w + b
        pre.append(z)
        h = z if i == last else np.maximum(z, 0.0)
        acts.append(h)
    return h[:, 0], pre, acts


def mlp_forward_batch(params, states, references):
    """Q-values for many (state, reference) pairs at once."""
    inputs = params.encoder.encode_batch(states, references)
    out, _, _ = _forward_cached(params, inputs)
    return out


def mlp_forward(params, state, reference):
    """Scalar continue-value estimate for one (state, reference) pair."""
    return float(mlp_forward_batch(params, [state], [reference])[0])


def mlp_gradient(params, inputs, targets):
    """Gradient of the mean-squared error over the batch.

    Loss is (1/B) * sum_i (target_i - output_i)^2; returns (loss,
    weight gradients, bias gradients) with gradients shaped like the
    parameters.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if inputs.ndim != 2 or inputs.shape[0] == 0:
        raise ValueError("batch must be non-empty and two-dimensional")
    out, pre, acts = _forward_cached(params, inputs)
    b = inputs.shape[0]
    err = out - targets
    loss = float(np.mean(err**2))
    grad_ws = [None] * len(params.weights)
    grad_bs = [None] * len(params.biases)
    delta = (2.0 / b) * err[:, None]
    for i in range(len(params.weights) - 1, -1, -1):
        grad_ws[i] = acts[i].T @ delta
        grad_bs[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ params.weights[i].T) * (pre[i - 1] > 0.0)
    return loss, grad_ws, grad_bs


@dataclass
class AdamState:
    """First/second moment accumulators plus the optimiser constants."""

    step_size: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m_w: list = field(default_factory=list)
    v_w: list = field(default_factory=list)
    m_b: list = field(default_factory=list)
    v_b: list = field(default_factory=list)

    @classmethod
    def for_params(cls, params, step_size):
        st = cls(step_size=float(step_size))
        st.m_w = [np.zeros_like(w) for w in params.weights]
        st.v_w = [np.zeros_like(w) for w in params.weights]
        st.m_b = [np.zeros_like(b) for b in params.biases]
        st.v_b = [np.zeros_like(b) for b in params.biases]
        return st


def adam_apply(params, adam: AdamState, grad_ws, grad_bs):
    """One bias-corrected Adam step, in place."""
    if len(grad_ws) != len(params.weights) or any(
        g.shape != w.shape for g, w in zip(grad_ws, params.weights)
    ):
        raise ValueError("gradient shapes do not match parameters")
    adam.t += 1
    c1 = 1.0 - adam.beta1**adam.t
    c2 = 1.0 - adam.beta2**adam.t
    for i in range(len(params.weights)):
        for p, g, m, v in (
            (params.weights[i], grad_ws[i], adam.m_w[i], adam.v_w[i]),
            (params.biases[i], grad_bs[i], adam.m_b[i], adam.v_b[i]),
        ):
            m *= adam.beta1
            m += (1.0 - adam.beta1) * g
            v *= adam.beta2
            v += (1.0 - adam.beta2) * g * g
            p -= adam.step_size * (m / c1) / (np.sqrt(v / c2) + adam.eps)
    return params, adam


def soft_update(target_params, online_params, tau):
    """Blend target parameters in place: target <- tau*target + (1-tau)*online.

    Note that tau weights the old target, so tau = 0 copies the online
    network outright and tau = 1 freezes the target.
    """
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    for wt, wo in zip(target_params.weights, online_params.weights):
        wt *= tau
        wt += (1.0 - tau) * wo
    for bt, bo in zip(target_params.biases, online_params.biases):
        bt *= tau
        bt += (1.0 - tau) * bo
    return target_params


def save_params(params, path, seed=None):
    """Write parameters as a flat float64 vector plus a JSON header.

    The header records the layer dimensions, the state encoding, and the
    originating seed, so a saved network can be rebuilt exactly.
    """
    dims = [params.encoder.input_dim, *HIDDEN_SIZES, 1]
    header = {
        "dims": dims,
        "num_states": params.encoder.num_states,
        "encoding": params.encoder.mode,
        "seed": seed,
    }
    flat = np.concatenate(
        [w.ravel() for w in params.weights] + [b.ravel() for b in params.biases]
    )
    np.savez(path, header=np.frombuffer(json.dumps(header).encode(), dtype=np.uint8), flat=flat)


def load_params(path):
    """Rebuild MlpParams from a file written by save_params."""
    data = np.load(path)
    header = json.loads(bytes(data["header"]).decode())
    encoder = StateEncoder(header["num_states"], header["encoding"])
    dims = header["dims"]
    flat = data["flat"]
    params = MlpParams.zeros(encoder)
    pos = 0
    for i, (d_in, d_out) in enumerate(zip(dims[:-1], dims[1:])):
        params.weights[i] = flat[pos : pos + d_in * d_out].reshape(d_in, d_out).copy()
        pos += d_in * d_out
    for i, (_, d_out) in enumerate(zip(dims[:-1], dims[1:])):
        params.biases[i] = flat[pos : pos + d_out].copy()
        pos += d_out
    return params, header
