"""Policy/value network: a shared tanh trunk with softmax policy and scalar value heads.

All parameters are float64.  The forward/backward math lives in the kernel
backends (compiled or pure NumPy, see backend.py); this module owns parameter
containers, initialization, the parameter file format, and dispatch.

Parameter file format (version 1), readable by any language:
  line 1:  b"#policy v1\\n"
  line 2:  one JSON object + b"\\n" with keys input_dim, n_actions, hidden
           (list), W, H
  payload: the flattened parameters as little-endian float64, in order
           W1, b1, ..., Wk, bk, Wpolicy, bpolicy, Wvalue, bvalue, each matrix
           row-major with shape (out, in).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import BinaryIO, Sequence

import numpy as np

from . import _purepy, backend

PARAMS_MAGIC = b"#policy v1"


class ShapeError(ValueError):
    """Observation width does not match what the parameters were built for."""


@dataclass
class PolicyParams:
    """Network weights plus the layout metadata needed to (re)bind them."""

    input_dim: int
    n_actions: int
    hidden: tuple[int, ...]
    W: int
    H: int
    arrays: list[np.ndarray]  # [W1, b1, ..., Wk, bk, Wp, bp, Wv, bv]

    @property
    def trunk(self) -> list[tuple[np.ndarray, np.ndarray]]:
        k = len(self.hidden)
        return [(self.arrays[2 * i], self.arrays[2 * i + 1]) for i in range(k)]

    @property
    def heads(self):
        k = 2 * len(self.hidden)
        return (self.arrays[k], self.arrays[k + 1]), (self.arrays[k + 2], self.arrays[k + 3])

    def check_input(self, observation_length: int) -> None:
        if observation_length != self.input_dim:
            raise ShapeError(
                f"policy expects observations of length {self.input_dim}, "
                f"environment provides {observation_length}; image-like agents "
                f"cannot move between cluster sizes"
            )


def _layer_shapes(input_dim: int, n_actions: int, hidden: Sequence[int]) -> list[tuple[int, ...]]:
    shapes: list[tuple[int, ...]] = []
    fan_in = input_dim
    for width in hidden:
        shapes.extend([(width, fan_in), (width,)])
        fan_in = width
    shapes.extend([(n_actions, fan_in), (n_actions,), (1, fan_in), (1,)])
    return shapes


def _orthogonal(rng: np.random.Generator, shape: tuple[int, int], gain: float) -> np.ndarray:
    a = rng.standard_normal(shape)
    u, _, vt = np.linalg.svd(a, full_matrices=False)
    q = u if u.shape == shape else vt
    return gain * q


def init_policy(
    input_dim: int,
    n_actions: int,
    W: int,
    H: int,
    hidden: Sequence[int] = (64, 64),
    seed: int = 0,
) -> PolicyParams:
    """Orthogonal-initialized network; small-gain policy head keeps early entropy high."""
    rng = np.random.default_rng(seed)
    hidden = tuple(hidden)
    arrays: list[np.ndarray] = []
    fan_in = input_dim
    for width in hidden:
        arrays.append(_orthogonal(rng, (width, fan_in), gain=np.sqrt(2.0)))
        arrays.append(np.zeros(width))
        fan_in = width
    arrays.append(_orthogonal(rng, (n_actions, fan_in), gain=0.01))
    arrays.append(np.zeros(n_actions))
    arrays.append(_orthogonal(rng, (1, fan_in), gain=1.0))
    arrays.append(np.zeros(1))
    return PolicyParams(input_dim, n_actions, hidden, W, H, arrays)


def zeros_policy(input_dim: int, n_actions: int, W: int, H: int, hidden: Sequence[int] = (64, 64)) -> PolicyParams:
    arrays = [np.zeros(s) for s in _layer_shapes(input_dim, n_actions, hidden)]
    return PolicyParams(input_dim, n_actions, tuple(hidden), W, H, arrays)


def param_count(params: PolicyParams) -> int:
    return int(sum(a.size for a in params.arrays))


def flatten_params(params: PolicyParams) -> np.ndarray:
    return np.concatenate([a.ravel() for a in params.arrays])


def set_flat_params(params: PolicyParams, theta: np.ndarray) -> None:
    offset = 0
    for a in params.arrays:
        a.flat[:] = theta[offset:offset + a.size]
        offset += a.size
    if offset != theta.size:
        raise ShapeError(f"flat vector has {theta.size} entries, network needs {offset}")


def _dispatch_compiled(params: PolicyParams) -> bool:
    return backend.use_compiled(len(params.hidden), params.input_dim)


def batch_forward(params: PolicyParams, X: np.ndarray):
    """Returns (logits, values, cache) for a batch of observations."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if _dispatch_compiled(params):
        a = params.arrays
        logits, values, H1, H2 = backend._kernels.forward2(*a[:8], X)
        return logits, values, (X, H1, H2)
    logits, values, acts = _purepy.mlp_forward(params.trunk, params.heads, X)
    return logits, values, acts


def batch_backward(params: PolicyParams, cache, dlogits: np.ndarray, dvalues: np.ndarray) -> list[np.ndarray]:
    dlogits = np.ascontiguousarray(dlogits)
    dvalues = np.ascontiguousarray(dvalues)
    if _dispatch_compiled(params):
        a = params.arrays
        X, H1, H2 = cache
        return backend._kernels.backward2(a[0], a[2], a[4], a[6], X, H1, H2, dlogits, dvalues)
    return _purepy.mlp_backward(params.trunk, params.heads, cache, dlogits, dvalues)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def forward(params: PolicyParams, obs: np.ndarray) -> tuple[np.ndarray, float]:
    """Action distribution and value estimate for one observation.

    Deterministic; the distribution is strictly positive and sums to 1.
    """
    x = np.ascontiguousarray(obs, dtype=np.float64).ravel()
    if x.size != params.input_dim:
        raise ShapeError(
            f"observation has length {x.size}, policy expects {params.input_dim}"
        )
    if _dispatch_compiled(params):
        logits, value = backend._kernels.act2(*params.arrays[:8], x)
    else:
        logits, value = _purepy.act_forward(params.trunk, params.heads, x)
    return softmax(logits), float(value)


def save_params(params: PolicyParams, sink: BinaryIO | str | os.PathLike) -> None:
    if isinstance(sink, (str, os.PathLike)):
        with open(sink, "wb") as f:
            save_params(params, f)
        return
    header = {
        "input_dim": params.input_dim,
        "n_actions": params.n_actions,
        "hidden": list(params.hidden),
        "W": params.W,
        "H": params.H,
    }
    sink.write(PARAMS_MAGIC + b"\n")
    sink.write(json.dumps(header).encode("utf-8") + b"\n")
    sink.write(flatten_params(params).astype("<f8").tobytes())


def load_params(source: BinaryIO | str | os.PathLike) -> PolicyParams:
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as f:
            return load_params(f)
    magic = source.readline().rstrip(b"\n")
    if magic != PARAMS_MAGIC:
        raise ValueError(f"not a policy parameter file (magic {magic!r})")
    header = json.loads(source.readline().decode("utf-8"))
    params = zeros_policy(
        header["input_dim"], header["n_actions"], header["W"], header["H"],
        hidden=tuple(header["hidden"]),
    )
    payload = source.read()
    theta = np.frombuffer(payload, dtype="<f8")
    expected = param_count(params)
    if theta.size != expected:
        raise ValueError(f"payload holds {theta.size} floats, header implies {expected}")
    set_flat_params(params, theta.astype(np.float64))
    return params
