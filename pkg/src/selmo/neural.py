"""Minimal dense-network stack: forward pass, reverse-mode gradients, Adam.

Everything is plain float64 numpy.  Networks are small enough that
reproducibility is worth more than throughput, and exact 64-bit math keeps
the finite-difference gradient checks tight.

Parameters are treated as immutable values: every update returns fresh
arrays, so a parameter set handed to another role can never change under it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

ACTIVATIONS = ("elu", "tanh", "identity")

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

# (W, b) per layer, W shaped (fan_in, width)
MLPParams = list[tuple[np.ndarray, np.ndarray]]


class NonFiniteGradientError(RuntimeError):
    """Raised when an update would apply a NaN/inf gradient."""

    def __init__(self, layer_index: int, what: str = "gradient"):
        self.layer_index = layer_index
        super().__init__(f"non-finite {what} in layer {layer_index}; update rejected")


@dataclass(frozen=True)
class MLPSpec:
    """Architecture description: input width plus (width, activation) layers.

    input_activation optionally squashes the raw input with tanh before the
    first affine layer (used by the action-value network).  The final layer
    must be linear so outputs are unbounded regression targets.
    """

    input_dim: int
    layers: tuple[tuple[int, str], ...]
    input_activation: str = "none"

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple((int(w), a) for w, a in self.layers))
        if self.input_dim < 1:
            raise ValueError("input_dim must be positive")
        if not self.layers:
            raise ValueError("need at least one layer")
        for width, act in self.layers:
            if width < 1:
                raise ValueError("layer widths must be positive")
            if act not in ACTIVATIONS:
                raise ValueError(f"unknown activation {act!r}")
        if self.layers[-1][1] != "identity":
            raise ValueError("last layer activation must be identity")
        if self.input_activation not in ("none", "tanh"):
            raise ValueError("input_activation must be 'none' or 'tanh'")

    @property
    def output_dim(self) -> int:
        return self.layers[-1][0]

    def shapes(self) -> list[tuple[tuple[int, int], tuple[int]]]:
        dims = [self.input_dim] + [w for w, _ in self.layers]
        return [((dims[i], dims[i + 1]), (dims[i + 1],)) for i in range(len(self.layers))]

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "layers": [[w, a] for w, a in self.layers],
            "input_activation": self.input_activation,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MLPSpec":
        return cls(
            input_dim=int(d["input_dim"]),
            layers=tuple((int(w), str(a)) for w, a in d["layers"]),
            input_activation=str(d.get("input_activation", "none")),
        )


def mlp_spec(input_dim: int, hidden: tuple[int, ...], output_dim: int,
             hidden_activation: str = "elu", input_activation: str = "none") -> MLPSpec:
    """Convenience builder: hidden layers with one activation, linear head."""
    layers = tuple((w, hidden_activation) for w in hidden) + ((output_dim, "identity"),)
    return MLPSpec(input_dim=input_dim, layers=layers, input_activation=input_activation)


def init_params(spec: MLPSpec, seed: int) -> MLPParams:
    """Uniform fan-in initialization: W ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), b = 0."""
    rng = np.random.default_rng(seed)
    params = []
    for (w_shape, b_shape) in spec.shapes():
        bound = 1.0 / np.sqrt(w_shape[0])
        w = rng.uniform(-bound, bound, size=w_shape)
        params.append((w, np.zeros(b_shape, dtype=np.float64)))
    return params


def clone_params(params: MLPParams) -> MLPParams:
    return [(w.copy(), b.copy()) for w, b in params]


def zeros_like_params(params: MLPParams) -> MLPParams:
    return [(np.zeros_like(w), np.zeros_like(b)) for w, b in params]


def _apply_activation(name: str, z: np.ndarray) -> np.ndarray:
    if name == "identity":
        return z
    if name == "tanh":
        return np.tanh(z)
    # elu with alpha=1; exponentiate only the negative entries
    out = z.copy()
    neg = z < 0.0
    out[neg] = np.expm1(z[neg])
    return out


def _activation_grad_from_output(name: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Derivative of the activation, computed from its own output where possible."""
    if name == "identity":
        return np.ones_like(a)
    if name == "tanh":
        return 1.0 - a * a
    # elu'(z) = 1 for z > 0, elu(z) + 1 otherwise
    return np.where(z > 0.0, 1.0, a + 1.0)


def forward_batch(params: MLPParams, spec: MLPSpec, inputs: np.ndarray) -> np.ndarray:
    """Forward pass on a (N, input_dim) batch."""
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != spec.input_dim:
        raise ValueError(f"expected inputs of shape (N, {spec.input_dim}), got {x.shape}")
    if spec.input_activation == "tanh":
        x = np.tanh(x)
    for (w, b), (_, act) in zip(params, spec.layers):
        x = _apply_activation(act, x @ w + b)
    return x


def forward(params: MLPParams, spec: MLPSpec, input_vec: np.ndarray) -> np.ndarray:
    """Forward pass on a single input vector."""
    input_vec = np.asarray(input_vec, dtype=np.float64)
    if input_vec.shape != (spec.input_dim,):
        raise ValueError(f"expected input of shape ({spec.input_dim},), got {input_vec.shape}")
    return forward_batch(params, spec, input_vec[None, :])[0]


def forward_with_cache(params: MLPParams, spec: MLPSpec, inputs: np.ndarray):
    """Forward pass keeping per-layer pre- and post-activations for backprop.

    Returns (outputs, cache); pass the cache to backward().
    """
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != spec.input_dim:
        raise ValueError(f"expected inputs of shape (N, {spec.input_dim}), got {x.shape}")
    if spec.input_activation == "tanh":
        x = np.tanh(x)
    layer_inputs = []
    pre_acts = []
    post_acts = []
    for (w, b), (_, act) in zip(params, spec.layers):
        layer_inputs.append(x)
        z = x @ w + b
        a = _apply_activation(act, z)
        pre_acts.append(z)
        post_acts.append(a)
        x = a
    return x, (layer_inputs, pre_acts, post_acts)


def backward(params: MLPParams, spec: MLPSpec, cache, output_grad: np.ndarray) -> MLPParams:
    """Reverse-mode gradients w.r.t. all parameters given dLoss/dOutput."""
    layer_inputs, pre_acts, post_acts = cache
    grads: MLPParams = [None] * len(params)  # type: ignore[list-item]
    delta = np.asarray(output_grad, dtype=np.float64)
    for i in range(len(params) - 1, -1, -1):
        _, act = spec.layers[i]
        if act != "identity":
            delta = delta * _activation_grad_from_output(act, pre_acts[i], post_acts[i])
        w, _ = params[i]
        grads[i] = (layer_inputs[i].T @ delta, delta.sum(axis=0))
        if i > 0:
            delta = delta @ w.T
    return grads


def loss_and_grad(params: MLPParams, spec: MLPSpec, inputs: np.ndarray,
                  targets: np.ndarray) -> tuple[float, MLPParams]:
    """Sum-of-squared-errors loss over the whole batch and its exact gradients."""
    loss, grads, _ = sse_loss_grad_outputs(params, spec, inputs, targets)
    return loss, grads


def sse_loss_grad_outputs(params: MLPParams, spec: MLPSpec, inputs: np.ndarray,
                          targets: np.ndarray):
    """As loss_and_grad, but also returns the network outputs.

    Callers that need the predictions for something else (e.g. reward
    labeling) share the single forward pass instead of running two.
    """
    targets = np.asarray(targets, dtype=np.float64)
    outputs, cache = forward_with_cache(params, spec, inputs)
    if targets.shape != outputs.shape:
        raise ValueError(f"targets shape {targets.shape} does not match outputs {outputs.shape}")
    err = outputs - targets
    loss = float(np.sum(err * err))
    grads = backward(params, spec, cache, 2.0 * err)
    return loss, grads, outputs


@dataclass
class AdamState:
    """First/second moment accumulators over a flat list of arrays."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def for_arrays(cls, arrays: list[np.ndarray]) -> "AdamState":
        return cls(m=[np.zeros_like(a) for a in arrays], v=[np.zeros_like(a) for a in arrays])

    @classmethod
    def for_params(cls, params: MLPParams) -> "AdamState":
        return cls.for_arrays(_flatten(params))


def _flatten(params: MLPParams) -> list[np.ndarray]:
    flat = []
    for w, b in params:
        flat.append(w)
        flat.append(b)
    return flat


def _unflatten(arrays: list[np.ndarray]) -> MLPParams:
    return [(arrays[i], arrays[i + 1]) for i in range(0, len(arrays), 2)]


def adam_step_arrays(arrays: list[np.ndarray], grads: list[np.ndarray],
                     state: AdamState, lr: float) -> tuple[list[np.ndarray], AdamState]:
    """One Adam update over a flat array list; returns new arrays and state."""
    for i, g in enumerate(grads):
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(i)
    t = state.t + 1
    new_arrays = []
    new_m = []
    new_v = []
    bc1 = 1.0 - ADAM_BETA1**t
    bc2 = 1.0 - ADAM_BETA2**t
    for a, g, m, v in zip(arrays, grads, state.m, state.v):
        m = ADAM_BETA1 * m + (1.0 - ADAM_BETA1) * g
        v = ADAM_BETA2 * v + (1.0 - ADAM_BETA2) * (g * g)
        step = lr * (m / bc1) / (np.sqrt(v / bc2) + ADAM_EPS)
        new_arrays.append(a - step)
        new_m.append(m)
        new_v.append(v)
    return new_arrays, AdamState(m=new_m, v=new_v, t=t)


def adam_step(params: MLPParams, grads: MLPParams, state: AdamState,
              lr: float) -> tuple[MLPParams, AdamState]:
    """One Adam update on network parameters (bias-corrected, standard constants)."""
    new_flat, new_state = adam_step_arrays(_flatten(params), _flatten(grads), state, lr)
    return _unflatten(new_flat), new_state


# --- serialization ---------------------------------------------------------
#
# A parameter bundle is two files: <base>.manifest (JSON: spec, named array
# shapes in order, free-form metadata) and <base>.weights (the arrays
# concatenated as little-endian float64).  Round trips are byte-exact.

MANIFEST_FORMAT = "selmo-params-v1"


def save_arrays(base_path: str | Path, spec: MLPSpec | None, named_arrays: list[tuple[str, np.ndarray]],
                metadata: dict | None = None) -> tuple[Path, Path]:
    base = Path(base_path)
    records = []
    blobs = []
    for name, arr in named_arrays:
        arr = np.ascontiguousarray(arr, dtype=np.float64)
        records.append({"name": name, "shape": list(arr.shape)})
        blobs.append(arr.astype("<f8").tobytes())
    manifest = {
        "format": MANIFEST_FORMAT,
        "spec": spec.to_dict() if spec is not None else None,
        "arrays": records,
        "metadata": metadata or {},
    }
    manifest_path = base.with_suffix(".manifest")
    weights_path = base.with_suffix(".weights")
    manifest_path.write_text(json.dumps(manifest, sort_keys=True, separators=(",", ":")) + "\n")
    weights_path.write_bytes(b"".join(blobs))
    return manifest_path, weights_path


def load_arrays(base_path: str | Path):
    """Returns (spec or None, ordered dict name -> array, metadata)."""
    base = Path(base_path)
    manifest = json.loads(base.with_suffix(".manifest").read_text())
    if manifest.get("format") != MANIFEST_FORMAT:
        raise ValueError(f"unrecognized parameter bundle format: {manifest.get('format')!r}")
    raw = base.with_suffix(".weights").read_bytes()
    arrays: dict[str, np.ndarray] = {}
    offset = 0
    for rec in manifest["arrays"]:
        shape = tuple(rec["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 8
        arr = np.frombuffer(raw[offset : offset + nbytes], dtype="<f8").reshape(shape)
        arrays[rec["name"]] = arr.astype(np.float64)
        offset += nbytes
    if offset != len(raw):
        raise ValueError("weights file length does not match manifest shapes")
    spec = MLPSpec.from_dict(manifest["spec"]) if manifest.get("spec") else None
    return spec, arrays, manifest.get("metadata", {})


def save_params(base_path: str | Path, spec: MLPSpec, params: MLPParams,
                extra_arrays: list[tuple[str, np.ndarray]] | None = None,
                metadata: dict | None = None) -> tuple[Path, Path]:
    named = []
    for i, (w, b) in enumerate(params):
        named.append((f"layer{i}.W", w))
        named.append((f"layer{i}.b", b))
    named.extend(extra_arrays or [])
    return save_arrays(base_path, spec, named, metadata)


def load_params(base_path: str | Path):
    """Returns (spec, params, extra arrays dict, metadata)."""
    spec, arrays, metadata = load_arrays(base_path)
    if spec is None:
        raise ValueError("parameter bundle is missing its architecture spec")
    params: MLPParams = []
    for i in range(len(spec.layers)):
        params.append((arrays.pop(f"layer{i}.W"), arrays.pop(f"layer{i}.b")))
    return spec, params, arrays, metadata
