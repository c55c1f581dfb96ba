"""Small feed-forward embedding network with explicit forward/backward passes.

Hidden layers use a rectifier, the output layer is linear so the embedding
space is unbounded. Everything is float64; parameters mutate only through
`adam_step`, which returns fresh arrays.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    CheckpointFormatError,
    CheckpointTruncatedError,
    CheckpointVersionError,
    InvalidArgumentError,
    ShapeError,
)

CHECKPOINT_MAGIC = b"SBEL"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelParams:
    layer_dims: tuple
    weights: tuple  # weights[k]: (layer_dims[k], layer_dims[k+1])
    biases: tuple  # biases[k]: (layer_dims[k+1],)

    def __post_init__(self):
        dims = self.layer_dims
        if len(self.weights) != len(dims) - 1 or len(self.biases) != len(dims) - 1:
            raise ShapeError("one weight matrix and bias vector per layer expected")
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.shape != (dims[k], dims[k + 1]) or b.shape != (dims[k + 1],):
                raise ShapeError(f"layer {k} arrays do not match layer_dims")
            if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
                raise InvalidArgumentError(f"layer {k} contains non-finite values")

    @property
    def embedding_dim(self) -> int:
        return self.layer_dims[-1]

    def arrays(self):
        out = []
        for W, b in zip(self.weights, self.biases):
            out.extend([W, b])
        return out

    def with_arrays(self, arrays) -> "ModelParams":
        weights = tuple(arrays[2 * k] for k in range(len(self.weights)))
        biases = tuple(arrays[2 * k + 1] for k in range(len(self.biases)))
        return ModelParams(self.layer_dims, weights, biases)


@dataclass(frozen=True)
class ClassifierHead:
    """Weights of the softmax layer: logits = x @ W + b."""

    W: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        if self.W.ndim != 2 or self.b.shape != (self.W.shape[1],):
            raise ShapeError("head W must be (d_emb, m) with b of length m")
        if not (np.all(np.isfinite(self.W)) and np.all(np.isfinite(self.b))):
            raise InvalidArgumentError("head contains non-finite values")

    @property
    def class_count(self) -> int:
        return self.W.shape[1]

    def arrays(self):
        return [self.W, self.b]

    def with_arrays(self, arrays) -> "ClassifierHead":
        return ClassifierHead(arrays[0], arrays[1])


@dataclass(frozen=True)
class AdamState:
    first_moment: tuple
    second_moment: tuple
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8


@dataclass(frozen=True)
class LrSchedule:
    base_rate: float = 0.001
    drop_epochs: tuple = (15, 25)
    drop_factor: float = 0.1
    final_epoch: int = 30

    def __post_init__(self):
        if self.base_rate <= 0 or self.drop_factor <= 0:
            raise InvalidArgumentError("base_rate and drop_factor must be positive")
        drops = tuple(self.drop_epochs)
        object.__setattr__(self, "drop_epochs", drops)
        if list(drops) != sorted(set(drops)):
            raise InvalidArgumentError("drop_epochs must be strictly increasing")
        if drops and drops[-1] > self.final_epoch:
            raise InvalidArgumentError("drop_epochs must not exceed final_epoch")


class ActivationCache:
    """Forward-pass intermediates needed by backward; tied to one params object."""

    def __init__(self, params, inputs, pre_activations, activations):
        self.params = params
        self.inputs = inputs
        self.pre_activations = pre_activations
        self.activations = activations


@dataclass(frozen=True)
class ParamGrads:
    weights: tuple
    biases: tuple

    def arrays(self):
        out = []
        for W, b in zip(self.weights, self.biases):
            out.extend([W, b])
        return out


def init_model(layer_dims, seed) -> ModelParams:
    """He-style init: zero-mean weights with variance 2/fan_in, zero biases."""
    dims = tuple(int(d) for d in layer_dims)
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise InvalidArgumentError("layer_dims needs >= 2 entries, all >= 1")
    rng = np.random.default_rng([int(seed), 0x6D])
    weights = []
    biases = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        scale = np.sqrt(2.0 / fan_in)
        weights.append(rng.standard_normal((fan_in, fan_out)) * scale)
        biases.append(np.zeros(fan_out))
    return ModelParams(dims, tuple(weights), tuple(biases))


def init_head(embedding_dim, class_count, seed) -> ClassifierHead:
    rng = np.random.default_rng([int(seed), 0x68])
    scale = np.sqrt(2.0 / embedding_dim)
    return ClassifierHead(rng.standard_normal((embedding_dim, class_count)) * scale,
                          np.zeros(class_count))


def forward(params: ModelParams, inputs):
    """Map inputs to embeddings; returns (embeddings, cache for backward)."""
    X = np.asarray(inputs, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.layer_dims[0]:
        raise ShapeError(
            f"inputs must be (n, {params.layer_dims[0]}), got {X.shape}"
        )
    activations = [X]
    pre_activations = []
    h = X
    last = len(params.weights) - 1
    for k, (W, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ W + b
        pre_activations.append(z)
        h = z if k == last else np.maximum(z, 0.0)
        activations.append(h)
    return h, ActivationCache(params, X, pre_activations, activations)


def backward(params: ModelParams, cache: ActivationCache, grad_embeddings):
    """Backpropagate d(loss)/d(embeddings) to all parameters and the inputs."""
    if cache.params is not params:
        raise ShapeError("cache was produced by a different params object")
    g = np.asarray(grad_embeddings, dtype=np.float64)
    if g.shape != cache.activations[-1].shape:
        raise ShapeError("grad_embeddings shape does not match the forward output")

    weight_grads = [None] * len(params.weights)
    bias_grads = [None] * len(params.biases)
    last = len(params.weights) - 1
    for k in range(last, -1, -1):
        if k != last:
            g = g * (cache.pre_activations[k] > 0.0)
        weight_grads[k] = cache.activations[k].T @ g
        bias_grads[k] = g.sum(axis=0)
        g = g @ params.weights[k].T
    return ParamGrads(tuple(weight_grads), tuple(bias_grads)), g


def init_adam_state(arrays, beta1=0.9, beta2=0.999, epsilon=1e-8) -> AdamState:
    zeros = tuple(np.zeros_like(a) for a in arrays)
    return AdamState(zeros, tuple(np.zeros_like(a) for a in arrays),
                     0, beta1, beta2, epsilon)


def adam_step(arrays, grad_arrays, state: AdamState, rate, weight_decay=0.0):
    """One Adam update with bias correction and decoupled weight decay.

    `arrays` is a flat list of parameter ndarrays (model and head hand theirs
    over via `.arrays()`); returns the updated list plus the new state.
    """
    if rate <= 0:
        raise InvalidArgumentError("rate must be positive")
    if len(arrays) != len(grad_arrays) or len(arrays) != len(state.first_moment):
        raise ShapeError("params, grads, and state must have matching layouts")
    step = state.step_count + 1
    bc1 = 1.0 - state.beta1 ** step
    bc2 = 1.0 - state.beta2 ** step
    new_params = []
    new_m = []
    new_v = []
    for p, g, m, v in zip(arrays, grad_arrays, state.first_moment, state.second_moment):
        if p.shape != g.shape:
            raise ShapeError("gradient shape does not match parameter shape")
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g * g
        update = (m / bc1) / (np.sqrt(v / bc2) + state.epsilon)
        new_params.append(p - rate * update - rate * weight_decay * p)
        new_m.append(m)
        new_v.append(v)
    return new_params, AdamState(tuple(new_m), tuple(new_v), step,
                                 state.beta1, state.beta2, state.epsilon)


def lr_at_epoch(schedule: LrSchedule, epoch) -> float:
    if epoch < 0 or epoch > schedule.final_epoch:
        raise InvalidArgumentError(f"epoch {epoch} outside [0, {schedule.final_epoch}]")
    drops = sum(1 for d in schedule.drop_epochs if d <= epoch)
    return schedule.base_rate * schedule.drop_factor ** drops


# --- checkpoint format -------------------------------------------------------
#
# magic "SBEL", one version byte, then a UTF-8 manifest terminated by a NUL
# byte, then every declared array as little-endian float64 in manifest order.
# Manifest lines are `key=value`; each array is declared as
# `array=<name>:<dim0>x<dim1>...`. Round-trips are bit-exact.


def _manifest_lines(params, head, set_params):
    lines = [
        "layer_dims=" + ",".join(str(d) for d in params.layer_dims),
        f"class_count={head.class_count}",
    ]
    arrays = []

    def declare(name, arr):
        shape = "x".join(str(s) for s in arr.shape) if arr.shape else "1"
        lines.append(f"array={name}:{shape}")
        arrays.append(np.asarray(arr, dtype=np.float64))

    for k, (W, b) in enumerate(zip(params.weights, params.biases)):
        declare(f"layer{k}.weight", W)
        declare(f"layer{k}.bias", b)
    declare("head.W", head.W)
    declare("head.b", head.b)
    if set_params is not None:
        lines.append(f"set.last_offline_iteration={set_params.last_offline_iteration}")
        for j in sorted(set_params.centroids.centroids):
            declare(f"set.centroid.{j}", set_params.centroids.centroids[j])
        for j in sorted(set_params.hyperplanes.planes):
            plane = set_params.hyperplanes.planes[j]
            declare(f"set.hyperplane.{j}.w", plane.w)
            declare(f"set.hyperplane.{j}.b", np.array([plane.b]))
    return lines, arrays


def save_checkpoint(params: ModelParams, head: ClassifierHead, path, set_params=None):
    lines, arrays = _manifest_lines(params, head, set_params)
    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC)
    buf.write(bytes([CHECKPOINT_VERSION]))
    buf.write("\n".join(lines).encode("utf-8"))
    buf.write(b"\x00")
    for arr in arrays:
        buf.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_checkpoint(path):
    """Read a checkpoint; returns (ModelParams, ClassifierHead, SetParams or None)."""
    from .setparams import CentroidSet, SetParams
    from .svm import FitInfo, Hyperplane, HyperplaneSet

    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 5 or blob[:4] != CHECKPOINT_MAGIC:
        raise CheckpointFormatError("bad magic bytes; not a checkpoint file")
    if blob[4] != CHECKPOINT_VERSION:
        raise CheckpointVersionError(f"unsupported checkpoint version {blob[4]}")
    nul = blob.find(b"\x00", 5)
    if nul < 0:
        raise CheckpointTruncatedError("manifest is not NUL-terminated")

    manifest = blob[5:nul].decode("utf-8").splitlines()
    meta = {}
    declared = []
    for line in manifest:
        key, _, value = line.partition("=")
        if key == "array":
            name, _, shape = value.partition(":")
            declared.append((name, tuple(int(s) for s in shape.split("x"))))
        else:
            meta[key] = value
    if "layer_dims" not in meta or "class_count" not in meta:
        raise CheckpointFormatError("manifest is missing required keys")

    payload = blob[nul + 1:]
    expected = sum(8 * int(np.prod(shape)) for _, shape in declared)
    if len(payload) < expected:
        raise CheckpointTruncatedError(
            f"payload holds {len(payload)} bytes, manifest declares {expected}"
        )
    arrays = {}
    offset = 0
    for name, shape in declared:
        count = int(np.prod(shape))
        arrays[name] = np.frombuffer(
            payload, dtype="<f8", count=count, offset=offset
        ).reshape(shape).copy()
        offset += 8 * count

    layer_dims = tuple(int(d) for d in meta["layer_dims"].split(","))
    weights = tuple(arrays[f"layer{k}.weight"] for k in range(len(layer_dims) - 1))
    biases = tuple(arrays[f"layer{k}.bias"] for k in range(len(layer_dims) - 1))
    params = ModelParams(layer_dims, weights, biases)
    head = ClassifierHead(arrays["head.W"], arrays["head.b"])

    set_params = None
    if "set.last_offline_iteration" in meta:
        centroid_ids = sorted(int(n.split(".")[2]) for n in arrays
                              if n.startswith("set.centroid."))
        plane_ids = sorted({int(n.split(".")[2]) for n in arrays
                            if n.startswith("set.hyperplane.")})
        centroids = CentroidSet(
            centroids={j: arrays[f"set.centroid.{j}"] for j in centroid_ids},
            counts={j: 0 for j in centroid_ids},
            class_count=head.class_count,
        )
        planes = {
            j: Hyperplane(
                w=arrays[f"set.hyperplane.{j}.w"],
                b=float(arrays[f"set.hyperplane.{j}.b"][0]),
                class_id=j,
                fit_info=FitInfo(0, 0.0, True),
            )
            for j in plane_ids
        }
        hyperplanes = HyperplaneSet(planes=planes, embedding_dim=layer_dims[-1],
                                    class_count=head.class_count)
        set_params = SetParams(
            centroids=centroids, hyperplanes=hyperplanes,
            last_offline_iteration=int(meta["set.last_offline_iteration"]),
        )
    return params, head, set_params
