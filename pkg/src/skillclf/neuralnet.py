"""Feed-forward networks written directly on numpy arrays.

Architectures are written in a colon-separated notation, e.g.
``768 : 81(lrelu) : 9(lrelu) : 1(sigmoid)``: the input width followed by
one ``width(activation)`` segment per layer. The final layer is always
sigmoid so outputs are probabilities. Training minimizes binary
cross-entropy, optionally with an L2 penalty on weights (never biases),
using hand-rolled Adam or RMSprop.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import (
    ArchitectureMismatchError,
    ArchitectureSyntaxError,
    BadFormatError,
    DimensionMismatchError,
    EmptyDatasetError,
    LengthMismatchError,
    NonFiniteLossError,
    NonPositiveWidthError,
    ShapeMismatchError,
    UnknownActivationError,
)

EPS_CLIP = 1e-7
ELU_ALPHA = 1.0
LRELU_ALPHA = 0.01
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
RMSPROP_RHO = 0.9
RMSPROP_EPS = 1e-8


# --- activations --------------------------------------------------------


def _sigmoid(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    s = 1.0 / (1.0 + np.exp(-x))
    return s, s * (1.0 - s)


def _tanh(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    t = np.tanh(x)
    return t, 1.0 - t * t


def _elu(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # derivative at 0 is defined as 1
    pos = x >= 0
    one = x.dtype.type(1.0)
    value = np.where(pos, x, ELU_ALPHA * np.expm1(x))
    return value, np.where(pos, one, value + one)


def _lrelu(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # derivative at 0 is defined as 1
    pos = x >= 0
    alpha = x.dtype.type(LRELU_ALPHA)
    return np.where(pos, x, alpha * x), np.where(pos, x.dtype.type(1.0), alpha)


ACTIVATIONS: Mapping[str, Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]] = {
    "sigmoid": _sigmoid,
    "tanh": _tanh,
    "elu": _elu,
    "lrelu": _lrelu,
}


def activation_apply(kind: str, x) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate an activation and its derivative elementwise."""
    try:
        fn = ACTIVATIONS[kind]
    except KeyError:
        raise UnknownActivationError(f"unknown activation {kind!r}") from None
    return fn(np.asarray(x, dtype=np.float64))


# --- architecture notation ----------------------------------------------


@dataclass(frozen=True)
class ArchitectureSpec:
    """Parsed layer plan: input width plus (width, activation) per layer."""

    input_dim: int
    layers: tuple[tuple[int, str], ...]

    def __post_init__(self) -> None:
        if self.input_dim < 1:
            raise NonPositiveWidthError(f"input width must be >= 1, got {self.input_dim}")
        if not self.layers:
            raise ArchitectureSyntaxError("at least one layer is required")
        for width, act in self.layers:
            if width < 1:
                raise NonPositiveWidthError(f"layer width must be >= 1, got {width}")
            if act not in ACTIVATIONS:
                raise UnknownActivationError(f"unknown activation {act!r}")
        if self.layers[-1][1] != "sigmoid":
            raise ArchitectureSyntaxError(
                f"last layer must use sigmoid, got {self.layers[-1][1]!r}"
            )

    @property
    def output_dim(self) -> int:
        return self.layers[-1][0]


_LAYER_RE = re.compile(r"(\d+)\((\w+)\)$")


def parse_architecture(text: str) -> ArchitectureSpec:
    """Parse the colon-separated notation into an ArchitectureSpec.

    Whitespace around ':' is optional; activation names are
    case-insensitive. The reverse of format_architecture.
    """
    segments = [seg.strip() for seg in text.split(":")]
    if len(segments) < 2:
        raise ArchitectureSyntaxError(f"expected input and layers: {text!r}")
    if not segments[0].isdigit():
        raise ArchitectureSyntaxError(f"input width must be an integer: {segments[0]!r}")
    layers = []
    for seg in segments[1:]:
        m = _LAYER_RE.match(seg)
        if m is None:
            raise ArchitectureSyntaxError(f"expected 'width(activation)': {seg!r}")
        layers.append((int(m.group(1)), m.group(2).lower()))
    return ArchitectureSpec(int(segments[0]), tuple(layers))


def format_architecture(spec: ArchitectureSpec) -> str:
    """Canonical text for a spec; parse(format(s)) == s."""
    segments = [str(spec.input_dim)]
    segments += [f"{width}({act})" for width, act in spec.layers]
    return " : ".join(segments)


_PLACEHOLDER_RE = re.compile(r"\bno(?=\s*\()")


def substitute_output_width(text: str, width: int) -> str:
    """Replace the ``no`` width placeholder with a concrete output width."""
    if width < 1:
        raise NonPositiveWidthError(f"output width must be >= 1, got {width}")
    return _PLACEHOLDER_RE.sub(str(width), text)


# --- the network --------------------------------------------------------


@dataclass
class Mlp:
    """Weights and biases laid out per layer.

    weights[i] has shape (width_i, fan_in_i) and biases[i] shape
    (width_i,); all arrays share one dtype.
    """

    spec: ArchitectureSpec
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self) -> None:
        widths = [self.spec.input_dim] + [w for w, _ in self.spec.layers]
        if len(self.weights) != len(self.spec.layers) or len(self.biases) != len(
            self.spec.layers
        ):
            raise ArchitectureMismatchError(
                f"expected {len(self.spec.layers)} layers of arrays"
            )
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            expect = (widths[i + 1], widths[i])
            if W.shape != expect:
                raise ArchitectureMismatchError(
                    f"layer {i + 1} weights have shape {W.shape}, expected {expect}"
                )
            if b.shape != (widths[i + 1],):
                raise ArchitectureMismatchError(
                    f"layer {i + 1} biases have shape {b.shape}, expected ({widths[i + 1]},)"
                )

    @property
    def dtype(self) -> np.dtype:
        return self.weights[0].dtype

    def copy(self) -> "Mlp":
        return Mlp(
            self.spec,
            [W.copy() for W in self.weights],
            [b.copy() for b in self.biases],
        )

    def parameters(self) -> list[np.ndarray]:
        """All trainable arrays, weights before the bias of each layer."""
        params: list[np.ndarray] = []
        for W, b in zip(self.weights, self.biases):
            params.append(W)
            params.append(b)
        return params


def init_network(spec: ArchitectureSpec, seed: int, dtype=np.float32) -> Mlp:
    """Seeded initialization: He for elu/lrelu layers, Glorot for
    sigmoid/tanh layers, zero biases."""
    rng = np.random.default_rng(seed)
    weights = []
    biases = []
    fan_in = spec.input_dim
    for width, act in spec.layers:
        if act in ("elu", "lrelu"):
            std = math.sqrt(2.0 / fan_in)
        else:
            std = math.sqrt(2.0 / (fan_in + width))
        weights.append((rng.standard_normal((width, fan_in)) * std).astype(dtype))
        biases.append(np.zeros(width, dtype=dtype))
        fan_in = width
    return Mlp(spec, weights, biases)


def _forward_batch(mlp: Mlp, x: np.ndarray) -> tuple[np.ndarray, dict]:
    activations = [x]
    derivs = []
    a = x
    for W, b, (_, act) in zip(mlp.weights, mlp.biases, mlp.spec.layers):
        z = a @ W.T
        z += b
        a, d = ACTIVATIONS[act](z)
        activations.append(a)
        derivs.append(d)
    return a, {"activations": activations, "derivs": derivs}


def _check_input(mlp: Mlp, x, name: str = "input") -> np.ndarray:
    arr = np.asarray(x, dtype=mlp.dtype)
    if arr.ndim not in (1, 2) or arr.shape[-1] != mlp.spec.input_dim:
        raise DimensionMismatchError(
            f"{name} has shape {arr.shape}, expected (.., {mlp.spec.input_dim})"
        )
    return arr


def forward(mlp: Mlp, x) -> tuple[np.ndarray, dict]:
    """Run one input vector through the network.

    Returns the output vector (each component in (0, 1)) and the cache
    backward() consumes. A 2-D input is treated as a batch of rows.
    """
    arr = _check_input(mlp, x)
    squeeze = arr.ndim == 1
    out, cache = _forward_batch(mlp, arr[None, :] if squeeze else arr)
    cache["squeeze"] = squeeze
    return (out[0] if squeeze else out), cache


def predict_batch(mlp: Mlp, x) -> np.ndarray:
    """Outputs for a batch of rows, without keeping a backward cache."""
    a = _check_input(mlp, np.atleast_2d(x))
    for W, b, (_, act) in zip(mlp.weights, mlp.biases, mlp.spec.layers):
        z = a @ W.T
        z += b
        a = ACTIVATIONS[act](z)[0]
    return a


def _batch_bce(outputs: np.ndarray, targets: np.ndarray) -> float:
    p = np.clip(outputs, EPS_CLIP, 1.0 - EPS_CLIP)
    terms = targets * np.log(p) + (1.0 - targets) * np.log1p(-p)
    return float(-terms.mean())


def bce_loss(predictions, targets) -> float:
    """Mean binary cross-entropy over aligned prediction/target vectors.

    Predictions are clipped to [1e-7, 1 - 1e-7] before the logs.
    """
    p = np.asarray(predictions, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if p.shape != y.shape:
        raise LengthMismatchError(f"shapes differ: {p.shape} vs {y.shape}")
    if p.size == 0:
        raise LengthMismatchError("empty prediction vector")
    return _batch_bce(p, y)


def l2_penalty(mlp: Mlp, l2_rate: float) -> float:
    """(l2_rate / 2) times the sum of squared weights; biases excluded."""
    if l2_rate == 0.0:
        return 0.0
    total = 0.0
    for W in mlp.weights:
        total += float(np.sum(np.square(W, dtype=np.float64)))
    return 0.5 * l2_rate * total


def _backward_batch(
    mlp: Mlp, cache: dict, targets: np.ndarray, l2_rate: float
) -> list[tuple[np.ndarray, np.ndarray]]:
    activations = cache["activations"]
    derivs = cache["derivs"]
    outputs = activations[-1]
    batch, width = outputs.shape
    # Fused output delta of sigmoid + cross-entropy: (p - y) / m per
    # instance, then an average over the batch.
    delta = (outputs - targets) / (width * batch)
    grads: list[tuple[np.ndarray, np.ndarray]] = []
    for layer in reversed(range(len(mlp.weights))):
        grad_w = delta.T @ activations[layer]
        if l2_rate:
            grad_w += l2_rate * mlp.weights[layer]
        grads.append((grad_w, delta.sum(axis=0)))
        if layer > 0:
            delta = (delta @ mlp.weights[layer]) * derivs[layer - 1]
    grads.reverse()
    return grads


def backward(
    mlp: Mlp, cache: dict, targets, l2_rate: float = 0.0
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Gradients of the clipped BCE loss plus L2 penalty for every layer.

    The cache must come from a forward() call on this network. Returns
    one (weight gradient, bias gradient) pair per layer.
    """
    y = np.asarray(targets, dtype=mlp.dtype)
    if cache.get("squeeze"):
        y = y[None, :] if y.ndim == 1 else y
    outputs = cache["activations"][-1]
    if y.shape != outputs.shape:
        raise ShapeMismatchError(f"targets shape {y.shape}, outputs {outputs.shape}")
    return _backward_batch(mlp, cache, y, l2_rate)


# --- optimizers ----------------------------------------------------------


@dataclass
class OptimizerState:
    """Moment estimates for one parameter list; step_count starts at 0."""

    kind: str
    step_count: int
    first_moments: list[np.ndarray] | None
    second_moments: list[np.ndarray]


def init_optimizer(kind: str, params: Sequence[np.ndarray]) -> OptimizerState:
    if kind == "adam":
        first = [np.zeros_like(p) for p in params]
    elif kind == "rmsprop":
        first = None
    else:
        raise ValueError(f"unknown optimizer {kind!r}")
    return OptimizerState(kind, 0, first, [np.zeros_like(p) for p in params])


def optimizer_step(
    state: OptimizerState,
    params: Sequence[np.ndarray],
    grads: Sequence[np.ndarray],
    learning_rate: float,
) -> tuple[Sequence[np.ndarray], OptimizerState]:
    """Apply one update in place; returns the same params and state.

    Adam uses beta1=0.9, beta2=0.999, eps=1e-8 with bias correction;
    RMSprop uses rho=0.9, eps=1e-8 and no momentum.
    """
    if len(params) != len(state.second_moments) or len(grads) != len(params):
        raise ShapeMismatchError(
            f"{len(params)} params, {len(grads)} grads, "
            f"{len(state.second_moments)} moment arrays"
        )
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ShapeMismatchError(f"param shape {p.shape} vs grad shape {g.shape}")
    state.step_count += 1
    if state.kind == "adam":
        correction1 = 1.0 - ADAM_BETA1 ** state.step_count
        correction2 = 1.0 - ADAM_BETA2 ** state.step_count
        for p, g, m, v in zip(params, grads, state.first_moments, state.second_moments):
            m *= ADAM_BETA1
            m += (1.0 - ADAM_BETA1) * g
            v *= ADAM_BETA2
            v += (1.0 - ADAM_BETA2) * np.square(g)
            p -= learning_rate * (m / correction1) / (np.sqrt(v / correction2) + ADAM_EPS)
    else:
        for p, g, v in zip(params, grads, state.second_moments):
            v *= RMSPROP_RHO
            v += (1.0 - RMSPROP_RHO) * np.square(g)
            p -= learning_rate * g / (np.sqrt(v) + RMSPROP_EPS)
    return params, state


# --- training ------------------------------------------------------------


@dataclass(frozen=True)
class Hyperparams:
    """Training knobs; epochs is the pass count over the data."""

    epochs: int
    learning_rate: float
    optimizer: str = "adam"
    l2_rate: float = 0.0
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if not self.learning_rate > 0.0:
            raise ValueError(f"learning rate must be > 0, got {self.learning_rate}")
        if self.optimizer not in ("adam", "rmsprop"):
            raise ValueError(f"optimizer must be adam or rmsprop, got {self.optimizer!r}")
        if self.l2_rate < 0.0:
            raise ValueError(f"l2 rate must be >= 0, got {self.l2_rate}")
        if self.batch_size < 1:
            raise ValueError(f"batch size must be >= 1, got {self.batch_size}")


@dataclass(frozen=True)
class ModelConfig:
    """An architecture paired with the hyperparameters to train it."""

    architecture: ArchitectureSpec
    hyperparams: Hyperparams


def train(
    mlp: Mlp, inputs, targets, hp: Hyperparams
) -> tuple[Mlp, list[float]]:
    """Mini-batch training; returns a trained copy and per-epoch losses.

    Batches are drawn from a fresh shuffle each epoch, seeded by
    hp.seed, so runs are reproducible. The recorded loss is the
    batch-size-weighted mean of clipped BCE plus the L2 penalty. Raises
    NonFiniteLossError the first epoch the loss leaves the finite range.
    """
    X = _check_input(mlp, inputs, name="inputs")
    if X.ndim != 2:
        raise DimensionMismatchError(f"inputs must be 2-D, got shape {X.shape}")
    if X.shape[0] == 0:
        raise EmptyDatasetError("no training instances")
    Y = np.asarray(targets, dtype=mlp.dtype)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.shape != (X.shape[0], mlp.spec.output_dim):
        raise ShapeMismatchError(
            f"targets shape {Y.shape}, expected ({X.shape[0]}, {mlp.spec.output_dim})"
        )

    net = mlp.copy()
    params = net.parameters()
    state = init_optimizer(hp.optimizer, params)
    rng = np.random.default_rng(hp.seed)
    n = X.shape[0]
    history: list[float] = []
    for epoch in range(hp.epochs):
        perm = rng.permutation(n)
        total = 0.0
        for start in range(0, n, hp.batch_size):
            idx = perm[start : start + hp.batch_size]
            xb = X[idx]
            yb = Y[idx]
            out, cache = _forward_batch(net, xb)
            total += (_batch_bce(out, yb) + l2_penalty(net, hp.l2_rate)) * len(idx)
            grads = _backward_batch(net, cache, yb, hp.l2_rate)
            flat = [g for pair in grads for g in pair]
            optimizer_step(state, params, flat, hp.learning_rate)
        epoch_loss = total / n
        if not math.isfinite(epoch_loss):
            raise NonFiniteLossError(f"loss became non-finite in epoch {epoch + 1}")
        history.append(epoch_loss)
    return net, history


# --- model files ----------------------------------------------------------

MODEL_FORMAT = "skillclf-model"
MODEL_VERSION = 1


def _emit_json(obj) -> str:
    """JSON text with floats at 17 significant digits."""
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if not math.isfinite(value):
            raise ValueError(f"cannot serialize non-finite float {value}")
        return f"{value:.17g}"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_emit_json(v) for v in obj) + "]"
    if isinstance(obj, dict):
        items = (f"{json.dumps(str(k))}: {_emit_json(v)}" for k, v in obj.items())
        return "{" + ", ".join(items) + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def save_model(
    mlp: Mlp, hp: Hyperparams | None = None, metadata: Mapping | None = None
) -> str:
    """Serialize a model to JSON text; load_model restores it bitwise.

    hp records what trained the network; None is stored as null for
    networks whose training settings are unknown.
    """
    if hp is None:
        hp_doc = None
    else:
        hp_doc = {
            "epochs": hp.epochs,
            "learning_rate": hp.learning_rate,
            "optimizer": hp.optimizer,
            "l2_rate": hp.l2_rate,
            "batch_size": hp.batch_size,
            "seed": hp.seed,
        }
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "architecture": format_architecture(mlp.spec),
        "dtype": str(mlp.dtype),
        "weights": [W.tolist() for W in mlp.weights],
        "biases": [b.tolist() for b in mlp.biases],
        "hyperparams": hp_doc,
        "metadata": dict(metadata or {}),
    }
    return _emit_json(doc) + "\n"


def load_model(text: str) -> tuple[Mlp, Hyperparams | None, dict]:
    """Parse save_model output; raises BadFormatError on structural
    problems and ArchitectureMismatchError when arrays disagree with the
    declared architecture."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise BadFormatError(f"not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise BadFormatError(f"not a {MODEL_FORMAT} file")
    try:
        spec = parse_architecture(doc["architecture"])
        dtype_name = doc["dtype"]
        raw_weights = doc["weights"]
        raw_biases = doc["biases"]
        raw_hp = doc["hyperparams"]
        metadata = doc.get("metadata", {})
    except (KeyError, TypeError) as exc:
        raise BadFormatError(f"missing or malformed field: {exc}") from None
    if dtype_name not in ("float32", "float64"):
        raise BadFormatError(f"unsupported dtype {dtype_name!r}")
    dtype = np.dtype(dtype_name)
    if not isinstance(raw_weights, list) or not isinstance(raw_biases, list):
        raise BadFormatError("weights and biases must be lists")
    if len(raw_weights) != len(spec.layers) or len(raw_biases) != len(spec.layers):
        raise ArchitectureMismatchError(
            f"expected {len(spec.layers)} layers, got {len(raw_weights)} weight "
            f"and {len(raw_biases)} bias arrays"
        )
    weights = []
    biases = []
    for i in range(len(spec.layers)):
        try:
            weights.append(np.array(raw_weights[i], dtype=dtype))
            biases.append(np.array(raw_biases[i], dtype=dtype))
        except (TypeError, ValueError) as exc:
            raise BadFormatError(f"layer {i + 1} arrays malformed: {exc}") from None
    if raw_hp is None:
        hp = None
    else:
        try:
            hp = Hyperparams(
                epochs=int(raw_hp["epochs"]),
                learning_rate=float(raw_hp["learning_rate"]),
                optimizer=str(raw_hp["optimizer"]),
                l2_rate=float(raw_hp["l2_rate"]),
                batch_size=int(raw_hp["batch_size"]),
                seed=int(raw_hp["seed"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise BadFormatError(f"bad hyperparams: {exc}") from None
    if not isinstance(metadata, dict):
        raise BadFormatError("metadata must be an object")
    return Mlp(spec, weights, biases), hp, metadata
