"""The graph auto-encoder.

Encoder: L stacked two-weight graph convolutions,

    H(l+1) = act( H(l) W0(l) + P H(l) W1(l) ),   P = row_normalize(A_cand)

with H(0) the node features, relu on hidden layers and identity on the
final layer, whose output is the embedding Z. Decoder: an RBF kernel on
embedding pairs, alpha[i, j] = exp(-0.5 * ||z_i - z_j||^2), which is a
soft adjacency with unit diagonal.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ContractError, DimensionError, ParseError
from .graph import RefinementInstance, row_normalize

HIDDEN_ACTIVATIONS = ("relu",)
FINAL_ACTIVATIONS = ("identity",)


@dataclass(frozen=True)
class ModelConfig:
    num_layers: int = 3
    hidden_dim: int = 32
    input_dim: int = 14
    hidden_activation: str = "relu"
    final_activation: str = "identity"

    def __post_init__(self):
        if self.num_layers < 1 or self.hidden_dim < 1 or self.input_dim < 1:
            raise ContractError("num_layers, hidden_dim and input_dim must all be >= 1")
        if self.hidden_activation not in HIDDEN_ACTIVATIONS:
            raise ContractError(f"hidden_activation must be one of {HIDDEN_ACTIVATIONS}")
        if self.final_activation not in FINAL_ACTIVATIONS:
            raise ContractError(f"final_activation must be one of {FINAL_ACTIVATIONS}")

    def layer_shapes(self) -> list[tuple[int, int]]:
        shapes = []
        for layer in range(self.num_layers):
            d_in = self.input_dim if layer == 0 else self.hidden_dim
            shapes.append((d_in, self.hidden_dim))
        return shapes


@dataclass
class LayerParams:
    """The two weight matrices of one graph-convolution layer."""

    w0: Tensor
    w1: Tensor


@dataclass
class ForwardTrace:
    """All intermediates of one forward pass, kept for backward."""

    hidden: list[Tensor]          # H(0) .. H(L)
    embedding: Tensor             # Z = H(L), N x E
    soft_adjacency: Tensor        # alpha, N x N in (0, 1], unit diagonal

    @property
    def alpha(self) -> np.ndarray:
        return self.soft_adjacency.value


def init_params(config: ModelConfig, seed: int) -> list[LayerParams]:
    """Uniform Glorot initialization, bound sqrt(6 / (d_in + d_out)).

    Draw order is fixed and documented: for each layer in turn, w0 is drawn
    before w1, each filled row-major, all from one PCG64 stream seeded with
    ``seed``. The same seed therefore reproduces bit-identical weights.
    """
    rng = np.random.default_rng(seed)
    params = []
    for d_in, d_out in config.layer_shapes():
        bound = math.sqrt(6.0 / (d_in + d_out))
        w0 = rng.uniform(-bound, bound, size=(d_in, d_out))
        w1 = rng.uniform(-bound, bound, size=(d_in, d_out))
        params.append(LayerParams(ad.parameter(w0), ad.parameter(w1)))
    return params


def check_params(params: list[LayerParams], config: ModelConfig) -> None:
    shapes = config.layer_shapes()
    if len(params) != len(shapes):
        raise DimensionError(f"expected {len(shapes)} layers, got {len(params)}")
    for layer, (p, expected) in enumerate(zip(params, shapes)):
        for name, w in (("w0", p.w0), ("w1", p.w1)):
            if w.shape != expected:
                raise DimensionError(
                    f"layer {layer} {name}: expected shape {expected}, got {w.shape}"
                )


def encode(
    instance: RefinementInstance, params: list[LayerParams], config: ModelConfig
) -> list[Tensor]:
    """Run the encoder; returns the hidden states H(0) .. H(L)."""
    check_params(params, config)
    if instance.features.shape[1] != config.input_dim:
        raise DimensionError(
            f"instance has {instance.features.shape[1]} feature columns, "
            f"config expects {config.input_dim}"
        )
    x = ad.constant(instance.features)
    p = ad.constant(row_normalize(instance.candidate_adjacency))
    hidden = [x]
    h = x
    for layer_index, layer in enumerate(params):
        pre = ad.add(ad.matmul(h, layer.w0), ad.matmul(ad.matmul(p, h), layer.w1))
        is_last = layer_index == config.num_layers - 1
        activation = config.final_activation if is_last else config.hidden_activation
        h = ad.relu(pre) if activation == "relu" else pre
        hidden.append(h)
    return hidden


def decode(embedding: Tensor) -> Tensor:
    """Soft adjacency from embeddings: alpha = exp(-0.5 * pairwise sq dist)."""
    return ad.elementwise_exp(ad.scale(ad.pairwise_sq_dist(embedding), -0.5))


def forward(
    instance: RefinementInstance, params: list[LayerParams], config: ModelConfig
) -> ForwardTrace:
    """Encoder followed by decoder, with all intermediates retained."""
    hidden = encode(instance, params, config)
    soft = decode(hidden[-1])
    return ForwardTrace(hidden=hidden, embedding=hidden[-1], soft_adjacency=soft)


def predict_edges(soft_adjacency: np.ndarray, threshold: float) -> np.ndarray:
    """Binarize a soft adjacency: off-diagonal entries >= threshold become edges."""
    if not 0.0 < threshold < 1.0:
        raise ContractError(f"threshold must lie strictly inside (0, 1), got {threshold}")
    alpha = np.asarray(soft_adjacency, dtype=np.float64)
    pred = (alpha >= threshold).astype(np.float64)
    np.fill_diagonal(pred, 0.0)
    return pred


# --- checkpoint format ------------------------------------------------------
#
# JSON object:
#   {"config": {...}, "layers": [{"w0": {rows, cols, values}, "w1": {...}}, ...],
#    "seed": int, "epoch": int, "optimizer": {...} | absent}
# Values are row-major decimal floats at full round-trip precision.


def matrix_to_json(arr: np.ndarray) -> dict:
    arr = np.asarray(arr, dtype=np.float64)
    return {
        "rows": int(arr.shape[0]),
        "cols": int(arr.shape[1]),
        "values": [float(v) for v in arr.ravel(order="C")],
    }


def matrix_from_json(obj: dict, context: str = "matrix") -> np.ndarray:
    try:
        rows, cols, values = int(obj["rows"]), int(obj["cols"]), obj["values"]
    except (KeyError, TypeError) as exc:
        raise ParseError(f"{context}: missing or malformed field {exc}") from exc
    if len(values) != rows * cols:
        raise ParseError(f"{context}: expected {rows * cols} values, got {len(values)}")
    return np.array(values, dtype=np.float64).reshape(rows, cols)


@dataclass
class Checkpoint:
    params: list[LayerParams]
    config: ModelConfig
    seed: int
    epoch: int
    optimizer: dict | None = field(default=None)


def save_checkpoint(
    path,
    params: list[LayerParams],
    config: ModelConfig,
    seed: int,
    epoch: int,
    optimizer: dict | None = None,
) -> None:
    payload = {
        "config": {
            "num_layers": config.num_layers,
            "hidden_dim": config.hidden_dim,
            "input_dim": config.input_dim,
            "hidden_activation": config.hidden_activation,
            "final_activation": config.final_activation,
        },
        "layers": [
            {"w0": matrix_to_json(p.w0.value), "w1": matrix_to_json(p.w1.value)}
            for p in params
        ],
        "seed": int(seed),
        "epoch": int(epoch),
    }
    if optimizer is not None:
        payload["optimizer"] = optimizer
    with open(path, "w") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_checkpoint(path) -> Checkpoint:
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}") from exc
    try:
        cfg = payload["config"]
        config = ModelConfig(
            num_layers=int(cfg["num_layers"]),
            hidden_dim=int(cfg["hidden_dim"]),
            input_dim=int(cfg["input_dim"]),
            hidden_activation=cfg["hidden_activation"],
            final_activation=cfg["final_activation"],
        )
        layers = payload["layers"]
        seed = int(payload["seed"])
        epoch = int(payload["epoch"])
    except (KeyError, TypeError) as exc:
        raise ParseError(f"{path}: missing or malformed checkpoint field {exc}") from exc
    params = []
    for i, layer in enumerate(layers):
        if "w0" not in layer or "w1" not in layer:
            raise ParseError(f"{path}: layers[{i}] must contain w0 and w1")
        params.append(
            LayerParams(
                w0=ad.parameter(matrix_from_json(layer["w0"], f"layers[{i}].w0")),
                w1=ad.parameter(matrix_from_json(layer["w1"], f"layers[{i}].w1")),
            )
        )
    check_params(params, config)
    return Checkpoint(
        params=params,
        config=config,
        seed=seed,
        epoch=epoch,
        optimizer=payload.get("optimizer"),
    )
