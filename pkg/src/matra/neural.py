"""Dense feed-forward regressor written directly in numpy.

Each hidden layer is ``affine -> [batch norm] -> tanh -> dropout``; the output
is one linear unit. Training minimizes mean squared error plus an L1 penalty
on the weight matrices (biases excluded) with Adam.

Presets ``matra1`` and ``matra2`` reproduce the six- and ten-hidden-layer
topologies. With ``input_dim=7`` their dense parameter totals are 45953 and
133473.
"""

from __future__ import annotations

import base64
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from matra.features import FeatureNormalization, apply_normalization, feature_fingerprint, \
    fit_normalization

PRESETS = {
    "matra1": (256, 128, 64, 32, 16, 8),
    "matra2": (256, 256, 128, 128, 64, 64, 32, 32, 16, 8),
}

MODEL_FORMAT = "matra-model"
MODEL_VERSION = 1
BN_EPS = 1e-8
BN_MOMENTUM = 0.9


class ModelFormatError(ValueError):
    """A model file is malformed or inconsistent with its own config."""


class ModelVersionError(ModelFormatError):
    pass


class TrainingDiverged(FloatingPointError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    input_dim: int = 24
    hidden_widths: tuple[int, ...] = PRESETS["matra1"]
    dropout_rate: float = 0.2
    l1_lambda: float = 1e-5
    use_batch_norm: bool = False
    seed: int = 0
    activation: str = "tanh"

    def __post_init__(self):
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))
        if self.input_dim < 1 or any(w < 1 for w in self.hidden_widths):
            raise ValueError("layer widths must be positive")
        if not 0 <= self.dropout_rate < 1:
            raise ValueError("dropout_rate must be in [0, 1)")
        if self.l1_lambda < 0:
            raise ValueError("l1_lambda must be non-negative")
        if self.activation != "tanh":
            raise ValueError("only tanh hidden activations are supported")

    @classmethod
    def preset(cls, name: str, **overrides) -> "ModelConfig":
        if name not in PRESETS:
            raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
        return cls(hidden_widths=PRESETS[name], **overrides)

    @property
    def layer_sizes(self) -> list[tuple[int, int]]:
        """(fan_in, fan_out) of every dense layer, output layer last."""
        dims = [self.input_dim, *self.hidden_widths, 1]
        return list(zip(dims[:-1], dims[1:]))


def layer_param_counts(config: ModelConfig) -> list[int]:
    """Dense-layer parameter counts in order (weights + biases)."""
    return [fi * fo + fo for fi, fo in config.layer_sizes]


def param_count(config: ModelConfig) -> int:
    """Total parameters. Batch norm, when on, adds scale, shift and the two
    running statistics per hidden unit."""
    total = sum(layer_param_counts(config))
    if config.use_batch_norm:
        total += 4 * sum(config.hidden_widths)
    return total


@dataclass
class ModelParameters:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    bn_gamma: list[np.ndarray] = field(default_factory=list)
    bn_beta: list[np.ndarray] = field(default_factory=list)
    bn_mean: list[np.ndarray] = field(default_factory=list)
    bn_var: list[np.ndarray] = field(default_factory=list)

    def trainable(self) -> dict[str, np.ndarray]:
        out = {}
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            out[f"W{i}"] = W
            out[f"b{i}"] = b
        for i, (g, be) in enumerate(zip(self.bn_gamma, self.bn_beta)):
            out[f"gamma{i}"] = g
            out[f"beta{i}"] = be
        return out

    def arrays(self) -> dict[str, np.ndarray]:
        """Every array, trainable or not, under a stable name."""
        out = self.trainable()
        for i, (m, v) in enumerate(zip(self.bn_mean, self.bn_var)):
            out[f"running_mean{i}"] = m
            out[f"running_var{i}"] = v
        return out

    def copy(self) -> "ModelParameters":
        return ModelParameters(*[[a.copy() for a in getattr(self, f)] for f in
                                 ("weights", "biases", "bn_gamma", "bn_beta", "bn_mean", "bn_var")])


def expected_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    shapes = {}
    for i, (fi, fo) in enumerate(config.layer_sizes):
        shapes[f"W{i}"] = (fi, fo)
        shapes[f"b{i}"] = (fo,)
    if config.use_batch_norm:
        for i, w in enumerate(config.hidden_widths):
            shapes[f"gamma{i}"] = (w,)
            shapes[f"beta{i}"] = (w,)
        for i, w in enumerate(config.hidden_widths):
            shapes[f"running_mean{i}"] = (w,)
            shapes[f"running_var{i}"] = (w,)
    return shapes


def init_params(config: ModelConfig, rng: Optional[np.random.Generator] = None) -> ModelParameters:
    """Glorot-uniform weights, zero biases; batch norm starts as identity."""
    if rng is None:
        rng = np.random.default_rng(config.seed)
    weights, biases = [], []
    for fi, fo in config.layer_sizes:
        limit = math.sqrt(6.0 / (fi + fo))
        weights.append(rng.uniform(-limit, limit, size=(fi, fo)))
        biases.append(np.zeros(fo))
    params = ModelParameters(weights, biases)
    if config.use_batch_norm:
        for w in config.hidden_widths:
            params.bn_gamma.append(np.ones(w))
            params.bn_beta.append(np.zeros(w))
            params.bn_mean.append(np.zeros(w))
            params.bn_var.append(np.ones(w))
    return params


def forward(params: ModelParameters, config: ModelConfig, X, mode: str = "infer",
            rng: Optional[np.random.Generator] = None):
    """Run the network on a ``(batch, input_dim)`` matrix.

    Returns ``(predictions, cache)``; predictions have shape ``(batch,)``.
    In ``train`` mode dropout needs ``rng`` (unless the rate is 0) and batch
    norm uses batch statistics; ``infer`` mode uses the running statistics.
    """
    if mode not in ("train", "infer"):
        raise ValueError(f"mode must be 'train' or 'infer', got {mode!r}")
    a = np.asarray(X, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] != config.input_dim:
        raise ValueError(f"expected input of shape (batch, {config.input_dim}), got {a.shape}")
    train = mode == "train"
    p = config.dropout_rate
    if train and p > 0 and rng is None:
        raise ValueError("train-mode dropout needs an rng")

    layers = []
    n_hidden = len(config.hidden_widths)
    for i in range(n_hidden):
        c = {"a_prev": a}
        z = a @ params.weights[i] + params.biases[i]
        if config.use_batch_norm:
            if train:
                mu = z.mean(axis=0)
                var = z.var(axis=0)
                c["batch_mean"], c["batch_var"] = mu, var
            else:
                mu, var = params.bn_mean[i], params.bn_var[i]
            inv_std = 1.0 / np.sqrt(var + BN_EPS)
            xhat = (z - mu) * inv_std
            c["xhat"], c["inv_std"] = xhat, inv_std
            z = xhat * params.bn_gamma[i] + params.bn_beta[i]
        t = np.tanh(z)
        c["t"] = t
        if train and p > 0:
            mask = (rng.random(t.shape) >= p) / (1.0 - p)
            c["mask"] = mask
            a = t * mask
        else:
            a = t
        layers.append(c)
    out = a @ params.weights[-1] + params.biases[-1]
    cache = {"layers": layers, "a_last": a, "pred": out[:, 0], "params": params,
             "config": config}
    return out[:, 0], cache


def loss(predictions, targets, params: ModelParameters, l1_lambda: float) -> float:
    """Mean squared error plus ``l1_lambda`` times the summed absolute weights."""
    predictions = np.asarray(predictions, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    mse = float(np.mean((predictions - targets) ** 2))
    if l1_lambda:
        mse += l1_lambda * sum(float(np.abs(W).sum()) for W in params.weights)
    return mse


def backward(cache, targets) -> dict[str, np.ndarray]:
    """Gradients of :func:`loss` for every trainable array, keyed like
    ``ModelParameters.trainable()``. The L1 term uses sign(0) = 0."""
    params: ModelParameters = cache["params"]
    config: ModelConfig = cache["config"]
    lam = config.l1_lambda
    y = np.asarray(targets, dtype=np.float64).reshape(-1)
    pred = cache["pred"]
    B = pred.shape[0]
    grads = {}

    g = (2.0 / B) * (pred - y)[:, None]
    last = len(params.weights) - 1
    grads[f"W{last}"] = cache["a_last"].T @ g + lam * np.sign(params.weights[last])
    grads[f"b{last}"] = g.sum(axis=0)
    da = g @ params.weights[last].T

    for i in reversed(range(len(cache["layers"]))):
        c = cache["layers"][i]
        if "mask" in c:
            da = da * c["mask"]
        dz = da * (1.0 - c["t"] ** 2)
        if config.use_batch_norm:
            xhat = c["xhat"]
            grads[f"gamma{i}"] = (dz * xhat).sum(axis=0)
            grads[f"beta{i}"] = dz.sum(axis=0)
            dxhat = dz * params.bn_gamma[i]
            if "batch_mean" in c:
                dz = (c["inv_std"] / B) * (B * dxhat - dxhat.sum(axis=0)
                                           - xhat * (dxhat * xhat).sum(axis=0))
            else:
                dz = dxhat * c["inv_std"]
        grads[f"W{i}"] = c["a_prev"].T @ dz + lam * np.sign(params.weights[i])
        grads[f"b{i}"] = dz.sum(axis=0)
        da = dz @ params.weights[i].T
    return grads


@dataclass
class TrainState:
    """Adam moments and step counter."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def fresh(cls, params: ModelParameters, **hyper) -> "TrainState":
        tr = params.trainable()
        return cls({k: np.zeros_like(a) for k, a in tr.items()},
                   {k: np.zeros_like(a) for k, a in tr.items()}, **hyper)


def adam_step(state: TrainState, params: ModelParameters, grads: dict[str, np.ndarray]):
    """One bias-corrected Adam update, applied in place. Returns ``(params, state)``."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for name, w in params.trainable().items():
        g = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        w -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state


def update_running_stats(params: ModelParameters, cache, momentum: float = BN_MOMENTUM) -> None:
    for i, c in enumerate(cache["layers"]):
        if "batch_mean" in c:
            params.bn_mean[i] *= momentum
            params.bn_mean[i] += (1 - momentum) * c["batch_mean"]
            params.bn_var[i] *= momentum
            params.bn_var[i] += (1 - momentum) * c["batch_var"]


@dataclass
class TrainResult:
    params: ModelParameters
    normalization: FeatureNormalization
    train_loss: list[float]
    val_mse: list[float]
    # 1-based epoch whose weights were kept
    best_epoch: int = 0


def train(config: ModelConfig, features, targets, epochs: int = 500, batch_size: int = 32,
          validation_fraction: float = 0.1, lr: float = 1e-3, normalize: bool = True,
          restore_best: bool = True, log=None) -> TrainResult:
    """Fit a model with epoch-shuffled mini-batch Adam.

    A ``validation_fraction`` share of rows is held out (chosen by the seed);
    normalization is fitted on the remaining training rows only. With
    ``restore_best`` the returned weights are those of the epoch with the
    lowest validation MSE, otherwise the last epoch's. Given the same config
    and data the loss traces are bitwise reproducible.
    """
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64).reshape(-1)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("training set is empty")
    if X.shape[0] != y.shape[0]:
        raise ValueError(f"{X.shape[0]} feature rows but {y.shape[0]} targets")
    if not np.all(np.isfinite(y)) or y.min() < 0 or y.max() > 1:
        raise ValueError("targets must lie in [0, 1]")
    if not 0 <= validation_fraction < 1:
        raise ValueError("validation_fraction must be in [0, 1)")
    if batch_size < 1 or epochs < 0:
        raise ValueError("batch_size must be positive and epochs non-negative")

    split_seq, init_seq, drop_seq = np.random.SeedSequence(config.seed).spawn(3)
    split_rng = np.random.default_rng(split_seq)
    drop_rng = np.random.default_rng(drop_seq)

    n = X.shape[0]
    order = split_rng.permutation(n)
    n_val = int(round(n * validation_fraction)) if n > 1 else 0
    n_val = min(n_val, n - 1)
    val_idx, tr_idx = np.sort(order[:n_val]), np.sort(order[n_val:])

    if normalize:
        norm = fit_normalization(X[tr_idx])
    else:
        norm = FeatureNormalization(np.zeros(X.shape[1]), np.ones(X.shape[1]))
    Xn = apply_normalization(X, norm)
    X_tr, y_tr = Xn[tr_idx], y[tr_idx]
    X_val, y_val = Xn[val_idx], y[val_idx]

    params = init_params(config, np.random.default_rng(init_seq))
    state = TrainState.fresh(params, lr=lr)
    train_loss, val_mse = [], []
    best = (math.inf, 0, None)
    for epoch in range(epochs):
        perm = split_rng.permutation(len(tr_idx))
        batch_losses = []
        for start in range(0, len(perm), batch_size):
            idx = perm[start:start + batch_size]
            pred, cache = forward(params, config, X_tr[idx], "train", drop_rng)
            value = loss(pred, y_tr[idx], params, config.l1_lambda)
            if not math.isfinite(value):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch + 1}, "
                                       f"batch starting at row {start}")
            batch_losses.append(value)
            grads = backward(cache, y_tr[idx])
            adam_step(state, params, grads)
            update_running_stats(params, cache)
        train_loss.append(float(np.mean(batch_losses)))
        if n_val:
            vpred, _ = forward(params, config, X_val, "infer")
            val_mse.append(float(np.mean((vpred - y_val) ** 2)))
            if restore_best and val_mse[-1] < best[0]:
                best = (val_mse[-1], epoch + 1, params.copy())
        else:
            val_mse.append(float("nan"))
        if log is not None:
            log(epoch + 1, train_loss[-1], val_mse[-1])
    if best[2] is not None:
        return TrainResult(best[2], norm, train_loss, val_mse, best[1])
    return TrainResult(params, norm, train_loss, val_mse, epochs)


def predict(params: ModelParameters, config: ModelConfig, features,
            normalization: Optional[FeatureNormalization] = None):
    """Scores clamped to [0, 1]: a float for one vector, an array for a matrix."""
    arr = np.asarray(features, dtype=np.float64)
    single = arr.ndim == 1
    X = arr[None, :] if single else arr
    if normalization is not None:
        X = apply_normalization(X, normalization)
    out, _ = forward(params, config, X, "infer")
    out = np.clip(out, 0.0, 1.0)
    return float(out[0]) if single else out


# -- persistence ------------------------------------------------------------

def _encode(a: np.ndarray) -> dict:
    return {"shape": list(a.shape),
            "data": base64.b64encode(np.ascontiguousarray(a, dtype="<f8").tobytes()).decode("ascii")}


def _decode(obj: dict, name: str) -> np.ndarray:
    try:
        shape = tuple(int(s) for s in obj["shape"])
        raw = base64.b64decode(obj["data"], validate=True)
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"array {name}: {exc}") from None
    if len(raw) != 8 * math.prod(shape):
        raise ModelFormatError(f"array {name}: {len(raw)} bytes do not match shape {shape}")
    return np.frombuffer(raw, dtype="<f8").reshape(shape).astype(np.float64)


def save_model(params: ModelParameters, config: ModelConfig,
               normalization: FeatureNormalization, path) -> None:
    cfg = asdict(config)
    cfg["hidden_widths"] = list(config.hidden_widths)
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "config": cfg,
        "feature_fingerprint": feature_fingerprint(),
        "normalization": {"mean": _encode(normalization.mean), "std": _encode(normalization.std)},
        "arrays": {name: _encode(a) for name, a in params.arrays().items()},
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_model(path) -> tuple[ModelParameters, ModelConfig, FeatureNormalization]:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"{path}: {exc}") from None
    if doc.get("format") != MODEL_FORMAT:
        raise ModelFormatError(f"{path}: not a {MODEL_FORMAT} file")
    if doc.get("version") != MODEL_VERSION:
        raise ModelVersionError(f"{path}: model version {doc.get('version')!r}, "
                                f"this build reads version {MODEL_VERSION}")
    if doc.get("feature_fingerprint") != feature_fingerprint():
        raise ModelFormatError(f"{path}: feature-order fingerprint mismatch")
    try:
        config = ModelConfig(**doc["config"])
    except (TypeError, ValueError) as exc:
        raise ModelFormatError(f"{path}: bad config: {exc}") from None

    arrays = {name: _decode(obj, name) for name, obj in doc.get("arrays", {}).items()}
    shapes = expected_shapes(config)
    if set(arrays) != set(shapes):
        raise ModelFormatError(f"{path}: arrays {sorted(arrays)} do not match config")
    for name, shape in shapes.items():
        if arrays[name].shape != shape:
            raise ModelFormatError(f"{path}: {name} has shape {arrays[name].shape}, "
                                   f"config requires {shape}")
        if not np.all(np.isfinite(arrays[name])):
            raise ModelFormatError(f"{path}: {name} contains non-finite values")

    n_dense = len(config.layer_sizes)
    n_bn = len(config.hidden_widths) if config.use_batch_norm else 0
    params = ModelParameters(
        [arrays[f"W{i}"] for i in range(n_dense)],
        [arrays[f"b{i}"] for i in range(n_dense)],
        [arrays[f"gamma{i}"] for i in range(n_bn)],
        [arrays[f"beta{i}"] for i in range(n_bn)],
        [arrays[f"running_mean{i}"] for i in range(n_bn)],
        [arrays[f"running_var{i}"] for i in range(n_bn)],
    )
    norm_obj = doc.get("normalization") or {}
    try:
        normalization = FeatureNormalization(_decode(norm_obj["mean"], "mean"),
                                             _decode(norm_obj["std"], "std"))
    except (KeyError, ValueError) as exc:
        raise ModelFormatError(f"{path}: bad normalization block: {exc}") from None
    if normalization.mean.shape != (config.input_dim,):
        raise ModelFormatError(f"{path}: normalization length does not match input_dim")
    return params, config, normalization
