"""Bidirectional LSTM sequence regressor trained with plain gradient descent on SSE."""
import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit

from eyeaffect.errors import ArgumentError, CheckpointError, DivergenceError, ShapeError

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = 'eyeaffect-blstm'
CHECKPOINT_VERSION = 2

Sequence_ = Tuple[np.ndarray, np.ndarray]


@dataclass(frozen=True)
class ModelConfig:
    hidden_sizes: Tuple[int, ...] = (40, 30)
    learning_rate: float = 1e-5
    input_noise_sd: float = 0.1
    max_epochs: int = 100
    patience_epochs: int = 10
    seed: int = 1787452436
    momentum: float = 0.0
    init_scale: float = 0.1
    forget_bias: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, 'hidden_sizes', tuple(int(h) for h in self.hidden_sizes))
        if not self.hidden_sizes or any(h <= 0 for h in self.hidden_sizes):
            raise ArgumentError("hidden sizes must be positive")
        if self.learning_rate <= 0 or self.max_epochs <= 0 or self.patience_epochs <= 0:
            raise ArgumentError("learning rate, max epochs and patience must be positive")
        if self.patience_epochs > self.max_epochs:
            raise ArgumentError("patience cannot exceed the epoch limit")
        if self.input_noise_sd < 0 or self.init_scale <= 0:
            raise ArgumentError("noise and init scale must be non-negative")
        if not 0.0 <= self.momentum < 1.0:
            raise ArgumentError("momentum must lie in [0, 1)")
        if not 0 <= self.seed < 2 ** 64:
            raise ArgumentError("seed must be a 64-bit unsigned integer")

    def as_dict(self) -> dict:
        data = asdict(self)
        data['hidden_sizes'] = list(self.hidden_sizes)
        return data


@dataclass(frozen=True)
class Standardizer:
    feature_mean: np.ndarray
    feature_sd: np.ndarray
    target_mean: float = 0.0
    target_sd: float = 1.0
    # Columns whose training variance was zero; their SD is replaced by 1.
    flagged: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    def apply(self, matrix: np.ndarray) -> np.ndarray:
        matrix = np.asarray(matrix, dtype=float)
        if matrix.shape[-1] != self.feature_mean.size:
            raise ShapeError(f"expected {self.feature_mean.size} features, got {matrix.shape[-1]}")
        return (matrix - self.feature_mean) / self.feature_sd

    def invert(self, matrix: np.ndarray) -> np.ndarray:
        return np.asarray(matrix, dtype=float) * self.feature_sd + self.feature_mean

    def apply_targets(self, targets: np.ndarray) -> np.ndarray:
        return (np.asarray(targets, dtype=float) - self.target_mean) / self.target_sd

    def invert_targets(self, targets: np.ndarray) -> np.ndarray:
        return np.asarray(targets, dtype=float) * self.target_sd + self.target_mean

    def as_dict(self) -> dict:
        return {'feature_mean': self.feature_mean.tolist(), 'feature_sd': self.feature_sd.tolist(),
                'target_mean': self.target_mean, 'target_sd': self.target_sd,
                'flagged': self.flagged.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> 'Standardizer':
        return cls(np.array(data['feature_mean'], dtype=float), np.array(data['feature_sd'], dtype=float),
                   float(data['target_mean']), float(data['target_sd']),
                   np.array(data['flagged'], dtype=bool))


def _moments(values: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    mean = values.mean(axis=0)
    sd = values.std(axis=0)
    flagged = sd == 0
    return mean, np.where(flagged, 1.0, sd), flagged


def fit_standardizer(train_matrix: np.ndarray, train_targets: Optional[np.ndarray] = None) -> Standardizer:
    """Training-set mean and population SD per feature (and for the target)."""
    train_matrix = np.asarray(train_matrix, dtype=float)
    if train_matrix.ndim != 2 or train_matrix.shape[0] == 0:
        raise ArgumentError("standardizer needs a non-empty 2-D training matrix")
    mean, sd, flagged = _moments(train_matrix)
    if flagged.any():
        logger.warning(f"{int(flagged.sum())} zero-variance feature(s) standardised with SD 1",
                       extra={'stage': 'train'})
    target_mean, target_sd = 0.0, 1.0
    if train_targets is not None:
        t_mean, t_sd, t_flagged = _moments(np.asarray(train_targets, dtype=float)[:, None])
        target_mean, target_sd = float(t_mean[0]), float(t_sd[0])
        if t_flagged[0]:
            logger.warning("constant training target standardised with SD 1", extra={'stage': 'train'})
    return Standardizer(mean, sd, target_mean, target_sd, flagged)


def add_noise(matrix: np.ndarray, sd: float, rng: np.random.Generator) -> np.ndarray:
    matrix = np.asarray(matrix, dtype=float)
    if sd == 0:
        return matrix.copy()
    return matrix + rng.normal(0.0, sd, size=matrix.shape)


class _LSTMCache:
    __slots__ = ('inputs', 'gates', 'cells', 'hidden', 'tanh_cells')

    def __init__(self, inputs, gates, cells, hidden, tanh_cells):
        self.inputs = inputs
        self.gates = gates
        self.cells = cells
        self.hidden = hidden
        self.tanh_cells = tanh_cells


def _lstm_forward(inputs: np.ndarray, W: np.ndarray, U: np.ndarray, b: np.ndarray) -> _LSTMCache:
    """Both directions of one layer in a single time loop.

    ``W``, ``U`` and ``b`` stack the forward (index 0) and backward (index 1)
    weights; the backward direction reads the inputs reversed. State arrays
    are time-major: ``hidden[t, d]`` is step ``t`` of direction ``d``.
    """
    steps = inputs.shape[0]
    size = U.shape[1]
    stacked = np.stack([inputs, inputs[::-1]])
    projected = np.ascontiguousarray((stacked @ W + b[:, None, :]).transpose(1, 0, 2))
    gates = np.empty((steps, 2, 4 * size))
    cells = np.empty((steps, 2, size))
    hidden = np.empty((steps, 2, size))
    h = np.zeros((2, 1, size))
    c = np.zeros((2, size))
    for t in range(steps):
        z = projected[t] + (h @ U)[:, 0]
        # gate order: input, forget, output, candidate
        expit(z[:, :3 * size], out=gates[t, :, :3 * size])
        np.tanh(z[:, 3 * size:], out=gates[t, :, 3 * size:])
        i, f, o, g = np.split(gates[t], 4, axis=1)
        c = f * c + i * g
        hidden[t] = o * np.tanh(c)
        cells[t] = c
        h = hidden[t][:, None, :]
    return _LSTMCache(stacked, gates, cells, hidden, np.tanh(cells))


def _lstm_backward(d_hidden: np.ndarray, cache: _LSTMCache, W: np.ndarray, U: np.ndarray
                   ) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of a fused layer; ``d_hidden`` is time-major like the cache."""
    steps, _, size = d_hidden.shape
    i, f, o, g = np.split(cache.gates, 4, axis=2)
    tanh_c = cache.tanh_cells
    c_prev = np.concatenate([np.zeros((1, 2, size)), cache.cells[:-1]])
    # Everything but the recurrent sums is known before the loop.
    dc_from_dh = o * (1.0 - tanh_c ** 2)
    coef = np.concatenate([g * i * (1.0 - i), c_prev * f * (1.0 - f),
                           tanh_c * o * (1.0 - o), i * (1.0 - g ** 2)], axis=2)
    U_T = U.transpose(0, 2, 1)
    d_z = np.empty((steps, 2, 4 * size))
    dh_next = np.zeros((2, size))
    dc_next = np.zeros((2, size))
    for t in range(steps - 1, -1, -1):
        dh = d_hidden[t] + dh_next
        dc = dh * dc_from_dh[t] + dc_next
        np.multiply(np.concatenate((dc, dc, dh, dc), axis=1), coef[t], out=d_z[t])
        dc_next = dc * f[t]
        dh_next = (d_z[t][:, None, :] @ U_T)[:, 0]
    by_direction = d_z.transpose(1, 0, 2)
    h_prev = np.concatenate([np.zeros((1, 2, size)), cache.hidden[:-1]]).transpose(1, 2, 0)
    d_inputs = by_direction @ W.transpose(0, 2, 1)
    return (d_inputs[0] + d_inputs[1][::-1], cache.inputs.transpose(0, 2, 1) @ by_direction,
            h_prev @ by_direction, by_direction.sum(axis=1))


class BLSTMNetwork:
    """input -> BLSTM layers -> linear scalar output per frame.

    All parameters live in one flat vector; named arrays are views into it.
    Each layer's weights stack the forward and backward directions.
    """

    def __init__(self, input_size: int, hidden_sizes: Sequence[int]) -> None:
        self.input_size = int(input_size)
        self.hidden_sizes = tuple(int(h) for h in hidden_sizes)
        self.layout: List[Tuple[str, Tuple[int, ...]]] = []
        fan_in = self.input_size
        for layer, size in enumerate(self.hidden_sizes):
            self.layout += [(f"l{layer}.W", (2, fan_in, 4 * size)),
                            (f"l{layer}.U", (2, size, 4 * size)),
                            (f"l{layer}.b", (2, 4 * size))]
            fan_in = 2 * size
        self.layout += [('out.w', (fan_in,)), ('out.b', (1,))]
        total = sum(int(np.prod(shape)) for _, shape in self.layout)
        self.params = np.zeros(total)
        self.views = self._views(self.params)

    def _views(self, flat: np.ndarray) -> Dict[str, np.ndarray]:
        views = {}
        offset = 0
        for name, shape in self.layout:
            count = int(np.prod(shape))
            views[name] = flat[offset:offset + count].reshape(shape)
            offset += count
        return views

    def initialise(self, rng: np.random.Generator, scale: float = 0.1, forget_bias: float = 1.0) -> None:
        self.params[:] = rng.uniform(-scale, scale, size=self.params.size)
        for layer, size in enumerate(self.hidden_sizes):
            bias = self.views[f"l{layer}.b"]
            bias[:] = 0.0
            bias[:, size:2 * size] = forget_bias
        self.views['out.b'][:] = 0.0

    def _forward(self, inputs: np.ndarray) -> Tuple[np.ndarray, List[_LSTMCache], np.ndarray]:
        v = self.views
        h = inputs
        caches = []
        for layer in range(len(self.hidden_sizes)):
            cache = _lstm_forward(h, v[f"l{layer}.W"], v[f"l{layer}.U"], v[f"l{layer}.b"])
            caches.append(cache)
            h = np.hstack([cache.hidden[:, 0], cache.hidden[::-1, 1]])
        return h @ v['out.w'] + v['out.b'][0], caches, h

    def forward(self, inputs: np.ndarray) -> np.ndarray:
        inputs = np.asarray(inputs, dtype=float)
        if inputs.ndim != 2 or inputs.shape[1] != self.input_size:
            raise ShapeError(f"expected (frames, {self.input_size}) inputs, got {inputs.shape}")
        if inputs.shape[0] == 0:
            return np.zeros(0)
        return self._forward(inputs)[0]

    def loss_and_gradient(self, inputs: np.ndarray, targets: np.ndarray) -> Tuple[float, np.ndarray]:
        """Sum of squared frame errors and its gradient w.r.t. the flat parameters."""
        grad = np.zeros_like(self.params)
        if len(targets) == 0:
            return 0.0, grad
        v = self.views
        g = self._views(grad)
        prediction, caches, top = self._forward(inputs)
        error = prediction - targets
        d_out = 2.0 * error
        g['out.w'][:] = top.T @ d_out
        g['out.b'][0] = d_out.sum()
        d_h = np.outer(d_out, v['out.w'])
        for layer in range(len(self.hidden_sizes) - 1, -1, -1):
            size = self.hidden_sizes[layer]
            d_hidden = np.stack([d_h[:, :size], d_h[::-1, size:]], axis=1)
            d_h, dW, dU, db = _lstm_backward(d_hidden, caches[layer], v[f"l{layer}.W"], v[f"l{layer}.U"])
            g[f"l{layer}.W"][:] = dW
            g[f"l{layer}.U"][:] = dU
            g[f"l{layer}.b"][:] = db
        return float(np.sum(error ** 2)), grad


@dataclass
class EpochRecord:
    epoch: int
    train_sse: float
    val_sse: float


@dataclass
class TrainedModel:
    network: BLSTMNetwork
    config: ModelConfig
    best_epoch: int
    standardizer: Optional[Standardizer] = None
    catalog_hash: str = ''
    feature_names: Tuple[str, ...] = ()
    # Ground-truth shift the targets were trained with.
    shift_s: float = 0.0


def model_gradients(model, batch: Sequence[Sequence_]) -> Tuple[float, np.ndarray]:
    """Summed SSE and analytic gradient over a list of (inputs, targets) sequences."""
    network = model.network if isinstance(model, TrainedModel) else model
    total = 0.0
    grad = np.zeros_like(network.params)
    for inputs, targets in batch:
        loss, g = network.loss_and_gradient(np.asarray(inputs, dtype=float), np.asarray(targets, dtype=float))
        total += loss
        grad += g
    return total, grad


def _validation_sse(network: BLSTMNetwork, sequences: Sequence[Sequence_]) -> float:
    """Mean squared frame error over all validation frames."""
    errors = [np.sum((network.forward(x) - y) ** 2) for x, y in sequences]
    frames = sum(len(y) for _, y in sequences)
    return float(np.sum(errors) / frames) if frames else float('nan')


def train_blstm(train: Sequence[Sequence_], val: Sequence[Sequence_], config: ModelConfig,
                standardizer: Optional[Standardizer] = None, catalog_hash: str = '',
                feature_names: Sequence[str] = ()) -> Tuple[TrainedModel, List[EpochRecord]]:
    """Train on standardised per-subject sequences with validation early stopping.

    One gradient step per sequence in the given order; fresh input noise is
    drawn for every presentation. Parameters of the best validation epoch are
    returned.
    """
    train = [(np.asarray(x, dtype=float), np.asarray(y, dtype=float)) for x, y in train if len(y)]
    if not train:
        raise ArgumentError("training set is empty")
    val = [(np.asarray(x, dtype=float), np.asarray(y, dtype=float)) for x, y in val if len(y)]
    if not val:
        logger.warning("no validation sequences; early stopping on training SSE", extra={'stage': 'train'})

    rng = np.random.default_rng(config.seed)
    network = BLSTMNetwork(train[0][0].shape[1], config.hidden_sizes)
    network.initialise(rng, config.init_scale, config.forget_bias)
    velocity = np.zeros_like(network.params)
    frames = sum(len(y) for _, y in train)

    history: List[EpochRecord] = []
    best_sse = np.inf
    best_params = network.params.copy()
    best_epoch = 0
    stale = 0
    for epoch in range(1, config.max_epochs + 1):
        total = 0.0
        for inputs, targets in train:
            noisy = add_noise(inputs, config.input_noise_sd, rng)
            loss, grad = network.loss_and_gradient(noisy, targets)
            if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
                raise DivergenceError(epoch)
            velocity = config.momentum * velocity - config.learning_rate * grad
            network.params += velocity
            total += loss
        train_sse = total / frames
        val_sse = _validation_sse(network, val) if val else _validation_sse(network, train)
        if not np.isfinite(val_sse):
            raise DivergenceError(epoch)
        history.append(EpochRecord(epoch, train_sse, val_sse))
        logger.debug(f"epoch {epoch}: train {train_sse:.5f} val {val_sse:.5f}",
                     extra={'stage': 'train', 'epoch': epoch})
        if val_sse < best_sse:
            best_sse, best_epoch, stale = val_sse, epoch, 0
            best_params = network.params.copy()
        else:
            stale += 1
            if stale >= config.patience_epochs:
                break
    network.params[:] = best_params
    logger.info(f"training stopped after {len(history)} epochs; best epoch {best_epoch} "
                f"(val SSE {best_sse:.5f})", extra={'stage': 'train'})
    return TrainedModel(network, config, best_epoch, standardizer, catalog_hash, tuple(feature_names)), history


def predict(model: TrainedModel, features: np.ndarray) -> np.ndarray:
    features = np.asarray(features, dtype=float)
    if features.ndim != 2 or features.shape[1] != model.network.input_size:
        raise ShapeError(f"model expects {model.network.input_size} features, got shape {features.shape}")
    if model.standardizer is None:
        return model.network.forward(features)
    output = model.network.forward(model.standardizer.apply(features))
    return model.standardizer.invert_targets(output)


def save_checkpoint(model: TrainedModel, path: str) -> None:
    payload = {
        'format': CHECKPOINT_FORMAT,
        'version': CHECKPOINT_VERSION,
        'config': model.config.as_dict(),
        'catalog_hash': model.catalog_hash,
        'feature_names': list(model.feature_names),
        'input_size': model.network.input_size,
        'best_epoch': model.best_epoch,
        'shift_s': model.shift_s,
        'standardizer': model.standardizer.as_dict() if model.standardizer else None,
        'params': model.network.params.tolist(),
    }
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(payload, f, indent=1)


def load_checkpoint(path: str, catalog_hash: Optional[str] = None) -> TrainedModel:
    try:
        with open(path, 'r', encoding='utf-8') as f:
            payload = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}")
    if payload.get('format') != CHECKPOINT_FORMAT or payload.get('version') != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path} is not a version {CHECKPOINT_VERSION} {CHECKPOINT_FORMAT} checkpoint")
    if catalog_hash is not None and payload['catalog_hash'] != catalog_hash:
        raise CheckpointError("checkpoint was trained on a different feature catalog")
    config = ModelConfig(**payload['config'])
    network = BLSTMNetwork(payload['input_size'], config.hidden_sizes)
    params = np.array(payload['params'], dtype=float)
    if params.size != network.params.size:
        raise CheckpointError("checkpoint parameter count does not match its architecture")
    network.params[:] = params
    standardizer = Standardizer.from_dict(payload['standardizer']) if payload['standardizer'] else None
    return TrainedModel(network, config, payload['best_epoch'], standardizer,
                        payload['catalog_hash'], tuple(payload['feature_names']),
                        float(payload.get('shift_s', 0.0)))
