import numpy as np

from fedcluster.data.batching import Batch
from fedcluster.nn.layers import (
    conv2d_backward,
    conv2d_forward,
    dense_backward,
    dense_forward,
    maxpool_backward,
    maxpool_forward,
    relu,
    relu_backward,
    softmax_cross_entropy,
)
from fedcluster.nn.model_spec import Architecture, ModelSpec
from fedcluster.util.errors import ShapeError

# Flat float64 vector holding every weight and bias of a model, layer by layer.
ParamVector = np.ndarray


def init_params(spec: ModelSpec, seed: int) -> ParamVector:
    """Xavier-uniform weights, zero biases; deterministic for (spec, seed)."""
    rng = np.random.default_rng(seed)
    chunks = []
    for layer in spec.layers():
        limit = np.sqrt(6.0 / (layer.fan_in + layer.fan_out))
        chunks.append(rng.uniform(-limit, limit, size=layer.weight).ravel())
        chunks.append(np.zeros(layer.bias).ravel())
    return np.concatenate(chunks).astype(np.float64)


def unpack(spec: ModelSpec, params: ParamVector) -> list[tuple[np.ndarray, np.ndarray]]:
    """Splits a flat vector into per-layer (weight, bias) views."""
    params = np.asarray(params, dtype=np.float64)
    if params.ndim != 1 or params.size != spec.param_count:
        raise ShapeError(
            f"Parameter vector has {params.size} entries, spec expects {spec.param_count}."
        )
    views = []
    offset = 0
    for layer in spec.layers():
        w_size = int(np.prod(layer.weight))
        b_size = int(np.prod(layer.bias))
        w = params[offset : offset + w_size].reshape(layer.weight)
        offset += w_size
        b = params[offset : offset + b_size]
        offset += b_size
        views.append((w, b))
    return views


def _check_batch(spec: ModelSpec, batch: Batch) -> np.ndarray:
    x = np.asarray(batch.inputs, dtype=np.float64)
    if spec.architecture == Architecture.PAPER_CNN:
        if x.shape[1:] != tuple(spec.input_shape):
            raise ShapeError(
                f"Batch inputs have shape {x.shape[1:]}, spec expects {tuple(spec.input_shape)}."
            )
        return x
    x = x.reshape(len(x), -1)
    if x.shape[1] != spec.feature_count:
        raise ShapeError(
            f"Batch inputs have {x.shape[1]} features, spec expects {spec.feature_count}."
        )
    return x


def _check_labels(spec: ModelSpec, labels: np.ndarray) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.min() < 0 or labels.max() >= spec.class_count:
        raise ShapeError(f"Labels must lie in [0, {spec.class_count}).")
    return labels


def _forward_cached(spec: ModelSpec, layers, x: np.ndarray):
    cache = []
    a = x
    dense = layers
    if spec.architecture == Architecture.PAPER_CNN:
        for w, b in layers[:2]:
            z, cols = conv2d_forward(a, w, b)
            pooled, arg = maxpool_forward(relu(z))
            cache.append((a.shape, cols, z, arg))
            a = pooled
        cache.append(a.shape)
        a = a.reshape(len(a), -1)
        dense = layers[2:]
    for i, (w, b) in enumerate(dense):
        z = dense_forward(a, w, b)
        cache.append((a, z))
        a = relu(z) if i < len(dense) - 1 else z
    return a, cache


def forward(spec: ModelSpec, params: ParamVector, batch: Batch) -> np.ndarray:
    """Logits of shape (batch, class_count)."""
    logits, _ = _forward_cached(spec, unpack(spec, params), _check_batch(spec, batch))
    return logits


def loss_and_grad(spec: ModelSpec, params: ParamVector, batch: Batch) -> tuple[float, ParamVector]:
    """Mean softmax cross-entropy of the batch and its gradient with respect to params."""
    layers = unpack(spec, params)
    x = _check_batch(spec, batch)
    labels = _check_labels(spec, batch.labels)
    logits, cache = _forward_cached(spec, layers, x)
    loss, dout = softmax_cross_entropy(logits, labels)

    is_cnn = spec.architecture == Architecture.PAPER_CNN
    dense = layers[2:] if is_cnn else layers
    dense_cache = cache[3:] if is_cnn else cache
    grads = []
    for i in reversed(range(len(dense))):
        a, z = dense_cache[i]
        if i < len(dense) - 1:
            dout = relu_backward(dout, z)
        dout, dw, db = dense_backward(dout, a, dense[i][0])
        grads.append((dw, db))

    if is_cnn:
        dout = dout.reshape(cache[2])
        for i in reversed(range(2)):
            in_shape, cols, z, arg = cache[i]
            dout = relu_backward(maxpool_backward(dout, z.shape, arg), z)
            dout, dw, db = conv2d_backward(dout, in_shape, cols, layers[i][0], need_dx=i > 0)
            grads.append((dw, db))

    grads.reverse()
    flat = np.concatenate([g.ravel() for pair in grads for g in pair])
    return loss, flat
