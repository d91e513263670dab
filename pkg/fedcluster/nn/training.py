import logging

import numpy as np

from fedcluster.data.batching import Batch, batches
from fedcluster.data.datasets import ClientShard, LabeledDataset
from fedcluster.nn.model_spec import ModelSpec
from fedcluster.nn.network import ParamVector, forward, loss_and_grad
from fedcluster.util.errors import DivergenceError, EmptyDatasetError, ShapeError
from fedcluster.util.seeding import derive_seed

logger = logging.getLogger(__name__)

EVAL_CHUNK = 256


def sgd_step(params: ParamVector, grad: ParamVector, lr: float) -> ParamVector:
    params = np.asarray(params, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if params.shape != grad.shape:
        raise ShapeError(f"params has shape {params.shape} but grad has shape {grad.shape}.")
    return params - lr * grad


def local_train(
    spec: ModelSpec,
    params: ParamVector,
    shard: ClientShard,
    epochs: int,
    batch_size: int,
    lr: float,
    seed: int,
) -> tuple[ParamVector, float]:
    """
    Runs `epochs` passes of mini-batch SGD over a client's shard.

    Parameters:
        spec (ModelSpec): Model architecture.
        params (ParamVector): Starting parameters, usually the current global model.
        shard (ClientShard): The client's private samples.
        epochs (int): Number of passes; 0 only measures the loss.
        batch_size (int): Mini-batch size.
        lr (float): SGD learning rate.
        seed (int): Seed of the per-epoch shuffles.

    Returns:
        tuple: The trained parameters and the mean batch loss of the final epoch. With
        `epochs=0` the parameters are returned unchanged together with their loss over
        one full pass of the shard.
    """
    if shard.sample_count == 0:
        raise EmptyDatasetError(f"Client {shard.client_id} has no samples to train on.")
    if epochs < 0:
        raise ValueError(f"epochs must be non-negative, got {epochs}")

    params = np.array(params, dtype=np.float64)
    if epochs == 0:
        # size-weighted, so a short final batch does not skew the full-pass loss
        passed = batches(shard, batch_size, derive_seed(seed, "epoch", 0))
        losses = [loss_and_grad(spec, params, batch)[0] for batch in passed]
        return params, float(np.average(losses, weights=[len(batch) for batch in passed]))

    losses = []
    for epoch in range(epochs):
        losses = []
        for batch in batches(shard, batch_size, derive_seed(seed, "epoch", epoch)):
            loss, grad = loss_and_grad(spec, params, batch)
            params = sgd_step(params, grad, lr)
            losses.append(loss)
        if not (np.isfinite(losses).all() and np.isfinite(params).all()):
            raise DivergenceError(
                f"Client {shard.client_id} diverged in epoch {epoch} (lr={lr}); "
                "try a smaller learning rate."
            )
    return params, float(np.mean(losses))


def predict(spec: ModelSpec, params: ParamVector, dataset: LabeledDataset) -> np.ndarray:
    """Argmax class per sample; ties go to the smallest class id."""
    predictions = []
    for start in range(0, len(dataset), EVAL_CHUNK):
        chunk = slice(start, start + EVAL_CHUNK)
        logits = forward(spec, params, Batch(dataset.inputs[chunk], dataset.labels[chunk]))
        predictions.append(logits.argmax(axis=1))
    return np.concatenate(predictions)


def evaluate(spec: ModelSpec, params: ParamVector, dataset: LabeledDataset) -> float:
    dataset = getattr(dataset, "dataset", dataset)
    if len(dataset) == 0:
        raise EmptyDatasetError("Cannot evaluate on an empty dataset.")
    return float(np.mean(predict(spec, params, dataset) == dataset.labels))
