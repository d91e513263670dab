import numpy as np

from fedcluster.data.datasets import ClientShard, LabeledDataset
from fedcluster.util.seeding import stream

MAX_MEAN_DRAWS = 1000


def _validate(n_groups, clients_per_group, dims, spread, samples):
    if n_groups < 1 or clients_per_group < 1 or n_groups * clients_per_group < 2:
        raise ValueError(
            f"Need at least two clients, got {n_groups} groups x {clients_per_group} clients."
        )
    if dims < 1:
        raise ValueError(f"dims must be at least 1, got {dims}")
    if spread < 0:
        raise ValueError(f"spread must be non-negative, got {spread}")
    if samples < 1:
        raise ValueError(f"samples per client must be at least 1, got {samples}")


def blob_means(n_groups: int, dims: int, spread: float, seed: int) -> np.ndarray:
    """Group means whose pairwise distances are all at least 10 * spread (and non-zero)."""
    rng = stream(seed, "synth", 0)
    min_gap = max(10.0 * spread, 1e-6)
    scale = max(10.0 * spread, 1.0) * max(n_groups, 2)
    for _ in range(MAX_MEAN_DRAWS):
        means = rng.uniform(-scale, scale, size=(n_groups, dims))
        gaps = np.linalg.norm(means[:, None, :] - means[None, :, :], axis=-1)
        if n_groups < 2 or gaps[np.triu_indices(n_groups, 1)].min() >= min_gap:
            return means
    raise ValueError(f"Could not place {n_groups} separated means in {dims} dimensions.")


def synth_generate(
    n_groups: int,
    clients_per_group: int,
    dims: int,
    spread: float,
    seed: int,
    samples_per_client: int = 64,
) -> list[ClientShard]:
    """
    Planted-group data: every client of group g draws Gaussian samples around the group's
    mean and labels them g. Client ids run group by group, so group g owns clients
    g*clients_per_group .. (g+1)*clients_per_group - 1.
    """
    _validate(n_groups, clients_per_group, dims, spread, samples_per_client)
    means = blob_means(n_groups, dims, spread, seed)
    shards = []
    for client in range(n_groups * clients_per_group):
        group = client // clients_per_group
        noise = stream(seed, "synth", 1, client).standard_normal((samples_per_client, dims))
        offset = client * samples_per_client
        shards.append(
            ClientShard(
                client,
                LabeledDataset(
                    means[group] + spread * noise,
                    np.full(samples_per_client, group, dtype=np.int64),
                    np.arange(offset, offset + samples_per_client),
                ),
            )
        )
    return shards


def synth_holdout(
    n_groups: int, dims: int, spread: float, seed: int, samples_per_group: int = 128
) -> LabeledDataset:
    """A held-out set drawn from the same blobs as `synth_generate` with the same seed."""
    _validate(n_groups, 2, dims, spread, samples_per_group)
    means = blob_means(n_groups, dims, spread, seed)
    noise = stream(seed, "synth", 2).standard_normal((n_groups * samples_per_group, dims))
    labels = np.repeat(np.arange(n_groups, dtype=np.int64), samples_per_group)
    return LabeledDataset(means[labels] + spread * noise, labels)
