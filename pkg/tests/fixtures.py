import json
import os
import struct

import numpy as np

from fedcluster.data import LabeledDataset, write_idx

DIGIT_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}


def synth_config(policy="FEDAVG_ALL", rounds=10, **federation):
    """A small planted-group experiment that trains a logistic regression in well under a second per round."""
    return {
        "dataset": {"kind": "SYNTH", "synth": {"n_groups": 4, "clients_per_group": 2, "spread": 0.1}},
        "model": {"architecture": "LOGREG"},
        "federation": {"n_clients": 8, "rounds": rounds, "policy": policy, **federation},
        "seed": 7,
    }


def write_config(directory, data, name="config.json") -> str:
    path = os.path.join(directory, name)
    with open(path, "w") as f:
        json.dump(data, f, indent=2)
    return path


def random_digits(per_label=30, labels=range(10), seed=0, size=28) -> LabeledDataset:
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.array(list(labels), dtype=np.int64), per_label)
    labels = rng.permutation(labels)
    pixels = rng.integers(0, 256, size=(len(labels), 1, size, size))
    return LabeledDataset(pixels / 255.0, labels)


def write_digit_fixture(directory, per_label=30, test_per_label=10) -> dict:
    """Writes a random IDX train/test pair into `directory` and returns the four paths."""
    paths = {key: os.path.join(directory, name) for key, name in DIGIT_FILES.items()}
    write_idx(random_digits(per_label, seed=1), paths["train_images"], paths["train_labels"])
    write_idx(random_digits(test_per_label, seed=2), paths["test_images"], paths["test_labels"])
    return paths


def write_raw_idx(path, magic, sizes, payload: bytes):
    with open(path, "wb") as f:
        f.write(struct.pack(f">{1 + len(sizes)}I", magic, *sizes))
        f.write(payload)

