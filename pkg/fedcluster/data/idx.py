import gzip
import logging
import os
import struct

import numpy as np

from fedcluster.data.datasets import LabeledDataset
from fedcluster.util.errors import DataFormatError

logger = logging.getLogger(__name__)

IMAGE_MAGIC = 2051
LABEL_MAGIC = 2049


def _open(path):
    if str(path).endswith(".gz"):
        return gzip.open(path, "rb")
    return open(path, "rb")


def _read_header(raw: bytes, path, magic: int, dims: int) -> tuple[int, ...]:
    # i32 magic, then one i32 per dimension, all big-endian
    header_size = 4 * (1 + dims)
    if len(raw) < header_size:
        raise DataFormatError(f"{path}: truncated file, header needs {header_size} bytes.")
    found, *sizes = struct.unpack(f">{1 + dims}I", raw[:header_size])
    if found != magic:
        raise DataFormatError(f"{path}: bad magic {found:#010x}, expected {magic:#010x}.")
    return tuple(sizes)


def load_idx(images_path, labels_path) -> LabeledDataset:
    """
    Loads an IDX image/label file pair (plain or gzipped).

    Pixels are scaled to [0, 1]; images come back as (count, 1, rows, cols) float64.
    """
    for path in (images_path, labels_path):
        if not os.path.isfile(path):
            raise DataFormatError(f"IDX file not found: {path}")

    with _open(images_path) as f:
        raw_images = f.read()
    with _open(labels_path) as f:
        raw_labels = f.read()

    count, rows, cols = _read_header(raw_images, images_path, IMAGE_MAGIC, 3)
    (label_count,) = _read_header(raw_labels, labels_path, LABEL_MAGIC, 1)
    if count != label_count:
        raise DataFormatError(
            f"count mismatch: {images_path} holds {count} images, "
            f"{labels_path} holds {label_count} labels."
        )

    pixels = np.frombuffer(raw_images, dtype=np.uint8, offset=16)
    labels = np.frombuffer(raw_labels, dtype=np.uint8, offset=8)
    if pixels.size < count * rows * cols:
        raise DataFormatError(
            f"{images_path}: truncated file, expected {count * rows * cols} pixel bytes, "
            f"found {pixels.size}."
        )
    if labels.size < count:
        raise DataFormatError(
            f"{labels_path}: truncated file, expected {count} labels, found {labels.size}."
        )

    images = pixels[: count * rows * cols].reshape(count, 1, rows, cols) / 255.0
    logger.info(f"Loaded {count} images of {rows}x{cols} from {images_path}")
    return LabeledDataset(images.astype(np.float64), labels[:count].astype(np.int64))


def write_idx(dataset: LabeledDataset, images_path, labels_path):
    """Writes a dataset of (count, 1, rows, cols) images in [0, 1] as an IDX pair."""
    count = len(dataset)
    images = np.asarray(dataset.inputs).reshape(count, *dataset.sample_shape[-2:])
    rows, cols = images.shape[1:]
    if np.asarray(dataset.labels).max(initial=0) > 255:
        raise DataFormatError("IDX labels must fit in one unsigned byte.")
    pixels = np.rint(np.clip(images, 0.0, 1.0) * 255.0).astype(np.uint8)
    with open(images_path, "wb") as f:
        f.write(struct.pack(">4I", IMAGE_MAGIC, count, rows, cols))
        f.write(pixels.tobytes())
    with open(labels_path, "wb") as f:
        f.write(struct.pack(">2I", LABEL_MAGIC, count))
        f.write(np.asarray(dataset.labels, dtype=np.uint8).tobytes())
