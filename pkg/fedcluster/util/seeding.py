import hashlib

import numpy as np

SEED_BITS = 63


def derive_seed(master: int, tag: str, *path: int) -> int:
    """
    Derives an independent seed for one purpose from the master seed.

    The derivation is counter-based: the same (master, tag, path) always yields the same
    seed, regardless of the order in which streams are requested or which thread asks.

    Parameters:
        master (int): The master seed of the run.
        tag (str): Purpose of the stream, e.g. "init", "shuffle", "select".
        *path (int): Optional integer coordinates such as client id and round.

    Returns:
        int: A non-negative seed below 2**63.
    """
    key = "/".join([str(int(master)), tag, *(str(int(p)) for p in path)])
    digest = hashlib.sha256(key.encode()).digest()
    return int.from_bytes(digest[:8], "big") >> (64 - SEED_BITS)


def stream(master: int, tag: str, *path: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, tag, *path))
