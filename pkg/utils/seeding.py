"""
Labeled seed derivation. A single master seed fans out to every random
consumer (weight init, partitioning, attacks, noise batches, shuffling) by
hashing a component label together with integer indices, so any sub-seed can
be recomputed from the master seed and its label alone.
"""
import zlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _label_word(component: str) -> int:
    return zlib.crc32(component.encode("utf-8")) & 0xFFFFFFFF


def derive_seed(master_seed: int, component: str, *indices: int) -> int:
    """
    Derive a 64-bit sub-seed.

    Args:
        master_seed: Experiment master seed
        component: Consumer label, e.g. "client-train" or "noise"
        *indices: Non-negative integers (client id, round, epoch, ...)

    Returns:
        Deterministic 64-bit seed
    """
    entropy = [int(master_seed) & _MASK64, _label_word(component), *(int(i) & _MASK64 for i in indices)]
    state = np.random.SeedSequence(entropy).generate_state(2, dtype=np.uint32)
    return (int(state[0]) << 32) | int(state[1])


def make_rng(master_seed: int, component: str = "root", *indices: int) -> np.random.Generator:
    """
    Build a PCG64 generator for a labeled sub-stream.

    Args:
        master_seed: Experiment master seed
        component: Consumer label
        *indices: Stream indices

    Returns:
        numpy Generator
    """
    return np.random.default_rng(derive_seed(master_seed, component, *indices))
