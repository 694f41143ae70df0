"""Deterministic derivation of named random sub-streams from a master seed.

Every run splits its master seed into independent streams (dataset draws,
weight init, label noise, test set) so that changing one consumer -- e.g.
running more steps, which draws more label noise -- never perturbs the
others. Derivation uses the SplitMix64 finalizer, which is stable across
platforms and Python versions (unlike the built-in ``hash``).
"""

from __future__ import annotations

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15

# Fixed stream ids; recorded in run manifests. Do not renumber.
STREAM_IDS = {"data": 1, "init": 2, "label_noise": 3, "test": 4}


def splitmix64(x: int) -> int:
    """One round of the SplitMix64 output function on a 64-bit state."""
    z = (x + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def derive_seed(master_seed: int, *indices: int) -> int:
    """Mix a master seed with integer indices into a child seed.

    Successive indices are folded in one at a time, so (1, 2) and (2, 1)
    yield different children.
    """
    state = splitmix64(master_seed & _MASK64)
    for idx in indices:
        state = splitmix64(state ^ ((idx & _MASK64) * _GOLDEN & _MASK64))
    return state


def stream(master_seed: int, name: str) -> np.random.Generator:
    """Named child generator (see STREAM_IDS) of a master seed."""
    return np.random.default_rng(derive_seed(master_seed, STREAM_IDS[name]))


def substream(master_seed: int, *indices: int) -> np.random.Generator:
    """Child generator for ad-hoc index tuples, e.g. heatmap (row, col, seed)."""
    return np.random.default_rng(derive_seed(master_seed, *indices))
