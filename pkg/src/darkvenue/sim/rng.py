"""Counter-based uniform streams keyed by (seed, episode index).

Episode ``e`` owns a fixed window of the Philox stream, so any chunking of the
episode range (and any number of workers) reproduces the same draws.
"""
from __future__ import annotations

import numpy as np

# Philox produces 4 doubles per counter step
_PER_STEP = 4


def steps_per_episode(ncols: int) -> int:
    return -(-ncols // _PER_STEP)


def uniform_block(seed: int, start: int, n: int, ncols: int) -> np.ndarray:
    """Uniforms for episodes ``start .. start+n-1``, shape ``(n, ncols)``."""
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    w = steps_per_episode(ncols)
    bg = np.random.Philox(key=int(seed))
    bg.advance(int(start) * w)
    draws = np.random.Generator(bg).random(n * w * _PER_STEP)
    return draws.reshape(n, w * _PER_STEP)[:, :ncols]


def episode_uniforms(seed: int, index: int, ncols: int) -> np.ndarray:
    return uniform_block(seed, index, 1, ncols)[0]


class EpisodeStream:
    """Sequential reader over one episode's uniforms (for the scalar reference path)."""

    def __init__(self, seed: int, index: int, ncols: int):
        self.row = episode_uniforms(seed, index, ncols)

    def __getitem__(self, k: int) -> float:
        return float(self.row[k])
