"""
Counter-based noise streams.

Every noise value is addressed by (seed, stream, block, step, lane, component).
A block covers config.BLOCK_PATHS consecutive path indices and owns its own
Philox key, so a path's noise never depends on how many other paths run, in
which order blocks execute, or how many steps are drawn at once.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import ndtri

import config
from errors import PreconditionError

logger = logging.getLogger("sde_engine")

# stream tags; a block's key is seed | (block * STREAM_SLOTS + stream) << 64
STREAM_X = 0
STREAM_Y = 1
STREAM_RADIAL = 2
STREAM_BRIDGE = 3
STREAM_SLOTS = 16

_MAX_SEED = 2 ** 64
_OPEN_UNIT = np.finfo(float).tiny


def block_key(seed: int, block_index: int, stream: int = STREAM_X) -> int:
    if not 0 <= seed < _MAX_SEED:
        raise PreconditionError(f"seed must be an unsigned 64-bit integer, got {seed}")
    if not 0 <= stream < STREAM_SLOTS:
        raise PreconditionError(f"stream tag must lie in [0, {STREAM_SLOTS}), got {stream}")
    if block_index < 0:
        raise PreconditionError(f"block index must be nonnegative, got {block_index}")
    return ((block_index * STREAM_SLOTS + stream) << 64) | int(seed)


def block_of(path_index: int) -> int:
    return path_index // config.BLOCK_PATHS


def lane_of(path_index: int) -> int:
    return path_index % config.BLOCK_PATHS


class NoiseBlock:
    """Sequential draws for one block of BLOCK_PATHS lanes.

    Each call returns arrays of shape (n_steps, BLOCK_PATHS, dim); consecutive
    calls continue the same sequence, so chunk sizes do not change values.
    """

    def __init__(self, seed: int, block_index: int, dim: int, stream: int = STREAM_X):
        self.seed = int(seed)
        self.block_index = int(block_index)
        self.dim = int(dim)
        self.stream = stream
        self.counter = 0  # steps drawn so far
        self._generator = np.random.Generator(np.random.Philox(key=block_key(self.seed, self.block_index, stream)))

    def uniforms(self, n_steps: int) -> np.ndarray:
        u = self._generator.random((n_steps, config.BLOCK_PATHS, self.dim))
        self.counter += n_steps
        # random() is on [0, 1); ndtri needs the open interval
        return np.clip(u, _OPEN_UNIT, 1.0 - 2.0 ** -53)

    def normals(self, n_steps: int) -> np.ndarray:
        """Standard normals by inverse CDF of the uniform stream."""
        return ndtri(self.uniforms(n_steps))


@dataclass
class NoiseStream:
    """The noise of a single path: one lane of its block's stream."""
    seed: int
    path_index: int
    dim: int = 1
    stream: int = STREAM_X
    counter: int = 0
    _block: Optional[NoiseBlock] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.path_index < 0:
            raise PreconditionError(f"path index must be nonnegative, got {self.path_index}")
        self._block = NoiseBlock(self.seed, block_of(self.path_index), self.dim, self.stream)

    @property
    def lane(self) -> int:
        return lane_of(self.path_index)

    def normals(self, n_steps: int) -> np.ndarray:
        """(n_steps, dim) standard normals for this path."""
        values = self._block.normals(n_steps)[:, self.lane, :]
        self.counter += n_steps
        return values

    def uniforms(self, n_steps: int) -> np.ndarray:
        values = self._block.uniforms(n_steps)[:, self.lane, :]
        self.counter += n_steps
        return values
