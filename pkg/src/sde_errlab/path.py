"""Seeded Brownian increments on a fine grid, with exact coarsening.

Each path owns a Philox counter-based generator keyed by ``(seed, path_index)``,
so a path's increments never depend on how many other paths are drawn, in which
order, or on which worker.  Stream offsets carve disjoint key ranges for the
driving W of the scheme side, the W of the limit side and the independent B.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

STREAM_W = 0
STREAM_LIMIT_W = 1 << 62
STREAM_B = 1 << 63
# synthetic reference draws (e.g. N(0,1) comparison samples)
STREAM_SYNTH = 3 << 62

_U64 = (1 << 64) - 1


def path_generator(seed: int, path_index: int) -> np.random.Generator:
    if not (0 <= seed <= _U64 and 0 <= path_index <= _U64):
        raise ValueError("seed and path_index must be unsigned 64-bit integers")
    key = np.array([seed, path_index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class BrownianGrid:
    """Fine-grid increments for one path (1-D) or a batch of paths (2-D, paths first)."""

    horizon: float
    fine_steps: int
    increments: np.ndarray
    seed: int
    path_index: int | np.ndarray

    @property
    def h(self) -> float:
        return self.horizon / self.fine_steps

    def times(self) -> np.ndarray:
        return np.arange(self.fine_steps + 1) * self.h

    def cumulative(self) -> np.ndarray:
        """W at the fine grid times, W_0 = 0, left-to-right summation."""
        shape = self.increments.shape[:-1] + (1,)
        return np.cumsum(np.concatenate([np.zeros(shape), self.increments], axis=-1), axis=-1)

    def select(self, i: int) -> "BrownianGrid":
        if self.increments.ndim == 1:
            raise ValueError("grid holds a single path")
        return BrownianGrid(self.horizon, self.fine_steps, self.increments[i], self.seed,
                            int(np.asarray(self.path_index)[i]))


def _check_grid(T: float, n_fine: int) -> None:
    if not T > 0:
        raise ValueError(f"horizon must be positive, got {T}")
    if int(n_fine) != n_fine or n_fine < 1:
        raise ValueError(f"fine_steps must be a positive integer, got {n_fine}")


def generate(seed: int, path_index, T: float, n_fine: int) -> BrownianGrid:
    """Increments N(0, T/n_fine) for one path index or a sequence of them."""
    _check_grid(T, n_fine)
    scale = np.sqrt(T / n_fine)
    if np.ndim(path_index) == 0:
        z = path_generator(seed, int(path_index)).standard_normal(n_fine)
        return BrownianGrid(float(T), int(n_fine), z * scale, int(seed), int(path_index))
    idx = np.asarray(path_index, dtype=np.uint64)
    z = np.empty((idx.size, n_fine))
    for row, i in enumerate(idx):
        z[row] = path_generator(seed, int(i)).standard_normal(n_fine)
    return BrownianGrid(float(T), int(n_fine), z * scale, int(seed), idx)


class BrownianStream:
    """Draws the same increments as :func:`generate`, ``block`` fine steps at a time.

    Blocks come out time-major, shape ``(block, paths)``.
    """

    def __init__(self, seed: int, path_indices: Sequence[int], T: float, n_fine: int):
        _check_grid(T, n_fine)
        self.scale = np.sqrt(T / n_fine)
        self.n_fine = int(n_fine)
        self._gens = [path_generator(seed, int(i)) for i in path_indices]
        self._drawn = 0

    def blocks(self, block: int) -> Iterator[np.ndarray]:
        if self.n_fine % block:
            raise ValueError(f"block {block} does not divide {self.n_fine}")
        buf = np.empty((len(self._gens), block))
        while self._drawn < self.n_fine:
            for row, g in enumerate(self._gens):
                buf[row] = g.standard_normal(block)
            self._drawn += block
            yield np.ascontiguousarray((buf * self.scale).T)


def coarsen_array(increments: np.ndarray, factor: int, axis: int = -1) -> np.ndarray:
    """Sum consecutive blocks of ``factor`` increments along ``axis``.

    Power-of-two factors are summed by repeated pairwise halving, so that
    coarsening in dyadic stages gives bit-identical results to coarsening in
    one go.  Other factors are summed left to right.
    """
    x = np.moveaxis(np.asarray(increments, dtype=float), axis, -1)
    length = x.shape[-1]
    if factor < 1 or length % factor:
        raise ValueError(f"factor {factor} does not divide {length} increments")
    if factor & (factor - 1) == 0:
        while factor > 1:
            x = x[..., 0::2] + x[..., 1::2]
            factor //= 2
    else:
        x = np.cumsum(x.reshape(x.shape[:-1] + (length // factor, factor)), axis=-1)[..., -1]
    return np.moveaxis(x, -1, axis)


def coarsen(grid: BrownianGrid, n_coarse: int) -> np.ndarray:
    if n_coarse < 1 or grid.fine_steps % n_coarse:
        raise ValueError(f"{n_coarse} does not divide the fine grid of {grid.fine_steps} steps")
    return coarsen_array(grid.increments, grid.fine_steps // n_coarse)


def grid_projection(t: float, n: int, T: float) -> float:
    """Left grid time floor(n t / T) * T / n."""
    if not 0 <= t <= T:
        raise ValueError(f"t={t} outside [0, {T}]")
    return float(np.floor(n * t / T) * (T / n))


def grid_increment(values: np.ndarray, times: np.ndarray, t: float, n: int, T: float) -> float:
    """g(t) - g(n(t)) for a function sampled at ``times``."""
    left = grid_projection(t, n, T)
    return float(np.interp(t, times, values) - np.interp(left, times, values))


def dump_path_csv(grid: BrownianGrid, fh) -> None:
    w = grid.cumulative()
    if w.ndim != 1:
        raise ValueError("dump one path at a time")
    fh.write("t,W\n")
    for t, v in zip(grid.times(), w):
        fh.write(f"{float(t)!r},{float(v)!r}\n")
