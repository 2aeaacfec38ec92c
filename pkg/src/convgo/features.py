"""The 16-plane input encoding shared by every policy network.

Two time steps (the current board and the board two plies earlier), eight
planes each, all from the point of view of the side to move:

    0  own stones
    1  opponent stones
    2-4  own chain has 1 / 2 / >=3 liberties
    5-7  opponent chain has 1 / 2 / >=3 liberties

Planes 8-15 repeat the layout for the earlier board.
"""
from __future__ import annotations

import numpy as np

from . import _board
from .goban import Position

NUM_PLANES = 16
PLANES_PER_STEP = 8


def _step_planes(board: np.ndarray, n: int, own: int, out: np.ndarray) -> None:
    grid = _board.unpad(board, n)
    libs = _board.liberty_map(board, n)
    capped = np.minimum(libs, 3)
    for k, color in enumerate((own, 3 - own)):
        stones = grid == color
        out[k] = stones
        for j in range(3):
            out[2 + 3 * k + j] = stones & (capped == j + 1)


def extract(pos: Position) -> np.ndarray:
    """Feature planes for ``pos`` as a ``(16, size, size)`` uint8 array."""
    n = pos.size
    planes = np.zeros((NUM_PLANES, n, n), dtype=np.uint8)
    _step_planes(pos.board, n, pos.to_move, planes[:PLANES_PER_STEP])
    _step_planes(pos.prev_boards[1], n, pos.to_move, planes[PLANES_PER_STEP:])
    return planes


def extract_batch(positions) -> np.ndarray:
    return np.stack([extract(p) for p in positions])
