"""Go rules: positions, legal moves, captures, ko, superko and area scoring.

Points are ``(row, col)`` pairs with row 0 at the top of the board (the SGF
orientation).  Positions are immutable values; :func:`play` returns a new one.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from . import _board
from ._board import BLACK, EMPTY, WHITE

__all__ = [
    "BLACK",
    "WHITE",
    "EMPTY",
    "Chain",
    "IllegalMove",
    "Move",
    "Position",
    "chains",
    "is_terminal",
    "legal_moves",
    "legal_points",
    "new_position",
    "opponent",
    "play",
    "score_tromp_taylor",
    "setup_position",
    "with_to_move",
]

MIN_SIZE = 2
MAX_SIZE = _board.MAX_SIZE

Point = tuple[int, int]


class IllegalMove(ValueError):
    def __init__(self, reason: str, move: "Move"):
        super().__init__(f"illegal move {move}: {reason}")
        self.reason = reason
        self.move = move


def opponent(color: int) -> int:
    return 3 - color


def color_name(color: int) -> str:
    return {BLACK: "B", WHITE: "W"}[color]


@dataclass(frozen=True)
class Move:
    color: int
    point: Optional[Point] = None

    @property
    def is_pass(self) -> bool:
        return self.point is None

    @classmethod
    def pass_(cls, color: int) -> "Move":
        return cls(color, None)

    def __str__(self) -> str:
        where = "pass" if self.point is None else f"{self.point[0]},{self.point[1]}"
        return f"{color_name(self.color)}[{where}]"


@dataclass(frozen=True)
class Chain:
    color: int
    stones: frozenset
    liberties: int


class Position:
    """A full game state.

    ``board`` is the padded int8 vector used by the kernels; ``grid`` gives
    the plain ``size x size`` view.  ``prev_boards`` holds the boards one and
    two plies ago (empty before that many moves exist).
    """

    __slots__ = (
        "size",
        "board",
        "to_move",
        "ko",
        "stone_hash",
        "history",
        "prev_boards",
        "consecutive_passes",
        "move_count",
    )

    def __init__(self, size, board, to_move, ko, stone_hash, history, prev_boards,
                 consecutive_passes, move_count):
        self.size = size
        self.board = board
        self.to_move = to_move
        self.ko = ko
        self.stone_hash = stone_hash
        self.history = history
        self.prev_boards = prev_boards
        self.consecutive_passes = consecutive_passes
        self.move_count = move_count

    @property
    def grid(self) -> np.ndarray:
        return _board.unpad(self.board, self.size)

    @property
    def prev_grids(self) -> tuple[np.ndarray, np.ndarray]:
        return tuple(_board.unpad(b, self.size) for b in self.prev_boards)

    @property
    def position_hash(self) -> int:
        return _with_side(self.stone_hash, self.to_move)

    @property
    def simple_ko(self) -> Optional[Point]:
        if self.ko < 0:
            return None
        return _unpad_point(self.ko, self.size)

    @property
    def history_hashes(self) -> frozenset:
        return self.history

    def __repr__(self) -> str:
        return f"Position(size={self.size}, to_move={color_name(self.to_move)}, moves={self.move_count})"

    def __str__(self) -> str:
        chars = {EMPTY: ".", BLACK: "X", WHITE: "O"}
        return "\n".join("".join(chars[int(v)] for v in row) for row in self.grid)


def _with_side(stone_hash: int, to_move: int) -> int:
    return stone_hash ^ _board.SIDE_KEY if to_move == WHITE else stone_hash


def _pad_point(point: Point, size: int) -> int:
    r, c = point
    return (r + 1) * (size + 2) + c + 1


def _unpad_point(p: int, size: int) -> Point:
    w = size + 2
    return (p // w - 1, p % w - 1)


def new_position(size: int = 19) -> Position:
    if not MIN_SIZE <= size <= MAX_SIZE:
        raise ValueError(f"board size must be in [{MIN_SIZE}, {MAX_SIZE}], got {size}")
    board = _board.empty_board(size)
    empty = board.copy()
    return Position(size, board, BLACK, -1, 0, frozenset([_with_side(0, BLACK)]),
                    (empty, empty), 0, 0)


def setup_position(size: int, black: Iterable[Point] = (), white: Iterable[Point] = (),
                   to_move: int = BLACK) -> Position:
    """A position with stones placed directly (SGF AB/AW); no captures resolved."""
    pos = new_position(size)
    board = pos.board.copy()
    for color, pts in ((BLACK, black), (WHITE, white)):
        for pt in pts:
            if not (0 <= pt[0] < size and 0 <= pt[1] < size):
                raise ValueError(f"setup point {pt} off the board")
            board[_pad_point(pt, size)] = color
    h = int(_board.stone_hash(board, _board.ZOBRIST))
    return Position(size, board, to_move, -1, h, frozenset([_with_side(h, to_move)]),
                    pos.prev_boards, 0, 0)


_REASONS = {1: "occupied", 2: "suicide", 3: "ko"}


def play(pos: Position, mv: Move, superko: bool = True) -> Position:
    """Apply ``mv`` and return the resulting position.

    With ``superko=False`` the repetition check is skipped and history is not
    extended, which is what rollouts use.
    """
    size = pos.size
    if mv.point is None:
        board = pos.board
        h = pos.stone_hash
        ko = -1
        passes = pos.consecutive_passes + 1
    else:
        r, c = mv.point
        if not (0 <= r < size and 0 <= c < size):
            raise IllegalMove("off board", mv)
        p = _pad_point(mv.point, size)
        code = _board.check_play(pos.board, size, p, mv.color, pos.ko)
        if code:
            raise IllegalMove(_REASONS[code], mv)
        board = pos.board.copy()
        _, ko, delta = _board.play_inplace(board, size, p, mv.color, _board.ZOBRIST)
        h = pos.stone_hash ^ int(delta)
        passes = 0
    to_move = opponent(mv.color)
    history = pos.history
    if superko:
        ph = _with_side(h, to_move)
        if mv.point is not None and ph in history:
            raise IllegalMove("superko", mv)
        history = history | {ph}
    return Position(size, board, to_move, ko, h, history, (pos.board, pos.prev_boards[0]),
                    passes, pos.move_count + 1)


def legal_points(pos: Position, superko: bool = True) -> np.ndarray:
    """Flat indices ``r*size + c`` of the legal plays for the side to move."""
    pts, hashes = _board.legal_plays(pos.board, pos.size, pos.to_move, pos.ko,
                                     np.uint64(pos.stone_hash))
    if not superko or len(pts) == 0:
        return pts
    side = _board.SIDE_KEY if pos.to_move == BLACK else 0  # side after the move
    history = pos.history
    keep = [h ^ side not in history for h in hashes.tolist()]
    return pts[np.array(keep, dtype=bool)]


def legal_moves(pos: Position) -> list[Move]:
    """All legal plays in row-major order, followed by pass."""
    n = pos.size
    color = pos.to_move
    moves = [Move(color, (int(f) // n, int(f) % n)) for f in legal_points(pos)]
    moves.append(Move(color, None))
    return moves


def with_to_move(pos: Position, color: int) -> Position:
    """``pos`` with ``color`` to move (for records and GTP sessions that skip a turn)."""
    if color == pos.to_move:
        return pos
    h = pos.stone_hash
    return Position(pos.size, pos.board, color, pos.ko, h, pos.history | {_with_side(h, color)},
                    pos.prev_boards, pos.consecutive_passes, pos.move_count)


def is_terminal(pos: Position) -> bool:
    return pos.consecutive_passes >= 2 or pos.move_count >= 2 * pos.size * pos.size


def score_tromp_taylor(pos: Position, komi: float = 7.5) -> float:
    """Area score, Black minus White, with komi credited to White."""
    black, white = _board.area_score(pos.board, pos.size)
    return float(black - white) - komi


def chains(pos: Position) -> list[Chain]:
    n = pos.size
    cid, libs, _, _ = _board.label_chains(pos.board, n)
    members: dict[int, list] = {}
    for p in np.flatnonzero(cid >= 0):
        members.setdefault(int(cid[p]), []).append(_unpad_point(int(p), n))
    return [
        Chain(int(pos.board[_pad_point(stones[0], n)]), frozenset(stones), int(libs[k]))
        for k, stones in sorted(members.items())
    ]


def recompute_hash(pos: Position) -> int:
    return _with_side(int(_board.stone_hash(pos.board, _board.ZOBRIST)), pos.to_move)
