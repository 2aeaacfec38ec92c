"""Synthetic 19x19 game records for exercising the training pipeline.

No professional collection ships with this package, so these games come from
a cheap hand-written player: it captures stones in atari, rescues its own,
answers near the opponent's last move with a fixed shape preference, and
otherwise opens on the third and fourth lines.  The result is far weaker than
human play but has enough local regularity for a small network to learn.
"""
from __future__ import annotations

import argparse
from pathlib import Path
from typing import Optional

import numpy as np

from . import _board, goban, sgf
from .goban import Move

# Offsets from the opponent's last stone, most preferred first.
_SHAPES = [(1, 1), (-1, 1), (0, 2), (2, 1), (1, 0), (0, -1), (-2, 0), (1, -2)]
_SHAPE_WEIGHTS = np.array([8, 6, 5, 4, 3, 2, 2, 1], dtype=np.float64)
_KOMI = [2.75, 3.75, 5.5, 6.5]


def _atari_points(pos: goban.Position, color: int) -> list[int]:
    """Flat indices of the last liberty of each ``color`` chain in atari."""
    n = pos.size
    w = n + 2
    board = pos.board
    cid, libs, _, _ = _board.label_chains(board, n)
    in_atari = np.zeros(len(board), dtype=bool)
    stone = cid >= 0
    in_atari[stone] = (libs[cid[stone]] == 1) & (board[stone] == color)
    hit = np.zeros(len(board), dtype=bool)
    inner = np.arange(w + 1, len(board) - w - 1)
    for d in (-1, 1, -w, w):
        hit[inner] |= in_atari[inner + d]
    hit &= board == goban.EMPTY
    pts = np.flatnonzero(hit)
    return sorted(((pts // w - 1) * n + (pts % w - 1)).tolist())


def choose_move(pos: goban.Position, last: Optional[tuple[int, int]],
                rng: np.random.Generator) -> Move:
    n = pos.size
    color = pos.to_move
    legal = goban.legal_points(pos)
    if len(legal) == 0:
        return Move(color, None)
    legal_set = set(legal.tolist())
    captures = [f for f in _atari_points(pos, goban.opponent(color)) if f in legal_set]
    if captures and rng.random() < 0.9:
        return Move(color, divmod(captures[0], n))
    rescues = [f for f in _atari_points(pos, color) if f in legal_set]
    if rescues and rng.random() < 0.8:
        return Move(color, divmod(rescues[0], n))
    if last is not None and rng.random() < 0.75:
        # The shape is mirrored so it always points towards the board centre.
        sr = 1 if last[0] < n // 2 else -1
        sc = 1 if last[1] < n // 2 else -1
        cands, weights = [], []
        for (dr, dc), wt in zip(_SHAPES, _SHAPE_WEIGHTS):
            r, c = last[0] + sr * dr, last[1] + sc * dc
            if 0 <= r < n and 0 <= c < n and r * n + c in legal_set:
                cands.append(r * n + c)
                weights.append(wt)
        if cands:
            f = cands[0] if rng.random() < 0.5 else cands[rng.choice(len(cands), p=np.array(weights) / sum(weights))]
            return Move(color, divmod(f, n))
    lines = [f for f in legal_set if min(f // n, f % n, n - 1 - f // n, n - 1 - f % n) in (2, 3)]
    pool = lines if lines and pos.move_count < 60 else sorted(legal_set)
    f = sorted(pool)[rng.integers(len(pool))]
    return Move(color, divmod(f, n))


def generate_game(rng: np.random.Generator, size: int = 19, max_moves: int = 220) -> sgf.SgfGame:
    pos = goban.new_position(size)
    last = None
    moves = []
    for _ in range(max_moves):
        mv = choose_move(pos, last, rng)
        moves.append(mv)
        if mv.point is None:
            break
        pos = goban.play(pos, mv)
        last = mv.point
    komi = _KOMI[rng.integers(len(_KOMI))]
    score = goban.score_tromp_taylor(pos, komi)
    result = f"B+{score:g}" if score > 0 else f"W+{-score:g}"
    year = int(rng.integers(1951, 2015))
    return sgf.SgfGame(size=size, komi=komi, year=year, date=f"{year}-01-01",
                       result=result, moves=moves)


def write_corpus(out_dir, games: int, seed: int = 0, size: int = 19) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    paths = []
    for i in range(games):
        path = out / f"game_{i:05d}.sgf"
        path.write_text(sgf.serialize(generate_game(rng, size)))
        paths.append(path)
    return paths


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description="Write synthetic SGF game records.")
    ap.add_argument("out_dir")
    ap.add_argument("--games", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--size", type=int, default=19)
    args = ap.parse_args(argv)
    paths = write_corpus(args.out_dir, args.games, args.seed, args.size)
    print(f"wrote {len(paths)} games to {args.out_dir}")


if __name__ == "__main__":
    main()
