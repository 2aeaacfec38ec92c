"""Go instantiation of the search: actions, rollouts and network priors."""
from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .. import _board, features, goban
from ..goban import BLACK, WHITE, Move, Position
from ..policy_net import PolicyNet
from ..rng import RngStream
from .tree import SearchConfig


def pass_action(size: int) -> int:
    return size * size


def action_to_move(pos: Position, action: int) -> Move:
    n = pos.size
    a = int(action)
    if a == n * n:
        return Move(pos.to_move, None)
    return Move(pos.to_move, (a // n, a % n))


def move_to_action(pos: Position, mv: Move) -> int:
    if mv.point is None:
        return pos.size * pos.size
    return mv.point[0] * pos.size + mv.point[1]


def winner_of(pos: Position, komi: float) -> Optional[int]:
    score = goban.score_tromp_taylor(pos, komi)
    if score > 0:
        return BLACK
    if score < 0:
        return WHITE
    return None


def _rollout_masks(states: Sequence[Position]) -> np.ndarray:
    return np.stack([_board.rollout_mask(s.board, s.size, s.to_move, s.ko) for s in states])


def rollout_step_batch(states: Sequence[Position], policy: Optional[PolicyNet],
                       rng: RngStream) -> list[Optional[Move]]:
    """One rollout ply for every lane.

    Terminal lanes get ``None`` and cost nothing.  Live lanes choose among
    legal plays that do not fill their own single-point eyes: uniformly when
    ``policy`` is None, otherwise by sampling the network's distribution from
    one batched evaluation.  A lane with no candidate passes.
    """
    moves: list[Optional[Move]] = [None] * len(states)
    live = [i for i, s in enumerate(states) if not goban.is_terminal(s)]
    if not live:
        return moves
    live_states = [states[i] for i in live]
    masks = _rollout_masks(live_states)
    n = live_states[0].size
    if policy is None:
        for i, s, m in zip(live, live_states, masks):
            pts = np.flatnonzero(m)
            if len(pts) == 0:
                moves[i] = Move(s.to_move, None)
            else:
                f = int(pts[rng.integers(len(pts))])
                moves[i] = Move(s.to_move, (f // n, f % n))
        return moves
    x = features.extract_batch(live_states)
    probs = policy.predict(x, masks.reshape(-1, n, n)).reshape(len(live), -1)
    for i, s, m, p in zip(live, live_states, masks, probs):
        if not m.any():
            moves[i] = Move(s.to_move, None)
        else:
            f = rng.choice(p)
            moves[i] = Move(s.to_move, (f // n, f % n))
    return moves


def greedy_move(state: Position, ppn: PolicyNet) -> Move:
    """The prior network's top legal point (lowest index on ties), else pass."""
    if goban.is_terminal(state):
        raise ValueError("no move to choose in a terminal position")
    n = state.size
    pts = goban.legal_points(state)
    if len(pts) == 0:
        return Move(state.to_move, None)
    mask = np.zeros(n * n, dtype=bool)
    mask[pts] = True
    z = ppn.logits(features.extract(state)[None]).reshape(-1)
    z = np.where(mask, z, -np.inf)
    f = int(np.argmax(z))
    return Move(state.to_move, (f // n, f % n))


class GoGame:
    """Adapter exposing goban positions to the generic tree search.

    Actions are flat point indices ``r*size + c``; ``size*size`` is pass.
    """

    def __init__(self, komi: float = 7.5, rollout_policy: Optional[PolicyNet] = None,
                 prior_policy: Optional[PolicyNet] = None, move_cap: Optional[int] = None):
        self.komi = komi
        self.rollout_policy = rollout_policy
        self.prior_policy = prior_policy
        self.move_cap = move_cap
        self.has_priors = prior_policy is not None

    @classmethod
    def from_config(cls, cfg: SearchConfig) -> "GoGame":
        return cls(cfg.komi, cfg.rollout_policy, cfg.prior_policy, cfg.rollout_move_cap)

    def to_play(self, pos: Position) -> int:
        return pos.to_move

    def legal_actions(self, pos: Position) -> np.ndarray:
        pts = goban.legal_points(pos)
        return np.append(pts, pos.size * pos.size)

    def apply(self, pos: Position, action) -> Position:
        return goban.play(pos, action_to_move(pos, action))

    def is_terminal(self, pos: Position) -> bool:
        return goban.is_terminal(pos)

    def winner(self, pos: Position) -> Optional[int]:
        return winner_of(pos, self.komi)

    def state_key(self, pos: Position):
        return (pos.position_hash, pos.consecutive_passes, pos.move_count)

    def _cap(self, n: int) -> int:
        return self.move_cap if self.move_cap is not None else 2 * n * n

    def rollout(self, states: list[Position], rng: RngStream) -> list[Optional[int]]:
        if self.rollout_policy is None:
            return self._uniform_rollout(states, rng)
        lanes = list(states)
        while True:
            moves = rollout_step_batch(lanes, self.rollout_policy, rng)
            if all(m is None for m in moves):
                break
            lanes = [s if m is None else goban.play(s, m, superko=False)
                     for s, m in zip(lanes, moves)]
        return [self.winner(s) for s in lanes]

    def _uniform_rollout(self, states: list[Position], rng: RngStream) -> list[Optional[int]]:
        n = states[0].size
        boards = np.stack([s.board for s in states])
        colors = np.array([s.to_move for s in states], dtype=np.int8)
        kos = np.array([s.ko for s in states], dtype=np.int64)
        passes = np.array([s.consecutive_passes for s in states], dtype=np.int64)
        moves = np.array([s.move_count for s in states], dtype=np.int64)
        _board.playout(boards, colors, kos, passes, moves, n, self._cap(n), rng.state)
        out = []
        for b in boards:
            black, white = _board.area_score(b, n)
            score = black - white - self.komi
            out.append(BLACK if score > 0 else WHITE if score < 0 else None)
        return out

    def priors(self, states: list[Position], actions: list[np.ndarray]) -> list[np.ndarray]:
        """Prior probability per action from one batched network evaluation.

        The network scores points only; pass gets zero unless it is the
        sole legal action.
        """
        n = states[0].size
        masks = np.zeros((len(states), n * n), dtype=bool)
        for i, acts in enumerate(actions):
            pts = acts[acts < n * n]
            masks[i, pts] = True
        x = features.extract_batch(states)
        probs = self.prior_policy.predict(x, masks.reshape(-1, n, n)).reshape(len(states), -1)
        out = []
        for p, acts in zip(probs, actions):
            full = np.append(p, 0.0)
            if len(acts) == 1:
                full[n * n] = 1.0
            out.append(full[acts])
        return out
