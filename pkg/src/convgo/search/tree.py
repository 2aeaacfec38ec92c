"""Game-agnostic Monte Carlo tree search: sequential UCT and batched Thompson MCTS.

Statistics live on the parent: node ``s`` keeps, for each child ``j``, the
trial count ``n[j]`` and win count ``w[j]`` from the point of view of the player
to move at ``s``.  Prior knowledge enters as pseudo-trials (``prior_n``,
``prior_w``) added to the same arrays, so both bandits consume it unchanged.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Any, Optional, Protocol, Sequence

import numpy as np

from ..bandit import DEFAULT_C, thompson_index, ucb1_index
from ..rng import RngStream

__all__ = [
    "Game",
    "Node",
    "SearchConfig",
    "SearchResult",
    "Searcher",
    "batch_search",
    "inject_priors",
    "uct_search",
]


class Game(Protocol):
    def to_play(self, state) -> int: ...

    def legal_actions(self, state) -> Sequence: ...

    def apply(self, state, action): ...

    def is_terminal(self, state) -> bool: ...

    def winner(self, state) -> Optional[int]: ...

    def rollout(self, states: list, rng: RngStream) -> list[Optional[int]]: ...

    # Optional: ``priors(states, actions) -> list of probability arrays``
    # (or None when the game has no prior policy) and ``state_key(state)``.


@dataclass
class SearchConfig:
    total_rollouts: int = 5120
    batch_size: int = 64
    bandit: str = "thompson"
    c: float = DEFAULT_C
    prior_strength: float = 16.0
    rollout_policy: Any = None  # None = uniform random; else a PolicyNet
    prior_policy: Any = None    # optional PolicyNet
    komi: float = 7.5
    rollout_move_cap: Optional[int] = None  # None = 2 * size**2
    seed: int = 0
    reuse_tree: bool = True

    def __post_init__(self):
        if self.bandit not in ("thompson", "ucb1"):
            raise ValueError(f"unknown bandit {self.bandit!r}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.total_rollouts % self.batch_size:
            raise ValueError(
                f"total_rollouts ({self.total_rollouts}) must be divisible by "
                f"batch_size ({self.batch_size})")
        if self.prior_strength < 0:
            raise ValueError("prior_strength must be non-negative")

    @property
    def num_backups(self) -> int:
        return self.total_rollouts // self.batch_size


class Node:
    __slots__ = ("state", "to_play", "terminal", "actions", "n", "w",
                 "prior_n", "prior_w", "children")

    def __init__(self, state, to_play: int, terminal: bool):
        self.state = state
        self.to_play = to_play
        self.terminal = terminal
        self.actions = None
        self.n = None
        self.w = None
        self.prior_n = None
        self.prior_w = None
        self.children = None

    @property
    def expanded(self) -> bool:
        return self.actions is not None

    @property
    def total_n(self) -> float:
        """Sum of child trial counts, prior pseudo-trials included."""
        return float(self.n.sum()) if self.expanded else 0.0

    @property
    def visits(self) -> np.ndarray:
        """Real trials per child (pseudo-trials removed)."""
        return self.n - self.prior_n

    def set_actions(self, actions) -> None:
        k = len(actions)
        self.actions = actions
        self.n = np.zeros(k)
        self.w = np.zeros(k)
        self.prior_n = np.zeros(k)
        self.prior_w = np.zeros(k)
        self.children = [None] * k


def inject_priors(node: Node, dist, k: float) -> Node:
    """Seed a freshly expanded node with prior knowledge as pseudo-trials.

    Child ``j`` starts at ``n_j = k`` and ``w_j = k * p_j / max(p)``, so its
    initial mean is the max-normalised prior probability.
    """
    if not node.expanded or len(node.actions) == 0:
        raise ValueError("cannot inject priors into a node without legal actions")
    p = np.asarray(getattr(dist, "probs", dist), dtype=np.float64).ravel()
    if p.shape[0] != len(node.actions):
        raise ValueError(f"prior has {p.shape[0]} entries for {len(node.actions)} actions")
    top = p.max()
    scaled = p / top if top > 0 else np.ones_like(p)
    node.prior_n = np.full(len(p), float(k))
    node.prior_w = k * scaled
    node.n = node.n + node.prior_n
    node.w = node.w + node.prior_w
    return node


@dataclass
class SearchResult:
    action: Any
    actions: list
    visits: list
    wins: list
    rollouts: int
    backups: int
    value: float
    wall_time: float = field(default=0.0, compare=False)
    rollouts_per_s: float = field(default=0.0, compare=False)

    def to_bytes(self) -> bytes:
        """Canonical encoding of everything except timing."""
        doc = {
            "action": repr(self.action),
            "actions": [repr(a) for a in self.actions],
            "visits": self.visits,
            "wins": [float(w).hex() for w in self.wins],
            "rollouts": self.rollouts,
            "backups": self.backups,
            "value": float(self.value).hex(),
        }
        return json.dumps(doc, sort_keys=True).encode()

    def visit_map(self) -> dict:
        return dict(zip(self.actions, self.visits))


def _reward(winner: Optional[int], mover: int) -> float:
    if winner is None:
        return 0.5
    return 1.0 if winner == mover else 0.0


class Searcher:
    """Owns a search tree and its random stream across successive moves."""

    def __init__(self, game, cfg: SearchConfig, rng: Optional[RngStream] = None):
        self.game = game
        self.cfg = cfg
        self.rng = rng if rng is not None else RngStream(cfg.seed)
        self.root: Optional[Node] = None
        self.uses_priors = getattr(game, "has_priors", False)

    # -- tree construction -------------------------------------------------

    def _new_node(self, state) -> Node:
        g = self.game
        return Node(state, g.to_play(state), g.is_terminal(state))

    def _expand(self, nodes: list[Node]) -> None:
        """Give nodes their action lists, evaluating priors in one batch."""
        nodes = [nd for nd in nodes if not nd.expanded and not nd.terminal]
        if not nodes:
            return
        for nd in nodes:
            nd.set_actions(self.game.legal_actions(nd.state))
        if self.uses_priors:
            dists = self.game.priors([nd.state for nd in nodes], [nd.actions for nd in nodes])
            for nd, dist in zip(nodes, dists):
                inject_priors(nd, dist, self.cfg.prior_strength)

    def _root_for(self, state) -> Node:
        key_fn = getattr(self.game, "state_key", None)
        if self.cfg.reuse_tree and self.root is not None and key_fn is not None:
            key = key_fn(state)
            frontier = [self.root]
            for _ in range(3):
                nxt = []
                for nd in frontier:
                    if key_fn(nd.state) == key:
                        return nd
                    if nd.expanded:
                        nxt.extend(c for c in nd.children if c is not None)
                frontier = nxt
        return self._new_node(state)

    def _select(self, node: Node, bandit: str) -> int:
        if bandit == "thompson":
            return int(thompson_index(node.n, node.w, self.rng.state))
        return int(ucb1_index(node.n, node.w, self.cfg.c))

    # -- the three phases ----------------------------------------------------

    def explore(self, root: Node, lanes: int, bandit: Optional[str] = None):
        """Batch-Exploration: walk ``lanes`` paths without intervening backups.

        Returns one ``(path, node)`` per lane, where ``path`` is the list of
        ``(node, child index)`` edges taken and ``node`` is the leaf the lane
        ends at (newly added leaves are deduplicated across lanes).
        """
        bandit = bandit or self.cfg.bandit
        walks = []
        pending: dict[tuple[int, int], list[int]] = {}
        for b in range(lanes):
            node = root
            path = []
            while not node.terminal:
                if not node.expanded:
                    self._expand([node])
                j = self._select(node, bandit)
                path.append((node, j))
                child = node.children[j]
                if child is None:
                    pending.setdefault((id(node), j), []).append(b)
                    node = None
                    break
                node = child
            walks.append([path, node])
        new_nodes = []
        for lane_ids in pending.values():
            parent, j = walks[lane_ids[0]][0][-1]
            child = self._new_node(self.game.apply(parent.state, parent.actions[j]))
            parent.children[j] = child
            new_nodes.append(child)
            for b in lane_ids:
                walks[b][1] = child
        if self.uses_priors:
            self._expand(new_nodes)
        return walks

    def _rollout(self, leaves: list[Node]) -> list[Optional[int]]:
        winners: list[Optional[int]] = [None] * len(leaves)
        live = []
        for i, leaf in enumerate(leaves):
            if leaf.terminal:
                winners[i] = self.game.winner(leaf.state)
            else:
                live.append(i)
        if live:
            out = self.game.rollout([leaves[i].state for i in live], self.rng)
            for i, wnr in zip(live, out):
                winners[i] = wnr
        return winners

    @staticmethod
    def _backup(path, winner) -> None:
        for node, j in path:
            node.n[j] += 1.0
            node.w[j] += _reward(winner, node.to_play)

    def run_round(self, root: Node, lanes: int, bandit: Optional[str] = None) -> None:
        walks = self.explore(root, lanes, bandit)
        winners = self._rollout([leaf for _, leaf in walks])
        for (path, _), winner in zip(walks, winners):
            self._backup(path, winner)

    # -- entry points ----------------------------------------------------------

    def prepare_root(self, state) -> Node:
        root = self._root_for(state)
        if root.terminal:
            raise ValueError("cannot search from a terminal state")
        self._expand([root])
        self.root = root
        return root

    def search(self, state) -> SearchResult:
        cfg = self.cfg
        t0 = time.perf_counter()
        root = self.prepare_root(state)
        for _ in range(cfg.num_backups):
            self.run_round(root, cfg.batch_size)
        return _result(root, cfg.total_rollouts, cfg.num_backups, time.perf_counter() - t0)

    def advance(self, action) -> None:
        """Keep only the subtree under ``action`` (if it was explored)."""
        if self.root is None or not self.root.expanded:
            self.root = None
            return
        for a, child in zip(self.root.actions, self.root.children):
            if a == action:
                self.root = child
                return
        self.root = None


def _result(root: Node, rollouts: int, backups: int, elapsed: float) -> SearchResult:
    visits = root.visits
    best = int(np.argmax(visits))
    n_best = root.n[best]
    value = float(root.w[best] / n_best) if n_best > 0 else 0.5
    actions = [a.item() if hasattr(a, "item") else a for a in root.actions]
    return SearchResult(
        action=actions[best],
        actions=actions,
        visits=[int(round(v)) for v in visits],
        wins=[float(x) for x in root.w - root.prior_w],
        rollouts=rollouts,
        backups=backups,
        value=value,
        wall_time=elapsed,
        rollouts_per_s=rollouts / elapsed if elapsed > 0 else float("inf"),
    )


def batch_search(root_state, game, cfg: SearchConfig) -> SearchResult:
    """Batched MCTS: ``total_rollouts / batch_size`` rounds of explore, roll out, back up."""
    return Searcher(game, cfg).search(root_state)


def uct_search(root_state, game, cfg: SearchConfig, budget: Optional[int] = None) -> SearchResult:
    """Sequential UCT: one select/expand/rollout/backup iteration at a time."""
    budget = cfg.total_rollouts if budget is None else budget
    if budget < 1:
        raise ValueError("search budget must be at least one iteration")
    s = Searcher(game, cfg)
    t0 = time.perf_counter()
    root = s._new_node(root_state)
    if root.terminal:
        raise ValueError("cannot search from a terminal state")
    s._expand([root])
    for _ in range(budget):
        node = root
        path = []
        while not node.terminal:
            if not node.expanded:
                s._expand([node])
            j = int(ucb1_index(node.n, node.w, cfg.c))
            path.append((node, j))
            child = node.children[j]
            if child is None:
                child = s._new_node(game.apply(node.state, node.actions[j]))
                node.children[j] = child
                if s.uses_priors:
                    s._expand([child])
                node = child
                break
            node = child
        if node.terminal:
            winner = game.winner(node.state)
        else:
            winner = game.rollout([node.state], s.rng)[0]
        Searcher._backup(path, winner)
    return _result(root, budget, budget, time.perf_counter() - t0)
