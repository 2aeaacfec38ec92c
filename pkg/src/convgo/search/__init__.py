"""Monte Carlo tree search: generic UCT / batched Thompson search and the Go adapter."""
from .go import (GoGame, action_to_move, greedy_move, move_to_action, pass_action,
                 rollout_step_batch, winner_of)
from .tree import (Game, Node, SearchConfig, SearchResult, Searcher, batch_search,
                   inject_priors, uct_search)

__all__ = [
    "Game",
    "GoGame",
    "Node",
    "SearchConfig",
    "SearchResult",
    "Searcher",
    "action_to_move",
    "batch_search",
    "greedy_move",
    "inject_priors",
    "move_to_action",
    "pass_action",
    "rollout_step_batch",
    "uct_search",
    "winner_of",
]
