import numpy as np
import pytest

from convgo import _board, goban
from convgo.goban import BLACK, WHITE, Move
from convgo.policy_net import LayerSpec, PolicyNet, build_architecture
from convgo.rng import RngStream
from convgo.search import (GoGame, Node, SearchConfig, Searcher, batch_search, greedy_move,
                           inject_priors, rollout_step_batch, uct_search)
from convgo.search.tree import _reward
from synthetic import BernoulliGame, NimGame


# -- sequential UCT --------------------------------------------------------------

def test_uct_finds_better_arm():
    game = BernoulliGame([0.1, 0.9])
    res = uct_search((), game, SearchConfig(bandit="ucb1", total_rollouts=1000, batch_size=1))
    assert res.action == 1
    assert sum(res.visits) == 1000


def test_uct_budget_zero_is_an_error():
    with pytest.raises(ValueError):
        uct_search((), BernoulliGame([0.5]), SearchConfig(bandit="ucb1"), budget=0)


def test_terminal_root_is_an_error():
    with pytest.raises(ValueError):
        uct_search((0, 3), NimGame(0), SearchConfig(bandit="ucb1"), budget=10)
    with pytest.raises(ValueError):
        batch_search((0, 3), NimGame(0), SearchConfig(total_rollouts=64, batch_size=64))


def test_uct_solves_small_nim():
    # With 4 stones the only winning move is to take 1 (leaving a multiple of 3).
    res = uct_search((4, 0), NimGame(4), SearchConfig(bandit="ucb1"), budget=2000)
    assert res.action == 1


# -- batched search ----------------------------------------------------------------

@pytest.mark.parametrize("batch,rounds", [(64, 80), (128, 40), (256, 20)])
def test_round_counts(batch, rounds):
    cfg = SearchConfig(total_rollouts=5120, batch_size=batch)
    assert cfg.num_backups == rounds
    game = BernoulliGame([0.3, 0.5, 0.7])
    res = batch_search((), game, cfg)
    assert game.rollout_calls == rounds
    assert game.rollout_lanes == 5120
    assert res.backups == rounds and res.rollouts == 5120
    assert sum(res.visits) == 5120


def test_indivisible_budget_rejected():
    with pytest.raises(ValueError):
        SearchConfig(total_rollouts=100, batch_size=64)


def test_thompson_batch_search_finds_better_arm():
    game = BernoulliGame([0.2, 0.4, 0.8, 0.3])
    res = batch_search((), game, SearchConfig(total_rollouts=1024, batch_size=32, seed=3))
    assert res.action == 2
    assert res.visits[2] == max(res.visits)


def test_accounting_excludes_prior_pseudo_counts():
    game = BernoulliGame([0.3, 0.6, 0.5], priors=[0.2, 0.5, 0.3])
    searcher = Searcher(game, SearchConfig(total_rollouts=640, batch_size=64, prior_strength=16))
    res = searcher.search(())
    root = searcher.root
    assert root.n.sum() - root.prior_n.sum() == 640
    assert sum(res.visits) == 640
    np.testing.assert_allclose(root.prior_n, 16)
    np.testing.assert_allclose(root.prior_w, [6.4, 16, 9.6])


def test_rewards_credit_the_mover():
    game = BernoulliGame([1.0, 0.0])
    searcher = Searcher(game, SearchConfig(total_rollouts=256, batch_size=16, prior_strength=0))
    searcher.search(())
    root = searcher.root
    assert root.w[0] == root.n[0] and root.w[1] == 0
    # One level down the other player moves, so the same rollouts count as losses.
    child = root.children[0]
    if child is not None and child.expanded:
        assert child.w.sum() == 0
    assert _reward(BLACK, BLACK) == 1.0 and _reward(WHITE, BLACK) == 0.0
    assert _reward(None, BLACK) == 0.5


def test_b1_ucb1_batch_replays_sequential_uct():
    for game_factory in (lambda: BernoulliGame([0.3, 0.6, 0.5]), lambda: NimGame(7)):
        root = () if isinstance(game_factory(), BernoulliGame) else (7, 0)
        cfg = SearchConfig(total_rollouts=300, batch_size=1, bandit="ucb1", seed=11)
        a = batch_search(root, game_factory(), cfg)
        b = uct_search(root, game_factory(), cfg)
        assert a.to_bytes() == b.to_bytes()


def test_b1_ucb1_batch_replays_sequential_uct_on_go():
    pos = goban.new_position(5)
    cfg = SearchConfig(total_rollouts=200, batch_size=1, bandit="ucb1", seed=2)
    a = batch_search(pos, GoGame(), cfg)
    b = uct_search(pos, GoGame(), cfg)
    assert a.to_bytes() == b.to_bytes()


def _first_actions(bandit, seed, lanes=64):
    pos = goban.new_position(9)
    s = Searcher(GoGame(), SearchConfig(total_rollouts=lanes, batch_size=lanes, bandit=bandit, seed=seed))
    root = s.prepare_root(pos)
    return {path[0][1] for path, _ in s.explore(root, lanes)}


def test_ucb1_lanes_collapse_thompson_lanes_spread():
    assert all(len(_first_actions("ucb1", seed)) == 1 for seed in range(20))
    assert all(len(_first_actions("thompson", seed)) >= 2 for seed in range(20))


def test_duplicate_leaves_are_expanded_once():
    game = BernoulliGame([0.5, 0.5])
    s = Searcher(game, SearchConfig(total_rollouts=8, batch_size=8, bandit="ucb1"))
    root = s.prepare_root(())
    walks = s.explore(root, 8)
    leaves = {id(leaf) for _, leaf in walks}
    assert leaves == {id(root.children[0])}
    assert root.children[1] is None


def test_search_is_reproducible():
    pos = goban.play(goban.new_position(9), Move(BLACK, (4, 4)))
    cfg = SearchConfig(total_rollouts=256, batch_size=32, seed=5)
    a = batch_search(pos, GoGame(), cfg)
    b = batch_search(pos, GoGame(), cfg)
    assert a.to_bytes() == b.to_bytes()
    c = batch_search(pos, GoGame(), SearchConfig(total_rollouts=256, batch_size=32, seed=6))
    assert c.to_bytes() != a.to_bytes()


def test_chosen_action_is_most_visited():
    res = batch_search(goban.new_position(5), GoGame(), SearchConfig(total_rollouts=256, batch_size=32))
    assert res.visits[res.actions.index(res.action)] == max(res.visits)
    assert res.rollouts_per_s > 0


def test_tree_reuse_keeps_subtree():
    game = GoGame()
    s = Searcher(game, SearchConfig(total_rollouts=512, batch_size=64, seed=1))
    pos = goban.new_position(5)
    res = s.search(pos)
    child = s.root.children[s.root.actions.tolist().index(res.action)]
    nxt = game.apply(pos, res.action)
    s.advance(res.action)
    assert s.root is child
    # The opponent's reply is found one level further down.
    reply_idx = int(np.argmax(child.visits)) if child.expanded else None
    if reply_idx is not None and child.children[reply_idx] is not None:
        after = game.apply(nxt, child.actions[reply_idx])
        assert s.prepare_root(after) is child.children[reply_idx]


def test_in_tree_terminal_uses_exact_outcome():
    game = NimGame(1)
    s = Searcher(game, SearchConfig(total_rollouts=32, batch_size=8, bandit="ucb1"))
    res = s.search((1, 0))
    # Taking the single stone always wins for player 1.
    assert res.wins == [32.0]


# -- priors -----------------------------------------------------------------------

def _expanded(k):
    node = Node(None, BLACK, False)
    node.set_actions(list(range(k)))
    return node


def test_inject_priors_examples():
    n = inject_priors(_expanded(2), np.array([0.5, 0.5]), 16)
    assert n.n.tolist() == [16, 16] and n.w.tolist() == [16, 16]
    n = inject_priors(_expanded(2), np.array([0.8, 0.2]), 16)
    assert n.n.tolist() == [16, 16] and n.w.tolist() == pytest.approx([16, 4])
    n = inject_priors(_expanded(2), np.array([0.8, 0.2]), 0)
    assert n.n.tolist() == [0, 0] and n.w.tolist() == [0, 0]


def test_inject_priors_rejects_empty():
    with pytest.raises(ValueError):
        inject_priors(_expanded(0), np.array([]), 16)


def test_go_priors_give_pass_zero():
    net = build_architecture("R2", size=5, seed=0)
    game = GoGame(prior_policy=net)
    pos = goban.new_position(5)
    acts = game.legal_actions(pos)
    (p,) = game.priors([pos], [acts])
    assert p[-1] == 0 and acts[-1] == 25
    assert abs(p.sum() - 1) < 1e-6


def test_search_with_prior_network_accounts_rollouts():
    net = build_architecture("R2", size=5, seed=0)
    cfg = SearchConfig(total_rollouts=128, batch_size=32, prior_policy=net, prior_strength=16)
    s = Searcher(GoGame.from_config(cfg), cfg)
    res = s.search(goban.new_position(5))
    assert sum(res.visits) == 128
    assert (s.root.prior_n == 16).all()


# -- rollouts -------------------------------------------------------------------

class CountingNet:
    def __init__(self, net):
        self.net = net
        self.calls = 0

    def predict(self, x, masks):
        self.calls += 1
        return self.net.predict(x, masks)


def _terminal(size=5):
    pos = goban.new_position(size)
    pos = goban.play(pos, Move(BLACK, None))
    return goban.play(pos, Move(WHITE, None))


def test_all_terminal_lanes_skip_inference():
    net = CountingNet(build_architecture("R2", size=5))
    moves = rollout_step_batch([_terminal(), _terminal()], net, RngStream(0))
    assert moves == [None, None] and net.calls == 0


def test_uniform_rollout_step_frequencies():
    pos = goban.new_position(5)
    rng = RngStream(1)
    counts = np.zeros(25)
    for _ in range(100):
        for mv in rollout_step_batch([pos] * 1000, None, rng):
            counts[mv.point[0] * 5 + mv.point[1]] += 1
    assert np.abs(counts / 100_000 - 1 / 25).max() < 0.01


def test_playout_kernel_first_move_is_uniform():
    n = 5
    boards = np.stack([_board.empty_board(n)] * 50_000)
    colors = np.full(len(boards), BLACK, dtype=np.int8)
    kos = np.full(len(boards), -1, dtype=np.int64)
    passes = np.zeros(len(boards), dtype=np.int64)
    moves = np.zeros(len(boards), dtype=np.int64)
    _board.playout(boards, colors, kos, passes, moves, n, 1, RngStream(2).state)
    grids = np.stack([_board.unpad(b, n) for b in boards])
    assert (grids != 0).sum(axis=(1, 2)).tolist() == [1] * len(boards)
    freq = (grids == BLACK).reshape(len(boards), -1).mean(axis=0)
    assert np.abs(freq - 1 / 25).max() < 0.01


def test_uniform_rollouts_never_fill_own_eyes():
    # Black owns single-point eyes at (0,0) and (0,2); the only legal non-eye play is elsewhere.
    pos = goban.setup_position(3, black=[(0, 1), (1, 0), (1, 1), (1, 2)], white=[(2, 0), (2, 1)])
    mask = _board.rollout_mask(pos.board, 3, BLACK, -1).reshape(3, 3)
    assert not mask[0, 0] and not mask[0, 2]
    assert mask[2, 2]


def test_rollouts_respect_move_cap():
    game = GoGame(move_cap=12)
    winners = game.rollout([goban.new_position(9)] * 16, RngStream(0))
    assert len(winners) == 16 and set(winners) <= {BLACK, WHITE, None}
    n = 9
    boards = np.stack([_board.empty_board(n)] * 64)
    moves = np.zeros(64, dtype=np.int64)
    passes = np.zeros(64, dtype=np.int64)
    _board.playout(boards, np.full(64, BLACK, np.int8), np.full(64, -1, np.int64), passes, moves,
                   n, 2 * n * n, RngStream(3).state)
    assert (moves <= 2 * n * n).all()
    assert ((passes >= 2) | (moves == 2 * n * n)).all()


def _spike_net():
    # A 3x3 kernel that fires only where the lone opponent stone sits just to the left.
    w = np.zeros((1, 16, 3, 3), dtype=np.float32)
    w[0, 1, 1, 0] = 50.0
    return PolicyNet([LayerSpec(16, 1, 3, 3, has_relu=False)], [w], [np.zeros(1, np.float32)])


def test_network_rollout_policy_concentrates():
    pos = goban.play(goban.new_position(5), Move(BLACK, (2, 2)))
    net = _spike_net()
    rng = RngStream(4)
    picks = [m.point for m in rollout_step_batch([pos] * 2000, net, rng)]
    assert sum(p == (2, 3) for p in picks) / len(picks) > 0.99


def test_network_rollouts_finish_games():
    net = build_architecture("R2", size=5, seed=1)
    game = GoGame(rollout_policy=net)
    winners = game.rollout([goban.new_position(5)] * 4, RngStream(0))
    assert len(winners) == 4


def test_greedy_move():
    pos = goban.play(goban.new_position(5), Move(BLACK, (0, 0)))
    zero = build_architecture("R2", size=5, init="zeros")
    assert greedy_move(pos, zero) == Move(WHITE, (0, 1))
    spike_pos = goban.play(goban.new_position(5), Move(BLACK, (2, 2)))
    assert greedy_move(spike_pos, _spike_net()) == Move(WHITE, (2, 3))
    white = [(r, c) for r in range(3) for c in range(3) if (r, c) not in ((0, 0), (2, 2))]
    stuck = goban.setup_position(3, white=white)
    assert greedy_move(stuck, build_architecture("R2", size=3, init="zeros")) == Move(BLACK, None)
    with pytest.raises(ValueError):
        greedy_move(_terminal(), zero)
