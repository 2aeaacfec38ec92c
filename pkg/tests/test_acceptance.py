"""The ten acceptance criteria, each run at its stated size and tolerance."""
import time

import numpy as np

from convgo import bandit, corpus, goban, sgf, trainer
from convgo.arena import MatchConfig, RandomEngine, run_match, std_error
from convgo.goban import BLACK, WHITE, Move
from convgo.gtp import Engine, EngineOptions, format_vertex
from convgo.policy_net import LayerSpec, PolicyNet, build_architecture, forward_batch
from convgo.rng import RngStream
from convgo.search import GoGame, SearchConfig, Searcher, batch_search
from convgo.trainer import loss_and_grads
from nets import random_input, random_mask, random_net
from oracles import direct_forward
from rules_check import check_random_games
from synthetic import BernoulliGame
from test_gtp import is_legal_reply, run_golden, small_engine


def test_criterion_1_rules_oracles(verdict):
    t0 = time.perf_counter()
    stats = check_random_games(10_000, size=5, seed=2024)
    elapsed = time.perf_counter() - t0
    bad = sum(stats[k] for k in ("legality", "capture", "liberties", "hash", "score"))
    ok = bad == 0 and stats["games"] == 10_000 and elapsed < 60
    verdict(1, ok, f"{stats['games']} games, {stats['moves']} moves, {bad} mismatches, {elapsed:.1f} s")
    assert ok, stats


def test_criterion_2_batch_accounting(verdict):
    net = build_architecture("R2", size=9, seed=0)
    pos = goban.play(goban.new_position(9), Move(BLACK, (2, 6)))
    lines, ok = [], True
    for batch, rounds in ((64, 80), (128, 40), (256, 20)):
        cfg = SearchConfig(total_rollouts=5120, batch_size=batch, prior_strength=16, seed=batch)
        game = BernoulliGame(np.linspace(0.2, 0.7, 12), priors=np.linspace(1, 2, 12))
        s = Searcher(game, cfg)
        res = s.search(())
        toy = (game.rollout_calls == rounds and game.rollout_lanes == 5120
               and res.rollouts == 5120 and res.backups == rounds
               and s.root.n.sum() - s.root.prior_n.sum() == 5120)
        go = Searcher(GoGame(7.5, prior_policy=net), cfg)
        gres = go.search(pos)
        real = (gres.rollouts == 5120 and gres.backups == rounds and sum(gres.visits) == 5120
                and go.root.n.sum() - go.root.prior_n.sum() == 5120)
        ok &= toy and real
        lines.append(f"B={batch}: {rounds} rounds, {gres.rollouts} rollouts")
    verdict(2, ok, "; ".join(lines))
    assert ok


def _distinct_first_actions(bandit_name, seed, lanes=64):
    pos = goban.new_position(9)
    cfg = SearchConfig(total_rollouts=lanes, batch_size=lanes, bandit=bandit_name, seed=seed)
    s = Searcher(GoGame(), cfg)
    root = s.prepare_root(pos)
    assert len(root.actions) >= 10
    return len({path[0][1] for path, _ in s.explore(root, lanes)})


def test_criterion_3_batch_diversity(verdict):
    ucb = sum(_distinct_first_actions("ucb1", seed) == 1 for seed in range(100))
    ts = sum(_distinct_first_actions("thompson", seed) >= 2 for seed in range(100))
    ok = ucb == 100 and ts >= 99
    verdict(3, ok, f"UCB1 single action in {ucb}/100 runs, Thompson spread in {ts}/100 runs")
    assert ok


def test_criterion_4_bandit_regret(verdict):
    t0 = time.perf_counter()
    base = np.r_[np.linspace(0.1, 0.45, 9), 0.55]
    share = {"ucb1": [], "thompson": []}
    for seed in range(50):
        probs = np.random.default_rng(seed).permutation(base)
        best = int(np.argmax(probs))
        for policy in share:
            chosen = bandit.simulate(probs, 20_000, policy, RngStream(seed))
            share[policy].append(np.mean(chosen[19_000:] == best))
    elapsed = time.perf_counter() - t0
    means = {k: float(np.mean(v)) for k, v in share.items()}
    ok = all(m >= 0.9 for m in means.values()) and elapsed < 30
    verdict(4, ok, f"best-arm share UCB1 {means['ucb1']:.3f}, Thompson {means['thompson']:.3f}, "
                   f"{elapsed:.1f} s")
    assert ok


def test_criterion_5_inference(verdict):
    rng = np.random.default_rng(5)
    worst_rel, worst_mass, masked_leak = 0.0, 0.0, 0.0
    for _ in range(100):
        net = random_net(rng)
        size = int(rng.integers(3, 10))
        x = random_input(rng, 2, size)
        masks = random_mask(rng, 2, size)
        layers = [(w, b, s.has_relu) for s, w, b in zip(net.layers, net.weights, net.biases)]
        for xi, mi, d in zip(x, masks, forward_batch(net, list(x), list(masks))):
            want = direct_forward(layers, xi, mi)
            live = want > 0
            if live.any():
                worst_rel = max(worst_rel, float(np.max(np.abs(d.probs[live] - want[live]) / want[live])))
                worst_mass = max(worst_mass, abs(float(d.probs.sum()) - 1.0))
            masked_leak = max(masked_leak, float(np.abs(d.probs[~mi]).max(initial=0.0)))
    ok = worst_rel <= 1e-5 and worst_mass <= 1e-6 and masked_leak == 0.0
    verdict(5, ok, f"max relative error {worst_rel:.2e}, max |sum-1| {worst_mass:.2e}, "
                   f"masked mass {masked_leak}")
    assert ok


def _gradient_check():
    # Covers every layer type: rectified and linear convolutions at kernel sizes 5, 1 and 3.
    rng = np.random.default_rng(6)
    specs = [LayerSpec(16, 3, 5, 5), LayerSpec(3, 2, 1, 1), LayerSpec(2, 2, 3, 3, has_relu=False),
             LayerSpec(2, 1, 3, 3, has_relu=False)]
    ws = [rng.normal(0, 0.4, (s.out_channels, s.in_channels, s.kernel_h, s.kernel_w)) for s in specs]
    bs = [rng.normal(0, 0.1, s.out_channels) for s in specs]
    net = PolicyNet(specs, ws, bs)
    x = (rng.random((3, 16, 4, 4)) < 0.4).astype(np.uint8)
    masks = rng.random((3, 4, 4)) < 0.8
    masks[:, 0, 0] = True
    labels = np.array([rng.choice(np.flatnonzero(m.ravel())) for m in masks])
    _, gw, gb = loss_and_grads(net, x, masks, labels)
    analytic = [g for pair in zip(gw, gb) for g in pair]
    eps, worst = 1e-6, 0.0
    for p, g in zip(net.parameters(), analytic):
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + eps
            up = loss_and_grads(net, x, masks, labels)[0]
            p[idx] = old - eps
            down = loss_and_grads(net, x, masks, labels)[0]
            p[idx] = old
            num = (up - down) / (2 * eps)
            worst = max(worst, abs(num - g[idx]) / max(abs(num) + abs(g[idx]), 1e-7))
    return worst


def test_criterion_6_training(verdict, tmp_path):
    t0 = time.perf_counter()
    worst = _gradient_check()
    paths = corpus.write_corpus(tmp_path, 100, seed=0)
    games = sgf.scan_corpus(paths)
    pairs = [sgf.to_training_pairs(g, name) for name, g in games]
    train_pairs = [p for ps in pairs[:90] for p in ps]
    held_pairs = [p for ps in pairs[90:] for p in ps]
    cfg = trainer.preset("R2")
    _, report = trainer.train(build_architecture("R2", seed=0), train_pairs, cfg, holdout=held_pairs)
    elapsed = time.perf_counter() - t0
    ok = (worst < 1e-3 and len(games) == 100 and report.accuracy_split == "held-out"
          and report.accuracy > 10 / 361 and elapsed < 1800)
    verdict(6, ok, f"gradient relative error {worst:.1e}; R2 held-out top-1 {100 * report.accuracy:.2f}% "
                   f"on {len(held_pairs)} positions, {elapsed:.0f} s")
    assert ok


def test_criterion_7_beats_random(verdict):
    def mcts(seed):
        cfg = SearchConfig(total_rollouts=1024, batch_size=32, bandit="thompson", seed=seed)
        return Engine(EngineOptions(search=cfg, size=9))

    t0 = time.perf_counter()
    rep = run_match(MatchConfig(mcts, RandomEngine, games=100, size=9, komi=7.5, seed=7))
    elapsed = time.perf_counter() - t0
    ok = rep.wins_a >= 95 and not rep.forfeits and elapsed < 1200
    verdict(7, ok, f"MCTS won {rep.wins_a}/100 against random, {elapsed / 60:.1f} min")
    assert ok


def test_criterion_8_standard_error(verdict):
    se = std_error(0.644, 200)
    ok = abs(se - 0.0339) <= 1e-4
    verdict(8, ok, f"std_error(0.644, 200) = {se:.5f}")
    assert ok


def test_criterion_9_reproducible(verdict):
    net = build_architecture("R2", size=9, seed=3)
    pos = goban.setup_position(9, black=[(2, 2), (4, 4)], white=[(6, 6)], to_move=WHITE)
    configs = [
        SearchConfig(total_rollouts=1024, batch_size=32, seed=9),
        SearchConfig(total_rollouts=256, batch_size=64, bandit="ucb1", seed=9),
        SearchConfig(total_rollouts=128, batch_size=32, seed=9, prior_policy=net, rollout_policy=net,
                     rollout_move_cap=40),
    ]
    same = 0
    for cfg in configs:
        a = batch_search(pos, GoGame.from_config(cfg), cfg).to_bytes()
        b = batch_search(pos, GoGame.from_config(cfg), cfg).to_bytes()
        same += a == b
    ok = same == len(configs)
    verdict(9, ok, f"{same}/{len(configs)} configurations byte-identical across runs")
    assert ok


def test_criterion_10_gtp(verdict):
    mismatches, illegal, _ = run_golden(small_engine())
    rng = np.random.default_rng(10)
    engine = small_engine(4)
    legal = 0
    for _ in range(50):
        engine.handle("clear_board")
        for _ in range(int(rng.integers(10, 50))):
            pts = goban.legal_points(engine.pos)
            if len(pts) == 0:
                break
            color = "b" if engine.pos.to_move == BLACK else "w"
            engine.handle(f"play {color} {format_vertex(divmod(int(rng.choice(pts)), 9), 9)}")
        before = engine.pos
        color = "b" if before.to_move == BLACK else "w"
        legal += is_legal_reply(before, before.to_move, engine.handle(f"genmove {color}")[2:-2])
    ok = not mismatches and not illegal and legal == 50
    verdict(10, ok, f"golden transcript {40 - len(mismatches)}/40 exact, {legal}/50 genmoves legal")
    assert ok, mismatches
